#pragma once

// Simulation sweeps and the rotation test protocol, on top of the ray tracer:
// per-angle receiver tallies, the trapezoidal rotate/hold cycle rendered as a
// voltage time series, fold-by-angle aggregation, and the lens vs no-lens
// comparison. The differential observable is D = (right - left)/(right + left).

#include <bit>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "solen/error.hpp"
#include "solen/raytrace.hpp"
#include "solen/scene.hpp"
#include "solen/svg.hpp"
#include "solen/textio.hpp"

namespace solen::experiment {

using ray::DetectionTally;
using ray::FanParams;
using ray::TraceLimits;

// ---------------------------------------------------------------------------
// types
// ---------------------------------------------------------------------------

struct SweepRow {
    double theta_deg = 0.0;
    double left_power = 0.0;
    double right_power = 0.0;
    long left_count = 0;
    long right_count = 0;
};

struct SweepResult {
    std::vector<SweepRow> rows;
};

/// Affine photoreceiver map V = v_max - gain * detected_power; more light,
/// lower voltage. v_max is the dark level.
struct ReadoutModel {
    double v_max = 3.3;  // volts
    double gain = 3.0;   // volts per unit detected power

    void validate() const {
        if (!(v_max > 0.0)) throw ValidationError("readout: v_max must be positive");
        if (!(gain > 0.0)) throw ValidationError("readout: gain must be positive");
        if (!(v_max - gain >= 0.0))
            throw ValidationError("readout: full detected power would drive the voltage negative");
    }
    double voltage(double power) const { return v_max - gain * power; }
};

struct ProtocolSpec {
    double amplitude_deg = 3.0;
    double speed_deg_per_s = 15.0;
    double hold_s = 0.8;
    int cycles = 6;
    double sample_rate_hz = 100.0;

    void validate() const {
        std::string problems;
        const auto add = [&](const char* p) {
            if (!problems.empty()) problems += "; ";
            problems += p;
        };
        if (!(amplitude_deg > 0.0 && amplitude_deg <= 90.0)) add("amplitude must lie in (0, 90] degrees");
        if (!(speed_deg_per_s > 0.0)) add("angular speed must be positive");
        if (!(hold_s > 0.0)) add("hold time must be positive");
        if (cycles < 1) add("cycle count must be >= 1");
        if (!(sample_rate_hz > 0.0)) add("sample rate must be positive");
        if (!problems.empty()) throw ValidationError("protocol: " + problems);
    }
};

struct ProtocolSample {
    double time_s = 0.0;
    double theta_deg = 0.0;
    double left_voltage = 0.0;
    double right_voltage = 0.0;
    bool hold_phase = false;
};

struct ProtocolTrace {
    std::vector<ProtocolSample> samples;
    int cycle_count = 0;
    int samples_per_cycle = 0;
    double sample_rate_hz = 0.0;
    double duration_s = 0.0;
};

struct FoldedBin {
    double theta_deg = 0.0;
    double left_mean = 0.0, left_std = 0.0;
    double right_mean = 0.0, right_std = 0.0;
    long sample_count = 0;
};

struct FoldedCurves {
    std::vector<FoldedBin> bins;  // theta ascending
};

struct CompareRow {
    double theta_deg = 0.0;
    double with_left = 0.0, with_right = 0.0, with_differential = 0.0;
    double without_left = 0.0, without_right = 0.0, without_differential = 0.0;
};

struct CompareReport {
    std::vector<CompareRow> rows;
    // |D_with| / |D_without| at the extreme angles of the sweep.
    double ratio_at_min_theta = 0.0;
    double ratio_at_max_theta = 0.0;
};

/// Normalized left/right imbalance; NaN when nothing was detected.
inline double differential(double left_power, double right_power) {
    const double total = left_power + right_power;
    if (total == 0.0) return std::numeric_limits<double>::quiet_NaN();
    return (right_power - left_power) / total;
}

// ---------------------------------------------------------------------------
// sweeps
// ---------------------------------------------------------------------------

inline SweepRow sweep_row_from_tally(double theta_deg, const DetectionTally& t) {
    return {theta_deg, t.left.power, t.right.power, t.left.ray_count, t.right.ray_count};
}

/// One fan run per angle, each at the base geometry rotated by that angle.
inline SweepResult rotation_sweep(const scene::SensorGeometry& base,
                                  std::span<const double> thetas_deg,
                                  const FanParams& fan = {}, const TraceLimits& limits = {},
                                  int threads = 1) {
    SweepResult out;
    out.rows.reserve(thetas_deg.size());
    for (const double theta : thetas_deg) {
        try {
            const auto posed = scene::apply_pose(base, {theta, base.pivot});
            out.rows.push_back(sweep_row_from_tally(theta, ray::run_fan(posed, fan, limits, threads)));
        } catch (const std::runtime_error& e) {
            throw NumericError("rotation sweep at theta = " + textio::format_g9(theta) +
                               " deg: " + e.what());
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// protocol synthesis
// ---------------------------------------------------------------------------

namespace detail {

/// Angle lookup keyed on the exact bit pattern of theta: the trajectory
/// revisits identical angles every cycle, so each distinct pose is traced once.
class TallyCache {
public:
    TallyCache(const scene::SensorGeometry& base, FanParams fan, TraceLimits limits, int threads)
        : base_(base), fan_(fan), limits_(limits), threads_(threads) {}

    const DetectionTally& at(double theta_deg) {
        const std::uint64_t key = std::bit_cast<std::uint64_t>(theta_deg);
        auto it = cache_.find(key);
        if (it == cache_.end()) {
            const auto posed = scene::apply_pose(base_, {theta_deg, base_.pivot});
            it = cache_.emplace(key, ray::run_fan(posed, fan_, limits_, threads_)).first;
        }
        return it->second;
    }

private:
    const scene::SensorGeometry& base_;
    FanParams fan_;
    TraceLimits limits_;
    int threads_;
    std::map<std::uint64_t, DetectionTally> cache_;
};

} // namespace detail

/// Samples the trapezoidal trajectory (ramp to -amp, hold, return, ramp to
/// +amp, hold, return) at the given rate and maps detected power to voltage.
/// The angle at a sample depends only on its index within the cycle, so every
/// cycle reproduces bit-identical angles and voltages.
inline ProtocolTrace synthesize_protocol(const scene::SensorGeometry& base,
                                         const ReadoutModel& readout = {},
                                         const ProtocolSpec& protocol = {},
                                         const FanParams& fan = {}, const TraceLimits& limits = {},
                                         int threads = 1) {
    protocol.validate();
    readout.validate();
    const long ramp = std::lround(protocol.amplitude_deg / protocol.speed_deg_per_s *
                                  protocol.sample_rate_hz);
    const long hold = std::lround(protocol.hold_s * protocol.sample_rate_hz);
    if (ramp < 1)
        throw ValidationError("protocol: sample rate too low to resolve the rotation ramps");
    if (hold < 1)
        throw ValidationError("protocol: sample rate too low to resolve the hold phases");
    const long spc = 4 * ramp + 2 * hold;

    const auto theta_at = [&](long k_in_cycle) -> std::pair<double, bool> {
        const double amp = protocol.amplitude_deg;
        const double r = static_cast<double>(ramp);
        const long b1 = ramp, b2 = ramp + hold, b3 = 2 * ramp + hold;
        const long b4 = 3 * ramp + hold, b5 = 3 * ramp + 2 * hold;
        if (k_in_cycle <= b1) return {-amp * (static_cast<double>(k_in_cycle) / r), false};
        if (k_in_cycle < b2) return {-amp, true};
        if (k_in_cycle <= b3) return {-amp * (static_cast<double>(b3 - k_in_cycle) / r), false};
        if (k_in_cycle <= b4) return {amp * (static_cast<double>(k_in_cycle - b3) / r), false};
        if (k_in_cycle < b5) return {amp, true};
        return {amp * (static_cast<double>(spc - k_in_cycle) / r), false};
    };

    detail::TallyCache cache(base, fan, limits, threads);
    ProtocolTrace trace;
    trace.cycle_count = protocol.cycles;
    trace.samples_per_cycle = static_cast<int>(spc);
    trace.sample_rate_hz = protocol.sample_rate_hz;
    trace.duration_s = static_cast<double>(protocol.cycles) * static_cast<double>(spc) /
                       protocol.sample_rate_hz;
    const long total = static_cast<long>(protocol.cycles) * spc;
    trace.samples.reserve(static_cast<std::size_t>(total));
    for (long k = 0; k < total; ++k) {
        const auto [theta, is_hold] = theta_at(k % spc);
        const DetectionTally& tally = cache.at(theta);
        trace.samples.push_back({static_cast<double>(k) / protocol.sample_rate_hz, theta,
                                 readout.voltage(tally.left.power),
                                 readout.voltage(tally.right.power), is_hold});
    }
    return trace;
}

/// Drops the first `discard_cycles` cycles and every hold-phase sample, then
/// aggregates the rest by their exact sampled angle.
inline FoldedCurves crop_and_fold(const ProtocolTrace& trace, int discard_cycles = 1) {
    if (discard_cycles < 0 || discard_cycles >= trace.cycle_count)
        throw ValidationError("crop_and_fold: discard count must be < cycle count");
    if (trace.samples_per_cycle <= 0)
        throw ValidationError("crop_and_fold: trace lacks cycle structure");

    std::map<double, std::vector<std::pair<double, double>>> bins;
    const std::size_t start =
        static_cast<std::size_t>(discard_cycles) * static_cast<std::size_t>(trace.samples_per_cycle);
    for (std::size_t i = start; i < trace.samples.size(); ++i) {
        const auto& s = trace.samples[i];
        if (s.hold_phase) continue;
        bins[s.theta_deg].emplace_back(s.left_voltage, s.right_voltage);
    }
    if (bins.empty())
        throw ValidationError("crop_and_fold: no samples left after cropping");

    FoldedCurves out;
    out.bins.reserve(bins.size());
    for (const auto& [theta, values] : bins) {
        FoldedBin bin;
        bin.theta_deg = theta;
        bin.sample_count = static_cast<long>(values.size());
        const auto stats = [&](auto pick) {
            double mean = 0.0;
            bool constant = true;
            for (const auto& v : values) {
                mean += pick(v);
                if (pick(v) != pick(values.front())) constant = false;
            }
            mean /= static_cast<double>(values.size());
            if (constant) return std::pair{pick(values.front()), 0.0};
            double ss = 0.0;
            for (const auto& v : values) ss += (pick(v) - mean) * (pick(v) - mean);
            return std::pair{mean, std::sqrt(ss / static_cast<double>(values.size()))};
        };
        std::tie(bin.left_mean, bin.left_std) = stats([](const auto& v) { return v.first; });
        std::tie(bin.right_mean, bin.right_std) = stats([](const auto& v) { return v.second; });
        out.bins.push_back(bin);
    }
    return out;
}

// ---------------------------------------------------------------------------
// lens vs no-lens comparison
// ---------------------------------------------------------------------------

/// Runs the same sweep with the configured lens and with the oval replaced by
/// a flat face flush with the minor base, and reports both differentials.
inline CompareReport compare_with_without_lens(const scene::SceneConfig& config,
                                               std::span<const double> thetas_deg,
                                               const FanParams& fan = {},
                                               const TraceLimits& limits = {}, int threads = 1) {
    if (!config.lens_spec)
        throw ValidationError("compare: the scene configuration has no lens to compare against");
    if (thetas_deg.empty()) throw ValidationError("compare: no angles given");

    scene::SceneConfig without = config;
    without.lens_spec.reset();
    const auto geo_with = scene::build_sensor(config);
    const auto geo_without = scene::build_sensor(without);
    const SweepResult sweep_with = rotation_sweep(geo_with, thetas_deg, fan, limits, threads);
    const SweepResult sweep_without = rotation_sweep(geo_without, thetas_deg, fan, limits, threads);

    CompareReport report;
    report.rows.reserve(thetas_deg.size());
    for (std::size_t i = 0; i < thetas_deg.size(); ++i) {
        const auto& rw = sweep_with.rows[i];
        const auto& ro = sweep_without.rows[i];
        report.rows.push_back({rw.theta_deg, rw.left_power, rw.right_power,
                               differential(rw.left_power, rw.right_power), ro.left_power,
                               ro.right_power, differential(ro.left_power, ro.right_power)});
    }

    const auto ratio_at = [&](const CompareRow& row) {
        const double dw = std::fabs(row.with_differential);
        const double dn = std::fabs(row.without_differential);
        if (std::isnan(dw) || std::isnan(dn)) return std::numeric_limits<double>::quiet_NaN();
        if (dn == 0.0)
            return dw == 0.0 ? std::numeric_limits<double>::quiet_NaN()
                             : std::numeric_limits<double>::infinity();
        return dw / dn;
    };
    const auto min_it = std::min_element(report.rows.begin(), report.rows.end(),
                                         [](auto& a, auto& b) { return a.theta_deg < b.theta_deg; });
    const auto max_it = std::max_element(report.rows.begin(), report.rows.end(),
                                         [](auto& a, auto& b) { return a.theta_deg < b.theta_deg; });
    report.ratio_at_min_theta = ratio_at(*min_it);
    report.ratio_at_max_theta = ratio_at(*max_it);
    return report;
}

// ---------------------------------------------------------------------------
// reports
// ---------------------------------------------------------------------------

inline constexpr const char* kSweepHeader = "theta_deg,left_power,right_power,left_count,right_count";
inline constexpr const char* kProtocolHeader = "time_s,theta_deg,left_voltage_V,right_voltage_V";
inline constexpr const char* kFoldedHeader = "theta_deg,left_mean_V,left_std_V,right_mean_V,right_std_V";
inline constexpr const char* kCompareHeader =
    "theta_deg,with_left_power,with_right_power,with_differential,"
    "without_left_power,without_right_power,without_differential";

inline void write_sweep_csv(std::ostream& out, const SweepResult& sweep) {
    out << kSweepHeader << "\n";
    for (const auto& r : sweep.rows)
        out << textio::format_g9(r.theta_deg) << ',' << textio::format_g9(r.left_power) << ','
            << textio::format_g9(r.right_power) << ',' << r.left_count << ',' << r.right_count
            << "\n";
}

inline void write_protocol_csv(std::ostream& out, const ProtocolTrace& trace) {
    out << kProtocolHeader << "\n";
    for (const auto& s : trace.samples)
        out << textio::format_g9(s.time_s) << ',' << textio::format_g9(s.theta_deg) << ','
            << textio::format_g9(s.left_voltage) << ',' << textio::format_g9(s.right_voltage)
            << "\n";
}

inline void write_folded_csv(std::ostream& out, const FoldedCurves& folded) {
    out << kFoldedHeader << "\n";
    for (const auto& b : folded.bins)
        out << textio::format_g9(b.theta_deg) << ',' << textio::format_g9(b.left_mean) << ','
            << textio::format_g9(b.left_std) << ',' << textio::format_g9(b.right_mean) << ','
            << textio::format_g9(b.right_std) << "\n";
}

inline void write_compare_csv(std::ostream& out, const CompareReport& report) {
    out << kCompareHeader << "\n";
    for (const auto& r : report.rows)
        out << textio::format_g9(r.theta_deg) << ',' << textio::format_g9(r.with_left) << ','
            << textio::format_g9(r.with_right) << ',' << textio::format_g9(r.with_differential)
            << ',' << textio::format_g9(r.without_left) << ',' << textio::format_g9(r.without_right)
            << ',' << textio::format_g9(r.without_differential) << "\n";
}

inline void write_compare_summary_csv(std::ostream& out, const CompareReport& report) {
    out << "metric,value\n";
    out << "ratio_at_min_theta," << textio::format_g9(report.ratio_at_min_theta) << "\n";
    out << "ratio_at_max_theta," << textio::format_g9(report.ratio_at_max_theta) << "\n";
}

enum class ReportFormat { Csv, Svg, Both };

namespace detail {

inline void ensure_directory(const std::string& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("cannot create output directory '" + dir + "': " + ec.message());
}

inline void write_text_file(const std::string& path, const std::string& content) {
    textio::write_file(path, content);
}

inline bool wants_csv(ReportFormat f) { return f != ReportFormat::Svg; }
inline bool wants_svg(ReportFormat f) { return f != ReportFormat::Csv; }

} // namespace detail

inline void report_sweep(const std::string& dir, const SweepResult& sweep,
                         ReportFormat format = ReportFormat::Both) {
    if (sweep.rows.empty()) throw ValidationError("report: sweep result is empty");
    detail::ensure_directory(dir);
    if (detail::wants_csv(format)) {
        std::ostringstream ss;
        write_sweep_csv(ss, sweep);
        detail::write_text_file(dir + "/sweep.csv", ss.str());
    }
    if (detail::wants_svg(format)) {
        svg::LinePlot plot;
        plot.title = "Detected power vs rotation angle";
        plot.x_label = "rotation angle (deg)";
        plot.y_label = "detected power (fraction of emitted)";
        svg::Series left{"left receiver", "#1f77b4", {}, {}, {}};
        svg::Series right{"right receiver", "#d62728", {}, {}, {}};
        for (const auto& r : sweep.rows) {
            left.points.push_back({r.theta_deg, r.left_power});
            right.points.push_back({r.theta_deg, r.right_power});
        }
        plot.series = {left, right};
        detail::write_text_file(dir + "/sweep_power.svg", svg::render(plot));
    }
}

inline void report_protocol(const std::string& dir, const ProtocolTrace& trace,
                            const FoldedCurves& folded,
                            ReportFormat format = ReportFormat::Both) {
    if (trace.samples.empty()) throw ValidationError("report: protocol trace is empty");
    if (folded.bins.empty()) throw ValidationError("report: folded curves are empty");
    detail::ensure_directory(dir);
    if (detail::wants_csv(format)) {
        std::ostringstream ss;
        write_protocol_csv(ss, trace);
        detail::write_text_file(dir + "/protocol.csv", ss.str());
        std::ostringstream fs;
        write_folded_csv(fs, folded);
        detail::write_text_file(dir + "/folded.csv", fs.str());
    }
    if (detail::wants_svg(format)) {
        svg::LinePlot plot;
        plot.title = "Receiver voltage vs rotation angle";
        plot.x_label = "rotation angle (deg)";
        plot.y_label = "voltage (V)";
        svg::Series left{"left receiver", "#1f77b4", {}, {}, {}};
        svg::Series right{"right receiver", "#d62728", {}, {}, {}};
        for (const auto& b : folded.bins) {
            left.points.push_back({b.theta_deg, b.left_mean});
            left.band_low.push_back(b.left_mean - b.left_std);
            left.band_high.push_back(b.left_mean + b.left_std);
            right.points.push_back({b.theta_deg, b.right_mean});
            right.band_low.push_back(b.right_mean - b.right_std);
            right.band_high.push_back(b.right_mean + b.right_std);
        }
        plot.series = {left, right};
        detail::write_text_file(dir + "/voltage_vs_angle.svg", svg::render(plot));
    }
}

inline void report_compare(const std::string& dir, const CompareReport& report,
                           ReportFormat format = ReportFormat::Both) {
    if (report.rows.empty()) throw ValidationError("report: comparison is empty");
    detail::ensure_directory(dir);
    if (detail::wants_csv(format)) {
        std::ostringstream ss;
        write_compare_csv(ss, report);
        detail::write_text_file(dir + "/compare.csv", ss.str());
        std::ostringstream sum;
        write_compare_summary_csv(sum, report);
        detail::write_text_file(dir + "/compare_summary.csv", sum.str());
    }
    if (detail::wants_svg(format)) {
        svg::LinePlot plot;
        plot.title = "Differential signal, lens vs no lens";
        plot.x_label = "rotation angle (deg)";
        plot.y_label = "(right - left) / (right + left)";
        svg::Series with{"with lens", "#2ca02c", {}, {}, {}};
        svg::Series without{"without lens", "#7f7f7f", {}, {}, {}};
        for (const auto& r : report.rows) {
            if (!std::isnan(r.with_differential))
                with.points.push_back({r.theta_deg, r.with_differential});
            if (!std::isnan(r.without_differential))
                without.points.push_back({r.theta_deg, r.without_differential});
        }
        plot.series = {with, without};
        detail::write_text_file(dir + "/differential.svg", svg::render(plot));
    }
}

} // namespace solen::experiment
