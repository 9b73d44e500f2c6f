#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "solen/experiment.hpp"

using namespace solen;
using namespace solen::experiment;
using Catch::Matchers::WithinAbs;

namespace {

scene::SensorGeometry lens_scene() { return scene::build_sensor(scene::default_scene()); }

// modest fan keeps the protocol cases quick; behavior is identical in kind
const ray::FanParams kFan{100, 120.0};

std::string temp_dir(const char* leaf) {
    const auto dir = std::filesystem::temp_directory_path() / "solen_test_out" / leaf;
    std::filesystem::remove_all(dir);
    return dir.string();
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

} // namespace

TEST_CASE("differential observable") {
    CHECK(differential(0.3, 0.3) == 0.0);
    CHECK_THAT(differential(0.1, 0.3), WithinAbs(0.5, 1e-15));
    CHECK(std::isnan(differential(0.0, 0.0)));
}

TEST_CASE("rotation sweep over the reference angles") {
    const auto g = lens_scene();
    const std::vector<double> thetas{-3.0, 0.0, 3.0};
    const auto sweep = rotation_sweep(g, thetas, kFan);
    REQUIRE(sweep.rows.size() == 3);

    const auto& neg = sweep.rows[0];
    const auto& mid = sweep.rows[1];
    const auto& pos = sweep.rows[2];

    CHECK(neg.right_power > neg.left_power);
    CHECK(pos.left_power > pos.right_power);
    CHECK(std::fabs(differential(mid.left_power, mid.right_power)) <= 1e-9);

    // antisymmetry of the differential over the mirrored pair
    const double d_neg = differential(neg.left_power, neg.right_power);
    const double d_pos = differential(pos.left_power, pos.right_power);
    CHECK(std::fabs(d_neg + d_pos) <= 1e-9);

    // errors carry the offending angle
    CHECK_THROWS_WITH(rotation_sweep(g, std::vector<double>{120.0}, kFan),
                      Catch::Matchers::ContainsSubstring("120"));
}

TEST_CASE("readout model") {
    const ReadoutModel readout;
    CHECK(readout.voltage(0.0) == 3.3);
    CHECK(readout.voltage(0.5) < readout.voltage(0.2));  // more light, lower voltage
    CHECK(readout.voltage(1.0) >= 0.0);

    CHECK_THROWS_AS((ReadoutModel{0.0, 1.0}.validate()), ValidationError);
    CHECK_THROWS_AS((ReadoutModel{3.3, 4.0}.validate()), ValidationError);
}

TEST_CASE("protocol synthesis and folding") {
    const auto g = lens_scene();
    const ReadoutModel readout;
    const ProtocolSpec protocol;  // 3 deg, 15 deg/s, 0.8 s holds, 6 cycles, 100 Hz
    const auto trace = synthesize_protocol(g, readout, protocol, kFan);

    SECTION("trajectory arithmetic") {
        CHECK(trace.samples_per_cycle == 240);  // 4*(3/15)s ramps + 2*0.8s holds at 100 Hz
        CHECK(trace.cycle_count == 6);
        CHECK(trace.samples.size() == 1440);
        CHECK_THAT(trace.duration_s, WithinAbs(14.4, 1e-12));
        for (std::size_t i = 1; i < trace.samples.size(); ++i)
            CHECK(trace.samples[i].time_s > trace.samples[i - 1].time_s);
        for (const auto& s : trace.samples) {
            CHECK(s.theta_deg >= -3.0);
            CHECK(s.theta_deg <= 3.0);
            CHECK(s.left_voltage >= 0.0);
            CHECK(s.left_voltage <= readout.v_max);
        }
    }
    SECTION("cycles repeat bit-identically") {
        const int spc = trace.samples_per_cycle;
        for (int k = 0; k < spc; ++k) {
            CHECK(trace.samples[k].theta_deg == trace.samples[k + spc].theta_deg);
            CHECK(trace.samples[k].left_voltage == trace.samples[k + spc].left_voltage);
        }
    }
    SECTION("fold drops holds, keeps exact-angle bins with zero deviation") {
        const auto folded = crop_and_fold(trace, 1);
        REQUIRE(!folded.bins.empty());
        // ramp angles are multiples of amplitude/ramp-samples = 0.15 deg
        CHECK(folded.bins.size() == 41);
        CHECK(folded.bins.front().theta_deg == -3.0);
        CHECK(folded.bins.back().theta_deg == 3.0);
        for (const auto& b : folded.bins) {
            CHECK(b.left_std == 0.0);
            CHECK(b.right_std == 0.0);
        }
        // each extreme angle: one ramp-arrival and one ramp-departure sample
        // per cycle, over the 5 kept cycles
        CHECK(folded.bins.front().sample_count == 10);
        CHECK(folded.bins.back().sample_count == 10);

        // voltage dips on the receiver the spot moves toward
        const auto& neg = folded.bins.front();   // -3 deg
        const auto& pos = folded.bins.back();    // +3 deg
        const auto mid = folded.bins[20];        // 0 deg
        CHECK(mid.theta_deg == 0.0);
        CHECK(neg.right_mean < mid.right_mean);
        CHECK(neg.left_mean > mid.left_mean);
        CHECK(pos.left_mean < mid.left_mean);
        CHECK(pos.right_mean > mid.right_mean);

        // mirror symmetry of the folded curves
        for (std::size_t i = 0; i < folded.bins.size(); ++i) {
            const auto& a = folded.bins[i];
            const auto& b = folded.bins[folded.bins.size() - 1 - i];
            CHECK_THAT(a.theta_deg, WithinAbs(-b.theta_deg, 1e-12));
            CHECK_THAT(a.left_mean, WithinAbs(b.right_mean, 1e-9));
        }
    }
    SECTION("repeated synthesis is deterministic") {
        const auto again = synthesize_protocol(g, readout, protocol, kFan);
        REQUIRE(again.samples.size() == trace.samples.size());
        for (std::size_t i = 0; i < trace.samples.size(); i += 97) {
            CHECK(again.samples[i].theta_deg == trace.samples[i].theta_deg);
            CHECK(again.samples[i].left_voltage == trace.samples[i].left_voltage);
            CHECK(again.samples[i].right_voltage == trace.samples[i].right_voltage);
        }
    }
    SECTION("discard bounds") {
        CHECK_THROWS_AS(crop_and_fold(trace, 6), ValidationError);
        CHECK_THROWS_AS(crop_and_fold(trace, -1), ValidationError);
        CHECK_NOTHROW(crop_and_fold(trace, 0));
    }
}

TEST_CASE("protocol validation") {
    const auto g = lens_scene();
    ProtocolSpec bad;
    bad.amplitude_deg = 0.0;
    CHECK_THROWS_AS(synthesize_protocol(g, {}, bad, kFan), ValidationError);
    bad = {};
    bad.sample_rate_hz = 1.0;  // cannot resolve a 0.2 s ramp
    CHECK_THROWS_AS(synthesize_protocol(g, {}, bad, kFan), ValidationError);
}

TEST_CASE("lens vs no-lens comparison") {
    const auto config = scene::default_scene();
    const std::vector<double> thetas{-3.0, 0.0, 3.0};
    const auto report = compare_with_without_lens(config, thetas, kFan);
    REQUIRE(report.rows.size() == 3);

    const auto& neg = report.rows[0];
    const auto& mid = report.rows[1];
    const auto& pos = report.rows[2];

    CHECK(std::fabs(mid.with_differential) <= 1e-9);
    CHECK(std::fabs(mid.without_differential) <= 1e-9);
    CHECK(neg.with_differential > 0.0);
    CHECK(pos.with_differential < 0.0);
    CHECK(std::fabs(neg.without_differential) < std::fabs(neg.with_differential));
    CHECK(std::fabs(pos.without_differential) < std::fabs(pos.with_differential));
    CHECK(report.ratio_at_min_theta >= 5.0);  // with/without separation strength
    CHECK(report.ratio_at_max_theta >= 5.0);

    scene::SceneConfig no_lens = config;
    no_lens.lens_spec.reset();
    CHECK_THROWS_AS(compare_with_without_lens(no_lens, thetas, kFan), ValidationError);
}

TEST_CASE("report files") {
    const auto g = lens_scene();
    const std::vector<double> thetas{-3.0, 0.0, 3.0};
    const auto sweep = rotation_sweep(g, thetas, kFan);

    SECTION("sweep csv and svg") {
        const auto dir = temp_dir("sweep");
        report_sweep(dir, sweep);
        const std::string csv = slurp(dir + "/sweep.csv");
        CHECK(csv.rfind(kSweepHeader, 0) == 0);
        CHECK(std::count(csv.begin(), csv.end(), '\n') == 4);
        const std::string svg_text = slurp(dir + "/sweep_power.svg");
        CHECK(svg_text.find("<svg") != std::string::npos);
        CHECK(svg_text.find("polyline") != std::string::npos);
    }
    SECTION("protocol csv, folded csv, banded svg") {
        ProtocolSpec quick;
        quick.cycles = 2;
        const auto trace = synthesize_protocol(g, {}, quick, kFan);
        const auto folded = crop_and_fold(trace, 1);
        const auto dir = temp_dir("protocol");
        report_protocol(dir, trace, folded);
        CHECK(slurp(dir + "/protocol.csv").rfind(kProtocolHeader, 0) == 0);
        CHECK(slurp(dir + "/folded.csv").rfind(kFoldedHeader, 0) == 0);
        const std::string svg_text = slurp(dir + "/voltage_vs_angle.svg");
        CHECK(svg_text.find("polygon") != std::string::npos);  // sigma bands
    }
    SECTION("compare csv with ratio summary") {
        const auto report = compare_with_without_lens(scene::default_scene(), thetas, kFan);
        const auto dir = temp_dir("compare");
        report_compare(dir, report);
        CHECK(slurp(dir + "/compare.csv").rfind(kCompareHeader, 0) == 0);
        const std::string summary = slurp(dir + "/compare_summary.csv");
        CHECK(summary.find("ratio_at_min_theta,") != std::string::npos);
    }
    SECTION("empty results are refused") {
        CHECK_THROWS_AS(report_sweep(temp_dir("empty"), SweepResult{}), ValidationError);
        CHECK_THROWS_AS(report_protocol(temp_dir("empty2"), ProtocolTrace{}, FoldedCurves{}),
                        ValidationError);
    }
}

TEST_CASE("csv writers format") {
    SweepResult sweep;
    sweep.rows.push_back({-3.0, 0.0, 0.513851036, 0, 55});
    std::ostringstream out;
    write_sweep_csv(out, sweep);
    CHECK(out.str() == std::string(kSweepHeader) + "\n-3,0,0.513851036,0,55\n");
}
