#pragma once

// Optical characterization of a printed single layer. A measured transmission
// spectrum (T, A per wavelength) is inverted to the refractive index by
// modeling the layer as a plane-parallel, partially absorbing slab under
// incoherent multiple reflection. Also fits cure-depth working curves,
// Dc = Dp * ln(E / Ec), by least squares on (ln E, Dc).
//
// All functions are pure; safe to call concurrently.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "solen/error.hpp"
#include "solen/textio.hpp"

namespace solen::material {

// ---------------------------------------------------------------------------
// types
// ---------------------------------------------------------------------------

struct SpectrumSample {
    double wavelength_nm = 0.0;
    double transmittance = 0.0;  // T, fraction of incident power
    double absorptance = 0.0;    // A, fraction of incident power
};

/// Per-wavelength T/A record, wavelengths strictly increasing,
/// T + A <= 1 for every sample.
struct Spectrum {
    std::vector<SpectrumSample> samples;
};

struct SlabSample {
    Spectrum spectrum;
    double thickness_mm = 0.0;  // geometrical thickness of the single layer
};

/// One inverted row. Rows that fail the inversion carry the error message
/// instead of being dropped, so output row count always matches the input.
struct ConstantsRow {
    double wavelength_nm = 0.0;
    double reflectance = 0.0;            // R = 1 - T - A
    double interface_reflectance = 0.0;  // R_F, single-interface reflectance
    double refractive_index = 0.0;       // n, NaN when flagged
    std::string error;                   // empty when the row is valid

    bool ok() const { return error.empty(); }
};

struct OpticalConstants {
    std::vector<ConstantsRow> rows;

    long flagged_count() const {
        long n = 0;
        for (const auto& r : rows)
            if (!r.ok()) ++n;
        return n;
    }
};

struct WorkingCurvePoint {
    double energy_mj_cm2 = 0.0;
    double cure_depth_um = 0.0;
};

struct WorkingCurveFit {
    double penetration_um = 0.0;   // Dp, slope of Dc vs ln E
    double critical_mj_cm2 = 0.0;  // Ec, energy where the fitted Dc crosses zero
    double residual_rms_um = 0.0;

    double cure_depth_at(double energy_mj_cm2) const {
        return penetration_um * std::log(energy_mj_cm2 / critical_mj_cm2);
    }
};

// ---------------------------------------------------------------------------
// slab inversion
// ---------------------------------------------------------------------------

/// R = 1 - T - A. Domain error when T + A exceeds 1 (inconsistent spectrum).
inline double reflectance_from_ta(double transmittance, double absorptance) {
    if (!(transmittance >= 0.0 && transmittance <= 1.0))
        throw NumericError("reflectance_from_ta: T out of [0,1]: " + textio::format_g9(transmittance));
    if (!(absorptance >= 0.0 && absorptance <= 1.0))
        throw NumericError("reflectance_from_ta: A out of [0,1]: " + textio::format_g9(absorptance));
    if (transmittance + absorptance > 1.0)
        throw NumericError("reflectance_from_ta: T + A > 1 (T=" + textio::format_g9(transmittance) +
                           ", A=" + textio::format_g9(absorptance) + ")");
    return 1.0 - transmittance - absorptance;
}

/// Single-interface reflectance R_F recovered from the slab observables:
///   R_F = (b - sqrt(b^2 - 4 R (2 - R))) / (2 (2 - R)),  b = 2 + T^2 - (1-R)^2.
inline double interface_reflectance(double reflectance, double transmittance) {
    // 1e-12 slack absorbs round-off: the lossless forward model lands on
    // R + T = 1 only up to floating-point error.
    if (!(reflectance >= 0.0 && reflectance <= 1.0) ||
        !(transmittance >= 0.0 && transmittance <= 1.0) ||
        reflectance + transmittance > 1.0 + 1e-12)
        throw NumericError("interface_reflectance: (R,T) outside the physical simplex (R=" +
                           textio::format_g9(reflectance) + ", T=" + textio::format_g9(transmittance) + ")");
    const double one_minus_r = 1.0 - reflectance;
    const double b = 2.0 + transmittance * transmittance - one_minus_r * one_minus_r;
    double disc = b * b - 4.0 * reflectance * (2.0 - reflectance);
    if (disc < 0.0) {
        if (disc < -1e-12)
            throw NumericError("interface_reflectance: negative discriminant, non-physical (R,T) pair (R=" +
                               textio::format_g9(reflectance) + ", T=" + textio::format_g9(transmittance) + ")");
        disc = 0.0;  // round-off guard at the boundary
    }
    return (b - std::sqrt(disc)) / (2.0 * (2.0 - reflectance));
}

/// Refractive index of the partially absorbing slab:
///   n = (1+R_F)/(1-R_F) + sqrt( 4 R_F/(1-R_F)^2 - (lambda/(4 pi h))^2 ln^2[R_F T/(R-R_F)] ).
/// When |R - R_F| underflows the absorption term is taken as its analytic
/// zero limit instead of evaluating the near-singular logarithm.
inline double refractive_index(double reflectance, double transmittance,
                               double thickness_mm, double wavelength_nm) {
    if (!(thickness_mm > 0.0))
        throw ValidationError("refractive_index: thickness must be positive");
    if (!(wavelength_nm > 0.0))
        throw ValidationError("refractive_index: wavelength must be positive");
    if (!(transmittance > 0.0))
        throw NumericError("refractive_index: T must be positive");

    const double rf = interface_reflectance(reflectance, transmittance);
    const double one_minus_rf = 1.0 - rf;
    const double diff = reflectance - rf;

    if (std::fabs(diff) < 1e-12) {
        // Lossless limit: the log term vanishes and the closed form collapses
        // to n = (1 + sqrt(R_F)) / (1 - sqrt(R_F)).
        const double sr = std::sqrt(rf);
        return (1.0 + sr) / (1.0 - sr);
    }
    if (diff < 0.0)
        throw NumericError("refractive_index: R < R_F, log argument not positive (R=" +
                           textio::format_g9(reflectance) + ", R_F=" + textio::format_g9(rf) + ")");

    const double wavelength_mm = wavelength_nm * 1e-6;
    const double k = wavelength_mm / (4.0 * std::numbers::pi * thickness_mm) *
                     std::log(rf * transmittance / diff);
    const double radicand = 4.0 * rf / (one_minus_rf * one_minus_rf) - k * k;
    if (radicand < 0.0)
        throw NumericError("refractive_index: absorption term dominates (radicand " +
                           textio::format_g9(radicand) + "); thickness/wavelength mismatch");
    return (1.0 + rf) / one_minus_rf + std::sqrt(radicand);
}

struct SlabResponse {
    double transmittance = 0.0;
    double reflectance = 0.0;
};

/// Independent forward model of the incoherent slab, used to validate the
/// inversion: with R_F = ((n-1)/(n+1))^2 and tau = exp(-alpha h),
///   T = (1-R_F)^2 tau / (1 - R_F^2 tau^2),
///   R = R_F + R_F tau^2 (1-R_F)^2 / (1 - R_F^2 tau^2).
inline SlabResponse forward_slab_model(double refractive_index, double absorption_per_mm,
                                       double thickness_mm) {
    if (!(refractive_index >= 1.0))
        throw ValidationError("forward_slab_model: n must be >= 1");
    if (!(absorption_per_mm >= 0.0))
        throw ValidationError("forward_slab_model: absorption must be >= 0");
    if (!(thickness_mm > 0.0))
        throw ValidationError("forward_slab_model: thickness must be positive");
    const double rf = std::pow((refractive_index - 1.0) / (refractive_index + 1.0), 2);
    const double tau = std::exp(-absorption_per_mm * thickness_mm);
    const double den = 1.0 - rf * rf * tau * tau;
    const double t = (1.0 - rf) * (1.0 - rf) * tau / den;
    const double r = rf + rf * tau * tau * (1.0 - rf) * (1.0 - rf) / den;
    return {t, r};
}

/// Per-wavelength inversion of a slab sample. Failing rows are flagged in
/// place (wavelength attached to the message), never dropped.
inline OpticalConstants compute_constants(const SlabSample& sample) {
    if (!(sample.thickness_mm > 0.0))
        throw ValidationError("compute_constants: thickness must be positive");
    OpticalConstants out;
    out.rows.reserve(sample.spectrum.samples.size());
    constexpr double nan = std::numeric_limits<double>::quiet_NaN();
    for (const auto& s : sample.spectrum.samples) {
        ConstantsRow row;
        row.wavelength_nm = s.wavelength_nm;
        row.reflectance = row.interface_reflectance = row.refractive_index = nan;
        try {
            row.reflectance = reflectance_from_ta(s.transmittance, s.absorptance);
            row.interface_reflectance = interface_reflectance(row.reflectance, s.transmittance);
            row.refractive_index =
                refractive_index(row.reflectance, s.transmittance, sample.thickness_mm, s.wavelength_nm);
        } catch (const std::runtime_error& e) {
            row.error = "wavelength " + textio::format_g9(s.wavelength_nm) + " nm: " + e.what();
        }
        out.rows.push_back(std::move(row));
    }
    return out;
}

/// Piecewise-linear n over the valid rows of a constants table; exact at
/// table nodes, no extrapolation.
inline double index_at_wavelength(const OpticalConstants& constants, double wavelength_nm) {
    const ConstantsRow* prev = nullptr;
    for (const auto& row : constants.rows) {
        if (!row.ok()) continue;
        if (row.wavelength_nm == wavelength_nm) return row.refractive_index;
        if (prev && prev->wavelength_nm < wavelength_nm && wavelength_nm < row.wavelength_nm) {
            const double f = (wavelength_nm - prev->wavelength_nm) /
                             (row.wavelength_nm - prev->wavelength_nm);
            return prev->refractive_index +
                   f * (row.refractive_index - prev->refractive_index);
        }
        prev = &row;
    }
    throw ValidationError("index_at_wavelength: " + textio::format_g9(wavelength_nm) +
                          " nm outside the table range");
}

// ---------------------------------------------------------------------------
// working curve
// ---------------------------------------------------------------------------

/// Ordinary least squares of Dc against ln E. Slope is the penetration depth
/// Dp; the intercept fixes the critical energy via Ec = exp(-intercept/Dp).
inline WorkingCurveFit fit_working_curve(std::span<const WorkingCurvePoint> points) {
    if (points.size() < 2)
        throw ValidationError("fit_working_curve: need at least 2 points");
    for (const auto& p : points) {
        if (!(p.energy_mj_cm2 > 0.0))
            throw ValidationError("fit_working_curve: energies must be positive");
        if (!(p.cure_depth_um >= 0.0))
            throw ValidationError("fit_working_curve: cure depths must be non-negative");
    }

    double mean_x = 0.0, mean_y = 0.0;
    for (const auto& p : points) {
        mean_x += std::log(p.energy_mj_cm2);
        mean_y += p.cure_depth_um;
    }
    mean_x /= static_cast<double>(points.size());
    mean_y /= static_cast<double>(points.size());

    double sxx = 0.0, sxy = 0.0;
    for (const auto& p : points) {
        const double dx = std::log(p.energy_mj_cm2) - mean_x;
        sxx += dx * dx;
        sxy += dx * (p.cure_depth_um - mean_y);
    }
    if (sxx == 0.0)
        throw ValidationError("fit_working_curve: all energies equal, fit degenerate");

    const double slope = sxy / sxx;
    if (!(slope > 0.0))
        throw NumericError("fit_working_curve: fitted penetration depth not positive (" +
                           textio::format_g9(slope) + " um)");
    const double intercept = mean_y - slope * mean_x;

    double ss = 0.0;
    for (const auto& p : points) {
        const double r = p.cure_depth_um - (slope * std::log(p.energy_mj_cm2) + intercept);
        ss += r * r;
    }
    return {slope, std::exp(-intercept / slope),
            std::sqrt(ss / static_cast<double>(points.size()))};
}

// ---------------------------------------------------------------------------
// file formats
// ---------------------------------------------------------------------------

inline constexpr const char* kSpectrumHeader = "wavelength_nm,T,A";
inline constexpr const char* kWorkingCurveHeader = "energy_mJ_cm2,cure_depth_um";
inline constexpr const char* kConstantsHeader = "wavelength_nm,R,R_F,n";

struct SpectrumLoad {
    Spectrum spectrum;
    std::vector<std::string> warnings;  // clamped near-simplex rows
};

/// Parses `wavelength_nm,T,A` rows. Rows violating T + A <= 1 by at most 1e-3
/// (instrument jitter) are rescaled onto the simplex with a warning; larger
/// violations are hard errors.
inline SpectrumLoad parse_spectrum_csv(std::istream& in) {
    const auto lines = textio::read_lines(in);
    if (lines.empty()) throw ParseError("spectrum: empty file");
    if (lines.front().text != kSpectrumHeader)
        throw ParseError("spectrum: expected header '" + std::string(kSpectrumHeader) +
                         "', got '" + lines.front().text + "'");
    SpectrumLoad out;
    double prev_wavelength = 0.0;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        const std::string where = "spectrum line " + textio::format_int(lines[i].number);
        const auto f = textio::split(lines[i].text, ',');
        if (f.size() != 3) throw ParseError(where + ": expected 3 fields");
        SpectrumSample s;
        s.wavelength_nm = textio::parse_double(f[0], where);
        s.transmittance = textio::parse_double(f[1], where);
        s.absorptance = textio::parse_double(f[2], where);
        if (!(s.wavelength_nm > 0.0))
            throw ParseError(where + ": wavelength must be positive");
        if (!(s.wavelength_nm > prev_wavelength))
            throw ParseError(where + ": wavelengths must be strictly increasing");
        if (!(s.transmittance >= 0.0 && s.transmittance <= 1.0))
            throw ParseError(where + ": T out of [0,1]");
        if (!(s.absorptance >= 0.0 && s.absorptance <= 1.0))
            throw ParseError(where + ": A out of [0,1]");
        const double sum = s.transmittance + s.absorptance;
        if (sum > 1.0) {
            if (sum > 1.0 + 1e-3)
                throw ParseError(where + ": T + A = " + textio::format_g9(sum) +
                                 " exceeds 1 beyond measurement noise");
            s.transmittance /= sum;
            s.absorptance /= sum;
            out.warnings.push_back(where + ": T + A = " + textio::format_g9(sum) +
                                   " clamped onto the simplex");
        }
        prev_wavelength = s.wavelength_nm;
        out.spectrum.samples.push_back(s);
    }
    if (out.spectrum.samples.empty()) throw ParseError("spectrum: no data rows");
    return out;
}

inline std::vector<WorkingCurvePoint> parse_working_curve_csv(std::istream& in) {
    const auto lines = textio::read_lines(in);
    if (lines.empty()) throw ParseError("working curve: empty file");
    if (lines.front().text != kWorkingCurveHeader)
        throw ParseError("working curve: expected header '" + std::string(kWorkingCurveHeader) +
                         "', got '" + lines.front().text + "'");
    std::vector<WorkingCurvePoint> out;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        const std::string where = "working curve line " + textio::format_int(lines[i].number);
        const auto f = textio::split(lines[i].text, ',');
        if (f.size() != 2) throw ParseError(where + ": expected 2 fields");
        WorkingCurvePoint p{textio::parse_double(f[0], where), textio::parse_double(f[1], where)};
        if (!(p.energy_mj_cm2 > 0.0)) throw ParseError(where + ": energy must be positive");
        if (!(p.cure_depth_um >= 0.0)) throw ParseError(where + ": cure depth must be >= 0");
        out.push_back(p);
    }
    if (out.empty()) throw ParseError("working curve: no data rows");
    return out;
}

/// `wavelength_nm,R,R_F,n` at 9 significant digits; flagged rows carry nan.
inline void write_constants_csv(std::ostream& out, const OpticalConstants& constants) {
    out << kConstantsHeader << "\n";
    for (const auto& r : constants.rows) {
        out << textio::format_g9(r.wavelength_nm) << ',' << textio::format_g9(r.reflectance)
            << ',' << textio::format_g9(r.interface_reflectance) << ','
            << textio::format_g9(r.refractive_index) << "\n";
    }
}

} // namespace solen::material
