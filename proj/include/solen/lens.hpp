#pragma once

// Cartesian-oval lens synthesis. The refracting surface is the locus where
// the optical path from the emitter (in the ambient medium, index n1) to the
// focus (inside the lens material, index n2) is constant:
//
//   n1 * sqrt((z + s)^2 + x^2) + n2 * sqrt(x^2 + (s' - z)^2) = n1 s + n2 s'
//
// with the apex at the origin, the emitter at z = -s and the focus at z = s'.
// Every point on the surface images the emitter stigmatically onto the focus.
// The profile is sampled for export, but ray intersection elsewhere uses the
// implicit residual directly, so imaging quality is independent of sampling.

#include <cmath>
#include <cstdlib>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "solen/error.hpp"
#include "solen/textio.hpp"

namespace solen::lens {

struct LensSpec {
    double ambient_index = 1.0;      // n1
    double lens_index = 1.44;        // n2, must exceed n1
    double emitter_distance_mm = 1.0;  // s, emitter to apex
    double focal_distance_mm = 20.0;   // s', apex to focus
    double half_aperture_mm = 2.0;
    int sample_count = 2001;         // odd, so x = 0 is sampled

    /// n1*s + n2*s', the conserved optical path length.
    double path_constant() const {
        return ambient_index * emitter_distance_mm + lens_index * focal_distance_mm;
    }

    void validate() const {
        std::string problems;
        const auto add = [&](const std::string& p) {
            if (!problems.empty()) problems += "; ";
            problems += p;
        };
        if (!(ambient_index >= 1.0)) add("ambient index must be >= 1");
        if (!(lens_index > ambient_index)) add("lens index must exceed the ambient index");
        if (!(emitter_distance_mm > 0.0)) add("emitter distance must be positive");
        if (!(focal_distance_mm > 0.0)) add("focal distance must be positive");
        if (!(half_aperture_mm > 0.0)) add("half aperture must be positive");
        if (sample_count < 3 || sample_count % 2 == 0)
            add("sample count must be odd and >= 3");
        if (!problems.empty()) throw ValidationError("lens spec: " + problems);
    }
};

struct ProfilePoint {
    double x_mm = 0.0;
    double z_mm = 0.0;
};

/// Discretized surface, x strictly increasing over [-half_aperture, +half_aperture],
/// z(0) = 0 exactly, z(x) = z(-x) by construction.
struct LensProfile {
    LensSpec spec;
    std::vector<ProfilePoint> points;

    double edge_sag_mm() const { return points.empty() ? 0.0 : points.back().z_mm; }
};

/// Signed optical-path excess at (x, z); positive means the path through
/// (x, z) is longer than the design constant, so the surface lies deeper.
inline double oval_residual(double x, double z, const LensSpec& spec) {
    const double to_emitter = std::hypot(z + spec.emitter_distance_mm, x);
    const double to_focus = std::hypot(x, spec.focal_distance_mm - z);
    return spec.ambient_index * to_emitter + spec.lens_index * to_focus - spec.path_constant();
}

inline double optical_path_length(double x, double z, const LensSpec& spec) {
    return oval_residual(x, z, spec) + spec.path_constant();
}

inline constexpr double kSolveToleranceMm = 1e-9;
inline constexpr int kSolveMaxIterations = 200;

/// Surface depth z at lateral offset x, by bisection on the residual over
/// z in [0, 0.99 s']. The residual is positive at z = 0 for x != 0 and
/// negative near the focus for feasible apertures; failure to bracket means
/// the aperture is too wide for the given indices and distances.
inline double solve_sag(double x, const LensSpec& spec) {
    double lo = 0.0;
    double hi = 0.99 * spec.focal_distance_mm;
    double f_lo = oval_residual(x, lo, spec);
    if (std::fabs(f_lo) <= kSolveToleranceMm) return lo;
    const double f_hi = oval_residual(x, hi, spec);
    if (!(f_lo > 0.0 && f_hi < 0.0))
        throw NumericError("lens solve: residual does not bracket a root at x = " +
                           textio::format_g9(x) + " mm (aperture too wide for these indices)");
    double mid = lo;
    for (int i = 0; i < kSolveMaxIterations; ++i) {
        mid = 0.5 * (lo + hi);
        const double f_mid = oval_residual(x, mid, spec);
        if (std::fabs(f_mid) <= kSolveToleranceMm) return mid;
        if (f_mid > 0.0)
            lo = mid;
        else
            hi = mid;
    }
    throw NumericError("lens solve: no convergence at x = " + textio::format_g9(x) + " mm");
}

/// Full sampled profile. Solved for x >= 0 and mirrored, which pins both the
/// apex value z(0) = 0 and exact evenness of the sampled curve.
inline LensProfile solve_profile(const LensSpec& spec) {
    spec.validate();
    LensProfile profile;
    profile.spec = spec;
    profile.points.resize(static_cast<std::size_t>(spec.sample_count));
    const int mid = (spec.sample_count - 1) / 2;
    const double step = spec.half_aperture_mm / static_cast<double>(mid);
    for (int j = 0; j <= mid; ++j) {
        // Endpoint sampled exactly so the arc lands on the aperture edge.
        const double x = (j == mid) ? spec.half_aperture_mm : static_cast<double>(j) * step;
        const double z = solve_sag(x, spec);
        profile.points[static_cast<std::size_t>(mid + j)] = {x, z};
        profile.points[static_cast<std::size_t>(mid - j)] = {-x, z};
    }
    return profile;
}

// ---------------------------------------------------------------------------
// profile interchange (CSV with a '#' spec header)
// ---------------------------------------------------------------------------

inline constexpr const char* kProfileHeader = "x_mm,z_mm";

inline void write_profile_csv(std::ostream& out, const LensProfile& profile) {
    const LensSpec& s = profile.spec;
    out << "# cartesian oval lens profile\n";
    out << "# n1 = " << textio::format_g9(s.ambient_index)
        << "\n# n2 = " << textio::format_g9(s.lens_index)
        << "\n# s_mm = " << textio::format_g9(s.emitter_distance_mm)
        << "\n# s_prime_mm = " << textio::format_g9(s.focal_distance_mm)
        << "\n# half_aperture_mm = " << textio::format_g9(s.half_aperture_mm)
        << "\n# samples = " << s.sample_count << "\n";
    out << kProfileHeader << "\n";
    for (const auto& p : profile.points)
        out << textio::format_g9(p.x_mm) << ',' << textio::format_g9(p.z_mm) << "\n";
}

inline LensProfile parse_profile_csv(std::istream& in) {
    const auto lines = textio::read_lines(in, /*keep_comments=*/true);
    LensProfile profile;
    bool header_seen = false;
    for (const auto& line : lines) {
        if (line.text.front() == '#') {
            const auto eq = line.text.find('=');
            if (eq == std::string::npos) continue;
            const std::string key{textio::trim(line.text.substr(1, eq - 1))};
            const std::string val{textio::trim(line.text.substr(eq + 1))};
            const std::string where = "profile line " + textio::format_int(line.number);
            if (key == "n1") profile.spec.ambient_index = textio::parse_double(val, where);
            else if (key == "n2") profile.spec.lens_index = textio::parse_double(val, where);
            else if (key == "s_mm") profile.spec.emitter_distance_mm = textio::parse_double(val, where);
            else if (key == "s_prime_mm") profile.spec.focal_distance_mm = textio::parse_double(val, where);
            else if (key == "half_aperture_mm") profile.spec.half_aperture_mm = textio::parse_double(val, where);
            else if (key == "samples") profile.spec.sample_count = static_cast<int>(textio::parse_long(val, where));
            continue;
        }
        if (!header_seen) {
            if (line.text != kProfileHeader)
                throw ParseError("profile: expected header '" + std::string(kProfileHeader) +
                                 "', got '" + line.text + "'");
            header_seen = true;
            continue;
        }
        const std::string where = "profile line " + textio::format_int(line.number);
        const auto f = textio::split(line.text, ',');
        if (f.size() != 2) throw ParseError(where + ": expected 2 fields");
        profile.points.push_back({textio::parse_double(f[0], where), textio::parse_double(f[1], where)});
    }
    if (!header_seen) throw ParseError("profile: missing header row");
    if (profile.points.empty()) throw ParseError("profile: no data rows");
    return profile;
}

} // namespace solen::lens
