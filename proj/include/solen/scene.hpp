#pragma once

// 2D optical world of the Y-shaped waveguide sensor.
//
// Scene frame: the minor base (lens base) of the stem is centered on the
// origin along x, the stem axis is +y. The fork sits at y = stem_length and
// the two arms diverge symmetrically from it. When a lens is mounted, its
// apex protrudes below the base toward the emitter by the edge sag, so the
// surface endpoints land exactly on the base corners; the emitter sits in
// the open air below it. Rotation ("pose") turns only the lens + emitter
// assembly about the center of the minor base; the waveguide outline and the
// receivers stay fixed.

#include <cmath>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "solen/error.hpp"
#include "solen/geometry.hpp"
#include "solen/lens.hpp"
#include "solen/textio.hpp"

namespace solen::scene {

using geom::Rot2;
using geom::Segment;
using geom::Vec2;

struct SensorParams {
    double stem_length_mm = 16.2;
    double arm_length_mm = 22.2;
    double minor_base_mm = 4.0;
    double major_base_mm = 6.2;
    double arm_width_mm = 3.0;
    double smoothing_a = -0.004;        // stem-side parabola coefficient, 1/mm; negative waists inward
    double fork_half_angle_deg = 25.0;  // arm divergence from the stem axis
    double emitter_distance_mm = 1.0;   // emitter to first surface (lens apex or flat base)
    double ambient_index = 1.0;         // region map: air around and below the sensor
    double polymer_index = 1.44;        // region map: waveguide body
    int side_segments = 32;             // polyline resolution of each parabolic side

    std::vector<std::string> violations() const {
        std::vector<std::string> v;
        if (!(stem_length_mm > 0.0)) v.push_back("stem length must be positive");
        if (!(arm_length_mm > 0.0)) v.push_back("arm length must be positive");
        if (!(minor_base_mm > 0.0)) v.push_back("minor base must be positive");
        if (!(major_base_mm > 0.0)) v.push_back("major base must be positive");
        if (!(arm_width_mm > 0.0)) v.push_back("arm width must be positive");
        if (!(arm_width_mm < major_base_mm)) v.push_back("arm width must be smaller than the major base");
        if (!(emitter_distance_mm > 0.0)) v.push_back("emitter distance must be positive");
        if (!(ambient_index >= 1.0)) v.push_back("ambient index must be >= 1");
        if (!(polymer_index > ambient_index)) v.push_back("polymer index must exceed the ambient index");
        if (!(fork_half_angle_deg > 0.0 && fork_half_angle_deg < 90.0))
            v.push_back("fork half angle must lie in (0, 90) degrees");
        else if (!(arm_width_mm * std::cos(geom::degrees_to_radians(fork_half_angle_deg)) <=
                   0.5 * major_base_mm))
            v.push_back("arm width too large for the fork: inner arm corner crosses the stem axis");
        if (side_segments < 1) v.push_back("side segments must be >= 1");
        return v;
    }
};

/// Rigid rotation of the lens + emitter assembly. |theta| <= 90 degrees.
struct Pose {
    double theta_deg = 0.0;
    Vec2 pivot{0.0, 0.0};  // defaults to the center of the stem's minor base
};

enum class Surface { Wall, ReceiverLeft, ReceiverRight };

struct BoundaryEdge {
    Vec2 a;
    Vec2 b;
    Surface kind = Surface::Wall;
};

enum class Medium { Ambient, Polymer };

struct Emitter {
    Vec2 position;
    Vec2 axis;  // unit vector
};

/// Mounted lens: maps between scene coordinates and the lens-local frame of
/// lens::oval_residual (apex at the local origin, +z into the material).
struct LensPlacement {
    lens::LensSpec spec;
    double sag_mm = 0.0;  // surface depth at the aperture edge
    Rot2 rot;
    Vec2 shift{0.0, 0.0};
    bool is_identity = true;

    Vec2 local_to_scene(Vec2 local) const {
        const Vec2 unrotated{local.x, local.y - sag_mm};
        return is_identity ? unrotated : rot.apply(unrotated) + shift;
    }
    Vec2 scene_to_local(Vec2 scene) const {
        const Vec2 p = is_identity ? scene : rot.apply_inverse(scene - shift);
        return {p.x, p.y + sag_mm};
    }
    Vec2 dir_to_scene(Vec2 v) const { return is_identity ? v : rot.apply(v); }
    Vec2 dir_to_local(Vec2 v) const { return is_identity ? v : rot.apply_inverse(v); }
};

struct SensorGeometry {
    SensorParams params;
    std::optional<lens::LensProfile> lens_profile;  // lens-local coordinates
    double theta_deg = 0.0;                         // accumulated assembly rotation
    Vec2 pivot{0.0, 0.0};
    Vec2 assembly_shift{0.0, 0.0};

    std::vector<BoundaryEdge> edges;  // straight boundary; the lens arc is implicit
    std::optional<LensPlacement> lens;
    Emitter emitter;
    Segment receiver_left, receiver_right;
    std::vector<Vec2> outline;  // closed polyline incl. a discretized lens arc

    bool has_lens() const { return lens.has_value(); }

    /// Lens apex in scene coordinates; minor-base center when no lens is mounted.
    Vec2 apex_position() const {
        return has_lens() ? lens->local_to_scene({0.0, 0.0}) : Vec2{0.0, 0.0};
    }
};

namespace detail {

/// Parabolic stem side from the base corner to the fork corner: perpendicular
/// deviation a * xi * (len - xi) off the chord, measured along the outward
/// normal. Negative a bows the side inward, softening the stem-arm corner.
inline std::vector<Vec2> stem_side_points(Vec2 from, Vec2 to, double a, int segments) {
    const Vec2 chord = to - from;
    const double len = chord.norm();
    const Vec2 along = chord * (1.0 / len);
    const Vec2 outward{along.y, -along.x};  // right side; mirrored input flips it
    std::vector<Vec2> pts;
    pts.reserve(static_cast<std::size_t>(segments) + 1);
    for (int i = 0; i <= segments; ++i) {
        if (i == 0) {
            pts.push_back(from);
            continue;
        }
        if (i == segments) {
            pts.push_back(to);
            continue;
        }
        const double xi = len * static_cast<double>(i) / static_cast<double>(segments);
        const double eta = a * xi * (len - xi);
        pts.push_back(from + xi * along + eta * outward);
    }
    return pts;
}

inline void append_unique(std::vector<Vec2>& poly, Vec2 p) {
    if (!poly.empty() && poly.back() == p) return;
    poly.push_back(p);
}

inline SensorGeometry realize(const SensorParams& params,
                              std::optional<lens::LensProfile> profile,
                              double theta_deg, Vec2 pivot, Vec2 shift) {
    {
        auto v = params.violations();
        if (profile && !(profile->spec.half_aperture_mm <= 0.5 * params.minor_base_mm + 1e-12))
            v.push_back("lens half aperture exceeds half the minor base");
        if (profile && (profile->spec.ambient_index != params.ambient_index ||
                        profile->spec.lens_index != params.polymer_index))
            v.push_back("lens indices must match the sensor region map (n1/ambient, n2/polymer)");
        if (!(std::fabs(theta_deg) <= 90.0)) v.push_back("pose angle must lie within +-90 degrees");
        if (!v.empty()) {
            std::string msg = "sensor geometry:";
            for (const auto& s : v) msg += "\n  - " + s;
            throw ValidationError(msg);
        }
    }

    SensorGeometry g;
    g.params = params;
    g.lens_profile = std::move(profile);
    g.theta_deg = theta_deg;
    g.pivot = pivot;
    g.assembly_shift = shift;

    const bool identity = theta_deg == 0.0 && shift.x == 0.0 && shift.y == 0.0;
    const Rot2 rot = Rot2::from_degrees(theta_deg);
    const auto assembly = [&](Vec2 p) { return identity ? p : rot.apply(p) + shift; };

    const double half_minor = 0.5 * params.minor_base_mm;
    const double half_major = 0.5 * params.major_base_mm;
    const Vec2 corner_r{half_minor, 0.0};
    const Vec2 corner_l = corner_r.mirrored_x();
    const Vec2 fork_corner_r{half_major, params.stem_length_mm};

    const double phi = geom::degrees_to_radians(params.fork_half_angle_deg);
    const Vec2 arm_dir{std::sin(phi), std::cos(phi)};
    const Vec2 arm_inward{-std::cos(phi), std::sin(phi)};
    const Vec2 inner_corner_r = fork_corner_r + params.arm_width_mm * arm_inward;
    const Vec2 arm_end_outer_r = fork_corner_r + params.arm_length_mm * arm_dir;
    const Vec2 arm_end_inner_r = inner_corner_r + params.arm_length_mm * arm_dir;
    // Notch apex: the two inner arm edges extended back to the stem axis.
    const Vec2 notch{0.0, inner_corner_r.y - inner_corner_r.x * (arm_dir.y / arm_dir.x)};

    const auto side_r = stem_side_points(corner_r, fork_corner_r, params.smoothing_a,
                                         params.side_segments);

    // Lens mount: apex toward the emitter, arc endpoints on the base corners.
    std::vector<Vec2> arc_scene;  // decimated, left to right, for the outline
    Vec2 arc_end_l = corner_l, arc_end_r = corner_r;
    if (g.lens_profile) {
        LensPlacement mount;
        mount.spec = g.lens_profile->spec;
        mount.sag_mm = g.lens_profile->edge_sag_mm();
        mount.rot = rot;
        mount.shift = shift;
        mount.is_identity = identity;
        g.lens = mount;

        // Decimated symmetrically about the apex so the sampled outline keeps
        // the mirror symmetry of the underlying curve.
        const auto& pts = g.lens_profile->points;
        const std::size_t n = pts.size();
        const std::size_t mid = (n - 1) / 2;
        const std::size_t stride = std::max<std::size_t>(1, n / 256);
        const auto at = [&](std::size_t i) {
            return mount.local_to_scene({pts[i].x_mm, pts[i].z_mm});
        };
        const long reach = static_cast<long>(mid / stride);
        arc_scene.push_back(at(0));
        for (long k = -reach; k <= reach; ++k) {
            const std::size_t i = mid + static_cast<std::size_t>(k * static_cast<long>(stride));
            if (i != 0 && i != n - 1) arc_scene.push_back(at(i));
        }
        arc_scene.push_back(at(n - 1));
        arc_end_l = arc_scene.front();
        arc_end_r = arc_scene.back();
    }

    g.emitter.position = assembly({0.0, g.lens ? -(g.lens->sag_mm + g.lens->spec.emitter_distance_mm)
                                               : -params.emitter_distance_mm});
    g.emitter.axis = identity ? Vec2{0.0, 1.0} : rot.apply({0.0, 1.0});

    g.receiver_right = {arm_end_outer_r, arm_end_inner_r};
    g.receiver_left = {arm_end_outer_r.mirrored_x(), arm_end_inner_r.mirrored_x()};

    // Straight boundary edges. Left edges are exact coordinate mirrors of the
    // right ones, endpoint order included, so mirrored rays see bit-identical
    // intersection arithmetic.
    auto& e = g.edges;
    const auto push_pair = [&](Vec2 a, Vec2 b, Surface right_kind, Surface left_kind) {
        e.push_back({a, b, right_kind});
        e.push_back({a.mirrored_x(), b.mirrored_x(), left_kind});
    };
    if (g.lens) {
        // Closure slivers between the (possibly rotated) arc ends and the
        // fixed base corners. At pose zero these are exact mirrors or vanish.
        if (!(arc_end_r == corner_r)) e.push_back({arc_end_r, corner_r, Surface::Wall});
        if (!(arc_end_l == corner_l)) e.push_back({arc_end_l, corner_l, Surface::Wall});
    } else {
        e.push_back({corner_l, corner_r, Surface::Wall});
    }
    for (std::size_t i = 0; i + 1 < side_r.size(); ++i)
        push_pair(side_r[i], side_r[i + 1], Surface::Wall, Surface::Wall);
    push_pair(fork_corner_r, arm_end_outer_r, Surface::Wall, Surface::Wall);
    push_pair(arm_end_outer_r, arm_end_inner_r, Surface::ReceiverRight, Surface::ReceiverLeft);
    push_pair(arm_end_inner_r, notch, Surface::Wall, Surface::Wall);

    // Closed outline for point classification and rendering.
    auto& o = g.outline;
    append_unique(o, corner_l);
    for (const auto& p : arc_scene) append_unique(o, p);
    append_unique(o, corner_r);
    for (std::size_t i = 1; i < side_r.size(); ++i) append_unique(o, side_r[i]);
    append_unique(o, arm_end_outer_r);
    append_unique(o, arm_end_inner_r);
    append_unique(o, notch);
    append_unique(o, arm_end_inner_r.mirrored_x());
    append_unique(o, arm_end_outer_r.mirrored_x());
    for (std::size_t i = side_r.size(); i-- > 1;) append_unique(o, side_r[i].mirrored_x());
    if (o.back() == o.front()) o.pop_back();

    if (!geom::polyline_is_simple(o))
        throw ValidationError("sensor geometry: boundary outline self-intersects");
    return g;
}

} // namespace detail

/// Builds the sensor at pose zero (or the given pose). The lens profile is
/// solved once here; pose changes reuse it.
inline SensorGeometry build_sensor(const SensorParams& params,
                                   const std::optional<lens::LensSpec>& lens_spec = std::nullopt,
                                   const Pose& pose = {}) {
    std::optional<lens::LensProfile> profile;
    if (lens_spec) profile = lens::solve_profile(*lens_spec);
    const Rot2 r = Rot2::from_degrees(pose.theta_deg);
    const Vec2 shift = pose.pivot - r.apply(pose.pivot);
    return detail::realize(params, std::move(profile), pose.theta_deg, pose.pivot, shift);
}

/// Rotates only the lens and the emitter, composing with the geometry's
/// current pose. Waveguide boundary and receivers stay fixed.
inline SensorGeometry apply_pose(const SensorGeometry& g, const Pose& pose) {
    const double theta = g.theta_deg + pose.theta_deg;
    const Rot2 r = Rot2::from_degrees(pose.theta_deg);
    const Vec2 shift = (r.apply(g.assembly_shift) + pose.pivot) - r.apply(pose.pivot);
    const Vec2 clean_shift = (shift.x == 0.0 && shift.y == 0.0) ? Vec2{0.0, 0.0} : shift;
    return detail::realize(g.params, g.lens_profile, theta, pose.pivot, clean_shift);
}

/// Winding-number medium lookup; the point must not lie exactly on the boundary.
inline Medium classify_point(const SensorGeometry& g, Vec2 point) {
    return geom::winding_number(point, g.outline) != 0 ? Medium::Polymer : Medium::Ambient;
}

// ---------------------------------------------------------------------------
// scene description file: `key = value` sections
// ---------------------------------------------------------------------------

struct SceneConfig {
    SensorParams sensor;
    std::optional<lens::LensSpec> lens_spec;
    Pose pose;
};

/// Reference configuration: measured-index lens (n2 = 1.44) on the default
/// sensor body, pose zero.
inline SceneConfig default_scene() {
    SceneConfig c;
    c.lens_spec = lens::LensSpec{};
    return c;
}

inline SensorGeometry build_sensor(const SceneConfig& config) {
    return build_sensor(config.sensor, config.lens_spec, config.pose);
}

inline SceneConfig parse_scene_file(std::istream& in) {
    SceneConfig config;
    config.lens_spec = lens::LensSpec{};  // present unless `lens = none`
    bool lens_none = false;
    bool lens_section_seen = false;
    std::string section;
    for (const auto& line : textio::read_lines(in)) {
        const std::string where = "scene line " + textio::format_int(line.number);
        if (line.text.front() == '[') {
            if (line.text.back() != ']') throw ParseError(where + ": malformed section header");
            section = std::string(textio::trim(line.text.substr(1, line.text.size() - 2)));
            if (section != "sensor" && section != "lens" && section != "pose")
                throw ParseError(where + ": unknown section '" + section + "'");
            if (section == "lens") lens_section_seen = true;
            continue;
        }
        const auto eq = line.text.find('=');
        if (eq == std::string::npos) throw ParseError(where + ": expected 'key = value'");
        const std::string key{textio::trim(line.text.substr(0, eq))};
        const std::string val{textio::trim(line.text.substr(eq + 1))};
        if (section.empty()) {
            if (key == "lens" && val == "none") {
                lens_none = true;
                continue;
            }
            throw ParseError(where + ": unknown top-level key '" + key + "'");
        }
        const double d = (key == "samples") ? 0.0 : textio::parse_double(val, where);
        if (section == "sensor") {
            auto& s = config.sensor;
            if (key == "stem_length_mm") s.stem_length_mm = d;
            else if (key == "arm_length_mm") s.arm_length_mm = d;
            else if (key == "minor_base_mm") s.minor_base_mm = d;
            else if (key == "major_base_mm") s.major_base_mm = d;
            else if (key == "arm_width_mm") s.arm_width_mm = d;
            else if (key == "smoothing_a") s.smoothing_a = d;
            else if (key == "fork_half_angle_deg") s.fork_half_angle_deg = d;
            else if (key == "emitter_distance_mm") s.emitter_distance_mm = d;
            else if (key == "ambient_index") s.ambient_index = d;
            else if (key == "polymer_index") s.polymer_index = d;
            else throw ParseError(where + ": unknown sensor key '" + key + "'");
        } else if (section == "lens") {
            auto& l = *config.lens_spec;
            if (key == "n1") l.ambient_index = d;
            else if (key == "n2") l.lens_index = d;
            else if (key == "s_mm") l.emitter_distance_mm = d;
            else if (key == "s_prime_mm") l.focal_distance_mm = d;
            else if (key == "half_aperture_mm") l.half_aperture_mm = d;
            else if (key == "samples") l.sample_count = static_cast<int>(textio::parse_long(val, where));
            else throw ParseError(where + ": unknown lens key '" + key + "'");
        } else {  // pose
            if (key == "theta_deg") config.pose.theta_deg = d;
            else throw ParseError(where + ": unknown pose key '" + key + "'");
        }
    }
    if (lens_none) {
        if (lens_section_seen)
            throw ParseError("scene: both 'lens = none' and a [lens] section given");
        config.lens_spec.reset();
    }
    return config;
}

inline void write_scene_file(std::ostream& out, const SceneConfig& c) {
    const auto& s = c.sensor;
    out << "# Y-waveguide sensor scene\n";
    if (!c.lens_spec) out << "lens = none\n\n";  // top-level key, before any section
    out << "[sensor]\n";
    out << "stem_length_mm = " << textio::format_g9(s.stem_length_mm) << "\n";
    out << "arm_length_mm = " << textio::format_g9(s.arm_length_mm) << "\n";
    out << "minor_base_mm = " << textio::format_g9(s.minor_base_mm) << "\n";
    out << "major_base_mm = " << textio::format_g9(s.major_base_mm) << "\n";
    out << "arm_width_mm = " << textio::format_g9(s.arm_width_mm) << "\n";
    out << "smoothing_a = " << textio::format_g9(s.smoothing_a) << "\n";
    out << "fork_half_angle_deg = " << textio::format_g9(s.fork_half_angle_deg) << "\n";
    out << "emitter_distance_mm = " << textio::format_g9(s.emitter_distance_mm) << "\n";
    out << "ambient_index = " << textio::format_g9(s.ambient_index) << "\n";
    out << "polymer_index = " << textio::format_g9(s.polymer_index) << "\n";
    out << "\n";
    if (c.lens_spec) {
        const auto& l = *c.lens_spec;
        out << "[lens]\n";
        out << "n1 = " << textio::format_g9(l.ambient_index) << "\n";
        out << "n2 = " << textio::format_g9(l.lens_index) << "\n";
        out << "s_mm = " << textio::format_g9(l.emitter_distance_mm) << "\n";
        out << "s_prime_mm = " << textio::format_g9(l.focal_distance_mm) << "\n";
        out << "half_aperture_mm = " << textio::format_g9(l.half_aperture_mm) << "\n";
        out << "samples = " << l.sample_count << "\n";
    }
    out << "\n[pose]\n";
    out << "theta_deg = " << textio::format_g9(c.pose.theta_deg) << "\n";
}

} // namespace solen::scene
