#pragma once

// Deterministic 2D geometric ray tracer over a SensorGeometry. Rays refract
// or totally reflect at polymer/air boundaries with unpolarized Fresnel power
// weighting. Partially reflecting interfaces are not split: the transmitted
// branch is followed and the reflected fraction is booked as escaped power,
// which keeps the trace bounded and power accounting exact. Straight edges
// are intersected directly; the lens surface is intersected on its implicit
// Cartesian-oval residual, so the surface seen by rays is the analytic one,
// not the sampled polyline.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "solen/error.hpp"
#include "solen/geometry.hpp"
#include "solen/lens.hpp"
#include "solen/scene.hpp"
#include "solen/textio.hpp"

namespace solen::ray {

using geom::Vec2;
using scene::Medium;
using scene::SensorGeometry;
using scene::Surface;

struct FanParams {
    int count = 100;
    double aperture_deg = 120.0;
};

struct TraceLimits {
    int max_bounces = 200;
    double power_floor = 1e-4;
    double surface_epsilon_mm = 1e-9;  // minimum advance accepted for a hit
    double nudge_mm = 1e-7;            // post-event origin offset along the new direction
};

struct Ray {
    Vec2 origin;
    Vec2 direction;  // unit
    double power = 1.0;
    Medium medium = Medium::Ambient;
    int bounce_count = 0;
};

// ---------------------------------------------------------------------------
// fan emission
// ---------------------------------------------------------------------------

/// Uniform angular fan about the emitter axis, endpoints included, each ray
/// carrying power 1/count. Directions are generated so that rays k and
/// count-1-k are exact bitwise mirrors about the axis.
inline std::vector<Ray> emit_fan(const scene::Emitter& emitter, int count, double aperture_deg) {
    if (count < 1) throw ValidationError("emit_fan: ray count must be >= 1");
    if (!(aperture_deg > 0.0 && aperture_deg <= 180.0))
        throw ValidationError("emit_fan: aperture must lie in (0, 180] degrees");
    std::vector<Ray> rays;
    rays.reserve(static_cast<std::size_t>(count));
    const double power = 1.0 / static_cast<double>(count);
    const double step_deg = count > 1 ? aperture_deg / static_cast<double>(count - 1) : 0.0;
    for (int k = 0; k < count; ++k) {
        // Signed half-index offset from the fan center, so the magnitude of
        // the angle is computed identically for mirror twins.
        const double offset = (count % 2 == 1)
                                  ? static_cast<double>(k - (count - 1) / 2)
                                  : static_cast<double>(k - count / 2) + 0.5;
        const double a = geom::degrees_to_radians(std::fabs(offset) * step_deg);
        const double c = std::cos(a);
        const double s = std::copysign(std::sin(a), offset);
        const Vec2 axis = emitter.axis;
        rays.push_back({emitter.position,
                        {axis.x * c - axis.y * s, axis.x * s + axis.y * c},
                        power, Medium::Ambient, 0});
    }
    return rays;
}

// ---------------------------------------------------------------------------
// refraction
// ---------------------------------------------------------------------------

struct RefractionResult {
    Vec2 direction;  // unit
    bool total_internal_reflection = false;
    double power_transmittance = 0.0;  // meaningless under TIR (full power reflects)
};

/// Snell's law with unpolarized Fresnel transmittance T = 1 - (Rs + Rp)/2.
/// The normal must be unit length and face the incoming ray. Beyond the
/// critical angle the ray mirror-reflects at full power.
inline RefractionResult refract_or_reflect(Vec2 direction, Vec2 normal, double n_from,
                                           double n_to) {
    const double ci = -direction.dot(normal);
    if (!(ci > 0.0))
        throw NumericError("refract_or_reflect: normal does not face the incoming ray");

    const double eta = n_from / n_to;
    const double st2 = eta * eta * (1.0 - ci * ci);
    if (st2 > 1.0) {
        const Vec2 reflected = (direction + 2.0 * ci * normal).normalized();
        return {reflected, true, 0.0};
    }
    const double ct = std::sqrt(1.0 - st2);
    const Vec2 out = (eta * direction + (eta * ci - ct) * normal).normalized();

    // Tangential-component conservation is the Snell identity; violation
    // would indicate a broken normal or direction.
    const Vec2 tangent = normal.perp();
    if (std::fabs(n_from * direction.dot(tangent) - n_to * out.dot(tangent)) > 1e-12)
        throw NumericError("refract_or_reflect: Snell identity violated");

    const double rs_amp = (n_from * ci - n_to * ct) / (n_from * ci + n_to * ct);
    const double rp_amp = (n_from * ct - n_to * ci) / (n_from * ct + n_to * ci);
    return {out, false, 1.0 - 0.5 * (rs_amp * rs_amp + rp_amp * rp_amp)};
}

// ---------------------------------------------------------------------------
// lens intersection (implicit surface)
// ---------------------------------------------------------------------------

struct LensHit {
    double t = 0.0;
    Vec2 point;
    Vec2 normal;  // unit, oriented against the incoming ray
};

namespace detail {

inline Vec2 oval_gradient_local(Vec2 local, const lens::LensSpec& spec) {
    const double de = std::hypot(local.y + spec.emitter_distance_mm, local.x);
    const double df = std::hypot(local.x, spec.focal_distance_mm - local.y);
    return {spec.ambient_index * local.x / de + spec.lens_index * local.x / df,
            spec.ambient_index * (local.y + spec.emitter_distance_mm) / de -
                spec.lens_index * (spec.focal_distance_mm - local.y) / df};
}

/// First crossing of the lens arc along the ray. The oval residual is convex
/// along any line, so there are at most two roots, bracketed by the running
/// minimum; each candidate is accepted only inside the arc's aperture/sag box.
inline std::optional<LensHit> intersect_lens_arc(const scene::LensPlacement& mount, Vec2 origin,
                                                 Vec2 direction, double t_min, double t_max,
                                                 double residual_tol) {
    const auto residual_at = [&](double t) {
        const Vec2 local = mount.scene_to_local(origin + t * direction);
        return lens::oval_residual(local.x, local.y, mount.spec);
    };

    double lo = t_min, hi = t_max;
    for (int i = 0; i < 120; ++i) {
        const double m1 = lo + (hi - lo) / 3.0;
        const double m2 = hi - (hi - lo) / 3.0;
        if (residual_at(m1) < residual_at(m2))
            hi = m2;
        else
            lo = m1;
    }
    const double t_star = 0.5 * (lo + hi);
    const double f_star = residual_at(t_star);

    const auto bisect = [&](double a, double b, bool descending) {
        for (int i = 0; i < 200; ++i) {
            const double mid = 0.5 * (a + b);
            const double f = residual_at(mid);
            if (std::fabs(f) <= residual_tol) return mid;
            if ((f > 0.0) == descending)
                a = mid;
            else
                b = mid;
        }
        return 0.5 * (a + b);
    };

    std::vector<double> candidates;
    if (std::fabs(f_star) <= residual_tol) {
        candidates.push_back(t_star);  // tangential graze
    } else if (f_star < 0.0) {
        if (residual_at(t_min) > 0.0) candidates.push_back(bisect(t_min, t_star, true));
        if (residual_at(t_max) > 0.0) candidates.push_back(bisect(t_star, t_max, false));
    }

    for (const double t : candidates) {
        const Vec2 point = origin + t * direction;
        const Vec2 local = mount.scene_to_local(point);
        if (std::fabs(local.x) > mount.spec.half_aperture_mm + 1e-9) continue;
        if (local.y < -1e-9 || local.y > mount.sag_mm + 1e-9) continue;
        Vec2 normal = mount.dir_to_scene(oval_gradient_local(local, mount.spec)).normalized();
        if (normal.dot(direction) > 0.0) normal = -normal;
        return LensHit{t, point, normal};
    }
    return std::nullopt;
}

} // namespace detail

/// Nearest intersection of an ambient-side ray with the mounted lens surface.
inline std::optional<LensHit> intersect_lens(const SensorGeometry& g, Vec2 origin, Vec2 direction,
                                             double t_min = 1e-9) {
    if (!g.has_lens()) return std::nullopt;
    return detail::intersect_lens_arc(*g.lens, origin, direction, t_min, 300.0, 1e-9);
}

// ---------------------------------------------------------------------------
// tracing
// ---------------------------------------------------------------------------

enum class Terminal { Detected, Escaped, Absorbed, BounceLimit };

struct PathVertex {
    Vec2 position;
    double power;  // remaining power after the event at this vertex
};

/// One boundary interaction, for invariant checking.
struct SurfaceEvent {
    Vec2 point;
    Vec2 normal;
    Vec2 direction_in;
    Vec2 direction_out;
    double n_from = 0.0, n_to = 0.0;
    bool tir = false;
    double transmittance = 0.0;
    Medium medium_before = Medium::Ambient;
};

struct TraceOutcome {
    Terminal terminal = Terminal::Escaped;
    int receiver_index = -1;  // 0 = left, 1 = right when detected
    double initial_power = 0.0;
    double deposited_power = 0.0;  // on the receiver
    double escaped_power = 0.0;    // partial reflections + boundary escape
    double floor_power = 0.0;      // dropped below the power floor
    double stranded_power = 0.0;   // still in flight at the bounce limit
    int bounces = 0;
    std::vector<PathVertex> path;  // origin, every surface event, terminal point
};

inline TraceOutcome trace(const SensorGeometry& g, Ray ray, const TraceLimits& limits = {},
                          std::vector<SurfaceEvent>* events = nullptr) {
    TraceOutcome out;
    out.initial_power = ray.power;
    out.path.push_back({ray.origin, ray.power});

    if (ray.power < limits.power_floor) {
        out.terminal = Terminal::Absorbed;
        out.floor_power = ray.power;
        return out;
    }

    for (int bounce = ray.bounce_count; bounce < limits.max_bounces; ++bounce) {
        double best_t = std::numeric_limits<double>::infinity();
        Surface best_surface = Surface::Wall;
        Vec2 best_normal;
        bool hit_found = false;

        for (const auto& edge : g.edges) {
            const auto hit = geom::intersect_ray_segment(ray.origin, ray.direction,
                                                         {edge.a, edge.b}, limits.surface_epsilon_mm);
            if (hit && hit->t < best_t) {
                best_t = hit->t;
                best_surface = edge.kind;
                Vec2 n = (edge.b - edge.a).perp().normalized();
                if (n.dot(ray.direction) > 0.0) n = -n;
                best_normal = n;
                hit_found = true;
            }
        }
        if (g.has_lens()) {
            const auto lens_hit = detail::intersect_lens_arc(*g.lens, ray.origin, ray.direction,
                                                             limits.surface_epsilon_mm, 300.0, 1e-9);
            if (lens_hit && lens_hit->t < best_t) {
                best_t = lens_hit->t;
                best_surface = Surface::Wall;
                best_normal = lens_hit->normal;
                hit_found = true;
            }
        }

        if (!hit_found) {
            out.terminal = Terminal::Escaped;
            out.escaped_power += ray.power;
            out.path.push_back({ray.origin + 50.0 * ray.direction, ray.power});
            out.bounces = bounce;
            return out;
        }

        const Vec2 point = ray.origin + best_t * ray.direction;

        if (best_surface == Surface::ReceiverLeft || best_surface == Surface::ReceiverRight) {
            out.path.push_back({point, ray.power});
            out.bounces = bounce;
            if (ray.medium == Medium::Polymer) {
                out.terminal = Terminal::Detected;
                out.receiver_index = best_surface == Surface::ReceiverLeft ? 0 : 1;
                out.deposited_power = ray.power;
            } else {
                // Exterior side of the receiver package: blocked, not sensed.
                out.terminal = Terminal::Escaped;
                out.escaped_power += ray.power;
            }
            return out;
        }

        const double n_from = ray.medium == Medium::Ambient ? g.params.ambient_index
                                                            : g.params.polymer_index;
        const double n_to = ray.medium == Medium::Ambient ? g.params.polymer_index
                                                          : g.params.ambient_index;
        const RefractionResult rr = refract_or_reflect(ray.direction, best_normal, n_from, n_to);
        if (events)
            events->push_back({point, best_normal, ray.direction, rr.direction, n_from, n_to,
                               rr.total_internal_reflection, rr.power_transmittance, ray.medium});

        if (!rr.total_internal_reflection) {
            const double transmitted = ray.power * rr.power_transmittance;
            out.escaped_power += ray.power - transmitted;  // unfollowed reflected fraction
            ray.power = transmitted;
            ray.medium = ray.medium == Medium::Ambient ? Medium::Polymer : Medium::Ambient;
        }
        ray.direction = rr.direction;
        ray.origin = point + limits.nudge_mm * ray.direction;
        out.path.push_back({point, ray.power});

        if (ray.power < limits.power_floor) {
            out.terminal = Terminal::Absorbed;
            out.floor_power = ray.power;
            out.bounces = bounce + 1;
            return out;
        }
    }

    out.terminal = Terminal::BounceLimit;
    out.stranded_power = ray.power;
    out.bounces = limits.max_bounces;
    return out;
}

// ---------------------------------------------------------------------------
// fan runs
// ---------------------------------------------------------------------------

struct ReceiverTally {
    long ray_count = 0;
    double power = 0.0;
};

struct DetectionTally {
    ReceiverTally left, right;
    double escaped_power = 0.0;
    double floor_power = 0.0;
    double stranded_power = 0.0;
    double emitted_power = 0.0;

    double accounted_power() const {
        return left.power + right.power + escaped_power + floor_power + stranded_power;
    }
};

/// Traces the whole fan. Rays are independent; with threads > 1 they are
/// traced in parallel but always merged in ray-index order, so the tally is
/// bit-stable across thread counts.
inline DetectionTally run_fan(const SensorGeometry& g, const FanParams& fan = {},
                              const TraceLimits& limits = {}, int threads = 1) {
    const std::vector<Ray> rays = emit_fan(g.emitter, fan.count, fan.aperture_deg);
    std::vector<TraceOutcome> outcomes(rays.size());

    const int workers = std::clamp<int>(threads, 1, static_cast<int>(rays.size()));
    if (workers <= 1) {
        for (std::size_t i = 0; i < rays.size(); ++i) outcomes[i] = trace(g, rays[i], limits);
    } else {
        std::vector<std::thread> pool;
        pool.reserve(static_cast<std::size_t>(workers));
        const std::size_t chunk = (rays.size() + static_cast<std::size_t>(workers) - 1) /
                                  static_cast<std::size_t>(workers);
        for (int w = 0; w < workers; ++w) {
            const std::size_t begin = static_cast<std::size_t>(w) * chunk;
            const std::size_t end = std::min(rays.size(), begin + chunk);
            if (begin >= end) break;
            pool.emplace_back([&, begin, end] {
                for (std::size_t i = begin; i < end; ++i) outcomes[i] = trace(g, rays[i], limits);
            });
        }
        for (auto& th : pool) th.join();
    }

    DetectionTally tally;
    for (const auto& o : outcomes) {
        tally.emitted_power += o.initial_power;
        tally.escaped_power += o.escaped_power;
        tally.floor_power += o.floor_power;
        tally.stranded_power += o.stranded_power;
        if (o.terminal == Terminal::Detected) {
            auto& side = o.receiver_index == 0 ? tally.left : tally.right;
            side.ray_count += 1;
            side.power += o.deposited_power;
        }
    }
    return tally;
}

// ---------------------------------------------------------------------------
// focal spot
// ---------------------------------------------------------------------------

struct FocalSpot {
    double depth_mm = 0.0;     // along the stem axis, from the lens apex (or base center)
    double radius_mm = 0.0;    // max transverse deviation from the bundle center
    double center_x_mm = 0.0;  // transverse bundle center at the best depth
    int rays_entered = 0;
};

/// Depth of the tightest transverse bundle of first-refraction rays. With a
/// lens mounted only rays entering through the lens surface participate;
/// without one, any first refraction into the polymer counts.
inline FocalSpot focal_spot(const SensorGeometry& g, const FanParams& fan = {},
                            const TraceLimits& limits = {}) {
    struct Entry {
        Vec2 point;
        Vec2 direction;
    };
    std::vector<Entry> entries;
    for (const Ray& ray : emit_fan(g.emitter, fan.count, fan.aperture_deg)) {
        double best_t = std::numeric_limits<double>::infinity();
        Vec2 normal;
        bool on_lens = false, found = false, on_receiver = false;
        for (const auto& edge : g.edges) {
            const auto hit = geom::intersect_ray_segment(ray.origin, ray.direction,
                                                         {edge.a, edge.b}, limits.surface_epsilon_mm);
            if (hit && hit->t < best_t) {
                best_t = hit->t;
                Vec2 n = (edge.b - edge.a).perp().normalized();
                if (n.dot(ray.direction) > 0.0) n = -n;
                normal = n;
                on_lens = false;
                on_receiver = edge.kind != Surface::Wall;
                found = true;
            }
        }
        if (g.has_lens()) {
            const auto lens_hit = detail::intersect_lens_arc(*g.lens, ray.origin, ray.direction,
                                                             limits.surface_epsilon_mm, 300.0, 1e-9);
            if (lens_hit && lens_hit->t < best_t) {
                best_t = lens_hit->t;
                normal = lens_hit->normal;
                on_lens = true;
                on_receiver = false;
                found = true;
            }
        }
        if (!found || on_receiver) continue;
        if (g.has_lens() && !on_lens) continue;
        const RefractionResult rr = refract_or_reflect(
            ray.direction, normal, g.params.ambient_index, g.params.polymer_index);
        if (rr.total_internal_reflection) continue;
        if (!(rr.direction.y > 1e-12)) continue;  // needs forward progress along the stem
        entries.push_back({ray.origin + best_t * ray.direction, rr.direction});
    }
    if (entries.size() < 2)
        throw NumericError("focal_spot: fewer than 2 rays enter the polymer");

    const Vec2 reference = g.apex_position();
    const auto spread_at = [&](double depth) {
        const double y = reference.y + depth;
        double mean = 0.0;
        for (const auto& e : entries)
            mean += e.point.x + (y - e.point.y) / e.direction.y * e.direction.x;
        mean /= static_cast<double>(entries.size());
        double radius = 0.0;
        for (const auto& e : entries) {
            const double x = e.point.x + (y - e.point.y) / e.direction.y * e.direction.x;
            radius = std::max(radius, std::fabs(x - mean));
        }
        return std::pair{radius, mean};
    };

    const double depth_max = g.has_lens() ? 2.0 * g.lens->spec.focal_distance_mm
                                          : 2.0 * (g.params.stem_length_mm + g.params.arm_length_mm);
    double lo = 0.0, hi = depth_max;
    for (int i = 0; i < 200; ++i) {  // spread is convex in depth
        const double m1 = lo + (hi - lo) / 3.0;
        const double m2 = hi - (hi - lo) / 3.0;
        if (spread_at(m1).first < spread_at(m2).first)
            hi = m2;
        else
            lo = m1;
    }
    const double depth = 0.5 * (lo + hi);
    const auto [radius, center] = spread_at(depth);
    return {depth, radius, center, static_cast<int>(entries.size())};
}

// ---------------------------------------------------------------------------
// diagnostics output
// ---------------------------------------------------------------------------

inline constexpr const char* kPathHeader = "ray_id,vertex_index,x_mm,y_mm,power";
inline constexpr const char* kTallyHeader = "receiver,ray_count,power";

inline void write_path_csv(std::ostream& out, std::span<const TraceOutcome> outcomes) {
    out << kPathHeader << "\n";
    for (std::size_t id = 0; id < outcomes.size(); ++id) {
        const auto& path = outcomes[id].path;
        for (std::size_t v = 0; v < path.size(); ++v)
            out << id << ',' << v << ',' << textio::format_g9(path[v].position.x) << ','
                << textio::format_g9(path[v].position.y) << ','
                << textio::format_g9(path[v].power) << "\n";
    }
}

inline void write_tally_csv(std::ostream& out, const DetectionTally& tally) {
    out << kTallyHeader << "\n";
    out << "left," << tally.left.ray_count << ',' << textio::format_g9(tally.left.power) << "\n";
    out << "right," << tally.right.ray_count << ',' << textio::format_g9(tally.right.power) << "\n";
    out << "escaped,0," << textio::format_g9(tally.escaped_power) << "\n";
    out << "absorbed_floor,0," << textio::format_g9(tally.floor_power) << "\n";
    out << "bounce_limit,0," << textio::format_g9(tally.stranded_power) << "\n";
    out << "emitted,0," << textio::format_g9(tally.emitted_power) << "\n";
}

} // namespace solen::ray
