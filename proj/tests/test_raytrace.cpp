#include <catch2/catch_amalgamated.hpp>

#include <bit>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "solen/raytrace.hpp"

using namespace solen;
using namespace solen::ray;
using geom::Vec2;
using Catch::Matchers::WithinAbs;

namespace {

scene::SensorGeometry lens_scene() { return scene::build_sensor(scene::default_scene()); }

scene::SensorGeometry flat_scene() {
    auto config = scene::default_scene();
    config.lens_spec.reset();
    return scene::build_sensor(config);
}

double point_segment_distance(Vec2 p, Vec2 a, Vec2 b) {
    const Vec2 e = b - a;
    const double len2 = e.dot(e);
    const double t = std::clamp(len2 > 0.0 ? (p - a).dot(e) / len2 : 0.0, 0.0, 1.0);
    return (p - (a + t * e)).norm();
}

double distance_to_boundary(const scene::SensorGeometry& g, Vec2 p) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& e : g.edges) best = std::min(best, point_segment_distance(p, e.a, e.b));
    if (g.has_lens()) {
        const Vec2 local = g.lens->scene_to_local(p);
        best = std::min(best, std::fabs(lens::oval_residual(local.x, local.y, g.lens->spec)));
    }
    return best;
}

bool tallies_identical(const DetectionTally& a, const DetectionTally& b) {
    return a.left.ray_count == b.left.ray_count && a.right.ray_count == b.right.ray_count &&
           std::bit_cast<std::uint64_t>(a.left.power) == std::bit_cast<std::uint64_t>(b.left.power) &&
           std::bit_cast<std::uint64_t>(a.right.power) == std::bit_cast<std::uint64_t>(b.right.power) &&
           std::bit_cast<std::uint64_t>(a.escaped_power) == std::bit_cast<std::uint64_t>(b.escaped_power) &&
           std::bit_cast<std::uint64_t>(a.floor_power) == std::bit_cast<std::uint64_t>(b.floor_power) &&
           std::bit_cast<std::uint64_t>(a.stranded_power) == std::bit_cast<std::uint64_t>(b.stranded_power);
}

} // namespace

TEST_CASE("fan emission") {
    const scene::Emitter emitter{{0.0, -2.0}, {0.0, 1.0}};

    SECTION("three rays at -60, 0, +60 degrees") {
        const auto rays = emit_fan(emitter, 3, 120.0);
        REQUIRE(rays.size() == 3);
        const double s = std::sin(60.0 * std::numbers::pi / 180.0);
        CHECK_THAT(rays[0].direction.x, WithinAbs(s, 1e-15));   // -60 deg tilts toward +x
        CHECK_THAT(rays[1].direction.x, WithinAbs(0.0, 0.0));
        CHECK_THAT(rays[1].direction.y, WithinAbs(1.0, 0.0));
        CHECK_THAT(rays[2].direction.x, WithinAbs(-s, 1e-15));
    }
    SECTION("hundred-ray fan: spacing, power, exact mirror pairing") {
        const auto rays = emit_fan(emitter, 100, 120.0);
        REQUIRE(rays.size() == 100);
        double total = 0.0;
        for (const auto& r : rays) total += r.power;
        CHECK_THAT(total, WithinAbs(1.0, 1e-12));

        const double step = 120.0 / 99.0 * std::numbers::pi / 180.0;
        const double a01 = std::acos(rays[0].direction.dot(rays[1].direction));
        CHECK_THAT(a01, WithinAbs(step, 1e-12));
        // endpoints at +-60 degrees off axis
        CHECK_THAT(rays[0].direction.dot(emitter.axis), WithinAbs(0.5, 1e-12));

        for (int k = 0; k < 100; ++k) {
            CHECK(rays[k].direction.x == -rays[99 - k].direction.x);
            CHECK(rays[k].direction.y == rays[99 - k].direction.y);
        }
    }
    SECTION("single ray goes along the axis") {
        const auto rays = emit_fan(emitter, 1, 120.0);
        REQUIRE(rays.size() == 1);
        CHECK(rays[0].direction.y == 1.0);
        CHECK(rays[0].power == 1.0);
    }
    SECTION("validation") {
        CHECK_THROWS_AS(emit_fan(emitter, 0, 120.0), ValidationError);
        CHECK_THROWS_AS(emit_fan(emitter, 10, 0.0), ValidationError);
        CHECK_THROWS_AS(emit_fan(emitter, 10, 181.0), ValidationError);
    }
}

TEST_CASE("refraction and total internal reflection") {
    SECTION("normal incidence keeps the direction and takes the Fresnel loss") {
        const auto r = refract_or_reflect({0.0, 1.0}, {0.0, -1.0}, 1.0, 1.44);
        CHECK_FALSE(r.total_internal_reflection);
        CHECK_THAT(r.direction.x, WithinAbs(0.0, 1e-15));
        CHECK_THAT(r.direction.y, WithinAbs(1.0, 1e-15));
        const double expected = 1.0 - std::pow((1.0 - 1.44) / (1.0 + 1.44), 2);
        CHECK_THAT(r.power_transmittance, WithinAbs(expected, 1e-15));
    }
    SECTION("30 degrees into the polymer bends to 20.3175 degrees") {
        const double ai = 30.0 * std::numbers::pi / 180.0;
        const auto r = refract_or_reflect({std::sin(ai), std::cos(ai)}, {0.0, -1.0}, 1.0, 1.44);
        REQUIRE_FALSE(r.total_internal_reflection);
        const double at = std::atan2(r.direction.x, r.direction.y) * 180.0 / std::numbers::pi;
        CHECK_THAT(at, WithinAbs(20.3175076348325, 1e-10));
    }
    SECTION("60 degrees from polymer to air exceeds the 43.98 degree critical angle") {
        const double ai = 60.0 * std::numbers::pi / 180.0;
        const Vec2 d{std::sin(ai), std::cos(ai)};
        const auto r = refract_or_reflect(d, {0.0, -1.0}, 1.44, 1.0);
        CHECK(r.total_internal_reflection);
        // mirror reflection about the normal
        CHECK_THAT(r.direction.x, WithinAbs(d.x, 1e-15));
        CHECK_THAT(r.direction.y, WithinAbs(-d.y, 1e-15));
    }
    SECTION("misoriented normal is rejected") {
        CHECK_THROWS_AS(refract_or_reflect({0.0, 1.0}, {0.0, 1.0}, 1.0, 1.44), NumericError);
    }
    SECTION("Snell tangential identity holds over random incidence") {
        std::mt19937 rng(5150);
        std::uniform_real_distribution<double> angle(-89.0, 89.0);
        std::uniform_real_distribution<double> index(1.0, 1.8);
        for (int i = 0; i < 500; ++i) {
            const double a = angle(rng) * std::numbers::pi / 180.0;
            const double nf = index(rng), nt = index(rng);
            const Vec2 d{std::sin(a), std::cos(a)};
            const Vec2 n{0.0, -1.0};
            const auto r = refract_or_reflect(d, n, nf, nt);
            if (!r.total_internal_reflection) {
                CHECK(std::fabs(nf * d.x - nt * r.direction.x) <= 1e-12);
                CHECK(r.power_transmittance >= 0.0);
                CHECK(r.power_transmittance <= 1.0);
            } else {
                CHECK(nf * std::fabs(std::sin(a)) > nt);
            }
        }
    }
}

TEST_CASE("implicit lens intersection") {
    const auto g = lens_scene();
    REQUIRE(g.has_lens());

    SECTION("axial ray hits the apex with an axial normal") {
        const auto hit = intersect_lens(g, g.emitter.position, {0.0, 1.0});
        REQUIRE(hit.has_value());
        CHECK_THAT(hit->point.x, WithinAbs(0.0, 1e-12));
        CHECK_THAT(hit->point.y, WithinAbs(g.apex_position().y, 1e-9));
        CHECK_THAT(hit->normal.x, WithinAbs(0.0, 1e-9));
        CHECK_THAT(hit->normal.y, WithinAbs(-1.0, 1e-9));
    }
    SECTION("oblique fan ray lands on the surface to the solve tolerance") {
        const double a = 30.0 * std::numbers::pi / 180.0;
        const auto hit = intersect_lens(g, g.emitter.position, {std::sin(a), std::cos(a)});
        REQUIRE(hit.has_value());
        const Vec2 local = g.lens->scene_to_local(hit->point);
        CHECK(std::fabs(lens::oval_residual(local.x, local.y, g.lens->spec)) <= 1e-9);
        CHECK(std::fabs(local.x) <= 2.0);
    }
    SECTION("steep rays miss the aperture") {
        const double a = 55.0 * std::numbers::pi / 180.0;
        CHECK_FALSE(intersect_lens(g, g.emitter.position, {std::sin(a), std::cos(a)}).has_value());
    }
}

TEST_CASE("single ray tracing") {
    const auto g = lens_scene();
    const TraceLimits limits;

    SECTION("per-ray power accounting is exact") {
        for (const auto& r : emit_fan(g.emitter, 17, 120.0)) {
            const auto o = trace(g, r, limits);
            CHECK(o.initial_power ==
                  o.deposited_power + o.escaped_power + o.floor_power + o.stranded_power);
        }
    }
    SECTION("sub-floor rays are absorbed immediately") {
        Ray r{g.emitter.position, {0.0, 1.0}, 1e-5, scene::Medium::Ambient, 0};
        const auto o = trace(g, r, limits);
        CHECK(o.terminal == Terminal::Absorbed);
        CHECK(o.floor_power == 1e-5);
        CHECK(o.bounces == 0);
    }
    SECTION("interior path vertices lie on the boundary") {
        for (const auto& r : emit_fan(g.emitter, 9, 100.0)) {
            const auto o = trace(g, r, limits);
            for (std::size_t v = 1; v + 1 < o.path.size(); ++v)
                CHECK(distance_to_boundary(g, o.path[v].position) <= 1e-6);
        }
    }
    SECTION("axial ray refracts at the apex and continues along the axis") {
        Ray r{g.emitter.position, {0.0, 1.0}, 1.0, scene::Medium::Ambient, 0};
        std::vector<SurfaceEvent> events;
        const auto o = trace(g, r, limits, &events);
        REQUIRE(events.size() >= 1);
        CHECK_THAT(events[0].point.x, WithinAbs(0.0, 1e-9));
        CHECK_FALSE(events[0].tir);
        CHECK_THAT(events[0].direction_out.x, WithinAbs(0.0, 1e-12));
        CHECK(o.path.size() >= 3);
    }
}

TEST_CASE("fan runs and tallies") {
    const auto g = lens_scene();
    const FanParams fan;
    const TraceLimits limits;

    SECTION("symmetric scene splits power exactly evenly") {
        const auto t = run_fan(g, fan, limits);
        CHECK(t.left.power == t.right.power);
        CHECK(t.left.ray_count == t.right.ray_count);
        CHECK(t.left.power > 0.0);
        CHECK(std::fabs(t.accounted_power() - t.emitted_power) <= 1e-9);
    }
    SECTION("negative rotation favors the right receiver") {
        const auto t = run_fan(scene::apply_pose(g, {-3.0, {0.0, 0.0}}), fan, limits);
        CHECK(t.right.power > t.left.power);
        CHECK(std::fabs(t.accounted_power() - t.emitted_power) <= 1e-9);
    }
    SECTION("positive rotation favors the left receiver") {
        const auto t = run_fan(scene::apply_pose(g, {3.0, {0.0, 0.0}}), fan, limits);
        CHECK(t.left.power > t.right.power);
    }
    SECTION("mirrored poses swap the receivers exactly") {
        const auto tp = run_fan(scene::apply_pose(g, {3.0, {0.0, 0.0}}), fan, limits);
        const auto tn = run_fan(scene::apply_pose(g, {-3.0, {0.0, 0.0}}), fan, limits);
        CHECK(std::fabs(tp.left.power - tn.right.power) <= 1e-9);
        CHECK(std::fabs(tp.right.power - tn.left.power) <= 1e-9);
        CHECK(tp.left.ray_count == tn.right.ray_count);
    }
    SECTION("tally is bit-stable across thread counts") {
        const auto t1 = run_fan(g, fan, limits, 1);
        const auto t4 = run_fan(g, fan, limits, 4);
        const auto t8 = run_fan(g, fan, limits, 8);
        CHECK(tallies_identical(t1, t4));
        CHECK(tallies_identical(t1, t8));
    }
}

TEST_CASE("per-event physics invariants across a full fan") {
    for (const bool with_lens : {true, false}) {
        const auto g = with_lens ? lens_scene() : flat_scene();
        for (const double theta : {0.0, -3.0, 3.0}) {
            const auto posed = scene::apply_pose(g, {theta, {0.0, 0.0}});
            for (const auto& r : emit_fan(posed.emitter, 100, 120.0)) {
                std::vector<SurfaceEvent> events;
                (void)trace(posed, r, {}, &events);
                for (const auto& ev : events) {
                    const Vec2 tangent = ev.normal.perp();
                    const double sin_in = std::fabs(ev.direction_in.dot(tangent));
                    if (ev.tir) {
                        CHECK(ev.n_from * sin_in >= ev.n_to);
                    } else {
                        const double sin_out = std::fabs(ev.direction_out.dot(tangent));
                        CHECK(std::fabs(ev.n_from * sin_in - ev.n_to * sin_out) <= 1e-12);
                        CHECK(ev.n_from * sin_in <= ev.n_to + 1e-12);
                    }
                    CHECK_THAT(ev.normal.norm(), WithinAbs(1.0, 1e-12));
                    CHECK_THAT(ev.direction_out.norm(), WithinAbs(1.0, 1e-12));
                }
            }
        }
    }
}

TEST_CASE("focal spot") {
    SECTION("designed lens focuses at the design depth") {
        const auto fs = focal_spot(lens_scene());
        CHECK_THAT(fs.depth_mm, WithinAbs(20.0, 0.2));
        CHECK(fs.radius_mm <= 0.05);
        CHECK_THAT(fs.center_x_mm, WithinAbs(0.0, 1e-9));
        CHECK(fs.rays_entered > 40);
    }
    SECTION("rotation displaces the spot toward the right branch") {
        const auto fs = focal_spot(scene::apply_pose(lens_scene(), {-3.0, {0.0, 0.0}}));
        CHECK(fs.center_x_mm > 0.5);
    }
    SECTION("flat base cannot focus the diverging fan") {
        const auto fs = focal_spot(flat_scene());
        CHECK(fs.radius_mm > 1.0);
    }
    SECTION("needs at least two refracted rays") {
        CHECK_THROWS_AS(focal_spot(flat_scene(), {1, 120.0}), NumericError);
    }
}

TEST_CASE("stigmatic imaging through the analytic surface") {
    const auto g = lens_scene();
    int refracted = 0;
    for (const auto& r : emit_fan(g.emitter, 100, 120.0)) {
        const auto hit = intersect_lens(g, r.origin, r.direction);
        if (!hit) continue;
        const auto rr = refract_or_reflect(r.direction, hit->normal, 1.0, 1.44);
        REQUIRE_FALSE(rr.total_internal_reflection);
        // crossing of the refracted line with the stem axis, measured from the apex
        const double t_axis = -hit->point.x / rr.direction.x;
        const double depth = hit->point.y + t_axis * rr.direction.y - g.apex_position().y;
        CHECK_THAT(depth, WithinAbs(20.0, 1e-6));
        ++refracted;
    }
    CHECK(refracted == 58);  // rays within the +-2 mm aperture of the 120 degree fan
}

TEST_CASE("diagnostic csv writers") {
    const auto g = lens_scene();
    std::vector<TraceOutcome> outcomes;
    for (const auto& r : emit_fan(g.emitter, 3, 60.0)) outcomes.push_back(trace(g, r));

    std::ostringstream paths;
    write_path_csv(paths, outcomes);
    const std::string path_text = paths.str();
    CHECK(path_text.rfind(kPathHeader, 0) == 0);
    CHECK(std::count(path_text.begin(), path_text.end(), '\n') > 3);

    std::ostringstream tally;
    write_tally_csv(tally, run_fan(g));
    const std::string tally_text = tally.str();
    CHECK(tally_text.rfind(kTallyHeader, 0) == 0);
    CHECK(tally_text.find("left,") != std::string::npos);
    CHECK(tally_text.find("emitted,") != std::string::npos);
}
