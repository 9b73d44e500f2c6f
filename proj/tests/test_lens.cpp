#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <sstream>

#include "solen/lens.hpp"

using namespace solen;
using namespace solen::lens;
using Catch::Matchers::WithinAbs;

namespace {

// Bisection golden value for the reference design (n1=1, n2=1.44, s=1, s'=20)
// at the aperture edge, recorded from an independent high-precision solve.
constexpr double kGoldenEdgeSag = 1.81085214223098774;

// Direct arithmetic: sqrt(5) + 1.44*sqrt(404) - 29.8.
constexpr double kGoldenResidualAt20 = 1.37970976632795367;

LensSpec reference_spec() { return LensSpec{}; }  // defaults are the reference design

} // namespace

TEST_CASE("oval residual") {
    const LensSpec spec = reference_spec();
    CHECK(oval_residual(0.0, 0.0, spec) == 0.0);
    CHECK_THAT(oval_residual(2.0, 0.0, spec), WithinAbs(kGoldenResidualAt20, 1e-12));

    // at the focus on-axis the path is n1*(s'+s) vs n1*s + n2*s'
    const double at_focus = oval_residual(0.0, spec.focal_distance_mm, spec);
    CHECK_THAT(at_focus,
               WithinAbs((spec.ambient_index - spec.lens_index) * spec.focal_distance_mm, 1e-12));
    CHECK(at_focus < 0.0);
}

TEST_CASE("optical path length") {
    const LensSpec spec = reference_spec();
    CHECK_THAT(spec.path_constant(), WithinAbs(29.8, 1e-12));
    CHECK_THAT(optical_path_length(0.0, 0.0, spec), WithinAbs(29.8, 1e-12));
    CHECK_THAT(optical_path_length(2.0, 0.0, spec),
               WithinAbs(29.8 + kGoldenResidualAt20, 1e-12));
}

TEST_CASE("spec validation") {
    LensSpec spec = reference_spec();
    spec.sample_count = 2000;
    CHECK_THROWS_AS(spec.validate(), ValidationError);
    spec = reference_spec();
    spec.lens_index = 1.0;
    CHECK_THROWS_AS(spec.validate(), ValidationError);
    spec = reference_spec();
    spec.emitter_distance_mm = 0.0;
    CHECK_THROWS_AS(spec.validate(), ValidationError);
}

TEST_CASE("solved profile satisfies the design contract") {
    const LensSpec spec = reference_spec();
    const LensProfile profile = solve_profile(spec);
    REQUIRE(profile.points.size() == 2001);

    SECTION("apex is exactly at the origin") {
        CHECK(profile.points[1000].x_mm == 0.0);
        CHECK(profile.points[1000].z_mm == 0.0);
    }
    SECTION("edge sag matches the golden bisection value") {
        CHECK_THAT(profile.points.back().z_mm, WithinAbs(kGoldenEdgeSag, 2e-9));
        CHECK(profile.points.back().x_mm == 2.0);
        CHECK(profile.points.front().x_mm == -2.0);
    }
    SECTION("every point sits on the oval and on the constant-path surface") {
        for (const auto& p : profile.points) {
            CHECK(std::fabs(oval_residual(p.x_mm, p.z_mm, spec)) <= 1e-9);
            CHECK(std::fabs(optical_path_length(p.x_mm, p.z_mm, spec) - 29.8) <= 2e-9);
        }
    }
    SECTION("mirror symmetry is exact") {
        for (std::size_t j = 0; j < profile.points.size(); ++j) {
            const auto& a = profile.points[j];
            const auto& b = profile.points[profile.points.size() - 1 - j];
            CHECK(a.z_mm == b.z_mm);
            CHECK(a.x_mm == -b.x_mm);
        }
    }
    SECTION("surface recedes monotonically toward the edges") {
        for (std::size_t j = 1001; j < profile.points.size(); ++j)
            CHECK(profile.points[j].z_mm >= profile.points[j - 1].z_mm);
    }
}

TEST_CASE("higher lens index flattens the profile") {
    LensSpec spec = reference_spec();
    spec.sample_count = 201;
    std::vector<LensProfile> profiles;
    for (const double n2 : {1.44, 1.49, 1.54}) {
        spec.lens_index = n2;
        profiles.push_back(solve_profile(spec));
    }
    // strictly nested: every off-apex z drops as n2 rises
    for (std::size_t j = 0; j < profiles[0].points.size(); ++j) {
        if (profiles[0].points[j].x_mm == 0.0) continue;
        CHECK(profiles[1].points[j].z_mm < profiles[0].points[j].z_mm);
        CHECK(profiles[2].points[j].z_mm < profiles[1].points[j].z_mm);
    }
    CHECK(profiles[0].edge_sag_mm() > profiles[1].edge_sag_mm());
    CHECK(profiles[1].edge_sag_mm() > profiles[2].edge_sag_mm());
}

TEST_CASE("bracket failure names the offending abscissa") {
    LensSpec spec = reference_spec();
    spec.half_aperture_mm = 8.0;
    spec.sample_count = 11;
    CHECK_THROWS_WITH(solve_profile(spec), Catch::Matchers::ContainsSubstring("x = "));
}

TEST_CASE("refining the sampling leaves shared abscissas unchanged") {
    LensSpec coarse = reference_spec();
    coarse.sample_count = 501;
    LensSpec fine = reference_spec();
    fine.sample_count = 2001;
    const auto pc = solve_profile(coarse);
    const auto pf = solve_profile(fine);
    for (std::size_t j = 0; j < pc.points.size(); ++j) {
        const auto& a = pc.points[j];
        const auto& b = pf.points[j * 4];
        REQUIRE(a.x_mm == b.x_mm);
        CHECK(std::fabs(a.z_mm - b.z_mm) <= 2e-9);
    }
}

TEST_CASE("profile export and re-import") {
    LensSpec spec = reference_spec();
    spec.sample_count = 3;
    const auto profile = solve_profile(spec);

    std::ostringstream first;
    write_profile_csv(first, profile);
    const std::string exported = first.str();

    // 3 data rows plus the header and the '#' spec block
    CHECK(std::count(exported.begin(), exported.end(), '\n') == 3 + 1 + 7);

    std::istringstream back(exported);
    const auto parsed = parse_profile_csv(back);
    REQUIRE(parsed.points.size() == 3);
    CHECK(parsed.spec.lens_index == spec.lens_index);
    CHECK(parsed.spec.sample_count == 3);

    // re-export reproduces the file byte for byte (fixed 9-digit precision)
    std::ostringstream second;
    write_profile_csv(second, parsed);
    CHECK(exported == second.str());
}

TEST_CASE("profile parse rejects malformed input") {
    std::istringstream missing_header("1,2\n");
    CHECK_THROWS_AS(parse_profile_csv(missing_header), ParseError);
    std::istringstream bad_fields("x_mm,z_mm\n1\n");
    CHECK_THROWS_AS(parse_profile_csv(bad_fields), ParseError);
}
