// Command-line front end for the sensor toolkit. One binary, one subcommand
// per pipeline stage:
//
//   material-index   invert a single-layer spectrum to wavelength-dependent n
//   working-curve    fit cure depth vs exposure energy
//   lens-profile     synthesize and export a Cartesian-oval lens profile
//   simulate         ray-trace rotation sweeps, the test protocol, or the
//                    lens vs no-lens comparison
//
// Exit codes: 0 success, 1 validation/parse error, 2 I/O error,
// 3 numerical/domain error.

#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "solen/solen.hpp"

namespace {

using namespace solen;

std::ifstream open_input(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path + "' for reading");
    return in;
}

int cmd_material_index(const std::string& spectrum_path, double thickness_mm,
                       const std::string& output_path) {
    auto in = open_input(spectrum_path);
    const auto loaded = material::parse_spectrum_csv(in);
    for (const auto& w : loaded.warnings) std::cerr << "warning: " << w << "\n";

    const material::SlabSample sample{loaded.spectrum, thickness_mm};
    const auto constants = material::compute_constants(sample);

    std::ostringstream ss;
    material::write_constants_csv(ss, constants);
    textio::write_file(output_path, ss.str());

    const long flagged = constants.flagged_count();
    std::cout << "wrote " << constants.rows.size() << " rows to " << output_path;
    if (flagged > 0) std::cout << " (" << flagged << " flagged)";
    std::cout << "\n";
    if (flagged > 0) {
        for (const auto& row : constants.rows)
            if (!row.ok()) std::cerr << "error: " << row.error << "\n";
        return 3;
    }
    const auto& rows = constants.rows;
    std::cout << "n(" << textio::format_g9(rows.front().wavelength_nm)
              << " nm) = " << textio::format_g9(rows.front().refractive_index) << ", n("
              << textio::format_g9(rows.back().wavelength_nm)
              << " nm) = " << textio::format_g9(rows.back().refractive_index) << "\n";
    return 0;
}

int cmd_working_curve(const std::string& points_path, const std::string& output_path) {
    auto in = open_input(points_path);
    const auto points = material::parse_working_curve_csv(in);
    const auto fit = material::fit_working_curve(points);

    std::cout << "penetration depth Dp = " << textio::format_g9(fit.penetration_um) << " um\n";
    std::cout << "critical energy  Ec = " << textio::format_g9(fit.critical_mj_cm2)
              << " mJ/cm2\n";
    std::cout << "residual rms        = " << textio::format_g9(fit.residual_rms_um) << " um\n";
    std::cout << "cure depth at 40 mJ/cm2 = " << textio::format_g9(fit.cure_depth_at(40.0))
              << " um\n";
    if (!output_path.empty()) {
        std::ostringstream ss;
        ss << "penetration_um,critical_mJ_cm2,residual_rms_um\n"
           << textio::format_g9(fit.penetration_um) << ',' << textio::format_g9(fit.critical_mj_cm2)
           << ',' << textio::format_g9(fit.residual_rms_um) << "\n";
        textio::write_file(output_path, ss.str());
        std::cout << "wrote " << output_path << "\n";
    }
    return 0;
}

int cmd_lens_profile(const lens::LensSpec& spec, const std::string& output_path) {
    const auto profile = lens::solve_profile(spec);

    double worst_path_error = 0.0;
    for (const auto& p : profile.points)
        worst_path_error = std::max(worst_path_error,
                                    std::fabs(lens::oval_residual(p.x_mm, p.z_mm, spec)));
    std::ostringstream ss;
    lens::write_profile_csv(ss, profile);
    textio::write_file(output_path, ss.str());

    std::cout << "wrote " << profile.points.size() << " points to " << output_path << "\n";
    std::cout << "edge sag z(+-" << textio::format_g9(spec.half_aperture_mm)
              << " mm) = " << textio::format_g9(profile.edge_sag_mm()) << " mm\n";
    std::cout << "optical path length " << textio::format_g9(spec.path_constant())
              << " mm, constant to " << textio::format_g9(worst_path_error) << " mm\n";
    return 0;
}

struct SimulateOptions {
    std::string scene_path;
    std::string mode = "sweep";
    std::string out_dir;
    std::string format = "both";
    std::vector<double> thetas{-3.0, 0.0, 3.0};
    double pose_theta = 0.0;
    bool pose_theta_set = false;
    bool no_lens = false;
    bool dump_paths = false;
    int rays = 100;
    double aperture_deg = 120.0;
    int threads = 1;
    experiment::ProtocolSpec protocol;
    experiment::ReadoutModel readout;
    int discard_cycles = 1;
};

experiment::ReportFormat parse_format(const std::string& f) {
    if (f == "csv") return experiment::ReportFormat::Csv;
    if (f == "svg") return experiment::ReportFormat::Svg;
    if (f == "both") return experiment::ReportFormat::Both;
    throw ValidationError("unknown report format '" + f + "' (expected csv, svg, both)");
}

void echo_config(const SimulateOptions& opt, const scene::SceneConfig& config) {
    std::ostringstream ss;
    ss << "# effective simulate configuration\n";
    ss << "mode = " << opt.mode << "\n";
    ss << "rays = " << opt.rays << "\n";
    ss << "aperture_deg = " << textio::format_g9(opt.aperture_deg) << "\n";
    ss << "threads = " << opt.threads << "\n";
    if (opt.mode == "sweep" || opt.mode == "compare") {
        ss << "thetas_deg =";
        for (const double t : opt.thetas) ss << ' ' << textio::format_g9(t);
        ss << "\n";
    }
    if (opt.mode == "protocol") {
        ss << "amplitude_deg = " << textio::format_g9(opt.protocol.amplitude_deg) << "\n";
        ss << "speed_deg_per_s = " << textio::format_g9(opt.protocol.speed_deg_per_s) << "\n";
        ss << "hold_s = " << textio::format_g9(opt.protocol.hold_s) << "\n";
        ss << "cycles = " << opt.protocol.cycles << "\n";
        ss << "sample_rate_hz = " << textio::format_g9(opt.protocol.sample_rate_hz) << "\n";
        ss << "discard_cycles = " << opt.discard_cycles << "\n";
        ss << "readout_v_max = " << textio::format_g9(opt.readout.v_max) << "\n";
        ss << "readout_gain = " << textio::format_g9(opt.readout.gain) << "\n";
    }
    ss << "\n";
    scene::write_scene_file(ss, config);
    textio::write_file(opt.out_dir + "/config.txt", ss.str());
}

int cmd_simulate(const SimulateOptions& opt) {
    scene::SceneConfig config;
    if (!opt.scene_path.empty()) {
        auto in = open_input(opt.scene_path);
        config = scene::parse_scene_file(in);
    } else {
        config = scene::default_scene();
    }
    if (opt.no_lens) config.lens_spec.reset();
    if (opt.pose_theta_set) config.pose.theta_deg = opt.pose_theta;

    const auto format = parse_format(opt.format);
    const ray::FanParams fan{opt.rays, opt.aperture_deg};
    const ray::TraceLimits limits;
    experiment::detail::ensure_directory(opt.out_dir);
    echo_config(opt, config);

    if (opt.mode == "sweep") {
        const auto geometry = scene::build_sensor(config);
        const auto sweep = experiment::rotation_sweep(geometry, opt.thetas, fan, limits, opt.threads);
        experiment::report_sweep(opt.out_dir, sweep, format);
        if (opt.dump_paths) {
            for (const double theta : opt.thetas) {
                const auto posed = scene::apply_pose(geometry, {theta, geometry.pivot});
                std::vector<ray::TraceOutcome> outcomes;
                for (const auto& r : ray::emit_fan(posed.emitter, fan.count, fan.aperture_deg))
                    outcomes.push_back(ray::trace(posed, r, limits));
                const std::string tag = "theta_" + textio::format_g9(theta);
                std::ostringstream paths, tally;
                ray::write_path_csv(paths, outcomes);
                ray::write_tally_csv(tally, ray::run_fan(posed, fan, limits, opt.threads));
                textio::write_file(opt.out_dir + "/paths_" + tag + ".csv", paths.str());
                textio::write_file(opt.out_dir + "/tally_" + tag + ".csv", tally.str());
            }
        }
        for (const auto& r : sweep.rows)
            std::cout << "theta=" << textio::format_g9(r.theta_deg)
                      << " deg: left=" << textio::format_g9(r.left_power)
                      << " right=" << textio::format_g9(r.right_power) << " D="
                      << textio::format_g9(experiment::differential(r.left_power, r.right_power))
                      << "\n";
    } else if (opt.mode == "protocol") {
        const auto geometry = scene::build_sensor(config);
        const auto trace = experiment::synthesize_protocol(geometry, opt.readout, opt.protocol,
                                                           fan, limits, opt.threads);
        const auto folded = experiment::crop_and_fold(trace, opt.discard_cycles);
        experiment::report_protocol(opt.out_dir, trace, folded, format);
        std::cout << "protocol: " << trace.samples.size() << " samples over "
                  << textio::format_g9(trace.duration_s) << " s (" << trace.cycle_count
                  << " cycles of " << trace.samples_per_cycle << " samples)\n";
        const auto& lo = folded.bins.front();
        const auto& hi = folded.bins.back();
        std::cout << "folded: at " << textio::format_g9(lo.theta_deg)
                  << " deg left=" << textio::format_g9(lo.left_mean)
                  << " V right=" << textio::format_g9(lo.right_mean) << " V; at "
                  << textio::format_g9(hi.theta_deg)
                  << " deg left=" << textio::format_g9(hi.left_mean)
                  << " V right=" << textio::format_g9(hi.right_mean) << " V\n";
    } else if (opt.mode == "compare") {
        const auto report =
            experiment::compare_with_without_lens(config, opt.thetas, fan, limits, opt.threads);
        experiment::report_compare(opt.out_dir, report, format);
        for (const auto& r : report.rows)
            std::cout << "theta=" << textio::format_g9(r.theta_deg)
                      << " deg: D_with=" << textio::format_g9(r.with_differential)
                      << " D_without=" << textio::format_g9(r.without_differential) << "\n";
        std::cout << "|D_with|/|D_without| at extremes: "
                  << textio::format_g9(report.ratio_at_min_theta) << " (min theta), "
                  << textio::format_g9(report.ratio_at_max_theta) << " (max theta)\n";
    } else {
        throw ValidationError("unknown mode '" + opt.mode + "' (expected sweep, protocol, compare)");
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Design and simulation toolkit for lens-integrated soft optical sensors"};
    app.require_subcommand(1);
    std::function<int()> run;

    // material-index
    {
        auto* sub = app.add_subcommand("material-index",
                                       "Invert a single-layer spectrum to optical constants");
        auto spectrum = std::make_shared<std::string>();
        auto thickness = std::make_shared<double>(0.025);
        auto output = std::make_shared<std::string>();
        sub->add_option("--spectrum", *spectrum, "spectrum CSV (wavelength_nm,T,A)")->required();
        sub->add_option("--thickness-mm", *thickness,
                        "layer thickness in mm (default 0.025, one printed layer)")
            ->capture_default_str();
        sub->add_option("--output", *output, "output constants CSV")->required();
        sub->callback([=, &run] {
            run = [=] { return cmd_material_index(*spectrum, *thickness, *output); };
        });
    }

    // working-curve
    {
        auto* sub = app.add_subcommand("working-curve",
                                       "Fit cure depth vs exposure energy");
        auto points = std::make_shared<std::string>();
        auto output = std::make_shared<std::string>();
        sub->add_option("--points", *points, "points CSV (energy_mJ_cm2,cure_depth_um)")->required();
        sub->add_option("--output", *output, "optional output CSV with the fit");
        sub->callback([=, &run] { run = [=] { return cmd_working_curve(*points, *output); }; });
    }

    // lens-profile
    {
        auto* sub = app.add_subcommand("lens-profile",
                                       "Solve and export a Cartesian-oval lens profile");
        auto spec = std::make_shared<lens::LensSpec>();
        auto output = std::make_shared<std::string>();
        sub->add_option("--n1", spec->ambient_index, "ambient refractive index (default 1)")
            ->capture_default_str();
        sub->add_option("--n2", spec->lens_index,
                        "lens material refractive index (default 1.44, the 860 nm value)")
            ->capture_default_str();
        sub->add_option("--s-mm", spec->emitter_distance_mm,
                        "emitter-to-apex distance in mm (default 1)")
            ->capture_default_str();
        sub->add_option("--s-prime-mm", spec->focal_distance_mm,
                        "apex-to-focus distance in mm (default 20)")
            ->capture_default_str();
        sub->add_option("--half-aperture-mm", spec->half_aperture_mm,
                        "lens half width in mm (default 2)")
            ->capture_default_str();
        sub->add_option("--samples", spec->sample_count,
                        "profile sample count, odd (default 2001)")
            ->capture_default_str();
        sub->add_option("--output", *output, "output profile CSV")->required();
        sub->callback([=, &run] { run = [=] { return cmd_lens_profile(*spec, *output); }; });
    }

    // simulate
    {
        auto* sub = app.add_subcommand("simulate",
                                       "Ray-trace the sensor: sweep, protocol or compare");
        auto opt = std::make_shared<SimulateOptions>();
        sub->add_option("--scene", opt->scene_path,
                        "scene description file (default: built-in reference sensor)");
        sub->add_option("--mode", opt->mode, "sweep | protocol | compare (default sweep)")
            ->capture_default_str();
        sub->add_option("--out-dir", opt->out_dir, "output directory")->required();
        sub->add_option("--format", opt->format, "report files: csv | svg | both (default both)")
            ->capture_default_str();
        sub->add_option("--thetas", opt->thetas,
                        "rotation angles in degrees for sweep/compare (default -3,0,3)")
            ->delimiter(',')
            ->capture_default_str();
        auto* pose_opt = sub->add_option("--pose-theta", opt->pose_theta,
                                         "override the scene file's base pose angle (deg)");
        sub->add_flag("--no-lens", opt->no_lens, "drop the lens from the scene");
        sub->add_flag("--dump-paths", opt->dump_paths,
                      "sweep mode: also write per-angle ray path and tally CSVs");
        sub->add_option("--rays", opt->rays, "fan ray count (default 100)")->capture_default_str();
        sub->add_option("--aperture-deg", opt->aperture_deg,
                        "fan aperture angle in degrees (default 120)")
            ->capture_default_str();
        sub->add_option("--threads", opt->threads,
                        "worker threads; results are independent of this (default 1)")
            ->capture_default_str();
        sub->add_option("--amplitude-deg", opt->protocol.amplitude_deg,
                        "protocol rotation amplitude (default 3)")
            ->capture_default_str();
        sub->add_option("--speed-deg-s", opt->protocol.speed_deg_per_s,
                        "protocol angular speed (default 15)")
            ->capture_default_str();
        sub->add_option("--hold-s", opt->protocol.hold_s,
                        "protocol hold time at each extreme (default 0.8)")
            ->capture_default_str();
        sub->add_option("--cycles", opt->protocol.cycles, "protocol cycles (default 6)")
            ->capture_default_str();
        sub->add_option("--rate-hz", opt->protocol.sample_rate_hz,
                        "protocol sample rate (default 100)")
            ->capture_default_str();
        sub->add_option("--discard-cycles", opt->discard_cycles,
                        "cycles dropped before folding (default 1)")
            ->capture_default_str();
        sub->add_option("--v-max", opt->readout.v_max, "readout dark voltage (default 3.3)")
            ->capture_default_str();
        sub->add_option("--gain", opt->readout.gain,
                        "readout volts per unit detected power (default 3)")
            ->capture_default_str();
        sub->callback([=, &run] {
            opt->pose_theta_set = pose_opt->count() > 0;
            run = [=] { return cmd_simulate(*opt); };
        });
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    try {
        return run();
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const NumericError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
}
