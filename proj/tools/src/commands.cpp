#include "wireguide/cli/commands.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "wireguide/cli/output.hpp"
#include "wireguide/cli/presets.hpp"
#include "wireguide/constants.hpp"
#include "wireguide/errors.hpp"
#include "wireguide/version.hpp"

namespace wireguide::cli {
namespace {

namespace fs = std::filesystem;
namespace c = wireguide::constants;
using nlohmann::ordered_json;

unsigned worker_count(const GlobalOptions& g) {
    if (g.threads > 0) return g.threads;
    return std::max(1u, std::thread::hardware_concurrency());
}

FileMeta meta_of(const RunConfig& cfg) { return {cfg.name, cfg.master_seed}; }

ordered_json header_json(const RunConfig& cfg) {
    ordered_json j;
    j["wireguide_version"] = kVersion;
    j["master_seed"] = cfg.master_seed;
    j["run"] = cfg.name;
    return j;
}

ordered_json efficiency_json(const std::optional<Efficiency>& e) {
    if (!e) return nullptr;
    return {{"fraction", e->fraction}, {"standard_error", e->standard_error}, {"selected", e->selected},
            {"total", e->total}};
}

ordered_json gaussian_json(const GaussianComponent& g) {
    return {{"amplitude", g.amplitude}, {"center_m", g.center}, {"sigma_m", g.sigma}};
}

std::string snapshot_file_name(std::size_t k) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "snapshot_%03zu.csv", k);
    return buf;
}

void write_json(const fs::path& path, const ordered_json& j) { write_text_file(path, j.dump(2) + "\n"); }

std::vector<double> fit_curve(const DoubleGaussianFit& fit, const std::vector<double>& x) {
    std::vector<double> y;
    y.reserve(x.size());
    for (double xi : x) y.push_back(fit.evaluate(xi));
    return y;
}

CcdImage maybe_noisy(const RunConfig& cfg, CcdImage img, std::uint64_t salt) {
    if (!cfg.analysis.poisson_noise) return img;
    return poisson_resample(img, scramble_seed(cfg.master_seed) ^ salt);
}

int analyze_images(const std::vector<RunResult>& results, const fs::path& dir, ordered_json& report) {
    ordered_json list = ordered_json::array();
    for (const auto& r : results) {
        const RunConfig& cfg = r.run.config;
        const fs::path rdir = dir / run_directory("", r.run);
        for (std::size_t k = 0; k < r.snapshots.size(); ++k) {
            const auto& snap = r.snapshots[k];
            const CcdImage top = maybe_noisy(cfg, top_image(cfg, snap), 2 * k);
            const CcdImage side = maybe_noisy(cfg, side_image(cfg, snap), 2 * k + 1);
            char stem[32];
            std::snprintf(stem, sizeof stem, "%03zu", k);
            write_pgm_file(rdir / ("top_" + std::string(stem) + ".pgm"), top, meta_of(cfg));
            write_pgm_file(rdir / ("side_" + std::string(stem) + ".pgm"), side, meta_of(cfg));
            const Profile tp = project_profile(top, ImageAxis::U);
            write_profiles_csv(rdir / ("top_profile_" + std::string(stem) + ".csv"), meta_of(cfg), {"u_m", "counts"},
                               {tp.coordinates, tp.values});
            list.push_back({{"run", cfg.name},
                            {"time_s", snap.time},
                            {"top_counts", top.total()},
                            {"side_counts", side.total()}});
        }
    }
    report["images"] = list;
    return kExitOk;
}

int analyze_fig3(const std::vector<RunResult>& results, const fs::path& dir, ordered_json& report, std::ostream& log) {
    const RunResult* with = nullptr;
    const RunResult* without = nullptr;
    for (const auto& r : results) {
        if (r.run.config.field.wire.current != 0.0) {
            if (with == nullptr) with = &r;
        } else if (without == nullptr) {
            without = &r;
        }
    }
    if (with == nullptr || without == nullptr) {
        throw ValidationError("fig3 analysis needs one run with current and one with zero current");
    }
    const Fig3Result f = analyze_fig3(*with, *without);
    write_profiles_csv(dir / "fig3_profiles.csv", meta_of(with->run.config),
                       {"u_m", "with_current", "without_current", "difference", "fit"},
                       {f.with_current.coordinates, f.with_current.values, f.without_current.values,
                        f.difference.values, fit_curve(f.fit, f.with_current.coordinates)});
    const double bin = f.with_current.bin_width();
    report["fig3"] = {{"fit",
                       {{"trapped", gaussian_json(f.fit.trapped)},
                        {"background", gaussian_json(f.fit.background)},
                        {"offset", f.fit.offset},
                        {"residual_norm", f.fit.residual_norm},
                        {"iterations", f.fit.iterations},
                        {"converged", f.fit.converged},
                        {"degenerate", f.fit.degenerate},
                        {"trapped_atoms", f.fit.trapped_atoms(bin)}}},
                      {"difference", {{"peak", f.peak}, {"left_dip", f.left_dip}, {"right_dip", f.right_dip},
                                      {"peak_in_dip", f.peak_in_dip}}}};
    log << "fig3: trapped atoms " << f.fit.trapped_atoms(bin) << ", peak in dip: " << (f.peak_in_dip ? "yes" : "no")
        << ", fit " << (f.fit.converged ? "converged" : "NOT converged") << "\n";
    return f.fit.converged ? kExitOk : kExitDegraded;
}

int analyze_fig4(const std::vector<RunResult>& results, const fs::path& dir, ordered_json& report, std::ostream& log) {
    ordered_json list = ordered_json::array();
    for (const auto& r : results) {
        const Fig4Result f = analyze_fig4(r);
        std::vector<double> t, frac, se, model;
        for (const auto& p : f.points) {
            t.push_back(p.time);
            frac.push_back(p.fraction);
            se.push_back(p.standard_error);
            model.push_back(p.model);
        }
        write_profiles_csv(dir / run_directory("", r.run) / "fig4_detected_fraction.csv", meta_of(r.run.config),
                           {"time_s", "fraction", "standard_error", "model"}, {t, frac, se, model});
        list.push_back({{"run", r.run.config.name},
                        {"bound_fraction_at_load", f.model.fraction0},
                        {"monotone", f.monotone},
                        {"max_abs_z", f.max_abs_z}});
        log << "fig4 " << r.run.config.name << ": bound at load " << f.model.fraction0 << ", max |z| " << f.max_abs_z
            << (f.monotone ? ", monotone\n" : ", NOT monotone\n");
    }
    report["fig4"] = list;
    return kExitOk;
}

int analyze_fig5(const std::vector<RunResult>& results, const fs::path& dir, ordered_json& report, std::ostream& log) {
    const Fig5Result f = analyze_fig5(results);
    std::vector<double> cur, pred, cen, se, n;
    for (const auto& p : f.points) {
        cur.push_back(p.current);
        pred.push_back(p.predicted);
        cen.push_back(p.centroid);
        se.push_back(p.standard_error);
        n.push_back(static_cast<double>(p.guided));
    }
    write_profiles_csv(dir / "fig5_positions.csv", meta_of(results.front().run.config),
                       {"current_A", "predicted_m", "centroid_m", "standard_error_m", "guided"},
                       {cur, pred, cen, se, n});
    report["fig5"] = {{"slope_m_per_A", f.fit.slope},
                      {"intercept_m", f.fit.intercept},
                      {"r_squared", f.fit.r_squared},
                      {"expected_slope_m_per_A", f.expected_slope},
                      {"slope_ratio", f.slope_ratio}};
    log << "fig5: slope " << f.fit.slope << " m/A (expected " << f.expected_slope << ", ratio " << f.slope_ratio
        << "), R^2 " << f.fit.r_squared << "\n";
    return kExitOk;
}

int analyze_fig6(const std::vector<RunResult>& results, const fs::path& dir, ordered_json& report, std::ostream& log) {
    ordered_json list = ordered_json::array();
    for (const auto& r : results) {
        const Fig6Entry e = analyze_fig6(r);
        const fs::path rdir = dir / run_directory("", r.run);
        write_pgm_file(rdir / "fig6_expanded_top.pgm", e.image, meta_of(r.run.config));
        write_profiles_csv(rdir / "fig6_cut.csv", meta_of(r.run.config), {"u_m", "counts"},
                           {e.cut.coordinates, e.cut.values});
        list.push_back({{"run", r.run.config.name},
                        {"guide", e.side_guide ? "side" : "kepler"},
                        {"guided_atoms", e.guided},
                        {"ring_measure", e.ring.measure},
                        {"verdict", std::string(to_string(e.ring.verdict))}});
        log << "fig6 " << r.run.config.name << ": " << to_string(e.ring.verdict) << " (measure " << e.ring.measure
            << ", " << e.guided << " guided atoms)\n";
    }
    report["fig6"] = list;
    return kExitOk;
}

}  // namespace

std::vector<NamedRun> resolve_runs(const GlobalOptions& g) {
    if (g.config.empty() == g.preset.empty()) {
        throw CLI::ValidationError("exactly one of --config or --preset is required");
    }
    const std::string text = g.preset.empty() ? read_text_file(g.config) : preset_text(g.preset);
    ConfigFile file = parse_config_text(text);
    if (g.seed) {
        file.base["run.master_seed"] = std::to_string(*g.seed);
        for (auto& v : file.variants) v.second.erase("run.master_seed");
    }
    return load_runs(file);
}

fs::path run_directory(const fs::path& root, const NamedRun& run) {
    return root / (run.variant.empty() ? run.config.name : run.variant);
}

int cmd_field(const GlobalOptions& g, const FieldGridOptions& grid, std::ostream& log) {
    if (grid.points < 2) throw ValidationError("field grid needs at least 2 points per axis");
    if (!(grid.half_width > 0.0)) throw ValidationError("field grid half width must be > 0");
    for (const auto& run : resolve_runs(g)) {
        const RunConfig& cfg = run.config;
        const ViewFrame frame = view_frame(View::Top, cfg.field);
        AtomSpecies high = cfg.species;
        high.seeker = Seeker::HighField;
        AtomSpecies low = cfg.species;
        low.seeker = Seeker::LowField;
        std::vector<double> us, vs, b, vh, vl;
        const double step = 2.0 * grid.half_width / static_cast<double>(grid.points - 1);
        for (std::size_t j = 0; j < grid.points; ++j) {
            for (std::size_t i = 0; i < grid.points; ++i) {
                const double u = -grid.half_width + step * static_cast<double>(i);
                const double v = -grid.half_width + step * static_cast<double>(j);
                const Vec3 p = cfg.field.wire.axis_point + u * frame.u + v * frame.v;
                us.push_back(u);
                vs.push_back(v);
                b.push_back(total_field(p, cfg.field).norm());
                vh.push_back(potential(p, high, cfg.field));
                vl.push_back(potential(p, low, cfg.field));
            }
        }
        const fs::path path = run_directory(g.out, run) / "field.csv";
        write_profiles_csv(path, meta_of(cfg), {"u_m", "v_m", "B_T", "V_high_J", "V_low_J"}, {us, vs, b, vh, vl});
        log << "wrote " << path.string() << "\n";
    }
    return kExitOk;
}

int cmd_trap(const GlobalOptions& g, const TrapOptions& opts, std::ostream& log) {
    RunConfig cfg;
    if (!g.config.empty() || !g.preset.empty()) cfg = resolve_runs(g).front().config;
    if (opts.current) cfg.field.wire.current = *opts.current;
    if (opts.bias) cfg.field.bias.magnitude = *opts.bias;
    cfg.field.validate();
    AtomSpecies low = cfg.species;
    low.seeker = Seeker::LowField;

    const SideTrap trap = side_trap_center(cfg.field.wire, cfg.field.bias);
    const double gradient = side_trap_gradient(cfg.field.wire, cfg.field.bias);
    const double depth = side_trap_depth(low, cfg.field.bias);

    ordered_json j = header_json(cfg);
    j["current_A"] = cfg.field.wire.current;
    j["bias_G"] = cfg.field.bias.magnitude / c::gauss;
    j["distance_m"] = trap.distance;
    j["distance_um"] = trap.distance / c::micrometre;
    j["direction"] = {trap.direction.x(), trap.direction.y(), trap.direction.z()};
    j["gradient_T_per_m"] = gradient;
    j["gradient_G_per_cm"] = gradient / c::gauss * 1.0e-2;
    j["depth_J"] = depth;
    j["depth_uK"] = depth / c::boltzmann / c::microkelvin;
    const fs::path path = opts.json.empty() ? g.out / "trap.json" : opts.json;
    write_json(path, j);

    char line[256];
    std::snprintf(line, sizeof line, "side trap: r_s = %.6g um, gradient = %.6g G/cm, depth = %.6g uK\n",
                  trap.distance / c::micrometre, gradient / c::gauss * 1.0e-2, depth / c::boltzmann / c::microkelvin);
    log << line;
    return kExitOk;
}

int cmd_simulate(const GlobalOptions& g, std::ostream& log) {
    const auto runs = resolve_runs(g);
    const unsigned threads = worker_count(g);
    for (const auto& run : runs) {
        const RunConfig& cfg = run.config;
        const RunResult r = execute(run, threads);
        const fs::path dir = run_directory(g.out, run);
        ordered_json files = ordered_json::array();
        for (std::size_t k = 0; k < r.snapshots.size(); ++k) {
            const std::string name = snapshot_file_name(k);
            write_snapshot_csv(dir / name, r.snapshots[k], meta_of(cfg));
            files.push_back({{"file", name},
                             {"time_s", r.snapshots[k].time},
                             {"expanded", cfg.free_expansion_time > 0.0 && k + 1 == r.snapshots.size()}});
        }
        write_text_file(dir / "config.cfg", provenance_line(meta_of(cfg)) + "\n" + to_text(cfg));

        const RunSummary s = summarize(r);
        ordered_json j = header_json(cfg);
        j["variant"] = run.variant;
        j["config"] = to_key_values(cfg);
        j["seeker_fractions"] = {{"high_field", cfg.mot.seeker_fractions.high_field},
                                 {"low_field", cfg.mot.seeker_fractions.low_field}};
        j["efficiency"] = {{"energy_based", efficiency_json(s.energy_based)},
                           {"survival_based", efficiency_json(s.survival_based)}};
        j["counts"] = {{"atoms", cfg.mot.atom_count},
                       {"not_lost", s.guided},
                       {"hit_wire", s.hit_wire},
                       {"left_domain", s.left_domain},
                       {"spin_flip_flagged", s.spin_flip_flagged}};
        j["snapshots"] = files;
        j["timing"] = {{"wall_seconds", r.wall_seconds}, {"threads", threads}};
        write_json(dir / "summary.json", j);

        log << cfg.name << ": " << cfg.mot.atom_count << " atoms in " << r.wall_seconds << " s";
        if (s.energy_based) log << ", energy-based " << s.energy_based->fraction << " +- " << s.energy_based->standard_error;
        if (s.survival_based) {
            log << ", survival-based " << s.survival_based->fraction << " +- " << s.survival_based->standard_error;
        }
        log << "\n";
    }
    return kExitOk;
}

RunResult load_run_result(const NamedRun& run, const fs::path& root) {
    const fs::path dir = run_directory(root, run);
    const auto j = nlohmann::json::parse(read_text_file(dir / "summary.json"));
    KeyValues echo;
    for (const auto& [k, v] : j.at("config").items()) echo[k] = v.get<std::string>();
    if (echo != to_key_values(run.config)) {
        throw ValidationError(dir.string() + " was produced by a different configuration; re-run simulate");
    }
    RunResult r;
    r.run = run;
    for (const auto& f : j.at("snapshots")) {
        r.snapshots.push_back(read_snapshot_csv(dir / f.at("file").get<std::string>(), run.config.species));
    }
    r.wall_seconds = j.at("timing").at("wall_seconds").get<double>();
    return r;
}

int cmd_analyze(const GlobalOptions& g, const fs::path& input, std::ostream& log) {
    const auto runs = resolve_runs(g);
    const fs::path in = input.empty() ? g.out : input;
    std::vector<RunResult> results;
    for (const auto& run : runs) results.push_back(load_run_result(run, in));

    const RunConfig& first = runs.front().config;
    const std::string& kind = first.analysis.kind;
    const fs::path dir = g.out / "analysis";
    ordered_json report = header_json(first);
    report["kind"] = kind;
    int code = kExitOk;
    if (kind == "images") {
        code = analyze_images(results, dir, report);
    } else if (kind == "fig3") {
        code = analyze_fig3(results, dir, report, log);
    } else if (kind == "fig4") {
        code = analyze_fig4(results, dir, report, log);
    } else if (kind == "fig5") {
        code = analyze_fig5(results, dir, report, log);
    } else if (kind == "fig6") {
        code = analyze_fig6(results, dir, report, log);
    } else {
        log << "analysis.kind = none: nothing to do\n";
    }
    write_json(dir / "analysis.json", report);
    return code;
}

int cmd_expand(const GlobalOptions& g, const ExpandOptions& opts, std::ostream& log) {
    if (!(opts.time >= 0.0)) throw ValidationError("expansion time must be >= 0");
    RunConfig cfg;
    if (!g.config.empty() || !g.preset.empty()) cfg = resolve_runs(g).front().config;
    const EnsembleSnapshot snap = read_snapshot_csv(opts.snapshot, cfg.species);
    const EnsembleSnapshot out = ballistic_expand(snap, opts.time, cfg.field.gravity_acceleration());
    const fs::path path = opts.output.empty() ? g.out / "expanded.csv" : opts.output;
    write_snapshot_csv(path, out, meta_of(cfg));
    log << "wrote " << path.string() << "\n";
    return kExitOk;
}

int run_cli(int argc, char** argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Monte Carlo simulator of cold atoms guided by a current-carrying wire", "wireguide"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(kVersion));

    GlobalOptions g;
    std::string out_dir = g.out.string();
    bool list_presets = false;
    bool list_keys = false;
    auto add_globals = [&](CLI::App* sub) {
        sub->add_option("--config", g.config, "Configuration file")->check(CLI::ExistingFile);
        sub->add_option("--preset", g.preset, "Shipped preset name");
        sub->add_option("--seed", g.seed, "Override run.master_seed");
        sub->add_option("--threads", g.threads, "Worker threads (0: all cores)");
        sub->add_option("--out", out_dir, "Output directory");
    };

    app.add_flag("--list-presets", list_presets, "List shipped presets and exit");
    app.add_flag("--list-keys", list_keys, "List configuration keys and exit");

    FieldGridOptions grid;
    double grid_half_mm = grid.half_width / c::millimetre;
    auto* field = app.add_subcommand("field", "Field and potential maps on a transverse grid");
    add_globals(field);
    field->add_option("--half-width-mm", grid_half_mm, "Half width of the square grid");
    field->add_option("--points", grid.points, "Grid points per axis");

    TrapOptions trap;
    std::optional<double> trap_current, trap_bias_g;
    std::string trap_json;
    auto* trap_cmd = app.add_subcommand("trap", "Side-trap design report");
    add_globals(trap_cmd);
    trap_cmd->add_option("--current", trap_current, "Wire current in A");
    trap_cmd->add_option("--bias", trap_bias_g, "Bias field in G");
    trap_cmd->add_option("--json", trap_json, "JSON report path (default <out>/trap.json)");

    auto* simulate = app.add_subcommand("simulate", "Run the guiding sequence and write snapshots");
    add_globals(simulate);

    std::string analyze_in;
    auto* analyze = app.add_subcommand("analyze", "Analyze snapshots written by simulate");
    add_globals(analyze);
    analyze->add_option("--in", analyze_in, "Directory written by simulate (default: --out)");

    ExpandOptions expand;
    std::string expand_snapshot, expand_output;
    double expand_ms = 0.0;
    auto* expand_cmd = app.add_subcommand("expand", "Ballistic expansion of a snapshot file");
    add_globals(expand_cmd);
    expand_cmd->add_option("--snapshot", expand_snapshot, "Snapshot CSV")->required()->check(CLI::ExistingFile);
    expand_cmd->add_option("--time-ms", expand_ms, "Expansion time in ms")->required();
    expand_cmd->add_option("--output", expand_output, "Output CSV (default <out>/expanded.csv)");

    // The listing flags work without a subcommand.
    for (int i = 1; i < argc; ++i) {
        const std::string a = argv[i];
        if (a == "--list-presets") {
            for (const auto& n : preset_names()) out << n << "\n";
            return kExitOk;
        }
        if (a == "--list-keys") {
            out << all_keys_help();
            return kExitOk;
        }
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitUsage;
    }
    g.out = out_dir;

    try {
        if (*field) {
            grid.half_width = grid_half_mm * c::millimetre;
            return cmd_field(g, grid, out);
        }
        if (*trap_cmd) {
            trap.current = trap_current;
            if (trap_bias_g) trap.bias = *trap_bias_g * c::gauss;
            trap.json = trap_json;
            return cmd_trap(g, trap, out);
        }
        if (*simulate) return cmd_simulate(g, out);
        if (*analyze) return cmd_analyze(g, analyze_in, out);
        if (*expand_cmd) {
            expand.snapshot = expand_snapshot;
            expand.time = expand_ms * c::millisecond;
            expand.output = expand_output;
            return cmd_expand(g, expand, out);
        }
    } catch (const CLI::ValidationError& e) {
        err << "usage error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const ValidationError& e) {
        err << "error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const NumericalError& e) {
        err << "numerical failure: " << e.what() << "\n";
        return kExitNumerical;
    } catch (const nlohmann::json::exception& e) {
        err << "error: malformed summary file: " << e.what() << "\n";
        return kExitValidation;
    } catch (const fs::filesystem_error& e) {
        err << "error: " << e.what() << "\n";
        return kExitValidation;
    }
    return kExitUsage;
}

}  // namespace wireguide::cli
