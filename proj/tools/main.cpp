// tdreg: experiment driver for tangent-distance registration on parametric
// transformation manifolds. Subcommands: register, sweep, classify, bounds,
// schedule. Config via JSON file, flags override seed/output/threads.

#include <cstdint>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "tdreg/experiments.hpp"
#include "tdreg/pattern_io.hpp"

using nlohmann::json;
using namespace tdreg;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

json load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    json j;
    try {
        in >> j;
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config parse error: ") + e.what());
    }
    return j;
}

TransformModel model_from_config(const json& cfg) {
    if (!cfg.contains("model")) throw ConfigError("config: missing 'model' block");
    try {
        return model_from_json(cfg["model"]);
    } catch (const std::exception& e) {
        throw ConfigError(std::string("config: 'model': ") + e.what());
    }
}

Pattern pattern_from_config(const json& cfg, std::uint64_t seed) {
    if (cfg.contains("pattern")) {
        const json& p = cfg["pattern"];
        if (p.contains("file")) return load_pattern(p["file"].get<std::string>());
        if (p.contains("seed")) return synth_random_reference(p["seed"].get<std::uint64_t>());
        throw ConfigError("config: 'pattern' needs 'seed' or 'file'");
    }
    return synth_random_reference(seed);
}

QuadratureSpec quad_from_config(const json& cfg) {
    try {
        return cfg.contains("quadrature") ? quadrature_from_json(cfg["quadrature"])
                                          : QuadratureSpec();  // L = 12, h = 0.05
    } catch (const std::exception& e) {
        throw ConfigError(std::string("config: 'quadrature': ") + e.what());
    }
}

GridSpec grid_from_config(const json& cfg, const char* key, int fallback) {
    if (!cfg.contains(key)) return GridSpec{fallback};
    return grid_from_json(cfg[key]);
}

NoiseShapeConfig noise_from_config(const json& cfg) {
    NoiseShapeConfig n;
    if (cfg.contains("noise")) {
        const json& j = cfg["noise"];
        n.atoms = j.value("atoms", n.atoms);
        n.scale_lo = j.value("scale_lo", n.scale_lo);
        n.scale_hi = j.value("scale_hi", n.scale_hi);
    }
    return n;
}

std::uint64_t config_hash(const json& effective, const std::string& command) {
    return fnv1a_hash(command + ":" + effective.dump());
}

ParamVector param_from_json(const TransformModel& m, const json& arr, const char* what) {
    if (!arr.is_array() || static_cast<int>(arr.size()) != m.dim())
        throw ConfigError(std::string("config: '") + what + "' must be an array of length " +
                          std::to_string(m.dim()));
    ParamVector lam(m.dim());
    for (int i = 0; i < m.dim(); ++i) lam[i] = arr.at(static_cast<size_t>(i)).get<double>();
    return lam;
}

int cmd_register(const json& cfg, std::uint64_t seed, const std::string& out_path) {
    const TransformModel model = model_from_config(cfg);
    if (!cfg.contains("target") || !cfg["target"].contains("lambda"))
        throw ConfigError("config: register needs 'target.lambda'");
    const ParamVector star = param_from_json(model, cfg["target"]["lambda"], "target.lambda");
    const double nu_rel = cfg["target"].value("nu_rel", 0.0);

    const QuadratureSpec quad = quad_from_config(cfg);
    const GridSpec proj_grid = grid_from_config(cfg, "projection_grid", 9);
    const GridSpec const_grid = grid_from_config(cfg, "constants_grid", 5);
    const NoiseShapeConfig noise = noise_from_config(cfg);
    const bool bruteforce = cfg.contains("oracle") && cfg["oracle"].value("bruteforce", false);

    const Pattern p = pattern_from_config(cfg, seed);
    Pattern q = apply_to_pattern(model, star, p);
    if (nu_rel > 0.0)
        q.append(synth_noise_pattern(noise.atoms, noise.scale_lo, noise.scale_hi,
                                     nu_rel * pattern_norm(p), stream_seed(seed, 1)));

    if (!cfg.contains("schedule")) throw ConfigError("config: register needs a 'schedule' block");
    FilterSchedule schedule;
    const std::string sched_kind = cfg["schedule"].value("kind", "");
    if (sched_kind == "optimal-oracle") {
        if (!bruteforce && !cfg["schedule"].contains("lambda_o"))
            throw ConfigError("config: optimal-oracle schedule needs 'oracle.bruteforce' or an explicit 'schedule.lambda_o'");
        const ManifoldGeometry g(model, p, quad);
        ParamVector lambda_o;
        double nu_measured = 0.0;
        if (cfg["schedule"].contains("lambda_o")) {
            lambda_o = param_from_json(model, cfg["schedule"]["lambda_o"], "schedule.lambda_o");
            nu_measured = pattern_l2_distance(q, apply_to_pattern(model, lambda_o, p));
        } else {
            const ProjectionResult proj = g.project_bruteforce(q, proj_grid);
            lambda_o = proj.lambda;
            nu_measured = proj.distance;
        }
        const GeometryConstants c = g.estimate_constants(const_grid);
        EffectiveNoise ne;
        ne.nu = nu_measured;
        ne.has_scale = model.has_scale();
        if (model.has_scale()) {
            const double rho1_guess =
                optimal_rho(c.c1, (lambda_o - model.identity_params()).norm(), std::max(nu_measured, 1e-12));
            ne.nu_s = estimate_scale_noise_offset(model, p, lambda_o, rho1_guess, quad, proj_grid);
        }
        schedule = make_oracle_schedule(lambda_o, c.c1, std::max(ne.value(), 1e-12),
                                        cfg["schedule"].value("levels", 12));
    } else {
        try {
            schedule = schedule_from_json(cfg["schedule"], nullptr, 0.0, 0.0);
        } catch (const std::exception& e) {
            throw ConfigError(std::string("config: 'schedule': ") + e.what());
        }
    }

    RegistrationResult res = register_hierarchical(model, p, q, model.identity_params(), schedule, quad);
    if (bruteforce) {
        const ManifoldGeometry g(model, p, quad);
        const GeometryConstants c = g.estimate_constants(const_grid);
        for (size_t k = 0; k + 1 < res.estimates.size(); ++k) {
            const ProjectionResult proj_rho =
                filtered_noise_projection(model, p, q, res.rhos[k], quad, proj_grid);
            const ManifoldGeometry gh = geometry_at(model, p, res.rhos[k], quad);
            BoundInputs b;
            b.curvature = res.rhos[k] == 0.0 ? c.curvature
                                             : gh.estimate_constants(const_grid).curvature;
            b.metric = gh.metric_tensor(res.estimates[k]);
            b.nu = proj_rho.distance;
            b.delta = proj_rho.lambda - res.estimates[k];
            b.d = model.dim();
            res.bound_trace.push_back(theorem1_bound(b));
        }
    }

    registration_trace_csv(model, res).write(out_path, config_hash(cfg, "register"), seed);
    return kExitOk;
}

AlignmentSweepConfig sweep_config(const json& cfg, std::uint64_t seed) {
    AlignmentSweepConfig sc;
    sc.model = model_from_config(cfg);
    sc.seed = seed;
    sc.trials = cfg.value("trials", 10);
    if (sc.trials < 1) throw ConfigError("config: 'trials' must be >= 1");
    if (cfg.contains("rho_values")) sc.rho_values = cfg["rho_values"].get<std::vector<double>>();
    if (cfg.contains("nu_values")) sc.nu_values = cfg["nu_values"].get<std::vector<double>>();
    if (sc.rho_values.empty() || sc.nu_values.empty())
        throw ConfigError("config: 'rho_values' and 'nu_values' must be nonempty");
    sc.transform_range = cfg.value("transform_range", 0.8);
    sc.noise = noise_from_config(cfg);
    sc.quad = quad_from_config(cfg);
    sc.projection_grid = grid_from_config(cfg, "projection_grid", 9);
    sc.constants_grid = grid_from_config(cfg, "constants_grid", 5);
    return sc;
}

int cmd_sweep(const json& cfg, std::uint64_t seed, const std::string& out_path,
              const std::string& axis) {
    const AlignmentSweepConfig sc = sweep_config(cfg, seed);
    if (axis == "rho" && sc.rho_values.size() < 2)
        throw ConfigError("config: rho sweep needs at least 2 entries in 'rho_values'");
    if (axis == "nu" && sc.nu_values.size() < 2)
        throw ConfigError("config: nu sweep needs at least 2 entries in 'nu_values'");
    const auto rows = run_alignment_sweep(sc);
    sweep_to_csv(rows).write(out_path, config_hash(cfg, "sweep-" + axis), seed);
    return kExitOk;
}

int cmd_bounds(const json& cfg, std::uint64_t seed, const std::string& out_path) {
    const AlignmentSweepConfig sc = sweep_config(cfg, seed);
    const auto rows = run_alignment_sweep(sc);
    sweep_to_csv(rows).write(out_path, config_hash(cfg, "bounds"), seed);
    return kExitOk;
}

int cmd_classify(const json& cfg, std::uint64_t seed, const std::string& out_path,
                 const std::string& report_path) {
    ClassificationConfig cc;
    cc.model = model_from_config(cfg);
    cc.seed = seed;
    if (cfg.contains("classification")) {
        const json& j = cfg["classification"];
        cc.repetitions = j.value("repetitions", cc.repetitions);
        if (j.contains("rho_values")) cc.rho_values = j["rho_values"].get<std::vector<double>>();
        cc.mix_lo = j.value("mix_lo", cc.mix_lo);
        cc.mix_hi = j.value("mix_hi", cc.mix_hi);
        cc.noise_rel = j.value("noise_rel", cc.noise_rel);
        cc.noise_atoms = j.value("noise_atoms", cc.noise_atoms);
        cc.transform_range = j.value("transform_range", cc.transform_range);
    }
    if (cc.repetitions < 1) throw ConfigError("config: 'classification.repetitions' must be >= 1");
    if (cc.rho_values.empty()) throw ConfigError("config: 'classification.rho_values' must be nonempty");
    cc.quad = quad_from_config(cfg);
    cc.projection_grid = grid_from_config(cfg, "projection_grid", 9);
    cc.constants_grid = grid_from_config(cfg, "constants_grid", 5);

    const ClassificationOutcome out = run_classification_protocol(cc);
    classification_summary_csv(out.per_rho).write(out_path, config_hash(cfg, "classify"), seed);
    if (!report_path.empty())
        classification_report_csv(out.report).write(report_path, config_hash(cfg, "classify-report"), seed);
    return kExitOk;
}

int cmd_schedule(const json& cfg, std::uint64_t seed, const std::string& out_path) {
    if (!cfg.contains("schedule")) throw ConfigError("config: schedule command needs a 'schedule' block");
    const std::string kind = cfg["schedule"].value("kind", "");
    if (kind == "optimal-oracle")
        throw ConfigError("config: optimal-oracle schedules are resolved during a register run; "
                          "use the register command with 'oracle.bruteforce'");
    FilterSchedule s;
    try {
        s = schedule_from_json(cfg["schedule"], nullptr, 0.0, 0.0);
    } catch (const std::exception& e) {
        throw ConfigError(std::string("config: 'schedule': ") + e.what());
    }
    schedule_csv(s).write(out_path, config_hash(cfg, "schedule"), seed);
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"tangent-distance registration experiments"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_path = "out.csv";
    std::string report_path;
    std::string axis = "rho";
    std::uint64_t seed = 1;
    bool seed_given = false;
    int threads = 0;

    auto add_common = [&](CLI::App* sub, bool needs_config = true) {
        auto* copt = sub->add_option("--config", config_path, "JSON config file");
        if (needs_config) copt->required();
        sub->add_option("--out", out_path, "output CSV path");
        sub->add_option("--seed", seed, "master seed (overrides config)")
            ->each([&](const std::string&) { seed_given = true; });
        sub->add_option("--threads", threads, "worker threads (0 = hardware)");
    };

    CLI::App* reg = app.add_subcommand("register", "single registration run, trace CSV");
    add_common(reg);
    CLI::App* sweep = app.add_subcommand("sweep", "alignment error sweep over rho or nu");
    add_common(sweep);
    sweep->add_option("--axis", axis, "sweep axis: rho or nu")->check(CLI::IsMember({"rho", "nu"}));
    CLI::App* bounds = app.add_subcommand("bounds", "bound components on the rho/nu grid");
    add_common(bounds);
    CLI::App* classify = app.add_subcommand("classify", "two-class synthetic protocol");
    add_common(classify);
    classify->add_option("--report", report_path, "per-query report CSV path");
    CLI::App* schedule = app.add_subcommand("schedule", "emit a filter-size schedule");
    add_common(schedule);

    CLI11_PARSE(app, argc, argv);

    try {
        const json cfg = load_config(config_path);
        if (!seed_given && cfg.contains("seed")) seed = cfg["seed"].get<std::uint64_t>();
        worker_threads() = threads;

        if (app.got_subcommand(reg)) return cmd_register(cfg, seed, out_path);
        if (app.got_subcommand(sweep)) return cmd_sweep(cfg, seed, out_path, axis);
        if (app.got_subcommand(bounds)) return cmd_bounds(cfg, seed, out_path);
        if (app.got_subcommand(classify)) return cmd_classify(cfg, seed, out_path, report_path);
        if (app.got_subcommand(schedule)) return cmd_schedule(cfg, seed, out_path);
        std::cerr << "no subcommand\n";
        return kExitConfig;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "numerical error: " << e.what() << "\n";
        return kExitNumerical;
    }
}
