#pragma once

#include <cstdint>
#include <future>
#include <map>
#include <string>
#include <vector>

#include "tdreg/bounds.hpp"
#include "tdreg/classify.hpp"
#include "tdreg/csv.hpp"
#include "tdreg/manifold.hpp"
#include "tdreg/registration.hpp"
#include "tdreg/synth.hpp"

namespace tdreg {

// Runs fn(i) for i in [0, n) across the worker pool; results land in a vector
// indexed by i, so assembly order is independent of scheduling.
template <typename T, typename Fn>
std::vector<T> parallel_map(int n, Fn&& fn) {
    std::vector<T> out(static_cast<size_t>(n));
    const int nthreads = std::min(effective_threads(), std::max(1, n));
    if (nthreads <= 1) {
        for (int i = 0; i < n; ++i) out[static_cast<size_t>(i)] = fn(i);
        return out;
    }
    std::vector<std::future<void>> futs;
    futs.reserve(static_cast<size_t>(nthreads));
    for (int t = 0; t < nthreads; ++t) {
        futs.push_back(std::async(std::launch::async, [&, t] {
            for (int i = t; i < n; i += nthreads) out[static_cast<size_t>(i)] = fn(i);
        }));
    }
    for (auto& f : futs) f.get();
    return out;
}

// One reference/target draw of the synthetic protocol: a 20-atom reference, a
// random transformation inside the sampling range, and a unit-norm noise shape
// that gets rescaled per noise level.
struct NoiseShapeConfig {
    int atoms = 100;
    double scale_lo = 0.15;
    double scale_hi = 0.5;
};

struct TrialDraw {
    Pattern pattern;
    ParamVector star;
    Pattern noise_dir;  // unit L2 norm
    double pattern_norm_value = 0.0;
};

inline ParamVector sample_transform(const TransformModel& m, Rng& rng, double range_frac) {
    ParamVector star = m.identity_params();
    for (int i = 0; i < m.dim(); ++i) {
        const auto& iv = m.domain[static_cast<size_t>(i)];
        const double mid = (i == m.axis_s() && m.has_scale()) ? 1.0 : 0.5 * (iv.lo + iv.hi);
        const double half = std::min(mid - iv.lo, iv.hi - mid) * range_frac;
        star[i] = mid + rng.uniform(-half, half);
    }
    return star;
}

inline TrialDraw draw_trial(const TransformModel& m, std::uint64_t seed, int trial,
                            const NoiseShapeConfig& noise, double range_frac) {
    TrialDraw d;
    d.pattern = synth_random_reference(stream_seed(seed, static_cast<std::uint64_t>(3 * trial)));
    Rng rng(stream_seed(seed, static_cast<std::uint64_t>(3 * trial + 1)));
    d.star = sample_transform(m, rng, range_frac);
    d.noise_dir = synth_noise_pattern(noise.atoms, noise.scale_lo, noise.scale_hi, 1.0,
                                      stream_seed(seed, static_cast<std::uint64_t>(3 * trial + 2)));
    d.pattern_norm_value = pattern_norm(d.pattern);
    return d;
}

// ---------------------------------------------------------------------------
// Alignment sweep (one-step tangent estimates plus bound values on a rho/nu
// grid, averaged over seeded trials).

struct AlignmentSweepConfig {
    TransformModel model;
    std::uint64_t seed = 1;
    int trials = 10;
    std::vector<double> rho_values{0.0};
    std::vector<double> nu_values{0.2};  // relative to ||p||
    double transform_range = 0.8;        // fraction of the domain half-width
    NoiseShapeConfig noise;
    QuadratureSpec quad{12.0, 0.1};
    GridSpec projection_grid{9};
    GridSpec constants_grid{5};
};

struct SweepRow {
    double rho = 0.0;
    double nu_rel = 0.0;
    double mean_error = 0.0;
    double mean_e1 = 0.0;
    double mean_e2 = 0.0;
    double mean_e_hat = 0.0;
    int trial_count = 0;
    int failures = 0;
};

inline std::vector<SweepRow> run_alignment_sweep(const AlignmentSweepConfig& cfg) {
    struct TrialCell {
        double err = 0.0, e1 = 0.0, e2 = 0.0;
        bool ok = false;
    };
    const int ntr = cfg.trials;
    const int nrho = static_cast<int>(cfg.rho_values.size());
    const int nnu = static_cast<int>(cfg.nu_values.size());

    const auto cells = parallel_map<std::vector<TrialCell>>(ntr, [&](int t) {
        std::vector<TrialCell> row(static_cast<size_t>(nrho * nnu));
        const TrialDraw d = draw_trial(cfg.model, cfg.seed, t, cfg.noise, cfg.transform_range);
        const Pattern q_clean = apply_to_pattern(cfg.model, d.star, d.pattern);
        const ParamVector lam_r = cfg.model.identity_params();
        for (int ir = 0; ir < nrho; ++ir) {
            const double rho = cfg.rho_values[static_cast<size_t>(ir)];
            try {
                const ManifoldGeometry g_hat = geometry_at(cfg.model, d.pattern, rho, cfg.quad);
                const GeometryConstants c_hat = g_hat.estimate_constants(cfg.constants_grid);
                for (int iu = 0; iu < nnu; ++iu) {
                    TrialCell& cell = row[static_cast<size_t>(ir * nnu + iu)];
                    try {
                        const double nu_abs = cfg.nu_values[static_cast<size_t>(iu)] * d.pattern_norm_value;
                        Pattern q = q_clean;
                        if (nu_abs > 0.0) q.append(d.noise_dir.scaled(nu_abs));
                        const Pattern q_hat = smooth_pattern(q, FilterKernel(rho));
                        const ProjectionResult proj = g_hat.project_bruteforce(q_hat, cfg.projection_grid);
                        const StepResult step = tangent_step(g_hat, q_hat, lam_r);
                        cell.err = (step.lambda - proj.lambda).norm();
                        BoundInputs b;
                        b.curvature = c_hat.curvature;
                        b.metric = step.metric;
                        b.nu = proj.distance;
                        b.delta = proj.lambda - lam_r;
                        b.d = cfg.model.dim();
                        const FilteredBound fb = filtered_bound(b);
                        cell.e1 = fb.e1;
                        cell.e2 = fb.e2;
                        cell.ok = true;
                    } catch (const std::exception&) {
                        cell.ok = false;
                    }
                }
            } catch (const std::exception&) {
                // whole-rho failure: cells stay marked failed
            }
        }
        return row;
    });

    std::vector<SweepRow> rows;
    for (int ir = 0; ir < nrho; ++ir) {
        for (int iu = 0; iu < nnu; ++iu) {
            SweepRow r;
            r.rho = cfg.rho_values[static_cast<size_t>(ir)];
            r.nu_rel = cfg.nu_values[static_cast<size_t>(iu)];
            for (int t = 0; t < ntr; ++t) {
                const TrialCell& cell = cells[static_cast<size_t>(t)][static_cast<size_t>(ir * nnu + iu)];
                if (!cell.ok) {
                    ++r.failures;
                    continue;
                }
                r.mean_error += cell.err;
                r.mean_e1 += cell.e1;
                r.mean_e2 += cell.e2;
                ++r.trial_count;
            }
            if (r.trial_count > 0) {
                r.mean_error /= r.trial_count;
                r.mean_e1 /= r.trial_count;
                r.mean_e2 /= r.trial_count;
                r.mean_e_hat = r.mean_e1 + r.mean_e2;
            }
            rows.push_back(r);
        }
    }
    return rows;
}

inline CsvTable sweep_to_csv(const std::vector<SweepRow>& rows) {
    CsvTable t({"rho", "nu", "E1_hat", "E2_hat", "E_hat", "measured_error", "trials", "failures"});
    for (const auto& r : rows)
        t.add_row({format_double(r.rho), format_double(r.nu_rel), format_double(r.mean_e1),
                   format_double(r.mean_e2), format_double(r.mean_e_hat), format_double(r.mean_error),
                   std::to_string(r.trial_count), std::to_string(r.failures)});
    return t;
}

// ---------------------------------------------------------------------------
// Two-class synthetic classification protocol: 16 shared + 4 class-specific
// atoms per class, queries mixed between the manifolds, one-step classification
// at each filter size, misclassification rate against mean likeliness.

struct ClassificationConfig {
    TransformModel model;  // shared across classes
    std::uint64_t seed = 1;
    int repetitions = 400;
    std::vector<double> rho_values{0.0, 0.5, 1.0, 1.5, 2.0, 3.0, 4.0};
    double mix_lo = 0.25, mix_hi = 0.45;  // weight of the wrong class in the query
    double noise_rel = 0.15;              // query noise relative to ||p^1||
    int noise_atoms = 30;
    double transform_range = 0.7;
    QuadratureSpec quad{12.0, 0.1};
    GridSpec projection_grid{9};
    GridSpec constants_grid{5};
};

struct ClassificationRow {
    double rho = 0.0;
    double misclass_rate = 0.0;
    double mean_likeliness = 0.0;
    int repetitions = 0;
};

struct ClassificationReportRow {
    int query = 0;
    double rho = 0.0;
    int true_label = 0;
    int predicted_label = 0;
    double dist0 = 0.0, dist1 = 0.0;
    double likeliness = 0.0;
};

struct ClassificationOutcome {
    std::vector<ClassificationRow> per_rho;
    std::vector<ClassificationReportRow> report;
};

inline std::pair<Pattern, Pattern> make_shared_atom_classes(std::uint64_t seed, int shared_atoms = 16,
                                                            int specific_atoms = 4) {
    const Pattern base = synth_random_reference(seed, shared_atoms);
    Pattern a = base, b = base;
    const Pattern ea = synth_random_reference(stream_seed(seed, 101), specific_atoms);
    const Pattern eb = synth_random_reference(stream_seed(seed, 202), specific_atoms);
    a.append(ea);
    b.append(eb);
    return {a, b};
}

inline ClassificationOutcome run_classification_protocol(const ClassificationConfig& cfg) {
    struct RepCell {
        std::vector<int> truth, predicted;
        std::vector<double> likeliness, dist0, dist1;
    };
    const int nrho = static_cast<int>(cfg.rho_values.size());

    const auto reps = parallel_map<RepCell>(cfg.repetitions, [&](int r) {
        RepCell cell;
        cell.truth.resize(static_cast<size_t>(nrho));
        cell.predicted.resize(static_cast<size_t>(nrho));
        cell.likeliness.resize(static_cast<size_t>(nrho));
        cell.dist0.resize(static_cast<size_t>(nrho));
        cell.dist1.resize(static_cast<size_t>(nrho));

        const std::uint64_t rep_seed = stream_seed(cfg.seed, static_cast<std::uint64_t>(r));
        const auto [pa, pb] = make_shared_atom_classes(rep_seed);
        const Pattern cls[2] = {pa, pb};
        Rng rng(stream_seed(rep_seed, 7));

        // query between the manifolds, biased to a random class
        const int want = static_cast<int>(rng.next_u64() & 1);
        const ParamVector star = sample_transform(cfg.model, rng, cfg.transform_range);
        const double w = rng.uniform(cfg.mix_lo, cfg.mix_hi);
        Pattern q = apply_to_pattern(cfg.model, star, cls[want]).scaled(1.0 - w);
        q.append(apply_to_pattern(cfg.model, star, cls[1 - want]).scaled(w));
        const double pnorm = pattern_norm(cls[want]);
        if (cfg.noise_rel > 0.0)
            q.append(synth_noise_pattern(cfg.noise_atoms, 0.2, 0.6, cfg.noise_rel * pnorm,
                                         stream_seed(rep_seed, 11)));

        // exact label by projection on the unfiltered manifolds
        const ParamVector id = cfg.model.identity_params();
        ManifoldGeometry g0(cfg.model, cls[0], cfg.quad);
        ManifoldGeometry g1(cfg.model, cls[1], cfg.quad);
        const ProjectionResult pr0 = g0.project_bruteforce(q, cfg.projection_grid);
        const ProjectionResult pr1 = g1.project_bruteforce(q, cfg.projection_grid);
        const int truth = pr1.distance < pr0.distance ? 1 : 0;

        // unfiltered tangent-norm supremum of the true class
        const GeometryConstants c_true =
            (truth == 0 ? g0 : g1).estimate_constants(cfg.constants_grid);

        for (int ir = 0; ir < nrho; ++ir) {
            const double rho = cfg.rho_values[static_cast<size_t>(ir)];
            const Pattern q_hat = smooth_pattern(q, FilterKernel(rho));
            double dist[2] = {0.0, 0.0};
            for (int c = 0; c < 2; ++c) {
                const ManifoldGeometry gh = geometry_at(cfg.model, cls[c], rho, cfg.quad);
                const StepResult step = tangent_step(gh, q_hat, id);
                dist[c] = pattern_l2_distance(q, apply_to_pattern(cfg.model, step.lambda, cls[c]));
            }
            const int predicted = dist[1] < dist[0] ? 1 : 0;

            // likeliness of the true class at this filter size
            const ManifoldGeometry gh_true = geometry_at(cfg.model, cls[truth], rho, cfg.quad);
            const ProjectionResult proj_hat = gh_true.project_bruteforce(q_hat, cfg.projection_grid);
            const GeometryConstants ch = gh_true.estimate_constants(cfg.constants_grid);
            const MetricInfo mi = gh_true.metric_tensor(id);
            const double lk = likeliness_formula(c_true.tangent_sup, ch.curvature, mi,
                                                 proj_hat.lambda - id, proj_hat.distance,
                                                 cfg.model.dim());

            cell.truth[static_cast<size_t>(ir)] = truth;
            cell.predicted[static_cast<size_t>(ir)] = predicted;
            cell.likeliness[static_cast<size_t>(ir)] = lk;
            cell.dist0[static_cast<size_t>(ir)] = dist[0];
            cell.dist1[static_cast<size_t>(ir)] = dist[1];
        }
        return cell;
    });

    ClassificationOutcome out;
    for (int ir = 0; ir < nrho; ++ir) {
        ClassificationRow row;
        row.rho = cfg.rho_values[static_cast<size_t>(ir)];
        for (int r = 0; r < cfg.repetitions; ++r) {
            const RepCell& cell = reps[static_cast<size_t>(r)];
            row.misclass_rate += (cell.predicted[static_cast<size_t>(ir)] != cell.truth[static_cast<size_t>(ir)]) ? 1.0 : 0.0;
            row.mean_likeliness += cell.likeliness[static_cast<size_t>(ir)];
        }
        row.repetitions = cfg.repetitions;
        row.misclass_rate /= cfg.repetitions;
        row.mean_likeliness /= cfg.repetitions;
        out.per_rho.push_back(row);
    }
    for (int r = 0; r < cfg.repetitions; ++r) {
        const RepCell& cell = reps[static_cast<size_t>(r)];
        for (int ir = 0; ir < nrho; ++ir) {
            ClassificationReportRow rr;
            rr.query = r;
            rr.rho = cfg.rho_values[static_cast<size_t>(ir)];
            rr.true_label = cell.truth[static_cast<size_t>(ir)];
            rr.predicted_label = cell.predicted[static_cast<size_t>(ir)];
            rr.dist0 = cell.dist0[static_cast<size_t>(ir)];
            rr.dist1 = cell.dist1[static_cast<size_t>(ir)];
            rr.likeliness = cell.likeliness[static_cast<size_t>(ir)];
            out.report.push_back(rr);
        }
    }
    return out;
}

inline CsvTable classification_summary_csv(const std::vector<ClassificationRow>& rows) {
    CsvTable t({"rho", "misclass_rate", "mean_likeliness", "repetitions"});
    for (const auto& r : rows)
        t.add_row({format_double(r.rho), format_double(r.misclass_rate),
                   format_double(r.mean_likeliness), std::to_string(r.repetitions)});
    return t;
}

inline CsvTable classification_report_csv(const std::vector<ClassificationReportRow>& rows) {
    CsvTable t({"query", "rho", "true_label", "predicted_label", "dist_class0", "dist_class1",
                "likeliness"});
    for (const auto& r : rows)
        t.add_row({std::to_string(r.query), format_double(r.rho), std::to_string(r.true_label),
                   std::to_string(r.predicted_label), format_double(r.dist0), format_double(r.dist1),
                   format_double(r.likeliness)});
    return t;
}

// ---------------------------------------------------------------------------
// Single-shot registration run (trace export).

struct RegistrationRunConfig {
    TransformModel model;
    std::uint64_t seed = 1;
    ParamVector star;           // target transformation
    double nu_rel = 0.0;        // noise relative to ||p||
    NoiseShapeConfig noise;
    FilterSchedule schedule = make_fixed_schedule({0.0});
    QuadratureSpec quad{12.0, 0.1};
    GridSpec projection_grid{9};
    GridSpec constants_grid{5};
    bool with_bounds = false;  // fill the bound column via the projection oracle
};

struct RegistrationRunOutcome {
    RegistrationResult result;
    ParamVector lambda_oracle;  // valid when with_bounds
    bool have_oracle = false;
};

inline RegistrationRunOutcome run_registration(const RegistrationRunConfig& cfg) {
    const Pattern p = synth_random_reference(cfg.seed);
    Pattern q = apply_to_pattern(cfg.model, cfg.star, p);
    if (cfg.nu_rel > 0.0)
        q.append(synth_noise_pattern(cfg.noise.atoms, cfg.noise.scale_lo, cfg.noise.scale_hi,
                                     cfg.nu_rel * pattern_norm(p), stream_seed(cfg.seed, 1)));
    RegistrationRunOutcome out;
    out.result = register_hierarchical(cfg.model, p, q, cfg.model.identity_params(), cfg.schedule,
                                       cfg.quad);
    if (cfg.with_bounds) {
        const ManifoldGeometry g(cfg.model, p, cfg.quad);
        const ProjectionResult proj = g.project_bruteforce(q, cfg.projection_grid);
        out.lambda_oracle = proj.lambda;
        out.have_oracle = true;
        const GeometryConstants c = g.estimate_constants(cfg.constants_grid);
        for (size_t k = 0; k + 1 < out.result.estimates.size(); ++k) {
            const double rho = out.result.rhos[k];
            const ManifoldGeometry gh = geometry_at(cfg.model, p, rho, cfg.quad);
            const ProjectionResult proj_rho =
                filtered_noise_projection(cfg.model, p, q, rho, cfg.quad, cfg.projection_grid);
            BoundInputs b;
            b.curvature = rho == 0.0 ? c.curvature : gh.estimate_constants(cfg.constants_grid).curvature;
            b.metric = gh.metric_tensor(out.result.estimates[k]);
            b.nu = proj_rho.distance;
            b.delta = proj_rho.lambda - out.result.estimates[k];
            b.d = cfg.model.dim();
            out.result.bound_trace.push_back(theorem1_bound(b));
        }
    }
    return out;
}

inline CsvTable registration_trace_csv(const TransformModel& model, const RegistrationResult& res) {
    std::vector<std::string> cols{"iter", "rho"};
    for (int i = 0; i < model.dim(); ++i) cols.push_back("lambda" + std::to_string(i));
    cols.push_back("residual");
    cols.push_back("bound");
    CsvTable t(cols);
    for (size_t k = 0; k < res.estimates.size(); ++k) {
        std::vector<std::string> row;
        row.push_back(std::to_string(k));
        row.push_back(k == 0 ? "" : format_double(res.rhos[k - 1]));
        for (int i = 0; i < model.dim(); ++i) row.push_back(format_double(res.estimates[k][i]));
        row.push_back(format_double(res.residuals[k]));
        const bool have_bound = k > 0 && res.bound_trace.size() + 1 == res.estimates.size();
        row.push_back(have_bound ? format_double(res.bound_trace[k - 1]) : "");
        t.add_row(row);
    }
    return t;
}

inline CsvTable schedule_csv(const FilterSchedule& s) {
    CsvTable t({"level", "rho"});
    if (s.kind == FilterSchedule::Kind::OptimalOracle) {
        throw std::invalid_argument("schedule export: oracle schedules are resolved at run time");
    }
    for (size_t k = 0; k < s.rhos.size(); ++k)
        t.add_row({std::to_string(k + 1), format_double(s.rhos[k])});
    return t;
}

}  // namespace tdreg
