#pragma once

#include <cmath>
#include <stdexcept>
#include <utility>
#include <vector>

#include "tdreg/manifold.hpp"

namespace tdreg {

// Least-squares estimate on the affine tangent space at lambda_r:
//   lambda_e^i = lambda_r^i + G^ij(lambda_r) <q - p_{lambda_r}, d_j p_{lambda_r}>.
// The estimate is reported as-is when it leaves the domain (flagged, not clamped).
struct StepResult {
    ParamVector lambda;
    bool in_domain = true;
    MetricInfo metric;     // at lambda_r
    VecD cross;            // <q - p_{lambda_r}, d_i p_{lambda_r}>
    double residual2 = 0.0;  // ||q - p_{lambda_r}||^2 on the working (filtered) patterns
};

template <typename TargetFn>
StepResult tangent_step_field(const ManifoldGeometry& g, const TargetFn& target,
                              const ParamVector& lam_r) {
    const GeometryScan s = g.scan(lam_r, false, &target);
    StepResult r;
    r.metric = g.metric_from_scan(s);
    r.cross = s.cross;
    r.residual2 = s.residual2;
    const VecD delta = r.metric.g_inv * s.cross;
    r.lambda = lam_r + delta;
    r.in_domain = g.model().in_domain(r.lambda);
    return r;
}

inline StepResult tangent_step(const ManifoldGeometry& g, const Pattern& q,
                               const ParamVector& lam_r) {
    const auto atoms = compile(q);
    const auto field = [&atoms](Vec2 x) { return eval_compiled(atoms, x); };
    return tangent_step_field(g, field, lam_r);
}

struct RegistrationResult {
    std::vector<ParamVector> estimates;  // estimates[0] = lambda_r
    std::vector<double> rhos;            // filter size per iteration
    std::vector<double> residuals;       // ||q - p_{lambda_e^k}|| per estimate, unfiltered
    std::vector<double> bound_trace;     // optional per-iteration bound values
    bool converged = false;
    bool diverged = false;
    bool left_domain = false;
};

// Filter-size schedule for the coarse-to-fine loop.
//   geometric: rho_k = alpha^((k-1)/2) rho_1, truncated to 0 below the floor;
//   optimal-oracle: rho_k = sqrt(C1 ||lambda_o - lambda_e^{k-1}|| / (2 nu_e) - 1)
//                   when the argument is nonnegative, else 0 (test/oracle mode);
//   fixed: explicit list.
struct FilterSchedule {
    enum class Kind { Fixed, Geometric, OptimalOracle };
    Kind kind = Kind::Fixed;
    std::vector<double> rhos;  // Fixed / Geometric
    // OptimalOracle inputs
    ParamVector lambda_o;
    double c1 = 0.0;
    double nu_e = 0.0;
    int levels = 0;

    int level_count() const {
        return kind == Kind::OptimalOracle ? levels : static_cast<int>(rhos.size());
    }
};

inline double optimal_rho(double c1, double err, double nu_e) {
    if (!(nu_e > 0.0)) return 0.0;
    const double arg = c1 * err / (2.0 * nu_e) - 1.0;
    return arg >= 0.0 ? std::sqrt(arg) : 0.0;
}

inline FilterSchedule make_geometric_schedule(double rho1, double alpha, double floor, int levels) {
    if (!(rho1 > 0.0)) throw std::invalid_argument("geometric schedule: rho1 must be > 0");
    if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("geometric schedule: need 0 < alpha < 1");
    if (!(floor >= 0.0)) throw std::invalid_argument("geometric schedule: floor must be >= 0");
    if (levels < 1) throw std::invalid_argument("geometric schedule: need at least one level");
    FilterSchedule s;
    s.kind = FilterSchedule::Kind::Geometric;
    s.rhos.resize(static_cast<size_t>(levels));
    for (int k = 0; k < levels; ++k) {
        const double r = std::pow(alpha, 0.5 * static_cast<double>(k)) * rho1;
        s.rhos[static_cast<size_t>(k)] = (r < floor) ? 0.0 : r;
    }
    return s;
}

inline FilterSchedule make_fixed_schedule(std::vector<double> rhos) {
    for (double r : rhos)
        if (!(r >= 0.0)) throw std::invalid_argument("fixed schedule: negative rho");
    FilterSchedule s;
    s.kind = FilterSchedule::Kind::Fixed;
    s.rhos = std::move(rhos);
    return s;
}

inline FilterSchedule make_oracle_schedule(ParamVector lambda_o, double c1, double nu_e, int levels) {
    if (!(c1 > 0.0) || !(nu_e >= 0.0)) throw std::invalid_argument("oracle schedule: bad constants");
    if (levels < 1) throw std::invalid_argument("oracle schedule: need at least one level");
    FilterSchedule s;
    s.kind = FilterSchedule::Kind::OptimalOracle;
    s.lambda_o = std::move(lambda_o);
    s.c1 = c1;
    s.nu_e = nu_e;
    s.levels = levels;
    return s;
}

namespace detail {
inline double unfiltered_residual(const Pattern& q, const TransformModel& m, const Pattern& p,
                                  const ParamVector& lam) {
    return pattern_l2_distance(q, apply_to_pattern(m, lam, p));
}
}  // namespace detail

// Iterated single-scale tangent distance: each step linearizes around the
// previous estimate. Stops on ||lambda_k - lambda_{k-1}|| < tol (converged) or
// after max_iters; three consecutive growing updates stop with diverged set.
inline RegistrationResult iterate_single_scale(const ManifoldGeometry& g, const Pattern& q,
                                               const ParamVector& lam_r, int max_iters, double tol) {
    RegistrationResult res;
    res.estimates.push_back(lam_r);
    res.residuals.push_back(detail::unfiltered_residual(q, g.model(), g.pattern(), lam_r));
    ParamVector cur = lam_r;
    double prev_update = std::numeric_limits<double>::infinity();
    int growth_streak = 0;
    for (int k = 0; k < max_iters; ++k) {
        const StepResult step = tangent_step(g, q, cur);
        const double update = (step.lambda - cur).norm();
        cur = step.lambda;
        res.estimates.push_back(cur);
        res.rhos.push_back(0.0);
        res.residuals.push_back(detail::unfiltered_residual(q, g.model(), g.pattern(), cur));
        if (!step.in_domain) res.left_domain = true;
        if (update < tol) {
            res.converged = true;
            break;
        }
        growth_streak = (update > prev_update) ? growth_streak + 1 : 0;
        prev_update = update;
        if (growth_streak >= 3) {
            res.diverged = true;
            break;
        }
    }
    return res;
}

// Coarse-to-fine loop: at level k both patterns are smoothed with rho_k, the
// geometry is rebuilt on the smoothed manifold and one tangent step (default)
// is taken from the previous estimate.
inline RegistrationResult register_hierarchical(const TransformModel& model, const Pattern& p,
                                                const Pattern& q, const ParamVector& lam_r,
                                                const FilterSchedule& schedule,
                                                const QuadratureSpec& quad, int steps_per_level = 1) {
    if (steps_per_level < 1) throw std::invalid_argument("register_hierarchical: steps_per_level >= 1");
    RegistrationResult res;
    res.estimates.push_back(lam_r);
    res.residuals.push_back(detail::unfiltered_residual(q, model, p, lam_r));
    ParamVector cur = lam_r;
    const int levels = schedule.level_count();
    for (int k = 0; k < levels; ++k) {
        double rho = 0.0;
        switch (schedule.kind) {
            case FilterSchedule::Kind::OptimalOracle:
                rho = optimal_rho(schedule.c1, (schedule.lambda_o - cur).norm(), schedule.nu_e);
                break;
            default:
                rho = schedule.rhos[static_cast<size_t>(k)];
                break;
        }
        const ManifoldGeometry g = geometry_at(model, p, rho, quad);
        const Pattern q_hat = smooth_pattern(q, FilterKernel(rho));
        for (int s = 0; s < steps_per_level; ++s) {
            const StepResult step = tangent_step(g, q_hat, cur);
            cur = step.lambda;
            if (!step.in_domain) res.left_domain = true;
        }
        res.estimates.push_back(cur);
        res.rhos.push_back(rho);
        res.residuals.push_back(detail::unfiltered_residual(q, model, p, cur));
    }
    res.converged = true;
    return res;
}

inline RegistrationResult register_hierarchical(const ManifoldGeometry& g, const Pattern& q,
                                                const ParamVector& lam_r,
                                                const FilterSchedule& schedule,
                                                int steps_per_level = 1) {
    return register_hierarchical(g.model(), g.pattern(), q, lam_r, schedule, g.quad(),
                                 steps_per_level);
}

}  // namespace tdreg
