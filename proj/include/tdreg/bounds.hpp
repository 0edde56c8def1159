#pragma once

#include <cmath>
#include <stdexcept>

#include "tdreg/manifold.hpp"
#include "tdreg/registration.hpp"

namespace tdreg {

// Inputs of the one-step alignment-error bound at a reference point.
struct BoundInputs {
    double curvature = 0.0;  // K (of the working manifold)
    MetricInfo metric;       // G at lambda_r
    double nu = 0.0;         // noise level ||n|| (or ||n_o~|| on smoothed patterns)
    VecD delta;              // lambda_o - lambda_r
    int d = 0;
};

// E = K eta_min^-1(G) ( 1/2 sqrt(tr G) ||delta||_1^2 + sqrt(d) nu ||delta||_1 ).
inline double theorem1_bound(const BoundInputs& b) {
    const double l1 = b.delta.norm1();
    return b.curvature / b.metric.eta_min *
           (0.5 * std::sqrt(b.metric.trace) * l1 * l1 + std::sqrt(static_cast<double>(b.d)) * b.nu * l1);
}

// Split of the same expression on the smoothed manifold: E1 carries the
// manifold-nonlinearity term, E2 the noise term; E_hat = E1 + E2.
struct FilteredBound {
    double e1 = 0.0;
    double e2 = 0.0;
    double total() const { return e1 + e2; }
};

inline FilteredBound filtered_bound(const BoundInputs& b) {
    const double l1 = b.delta.norm1();
    const double core = b.curvature / b.metric.eta_min;
    FilteredBound fb;
    fb.e1 = 0.5 * core * std::sqrt(b.metric.trace) * l1 * l1;
    fb.e2 = core * std::sqrt(static_cast<double>(b.d)) * b.nu * l1;
    return fb;
}

// ||n_o~|| = dist(q_hat, M(p_hat)): distance of the smoothed target to the
// smoothed manifold, measured by the projection oracle.
inline ProjectionResult filtered_noise_projection(const TransformModel& model, const Pattern& p,
                                                  const Pattern& q, double rho,
                                                  const QuadratureSpec& quad, const GridSpec& grid) {
    const ManifoldGeometry g = geometry_at(model, p, rho, quad);
    return g.project_bruteforce(smooth_pattern(q, FilterKernel(rho)), grid);
}

inline double measure_filtered_noise(const TransformModel& model, const Pattern& p, const Pattern& q,
                                     double rho, const QuadratureSpec& quad, const GridSpec& grid) {
    return filtered_noise_projection(model, p, q, rho, quad, grid).distance;
}

// nu_e = nu + nu_s for models with a scale change, nu otherwise.
struct EffectiveNoise {
    double nu = 0.0;
    double nu_s = 0.0;
    bool has_scale = false;
    double value() const { return has_scale ? nu + nu_s : nu; }
};

// Scale-model noise offset nu_s: residual of the noiselessly transformed and
// smoothed pattern against the smoothed manifold at the run's initial level.
inline double estimate_scale_noise_offset(const TransformModel& model, const Pattern& p,
                                          const ParamVector& lambda_o, double rho1,
                                          const QuadratureSpec& quad, const GridSpec& grid) {
    if (!model.has_scale() || rho1 == 0.0) return 0.0;
    const Pattern q0 = apply_to_pattern(model, lambda_o, p);
    return measure_filtered_noise(model, p, q0, rho1, quad, grid);
}

// Convergence conditions (strict):
//   nu_e C2 < 1/d   and   ||lambda_o - lambda_r|| < (2/C1) (1/(d C2) - nu_e).
struct ConvergenceCheck {
    bool ok = false;
    double noise_margin = 0.0;  // 1/d - nu_e C2
    double init_margin = 0.0;   // (2/C1)(1/(d C2) - nu_e) - init_err
};

inline ConvergenceCheck convergence_check(const GeometryConstants& c, double nu_e, double init_err,
                                          int d) {
    ConvergenceCheck r;
    const double dd = static_cast<double>(d);
    r.noise_margin = 1.0 / dd - nu_e * c.c2;
    const double radius = 2.0 / c.c1 * (1.0 / (dd * c.c2) - nu_e);
    r.init_margin = radius - init_err;
    r.ok = (r.noise_margin > 0.0) && (r.init_margin > 0.0);
    return r;
}

// alpha = 1/2 d C1 C2 E0 + d nu_e C2; contraction requires alpha < 1.
struct DecayFactor {
    double alpha = 0.0;
    bool contractive = false;
};

inline DecayFactor decay_factor(const GeometryConstants& c, double nu_e, double e0, int d) {
    DecayFactor r;
    const double dd = static_cast<double>(d);
    r.alpha = 0.5 * dd * c.c1 * c.c2 * e0 + dd * nu_e * c.c2;
    r.contractive = r.alpha < 1.0;
    return r;
}

// | ||q - p_{lambda_o}|| - ||q - p_{lambda_e}|| | <= T ||lambda_o - lambda_e||_1.
inline double distance_error_bound(double tangent_sup, const VecD& lambda_o, const VecD& lambda_e) {
    return tangent_sup * (lambda_o - lambda_e).norm1();
}

// Per-iteration error model of the coarse-to-fine proof, as a function of the
// filter size (err = ||lambda_o - lambda_e^{k-1}||):
//   E_k(rho) = 1/4 d C1 C2 (1 + (1+rho^2)^-1/2) err^2
//            + 1/2 d C2 nu_e (1 + (1+rho^2)^-1/2) (1+rho^2)^1/2 err.
// Its minimizer over rho is optimal_rho(C1, err, nu_e).
inline double iteration_error_model(int d, double c1, double c2, double nu_e, double err,
                                    double rho) {
    const double dd = static_cast<double>(d);
    const double u = std::sqrt(1.0 + rho * rho);
    const double shape = 1.0 + 1.0 / u;
    return 0.25 * dd * c1 * c2 * shape * err * err + 0.5 * dd * c2 * nu_e * shape * u * err;
}

}  // namespace tdreg
