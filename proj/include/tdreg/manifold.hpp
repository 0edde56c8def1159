#pragma once

#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>
#include <vector>

#include "tdreg/atoms.hpp"
#include "tdreg/quadrature.hpp"
#include "tdreg/synth.hpp"
#include "tdreg/transforms.hpp"

namespace tdreg {

struct RankDeficientError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct CalibrationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Sampling density for suprema over the parameter domain.
struct GridSpec {
    int points_per_axis = 9;
};

struct MetricInfo {
    MatD g;
    MatD g_inv;
    double eta_min = 0.0;
    double trace = 0.0;
};

// Geometric constants of M(p) over Lambda:
//   K  = max_{i,j} sup ||d_ij p_lambda||      (curvature bound)
//   T  = max_i sup ||d_i p_lambda||           (tangent-norm supremum)
//   C1 = sup sqrt(tr G),  C2 = K sup 1/eta_min(G).
struct GeometryConstants {
    double curvature = 0.0;
    double tangent_sup = 0.0;
    double c1 = 0.0;
    double c2 = 0.0;
};

struct ProjectionResult {
    ParamVector lambda;
    double distance = 0.0;
    bool on_boundary = false;
};

// Accumulated grid pass at one lambda: metric, second-derivative norms, and
// (optionally) inner products against a target field.
struct GeometryScan {
    int d = 0;
    MatD metric;
    MatD second_norm2;  // ||d_ij p_lambda||^2, symmetric
    VecD cross;         // <target - p_lambda, d_i p_lambda>
    double residual2 = 0.0;
};

namespace detail {
inline int pair_index(int i, int j, int d) {
    // upper-triangle (i <= j) flattened row-major
    if (i > j) std::swap(i, j);
    return i * d - i * (i - 1) / 2 + (j - i);
}
}  // namespace detail

// Transformation manifold M(p) of a reference pattern under a similarity-
// transform model, with all derived geometry realized by quadrature on the
// analytic atom derivatives.
class ManifoldGeometry {
public:
    ManifoldGeometry(TransformModel model, Pattern pattern, QuadratureSpec quad)
        : model_(std::move(model)), pattern_(std::move(pattern)), quad_(quad) {
        if (pattern_.empty()) throw std::invalid_argument("ManifoldGeometry: empty pattern");
        compiled_ = compile(pattern_);
        norm2_ = pattern_norm2(pattern_);
        if (!(norm2_ > 0.0)) throw std::invalid_argument("ManifoldGeometry: zero-norm pattern");
    }

    const TransformModel& model() const { return model_; }
    const Pattern& pattern() const { return pattern_; }
    const QuadratureSpec& quad() const { return quad_; }
    double pattern_norm2_cached() const { return norm2_; }
    int dim() const { return model_.dim(); }

    // d_i p_lambda as an evaluable field:
    //   d_i p_lambda(X) = grad p(X') . d_i X'.
    std::function<double(Vec2)> tangent(const ParamVector& lam, int axis) const {
        check_params(model_, lam);
        const CoordFrame frame(model_, lam);
        const auto atoms = compiled_;
        return [frame, atoms, axis](Vec2 x) {
            const PatternJet j = eval_jet(atoms, frame.map(x));
            return j.grad.dot(frame.derivs(x).first[static_cast<size_t>(axis)]);
        };
    }

    // d_ij p_lambda(X) = d_i X'^T H p(X') d_j X' + grad p(X') . d_ij X'.
    std::function<double(Vec2)> second_derivative(const ParamVector& lam, int i, int j) const {
        check_params(model_, lam);
        const CoordFrame frame(model_, lam);
        const auto atoms = compiled_;
        return [frame, atoms, i, j](Vec2 x) {
            const PatternJet jet = eval_jet(atoms, frame.map(x));
            const CoordDerivs cd = frame.derivs(x);
            const Vec2 di = cd.first[static_cast<size_t>(i)];
            const Vec2 dj = cd.first[static_cast<size_t>(j)];
            return quadratic_form(jet.hess, di, dj) +
                   jet.grad.dot(cd.second[static_cast<size_t>(i)][static_cast<size_t>(j)]);
        };
    }

    // One pass over the quadrature grid accumulating G, optionally the
    // second-derivative norms, and optionally inner products with a target.
    template <typename TargetFn>
    GeometryScan scan(const ParamVector& lam, bool need_second, const TargetFn* target) const {
        check_params(model_, lam);
        const CoordFrame frame(model_, lam);
        const int d = model_.dim();
        const int npairs = d * (d + 1) / 2;
        const int terms = npairs + (need_second ? npairs : 0) + (target ? d + 1 : 0);
        const int n = quad_.points_per_axis();
        const auto& atoms = compiled_;

        auto row = [&](int iy) {
            const double y = quad_.coord(iy);
            std::vector<double> acc(static_cast<size_t>(terms), 0.0);
            for (int ix = 0; ix < n; ++ix) {
                const Vec2 x(quad_.coord(ix), y);
                const PatternJet jet = eval_jet(atoms, frame.map(x));
                const CoordDerivs cd = frame.derivs(x);
                double t[kMaxDim];
                for (int i = 0; i < d; ++i) t[i] = jet.grad.dot(cd.first[static_cast<size_t>(i)]);
                int slot = 0;
                for (int i = 0; i < d; ++i)
                    for (int j = i; j < d; ++j) acc[static_cast<size_t>(slot++)] += t[i] * t[j];
                if (need_second) {
                    for (int i = 0; i < d; ++i) {
                        const Vec2 di = cd.first[static_cast<size_t>(i)];
                        for (int j = i; j < d; ++j) {
                            const Vec2 dj = cd.first[static_cast<size_t>(j)];
                            const double s =
                                quadratic_form(jet.hess, di, dj) +
                                jet.grad.dot(cd.second[static_cast<size_t>(i)][static_cast<size_t>(j)]);
                            acc[static_cast<size_t>(slot++)] += s * s;
                        }
                    }
                }
                if (target) {
                    const double r = (*target)(x)-jet.value;
                    for (int i = 0; i < d; ++i) acc[static_cast<size_t>(slot++)] += r * t[i];
                    acc[static_cast<size_t>(slot)] += r * r;
                }
            }
            return acc;
        };

        const auto sums = parallel_row_sums(n, terms, row);
        const double w = quad_.cell_area();

        GeometryScan out;
        out.d = d;
        out.metric = MatD(d);
        out.second_norm2 = MatD(d);
        out.cross = VecD(d);
        int slot = 0;
        for (int i = 0; i < d; ++i)
            for (int j = i; j < d; ++j) {
                out.metric(i, j) = out.metric(j, i) = sums[static_cast<size_t>(slot++)] * w;
            }
        if (need_second) {
            for (int i = 0; i < d; ++i)
                for (int j = i; j < d; ++j) {
                    out.second_norm2(i, j) = out.second_norm2(j, i) = sums[static_cast<size_t>(slot++)] * w;
                }
        }
        if (target) {
            for (int i = 0; i < d; ++i) out.cross[i] = sums[static_cast<size_t>(slot++)] * w;
            out.residual2 = sums[static_cast<size_t>(slot)] * w;
        }
        return out;
    }

    GeometryScan scan_plain(const ParamVector& lam, bool need_second) const {
        using Fn = std::function<double(Vec2)>;
        return scan<Fn>(lam, need_second, static_cast<const Fn*>(nullptr));
    }

    MetricInfo metric_from_scan(const GeometryScan& s) const { return finalize_metric(s.metric); }

    MetricInfo metric_tensor(const ParamVector& lam) const {
        return finalize_metric(scan_plain(lam, false).metric);
    }

    // Suprema over a lambda grid. Field norms are invariant to the translation
    // components (every integrand is a function of X - t), so translation axes
    // are pinned at the domain midpoint and only rotation/scale axes are swept.
    GeometryConstants estimate_constants(const GridSpec& grid) const {
        const int d = model_.dim();
        std::vector<ParamVector> samples = constant_sample_grid(grid);
        GeometryConstants c;
        double max_inv_eta = 0.0;
        for (const auto& lam : samples) {
            const GeometryScan s = scan_plain(lam, true);
            for (int i = 0; i < d; ++i) {
                c.tangent_sup = std::max(c.tangent_sup, std::sqrt(s.metric(i, i)));
                for (int j = i; j < d; ++j)
                    c.curvature = std::max(c.curvature, std::sqrt(s.second_norm2(i, j)));
            }
            const MetricInfo mi = finalize_metric(s.metric);
            c.c1 = std::max(c.c1, std::sqrt(mi.trace));
            max_inv_eta = std::max(max_inv_eta, 1.0 / mi.eta_min);
        }
        c.c2 = c.curvature * max_inv_eta;
        return c;
    }

    // Registration oracle: grid search over Lambda minimizing ||q - p_lambda||^2
    // through closed-form inner products, then cyclic coordinate descent with
    // shrinking step (factor 0.5, floor 1e-7; the last decade buys the <= 1e-6
    // residual-distance contract on noiseless targets). Deterministic:
    // lexicographic grid order and strict improvements only.
    ProjectionResult project_bruteforce(const Pattern& q, const GridSpec& grid) const {
        const int d = model_.dim();
        const double qq = pattern_norm2(q);
        auto objective = [&](const ParamVector& lam) {
            const Pattern plam = apply_to_pattern(model_, lam, pattern_);
            return qq + transformed_norm2(model_, lam, norm2_) - 2.0 * pattern_inner_product(q, plam);
        };

        const int npts = std::max(2, grid.points_per_axis);
        ParamVector best = model_.identity_params();
        double best_obj = std::numeric_limits<double>::infinity();
        std::array<int, kMaxDim> idx{};
        const auto axis_value = [&](int axis, int k) {
            const auto& iv = model_.domain[static_cast<size_t>(axis)];
            return iv.lo + iv.width() * static_cast<double>(k) / static_cast<double>(npts - 1);
        };
        bool done = false;
        while (!done) {
            ParamVector lam(d);
            for (int i = 0; i < d; ++i) lam[i] = axis_value(i, idx[static_cast<size_t>(i)]);
            const double obj = objective(lam);
            if (obj < best_obj) {
                best_obj = obj;
                best = lam;
            }
            int ax = d - 1;
            while (ax >= 0) {
                if (++idx[static_cast<size_t>(ax)] < npts) break;
                idx[static_cast<size_t>(ax)] = 0;
                --ax;
            }
            done = (ax < 0);
        }

        // coordinate-descent refinement, clamped to Lambda
        double step = 0.5 * model_.domain[0].width() / static_cast<double>(npts - 1);
        for (int i = 1; i < d; ++i)
            step = std::max(step, 0.5 * model_.domain[static_cast<size_t>(i)].width() / static_cast<double>(npts - 1));
        while (step >= 1e-7) {
            bool improved = false;
            for (int ax = 0; ax < d; ++ax) {
                const auto& iv = model_.domain[static_cast<size_t>(ax)];
                for (;;) {
                    bool moved = false;
                    for (const double dir : {+1.0, -1.0}) {
                        ParamVector cand = best;
                        cand[ax] = std::clamp(cand[ax] + dir * step, iv.lo, iv.hi);
                        if (cand[ax] == best[ax]) continue;
                        const double obj = objective(cand);
                        if (obj < best_obj) {
                            best_obj = obj;
                            best = cand;
                            moved = true;
                            improved = true;
                            break;
                        }
                    }
                    if (!moved) break;
                }
            }
            if (!improved) step *= 0.5;
        }

        ProjectionResult r;
        r.lambda = best;
        r.distance = std::sqrt(std::max(0.0, best_obj));
        r.on_boundary = model_.on_domain_boundary(best, 1e-7);
        return r;
    }

private:
    MetricInfo finalize_metric(const MatD& g) const {
        MetricInfo mi;
        mi.g = g;
        mi.trace = g.trace();
        const SymEigen eig = sym_eigen(g);
        mi.eta_min = eig.values[0];
        if (!(mi.eta_min > 1e-10 * mi.trace))
            throw RankDeficientError("metric tensor is rank deficient (min eigenvalue " +
                                     std::to_string(mi.eta_min) + ")");
        mi.g_inv = sym_inverse(g, eig);
        return mi;
    }

    std::vector<ParamVector> constant_sample_grid(const GridSpec& grid) const {
        const int d = model_.dim();
        std::vector<int> sweep_axes;
        if (model_.has_rotation()) sweep_axes.push_back(model_.axis_theta());
        if (model_.has_scale()) sweep_axes.push_back(model_.axis_s());
        ParamVector base(d);
        for (int i = 0; i < d; ++i) {
            const auto& iv = model_.domain[static_cast<size_t>(i)];
            base[i] = 0.5 * (iv.lo + iv.hi);
        }
        std::vector<ParamVector> samples;
        if (sweep_axes.empty()) {
            samples.push_back(base);
            return samples;
        }
        const int npts = std::max(2, grid.points_per_axis);
        std::vector<int> idx(sweep_axes.size(), 0);
        for (;;) {
            ParamVector lam = base;
            for (size_t a = 0; a < sweep_axes.size(); ++a) {
                const auto& iv = model_.domain[static_cast<size_t>(sweep_axes[a])];
                lam[sweep_axes[a]] = iv.lo + iv.width() * static_cast<double>(idx[a]) /
                                                 static_cast<double>(npts - 1);
            }
            samples.push_back(lam);
            size_t a = 0;
            while (a < idx.size() && ++idx[a] == npts) idx[a++] = 0;
            if (a == idx.size()) break;
        }
        return samples;
    }

    TransformModel model_;
    Pattern pattern_;
    QuadratureSpec quad_;
    std::vector<CompiledAtom> compiled_;
    double norm2_ = 0.0;
};

// Geometry of the smoothed manifold M(p_hat) at filter size rho, with the
// quadrature window widened to carry the smoothed supports.
inline ManifoldGeometry geometry_at(const TransformModel& model, const Pattern& p, double rho,
                                    const QuadratureSpec& quad) {
    if (rho == 0.0) return ManifoldGeometry(model, p, quad);
    return ManifoldGeometry(model, smooth_pattern(p, FilterKernel(rho)), quad.for_rho(rho));
}

// Rescales the rotation/scale gains so the tangent norms along theta_bar and
// s_bar match the t_x tangent norm at the identity (rel. 1e-3). The norms are
// linear in the gains, so the fixed-point iteration settles immediately.
inline TransformModel calibrate_gains(const TransformModel& model, const Pattern& p,
                                      const QuadratureSpec& quad) {
    if (!model.has_rotation() && !model.has_scale()) return model;
    TransformModel m = model;
    for (int iter = 0; iter < 8; ++iter) {
        const ManifoldGeometry g(m, p, quad);
        const GeometryScan s = g.scan_plain(m.identity_params(), false);
        const double ref = std::sqrt(s.metric(m.axis_tx(), m.axis_tx()));
        if (!(ref > 0.0)) throw CalibrationError("calibrate_gains: zero translation tangent norm");
        double worst = 0.0;
        if (m.has_rotation()) {
            const double nt = std::sqrt(s.metric(m.axis_theta(), m.axis_theta()));
            if (!(nt > 0.0)) throw CalibrationError("calibrate_gains: zero rotation tangent norm");
            worst = std::max(worst, std::abs(nt / ref - 1.0));
            m.rotation_gain *= ref / nt;
        }
        if (m.has_scale()) {
            const double ns = std::sqrt(s.metric(m.axis_s(), m.axis_s()));
            if (!(ns > 0.0)) throw CalibrationError("calibrate_gains: zero scale tangent norm");
            worst = std::max(worst, std::abs(ns / ref - 1.0));
            m.scale_gain *= ref / ns;
        }
        if (worst <= 1e-3) return m;
    }
    return m;
}

}  // namespace tdreg
