#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "tdreg/bounds.hpp"
#include "tdreg/manifold.hpp"
#include "tdreg/registration.hpp"

namespace tdreg {

struct IllPosedBankError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// M class-representative patterns sharing one transformation model and domain.
// Per-class unfiltered geometry constants (T_m, K_m, metric suprema) are fixed
// at construction.
struct ClassBank {
    struct Entry {
        int label = 0;
        Pattern pattern;
        GeometryConstants constants;  // at rho = 0
    };
    TransformModel model;
    QuadratureSpec quad;
    std::vector<Entry> classes;

    int size() const { return static_cast<int>(classes.size()); }
    const Entry& by_index(int i) const { return classes[static_cast<size_t>(i)]; }
};

inline ClassBank make_class_bank(const TransformModel& model, const QuadratureSpec& quad,
                                 const std::vector<std::pair<int, Pattern>>& classes,
                                 const GridSpec& grid) {
    if (classes.size() < 2) throw std::invalid_argument("ClassBank: need at least 2 classes");
    ClassBank bank;
    bank.model = model;
    bank.quad = quad;
    for (const auto& [label, pat] : classes) {
        for (const auto& e : bank.classes)
            if (e.label == label) throw std::invalid_argument("ClassBank: duplicate label");
        ClassBank::Entry e;
        e.label = label;
        e.pattern = pat;
        e.constants = ManifoldGeometry(model, pat, quad).estimate_constants(grid);
        bank.classes.push_back(std::move(e));
    }
    return bank;
}

// One tangent step per class on the rho-smoothed patterns, then distances
// compared on the unfiltered patterns; argmin label, ties to the lowest class
// index. Classes whose step fails are excluded with a recorded reason.
struct ClassifyOutcome {
    int label = 0;
    int label_index = 0;
    std::vector<double> distances;          // unfiltered ||q - p^m_{lambda_e^m}||; NaN if excluded
    std::vector<ParamVector> estimates;     // lambda_e^m per class
    std::vector<std::string> exclusions;    // empty string when the class participated
};

inline ClassifyOutcome classify_query(const ClassBank& bank, const Pattern& q, double rho,
                                      const std::vector<ParamVector>& lam_r) {
    const int m = bank.size();
    if (static_cast<int>(lam_r.size()) != m)
        throw std::invalid_argument("classify_query: need one reference vector per class");
    ClassifyOutcome out;
    out.distances.assign(static_cast<size_t>(m), std::numeric_limits<double>::quiet_NaN());
    out.estimates.assign(static_cast<size_t>(m), ParamVector(bank.model.dim()));
    out.exclusions.assign(static_cast<size_t>(m), "");
    const Pattern q_hat = smooth_pattern(q, FilterKernel(rho));
    int best = -1;
    for (int i = 0; i < m; ++i) {
        const auto& entry = bank.by_index(i);
        try {
            const ManifoldGeometry g = geometry_at(bank.model, entry.pattern, rho, bank.quad);
            const StepResult step = tangent_step(g, q_hat, lam_r[static_cast<size_t>(i)]);
            out.estimates[static_cast<size_t>(i)] = step.lambda;
            out.distances[static_cast<size_t>(i)] =
                pattern_l2_distance(q, apply_to_pattern(bank.model, step.lambda, entry.pattern));
            if (best < 0 || out.distances[static_cast<size_t>(i)] < out.distances[static_cast<size_t>(best)])
                best = i;
        } catch (const std::exception& e) {
            out.exclusions[static_cast<size_t>(i)] = e.what();
        }
    }
    if (best < 0) throw IllPosedBankError("classify_query: every class was excluded");
    out.label_index = best;
    out.label = bank.by_index(best).label;
    return out;
}

// True class label: argmin over exact manifold distances (projection oracle),
// ties to the lowest class index.
struct TrueLabelResult {
    int label = 0;
    int label_index = 0;
    std::vector<ProjectionResult> projections;
};

inline TrueLabelResult true_label(const ClassBank& bank, const Pattern& q, const GridSpec& grid) {
    TrueLabelResult r;
    int best = -1;
    for (int i = 0; i < bank.size(); ++i) {
        const ManifoldGeometry g(bank.model, bank.by_index(i).pattern, bank.quad);
        r.projections.push_back(g.project_bruteforce(q, grid));
        if (best < 0 || r.projections.back().distance < r.projections[static_cast<size_t>(best)].distance)
            best = i;
    }
    r.label_index = best;
    r.label = bank.by_index(best).label;
    return r;
}

// Misclassification-likeliness functional for the true class m:
//   T_m K_hat_m eta_min^-1(G_hat^m) ( 1/2 sqrt(tr G_hat^m) ||lhat_o - l_r||_1^2
//                                     + sqrt(d) ||n_o~_m|| ||lhat_o - l_r||_1 )
// with T_m unfiltered and the remaining quantities on the rho-smoothed manifold.
inline double likeliness_formula(double tangent_sup_unfiltered, double curvature_filtered,
                                 const MetricInfo& metric_filtered, const VecD& delta_hat,
                                 double filtered_noise, int d) {
    const double l1 = delta_hat.norm1();
    return tangent_sup_unfiltered * curvature_filtered / metric_filtered.eta_min *
           (0.5 * std::sqrt(metric_filtered.trace) * l1 * l1 +
            std::sqrt(static_cast<double>(d)) * filtered_noise * l1);
}

struct LikelinessReport {
    double value = 0.0;
    int true_label = 0;
    int true_label_index = 0;
    ParamVector lambda_hat_o;
    double filtered_noise = 0.0;
};

inline LikelinessReport misclassification_likeliness(const ClassBank& bank, const Pattern& q,
                                                     double rho, const ParamVector& lam_r,
                                                     const GridSpec& grid) {
    LikelinessReport rep;
    const TrueLabelResult tl = true_label(bank, q, grid);
    rep.true_label = tl.label;
    rep.true_label_index = tl.label_index;
    const auto& entry = bank.by_index(tl.label_index);
    const ManifoldGeometry g_hat = geometry_at(bank.model, entry.pattern, rho, bank.quad);
    const ProjectionResult proj = g_hat.project_bruteforce(smooth_pattern(q, FilterKernel(rho)), grid);
    rep.lambda_hat_o = proj.lambda;
    rep.filtered_noise = proj.distance;
    const GeometryConstants c_hat = g_hat.estimate_constants(grid);
    const MetricInfo mi = g_hat.metric_tensor(lam_r);
    rep.value = likeliness_formula(entry.constants.tangent_sup, c_hat.curvature, mi,
                                   proj.lambda - lam_r, proj.distance, bank.model.dim());
    return rep;
}

// Empirical class statistics over a labeled sample set.
struct LabeledQuery {
    Pattern q;
    int claimed_label = 0;
};

struct ClassStats {
    double epsilon = 0.0;              // distance margin
    std::vector<double> v_max;         // per-class max own-manifold distance
    double delta = 0.0;                // l1 radius of Lambda around lambda_r
    bool ill_posed = false;            // epsilon <= 0
    std::vector<int> violations;       // sample indices breaking nu_m < nu_j
};

inline double domain_l1_radius(const TransformModel& m, const ParamVector& lam_r) {
    double r = 0.0;
    for (int i = 0; i < m.dim(); ++i) {
        const auto& iv = m.domain[static_cast<size_t>(i)];
        r += std::max(std::abs(iv.hi - lam_r[i]), std::abs(lam_r[i] - iv.lo));
    }
    return r;
}

inline ClassStats estimate_class_stats(const ClassBank& bank, const std::vector<LabeledQuery>& samples,
                                       const GridSpec& grid) {
    const int m = bank.size();
    ClassStats st;
    st.v_max.assign(static_cast<size_t>(m), 0.0);
    st.delta = domain_l1_radius(bank.model, bank.model.identity_params());
    double eps = std::numeric_limits<double>::infinity();
    for (size_t si = 0; si < samples.size(); ++si) {
        const auto& s = samples[si];
        int own = -1;
        for (int i = 0; i < bank.size(); ++i)
            if (bank.by_index(i).label == s.claimed_label) own = i;
        if (own < 0) throw std::invalid_argument("estimate_class_stats: unknown claimed label");
        std::vector<double> dist(static_cast<size_t>(m));
        for (int i = 0; i < m; ++i) {
            const ManifoldGeometry g(bank.model, bank.by_index(i).pattern, bank.quad);
            dist[static_cast<size_t>(i)] = g.project_bruteforce(s.q, grid).distance;
        }
        const double nu_own = dist[static_cast<size_t>(own)];
        st.v_max[static_cast<size_t>(own)] = std::max(st.v_max[static_cast<size_t>(own)], nu_own);
        for (int j = 0; j < m; ++j) {
            if (j == own) continue;
            eps = std::min(eps, dist[static_cast<size_t>(j)] - nu_own);
            if (nu_own >= dist[static_cast<size_t>(j)]) {
                st.violations.push_back(static_cast<int>(si));
                break;
            }
        }
    }
    st.epsilon = samples.empty() ? 0.0 : eps;
    st.ill_posed = !(st.epsilon > 0.0);
    return st;
}

// Theorem-5 misclassification probability bound for class m:
//   ((M-1)/eps) T_m sqrt(d) K_m eta_min^-1(G^m(l_r))
//       ( 1/2 sqrt(tr G^m) Delta^2 + sqrt(d) V_m Delta ).
// Values above 1 are valid but vacuous and flagged.
struct MisclassificationBound {
    double value = 0.0;
    bool vacuous = false;
};

inline MisclassificationBound misclassification_bound(const ClassBank& bank, const ClassStats& stats,
                                                      int class_index, const ParamVector& lam_r) {
    if (!(stats.epsilon > 0.0)) throw IllPosedBankError("misclassification_bound: epsilon = 0");
    const auto& entry = bank.by_index(class_index);
    const ManifoldGeometry g(bank.model, entry.pattern, bank.quad);
    const MetricInfo mi = g.metric_tensor(lam_r);
    const double d = bank.model.dim();
    const double delta = stats.delta;
    const double vm = stats.v_max[static_cast<size_t>(class_index)];
    MisclassificationBound b;
    b.value = (static_cast<double>(bank.size() - 1) / stats.epsilon) * entry.constants.tangent_sup *
              std::sqrt(d) * entry.constants.curvature / mi.eta_min *
              (0.5 * std::sqrt(mi.trace) * delta * delta + std::sqrt(d) * vm * delta);
    b.vacuous = b.value > 1.0;
    return b;
}

}  // namespace tdreg
