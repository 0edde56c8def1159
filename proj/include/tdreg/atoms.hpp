#pragma once

#include <cmath>
#include <stdexcept>
#include <utility>
#include <vector>

#include "tdreg/linalg.hpp"
#include "tdreg/quadrature.hpp"

namespace tdreg {

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kMinAtomScale = 1e-6;

struct DegenerateGeometryError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline double normalize_angle(double a) {
    a = std::fmod(a + kPi, 2.0 * kPi);
    if (a < 0.0) a += 2.0 * kPi;
    return a - kPi;
}

// One rotated, translated, anisotropically scaled copy of the Gaussian mother
// function phi(X) = exp(-X^T X):
//
//   phi_gamma(X) = phi(sigma^-1 Psi^-1 (X - tau)),   gamma = (psi, tau, sigma).
struct AtomParams {
    double psi = 0.0;   // rotation angle, kept in [-pi, pi)
    Vec2 tau;           // center
    Vec2 sigma{1.0, 1.0};  // anisotropic scales, > 0

    AtomParams() = default;
    AtomParams(double psi_, Vec2 tau_, Vec2 sigma_) : psi(normalize_angle(psi_)), tau(tau_), sigma(sigma_) {
        if (!(sigma.x >= kMinAtomScale) || !(sigma.y >= kMinAtomScale))
            throw std::invalid_argument("AtomParams: sigma below minimum scale");
    }

    Mat2 rotation() const { return Mat2::rotation(psi); }

    // Theta = Psi sigma^-2 Psi^-1, the (symmetric) precision matrix of the atom.
    Mat2 theta() const {
        const Mat2 r = rotation();
        return r * Mat2::diag(1.0 / (sigma.x * sigma.x), 1.0 / (sigma.y * sigma.y)) * r.transpose();
    }

    // Psi sigma^2 Psi^-1, the covariance-form matrix.
    Mat2 covariance_form() const {
        const Mat2 r = rotation();
        return r * Mat2::diag(sigma.x * sigma.x, sigma.y * sigma.y) * r.transpose();
    }

    double abs_sigma() const { return sigma.x * sigma.y; }  // |sigma|
    double theta_max_eig() const {
        const double s = std::min(sigma.x, sigma.y);
        return 1.0 / (s * s);
    }
};

struct WeightedAtom {
    double coeff = 0.0;
    AtomParams params;
};

// Finite weighted atom list representing a pattern in L2(R^2):
//   p(X) = sum_k c_k phi_{gamma_k}(X).
// Atom order is part of the value; construction order is preserved so that
// serialization round-trips bit-exactly.
struct Pattern {
    std::vector<WeightedAtom> atoms;

    Pattern() = default;
    explicit Pattern(std::vector<WeightedAtom> a) : atoms(std::move(a)) {
        for (const auto& wa : atoms)
            if (!std::isfinite(wa.coeff)) throw std::invalid_argument("Pattern: non-finite coefficient");
    }

    bool empty() const { return atoms.empty(); }
    size_t size() const { return atoms.size(); }

    Pattern& append(const Pattern& other) {
        atoms.insert(atoms.end(), other.atoms.begin(), other.atoms.end());
        return *this;
    }
    Pattern scaled(double s) const {
        Pattern r = *this;
        for (auto& wa : r.atoms) wa.coeff *= s;
        return r;
    }
    Pattern operator-() const { return scaled(-1.0); }
};

// Unit-L1-norm Gaussian low-pass kernel of radius rho; rho = 0 is the identity.
struct FilterKernel {
    double rho = 0.0;

    FilterKernel() = default;
    explicit FilterKernel(double rho_) : rho(rho_) {
        if (!(rho >= 0.0)) throw std::invalid_argument("FilterKernel: rho must be >= 0");
    }
};

// Per-atom cache of the quantities the evaluation loops need.
struct CompiledAtom {
    double coeff;
    Vec2 tau;
    Mat2 theta;
};

inline std::vector<CompiledAtom> compile(const Pattern& p) {
    std::vector<CompiledAtom> out;
    out.reserve(p.atoms.size());
    for (const auto& wa : p.atoms) out.push_back({wa.coeff, wa.params.tau, wa.params.theta()});
    return out;
}

// Value, gradient and Hessian of the compiled atom sum at X, sharing one
// exponential per atom:
//   grad phi = -2 phi Theta u,  H(phi) = phi (4 Theta u u^T Theta - 2 Theta),  u = X - tau.
struct PatternJet {
    double value = 0.0;
    Vec2 grad;
    Mat2 hess;
};

inline double eval_compiled(const std::vector<CompiledAtom>& atoms, Vec2 x) {
    double s = 0.0;
    for (const auto& a : atoms) {
        const Vec2 u = x - a.tau;
        const Vec2 tu = a.theta * u;
        s += a.coeff * std::exp(-u.dot(tu));
    }
    return s;
}

inline PatternJet eval_jet(const std::vector<CompiledAtom>& atoms, Vec2 x) {
    PatternJet j;
    for (const auto& a : atoms) {
        const Vec2 u = x - a.tau;
        const Vec2 tu = a.theta * u;
        const double phi = a.coeff * std::exp(-u.dot(tu));
        j.value += phi;
        j.grad.x += -2.0 * phi * tu.x;
        j.grad.y += -2.0 * phi * tu.y;
        j.hess.a += phi * (4.0 * tu.x * tu.x - 2.0 * a.theta.a);
        j.hess.b += phi * (4.0 * tu.x * tu.y - 2.0 * a.theta.b);
        j.hess.d += phi * (4.0 * tu.y * tu.y - 2.0 * a.theta.d);
    }
    j.hess.c = j.hess.b;
    return j;
}

inline double eval_pattern(const Pattern& p, Vec2 x) { return eval_compiled(compile(p), x); }

inline Vec2 eval_gradient(const Pattern& p, Vec2 x) { return eval_jet(compile(p), x).grad; }

inline Mat2 eval_hessian(const Pattern& p, Vec2 x) { return eval_jet(compile(p), x).hess; }

// Gaussian convolution in closed form: smoothing with the unit-L1 kernel keeps
// tau and Psi, maps sigma to sqrt(sigma^2 + rho^2) per axis, and rescales the
// coefficient by |sigma| / |sigma_hat|.
inline AtomParams smooth_atom_params(const AtomParams& a, double rho) {
    return AtomParams(a.psi, a.tau,
                      Vec2(std::sqrt(a.sigma.x * a.sigma.x + rho * rho),
                           std::sqrt(a.sigma.y * a.sigma.y + rho * rho)));
}

inline Pattern smooth_pattern(const Pattern& p, const FilterKernel& k) {
    if (k.rho == 0.0) return p;
    Pattern out;
    out.atoms.reserve(p.atoms.size());
    for (const auto& wa : p.atoms) {
        const AtomParams sp = smooth_atom_params(wa.params, k.rho);
        const double scale = wa.params.abs_sigma() / sp.abs_sigma();
        out.atoms.push_back({wa.coeff * scale, sp});
    }
    return out;
}

// integral of phi_a phi_b over R^2 = Q_ab / 2, with
//   Q_ab = pi |sigma_a sigma_b| / sqrt(|S|) * exp(-1/2 (tau_b - tau_a)^T S^-1 (tau_b - tau_a)),
//   S = 1/2 (Psi_a sigma_a^2 Psi_a^-1 + Psi_b sigma_b^2 Psi_b^-1).
inline double atom_q_term(const AtomParams& a, const AtomParams& b) {
    const Mat2 s = (a.covariance_form() + b.covariance_form()) * 0.5;
    const auto eig = s.sym_eigenvalues();
    if (!(eig[0] > 0.0) || eig[1] / eig[0] > 1e12)
        throw DegenerateGeometryError("atom product: near-singular pair covariance");
    const Vec2 dt = b.tau - a.tau;
    const Mat2 sinv = s.inverse();
    const double expo = -0.5 * quadratic_form(sinv, dt, dt);
    return kPi * a.abs_sigma() * b.abs_sigma() / std::sqrt(s.det()) * std::exp(expo);
}

inline double atom_product_integral(const AtomParams& a, const AtomParams& b) {
    return 0.5 * atom_q_term(a, b);
}

// Bilinear extension of the product integral over the atom lists.
inline double pattern_inner_product(const Pattern& p, const Pattern& q) {
    double s = 0.0;
    for (const auto& wa : p.atoms)
        for (const auto& wb : q.atoms)
            s += wa.coeff * wb.coeff * atom_product_integral(wa.params, wb.params);
    return s;
}

inline double pattern_norm2(const Pattern& p) {
    double s = 0.0;
    const size_t n = p.atoms.size();
    for (size_t j = 0; j < n; ++j) {
        const auto& wa = p.atoms[j];
        s += wa.coeff * wa.coeff * atom_product_integral(wa.params, wa.params);
        for (size_t k = j + 1; k < n; ++k) {
            const auto& wb = p.atoms[k];
            s += 2.0 * wa.coeff * wb.coeff * atom_product_integral(wa.params, wb.params);
        }
    }
    return std::max(0.0, s);
}

inline double pattern_norm(const Pattern& p) { return std::sqrt(pattern_norm2(p)); }

inline double pattern_l2_distance(const Pattern& p, const Pattern& q) {
    Pattern diff = p;
    diff.append(q.scaled(-1.0));
    return pattern_norm(diff);
}

// L2 norms of the pattern's gradient magnitude and vectorized-Hessian magnitude,
//   ||N_grad p|| = (int ||grad p||^2)^(1/2),
//   ||N_hess p|| = (int (pxx^2 + 2 pxy^2 + pyy^2))^(1/2),
// computed by quadrature on the analytic derivatives. The window must carry the
// integrand: a border-ring mass above the spec tolerance raises WindowTooSmallError.
struct DerivativeNorms {
    double grad_norm = 0.0;
    double hess_norm = 0.0;
};

inline DerivativeNorms derivative_norms(const Pattern& p, const QuadratureSpec& quad) {
    const auto atoms = compile(p);
    const int n = quad.points_per_axis();
    auto row = [&](int iy) {
        const double y = quad.coord(iy);
        std::vector<double> acc(4, 0.0);  // grad^2, hess^2, |mass|, border |mass|
        const bool border_row = (iy == 0 || iy == n - 1);
        for (int ix = 0; ix < n; ++ix) {
            const PatternJet j = eval_jet(atoms, Vec2(quad.coord(ix), y));
            const double g2 = j.grad.norm2();
            const double h2 = j.hess.a * j.hess.a + 2.0 * j.hess.b * j.hess.b + j.hess.d * j.hess.d;
            acc[0] += g2;
            acc[1] += h2;
            acc[2] += g2 + h2;
            if (border_row || ix == 0 || ix == n - 1) acc[3] += g2 + h2;
        }
        return acc;
    };
    const auto sums = parallel_row_sums(n, 4, row);
    if (sums[2] > 0.0 && sums[3] > quad.boundary_tol * sums[2])
        throw WindowTooSmallError("derivative_norms: window too small for pattern support");
    return {std::sqrt(sums[0] * quad.cell_area()), std::sqrt(sums[1] * quad.cell_area())};
}

// Closed-form upper-bound terms for the gradient/Hessian norm sums over atom
// pairs. With theta_j = eta_max(Theta_j) and |sigma_j| = sigma_xj sigma_yj:
//   Lbar_jk = pi/8 th_j th_k sqrt(|sigma_j sigma_k| (sx_j^2+sy_j^2)(sx_k^2+sy_k^2))
//   Mbar_j  = pi |sigma_j| (3/32 sx_j^4 + 1/16 sx_j^2 sy_j^2 + 3/32 sy_j^4)
//   Mbar_jk = th_j^2 th_k^2 sqrt(Mbar_j Mbar_k)
//   Nbar_jk = sqrt(pi |sigma_k| / 2) th_j^2 th_k sqrt(Mbar_j)
//   Pbar_jk = th_j th_k Q_jk
struct RateTerms {
    double q_jk = 0.0;
    double lbar_jk = 0.0;
    double mbar_jk = 0.0;
    double nbar_jk = 0.0;
    double pbar_jk = 0.0;
};

inline double mbar_single(const AtomParams& a) {
    const double sx2 = a.sigma.x * a.sigma.x, sy2 = a.sigma.y * a.sigma.y;
    return kPi * a.abs_sigma() * (3.0 / 32.0 * sx2 * sx2 + 1.0 / 16.0 * sx2 * sy2 + 3.0 / 32.0 * sy2 * sy2);
}

inline RateTerms appendix_rate_terms(const AtomParams& a, const AtomParams& b) {
    RateTerms t;
    const double tha = a.theta_max_eig(), thb = b.theta_max_eig();
    const double sxa2 = a.sigma.x * a.sigma.x, sya2 = a.sigma.y * a.sigma.y;
    const double sxb2 = b.sigma.x * b.sigma.x, syb2 = b.sigma.y * b.sigma.y;
    t.q_jk = atom_q_term(a, b);
    t.lbar_jk = kPi / 8.0 * tha * thb *
                std::sqrt(a.abs_sigma() * b.abs_sigma() * (sxa2 + sya2) * (sxb2 + syb2));
    const double ma = mbar_single(a), mb = mbar_single(b);
    t.mbar_jk = tha * tha * thb * thb * std::sqrt(ma * mb);
    t.nbar_jk = std::sqrt(kPi * b.abs_sigma() / 2.0) * tha * tha * thb * std::sqrt(ma);
    t.pbar_jk = tha * thb * t.q_jk;
    return t;
}

}  // namespace tdreg
