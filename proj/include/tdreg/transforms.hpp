#pragma once

#include <array>
#include <cmath>
#include <stdexcept>
#include <string>

#include "tdreg/atoms.hpp"
#include "tdreg/linalg.hpp"

namespace tdreg {

enum class TransformKind { Translation2D, TransRot3D, TransRotScale4D };

inline int transform_dim(TransformKind k) {
    switch (k) {
        case TransformKind::Translation2D: return 2;
        case TransformKind::TransRot3D: return 3;
        case TransformKind::TransRotScale4D: return 4;
    }
    throw std::invalid_argument("transform_dim: bad kind");
}

inline std::string transform_kind_name(TransformKind k) {
    switch (k) {
        case TransformKind::Translation2D: return "Translation2D";
        case TransformKind::TransRot3D: return "TransRot3D";
        case TransformKind::TransRotScale4D: return "TransRotScale4D";
    }
    return "?";
}

inline TransformKind transform_kind_from_name(const std::string& s) {
    if (s == "Translation2D") return TransformKind::Translation2D;
    if (s == "TransRot3D") return TransformKind::TransRot3D;
    if (s == "TransRotScale4D") return TransformKind::TransRotScale4D;
    throw std::invalid_argument("unknown transform kind: " + s);
}

struct Interval {
    double lo = 0.0;
    double hi = 0.0;
    bool contains(double v) const { return v >= lo && v <= hi; }
    double width() const { return hi - lo; }
};

using ParamVector = VecD;

// Parametric similarity-transform models over lambda in a compact domain:
//   a(lambda, X) = s^-1 R(theta)^-1 (X - t),
//   theta = c_theta * theta_bar,  s = exp(c_s * (s_bar - 1)).
// Axis order follows the manifold parameterization: (theta_bar,) t_x, t_y (, s_bar).
// The gains map the normalized rotation/scale parameters to actual angle and
// log-scale; see calibrate_gains in manifold.hpp for the principled setting.
struct TransformModel {
    TransformKind kind = TransformKind::Translation2D;
    double rotation_gain = 0.1 * kPi;
    double scale_gain = 0.2;
    std::array<Interval, kMaxDim> domain{};

    TransformModel() { set_default_domain(); }
    explicit TransformModel(TransformKind k, double rot_gain = 0.1 * kPi, double sc_gain = 0.2)
        : kind(k), rotation_gain(rot_gain), scale_gain(sc_gain) {
        if (!(rotation_gain > 0.0) || !(scale_gain > 0.0))
            throw std::invalid_argument("TransformModel: gains must be positive");
        set_default_domain();
    }

    int dim() const { return transform_dim(kind); }
    bool has_rotation() const { return kind != TransformKind::Translation2D; }
    bool has_scale() const { return kind == TransformKind::TransRotScale4D; }

    int axis_theta() const { return 0; }
    int axis_tx() const { return has_rotation() ? 1 : 0; }
    int axis_ty() const { return has_rotation() ? 2 : 1; }
    int axis_s() const { return 3; }

    void set_default_domain() {
        const int d = dim();
        for (int i = 0; i < d; ++i) domain[static_cast<size_t>(i)] = {-0.5, 0.5};
        if (has_scale()) domain[static_cast<size_t>(axis_s())] = {0.4, 1.6};
    }

    ParamVector identity_params() const {
        ParamVector lam(dim());
        if (has_scale()) lam[axis_s()] = 1.0;
        return lam;
    }

    bool in_domain(const ParamVector& lam) const {
        for (int i = 0; i < dim(); ++i)
            if (!domain[static_cast<size_t>(i)].contains(lam[i])) return false;
        return true;
    }

    bool on_domain_boundary(const ParamVector& lam, double tol = 1e-9) const {
        for (int i = 0; i < dim(); ++i) {
            const auto& iv = domain[static_cast<size_t>(i)];
            if (std::abs(lam[i] - iv.lo) <= tol || std::abs(lam[i] - iv.hi) <= tol) return true;
        }
        return false;
    }

    double angle(const ParamVector& lam) const {
        return has_rotation() ? rotation_gain * lam[axis_theta()] : 0.0;
    }
    double scale(const ParamVector& lam) const {
        return has_scale() ? std::exp(scale_gain * (lam[axis_s()] - 1.0)) : 1.0;
    }
    Vec2 translation(const ParamVector& lam) const { return {lam[axis_tx()], lam[axis_ty()]}; }
};

inline void check_params(const TransformModel& m, const ParamVector& lam) {
    if (lam.n != m.dim() || !lam.finite())
        throw std::invalid_argument("ParamVector: wrong dimension or non-finite entries");
}

inline Vec2 coord_map(const TransformModel& m, const ParamVector& lam, Vec2 x) {
    check_params(m, lam);
    const Mat2 minv = Mat2::rotation(-m.angle(lam));
    return (minv * (x - m.translation(lam))) * (1.0 / m.scale(lam));
}

// Coordinate-change derivatives d a(lambda, X) / d lambda^i and the second
// derivatives, per axis of the model. With u = X - t, M = R(-theta):
//   d/d theta_bar = c_th s^-1 M J u        d/d t_* = -s^-1 M e_*
//   d/d s_bar     = -c_s s^-1 M u          (J = [[0,1],[-1,0]])
struct CoordDerivs {
    int d = 0;
    std::array<Vec2, kMaxDim> first{};
    std::array<std::array<Vec2, kMaxDim>, kMaxDim> second{};
};

// Per-lambda factors reused across grid points.
struct CoordFrame {
    int d = 0;
    double s_inv = 1.0;
    double c_theta = 0.0, c_s = 0.0;
    bool rot = false, sc = false;
    int ax_th = 0, ax_tx = 0, ax_ty = 0, ax_s = 0;
    Vec2 t;
    Mat2 minv;  // R(-theta)

    explicit CoordFrame(const TransformModel& m, const ParamVector& lam) {
        check_params(m, lam);
        d = m.dim();
        rot = m.has_rotation();
        sc = m.has_scale();
        c_theta = m.rotation_gain;
        c_s = m.scale_gain;
        ax_th = m.axis_theta();
        ax_tx = m.axis_tx();
        ax_ty = m.axis_ty();
        ax_s = m.axis_s();
        t = m.translation(lam);
        s_inv = 1.0 / m.scale(lam);
        minv = Mat2::rotation(-m.angle(lam));
    }

    Vec2 map(Vec2 x) const { return (minv * (x - t)) * s_inv; }

    CoordDerivs derivs(Vec2 x) const {
        CoordDerivs cd;
        cd.d = d;
        const Vec2 u = x - t;
        const Vec2 mju = minv * Vec2(u.y, -u.x);  // M J u
        const Vec2 mu = minv * u;
        const Vec2 mex{minv.a, minv.c};  // M e_x
        const Vec2 mey{minv.b, minv.d};  // M e_y

        cd.first[static_cast<size_t>(ax_tx)] = mex * (-s_inv);
        cd.first[static_cast<size_t>(ax_ty)] = mey * (-s_inv);
        if (rot) cd.first[static_cast<size_t>(ax_th)] = mju * (c_theta * s_inv);
        if (sc) cd.first[static_cast<size_t>(ax_s)] = mu * (-c_s * s_inv);

        auto set2 = [&](int i, int j, Vec2 v) {
            cd.second[static_cast<size_t>(i)][static_cast<size_t>(j)] = v;
            cd.second[static_cast<size_t>(j)][static_cast<size_t>(i)] = v;
        };
        // translation-translation second derivatives vanish; fill the nonzero ones.
        if (rot) {
            const Vec2 mjex = minv * Vec2(0.0, -1.0);  // M J e_x
            const Vec2 mjey = minv * Vec2(1.0, 0.0);   // M J e_y
            set2(ax_th, ax_th, mu * (-c_theta * c_theta * s_inv));
            set2(ax_th, ax_tx, mjex * (-c_theta * s_inv));
            set2(ax_th, ax_ty, mjey * (-c_theta * s_inv));
        }
        if (sc) {
            set2(ax_s, ax_tx, mex * (c_s * s_inv));
            set2(ax_s, ax_ty, mey * (c_s * s_inv));
            set2(ax_s, ax_s, mu * (c_s * c_s * s_inv));
            if (rot) set2(ax_th, ax_s, mju * (-c_s * c_theta * s_inv));
        }
        return cd;
    }
};

inline CoordDerivs coord_derivs(const TransformModel& m, const ParamVector& lam, Vec2 x) {
    return CoordFrame(m, lam).derivs(x);
}

// Closed-form action on an atom: A_lambda(phi_gamma) = phi_{gamma o lambda} with
//   tau' = t + s R(theta) tau,  psi' = psi + theta,  sigma' = s sigma.
inline Pattern apply_to_pattern(const TransformModel& m, const ParamVector& lam, const Pattern& p) {
    check_params(m, lam);
    const double theta = m.angle(lam);
    const double s = m.scale(lam);
    const Vec2 t = m.translation(lam);
    const Mat2 r = Mat2::rotation(theta);
    Pattern out;
    out.atoms.reserve(p.atoms.size());
    for (const auto& wa : p.atoms) {
        const AtomParams& g = wa.params;
        out.atoms.push_back({wa.coeff, AtomParams(g.psi + theta, t + (r * g.tau) * s, g.sigma * s)});
    }
    return out;
}

// Parameters of the inverse map: coord_map(m, inverse_params(m, lam), .) is the
// inverse bijection of coord_map(m, lam, .). May land outside the domain.
inline ParamVector inverse_params(const TransformModel& m, const ParamVector& lam) {
    check_params(m, lam);
    ParamVector inv = m.identity_params();
    const double theta = m.angle(lam);
    const double s = m.scale(lam);
    const Vec2 t = m.translation(lam);
    const Vec2 tinv = (Mat2::rotation(-theta) * t) * (-1.0 / s);
    inv[m.axis_tx()] = tinv.x;
    inv[m.axis_ty()] = tinv.y;
    if (m.has_rotation()) inv[m.axis_theta()] = -lam[m.axis_theta()];
    if (m.has_scale()) inv[m.axis_s()] = 2.0 - lam[m.axis_s()];
    return inv;
}

// ||p_lambda||^2 = s^2 ||p||^2 for similarity transforms (change of variables).
inline double transformed_norm2(const TransformModel& m, const ParamVector& lam, double norm2_p) {
    const double s = m.scale(lam);
    return s * s * norm2_p;
}

}  // namespace tdreg
