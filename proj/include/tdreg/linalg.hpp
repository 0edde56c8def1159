#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>

namespace tdreg {

struct Vec2 {
    double x = 0.0;
    double y = 0.0;

    Vec2() = default;
    Vec2(double x_, double y_) : x(x_), y(y_) {}

    Vec2 operator+(Vec2 o) const { return {x + o.x, y + o.y}; }
    Vec2 operator-(Vec2 o) const { return {x - o.x, y - o.y}; }
    Vec2 operator*(double s) const { return {x * s, y * s}; }
    Vec2 operator-() const { return {-x, -y}; }
    double dot(Vec2 o) const { return x * o.x + y * o.y; }
    double norm2() const { return x * x + y * y; }
    double norm() const { return std::sqrt(norm2()); }
};

inline Vec2 operator*(double s, Vec2 v) { return v * s; }

// 2x2 matrix, row-major.
struct Mat2 {
    double a = 0.0, b = 0.0, c = 0.0, d = 0.0;  // [a b; c d]

    static Mat2 identity() { return {1.0, 0.0, 0.0, 1.0}; }
    static Mat2 rotation(double angle) {
        const double co = std::cos(angle), si = std::sin(angle);
        return {co, -si, si, co};
    }
    static Mat2 diag(double ax, double dy) { return {ax, 0.0, 0.0, dy}; }

    Vec2 operator*(Vec2 v) const { return {a * v.x + b * v.y, c * v.x + d * v.y}; }
    Mat2 operator*(const Mat2& o) const {
        return {a * o.a + b * o.c, a * o.b + b * o.d, c * o.a + d * o.c, c * o.b + d * o.d};
    }
    Mat2 operator+(const Mat2& o) const { return {a + o.a, b + o.b, c + o.c, d + o.d}; }
    Mat2 operator*(double s) const { return {a * s, b * s, c * s, d * s}; }
    Mat2 transpose() const { return {a, c, b, d}; }
    double det() const { return a * d - b * c; }
    double trace() const { return a + d; }

    Mat2 inverse() const {
        const double dt = det();
        if (dt == 0.0) throw std::runtime_error("Mat2::inverse: singular matrix");
        const double s = 1.0 / dt;
        return {d * s, -b * s, -c * s, a * s};
    }

    // Eigenvalues of a symmetric 2x2 ([a b; b d]), ascending.
    std::array<double, 2> sym_eigenvalues() const {
        const double mean = 0.5 * (a + d);
        const double disc = std::sqrt(std::max(0.0, 0.25 * (a - d) * (a - d) + b * c));
        return {mean - disc, mean + disc};
    }
};

inline double quadratic_form(const Mat2& m, Vec2 u, Vec2 v) {
    return u.dot(m * v);
}

// Dense vector/matrix with dimension d <= 4, for transformation-parameter space work.
constexpr int kMaxDim = 4;

struct VecD {
    int n = 0;
    std::array<double, kMaxDim> v{};

    VecD() = default;
    explicit VecD(int n_) : n(n_) {
        if (n_ < 0 || n_ > kMaxDim) throw std::invalid_argument("VecD: dimension out of range");
    }
    static VecD zeros(int n) { return VecD(n); }

    double& operator[](int i) { return v[static_cast<size_t>(i)]; }
    double operator[](int i) const { return v[static_cast<size_t>(i)]; }

    VecD operator+(const VecD& o) const {
        VecD r(n);
        for (int i = 0; i < n; ++i) r[i] = v[size_t(i)] + o[i];
        return r;
    }
    VecD operator-(const VecD& o) const {
        VecD r(n);
        for (int i = 0; i < n; ++i) r[i] = v[size_t(i)] - o[i];
        return r;
    }
    VecD operator*(double s) const {
        VecD r(n);
        for (int i = 0; i < n; ++i) r[i] = v[size_t(i)] * s;
        return r;
    }
    double dot(const VecD& o) const {
        double s = 0.0;
        for (int i = 0; i < n; ++i) s += v[size_t(i)] * o[i];
        return s;
    }
    double norm() const { return std::sqrt(dot(*this)); }
    double norm1() const {
        double s = 0.0;
        for (int i = 0; i < n; ++i) s += std::abs(v[size_t(i)]);
        return s;
    }
    double norm_inf() const {
        double s = 0.0;
        for (int i = 0; i < n; ++i) s = std::max(s, std::abs(v[size_t(i)]));
        return s;
    }
    bool finite() const {
        for (int i = 0; i < n; ++i)
            if (!std::isfinite(v[size_t(i)])) return false;
        return true;
    }
};

struct MatD {
    int n = 0;
    std::array<double, kMaxDim * kMaxDim> m{};

    MatD() = default;
    explicit MatD(int n_) : n(n_) {
        if (n_ < 0 || n_ > kMaxDim) throw std::invalid_argument("MatD: dimension out of range");
    }
    static MatD identity(int n) {
        MatD r(n);
        for (int i = 0; i < n; ++i) r(i, i) = 1.0;
        return r;
    }

    double& operator()(int i, int j) { return m[static_cast<size_t>(i * kMaxDim + j)]; }
    double operator()(int i, int j) const { return m[static_cast<size_t>(i * kMaxDim + j)]; }

    double trace() const {
        double s = 0.0;
        for (int i = 0; i < n; ++i) s += (*this)(i, i);
        return s;
    }

    VecD operator*(const VecD& x) const {
        VecD r(n);
        for (int i = 0; i < n; ++i) {
            double s = 0.0;
            for (int j = 0; j < n; ++j) s += (*this)(i, j) * x[j];
            r[i] = s;
        }
        return r;
    }

    double max_abs_asymmetry() const {
        double s = 0.0;
        for (int i = 0; i < n; ++i)
            for (int j = i + 1; j < n; ++j) s = std::max(s, std::abs((*this)(i, j) - (*this)(j, i)));
        return s;
    }
};

// Eigendecomposition of a symmetric MatD by cyclic Jacobi rotations.
// Returns eigenvalues ascending; `vectors` columns are the matching eigenvectors.
struct SymEigen {
    VecD values;
    MatD vectors;
};

inline SymEigen sym_eigen(const MatD& a_in) {
    const int n = a_in.n;
    MatD a = a_in;
    MatD v = MatD::identity(n);
    for (int sweep = 0; sweep < 64; ++sweep) {
        double off = 0.0;
        for (int p = 0; p < n; ++p)
            for (int q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
        if (off < 1e-30) break;
        for (int p = 0; p < n; ++p) {
            for (int q = p + 1; q < n; ++q) {
                if (std::abs(a(p, q)) < 1e-300) continue;
                const double theta = (a(q, q) - a(p, p)) / (2.0 * a(p, q));
                const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                                 (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                for (int k = 0; k < n; ++k) {
                    const double akp = a(k, p), akq = a(k, q);
                    a(k, p) = c * akp - s * akq;
                    a(k, q) = s * akp + c * akq;
                }
                for (int k = 0; k < n; ++k) {
                    const double apk = a(p, k), aqk = a(q, k);
                    a(p, k) = c * apk - s * aqk;
                    a(q, k) = s * apk + c * aqk;
                }
                for (int k = 0; k < n; ++k) {
                    const double vkp = v(k, p), vkq = v(k, q);
                    v(k, p) = c * vkp - s * vkq;
                    v(k, q) = s * vkp + c * vkq;
                }
            }
        }
    }
    // Sort ascending, carrying eigenvector columns along.
    std::array<int, kMaxDim> idx{};
    for (int i = 0; i < n; ++i) idx[size_t(i)] = i;
    std::sort(idx.begin(), idx.begin() + n, [&](int i, int j) { return a(i, i) < a(j, j); });
    SymEigen out;
    out.values = VecD(n);
    out.vectors = MatD(n);
    for (int i = 0; i < n; ++i) {
        out.values[i] = a(idx[size_t(i)], idx[size_t(i)]);
        for (int k = 0; k < n; ++k) out.vectors(k, i) = v(k, idx[size_t(i)]);
    }
    return out;
}

// Inverse of a symmetric positive definite MatD via its eigendecomposition.
inline MatD sym_inverse(const MatD& a, const SymEigen& eig) {
    const int n = a.n;
    MatD inv(n);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            double s = 0.0;
            for (int k = 0; k < n; ++k)
                s += eig.vectors(i, k) * eig.vectors(j, k) / eig.values[k];
            inv(i, j) = s;
        }
    }
    return inv;
}

}  // namespace tdreg
