#pragma once

#include <cmath>
#include <cstdint>
#include <future>
#include <stdexcept>
#include <thread>
#include <vector>

#include "tdreg/linalg.hpp"

namespace tdreg {

// Square midpoint-rule grid on [-L, L]^2 with step h. All L2(R^2) integrals in
// the library are realized on such grids; integrands are smooth with Gaussian
// decay, so the rule converges spectrally once h resolves the narrowest atom.
struct QuadratureSpec {
    double window = 12.0;        // half-width L
    double step = 0.05;          // grid step h
    double boundary_tol = 1e-6;  // max fraction of integrand mass on the border ring

    QuadratureSpec() = default;
    QuadratureSpec(double window_, double step_, double boundary_tol_ = 1e-6)
        : window(window_), step(step_), boundary_tol(boundary_tol_) {
        validate();
    }

    void validate() const {
        if (!(window > 0.0) || !(step > 0.0) || step > window / 10.0)
            throw std::invalid_argument("QuadratureSpec: need L > 0, h > 0, h <= L/10");
    }

    int points_per_axis() const { return static_cast<int>(std::ceil(2.0 * window / step)); }

    double coord(int i) const { return -window + (static_cast<double>(i) + 0.5) * step; }

    double cell_area() const { return step * step; }

    // Window/step widened for integrands smoothed at filter size rho: supports
    // spread by O(rho) and the smallest feature scale grows to at least rho.
    QuadratureSpec for_rho(double rho) const {
        QuadratureSpec q = *this;
        q.window = window + 3.0 * rho;
        q.step = std::max(step, rho / 6.0);
        return q;
    }
};

struct WindowTooSmallError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Number of worker threads for grid sweeps and trial batches. 0 = hardware default.
inline int& worker_threads() {
    static int n = 0;
    return n;
}

inline int effective_threads() {
    const int n = worker_threads();
    if (n > 0) return n;
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

// Runs fn(row) for every grid row and sums the returned partial values in row
// order, so the reduction is bit-identical for any thread count.
template <typename RowFn>
std::vector<double> parallel_row_sums(int rows, int terms, RowFn&& fn) {
    std::vector<std::vector<double>> partial(static_cast<size_t>(rows));
    const int nthreads = std::min(effective_threads(), std::max(1, rows));
    if (nthreads <= 1) {
        for (int r = 0; r < rows; ++r) partial[static_cast<size_t>(r)] = fn(r);
    } else {
        std::vector<std::future<void>> futs;
        futs.reserve(static_cast<size_t>(nthreads));
        for (int t = 0; t < nthreads; ++t) {
            futs.push_back(std::async(std::launch::async, [&, t] {
                for (int r = t; r < rows; r += nthreads) partial[static_cast<size_t>(r)] = fn(r);
            }));
        }
        for (auto& f : futs) f.get();
    }
    std::vector<double> total(static_cast<size_t>(terms), 0.0);
    for (int r = 0; r < rows; ++r)
        for (int k = 0; k < terms; ++k) total[static_cast<size_t>(k)] += partial[static_cast<size_t>(r)][static_cast<size_t>(k)];
    return total;
}

// integral of f over the grid; f: Vec2 -> double.
template <typename F>
double integrate(const QuadratureSpec& q, F&& f) {
    const int n = q.points_per_axis();
    auto row = [&](int iy) {
        const double y = q.coord(iy);
        std::vector<double> acc(1, 0.0);
        for (int ix = 0; ix < n; ++ix) acc[0] += f(Vec2(q.coord(ix), y));
        return acc;
    };
    return parallel_row_sums(n, 1, row)[0] * q.cell_area();
}

// Integral with a border-ring mass check: throws WindowTooSmallError when the
// outermost ring carries more than boundary_tol of the total |f| mass.
template <typename F>
double integrate_checked(const QuadratureSpec& q, F&& f) {
    const int n = q.points_per_axis();
    auto row = [&](int iy) {
        const double y = q.coord(iy);
        std::vector<double> acc(3, 0.0);  // integral, |mass|, border |mass|
        const bool border_row = (iy == 0 || iy == n - 1);
        for (int ix = 0; ix < n; ++ix) {
            const double v = f(Vec2(q.coord(ix), y));
            acc[0] += v;
            acc[1] += std::abs(v);
            if (border_row || ix == 0 || ix == n - 1) acc[2] += std::abs(v);
        }
        return acc;
    };
    const auto sums = parallel_row_sums(n, 3, row);
    if (sums[1] > 0.0 && sums[2] > q.boundary_tol * sums[1])
        throw WindowTooSmallError("quadrature window too small: border ring carries " +
                                  std::to_string(sums[2] / sums[1]) + " of integrand mass");
    return sums[0] * q.cell_area();
}

}  // namespace tdreg
