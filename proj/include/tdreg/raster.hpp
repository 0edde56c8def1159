#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "tdreg/atoms.hpp"
#include "tdreg/quadrature.hpp"
#include "tdreg/transforms.hpp"

namespace tdreg {

struct PgmParseError : std::runtime_error {
    PgmParseError(const std::string& msg, std::streamoff offset)
        : std::runtime_error(msg + " (byte offset " + std::to_string(offset) + ")") {}
};

// Row-major grid of reals with an invertible world-to-pixel map: pixel (ix, iy)
// is centered at world (x0 + ix dx, y0 + iy dy).
struct RasterImage {
    int width = 0;
    int height = 0;
    std::vector<double> pixels;
    double x0 = 0.0, y0 = 0.0;
    double dx = 1.0, dy = 1.0;

    RasterImage() = default;
    RasterImage(int w, int h, double x0_, double y0_, double dx_, double dy_)
        : width(w), height(h), pixels(static_cast<size_t>(w) * static_cast<size_t>(h), 0.0),
          x0(x0_), y0(y0_), dx(dx_), dy(dy_) {
        if (w < 2 || h < 2) throw std::invalid_argument("RasterImage: dimensions must be >= 2");
        if (dx == 0.0 || dy == 0.0) throw std::invalid_argument("RasterImage: degenerate pixel pitch");
    }

    double& at(int ix, int iy) { return pixels[static_cast<size_t>(iy) * static_cast<size_t>(width) + static_cast<size_t>(ix)]; }
    double at(int ix, int iy) const { return pixels[static_cast<size_t>(iy) * static_cast<size_t>(width) + static_cast<size_t>(ix)]; }

    Vec2 world(int ix, int iy) const { return {x0 + ix * dx, y0 + iy * dy}; }

    // Bilinear sample at a world point; zero outside the pixel-center hull.
    double sample(Vec2 w) const {
        const double px = (w.x - x0) / dx;
        const double py = (w.y - y0) / dy;
        if (px < 0.0 || py < 0.0 || px > width - 1 || py > height - 1) return 0.0;
        const int ix = std::min(static_cast<int>(px), width - 2);
        const int iy = std::min(static_cast<int>(py), height - 2);
        const double fx = px - ix, fy = py - iy;
        return (1 - fx) * (1 - fy) * at(ix, iy) + fx * (1 - fy) * at(ix + 1, iy) +
               (1 - fx) * fy * at(ix, iy + 1) + fx * fy * at(ix + 1, iy + 1);
    }

    double l2_norm() const {
        double s = 0.0;
        for (double v : pixels) s += v * v;
        return std::sqrt(s * std::abs(dx * dy));
    }
};

inline RasterImage raster_difference(const RasterImage& a, const RasterImage& b) {
    RasterImage out = a;
    for (size_t i = 0; i < out.pixels.size(); ++i) out.pixels[i] -= b.pixels[i];
    return out;
}

template <typename F>
RasterImage rasterize_field(F&& field, const QuadratureSpec& spec) {
    const int n = spec.points_per_axis();
    RasterImage img(n, n, spec.coord(0), spec.coord(0), spec.step, spec.step);
    for (int iy = 0; iy < n; ++iy)
        for (int ix = 0; ix < n; ++ix) img.at(ix, iy) = field(img.world(ix, iy));
    return img;
}

inline RasterImage rasterize(const Pattern& p, const QuadratureSpec& spec) {
    const auto atoms = compile(p);
    return rasterize_field([&](Vec2 x) { return eval_compiled(atoms, x); }, spec);
}

// A_lambda on rasters: out(X) = in(a(lambda, X)) by bilinear interpolation.
inline RasterImage warp(const RasterImage& img, const TransformModel& m, const ParamVector& lam) {
    RasterImage out = img;
    const CoordFrame frame(m, lam);
    for (int iy = 0; iy < img.height; ++iy)
        for (int ix = 0; ix < img.width; ++ix) out.at(ix, iy) = img.sample(frame.map(img.world(ix, iy)));
    return out;
}

// Central differences in lambda through raster warping; the digital stand-in
// for the analytic manifold tangents.
struct FiniteDiffTangents {
    std::vector<RasterImage> fields;  // one per model axis
    bool conditioning_warning = false;
};

inline FiniteDiffTangents finite_difference_tangents(const RasterImage& img, const TransformModel& m,
                                                     const ParamVector& lam, double step) {
    if (!(step > 0.0)) throw std::invalid_argument("finite_difference_tangents: step must be > 0");
    FiniteDiffTangents out;
    out.conditioning_warning = step < 0.1 * std::min(std::abs(img.dx), std::abs(img.dy));
    for (int i = 0; i < m.dim(); ++i) {
        ParamVector lp = lam, lm = lam;
        lp[i] += step;
        lm[i] -= step;
        const RasterImage a = warp(img, m, lp);
        const RasterImage b = warp(img, m, lm);
        RasterImage t = a;
        for (size_t k = 0; k < t.pixels.size(); ++k)
            t.pixels[k] = (a.pixels[k] - b.pixels[k]) / (2.0 * step);
        out.fields.push_back(std::move(t));
    }
    return out;
}

// Digital tangent step: normal equations assembled from the warped reference
// raster and its finite-difference tangents, pixel sums standing in for the
// L2 inner products. Requires linalg.hpp's symmetric solve.
inline ParamVector tangent_step_raster(const RasterImage& ref, const RasterImage& target,
                                       const TransformModel& m, const ParamVector& lam_r,
                                       double fd_step) {
    const int d = m.dim();
    const RasterImage ref_warp = warp(ref, m, lam_r);
    const FiniteDiffTangents tang = finite_difference_tangents(ref, m, lam_r, fd_step);
    MatD gram(d);
    VecD cross(d);
    for (size_t k = 0; k < ref_warp.pixels.size(); ++k) {
        const double r = target.pixels[k] - ref_warp.pixels[k];
        for (int i = 0; i < d; ++i) {
            const double ti = tang.fields[static_cast<size_t>(i)].pixels[k];
            cross[i] += r * ti;
            for (int j = i; j < d; ++j)
                gram(i, j) += ti * tang.fields[static_cast<size_t>(j)].pixels[k];
        }
    }
    for (int i = 0; i < d; ++i)
        for (int j = i + 1; j < d; ++j) gram(j, i) = gram(i, j);
    const SymEigen eig = sym_eigen(gram);
    if (!(eig.values[0] > 1e-12 * gram.trace()))
        throw std::runtime_error("tangent_step_raster: rank-deficient pixel Gram matrix");
    return lam_r + sym_inverse(gram, eig) * cross;
}

// Binary PGM (P5) import, 8- or 16-bit (big-endian), scaled to [0, 1]. The world
// window defaults to [-6, 6]^2 so a 60x60 import covers the atom-center domain.
inline RasterImage load_pgm(const std::string& path, double world_half_width = 6.0) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw PgmParseError("cannot open '" + path + "'", 0);

    auto skip_ws_comments = [&in]() {
        for (;;) {
            int c = in.peek();
            if (c == '#') {
                while (c != '\n' && c != EOF) c = in.get();
            } else if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
                in.get();
            } else {
                break;
            }
        }
    };

    char magic[2] = {0, 0};
    in.read(magic, 2);
    if (magic[0] != 'P' || magic[1] != '5') {
        if (magic[0] == 'P' && magic[1] == '2')
            throw PgmParseError("ASCII PGM (P2) is not supported; use binary P5", 0);
        throw PgmParseError("not a binary PGM (expected magic P5)", 0);
    }
    long w = 0, h = 0, maxval = 0;
    skip_ws_comments();
    if (!(in >> w)) throw PgmParseError("bad width", in.tellg());
    skip_ws_comments();
    if (!(in >> h)) throw PgmParseError("bad height", in.tellg());
    skip_ws_comments();
    if (!(in >> maxval)) throw PgmParseError("bad maxval", in.tellg());
    if (w < 2 || h < 2) throw PgmParseError("image too small (need >= 2x2)", in.tellg());
    if (maxval <= 0 || maxval > 65535) throw PgmParseError("maxval out of range", in.tellg());
    in.get();  // single whitespace after maxval

    const bool wide = maxval > 255;
    const size_t npix = static_cast<size_t>(w) * static_cast<size_t>(h);
    std::vector<unsigned char> raw(npix * (wide ? 2 : 1));
    in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (static_cast<size_t>(in.gcount()) != raw.size())
        throw PgmParseError("truncated pixel data", in.tellg());

    const double pitch = 2.0 * world_half_width / static_cast<double>(w);
    const double pitch_y = 2.0 * world_half_width / static_cast<double>(h);
    RasterImage img(static_cast<int>(w), static_cast<int>(h),
                    -world_half_width + 0.5 * pitch, -world_half_width + 0.5 * pitch_y, pitch, pitch_y);
    for (size_t i = 0; i < npix; ++i) {
        const double v = wide ? static_cast<double>((raw[2 * i] << 8) | raw[2 * i + 1])
                              : static_cast<double>(raw[i]);
        img.pixels[i] = v / static_cast<double>(maxval);
    }
    return img;
}

inline void save_pgm(const std::string& path, const RasterImage& img, int bits = 16) {
    if (bits != 8 && bits != 16) throw std::invalid_argument("save_pgm: bits must be 8 or 16");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("save_pgm: cannot open '" + path + "'");
    const long maxval = bits == 8 ? 255 : 65535;
    out << "P5\n" << img.width << " " << img.height << "\n" << maxval << "\n";
    for (double v : img.pixels) {
        const double clamped = std::min(1.0, std::max(0.0, v));
        const long q = std::lround(clamped * static_cast<double>(maxval));
        if (bits == 16) out.put(static_cast<char>((q >> 8) & 0xFF));
        out.put(static_cast<char>(q & 0xFF));
    }
}

}  // namespace tdreg
