#include <catch2/catch.hpp>

#include <cstdio>

#include "tdreg/raster.hpp"
#include "tdreg/registration.hpp"
#include "tdreg/synth.hpp"
#include "test_util.hpp"

using namespace tdreg;

namespace {
Pattern random_pattern(Rng& rng, int n) {
    Pattern p;
    for (int k = 0; k < n; ++k) p.atoms.push_back({rng.uniform(-1, 1), oracle::random_atom(rng)});
    return p;
}

double raster_l2_diff(const RasterImage& a, const RasterImage& b) {
    return raster_difference(a, b).l2_norm();
}
}  // namespace

TEST_CASE("checked quadrature", "[raster]") {
    const Pattern p{{{1.0, AtomParams(0.0, {0, 0}, {1, 1})}}};
    const auto atoms = compile(p);
    const auto f2 = [&](Vec2 x) {
        const double v = eval_compiled(atoms, x);
        return v * v;
    };
    const QuadratureSpec quad(10.0, 0.05);
    CHECK(integrate_checked(quad, f2) == Approx(kPi / 2).epsilon(1e-9));
    CHECK(integrate_checked(quad, f2) == Approx(integrate(quad, f2)));

    // an atom parked at the window edge trips the border-mass guard
    const Pattern off{{{1.0, AtomParams(0.0, {10.0, 0.0}, {2, 2})}}};
    const auto off_atoms = compile(off);
    CHECK_THROWS_AS(integrate_checked(quad, [&](Vec2 x) { return eval_compiled(off_atoms, x); }),
                    WindowTooSmallError);
}

TEST_CASE("rasterization", "[raster]") {
    SECTION("center pixel of the unit atom") {
        // grid chosen so a pixel center lands exactly on the origin
        const QuadratureSpec spec(8.05, 0.1);
        const RasterImage img = rasterize(Pattern{{{1.0, AtomParams(0.0, {0, 0}, {1, 1})}}}, spec);
        CHECK(img.at(80, 80) == Approx(1.0));
        CHECK(img.world(80, 80).x == Approx(0.0).margin(1e-12));
    }

    SECTION("Riemann-sum norm approaches the closed-form norm") {
        Rng rng(401);
        const Pattern p = random_pattern(rng, 6);
        const double want = pattern_norm(p);
        const double got = rasterize(p, QuadratureSpec(12.0, 0.05)).l2_norm();
        CHECK(std::abs(got - want) / want < 1e-3);

        // at coarse steps the discrepancy is dominated by discretization and
        // halves (at least) when the resolution doubles
        const double e1 = std::abs(rasterize(p, QuadratureSpec(12.0, 0.8)).l2_norm() - want);
        const double e2 = std::abs(rasterize(p, QuadratureSpec(12.0, 0.4)).l2_norm() - want);
        CHECK(e2 <= 0.5 * e1 + 1e-12);
    }
}

TEST_CASE("finite-difference tangents on rasters", "[raster]") {
    Rng rng(409);
    const Pattern p = random_pattern(rng, 6);
    const QuadratureSpec spec(12.0, 0.05);
    const TransformModel m(TransformKind::TransRot3D);
    const ParamVector id = m.identity_params();

    SECTION("agreement with the analytic tangents") {
        const RasterImage img = rasterize(p, spec);
        const FiniteDiffTangents fd = finite_difference_tangents(img, m, id, 1e-2);
        CHECK_FALSE(fd.conditioning_warning);
        const ManifoldGeometry g(m, p, spec);
        for (int i = 0; i < m.dim(); ++i) {
            const RasterImage want = rasterize_field(g.tangent(id, i), spec);
            const double rel = raster_l2_diff(fd.fields[static_cast<size_t>(i)], want) / want.l2_norm();
            CHECK(rel <= 1e-2);
        }
    }

    SECTION("translation tangent equals the negated x-gradient raster") {
        const RasterImage img = rasterize(p, spec);
        const FiniteDiffTangents fd = finite_difference_tangents(img, m, id, 1e-2);
        const RasterImage& tx = fd.fields[static_cast<size_t>(m.axis_tx())];
        double worst = 0.0;
        for (int iy = 1; iy + 1 < img.height; ++iy)
            for (int ix = 40; ix + 40 < img.width; ix += 7) {
                const double grad_x = (img.at(ix + 1, iy) - img.at(ix - 1, iy)) / (2.0 * img.dx);
                worst = std::max(worst, std::abs(tx.at(ix, iy) + grad_x));
            }
        CHECK(worst < 5e-2);
    }

    SECTION("pre-smoothing reduces the tangent error") {
        auto rel_tangent_error = [&](double rho) {
            const Pattern ps = smooth_pattern(p, FilterKernel(rho));
            const RasterImage img = rasterize(ps, spec);
            const FiniteDiffTangents fd = finite_difference_tangents(img, m, id, 1e-2);
            const ManifoldGeometry g(m, ps, spec);
            double num = 0.0, den = 0.0;
            for (int i = 0; i < m.dim(); ++i) {
                const RasterImage want = rasterize_field(g.tangent(id, i), spec);
                num += raster_l2_diff(fd.fields[static_cast<size_t>(i)], want);
                den += want.l2_norm();
            }
            return num / den;
        };
        CHECK(rel_tangent_error(1.0) < rel_tangent_error(0.0));
    }

    SECTION("conditioning warning for steps below the pixel pitch") {
        const RasterImage img = rasterize(p, spec);
        CHECK(finite_difference_tangents(img, m, id, 1e-4).conditioning_warning);
    }
}

TEST_CASE("digital tangent step approximates the analytic step", "[raster]") {
    Rng rng(419);
    const Pattern p = random_pattern(rng, 6);
    const QuadratureSpec spec(12.0, 0.05);
    const TransformModel m(TransformKind::Translation2D);
    ParamVector star = m.identity_params();
    star[0] = 0.12;
    star[1] = -0.08;

    const RasterImage ref = rasterize(p, spec);
    const RasterImage target = rasterize(apply_to_pattern(m, star, p), spec);
    const ParamVector got = tangent_step_raster(ref, target, m, m.identity_params(), 1e-2);

    const ManifoldGeometry g(m, p, spec);
    const StepResult want = tangent_step(g, apply_to_pattern(m, star, p), m.identity_params());
    CHECK((got - want.lambda).norm() <= 1e-2 * std::max(1.0, want.lambda.norm()));
    CHECK((got - star).norm() < (star).norm());
}

TEST_CASE("PGM round trip and error handling", "[raster]") {
    Rng rng(421);
    const Pattern p = random_pattern(rng, 4);
    // keep pixel values inside [0, 1] for the quantization round trip
    RasterImage img = rasterize(p.scaled(0.2), QuadratureSpec(6.0, 0.2));
    for (double& v : img.pixels) v = std::min(1.0, std::max(0.0, v + 0.5));

    const std::string path = "/tmp/tdreg_test_roundtrip.pgm";

    SECTION("16-bit save/load is lossless at quantization tolerance") {
        save_pgm(path, img, 16);
        const RasterImage back = load_pgm(path, 6.0);
        REQUIRE(back.width == img.width);
        REQUIRE(back.height == img.height);
        double worst = 0.0;
        for (size_t i = 0; i < img.pixels.size(); ++i)
            worst = std::max(worst, std::abs(back.pixels[i] - img.pixels[i]));
        CHECK(worst <= 0.5 / 65535.0 + 1e-12);
        std::remove(path.c_str());
    }

    SECTION("60x60 import world window matches the atom domain") {
        RasterImage small(60, 60, 0, 0, 1, 1);
        save_pgm(path, small, 8);
        const RasterImage back = load_pgm(path);
        CHECK(back.dx == Approx(0.2));
        CHECK(back.world(0, 0).x == Approx(-5.9));
        CHECK(back.world(59, 59).x == Approx(5.9));
        std::remove(path.c_str());
    }

    SECTION("ASCII PGM is rejected with a clear message") {
        std::ofstream out(path, std::ios::binary);
        out << "P2\n2 2\n255\n0 1 2 3\n";
        out.close();
        CHECK_THROWS_WITH(load_pgm(path), Catch::Contains("P2"));
        std::remove(path.c_str());
    }

    SECTION("malformed header reports a byte offset") {
        std::ofstream out(path, std::ios::binary);
        out << "P5\n2 hello\n255\n";
        out.close();
        CHECK_THROWS_WITH(load_pgm(path), Catch::Contains("byte offset"));
        std::remove(path.c_str());
    }

    SECTION("truncated pixel payload is detected") {
        std::ofstream out(path, std::ios::binary);
        out << "P5\n4 4\n255\n";
        out << "abc";  // 3 of 16 bytes
        out.close();
        CHECK_THROWS_WITH(load_pgm(path), Catch::Contains("truncated"));
        std::remove(path.c_str());
    }
}

TEST_CASE("warp matches the coordinate action", "[raster]") {
    Rng rng(431);
    const Pattern p = random_pattern(rng, 5);
    const QuadratureSpec spec(12.0, 0.05);
    const TransformModel m(TransformKind::TransRotScale4D);
    ParamVector lam = m.identity_params();
    lam[0] = 0.15;
    lam[1] = 0.2;
    lam[2] = -0.1;
    lam[3] = 1.2;

    const RasterImage warped = warp(rasterize(p, spec), m, lam);
    const RasterImage want = rasterize(apply_to_pattern(m, lam, p), spec);
    // interior comparison; the warp pulls zeros in from outside the source hull
    double num = 0.0, den = 0.0;
    for (int iy = 60; iy + 60 < warped.height; ++iy)
        for (int ix = 60; ix + 60 < warped.width; ++ix) {
            const double d = warped.at(ix, iy) - want.at(ix, iy);
            num += d * d;
            den += want.at(ix, iy) * want.at(ix, iy);
        }
    CHECK(std::sqrt(num / den) < 2e-3);
}
