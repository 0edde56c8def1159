#include <catch2/catch.hpp>

#include "tdreg/manifold.hpp"
#include "tdreg/synth.hpp"
#include "tdreg/transforms.hpp"
#include "test_util.hpp"

using namespace tdreg;

namespace {
ParamVector make_params(const TransformModel& m, std::initializer_list<double> vals) {
    ParamVector lam(m.dim());
    int i = 0;
    for (double v : vals) lam[i++] = v;
    return lam;
}
}  // namespace

TEST_CASE("coordinate map basics", "[transforms]") {
    const TransformModel m4(TransformKind::TransRotScale4D);
    const Vec2 x{0.7, -1.3};
    const Vec2 id = coord_map(m4, m4.identity_params(), x);
    CHECK(id.x == Approx(x.x));
    CHECK(id.y == Approx(x.y));

    const TransformModel m2(TransformKind::Translation2D);
    const Vec2 z = coord_map(m2, make_params(m2, {1.0, 2.0}), {1.0, 2.0});
    CHECK(z.x == Approx(0.0).margin(1e-15));
    CHECK(z.y == Approx(0.0).margin(1e-15));
}

TEST_CASE("coordinate map inverts through inverse_params", "[transforms]") {
    Rng rng(3);
    const TransformModel m(TransformKind::TransRotScale4D);
    for (int t = 0; t < 25; ++t) {
        const ParamVector lam = make_params(
            m, {rng.uniform(-0.4, 0.4), rng.uniform(-0.4, 0.4), rng.uniform(-0.4, 0.4), rng.uniform(0.5, 1.5)});
        const ParamVector inv = inverse_params(m, lam);
        const Vec2 x{rng.uniform(-5, 5), rng.uniform(-5, 5)};
        const Vec2 round = coord_map(m, inv, coord_map(m, lam, x));
        CHECK(std::abs(round.x - x.x) < 1e-12);
        CHECK(std::abs(round.y - x.y) < 1e-12);
    }
}

TEST_CASE("coordinate derivatives match finite differences", "[transforms]") {
    Rng rng(17);
    for (const auto kind :
         {TransformKind::Translation2D, TransformKind::TransRot3D, TransformKind::TransRotScale4D}) {
        const TransformModel m(kind);
        const int d = m.dim();
        for (int t = 0; t < 10; ++t) {
            ParamVector lam = m.identity_params();
            for (int i = 0; i < d; ++i) lam[i] += rng.uniform(-0.3, 0.3);
            const Vec2 x{rng.uniform(-4, 4), rng.uniform(-4, 4)};
            const CoordDerivs cd = coord_derivs(m, lam, x);
            const double h = 1e-6;
            for (int i = 0; i < d; ++i) {
                ParamVector lp = lam, lm = lam;
                lp[i] += h;
                lm[i] -= h;
                const Vec2 fd = (coord_map(m, lp, x) - coord_map(m, lm, x)) * (1.0 / (2.0 * h));
                CHECK(std::abs(cd.first[static_cast<size_t>(i)].x - fd.x) < 1e-8);
                CHECK(std::abs(cd.first[static_cast<size_t>(i)].y - fd.y) < 1e-8);
                const double h2 = 1e-4;
                for (int j = 0; j < d; ++j) {
                    ParamVector lpp = lam, lpm = lam, lmp = lam, lmm = lam;
                    lpp[i] += h2; lpp[j] += h2;
                    lpm[i] += h2; lpm[j] -= h2;
                    lmp[i] -= h2; lmp[j] += h2;
                    lmm[i] -= h2; lmm[j] -= h2;
                    const Vec2 fd2 = (coord_map(m, lpp, x) - coord_map(m, lpm, x) -
                                      coord_map(m, lmp, x) + coord_map(m, lmm, x)) *
                                     (1.0 / (4.0 * h2 * h2));
                    const Vec2 got = cd.second[static_cast<size_t>(i)][static_cast<size_t>(j)];
                    CHECK(std::abs(got.x - fd2.x) < 1e-6);
                    CHECK(std::abs(got.y - fd2.y) < 1e-6);
                }
            }
        }
    }
}

TEST_CASE("pattern transport matches coordinate composition", "[transforms]") {
    Rng rng(29);
    Pattern p;
    for (int k = 0; k < 5; ++k) p.atoms.push_back({rng.uniform(-1, 1), oracle::random_atom(rng)});

    SECTION("identity leaves the pattern unchanged") {
        const TransformModel m(TransformKind::TransRotScale4D);
        const Pattern q = apply_to_pattern(m, m.identity_params(), p);
        for (size_t i = 0; i < p.size(); ++i) {
            CHECK(q.atoms[i].coeff == p.atoms[i].coeff);
            CHECK(q.atoms[i].params.tau.x == Approx(p.atoms[i].params.tau.x).margin(1e-15));
            CHECK(q.atoms[i].params.sigma.x == Approx(p.atoms[i].params.sigma.x));
        }
    }

    SECTION("pure translation shifts atom centers") {
        const TransformModel m(TransformKind::Translation2D);
        const ParamVector lam = make_params(m, {0.3, -0.2});
        const Pattern q = apply_to_pattern(m, lam, p);
        for (size_t i = 0; i < p.size(); ++i) {
            CHECK(q.atoms[i].params.tau.x == Approx(p.atoms[i].params.tau.x + 0.3));
            CHECK(q.atoms[i].params.tau.y == Approx(p.atoms[i].params.tau.y - 0.2));
            CHECK(q.atoms[i].params.psi == p.atoms[i].params.psi);
            CHECK(q.atoms[i].params.sigma.x == p.atoms[i].params.sigma.x);
        }
    }

    SECTION("pointwise group action, all models") {
        for (const auto kind :
             {TransformKind::Translation2D, TransformKind::TransRot3D, TransformKind::TransRotScale4D}) {
            const TransformModel m(kind);
            ParamVector lam = m.identity_params();
            for (int i = 0; i < m.dim(); ++i) lam[i] += rng.uniform(-0.35, 0.35);
            const Pattern q = apply_to_pattern(m, lam, p);
            for (int t = 0; t < 20; ++t) {
                const Vec2 x{rng.uniform(-6, 6), rng.uniform(-6, 6)};
                const double lhs = eval_pattern(q, x);
                const double rhs = eval_pattern(p, coord_map(m, lam, x));
                CHECK(std::abs(lhs - rhs) <= 1e-12 * std::max(1.0, std::abs(rhs)));
            }
        }
    }
}

TEST_CASE("filtering commutes with scale-free transformations only", "[transforms]") {
    Rng rng(41);
    Pattern p;
    for (int k = 0; k < 4; ++k) p.atoms.push_back({rng.uniform(-1, 1), oracle::random_atom(rng)});
    const double rho = 1.5;

    SECTION("Translation2D and TransRot3D commute field-by-field") {
        for (const auto kind : {TransformKind::Translation2D, TransformKind::TransRot3D}) {
            const TransformModel m(kind);
            ParamVector lam = m.identity_params();
            for (int i = 0; i < m.dim(); ++i) lam[i] += rng.uniform(-0.3, 0.3);
            const Pattern a = smooth_pattern(apply_to_pattern(m, lam, p), FilterKernel(rho));
            const Pattern b = apply_to_pattern(m, lam, smooth_pattern(p, FilterKernel(rho)));
            REQUIRE(a.size() == b.size());
            for (size_t i = 0; i < a.size(); ++i) {
                CHECK(a.atoms[i].coeff == Approx(b.atoms[i].coeff).epsilon(1e-12));
                CHECK(a.atoms[i].params.tau.x == Approx(b.atoms[i].params.tau.x).margin(1e-12));
                CHECK(a.atoms[i].params.tau.y == Approx(b.atoms[i].params.tau.y).margin(1e-12));
                CHECK(a.atoms[i].params.sigma.x == Approx(b.atoms[i].params.sigma.x).epsilon(1e-12));
                CHECK(a.atoms[i].params.sigma.y == Approx(b.atoms[i].params.sigma.y).epsilon(1e-12));
            }
        }
    }

    SECTION("scale change breaks commutation") {
        const TransformModel m(TransformKind::TransRotScale4D);
        const ParamVector lam = make_params(m, {0.1, 0.2, -0.1, 1.4});
        const Pattern a = smooth_pattern(apply_to_pattern(m, lam, p), FilterKernel(rho));
        const Pattern b = apply_to_pattern(m, lam, smooth_pattern(p, FilterKernel(rho)));
        CHECK(pattern_l2_distance(a, b) > 0.0);
    }
}

TEST_CASE("gain calibration equalizes tangent norms", "[transforms]") {
    const TransformModel def(TransformKind::TransRot3D);
    CHECK(def.rotation_gain == Approx(0.1 * kPi));

    const Pattern p = synth_random_reference(8);
    const QuadratureSpec quad(12.0, 0.1);
    const TransformModel m0(TransformKind::TransRotScale4D);
    const TransformModel m1 = calibrate_gains(m0, p, quad);

    const ManifoldGeometry g(m1, p, quad);
    const GeometryScan s = g.scan_plain(m1.identity_params(), false);
    const double ref = std::sqrt(s.metric(m1.axis_tx(), m1.axis_tx()));
    const double n_th = std::sqrt(s.metric(m1.axis_theta(), m1.axis_theta()));
    const double n_s = std::sqrt(s.metric(m1.axis_s(), m1.axis_s()));
    CHECK(n_th / ref == Approx(1.0).epsilon(1e-3));
    CHECK(n_s / ref == Approx(1.0).epsilon(1e-3));

    const TransformModel m2 = calibrate_gains(m1, p, quad);
    CHECK(m2.rotation_gain == Approx(m1.rotation_gain).epsilon(1e-6));
    CHECK(m2.scale_gain == Approx(m1.scale_gain).epsilon(1e-6));

    SECTION("zero pattern cannot be calibrated") {
        const Pattern zero{{{0.0, AtomParams(0.0, {0, 0}, {1.0, 1.0})}}};
        CHECK_THROWS(calibrate_gains(m1, zero, quad));
    }
}
