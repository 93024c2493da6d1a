#include <catch2/catch_amalgamated.hpp>

#include "slidereg/energy.hpp"
#include "slidereg/random.hpp"

using namespace slidereg;

namespace {

Color gray(double v) { return {v, 0.0, 0.0}; }

/// Central finite differences of psi w.r.t. A, step 1e-6*(1+|A|).
Mat2 fd_psi_grad(const EnergyModel& m, const Color& c1, const Color& c2, const Mat2& A) {
    const double h = 1e-6 * (1.0 + A.norm());
    Mat2 g;
    double* entries[4] = {&g.a, &g.b, &g.c, &g.d};
    for (int k = 0; k < 4; ++k) {
        Mat2 Ap = A, Am = A;
        double* pp[4] = {&Ap.a, &Ap.b, &Ap.c, &Ap.d};
        double* pm[4] = {&Am.a, &Am.b, &Am.c, &Am.d};
        *pp[k] += h;
        *pm[k] -= h;
        *entries[k] = (psi_eval(m, c1, c2, Ap) - psi_eval(m, c1, c2, Am)) / (2 * h);
    }
    return g;
}

double rel_error(const Mat2& got, const Mat2& want) {
    const double scale = std::max({want.norm(), got.norm(), 1e-8});
    return (got - want).norm() / scale;
}

} // namespace

TEST_CASE("volumetric term h") {
    const VolumetricTerm h = VolumetricTerm::make();
    CHECK(h.value(1.0) == Catch::Approx(-4.0));          // 1 + 1 - 6
    CHECK(h.value(4.0) == Catch::Approx(4.25));          // 16 + 1/4 - 12
    CHECK(h.deriv(1.0) == Catch::Approx(-2.0));          // h'(1) = -n

    // independent oracle: dense log-grid scan for the minimum
    double scan_min = 1e300, scan_arg = 0.0;
    for (int i = 0; i <= 2000000; ++i) {
        const double d = std::exp(-4.0 + i * 8.0 / 2000000.0);
        const double v = h.value(d);
        if (v < scan_min) { scan_min = v; scan_arg = d; }
    }
    CHECK(h.min_value == Catch::Approx(scan_min).margin(1e-9));
    CHECK(h.argmin == Catch::Approx(scan_arg).margin(1e-4));
    CHECK(h.min_value < -4.0); // below h(1), so C0 = -h_min > 4

    Rng rng(1);
    for (int i = 0; i < 200; ++i) {
        const double d = rng.log_uniform(1e-3, 1e3);
        CHECK(h.value(d) == Catch::Approx(d * h.value(1.0 / d)).epsilon(1e-12));
        CHECK(h.value(d) >= h.min_value - 1e-12 * std::abs(h.min_value));
    }
}

TEST_CASE("psi evaluation oracle values") {
    const EnergyModel m = EnergyModel::standard();
    const Color c = gray(0.4);

    CHECK(psi_eval(m, c, c, Mat2::identity()) == Catch::Approx(0.0).margin(1e-14));

    // A = 2*identity: Psi = 2*16 + 4*(2/16) + h(4) = 32.5 + 4.25 = 36.75,
    // which equals H(det A) = H(4) on conformal matrices.
    const double val = psi_eval(m, c, c, Mat2::identity() * 2.0);
    CHECK(val == Catch::Approx(36.75).epsilon(1e-14));
    CHECK(m.elastic.big_h(4.0) == Catch::Approx(36.75).epsilon(1e-14));
}

TEST_CASE("conformal consistency: Psi(lambda Q) = H(lambda^2)") {
    const EnergyModel m = EnergyModel::standard();
    Rng rng(2);
    for (int i = 0; i < 200; ++i) {
        const double lambda = rng.log_uniform(0.2, 5.0);
        const Mat2 A = rng.rotation() * lambda;
        CHECK(elastic_eval(m.elastic, A) ==
              Catch::Approx(m.elastic.big_h(lambda * lambda)).epsilon(1e-12));
    }
}

TEST_CASE("isotropy: psi(c1,c2,QAR) = psi(c1,c2,A)") {
    const EnergyModel m = EnergyModel::standard();
    Rng rng(3);
    for (int i = 0; i < 1000; ++i) {
        const Mat2 A = rng.orientation_preserving_matrix(-2.0, 2.0);
        const Color c1 = gray(rng.uniform()), c2 = gray(rng.uniform());
        const double base = psi_eval(m, c1, c2, A);
        const double rotated = psi_eval(m, c1, c2, rng.rotation() * A * rng.rotation());
        CHECK(std::abs(rotated - base) <= 1e-12 * (1.0 + base));
    }
}

TEST_CASE("matching: zero set of psi is c1 = c2 and A in SO(2)") {
    const EnergyModel m = EnergyModel::standard();
    Rng rng(4);
    for (int i = 0; i < 100; ++i) {
        const Mat2 Q = rng.rotation();
        const Color c = gray(rng.uniform());
        CHECK(psi_eval(m, c, c, Q) <= 1e-12);
    }
    // sampled grid: small psi forces intensity match and A near SO(2)
    for (double dc : {0.0, 5e-4, 2e-3, 0.05, 0.3}) {
        for (double dv : {0.0, 1e-4, 1e-3, 1e-2, 0.2}) {
            const Mat2 A = rng.rotation() * Mat2::diag(1.0 + dv, 1.0 - 0.5 * dv) * rng.rotation();
            const Color c1 = gray(0.5), c2 = gray(0.5 + dc);
            if (psi_eval(m, c1, c2, A) < 1e-6) {
                CHECK(dc < 1e-3);
                CHECK(distance_to_rotations(A) < 1e-2);
            }
        }
    }
}

TEST_CASE("mismatch forms") {
    const Color p = gray(0.2), q = gray(0.7);

    SECTION("zero at matched intensities, identity jacobian") {
        for (auto form : {MismatchForm::Form8a, MismatchForm::Form8b}) {
            const MismatchParams mp = MismatchParams::make(form);
            CHECK(mismatch_eval(mp, p, p, 1.0) == 0.0);
            CHECK(mismatch_eval(mp, q, q, 1.0) == 0.0);
        }
    }
    SECTION("form 8a value") {
        const MismatchParams mp = MismatchParams::make(MismatchForm::Form8a);
        CHECK(mismatch_eval(mp, p, q, 1.0) == Catch::Approx(0.5)); // 2*(0.5)^2
    }
    SECTION("interchange identity f(c1,c2,d) = d*f(c2,c1,1/d)") {
        Rng rng(5);
        for (auto form : {MismatchForm::Form8a, MismatchForm::Form8b}) {
            const MismatchParams mp = MismatchParams::make(form);
            CHECK(mismatch_eval(mp, p, q, 2.0) ==
                  Catch::Approx(2.0 * mismatch_eval(mp, q, p, 0.5)).epsilon(1e-12));
            for (int i = 0; i < 200; ++i) {
                const Color a = gray(rng.uniform()), b = gray(rng.uniform());
                const double d = rng.log_uniform(0.1, 10.0);
                const double lhs = mismatch_eval(mp, a, b, d);
                const double rhs = d * mismatch_eval(mp, b, a, 1.0 / d);
                CHECK(std::abs(lhs - rhs) <= 1e-12 * (1.0 + lhs));
            }
        }
    }
    SECTION("convexity in delta by sampled second differences") {
        for (auto form : {MismatchForm::Form8a, MismatchForm::Form8b}) {
            const MismatchParams mp = MismatchParams::make(form);
            for (int i = 1; i <= 60; ++i) {
                const double d = 0.05 * i;
                const double s = 1e-4 * d;
                const double second = mismatch_eval(mp, p, q, d + s) -
                                      2 * mismatch_eval(mp, p, q, d) +
                                      mismatch_eval(mp, p, q, d - s);
                CHECK(second >= -1e-10);
            }
        }
    }
    SECTION("nonnegativity and errors") {
        const MismatchParams mp = MismatchParams::make(MismatchForm::Form8b);
        Rng rng(6);
        for (int i = 0; i < 200; ++i)
            CHECK(mismatch_eval(mp, gray(rng.uniform()), gray(rng.uniform()),
                                rng.log_uniform(0.01, 100.0)) >= 0.0);
        CHECK_THROWS_AS(mismatch_eval(mp, p, q, 0.0), OrientationError);
        CHECK_THROWS_AS(mismatch_eval(mp, p, q, -1.0), OrientationError);
    }
}

TEST_CASE("interchange symmetry of full psi, both forms") {
    Rng rng(7);
    for (auto form : {MismatchForm::Form8a, MismatchForm::Form8b}) {
        EnergyModel m{ElasticParams::singular_value(), MismatchParams::make(form)};
        for (int i = 0; i < 1000; ++i) {
            const Mat2 A = rng.orientation_preserving_matrix(-2.0, 2.0, 0.05);
            const Color c1 = gray(rng.uniform()), c2 = gray(rng.uniform());
            const double lhs = psi_eval(m, c1, c2, A);
            const double rhs = A.det() * psi_eval(m, c2, c1, A.inverse());
            CHECK(std::abs(lhs - rhs) <= 1e-10 * (1.0 + lhs));
        }
    }
}

TEST_CASE("psi gradient") {
    const EnergyModel m = EnergyModel::standard();
    SECTION("zero at the global minimum") {
        const Color c = gray(0.3);
        CHECK(psi_grad_A(m, c, c, Mat2::identity()).norm() < 1e-12);
    }
    SECTION("diagonal A with matched intensities gives diagonal gradient") {
        const Color c = gray(0.3);
        const Mat2 g = psi_grad_A(m, c, c, Mat2::diag(2.0, 1.0));
        CHECK(std::abs(g.b) < 1e-13);
        CHECK(std::abs(g.c) < 1e-13);
    }
    SECTION("matches finite differences on random inputs") {
        Rng rng(8);
        for (int i = 0; i < 1000; ++i) {
            const Mat2 A = rng.matrix_with_singular_values(0.3, 3.0);
            const Color c1 = gray(rng.uniform()), c2 = gray(rng.uniform());
            const Mat2 g = psi_grad_A(m, c1, c2, A);
            CHECK(rel_error(fd_psi_grad(m, c1, c2, A), g) <= 1e-5);
        }
    }
    SECTION("stable at coincident singular values") {
        Rng rng(9);
        for (int i = 0; i < 200; ++i) {
            const double lambda = rng.log_uniform(0.5, 2.0);
            const Mat2 A = rng.rotation() * lambda; // v1 == v2 exactly
            const Color c1 = gray(rng.uniform()), c2 = gray(rng.uniform());
            const Mat2 g = psi_grad_A(m, c1, c2, A);
            CHECK(rel_error(fd_psi_grad(m, c1, c2, A), g) <= 1e-5);
            // and just off the conformal point
            const Mat2 B = A * Mat2::diag(1.0 + 1e-9, 1.0);
            CHECK(rel_error(psi_grad_A(m, c1, c2, B), g) <= 1e-6);
        }
    }
}

TEST_CASE("fluid energy depends on A only through det") {
    const ElasticParams fluid = ElasticParams::fluid();
    CHECK(fluid.big_h(1.0) == Catch::Approx(0.0).margin(1e-14)); // 2*2 + h(1) = 4 - 4
    CHECK(fluid_energy(fluid, Mat2::identity()) == Catch::Approx(0.0).margin(1e-14));

    Rng rng(10);
    for (int i = 0; i < 200; ++i) {
        const Mat2 A = rng.orientation_preserving_matrix(-2.0, 2.0);
        const Mat2 QA = rng.rotation() * A;
        CHECK(fluid_energy(fluid, QA) ==
              Catch::Approx(fluid_energy(fluid, A)).epsilon(1e-12).margin(1e-13));
    }
    CHECK(fluid_energy(fluid, Mat2::diag(2.0, 0.5)) ==
          Catch::Approx(fluid_energy(fluid, Mat2::identity())).margin(1e-14));
}

TEST_CASE("cauchy stress") {
    SECTION("fluid stress is spherical for every M") {
        const ElasticParams fluid = ElasticParams::fluid();
        Rng rng(11);
        for (int i = 0; i < 100; ++i) {
            const Mat2 M = rng.orientation_preserving_matrix(-2.0, 2.0, 0.05);
            const CauchyStress s = cauchy_stress(fluid, M);
            CHECK(s.deviation <= 1e-10);
            // DPsi(M)M^T = H'(det M) det M * 1
            const double pressure = fluid.big_h_deriv(M.det()) * M.det();
            CHECK((s.stress - Mat2::diag(pressure, pressure)).norm() <= 1e-10 * (1 + std::abs(pressure)));
        }
    }
    SECTION("singular-value stress is spherical at conformal M only") {
        const ElasticParams sv = ElasticParams::singular_value();
        CHECK(cauchy_stress(sv, Mat2::identity() * 1.7).deviation <= 1e-12);
        const CauchyStress shear = cauchy_stress(sv, Mat2{1.0, 1.0, 0.0, 1.0});
        CHECK(shear.deviation > 0.1);
        // cross-check the stress against the finite-difference gradient
        const EnergyModel m{sv, MismatchParams::make(MismatchForm::Form8a, 0.0)};
        const Mat2 fd = fd_psi_grad(m, gray(0), gray(0), Mat2{1.0, 1.0, 0.0, 1.0});
        const Mat2 fd_stress = fd * Mat2{1.0, 1.0, 0.0, 1.0}.transpose();
        CHECK((shear.stress - fd_stress).norm() <= 1e-5 * fd_stress.norm());
    }
}

TEST_CASE("coercivity certificate") {
    const EnergyModel m = EnergyModel::standard();

    SECTION("single point margin at the identity") {
        // margin = psi - C*(|I|^4 + |I|^4) + C0 = -2*(1/2)*(2+2) - h_min
        const double C0 = -m.elastic.h.min_value;
        const double margin = 0.0 - 0.5 * (4.0 + 4.0) + C0;
        CHECK(margin == Catch::Approx(C0 - 4.0));
        CHECK(margin > 0.0);
    }
    SECTION("sampled certificate passes") {
        const CoercivityCertificate cert = certify_coercivity(m, 2000);
        CHECK(cert.C == Catch::Approx(0.5));
        CHECK(cert.p == Catch::Approx(4.0));
        CHECK(cert.pass);
        CHECK(cert.worst_margin >= 0.0);
        CHECK(cert.worst_det_bound_margin >= 0.0);
    }
    SECTION("margin grows like t^alpha along diag(t, 1/t)") {
        auto margin = [&](double t) {
            const Mat2 A = Mat2::diag(t, 1.0 / t);
            const double C0 = -m.elastic.h.min_value;
            const double growth = std::pow(A.squared_norm(), 2.0) +
                                  A.det() * std::pow(A.squared_norm() / (A.det() * A.det()), 2.0);
            return psi_eval(m, gray(0.2), gray(0.2), A) - 0.5 * growth + C0;
        };
        const double r1 = margin(20.0) / margin(10.0);
        CHECK(r1 == Catch::Approx(16.0).epsilon(0.05));
        CHECK(margin(100.0) > margin(10.0));
    }
    SECTION("fluid family fails (H2), loudly") {
        const EnergyModel fluid{ElasticParams::fluid(), MismatchParams::make()};
        const CoercivityCertificate cert = certify_coercivity(fluid, 2000);
        CHECK_FALSE(cert.pass);
        CHECK(cert.worst_margin < 0.0);
    }
}

TEST_CASE("Psi is nonnegative with zero set exactly SO(2)") {
    const ElasticParams sv = ElasticParams::singular_value();
    auto phi = [&](double lv1, double lv2) {
        const double v1 = std::exp(lv1), v2 = std::exp(lv2);
        return elastic_eval(sv, Mat2::diag(v1, v2));
    };
    // gradient-free: coarse log-grid scan, then pattern-search refinement
    double best = 1e300, b1 = 0.0, b2 = 0.0;
    const double L = std::log(1e3);
    for (int i = 0; i <= 160; ++i)
        for (int j = 0; j <= 160; ++j) {
            const double l1 = -L + 2 * L * i / 160.0, l2 = -L + 2 * L * j / 160.0;
            const double v = phi(l1, l2);
            if (v < best) { best = v; b1 = l1; b2 = l2; }
        }
    double step = 2 * L / 160.0;
    while (step > 1e-10) {
        bool improved = false;
        const double cand[4][2] = {{b1 + step, b2}, {b1 - step, b2}, {b1, b2 + step}, {b1, b2 - step}};
        for (const auto& c : cand) {
            const double v = phi(c[0], c[1]);
            if (v < best) { best = v; b1 = c[0]; b2 = c[1]; improved = true; }
        }
        if (!improved) step *= 0.5;
    }
    CHECK(best >= -1e-12);
    CHECK(best <= 1e-8);
    CHECK(std::abs(std::exp(b1) - 1.0) <= 1e-4);
    CHECK(std::abs(std::exp(b2) - 1.0) <= 1e-4);
}

TEST_CASE("parameter validation") {
    CHECK_THROWS_AS(ElasticParams::singular_value(2.0), InvalidInputError); // alpha must exceed n
    CHECK_THROWS_AS(ElasticParams::singular_value(4.0, -1.0), InvalidInputError);
    CHECK_THROWS_AS(MismatchParams::make(MismatchForm::Form8a, -2.0), InvalidInputError);
    const EnergyModel m = EnergyModel::standard();
    CHECK_THROWS_AS(psi_eval(m, gray(0), gray(0), Mat2::diag(1.0, -1.0)), OrientationError);
}
