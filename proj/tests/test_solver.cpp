#include <catch2/catch_amalgamated.hpp>

#include "slidereg/solver.hpp"
#include "slidereg/verify.hpp"

using namespace slidereg;

namespace {

struct Fixture {
    Domain2 dom = Domain2::unit_square();
    Image img1 = fixtures::asymmetric_smooth(Domain2::unit_square());
    EnergyModel model = EnergyModel::standard();
};

SolverConfig quick_config() {
    SolverConfig cfg;
    cfg.max_iterations = 4000;
    cfg.grad_tolerance = 1e-8;
    return cfg;
}

} // namespace

TEST_CASE("initial guess is the corner affine map") {
    const Domain2 dom = Domain2::unit_square();
    const TriMesh mesh = build_mesh(dom, 5, 5);
    SECTION("identity") {
        const BoundaryChart chart = BoundaryChart::rectangle(dom);
        const std::vector<Vec2> pos = realize(mesh, chart, initial_guess(mesh, chart));
        for (int n = 0; n < mesh.node_count(); ++n)
            CHECK((pos[static_cast<std::size_t>(n)] - mesh.nodes[static_cast<std::size_t>(n)]).norm() < 1e-13);
    }
    SECTION("anisotropic rectangle") {
        const BoundaryChart chart = BoundaryChart::rectangle(Domain2({0, 0}, 2.0, 1.0));
        const std::vector<Vec2> pos = realize(mesh, chart, initial_guess(mesh, chart));
        for (int t = 0; t < static_cast<int>(mesh.triangles.size()); ++t)
            CHECK((deformation_gradient(mesh, pos, t) - Mat2::diag(2.0, 1.0)).norm() < 1e-12);
    }
}

TEST_CASE("identical pair terminates immediately at zero energy") {
    Fixture f;
    const BoundaryChart chart = BoundaryChart::rectangle(f.dom);
    const TriMesh mesh = build_mesh(f.dom, 9, 9);
    const SolveReport rep = minimize(f.model, f.img1, f.img1, mesh, chart, quick_config(),
                                     initial_guess(mesh, chart));
    CHECK(rep.converged());
    CHECK(rep.iterations == 0);
    CHECK(rep.final_energy <= 1e-12);
}

TEST_CASE("energy trace is strictly decreasing until termination") {
    Fixture f;
    const Image img2 = transform_image(f.img1, {Mat2::identity() * 1.5, {0.0, 0.0}});
    const BoundaryChart chart = BoundaryChart::rectangle(img2.domain());
    const TriMesh mesh = build_mesh(f.dom, 9, 9);
    Rng rng(3);
    const DeformationState seed =
        perturbed_state(mesh, chart, initial_guess(mesh, chart), rng, 0.3);
    const SolveReport rep = minimize(f.model, f.img1, img2, mesh, chart, quick_config(), seed);
    REQUIRE(rep.trace.size() >= 2);
    for (std::size_t i = 1; i < rep.trace.size(); ++i) {
        CHECK(rep.trace[i].total < rep.trace[i - 1].total);
        CHECK(rep.trace[i].min_det > 0.0); // feasible-iterates invariant
    }
    CHECK(rep.feasibility.monotone);
}

TEST_CASE("scaled pair recovery on a small mesh") {
    Fixture f;
    const double lambda = 1.5;
    const Image img2 = transform_image(f.img1, {Mat2::identity() * lambda, {0.0, 0.0}});
    const BoundaryChart chart = BoundaryChart::rectangle(img2.domain());
    const TriMesh mesh = build_mesh(f.dom, 17, 17);
    Rng rng(5);
    const DeformationState seed =
        perturbed_state(mesh, chart, initial_guess(mesh, chart), rng, 0.25);
    MinimizeOptions opts;
    opts.reference_map = [lambda](Vec2 x) { return x * lambda; };
    const SolveReport rep = minimize(f.model, f.img1, img2, mesh, chart, quick_config(), seed, opts);
    CHECK(rep.converged());
    CHECK(rep.recovery_max_deviation <= 1e-3 * chart.diameter());
}

TEST_CASE("landmark variants") {
    Fixture f;
    const BoundaryChart chart = BoundaryChart::rectangle(f.dom);
    const TriMesh mesh = build_mesh(f.dom, 9, 9);
    const SolverConfig cfg = quick_config();

    SECTION("zero landmarks behave like plain minimize") {
        const SolveReport rep = minimize_with_landmarks(f.model, f.img1, f.img1, mesh, chart,
                                                        cfg, initial_guess(mesh, chart), {});
        CHECK(rep.converged());
        CHECK(rep.final_energy <= 1e-12);
    }
    SECTION("landmark pinning the center to itself keeps the identity optimal") {
        LandmarkSet lm;
        lm.pairs.push_back({{0.5, 0.5}, {0.5, 0.5}});
        const SolveReport rep = minimize_with_landmarks(f.model, f.img1, f.img1, mesh, chart,
                                                        cfg, initial_guess(mesh, chart), lm);
        CHECK(rep.converged());
        CHECK(rep.final_energy <= 1e-12);
        REQUIRE(rep.landmark_snap_distances.size() == 1);
        CHECK(rep.landmark_snap_distances[0] <= 1e-12);
    }
    SECTION("displaced landmark forces positive energy, free gradient converges") {
        LandmarkSet lm;
        lm.pairs.push_back({{0.5, 0.5}, {0.6, 0.5}});
        const SolveReport rep = minimize_with_landmarks(f.model, f.img1, f.img1, mesh, chart,
                                                        cfg, initial_guess(mesh, chart), lm);
        CHECK(rep.converged());
        CHECK(rep.final_energy > 1e-4);
        // the pinned node stayed pinned
        const int node = mesh.node_id(4, 4);
        CHECK((rep.positions[static_cast<std::size_t>(node)] - Vec2{0.6, 0.5}).norm() < 1e-12);
    }
    SECTION("duplicate snapping is rejected") {
        LandmarkSet lm;
        lm.pairs.push_back({{0.5, 0.5}, {0.5, 0.5}});
        lm.pairs.push_back({{0.51, 0.5}, {0.52, 0.5}}); // snaps to the same node
        CHECK_THROWS_AS(minimize_with_landmarks(f.model, f.img1, f.img1, mesh, chart, cfg,
                                                initial_guess(mesh, chart), lm),
                        InvalidLandmarksError);
    }
    SECTION("target outside the domain is rejected") {
        LandmarkSet lm;
        lm.pairs.push_back({{0.5, 0.5}, {1.5, 0.5}});
        CHECK_THROWS_AS(minimize_with_landmarks(f.model, f.img1, f.img1, mesh, chart, cfg,
                                                initial_guess(mesh, chart), lm),
                        InvalidLandmarksError);
    }
}

TEST_CASE("multiresolution") {
    Fixture f;
    SECTION("prolongation of an affine state is the same affine state") {
        const Domain2 tdom({0.0, 0.0}, 1.5, 1.5);
        const BoundaryChart chart = BoundaryChart::rectangle(tdom);
        const BoundaryChart ref_chart = BoundaryChart::rectangle(f.dom);
        const TriMesh coarse = build_mesh(f.dom, 9, 9);
        const TriMesh fine = build_mesh(f.dom, 17, 17);
        const DeformationState cs = affine_state(coarse, chart);
        const DeformationState fs = prolong_state(coarse, fine, chart, ref_chart, cs);
        const DeformationState expect = affine_state(fine, chart);
        for (std::size_t i = 0; i < fs.interior.size(); ++i)
            CHECK((fs.interior[i] - expect.interior[i]).norm() < 1e-12);
        for (std::size_t i = 0; i < fs.boundary_t.size(); ++i)
            CHECK(chart.wrap(fs.boundary_t[i]) ==
                  Catch::Approx(chart.wrap(expect.boundary_t[i])).margin(1e-12));
    }
    SECTION("one level reduces to plain minimize") {
        const Image img2 = transform_image(f.img1, {Mat2::identity() * 1.3, {0.0, 0.0}});
        const BoundaryChart chart = BoundaryChart::rectangle(img2.domain());
        SolverConfig cfg = quick_config();
        cfg.levels = 1;
        const SolveReport multi =
            minimize_multiresolution(f.model, f.img1, img2, 9, 9, chart, cfg);
        const TriMesh mesh = build_mesh(f.dom, 9, 9);
        const SolveReport single = minimize(f.model, f.img1, img2, mesh, chart, cfg,
                                            initial_guess(mesh, chart));
        CHECK(multi.final_energy == Catch::Approx(single.final_energy).margin(1e-12));
        CHECK(multi.iterations == single.iterations);
    }
    SECTION("multiresolution is no worse than single level on fixture problems") {
        // checker-style pairs with larger deformations favor continuation
        int no_worse = 0;
        const int total = 10;
        for (int k = 0; k < total; ++k) {
            const double lambda = 0.8 + 0.15 * k;
            const Image base =
                (k % 2 == 0) ? fixtures::asymmetric_smooth(f.dom)
                             : synthetic_image("radial-gradient", f.dom);
            const Image img2 = transform_image(base, {Mat2::identity() * lambda, {0.0, 0.0}});
            const BoundaryChart chart = BoundaryChart::rectangle(img2.domain());
            SolverConfig cfg = quick_config();
            cfg.max_iterations = 400;
            cfg.levels = 3;
            const SolveReport multi =
                minimize_multiresolution(f.model, base, img2, 17, 17, chart, cfg);
            cfg.levels = 1;
            const SolveReport single =
                minimize_multiresolution(f.model, base, img2, 17, 17, chart, cfg);
            if (multi.final_energy <= single.final_energy + 1e-10 * (1.0 + single.final_energy))
                ++no_worse;
        }
        CHECK(no_worse >= 9); // >= 90% of fixtures
    }
}

TEST_CASE("equivariance under axis-preserving rigid motions (Eq. 1a)") {
    Fixture f;
    const double lambda = 1.4;
    const Image img2 = transform_image(f.img1, {Mat2::identity() * lambda, {0.0, 0.0}});
    const BoundaryChart chart = BoundaryChart::rectangle(img2.domain());
    const TriMesh mesh = build_mesh(f.dom, 9, 9);
    const SolveReport base = minimize(f.model, f.img1, img2, mesh, chart, quick_config(),
                                      initial_guess(mesh, chart));

    // translations and half-turns preserve the cell-split diagonal, so the
    // transformed discrete problem is exactly equivalent
    const AffineMap2 E1 = AffineMap2{Mat2::identity(), {0.3, -0.2}}.compose(
        AffineMap2::rotation_about(3.141592653589793, f.dom.center()));
    const AffineMap2 E2 = AffineMap2{Mat2::identity(), {-0.1, 0.25}};
    const Image img1r = transform_image(f.img1, E1);
    const Image img2r = transform_image(img2, E2);
    const TriMesh mesh_r = build_mesh(img1r.domain(), 9, 9);
    const auto tc = img2.domain().corners();
    const BoundaryChart chart_r(E2(tc[0]), E2(tc[1]), E2(tc[2]), E2(tc[3]));
    const SolveReport moved = minimize(f.model, img1r, img2r, mesh_r, chart_r, quick_config(),
                                       initial_guess(mesh_r, chart_r));

    CHECK(moved.final_energy ==
          Catch::Approx(base.final_energy).epsilon(1e-8).margin(1e-10));
    // final maps related by E2 o y o E1^{-1} at matching nodes
    const AffineMap2 E1inv = E1.inverse();
    double worst = 0.0;
    for (int n = 0; n < mesh_r.node_count(); ++n) {
        const Vec2 orig = E1inv(mesh_r.nodes[static_cast<std::size_t>(n)]);
        int found = -1;
        for (int q = 0; q < mesh.node_count(); ++q)
            if ((mesh.nodes[static_cast<std::size_t>(q)] - orig).norm() < 1e-9) {
                found = q;
                break;
            }
        REQUIRE(found >= 0);
        worst = std::max(worst, (moved.positions[static_cast<std::size_t>(n)] -
                                 E2(base.positions[static_cast<std::size_t>(found)]))
                                    .norm());
    }
    CHECK(worst <= 1e-6 * chart.diameter());
}

TEST_CASE("shear non-stationarity and fluid stationarity at the linear state") {
    Fixture f;
    const Mat2 M{1.0, 1.0, 0.0, 1.0};
    const AffineMap2 T{M, {0.0, 0.0}};
    const Image img2 = transform_image(f.img1, T);
    const auto rc = f.dom.corners();
    const BoundaryChart chart(T(rc[0]), T(rc[1]), T(rc[2]), T(rc[3]));
    const TriMesh mesh = build_mesh(f.dom, 17, 17);
    const DeformationState linear = affine_state(mesh, chart);

    const EnergyModel sv{ElasticParams::singular_value(),
                         MismatchParams::make(MismatchForm::Form8a, 0.0)};
    const std::vector<double> g = assemble_gradient(sv, f.img1, img2, mesh, chart, linear);
    double norm2 = 0.0;
    for (double v : g) norm2 += v * v;
    CHECK(std::sqrt(norm2) > 1e-2); // the linear map is NOT stationary

    // a fluid (det-only) energy is stationary at any constant-det sliding state
    const Mat2 Ms = M * 1.2;
    const AffineMap2 Ts{Ms, {0.0, 0.0}};
    const BoundaryChart chart_s(Ts(rc[0]), Ts(rc[1]), Ts(rc[2]), Ts(rc[3]));
    const EnergyModel fluid{ElasticParams::fluid(),
                            MismatchParams::make(MismatchForm::Form8a, 0.0)};
    const std::vector<double> gf =
        assemble_gradient(fluid, f.img1, img2, mesh, chart_s, affine_state(mesh, chart_s));
    double worst = 0.0;
    for (double v : gf) worst = std::max(worst, std::abs(v));
    CHECK(worst <= 1e-9);
}
