#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "slidereg/assembly.hpp"
#include "slidereg/energy.hpp"
#include "slidereg/pnm_io.hpp"
#include "slidereg/report_io.hpp"
#include "slidereg/solver.hpp"

namespace slidereg {

/// Shear stationarity gap of y = Mx, M = [[1,1],[0,1]], singular-value
/// family, 33x33: measured 2.0223 on the first run and frozen at half that
/// value as a regression floor (the analysis only gives "nonzero").
inline constexpr double kShearGradientThreshold = 1.0;

struct ExperimentSpec {
    std::string id;
    std::uint64_t seed = 20240101;
    long samples = 0;       // 0 = per-experiment default
    double tolerance = -1.0; // negative = per-experiment default
    int resolution = 33;
    std::string artifact_dir; // artifacts written when non-empty

    static const std::vector<std::string>& ids() {
        static const std::vector<std::string> all = {
            "isotropy",          "matching",        "interchange",
            "coercivity",        "jensen-scaling",  "scaling-recovery",
            "rigid-recovery",    "shear-nonstationarity", "fluid-degeneracy",
            "gradcheck",         "second-gradient-recovery"};
        return all;
    }
};

struct Certificate {
    std::string id;
    bool pass = false;
    bool exploratory = false;
    double worst_margin = 0.0;
    long sample_count = 0;
    double tolerance = 0.0;
    Json details;
    std::vector<std::string> artifacts;

    Json to_json() const {
        Json j;
        j["experiment"] = id;
        j["pass"] = pass;
        if (exploratory) j["exploratory"] = true;
        j["worst_margin"] = worst_margin;
        j["sample_count"] = sample_count;
        j["tolerance"] = tolerance;
        j["details"] = details;
        j["artifacts"] = artifacts;
        return j;
    }
};

namespace fixtures {

/// Smooth analytic intensity with no symmetry of the square: breaks the
/// rotational/reflection ties of the scaling-recovery uniqueness argument.
inline Image asymmetric_smooth(const Domain2& dom) {
    const Vec2 c{dom.origin.x + 0.62 * dom.width, dom.origin.y + 0.31 * dom.height};
    const double s = 0.18 * std::min(dom.width, dom.height);
    AnalyticSource src;
    src.channels = 1;
    src.value = [c, s](Vec2 x) {
        const double wave = std::sin(3.0 * x.x + 0.7) * std::cos(2.0 * x.y - 0.4);
        const double bump = std::exp(-(x - c).squared_norm() / (2 * s * s));
        return Color{0.45 + 0.25 * wave + 0.25 * bump, 0.0, 0.0};
    };
    src.gradient = [c, s](Vec2 x) {
        const double bump = std::exp(-(x - c).squared_norm() / (2 * s * s));
        ColorGrad g;
        g.g[0] = Vec2{0.25 * 3.0 * std::cos(3.0 * x.x + 0.7) * std::cos(2.0 * x.y - 0.4),
                      -0.25 * 2.0 * std::sin(3.0 * x.x + 0.7) * std::sin(2.0 * x.y - 0.4)} +
                 (x - c) * (-0.25 * bump / (s * s));
        return g;
    };
    return Image(dom, std::move(src));
}

} // namespace fixtures

namespace detail {

inline long defaulted(long samples, long fallback) { return samples > 0 ? samples : fallback; }
inline double defaulted(double tol, double fallback) { return tol >= 0.0 ? tol : fallback; }

/// Random feasible states for the jensen experiment keep the four corner
/// nodes pinned so the boundary cycle covers the target perimeter exactly.
inline DeformationState jensen_random_state(const TriMesh& mesh, const BoundaryChart& chart,
                                            const DeformationState& base, Rng& rng,
                                            double amplitude) {
    DeformationState st = perturbed_state(mesh, chart, base, rng, amplitude);
    for (int s = 0; s < mesh.boundary_count(); ++s)
        if (mesh.boundary_edge_fraction(s).second == 0.0)
            st.boundary_t[static_cast<std::size_t>(s)] = base.boundary_t[static_cast<std::size_t>(s)];
    const FeasibilityReport fr = feasibility_report(mesh, chart, st);
    if (!(fr.monotone && fr.min_det > 0.0)) return base;
    return st;
}

inline double max_nodal_deviation(const TriMesh& mesh, const std::vector<Vec2>& pos,
                                  const AffineMap2& reference) {
    double worst = 0.0;
    for (int n = 0; n < mesh.node_count(); ++n)
        worst = std::max(worst,
                         (pos[static_cast<std::size_t>(n)] - reference(mesh.nodes[static_cast<std::size_t>(n)])).norm());
    return worst;
}

inline void write_solver_artifacts(const ExperimentSpec& spec, Certificate& cert,
                                   const Image& img1, const TriMesh& mesh,
                                   const BoundaryChart& chart, const SolveReport& rep,
                                   const Domain2& target_domain) {
    if (spec.artifact_dir.empty()) return;
    namespace fs = std::filesystem;
    const fs::path dir = fs::path(spec.artifact_dir) / spec.id;
    fs::create_directories(dir);
    const std::string trace_path = (dir / "trace.csv").string();
    write_text_file(trace_path, trace_to_csv(rep.trace));
    cert.artifacts.push_back(trace_path);
    const std::string def_path = (dir / "deformation.csv").string();
    write_text_file(def_path, deformation_to_csv(mesh, chart, rep.state));
    cert.artifacts.push_back(def_path);
    const std::string warp_path = (dir / "warped.pgm").string();
    write_pnm(warp_path, pullback_warp(img1, mesh, rep.positions, target_domain, 128, 128));
    cert.artifacts.push_back(warp_path);
}

inline void finalize(const ExperimentSpec& spec, Certificate& cert) {
    if (spec.artifact_dir.empty()) return;
    namespace fs = std::filesystem;
    const fs::path dir = fs::path(spec.artifact_dir) / spec.id;
    fs::create_directories(dir);
    const std::string path = (dir / "certificate.json").string();
    write_text_file(path, cert.to_json().dump(2) + "\n");
}

inline Certificate run_isotropy(const ExperimentSpec& spec) {
    Certificate cert;
    cert.id = spec.id;
    cert.sample_count = defaulted(spec.samples, 1000);
    cert.tolerance = defaulted(spec.tolerance, 1e-12);
    const EnergyModel m = EnergyModel::standard();
    Rng rng(spec.seed);
    double worst = 0.0;
    for (long i = 0; i < cert.sample_count; ++i) {
        const Mat2 A = rng.orientation_preserving_matrix(-2.0, 2.0);
        const Color c1{rng.uniform(), 0, 0}, c2{rng.uniform(), 0, 0};
        const double base = psi_eval(m, c1, c2, A);
        const double rot = psi_eval(m, c1, c2, rng.rotation() * A * rng.rotation());
        worst = std::max(worst, std::abs(rot - base) / (1.0 + base));
    }
    cert.worst_margin = worst;
    cert.pass = worst <= cert.tolerance;
    cert.details["model"] = "singular-value alpha=4, mismatch 8a";
    return cert;
}

inline Certificate run_matching(const ExperimentSpec& spec) {
    Certificate cert;
    cert.id = spec.id;
    cert.sample_count = defaulted(spec.samples, 100);
    cert.tolerance = defaulted(spec.tolerance, 1e-12);
    const EnergyModel m = EnergyModel::standard();
    Rng rng(spec.seed);
    double worst_rot = 0.0;
    for (long i = 0; i < cert.sample_count; ++i) {
        const Color c{rng.uniform(), 0, 0};
        worst_rot = std::max(worst_rot, psi_eval(m, c, c, rng.rotation()));
    }
    // implication grid: psi < 1e-6 forces |c1-c2| < 1e-3 and dist(A,SO2) < 1e-2
    bool implication_ok = true;
    long grid_hits = 0;
    for (double dc : {0.0, 1e-4, 5e-4, 2e-3, 0.03, 0.3})
        for (double dv : {0.0, 1e-4, 1e-3, 5e-3, 0.05, 0.4})
            for (int r = 0; r < 4; ++r) {
                const Mat2 A =
                    rng.rotation() * Mat2::diag(1.0 + dv, 1.0 - 0.7 * dv) * rng.rotation();
                const Color c1{0.5, 0, 0}, c2{0.5 + dc, 0, 0};
                if (psi_eval(m, c1, c2, A) < 1e-6) {
                    ++grid_hits;
                    if (!(dc < 1e-3 && distance_to_rotations(A) < 1e-2)) implication_ok = false;
                }
            }
    cert.worst_margin = worst_rot;
    cert.pass = worst_rot <= cert.tolerance && implication_ok && grid_hits > 0;
    cert.details["implication_ok"] = implication_ok;
    cert.details["grid_samples_below_1e-6"] = grid_hits;
    return cert;
}

inline Certificate run_interchange(const ExperimentSpec& spec) {
    Certificate cert;
    cert.id = spec.id;
    cert.sample_count = defaulted(spec.samples, 1000);
    cert.tolerance = defaulted(spec.tolerance, 1e-10);
    Rng rng(spec.seed);
    double worst = 0.0;
    for (auto form : {MismatchForm::Form8a, MismatchForm::Form8b}) {
        const EnergyModel m{ElasticParams::singular_value(), MismatchParams::make(form)};
        for (long i = 0; i < cert.sample_count; ++i) {
            const Mat2 A = rng.orientation_preserving_matrix(-2.0, 2.0, 0.05);
            const Color c1{rng.uniform(), 0, 0}, c2{rng.uniform(), 0, 0};
            const double lhs = psi_eval(m, c1, c2, A);
            const double rhs = A.det() * psi_eval(m, c2, c1, A.inverse());
            worst = std::max(worst, std::abs(lhs - rhs) / (1.0 + lhs));
        }
    }
    cert.worst_margin = worst;
    cert.pass = worst <= cert.tolerance;
    cert.details["forms"] = {"8a", "8b"};
    return cert;
}

inline Certificate run_coercivity(const ExperimentSpec& spec) {
    Certificate cert;
    cert.id = spec.id;
    cert.sample_count = defaulted(spec.samples, 10000);
    cert.tolerance = defaulted(spec.tolerance, 0.0);
    const EnergyModel sv = EnergyModel::standard();
    const CoercivityCertificate main = certify_coercivity(sv, cert.sample_count, spec.seed);
    const EnergyModel fluid{ElasticParams::fluid(), MismatchParams::make()};
    const CoercivityCertificate counter = certify_coercivity(fluid, cert.sample_count, spec.seed);
    cert.worst_margin = main.worst_margin;
    cert.pass = main.pass && counter.worst_margin < 0.0;
    cert.details["C"] = main.C;
    cert.details["C0"] = main.C0;
    cert.details["p"] = main.p;
    cert.details["C1"] = main.C1;
    cert.details["det_bound_worst_margin"] = main.worst_det_bound_margin;
    cert.details["fluid_worst_margin"] = counter.worst_margin;
    cert.details["fluid_fails_as_required"] = counter.worst_margin < 0.0;
    return cert;
}

inline Certificate run_gradcheck(const ExperimentSpec& spec) {
    Certificate cert;
    cert.id = spec.id;
    cert.sample_count = defaulted(spec.samples, 100);
    cert.tolerance = defaulted(spec.tolerance, 1e-5);
    const EnergyModel m = EnergyModel::standard();
    Rng rng(spec.seed);
    double worst = 0.0;

    // pointwise d psi / dA against central differences, conformal points included
    for (long i = 0; i < cert.sample_count; ++i) {
        Mat2 A = (i % 4 == 3) ? rng.rotation() * rng.log_uniform(0.5, 2.0)
                              : rng.matrix_with_singular_values(0.3, 3.0);
        const Color c1{rng.uniform(), 0, 0}, c2{rng.uniform(), 0, 0};
        const Mat2 g = psi_grad_A(m, c1, c2, A);
        const double h = 1e-6 * (1.0 + A.norm());
        Mat2 fd;
        double* out[4] = {&fd.a, &fd.b, &fd.c, &fd.d};
        for (int k = 0; k < 4; ++k) {
            Mat2 Ap = A, Am = A;
            double* pp[4] = {&Ap.a, &Ap.b, &Ap.c, &Ap.d};
            double* pm[4] = {&Am.a, &Am.b, &Am.c, &Am.d};
            *pp[k] += h;
            *pm[k] -= h;
            *out[k] = (psi_eval(m, c1, c2, Ap) - psi_eval(m, c1, c2, Am)) / (2 * h);
        }
        worst = std::max(worst, (fd - g).norm() / std::max({g.norm(), fd.norm(), 1e-8}));
    }

    // assembled DOF gradient against central differences of the assembled
    // energy, on random feasible states of a small mesh (conformal states
    // make every triangle hit the v1 == v2 branch)
    const Domain2 dom = Domain2::unit_square();
    const Image img1 = fixtures::asymmetric_smooth(dom);
    for (long rep = 0; rep < cert.sample_count; ++rep) {
        const double lambda = (rep % 3 == 0) ? 1.0 : rng.log_uniform(0.8, 1.6);
        const Domain2 tdom({0.0, 0.0}, lambda, lambda);
        const Image img2 = transform_image(img1, {Mat2::identity() * lambda, {0.0, 0.0}});
        const BoundaryChart chart = BoundaryChart::rectangle(tdom);
        const TriMesh mesh = build_mesh(dom, 6, 5);
        const DofLayout layout(mesh);
        DeformationState st = affine_state(mesh, chart);
        // rep % 3 == 0 keeps the exact conformal state (v1 == v2 everywhere)
        if (rep % 3 != 0) st = perturbed_state(mesh, chart, st, rng, 0.2);
        const double h2w = (rep % 5 == 0) ? 0.05 : 0.0;
        const std::vector<double> g =
            assemble_gradient(m, img1, img2, mesh, chart, st, h2w);
        std::vector<double> x = pack_state(layout, st);
        for (std::size_t k = 0; k < x.size(); ++k) {
            const double h = 1e-6 * (1.0 + std::abs(x[k]));
            // chart corners carry one-sided tangents; central differences
            // straddling one do not see the same branch
            if (static_cast<int>(k) >= 2 * layout.interior_count &&
                chart.corner_distance(x[k]) <= 64.0 * h)
                continue;
            std::vector<double> xp = x, xm = x;
            xp[k] += h;
            xm[k] -= h;
            const double ep = assemble_energy(m, img1, img2, mesh, chart,
                                              unpack_state(layout, xp), h2w)
                                  .total;
            const double em = assemble_energy(m, img1, img2, mesh, chart,
                                              unpack_state(layout, xm), h2w)
                                  .total;
            const double fd = (ep - em) / (2 * h);
            const double scale = std::max({std::abs(g[k]), std::abs(fd), 1e-4});
            worst = std::max(worst, std::abs(fd - g[k]) / scale);
        }
    }

    cert.worst_margin = worst;
    cert.pass = worst <= cert.tolerance;
    return cert;
}

inline Certificate run_jensen_scaling(const ExperimentSpec& spec) {
    Certificate cert;
    cert.id = spec.id;
    cert.sample_count = defaulted(spec.samples, 1000);
    cert.tolerance = defaulted(spec.tolerance, 1e-10);
    const double lambda = 2.0;
    const EnergyModel m = EnergyModel::standard();
    const Domain2 dom = Domain2::unit_square();
    const Image img1 = fixtures::asymmetric_smooth(dom);
    const Image img2 = transform_image(img1, {Mat2::identity() * lambda, {0.0, 0.0}});
    const BoundaryChart chart = BoundaryChart::rectangle(img2.domain());
    const TriMesh mesh = build_mesh(dom, spec.resolution, spec.resolution);
    const DeformationState base = affine_state(mesh, chart);
    const double target = m.elastic.big_h(lambda * lambda); // Psi(lambda*1)
    Rng rng(spec.seed);
    double worst_slack = std::numeric_limits<double>::infinity();
    bool implication_ok = true;
    long near_equality = 0;
    for (long i = 0; i < cert.sample_count; ++i) {
        DeformationState st;
        if (i == 0) st = base; // exact minimizer: gap 0, distance 0
        else {
            const double amp = (i % 7 == 0) ? 1e-5 : rng.uniform(0.05, 0.5);
            st = jensen_random_state(mesh, chart, base, rng, amp);
        }
        const DiscreteEnergyReport rep = assemble_energy(m, img1, img2, mesh, chart, st);
        const double mean_elastic = rep.elastic / dom.area();
        const double gap = mean_elastic - target;
        worst_slack = std::min(worst_slack, gap);
        if (gap < 1e-6) {
            ++near_equality;
            const std::vector<Vec2> pos = realize_positions(mesh, chart, st);
            const double dist =
                max_nodal_deviation(mesh, pos, {Mat2::identity() * lambda, {0.0, 0.0}});
            if (dist > 1e-4) implication_ok = false;
        }
    }
    cert.worst_margin = worst_slack;
    cert.pass = worst_slack >= -cert.tolerance && implication_ok;
    cert.details["lambda"] = lambda;
    cert.details["near_equality_samples"] = near_equality;
    cert.details["equality_implies_scaling_map"] = implication_ok;
    return cert;
}

inline SolverConfig recovery_config() {
    SolverConfig cfg;
    cfg.max_iterations = 6000;
    cfg.grad_tolerance = 1e-8;
    return cfg;
}

inline Certificate run_scaling_recovery(const ExperimentSpec& spec) {
    Certificate cert;
    cert.id = spec.id;
    cert.tolerance = defaulted(spec.tolerance, 1e-3);
    const EnergyModel m = EnergyModel::standard();
    const Domain2 dom = Domain2::unit_square();
    const Image img1 = fixtures::asymmetric_smooth(dom);
    Rng rng(spec.seed);
    double worst = 0.0;
    Json runs = Json::array();
    for (double lambda : {0.75, 1.5, 2.0}) {
        const AffineMap2 T{Mat2::identity() * lambda, {0.0, 0.0}};
        const Image img2 = transform_image(img1, T);
        const BoundaryChart chart = BoundaryChart::rectangle(img2.domain());
        const TriMesh mesh = build_mesh(dom, spec.resolution, spec.resolution);
        const DeformationState seed =
            perturbed_state(mesh, chart, affine_state(mesh, chart), rng, 0.25);
        MinimizeOptions opts;
        opts.reference_map = [T](Vec2 x) { return T(x); };
        const SolveReport rep =
            minimize(m, img1, img2, mesh, chart, recovery_config(), seed, opts);
        const double rel_dev = rep.recovery_max_deviation / chart.diameter();
        worst = std::max(worst, rel_dev);
        Json r;
        r["lambda"] = lambda;
        r["relative_deviation"] = rel_dev;
        r["iterations"] = rep.iterations;
        r["termination"] = rep.termination;
        r["final_energy"] = rep.final_energy;
        runs.push_back(r);
        if (lambda == 1.5) write_solver_artifacts(spec, cert, img1, mesh, chart, rep,
                                                  img2.domain());
        cert.sample_count++;
    }
    cert.worst_margin = worst;
    cert.pass = worst <= cert.tolerance;
    cert.details["runs"] = runs;
    return cert;
}

inline Certificate run_rigid_recovery(const ExperimentSpec& spec) {
    Certificate cert;
    cert.id = spec.id;
    cert.tolerance = defaulted(spec.tolerance, 1e-3);
    cert.sample_count = 1;
    const EnergyModel m = EnergyModel::standard();
    const Domain2 dom = Domain2::unit_square();
    const Image img1 = fixtures::asymmetric_smooth(dom);
    const AffineMap2 E = AffineMap2{Mat2::rotation(0.3), {0.0, 0.0}}
                             .compose(AffineMap2{Mat2::identity(), {-0.5, -0.5}});
    const AffineMap2 rigid = AffineMap2{Mat2::identity(), {0.9, 0.7}}.compose(E);
    // target = rigid(Omega1), a rotated unit square; the image's stored domain
    // is its bounding box but the solve target uses the exact corners
    const Image img2 = transform_image(img1, rigid);
    const auto rc = dom.corners();
    const BoundaryChart chart(rigid(rc[0]), rigid(rc[1]), rigid(rc[2]), rigid(rc[3]));
    const TriMesh mesh = build_mesh(dom, spec.resolution, spec.resolution);
    Rng rng(spec.seed);
    const DeformationState seed =
        perturbed_state(mesh, chart, affine_state(mesh, chart), rng, 0.25);
    MinimizeOptions opts;
    opts.reference_map = [rigid](Vec2 x) { return rigid(x); };
    const SolveReport rep = minimize(m, img1, img2, mesh, chart, recovery_config(), seed, opts);
    const double rel_dev = rep.recovery_max_deviation / chart.diameter();
    cert.worst_margin = rel_dev;
    cert.pass = rel_dev <= cert.tolerance &&
                rep.final_energy <= 1e-8 * rep.initial_energy;
    cert.details["rotation"] = 0.3;
    cert.details["final_energy"] = rep.final_energy;
    cert.details["initial_energy"] = rep.initial_energy;
    cert.details["energy_ratio"] = rep.final_energy / rep.initial_energy;
    cert.details["termination"] = rep.termination;
    write_solver_artifacts(spec, cert, img1, mesh, chart, rep, img2.domain());
    return cert;
}

inline Certificate run_shear_nonstationarity(const ExperimentSpec& spec) {
    Certificate cert;
    cert.id = spec.id;
    cert.tolerance = defaulted(spec.tolerance, kShearGradientThreshold);
    cert.sample_count = 1;
    const Domain2 dom = Domain2::unit_square();
    const Image img1 = fixtures::asymmetric_smooth(dom);
    const Mat2 M{1.0, 1.0, 0.0, 1.0};
    const AffineMap2 T{M, {0.0, 0.0}};
    const Image img2 = transform_image(img1, T);
    const auto rc = dom.corners();
    const BoundaryChart chart(T(rc[0]), T(rc[1]), T(rc[2]), T(rc[3]));
    const TriMesh mesh = build_mesh(dom, spec.resolution, spec.resolution);
    const DeformationState linear_state = affine_state(mesh, chart);

    const EnergyModel sv{ElasticParams::singular_value(),
                         MismatchParams::make(MismatchForm::Form8a, 0.0)};
    const DiscreteEnergyReport e = assemble_energy(sv, img1, img2, mesh, chart, linear_state);
    const std::vector<double> g = assemble_gradient(sv, img1, img2, mesh, chart, linear_state);
    double norm2 = 0.0;
    for (double v : g) norm2 += v * v;
    const double normalized = std::sqrt(norm2) / (1.0 + e.total);

    // contrast: the fluid family is stationary at every constant-determinant
    // sliding state (scaled shear, so H'(det) != 0 is actually exercised)
    const Mat2 Ms = M * 1.2;
    const AffineMap2 Ts{Ms, {0.0, 0.0}};
    const BoundaryChart chart_s(Ts(rc[0]), Ts(rc[1]), Ts(rc[2]), Ts(rc[3]));
    const EnergyModel fluid{ElasticParams::fluid(),
                            MismatchParams::make(MismatchForm::Form8a, 0.0)};
    const std::vector<double> gf =
        assemble_gradient(fluid, img1, img2, mesh, chart_s, affine_state(mesh, chart_s));
    double fluid_inf = 0.0;
    for (double v : gf) fluid_inf = std::max(fluid_inf, std::abs(v));

    cert.worst_margin = normalized;
    cert.pass = normalized >= cert.tolerance && fluid_inf <= 1e-8;
    cert.details["normalized_gradient_norm"] = normalized;
    cert.details["energy_at_linear_state"] = e.total;
    cert.details["fluid_gradient_inf_norm"] = fluid_inf;
    cert.details["frozen_threshold"] = kShearGradientThreshold;
    return cert;
}

inline Certificate run_fluid_degeneracy(const ExperimentSpec& spec) {
    Certificate cert;
    cert.id = spec.id;
    cert.tolerance = defaulted(spec.tolerance, 1e-6);
    cert.sample_count = 2;
    const EnergyModel fluid{ElasticParams::fluid(),
                            MismatchParams::make(MismatchForm::Form8a, 0.0)};
    const Domain2 dom = Domain2::unit_square();
    const Image img = fixtures::asymmetric_smooth(dom);
    const TriMesh mesh = build_mesh(dom, spec.resolution, spec.resolution);

    // seed A: perturbed identity; seed B: perturbed quarter-turn (same target,
    // corner order rotated by one). Interior-only perturbations keep the
    // boundary image area of both seeds exactly |Omega2|.
    const BoundaryChart chart = BoundaryChart::rectangle(dom);
    const auto c = dom.corners();
    const BoundaryChart chart_rot(c[1], c[2], c[3], c[0]);

    SolverConfig cfg = recovery_config();
    Rng rng_a(spec.seed), rng_b(spec.seed + 1);
    const DeformationState seed_a =
        perturbed_state(mesh, chart, affine_state(mesh, chart), rng_a, 0.25, true);
    const DeformationState seed_b =
        perturbed_state(mesh, chart_rot, affine_state(mesh, chart_rot), rng_b, 0.25, true);

    const SolveReport rep_a = minimize(fluid, img, img, mesh, chart, cfg, seed_a);
    const SolveReport rep_b = minimize(fluid, img, img, mesh, chart_rot, cfg, seed_b);

    double map_diff = 0.0;
    for (int n = 0; n < mesh.node_count(); ++n)
        map_diff = std::max(map_diff, (rep_a.positions[static_cast<std::size_t>(n)] -
                                       rep_b.positions[static_cast<std::size_t>(n)])
                                          .norm());
    const double e1 = rep_a.final_energy, e2 = rep_b.final_energy;
    // the common infimum is exactly 0 (H(1) = 0), so compare with a floor
    const double energy_gap = std::abs(e1 - e2) / std::max({std::abs(e1), std::abs(e2), 1.0});

    cert.worst_margin = map_diff;
    cert.pass = energy_gap <= cert.tolerance && map_diff >= 1e-2;
    cert.details["energy_a"] = e1;
    cert.details["energy_b"] = e2;
    cert.details["energy_gap"] = energy_gap;
    cert.details["map_difference"] = map_diff;
    cert.details["map_difference_floor"] = 1e-2;
    return cert;
}

inline Certificate run_second_gradient_recovery(const ExperimentSpec& spec) {
    Certificate cert;
    cert.id = spec.id;
    cert.exploratory = true; // conjectured behavior, not proved in the analysis
    cert.tolerance = defaulted(spec.tolerance, 2e-2);
    cert.sample_count = 1;
    const EnergyModel detonly{ElasticParams::fluid(), MismatchParams::make()};
    const Domain2 dom = Domain2::unit_square();
    const Image img1 = fixtures::asymmetric_smooth(dom);
    const Mat2 M{1.0, 0.3, 0.0, 1.0};
    const AffineMap2 T{M, {0.0, 0.0}};
    const Image img2 = transform_image(img1, T);
    const auto rc = dom.corners();
    const BoundaryChart chart(T(rc[0]), T(rc[1]), T(rc[2]), T(rc[3]));
    const TriMesh mesh = build_mesh(dom, spec.resolution, spec.resolution);
    SolverConfig cfg = recovery_config();
    cfg.h2_weight = 1.0;
    Rng rng(spec.seed);
    const DeformationState seed =
        perturbed_state(mesh, chart, affine_state(mesh, chart), rng, 0.2);
    MinimizeOptions opts;
    opts.reference_map = [T](Vec2 x) { return T(x); };
    const SolveReport rep = minimize(detonly, img1, img2, mesh, chart, cfg, seed, opts);
    const double rel_dev = rep.recovery_max_deviation / chart.diameter();
    cert.worst_margin = rel_dev;
    cert.pass = rel_dev <= cert.tolerance;
    cert.details["shear"] = 0.3;
    cert.details["h2_weight"] = cfg.h2_weight;
    cert.details["termination"] = rep.termination;
    cert.details["final_energy"] = rep.final_energy;
    write_solver_artifacts(spec, cert, img1, mesh, chart, rep, img2.domain());
    return cert;
}

} // namespace detail

/// Runs one named experiment; deterministic given (id, seed, config).
inline Certificate run_experiment(const ExperimentSpec& spec) {
    Certificate cert;
    if (spec.id == "isotropy") cert = detail::run_isotropy(spec);
    else if (spec.id == "matching") cert = detail::run_matching(spec);
    else if (spec.id == "interchange") cert = detail::run_interchange(spec);
    else if (spec.id == "coercivity") cert = detail::run_coercivity(spec);
    else if (spec.id == "jensen-scaling") cert = detail::run_jensen_scaling(spec);
    else if (spec.id == "scaling-recovery") cert = detail::run_scaling_recovery(spec);
    else if (spec.id == "rigid-recovery") cert = detail::run_rigid_recovery(spec);
    else if (spec.id == "shear-nonstationarity") cert = detail::run_shear_nonstationarity(spec);
    else if (spec.id == "fluid-degeneracy") cert = detail::run_fluid_degeneracy(spec);
    else if (spec.id == "gradcheck") cert = detail::run_gradcheck(spec);
    else if (spec.id == "second-gradient-recovery")
        cert = detail::run_second_gradient_recovery(spec);
    else throw UnknownExperimentError("unknown experiment '" + spec.id + "'");
    cert.details["seed"] = spec.seed;
    cert.details["resolution"] = spec.resolution;
    detail::finalize(spec, cert);
    return cert;
}

/// experiment,pass,worst_margin,samples,tolerance
inline std::string certificates_to_csv(const std::vector<Certificate>& certs) {
    std::string out = "experiment,pass,worst_margin,samples,tolerance\n";
    for (const Certificate& c : certs)
        out += c.id + "," + (c.pass ? "1" : "0") + "," + format_double(c.worst_margin) + "," +
               std::to_string(c.sample_count) + "," + format_double(c.tolerance) + "\n";
    return out;
}

} // namespace slidereg
