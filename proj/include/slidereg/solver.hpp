#pragma once

#include <deque>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "slidereg/assembly.hpp"
#include "slidereg/energy.hpp"
#include "slidereg/image.hpp"
#include "slidereg/mesh.hpp"
#include "slidereg/random.hpp"

namespace slidereg {

struct SolverConfig {
    int max_iterations = 2000;
    double grad_tolerance = 1e-6; // relative to the initial gradient inf-norm
    double sufficient_decrease = 1e-4;
    double backtrack_factor = 0.5;
    int max_backtracks = 60;
    int memory = 10;
    int levels = 3;
    double h2_weight = 0.0;

    void validate() const {
        if (max_iterations < 1 || memory < 1 || levels < 1 || max_backtracks < 1 ||
            !(grad_tolerance > 0.0 && grad_tolerance < 1.0) || !(sufficient_decrease > 0.0) ||
            !(backtrack_factor > 0.0 && backtrack_factor < 1.0) || !(h2_weight >= 0.0))
            throw InvalidInputError("SolverConfig: parameter out of range");
    }
};

struct TraceRow {
    int iteration = 0;
    double total = 0.0;
    double elastic = 0.0;
    double mismatch = 0.0;
    double second_gradient = 0.0;
    double min_det = 0.0;
    double step_length = 0.0;
};

struct SolveReport {
    DeformationState state;
    std::vector<Vec2> positions;
    std::vector<TraceRow> trace;
    std::string termination; // converged | max-iterations | line-search-failure
    int iterations = 0;
    double initial_energy = 0.0;
    double final_energy = 0.0;
    double initial_grad_norm = 0.0;
    double final_grad_norm = 0.0;
    FeasibilityReport feasibility;
    double recovery_max_deviation = -1.0; // vs reference map, when supplied
    std::vector<double> landmark_snap_distances;

    bool converged() const { return termination == "converged"; }
};

struct MinimizeOptions {
    std::function<Vec2(Vec2)> reference_map; // ground truth for recovery metrics
    std::vector<char> frozen;                // per-DOF freeze mask (landmarks)
};

/// Spec'd initial state: the corner affine map between the rectangles.
inline DeformationState initial_guess(const TriMesh& mesh, const BoundaryChart& chart) {
    return affine_state(mesh, chart);
}

namespace detail {

inline double inf_norm(const std::vector<double>& v) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
}
inline double dot(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

struct LoopResult {
    std::string termination;
    int iterations = 0;
    double energy = 0.0;
    double initial_energy = 0.0;
    double initial_grad_norm = 0.0;
    double final_grad_norm = 0.0;
};

/// Shared limited-memory quasi-Newton loop with an Armijo backtracking line
/// search that treats infeasible trial points (try_energy -> nullopt) as
/// +infinity. Curvature pairs are discarded whenever a trial step of the
/// accepted line search was feasibility-clipped or projected, keeping the
/// secant condition meaningful.
///
/// Report: any type with a `double total` member.
/// Project: void(std::vector<double>&) -> returns true when it changed x.
/// OnAccept: void(int iter, const Report&, double step).
template <class Report, class TryEnergy, class Gradient, class Project, class OnAccept>
LoopResult lbfgs_loop(std::vector<double>& x, const SolverConfig& config,
                      const std::vector<char>& frozen, TryEnergy&& try_energy,
                      Gradient&& gradient, Project&& project, OnAccept&& on_accept) {
    auto freeze = [&frozen](std::vector<double>& v) {
        if (frozen.empty()) return;
        for (std::size_t i = 0; i < v.size(); ++i)
            if (frozen[i]) v[i] = 0.0;
    };

    LoopResult result;
    std::optional<Report> rep0 = try_energy(x);
    if (!rep0) throw InfeasibleStateError("minimize: infeasible initial state");
    double energy = rep0->total;
    result.initial_energy = energy;
    on_accept(0, *rep0, 0.0);

    std::vector<double> g = gradient(x);
    freeze(g);
    const double g0 = inf_norm(g);
    result.initial_grad_norm = g0;
    const double grad_target = config.grad_tolerance * g0;

    result.termination = "max-iterations";
    if (g0 <= 1e-14 * (1.0 + std::abs(energy))) result.termination = "converged";
    else {
        std::deque<std::pair<std::vector<double>, std::vector<double>>> pairs; // (s, y)
        for (int iter = 1; iter <= config.max_iterations; ++iter) {
            // two-loop recursion
            std::vector<double> d = g;
            {
                std::vector<double> alpha_coef(pairs.size());
                for (int i = static_cast<int>(pairs.size()) - 1; i >= 0; --i) {
                    const auto& [s, y] = pairs[static_cast<std::size_t>(i)];
                    const double rho = 1.0 / dot(y, s);
                    alpha_coef[static_cast<std::size_t>(i)] = rho * dot(s, d);
                    for (std::size_t k = 0; k < d.size(); ++k)
                        d[k] -= alpha_coef[static_cast<std::size_t>(i)] * y[k];
                }
                if (!pairs.empty()) {
                    const auto& [s, y] = pairs.back();
                    const double gamma = dot(s, y) / dot(y, y);
                    for (double& v : d) v *= gamma;
                }
                for (std::size_t i = 0; i < pairs.size(); ++i) {
                    const auto& [s, y] = pairs[i];
                    const double rho = 1.0 / dot(y, s);
                    const double beta = rho * dot(y, d);
                    for (std::size_t k = 0; k < d.size(); ++k)
                        d[k] += (alpha_coef[i] - beta) * s[k];
                }
                for (double& v : d) v = -v;
            }
            freeze(d);

            double dg = dot(d, g);
            if (!(dg < 0.0)) {
                pairs.clear();
                for (std::size_t k = 0; k < d.size(); ++k) d[k] = -g[k];
                dg = dot(d, g);
                if (!(dg < 0.0)) {
                    result.termination = "converged";
                    break;
                }
            }

            double alpha = 1.0;
            bool clipped = false;
            std::optional<Report> trial;
            std::vector<double> xt(x.size());
            for (int bt = 0; bt <= config.max_backtracks; ++bt) {
                for (std::size_t k = 0; k < x.size(); ++k) xt[k] = x[k] + alpha * d[k];
                if (project(xt)) clipped = true;
                trial = try_energy(xt);
                if (!trial) {
                    clipped = true;
                } else if (trial->total <= energy + config.sufficient_decrease * alpha * dg) {
                    break;
                }
                trial.reset();
                alpha *= config.backtrack_factor;
            }
            if (!trial) {
                result.termination = "line-search-failure";
                break;
            }

            std::vector<double> gn = gradient(xt);
            freeze(gn);

            if (!clipped) {
                std::vector<double> s(x.size()), yv(x.size());
                for (std::size_t k = 0; k < x.size(); ++k) {
                    s[k] = xt[k] - x[k];
                    yv[k] = gn[k] - g[k];
                }
                const double sy = dot(s, yv);
                if (sy > 1e-12 * inf_norm(s) * inf_norm(yv)) {
                    pairs.emplace_back(std::move(s), std::move(yv));
                    if (static_cast<int>(pairs.size()) > config.memory) pairs.pop_front();
                }
            }

            x.swap(xt);
            g.swap(gn);
            energy = trial->total;
            result.iterations = iter;
            on_accept(iter, *trial, alpha);
            if (inf_norm(g) <= grad_target) {
                result.termination = "converged";
                break;
            }
        }
    }
    result.energy = energy;
    result.final_grad_norm = inf_norm(g);
    return result;
}

inline bool no_projection(std::vector<double>&) { return false; }

} // namespace detail

/// Limited-memory quasi-Newton descent over feasible deformation states.
/// Trial steps that lose determinant positivity, boundary monotonicity or
/// domain containment are treated as +infinity by the line search.
inline SolveReport minimize(const EnergyModel& model, const Image& img1, const Image& img2,
                            const TriMesh& mesh, const BoundaryChart& chart,
                            const SolverConfig& config, const DeformationState& initial,
                            const MinimizeOptions& options = {}) {
    config.validate();
    const DofLayout layout(mesh);
    if (!options.frozen.empty() && static_cast<int>(options.frozen.size()) != layout.size())
        throw InvalidInputError("minimize: frozen mask size mismatch");

    auto try_energy = [&](const std::vector<double>& xv) -> std::optional<DiscreteEnergyReport> {
        const DeformationState st = unpack_state(layout, xv);
        for (const Vec2& p : st.interior)
            if (!chart.contains(p, 1e-9)) return std::nullopt;
        try {
            return assemble_energy(model, img1, img2, mesh, chart, st, config.h2_weight);
        } catch (const InfeasibleStateError&) {
            return std::nullopt;
        }
    };
    auto gradient = [&](const std::vector<double>& xv) {
        return assemble_gradient(model, img1, img2, mesh, chart, unpack_state(layout, xv),
                                 config.h2_weight);
    };

    SolveReport report;
    auto on_accept = [&report](int iter, const DiscreteEnergyReport& rep, double step) {
        report.trace.push_back({iter, rep.total, rep.elastic, rep.mismatch, rep.second_gradient,
                                rep.min_det, step});
    };

    std::vector<double> x = pack_state(layout, initial);
    const detail::LoopResult lr = detail::lbfgs_loop<DiscreteEnergyReport>(
        x, config, options.frozen, try_energy, gradient, detail::no_projection, on_accept);

    report.termination = lr.termination;
    report.iterations = lr.iterations;
    report.initial_energy = lr.initial_energy;
    report.final_energy = lr.energy;
    report.initial_grad_norm = lr.initial_grad_norm;
    report.final_grad_norm = lr.final_grad_norm;
    report.state = unpack_state(layout, x);
    report.positions = realize_positions(mesh, chart, report.state);
    report.feasibility = feasibility_report(mesh, chart, report.state);
    if (options.reference_map) {
        double worst = 0.0;
        for (int n = 0; n < mesh.node_count(); ++n)
            worst = std::max(worst, (report.positions[static_cast<std::size_t>(n)] -
                                     options.reference_map(mesh.nodes[static_cast<std::size_t>(n)]))
                                        .norm());
        report.recovery_max_deviation = worst;
    }
    return report;
}

struct LandmarkSet {
    std::vector<std::pair<Vec2, Vec2>> pairs; // (x in Omega1, X in closure(Omega2))
};

/// Landmarks are hard constraints: each is snapped to the nearest mesh node
/// and that node's DOFs are frozen at the target.
inline SolveReport minimize_with_landmarks(const EnergyModel& model, const Image& img1,
                                           const Image& img2, const TriMesh& mesh,
                                           const BoundaryChart& chart,
                                           const SolverConfig& config,
                                           const DeformationState& initial,
                                           const LandmarkSet& landmarks,
                                           const MinimizeOptions& base_options = {}) {
    DofLayout layout(mesh);
    DeformationState st = initial;
    MinimizeOptions options = base_options;
    if (options.frozen.empty()) options.frozen.assign(static_cast<std::size_t>(layout.size()), 0);

    std::vector<double> snap_distances;
    std::vector<int> used_nodes;
    for (const auto& [xref, target] : landmarks.pairs) {
        if (!chart.contains(target, 1e-9))
            throw InvalidLandmarksError("landmark target outside the target domain");
        int best = 0;
        double best_d = std::numeric_limits<double>::infinity();
        for (int n = 0; n < mesh.node_count(); ++n) {
            const double d = (mesh.nodes[static_cast<std::size_t>(n)] - xref).norm();
            if (d < best_d) {
                best_d = d;
                best = n;
            }
        }
        for (int u : used_nodes)
            if (u == best)
                throw InvalidLandmarksError("two landmarks snap to the same mesh node");
        used_nodes.push_back(best);
        snap_distances.push_back(best_d);

        const int islot = mesh.interior_index[static_cast<std::size_t>(best)];
        if (islot >= 0) {
            st.interior[static_cast<std::size_t>(islot)] = target;
            options.frozen[static_cast<std::size_t>(2 * islot)] = 1;
            options.frozen[static_cast<std::size_t>(2 * islot + 1)] = 1;
        } else {
            // boundary node: the target must lie on the target perimeter
            const int bslot = mesh.boundary_index[static_cast<std::size_t>(best)];
            double best_t = 0.0, best_dist = std::numeric_limits<double>::infinity();
            for (int k = 0; k < 4; ++k) {
                const Vec2 a = chart.corners()[static_cast<std::size_t>(k)];
                const Vec2 b = chart.corners()[static_cast<std::size_t>((k + 1) % 4)];
                const double len = (b - a).norm();
                const double s = clamp((target - a).dot((b - a) / len), 0.0, len);
                const Vec2 proj = a + (b - a) * (s / len);
                const double dist = (target - proj).norm();
                if (dist < best_dist) {
                    best_dist = dist;
                    best_t = chart.corner_coordinate(k) + s;
                }
            }
            if (best_dist > 1e-9 * chart.diameter())
                throw InvalidLandmarksError(
                    "landmark snapped to a boundary node but its target is off the boundary");
            st.boundary_t[static_cast<std::size_t>(bslot)] = best_t;
            options.frozen[static_cast<std::size_t>(2 * layout.interior_count + bslot)] = 1;
        }
    }

    SolveReport rep = minimize(model, img1, img2, mesh, chart, config, st, options);
    rep.landmark_snap_distances = std::move(snap_distances);
    return rep;
}

/// Seeded smooth random perturbation of a feasible state. The amplitude is
/// backtracked (halved) until the perturbed state is feasible, which avoids
/// rejection-sampling bias.
inline DeformationState perturbed_state(const TriMesh& mesh, const BoundaryChart& chart,
                                        const DeformationState& base, Rng& rng,
                                        double amplitude, bool interior_only = false) {
    const double diam = chart.diameter();
    struct Bump {
        Vec2 center;
        double sigma;
        Vec2 dir;
    };
    std::vector<Bump> bumps;
    for (int b = 0; b < 6; ++b) {
        Bump bp;
        bp.center = {mesh.domain.origin.x + rng.uniform() * mesh.domain.width,
                     mesh.domain.origin.y + rng.uniform() * mesh.domain.height};
        bp.sigma = rng.uniform(0.1, 0.3) * std::min(mesh.domain.width, mesh.domain.height);
        const double ang = rng.uniform(0.0, 6.283185307179586);
        bp.dir = {std::cos(ang), std::sin(ang)};
        bumps.push_back(bp);
    }
    struct Mode {
        double amp, freq, phase;
    };
    std::vector<Mode> modes;
    for (int k = 0; k < 3; ++k)
        modes.push_back({rng.uniform(-1.0, 1.0), static_cast<double>(k + 1),
                         rng.uniform(0.0, 6.283185307179586)});

    const BoundaryChart ref_chart = BoundaryChart::rectangle(mesh.domain);
    double scale = amplitude;
    for (int attempt = 0; attempt < 42; ++attempt) {
        DeformationState st = base;
        for (int i = 0; i < mesh.interior_count(); ++i) {
            const Vec2 p = mesh.nodes[static_cast<std::size_t>(mesh.interior_nodes[static_cast<std::size_t>(i)])];
            Vec2 disp{0.0, 0.0};
            for (const auto& bp : bumps)
                disp += bp.dir * std::exp(-(p - bp.center).squared_norm() /
                                          (2 * bp.sigma * bp.sigma));
            st.interior[static_cast<std::size_t>(i)] += disp * (scale * diam / 6.0);
        }
        if (!interior_only) {
            for (int s = 0; s < mesh.boundary_count(); ++s) {
                const auto [edge, frac] = mesh.boundary_edge_fraction(s);
                const double u = ref_chart.coordinate_on_edge(edge, frac) / ref_chart.length();
                double dt = 0.0;
                for (const auto& md : modes)
                    dt += md.amp * std::sin(6.283185307179586 * md.freq * u + md.phase);
                st.boundary_t[static_cast<std::size_t>(s)] += dt * scale * chart.length() / 12.0;
            }
        }
        const FeasibilityReport fr = feasibility_report(mesh, chart, st);
        bool contained = true;
        for (const Vec2& p : st.interior)
            if (!chart.contains(p, 1e-9)) {
                contained = false;
                break;
            }
        if (fr.monotone && fr.min_det > 1e-9 && contained) return st;
        scale *= 0.5;
    }
    return base;
}

/// Piecewise-affine prolongation of a coarse state onto a finer mesh over the
/// same reference domain. Affine states prolong to themselves exactly.
inline DeformationState prolong_state(const TriMesh& coarse, const TriMesh& fine,
                                      const BoundaryChart& chart,
                                      const BoundaryChart& ref_chart,
                                      const DeformationState& coarse_state) {
    const Domain2& ref = coarse.domain;
    const std::vector<Vec2> cpos = realize_positions(coarse, chart, coarse_state);
    DeformationState out;
    out.interior.resize(static_cast<std::size_t>(fine.interior_count()));
    for (int k = 0; k < fine.interior_count(); ++k) {
        const Vec2 p = fine.nodes[static_cast<std::size_t>(fine.interior_nodes[static_cast<std::size_t>(k)])];
        // uniform grid: direct cell lookup in the coarse reference mesh
        const double gx = (p.x - ref.origin.x) / ref.width * (coarse.nx - 1);
        const double gy = (p.y - ref.origin.y) / ref.height * (coarse.ny - 1);
        const int ci = std::min(static_cast<int>(gx), coarse.nx - 2);
        const int cj = std::min(static_cast<int>(gy), coarse.ny - 2);
        const double fx = gx - ci, fy = gy - cj;
        const int cell = 2 * (cj * (coarse.nx - 1) + ci);
        const int tri = (fx >= fy) ? cell : cell + 1; // matches the cell split diagonal
        const auto& t = coarse.triangles[static_cast<std::size_t>(tri)];
        const Vec2 p0 = coarse.nodes[static_cast<std::size_t>(t.n0)];
        const Mat2 D = Mat2::from_columns(cpos[static_cast<std::size_t>(t.n1)] - cpos[static_cast<std::size_t>(t.n0)],
                                          cpos[static_cast<std::size_t>(t.n2)] - cpos[static_cast<std::size_t>(t.n0)]) *
                       coarse.ref_inverse[static_cast<std::size_t>(tri)];
        out.interior[static_cast<std::size_t>(k)] = cpos[static_cast<std::size_t>(t.n0)] + D * (p - p0);
    }
    out.boundary_t.resize(static_cast<std::size_t>(fine.boundary_count()));
    const int cb = coarse.boundary_count();
    std::vector<double> cu(static_cast<std::size_t>(cb));
    for (int s = 0; s < cb; ++s) {
        const auto [e, f] = coarse.boundary_edge_fraction(s);
        cu[static_cast<std::size_t>(s)] = ref_chart.coordinate_on_edge(e, f);
    }
    for (int s = 0; s < fine.boundary_count(); ++s) {
        const auto [e, f] = fine.boundary_edge_fraction(s);
        const double u = ref_chart.coordinate_on_edge(e, f);
        int a = cb - 1;
        for (int q = 0; q < cb; ++q)
            if (cu[static_cast<std::size_t>(q)] <= u + 1e-12 * ref_chart.length()) a = q;
        const int b = (a + 1) % cb;
        const double ua = cu[static_cast<std::size_t>(a)];
        double ub = cu[static_cast<std::size_t>(b)];
        if (ub <= ua) ub += ref_chart.length();
        const double w = clamp((u - ua) / (ub - ua), 0.0, 1.0);
        const double ta = coarse_state.boundary_t[static_cast<std::size_t>(a)];
        const double tb = coarse_state.boundary_t[static_cast<std::size_t>(b)];
        const double dt = (w == 0.0) ? 0.0 : chart.wrap(tb - ta);
        out.boundary_t[static_cast<std::size_t>(s)] = ta + w * dt;
    }
    return out;
}

/// Coarse-to-fine continuation. Levels are nested (resolution halving); the
/// coarse solution is prolonged by piecewise-affine interpolation of interior
/// nodes and cyclic linear interpolation of boundary chart coordinates.
inline SolveReport minimize_multiresolution(const EnergyModel& model, const Image& img1,
                                            const Image& img2, int nx, int ny,
                                            const BoundaryChart& chart,
                                            const SolverConfig& config,
                                            const MinimizeOptions& options = {}) {
    config.validate();
    std::vector<std::pair<int, int>> resolutions{{nx, ny}};
    while (static_cast<int>(resolutions.size()) < config.levels) {
        const auto [cx, cy] = resolutions.back();
        if ((cx - 1) % 2 != 0 || (cy - 1) % 2 != 0) break;
        const int fx = (cx - 1) / 2 + 1, fy = (cy - 1) / 2 + 1;
        if (fx < 3 || fy < 3) break;
        resolutions.push_back({fx, fy});
    }

    const Domain2 ref = img1.domain();
    const BoundaryChart ref_chart = BoundaryChart::rectangle(ref);

    SolveReport rep;
    DeformationState state;
    for (int li = static_cast<int>(resolutions.size()) - 1; li >= 0; --li) {
        const auto [rx, ry] = resolutions[static_cast<std::size_t>(li)];
        const TriMesh mesh = build_mesh(ref, rx, ry);
        if (li == static_cast<int>(resolutions.size()) - 1) {
            state = initial_guess(mesh, chart);
        } else {
            const TriMesh coarse = build_mesh(ref, resolutions[static_cast<std::size_t>(li + 1)].first,
                                              resolutions[static_cast<std::size_t>(li + 1)].second);
            state = prolong_state(coarse, mesh, chart, ref_chart, state);
        }
        MinimizeOptions level_options;
        if (li == 0) level_options = options;
        rep = minimize(model, img1, img2, mesh, chart, config, state, level_options);
        state = rep.state;
    }
    return rep;
}

} // namespace slidereg
