#pragma once

#include <vector>

#include "slidereg/energy.hpp"
#include "slidereg/errors.hpp"
#include "slidereg/image.hpp"
#include "slidereg/mesh.hpp"

namespace slidereg {

/// DOF packing: interior nodes contribute (x, y) pairs, boundary nodes one
/// chart coordinate each, in mesh slot order.
struct DofLayout {
    int interior_count = 0;
    int boundary_count = 0;

    explicit DofLayout(const TriMesh& mesh)
        : interior_count(mesh.interior_count()), boundary_count(mesh.boundary_count()) {}
    int size() const { return 2 * interior_count + boundary_count; }
};

inline std::vector<double> pack_state(const DofLayout& layout, const DeformationState& st) {
    std::vector<double> x(static_cast<std::size_t>(layout.size()));
    for (int k = 0; k < layout.interior_count; ++k) {
        x[static_cast<std::size_t>(2 * k)] = st.interior[static_cast<std::size_t>(k)].x;
        x[static_cast<std::size_t>(2 * k + 1)] = st.interior[static_cast<std::size_t>(k)].y;
    }
    for (int s = 0; s < layout.boundary_count; ++s)
        x[static_cast<std::size_t>(2 * layout.interior_count + s)] = st.boundary_t[static_cast<std::size_t>(s)];
    return x;
}

inline DeformationState unpack_state(const DofLayout& layout, const std::vector<double>& x) {
    DeformationState st;
    st.interior.resize(static_cast<std::size_t>(layout.interior_count));
    st.boundary_t.resize(static_cast<std::size_t>(layout.boundary_count));
    for (int k = 0; k < layout.interior_count; ++k)
        st.interior[static_cast<std::size_t>(k)] = {x[static_cast<std::size_t>(2 * k)], x[static_cast<std::size_t>(2 * k + 1)]};
    for (int s = 0; s < layout.boundary_count; ++s)
        st.boundary_t[static_cast<std::size_t>(s)] = x[static_cast<std::size_t>(2 * layout.interior_count + s)];
    return st;
}

struct DiscreteEnergyReport {
    double total = 0.0;
    double elastic = 0.0;
    double mismatch = 0.0;
    double second_gradient = 0.0;
    double min_det = 0.0;
    double sum_area_det = 0.0; // discrete integral of det Dy
    int worst_elastic_tri = -1;
    double worst_elastic = 0.0;
    int worst_mismatch_tri = -1;
    double worst_mismatch = 0.0;
};

/// Gradient-jump H^2 seminorm: sum over interior edges of
/// (|e|/h_e) * |Dy_plus - Dy_minus|_F^2, scaled by `weight`. Zero exactly on
/// affine maps.
inline double second_gradient_energy(const TriMesh& mesh, const std::vector<Vec2>& pos,
                                     double weight = 1.0) {
    if (weight == 0.0) return 0.0;
    double sum = 0.0;
    for (const auto& e : mesh.interior_edges) {
        const Mat2 jump = deformation_gradient(mesh, pos, e.tri_plus) -
                          deformation_gradient(mesh, pos, e.tri_minus);
        sum += e.weight * jump.squared_norm();
    }
    return weight * sum;
}

inline double second_gradient_energy(const TriMesh& mesh, const BoundaryChart& chart,
                                     const DeformationState& state, double weight = 1.0) {
    const FeasibilityReport fr = feasibility_report(mesh, chart, state);
    if (!(fr.min_det > 0.0) || !fr.monotone)
        throw InfeasibleStateError("second_gradient_energy: infeasible state");
    return second_gradient_energy(mesh, realize_positions(mesh, chart, state), weight);
}

/// Discrete I_{P1,P2}: elastic term with the one-point (exact) rule, mismatch
/// with the three edge-midpoint rule, optional gradient-jump term.
/// Throws InfeasibleStateError when any det Dy <= 0 or the boundary trace is
/// not monotone (the continuous energy is +infinity there).
inline DiscreteEnergyReport assemble_energy(const EnergyModel& model, const Image& img1,
                                            const Image& img2, const TriMesh& mesh,
                                            const BoundaryChart& chart,
                                            const DeformationState& state,
                                            double h2_weight = 0.0) {
    if (!boundary_monotone(chart, state.boundary_t))
        throw InfeasibleStateError("assemble_energy: boundary not monotone");
    const std::vector<Vec2> pos = realize_positions(mesh, chart, state);

    DiscreteEnergyReport rep;
    rep.min_det = std::numeric_limits<double>::infinity();
    const int ntri = static_cast<int>(mesh.triangles.size());
    for (int ti = 0; ti < ntri; ++ti) {
        const Mat2 A = deformation_gradient(mesh, pos, ti);
        const double det = A.det();
        rep.min_det = std::min(rep.min_det, det);
        if (!(det > 0.0))
            throw InfeasibleStateError("assemble_energy: non-positive determinant in triangle " +
                                       std::to_string(ti));
        const double area = mesh.area[static_cast<std::size_t>(ti)];
        rep.sum_area_det += area * det;

        const double ev = area * elastic_eval(model.elastic, A);
        rep.elastic += ev;
        if (ev > rep.worst_elastic) {
            rep.worst_elastic = ev;
            rep.worst_elastic_tri = ti;
        }

        if (model.mismatch.weight > 0.0) {
            const auto& t = mesh.triangles[static_cast<std::size_t>(ti)];
            const int pairs[3][2] = {{t.n0, t.n1}, {t.n1, t.n2}, {t.n2, t.n0}};
            double fm = 0.0;
            for (const auto& pr : pairs) {
                const Vec2 xm = (mesh.nodes[static_cast<std::size_t>(pr[0])] + mesh.nodes[static_cast<std::size_t>(pr[1])]) * 0.5;
                const Vec2 ym = (pos[static_cast<std::size_t>(pr[0])] + pos[static_cast<std::size_t>(pr[1])]) * 0.5;
                fm += mismatch_eval(model.mismatch, img1.sample(xm), img2.sample(ym), det);
            }
            const double mv = area * fm / 3.0;
            rep.mismatch += mv;
            if (mv > rep.worst_mismatch) {
                rep.worst_mismatch = mv;
                rep.worst_mismatch_tri = ti;
            }
        }
    }
    if (h2_weight > 0.0) rep.second_gradient = second_gradient_energy(mesh, pos, h2_weight);
    rep.total = rep.elastic + rep.mismatch + rep.second_gradient;
    return rep;
}

/// First variation of the discrete energy in DOF space. Interior entries are
/// spatial 2-vectors; boundary entries are the spatial gradient contracted
/// with the chart tangent (the sliding variation).
inline std::vector<double> assemble_gradient(const EnergyModel& model, const Image& img1,
                                             const Image& img2, const TriMesh& mesh,
                                             const BoundaryChart& chart,
                                             const DeformationState& state,
                                             double h2_weight = 0.0) {
    if (!boundary_monotone(chart, state.boundary_t))
        throw InfeasibleStateError("assemble_gradient: boundary not monotone");
    const std::vector<Vec2> pos = realize_positions(mesh, chart, state);
    std::vector<Vec2> node_grad(static_cast<std::size_t>(mesh.node_count()), Vec2{0.0, 0.0});

    auto scatter_dQ = [&](int ti, const Mat2& dQ) {
        const auto& t = mesh.triangles[static_cast<std::size_t>(ti)];
        const Vec2 c0 = dQ.col(0), c1 = dQ.col(1);
        node_grad[static_cast<std::size_t>(t.n1)] += c0;
        node_grad[static_cast<std::size_t>(t.n2)] += c1;
        node_grad[static_cast<std::size_t>(t.n0)] -= c0 + c1;
    };

    const int ntri = static_cast<int>(mesh.triangles.size());
    for (int ti = 0; ti < ntri; ++ti) {
        const Mat2 A = deformation_gradient(mesh, pos, ti);
        const double det = A.det();
        if (!(det > 0.0))
            throw InfeasibleStateError("assemble_gradient: non-positive determinant in triangle " +
                                       std::to_string(ti));
        const double area = mesh.area[static_cast<std::size_t>(ti)];
        const Mat2 Bt = mesh.ref_inverse[static_cast<std::size_t>(ti)].transpose();

        Mat2 dA = elastic_value_and_grad(model.elastic, A).second * area;

        if (model.mismatch.weight > 0.0) {
            const auto& t = mesh.triangles[static_cast<std::size_t>(ti)];
            const int pairs[3][2] = {{t.n0, t.n1}, {t.n1, t.n2}, {t.n2, t.n0}};
            double fdelta = 0.0;
            for (const auto& pr : pairs) {
                const Vec2 xm = (mesh.nodes[static_cast<std::size_t>(pr[0])] + mesh.nodes[static_cast<std::size_t>(pr[1])]) * 0.5;
                const Vec2 ym = (pos[static_cast<std::size_t>(pr[0])] + pos[static_cast<std::size_t>(pr[1])]) * 0.5;
                const Color c1 = img1.sample(xm);
                const Color c2 = img2.sample(ym);
                const MismatchGrad mg = mismatch_grad(model.mismatch, c1, c2, det);
                fdelta += mg.ddelta;
                const ColorGrad cg = img2.sample_gradient(ym);
                Vec2 dy{0.0, 0.0};
                for (std::size_t k = 0; k < 3; ++k) dy += mg.dc2[k] * cg.g[k];
                dy = dy * (area / 3.0);
                // y_mid = (q_i + q_j)/2
                node_grad[static_cast<std::size_t>(pr[0])] += dy * 0.5;
                node_grad[static_cast<std::size_t>(pr[1])] += dy * 0.5;
            }
            dA = dA + (area / 3.0) * fdelta * A.cofactor();
        }
        scatter_dQ(ti, dA * Bt);
    }

    if (h2_weight > 0.0) {
        for (const auto& e : mesh.interior_edges) {
            const Mat2 jump = deformation_gradient(mesh, pos, e.tri_plus) -
                              deformation_gradient(mesh, pos, e.tri_minus);
            const Mat2 d = 2.0 * h2_weight * e.weight * jump;
            scatter_dQ(e.tri_plus, d * mesh.ref_inverse[static_cast<std::size_t>(e.tri_plus)].transpose());
            scatter_dQ(e.tri_minus, (d * -1.0) * mesh.ref_inverse[static_cast<std::size_t>(e.tri_minus)].transpose());
        }
    }

    const DofLayout layout(mesh);
    std::vector<double> g(static_cast<std::size_t>(layout.size()));
    for (int k = 0; k < layout.interior_count; ++k) {
        const Vec2 v = node_grad[static_cast<std::size_t>(mesh.interior_nodes[static_cast<std::size_t>(k)])];
        g[static_cast<std::size_t>(2 * k)] = v.x;
        g[static_cast<std::size_t>(2 * k + 1)] = v.y;
    }
    for (int s = 0; s < layout.boundary_count; ++s) {
        const int node = mesh.boundary_cycle[static_cast<std::size_t>(s)];
        g[static_cast<std::size_t>(2 * layout.interior_count + s)] =
            node_grad[static_cast<std::size_t>(node)].dot(chart.tangent(state.boundary_t[static_cast<std::size_t>(s)]));
    }
    return g;
}

/// Pullback resampling of img1 through the piecewise-affine map: for each
/// target pixel, locate its preimage in the deformed mesh and sample there.
/// Pixels outside the deformed image keep the background value.
inline RasterData pullback_warp(const Image& img1, const TriMesh& mesh,
                                const std::vector<Vec2>& positions, const Domain2& target,
                                int width, int height, double background = 0.0) {
    RasterData out;
    out.width = width;
    out.height = height;
    out.channels = img1.channels();
    out.samples.assign(static_cast<std::size_t>(width) * height * out.channels, background);
    for (int j = 0; j < height; ++j)
        for (int i = 0; i < width; ++i) {
            const Vec2 p{target.origin.x + (i + 0.5) * target.width / width,
                         target.origin.y + (j + 0.5) * target.height / height};
            const PointLocation loc = locate_in_deformed(mesh, positions, p, 1e-9);
            if (loc.triangle < 0) continue;
            const Color c = img1.sample(loc.reference);
            for (int k = 0; k < out.channels; ++k)
                out.at(i, j, k) = clamp(c[static_cast<std::size_t>(k)], 0.0, 1.0);
        }
    return out;
}

} // namespace slidereg
