#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <utility>
#include <vector>

#include "slidereg/errors.hpp"
#include "slidereg/geometry.hpp"
#include "slidereg/image.hpp"

namespace slidereg {

/// Arc-length parameterization of a convex quadrilateral perimeter (the
/// target boundary). Rectangles are the common case; parallelograms cover
/// rotated and sheared targets. The chart is a bijection [0, L) -> perimeter
/// with Lipschitz constant 1; corners carry one-sided (outgoing) tangents.
class BoundaryChart {
  public:
    BoundaryChart(Vec2 c0, Vec2 c1, Vec2 c2, Vec2 c3)
        : BoundaryChart(std::array<Vec2, 4>{c0, c1, c2, c3}) {}

    explicit BoundaryChart(const std::array<Vec2, 4>& corners) : corners_(corners) {
        double cum = 0.0;
        for (int k = 0; k < 4; ++k) {
            const Vec2 e = corners_[static_cast<std::size_t>((k + 1) % 4)] - corners_[static_cast<std::size_t>(k)];
            seg_len_[static_cast<std::size_t>(k)] = e.norm();
            if (!(seg_len_[static_cast<std::size_t>(k)] > 0.0))
                throw InvalidInputError("BoundaryChart: degenerate edge");
            cum_len_[static_cast<std::size_t>(k)] = cum;
            cum += seg_len_[static_cast<std::size_t>(k)];
            dir_[static_cast<std::size_t>(k)] = e / seg_len_[static_cast<std::size_t>(k)];
        }
        total_ = cum;
        // convex and positively oriented
        for (int k = 0; k < 4; ++k) {
            const Vec2 a = corners_[static_cast<std::size_t>((k + 1) % 4)] - corners_[static_cast<std::size_t>(k)];
            const Vec2 b = corners_[static_cast<std::size_t>((k + 2) % 4)] - corners_[static_cast<std::size_t>((k + 1) % 4)];
            if (!(a.cross(b) > 0.0))
                throw InvalidInputError("BoundaryChart: corners must be convex CCW");
        }
    }

    static BoundaryChart rectangle(const Domain2& d) { return BoundaryChart(d.corners()); }

    double length() const { return total_; }
    const std::array<Vec2, 4>& corners() const { return corners_; }
    double corner_coordinate(int k) const { return cum_len_[static_cast<std::size_t>(k & 3)]; }
    double segment_length(int k) const { return seg_len_[static_cast<std::size_t>(k & 3)]; }

    double wrap(double t) const {
        double w = std::fmod(t, total_);
        if (w < 0.0) w += total_;
        return w;
    }

    /// Chart coordinate from (edge index, fraction along edge).
    double coordinate_on_edge(int k, double fraction) const {
        return cum_len_[static_cast<std::size_t>(k & 3)] + fraction * seg_len_[static_cast<std::size_t>(k & 3)];
    }

    Vec2 point(double t) const {
        const auto [k, s] = segment_of(t);
        return corners_[static_cast<std::size_t>(k)] + dir_[static_cast<std::size_t>(k)] * s;
    }

    /// One-sided unit tangent; within 1e-12*L of a corner the outgoing
    /// segment wins (deterministic tie-breaking).
    Vec2 tangent(double t) const {
        auto [k, s] = segment_of(t);
        if (seg_len_[static_cast<std::size_t>(k)] - s < 1e-12 * total_) k = (k + 1) % 4;
        return dir_[static_cast<std::size_t>(k)];
    }

    /// Cyclic distance from t to the nearest corner coordinate. The chart
    /// tangent is one-sided there, so finite-difference checks straddling a
    /// corner see the average of two one-sided derivatives.
    double corner_distance(double t) const {
        const double w = wrap(t);
        double best = total_;
        for (int k = 0; k < 4; ++k) {
            double d = std::abs(w - cum_len_[static_cast<std::size_t>(k)]);
            d = std::min(d, total_ - d);
            best = std::min(best, d);
        }
        return best;
    }

    bool contains(Vec2 p, double tol_scale = 1e-12) const {
        const double tol = tol_scale * total_;
        for (int k = 0; k < 4; ++k) {
            const Vec2 e = corners_[static_cast<std::size_t>((k + 1) % 4)] - corners_[static_cast<std::size_t>(k)];
            if (e.cross(p - corners_[static_cast<std::size_t>(k)]) < -tol) return false;
        }
        return true;
    }

    /// Enclosed (signed) area; positive for the CCW corner order.
    double area() const {
        double a = 0.0;
        for (int k = 0; k < 4; ++k)
            a += corners_[static_cast<std::size_t>(k)].cross(corners_[static_cast<std::size_t>((k + 1) % 4)]);
        return 0.5 * a;
    }

    double diameter() const {
        double d = 0.0;
        for (int i = 0; i < 4; ++i)
            for (int j = i + 1; j < 4; ++j)
                d = std::max(d, (corners_[static_cast<std::size_t>(i)] - corners_[static_cast<std::size_t>(j)]).norm());
        return d;
    }

  private:
    std::pair<int, double> segment_of(double t) const {
        const double w = wrap(t);
        for (int k = 3; k >= 0; --k)
            if (w >= cum_len_[static_cast<std::size_t>(k)]) return {k, w - cum_len_[static_cast<std::size_t>(k)]};
        return {0, w};
    }

    std::array<Vec2, 4> corners_;
    std::array<Vec2, 4> dir_;
    std::array<double, 4> seg_len_{};
    std::array<double, 4> cum_len_{};
    double total_ = 0.0;
};

/// Uniform triangulated grid over a rectangle; each cell is split along the
/// (i,j)->(i+1,j+1) diagonal, all triangles positively oriented.
struct TriMesh {
    struct Tri {
        int n0, n1, n2;
    };
    struct InteriorEdge {
        int tri_plus, tri_minus;
        double weight; // |e| / h_e with h_e the mean adjacent diameter
    };

    Domain2 domain;
    int nx = 0, ny = 0;
    std::vector<Vec2> nodes;
    std::vector<Tri> triangles;
    std::vector<Mat2> ref_inverse; // [p1-p0, p2-p0]^{-1} per triangle
    std::vector<double> area;      // reference triangle areas
    std::vector<int> boundary_cycle;  // node ids CCW from the origin corner
    std::vector<int> boundary_index;  // node -> cycle slot, or -1
    std::vector<int> interior_index;  // node -> interior slot, or -1
    std::vector<int> interior_nodes;  // interior slot -> node
    std::vector<InteriorEdge> interior_edges;

    int node_id(int ix, int iy) const { return ix + nx * iy; }
    int node_count() const { return nx * ny; }
    int interior_count() const { return static_cast<int>(interior_nodes.size()); }
    int boundary_count() const { return static_cast<int>(boundary_cycle.size()); }

    /// Perimeter edge (0 bottom, 1 right, 2 top, 3 left) and fraction along
    /// it for a boundary-cycle slot. Corners map to fraction 0 of their
    /// outgoing edge.
    std::pair<int, double> boundary_edge_fraction(int cycle_slot) const {
        const int ex = nx - 1, ey = ny - 1;
        int c = cycle_slot;
        if (c < ex) return {0, static_cast<double>(c) / ex};
        c -= ex;
        if (c < ey) return {1, static_cast<double>(c) / ey};
        c -= ey;
        if (c < ex) return {2, static_cast<double>(c) / ex};
        c -= ex;
        return {3, static_cast<double>(c) / ey};
    }
};

inline TriMesh build_mesh(const Domain2& domain, int nx, int ny) {
    if (nx < 2 || ny < 2) throw InvalidInputError("build_mesh: need at least 2 nodes per side");
    TriMesh m;
    m.domain = domain;
    m.nx = nx;
    m.ny = ny;
    m.nodes.reserve(static_cast<std::size_t>(nx) * ny);
    for (int j = 0; j < ny; ++j)
        for (int i = 0; i < nx; ++i)
            m.nodes.push_back({domain.origin.x + domain.width * i / (nx - 1),
                               domain.origin.y + domain.height * j / (ny - 1)});

    for (int j = 0; j + 1 < ny; ++j)
        for (int i = 0; i + 1 < nx; ++i) {
            const int a = m.node_id(i, j), b = m.node_id(i + 1, j);
            const int c = m.node_id(i + 1, j + 1), d = m.node_id(i, j + 1);
            m.triangles.push_back({a, b, c});
            m.triangles.push_back({a, c, d});
        }

    m.ref_inverse.reserve(m.triangles.size());
    m.area.reserve(m.triangles.size());
    for (const auto& t : m.triangles) {
        const Vec2 e1 = m.nodes[static_cast<std::size_t>(t.n1)] - m.nodes[static_cast<std::size_t>(t.n0)];
        const Vec2 e2 = m.nodes[static_cast<std::size_t>(t.n2)] - m.nodes[static_cast<std::size_t>(t.n0)];
        const Mat2 P = Mat2::from_columns(e1, e2);
        if (!(P.det() > 0.0)) throw InvalidInputError("build_mesh: negatively oriented triangle");
        m.ref_inverse.push_back(P.inverse());
        m.area.push_back(0.5 * P.det());
    }

    // boundary cycle: bottom, right, top, left
    for (int i = 0; i + 1 < nx; ++i) m.boundary_cycle.push_back(m.node_id(i, 0));
    for (int j = 0; j + 1 < ny; ++j) m.boundary_cycle.push_back(m.node_id(nx - 1, j));
    for (int i = nx - 1; i > 0; --i) m.boundary_cycle.push_back(m.node_id(i, ny - 1));
    for (int j = ny - 1; j > 0; --j) m.boundary_cycle.push_back(m.node_id(0, j));

    m.boundary_index.assign(static_cast<std::size_t>(m.node_count()), -1);
    for (int s = 0; s < static_cast<int>(m.boundary_cycle.size()); ++s)
        m.boundary_index[static_cast<std::size_t>(m.boundary_cycle[static_cast<std::size_t>(s)])] = s;
    m.interior_index.assign(static_cast<std::size_t>(m.node_count()), -1);
    for (int n = 0; n < m.node_count(); ++n)
        if (m.boundary_index[static_cast<std::size_t>(n)] < 0) {
            m.interior_index[static_cast<std::size_t>(n)] = static_cast<int>(m.interior_nodes.size());
            m.interior_nodes.push_back(n);
        }

    // interior edges (gradient-jump stencil)
    std::map<std::pair<int, int>, int> seen;
    auto tri_diameter = [&](int ti) {
        const auto& t = m.triangles[static_cast<std::size_t>(ti)];
        const Vec2 p0 = m.nodes[static_cast<std::size_t>(t.n0)], p1 = m.nodes[static_cast<std::size_t>(t.n1)], p2 = m.nodes[static_cast<std::size_t>(t.n2)];
        return std::max({(p1 - p0).norm(), (p2 - p1).norm(), (p0 - p2).norm()});
    };
    for (int ti = 0; ti < static_cast<int>(m.triangles.size()); ++ti) {
        const auto& t = m.triangles[static_cast<std::size_t>(ti)];
        const int vs[3][2] = {{t.n0, t.n1}, {t.n1, t.n2}, {t.n2, t.n0}};
        for (const auto& v : vs) {
            const auto key = std::minmax(v[0], v[1]);
            const auto it = seen.find(key);
            if (it == seen.end()) {
                seen.emplace(key, ti);
            } else {
                const double elen = (m.nodes[static_cast<std::size_t>(v[0])] - m.nodes[static_cast<std::size_t>(v[1])]).norm();
                const double he = 0.5 * (tri_diameter(it->second) + tri_diameter(ti));
                m.interior_edges.push_back({it->second, ti, elen / he});
            }
        }
    }
    return m;
}

/// Sliding-boundary degrees of freedom: interior nodes carry image points,
/// boundary nodes carry chart coordinates on the target perimeter.
struct DeformationState {
    std::vector<Vec2> interior;
    std::vector<double> boundary_t;
};

/// Strict cyclic monotonicity of the wrapped chart coordinates: exactly one
/// descent around the cycle, which pins the boundary winding to one and makes
/// the discrete trace injective.
inline bool boundary_monotone(const BoundaryChart& chart, const std::vector<double>& ts) {
    const int n = static_cast<int>(ts.size());
    if (n < 3) return false;
    int descents = 0;
    for (int i = 0; i < n; ++i) {
        const double a = chart.wrap(ts[static_cast<std::size_t>(i)]);
        const double b = chart.wrap(ts[static_cast<std::size_t>((i + 1) % n)]);
        if (!(b > a)) ++descents;
    }
    return descents == 1;
}

/// Expands DOFs to nodal image positions (boundary nodes through the chart).
inline std::vector<Vec2> realize_positions(const TriMesh& mesh, const BoundaryChart& chart,
                                           const DeformationState& state) {
    if (static_cast<int>(state.interior.size()) != mesh.interior_count() ||
        static_cast<int>(state.boundary_t.size()) != mesh.boundary_count())
        throw InvalidInputError("realize: state size mismatch");
    std::vector<Vec2> pos(static_cast<std::size_t>(mesh.node_count()));
    for (int s = 0; s < mesh.boundary_count(); ++s)
        pos[static_cast<std::size_t>(mesh.boundary_cycle[static_cast<std::size_t>(s)])] = chart.point(state.boundary_t[static_cast<std::size_t>(s)]);
    for (int k = 0; k < mesh.interior_count(); ++k)
        pos[static_cast<std::size_t>(mesh.interior_nodes[static_cast<std::size_t>(k)])] = state.interior[static_cast<std::size_t>(k)];
    return pos;
}

/// realize with the monotonicity invariant enforced.
inline std::vector<Vec2> realize(const TriMesh& mesh, const BoundaryChart& chart,
                                 const DeformationState& state) {
    if (!boundary_monotone(chart, state.boundary_t))
        throw InfeasibleStateError("realize: boundary chart coordinates not cyclically monotone");
    return realize_positions(mesh, chart, state);
}

/// Per-triangle deformation gradient of the piecewise-affine map.
inline Mat2 deformation_gradient(const TriMesh& mesh, const std::vector<Vec2>& pos, int tri) {
    const auto& t = mesh.triangles[static_cast<std::size_t>(tri)];
    const Mat2 Q = Mat2::from_columns(pos[static_cast<std::size_t>(t.n1)] - pos[static_cast<std::size_t>(t.n0)],
                                      pos[static_cast<std::size_t>(t.n2)] - pos[static_cast<std::size_t>(t.n0)]);
    return Q * mesh.ref_inverse[static_cast<std::size_t>(tri)];
}

struct FeasibilityReport {
    double min_det = 0.0;
    bool monotone = false;
    bool contained = false;

    bool feasible() const { return min_det > 0.0 && monotone && contained; }
};

inline FeasibilityReport feasibility_report(const TriMesh& mesh, const BoundaryChart& chart,
                                            const DeformationState& state) {
    FeasibilityReport rep;
    rep.monotone = boundary_monotone(chart, state.boundary_t);
    const std::vector<Vec2> pos = realize_positions(mesh, chart, state);
    rep.min_det = std::numeric_limits<double>::infinity();
    for (int t = 0; t < static_cast<int>(mesh.triangles.size()); ++t)
        rep.min_det = std::min(rep.min_det, deformation_gradient(mesh, pos, t).det());
    rep.contained = true;
    for (int k = 0; k < mesh.interior_count(); ++k)
        if (!chart.contains(state.interior[static_cast<std::size_t>(k)], 1e-9)) {
            rep.contained = false;
            break;
        }
    return rep;
}

/// The unique affine map sending the reference rectangle's corners to the
/// chart's corners (the chart must be a parallelogram).
inline AffineMap2 corner_affine_map(const Domain2& ref, const BoundaryChart& chart) {
    const auto rc = ref.corners();
    const auto& qc = chart.corners();
    const Mat2 P = Mat2::from_columns(rc[1] - rc[0], rc[3] - rc[0]);
    const Mat2 Q = Mat2::from_columns(qc[1] - qc[0], qc[3] - qc[0]);
    const Mat2 M = Q * P.inverse();
    const Vec2 b = qc[0] - M * rc[0];
    if ((M * rc[2] + b - qc[2]).norm() > 1e-9 * chart.diameter())
        throw InvalidInputError("corner_affine_map: chart is not a parallelogram");
    return {M, b};
}

/// State realizing the corner affine map exactly: boundary coordinates come
/// from edge fractions, so corners land on corners bit-exactly.
inline DeformationState affine_state(const TriMesh& mesh, const BoundaryChart& chart) {
    const AffineMap2 T = corner_affine_map(mesh.domain, chart);
    DeformationState st;
    st.boundary_t.resize(static_cast<std::size_t>(mesh.boundary_count()));
    for (int s = 0; s < mesh.boundary_count(); ++s) {
        const auto [edge, frac] = mesh.boundary_edge_fraction(s);
        st.boundary_t[static_cast<std::size_t>(s)] = chart.coordinate_on_edge(edge, frac);
    }
    st.interior.resize(static_cast<std::size_t>(mesh.interior_count()));
    for (int k = 0; k < mesh.interior_count(); ++k)
        st.interior[static_cast<std::size_t>(k)] = T(mesh.nodes[static_cast<std::size_t>(mesh.interior_nodes[static_cast<std::size_t>(k)])]);
    return st;
}

/// Polygon area of the boundary-cycle image (shoelace).
inline double boundary_image_area(const TriMesh& mesh, const std::vector<Vec2>& pos) {
    double a = 0.0;
    const int n = mesh.boundary_count();
    for (int s = 0; s < n; ++s) {
        const Vec2 p = pos[static_cast<std::size_t>(mesh.boundary_cycle[static_cast<std::size_t>(s)])];
        const Vec2 q = pos[static_cast<std::size_t>(mesh.boundary_cycle[static_cast<std::size_t>((s + 1) % n)])];
        a += p.cross(q);
    }
    return 0.5 * a;
}

/// Brute-force point location in the deformed mesh; returns the triangle
/// containing p (barycentric tolerance) and the reference-domain preimage,
/// or triangle -1 when p is outside the deformed mesh.
struct PointLocation {
    int triangle = -1;
    Vec2 reference;
};

inline PointLocation locate_in_deformed(const TriMesh& mesh, const std::vector<Vec2>& pos,
                                        Vec2 p, double tol = 1e-12) {
    PointLocation out;
    for (int ti = 0; ti < static_cast<int>(mesh.triangles.size()); ++ti) {
        const auto& t = mesh.triangles[static_cast<std::size_t>(ti)];
        const Vec2 q0 = pos[static_cast<std::size_t>(t.n0)], q1 = pos[static_cast<std::size_t>(t.n1)], q2 = pos[static_cast<std::size_t>(t.n2)];
        const double den = (q1 - q0).cross(q2 - q0);
        if (den <= 0.0) continue;
        const double l1 = (p - q0).cross(q2 - q0) / den;
        const double l2 = (q1 - q0).cross(p - q0) / den;
        const double slack = tol + 1e-12;
        if (l1 >= -slack && l2 >= -slack && l1 + l2 <= 1.0 + slack) {
            out.triangle = ti;
            const Vec2 p0 = mesh.nodes[static_cast<std::size_t>(t.n0)], p1 = mesh.nodes[static_cast<std::size_t>(t.n1)], p2 = mesh.nodes[static_cast<std::size_t>(t.n2)];
            out.reference = p0 + (p1 - p0) * l1 + (p2 - p0) * l2;
            return out;
        }
    }
    return out;
}

} // namespace slidereg
