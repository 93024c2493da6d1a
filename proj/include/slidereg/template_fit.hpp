#pragma once

#include <optional>
#include <string>
#include <vector>

#include "slidereg/solver.hpp"

namespace slidereg {

/// Pose of the unknown subdomain: Omega = a + lambda * R(theta) * Omega1.
struct TemplatePose {
    Vec2 translation{0.0, 0.0};
    double theta = 0.0;
    double lambda = 1.0;

    AffineMap2 map() const { return {Mat2::rotation(theta) * lambda, translation}; }
};

struct TemplateBounds {
    double lambda_min = 0.5;
    double lambda_max = 2.0;

    void validate() const {
        if (!(lambda_min > 0.0) || !(lambda_max > lambda_min))
            throw InvalidInputError("TemplateBounds: need 0 < lambda_min < lambda_max");
    }
};

struct TemplateReport {
    TemplatePose pose;
    DeformationState inner; // z : Omega1 -> Omega1 (sliding on its own boundary)
    std::string termination;
    int iterations = 0;
    double initial_energy = 0.0;
    double final_energy = 0.0;
    double elastic = 0.0;
    double mismatch = 0.0;
    double min_det = 0.0;
};

namespace detail {

struct TemplateEnergyReport {
    double total = 0.0;
    double elastic = 0.0;
    double mismatch = 0.0;
    double min_det = 0.0;
};

// DOF layout: [a.x, a.y, theta, lambda, inner z DOFs...]
struct TemplateObjective {
    const EnergyModel& model;
    const Image& tmpl;
    const Image& scene;
    const TriMesh& mesh;
    const BoundaryChart& ref_chart; // template rectangle's own perimeter
    TemplateBounds bounds;
    DofLayout layout;

    int size() const { return 4 + layout.size(); }

    TemplatePose pose_of(const std::vector<double>& x) const {
        return {{x[0], x[1]}, x[2], x[3]};
    }
    DeformationState inner_of(const std::vector<double>& x) const {
        return unpack_state(layout, std::vector<double>(x.begin() + 4, x.end()));
    }

    bool project(std::vector<double>& x) const {
        const double clamped = clamp(x[3], bounds.lambda_min, bounds.lambda_max);
        if (clamped != x[3]) {
            x[3] = clamped;
            return true;
        }
        return false;
    }

    bool subdomain_inside(const TemplatePose& pose) const {
        const AffineMap2 T = pose.map();
        const double tol = 1e-9 * scene.domain().diameter();
        for (const Vec2& c : tmpl.domain().corners())
            if (!scene.domain().contains(T(c), tol)) return false;
        return true;
    }

    std::optional<TemplateEnergyReport> try_energy(const std::vector<double>& x) const {
        const TemplatePose pose = pose_of(x);
        if (!(pose.lambda >= bounds.lambda_min && pose.lambda <= bounds.lambda_max))
            return std::nullopt;
        if (!subdomain_inside(pose)) return std::nullopt;
        const DeformationState z = inner_of(x);
        if (!boundary_monotone(ref_chart, z.boundary_t)) return std::nullopt;
        for (const Vec2& p : z.interior)
            if (!ref_chart.contains(p, 1e-9)) return std::nullopt;

        const std::vector<Vec2> pos = realize_positions(mesh, ref_chart, z);
        const AffineMap2 T = pose.map();
        const double lam2 = pose.lambda * pose.lambda;

        TemplateEnergyReport rep;
        rep.min_det = std::numeric_limits<double>::infinity();
        for (int ti = 0; ti < static_cast<int>(mesh.triangles.size()); ++ti) {
            const Mat2 Dz = deformation_gradient(mesh, pos, ti);
            const double detz = Dz.det();
            rep.min_det = std::min(rep.min_det, detz);
            if (!(detz > 0.0)) return std::nullopt;
            const double area = mesh.area[static_cast<std::size_t>(ti)];
            rep.elastic += area * elastic_eval(model.elastic, T.M * Dz);
            if (model.mismatch.weight > 0.0) {
                const auto& t = mesh.triangles[static_cast<std::size_t>(ti)];
                const int pairs[3][2] = {{t.n0, t.n1}, {t.n1, t.n2}, {t.n2, t.n0}};
                double fm = 0.0;
                for (const auto& pr : pairs) {
                    const Vec2 xm = (mesh.nodes[static_cast<std::size_t>(pr[0])] + mesh.nodes[static_cast<std::size_t>(pr[1])]) * 0.5;
                    const Vec2 zm = (pos[static_cast<std::size_t>(pr[0])] + pos[static_cast<std::size_t>(pr[1])]) * 0.5;
                    fm += mismatch_eval(model.mismatch, tmpl.sample(xm), scene.sample(T(zm)),
                                        lam2 * detz);
                }
                rep.mismatch += area * fm / 3.0;
            }
        }
        rep.total = rep.elastic + rep.mismatch;
        return rep;
    }

    std::vector<double> gradient(const std::vector<double>& x) const {
        const TemplatePose pose = pose_of(x);
        const DeformationState z = inner_of(x);
        const std::vector<Vec2> pos = realize_positions(mesh, ref_chart, z);
        const Mat2 R = Mat2::rotation(pose.theta);
        const Mat2 J{0.0, -1.0, 1.0, 0.0}; // d/dtheta of rotation, left factor
        const double lam = pose.lambda, lam2 = lam * lam;
        const AffineMap2 T = pose.map();

        std::vector<Vec2> node_grad(static_cast<std::size_t>(mesh.node_count()), Vec2{0.0, 0.0});
        Vec2 grad_a{0.0, 0.0};
        double grad_theta = 0.0, grad_lambda = 0.0;

        for (int ti = 0; ti < static_cast<int>(mesh.triangles.size()); ++ti) {
            const Mat2 Dz = deformation_gradient(mesh, pos, ti);
            const double detz = Dz.det();
            const double area = mesh.area[static_cast<std::size_t>(ti)];
            const Mat2 Bt = mesh.ref_inverse[static_cast<std::size_t>(ti)].transpose();
            const Mat2 A = T.M * Dz;
            const Mat2 G = elastic_value_and_grad(model.elastic, A).second;

            Mat2 dQz = (R.transpose() * G * lam) * area * Bt;
            grad_theta += area * G.ddot(J * R * Dz * lam);
            grad_lambda += area * G.ddot(R * Dz);

            if (model.mismatch.weight > 0.0) {
                const auto& t = mesh.triangles[static_cast<std::size_t>(ti)];
                const int prs[3][2] = {{t.n0, t.n1}, {t.n1, t.n2}, {t.n2, t.n0}};
                double fdelta = 0.0;
                for (const auto& pr : prs) {
                    const Vec2 xm = (mesh.nodes[static_cast<std::size_t>(pr[0])] + mesh.nodes[static_cast<std::size_t>(pr[1])]) * 0.5;
                    const Vec2 zm = (pos[static_cast<std::size_t>(pr[0])] + pos[static_cast<std::size_t>(pr[1])]) * 0.5;
                    const Vec2 y = T(zm);
                    const MismatchGrad mg =
                        mismatch_grad(model.mismatch, tmpl.sample(xm), scene.sample(y), lam2 * detz);
                    fdelta += mg.ddelta;
                    const ColorGrad cg = scene.sample_gradient(y);
                    Vec2 w{0.0, 0.0};
                    for (std::size_t k = 0; k < 3; ++k) w += mg.dc2[k] * cg.g[k];
                    w = w * (area / 3.0);
                    grad_a += w;
                    grad_theta += w.dot(J * R * zm * lam);
                    grad_lambda += w.dot(R * zm);
                    const Vec2 dz = R.transpose() * w * lam;
                    node_grad[static_cast<std::size_t>(pr[0])] += dz * 0.5;
                    node_grad[static_cast<std::size_t>(pr[1])] += dz * 0.5;
                }
                grad_lambda += (area / 3.0) * fdelta * 2.0 * lam * detz;
                dQz = dQz + ((area / 3.0) * fdelta * lam2) * Dz.cofactor() * Bt;
            }

            const auto& t = mesh.triangles[static_cast<std::size_t>(ti)];
            const Vec2 c0 = dQz.col(0), c1 = dQz.col(1);
            node_grad[static_cast<std::size_t>(t.n1)] += c0;
            node_grad[static_cast<std::size_t>(t.n2)] += c1;
            node_grad[static_cast<std::size_t>(t.n0)] -= c0 + c1;
        }

        std::vector<double> g(static_cast<std::size_t>(size()), 0.0);
        g[0] = grad_a.x;
        g[1] = grad_a.y;
        g[2] = grad_theta;
        g[3] = grad_lambda;
        for (int k = 0; k < layout.interior_count; ++k) {
            const Vec2 v = node_grad[static_cast<std::size_t>(mesh.interior_nodes[static_cast<std::size_t>(k)])];
            g[static_cast<std::size_t>(4 + 2 * k)] = v.x;
            g[static_cast<std::size_t>(4 + 2 * k + 1)] = v.y;
        }
        for (int s = 0; s < layout.boundary_count; ++s) {
            const int node = mesh.boundary_cycle[static_cast<std::size_t>(s)];
            g[static_cast<std::size_t>(4 + 2 * layout.interior_count + s)] =
                node_grad[static_cast<std::size_t>(node)].dot(ref_chart.tangent(z.boundary_t[static_cast<std::size_t>(s)]));
        }
        return g;
    }
};

} // namespace detail

/// Registers a template image against a scene: joint descent over the pose
/// (a, theta, lambda) and an inner sliding-boundary deformation z of the
/// template domain, with y = (a + lambda R .) o z. lambda is clamped to its
/// bounds; steps that push the subdomain outside the scene are rejected.
inline TemplateReport register_template(const EnergyModel& model, const Image& tmpl,
                                        const Image& scene, int nx, int ny,
                                        const TemplatePose& pose0, const TemplateBounds& bounds,
                                        const SolverConfig& config) {
    config.validate();
    bounds.validate();
    if (!(pose0.lambda >= bounds.lambda_min && pose0.lambda <= bounds.lambda_max))
        throw InvalidInputError("register_template: initial lambda violates its bounds");

    const TriMesh mesh = build_mesh(tmpl.domain(), nx, ny);
    const BoundaryChart ref_chart = BoundaryChart::rectangle(tmpl.domain());
    detail::TemplateObjective obj{model, tmpl, scene, mesh, ref_chart, bounds, DofLayout(mesh)};

    if (!obj.subdomain_inside(pose0))
        throw InfeasibleStateError("register_template: initial subdomain outside the scene");

    const DeformationState z0 = affine_state(mesh, ref_chart); // identity
    std::vector<double> x(static_cast<std::size_t>(obj.size()));
    x[0] = pose0.translation.x;
    x[1] = pose0.translation.y;
    x[2] = pose0.theta;
    x[3] = pose0.lambda;
    const std::vector<double> zx = pack_state(obj.layout, z0);
    std::copy(zx.begin(), zx.end(), x.begin() + 4);

    TemplateReport report;
    auto on_accept = [&report](int, const detail::TemplateEnergyReport& rep, double) {
        report.elastic = rep.elastic;
        report.mismatch = rep.mismatch;
        report.min_det = rep.min_det;
    };
    const detail::LoopResult lr = detail::lbfgs_loop<detail::TemplateEnergyReport>(
        x, config, {}, [&obj](const std::vector<double>& v) { return obj.try_energy(v); },
        [&obj](const std::vector<double>& v) { return obj.gradient(v); },
        [&obj](std::vector<double>& v) { return obj.project(v); }, on_accept);

    report.pose = obj.pose_of(x);
    report.inner = obj.inner_of(x);
    report.termination = lr.termination;
    report.iterations = lr.iterations;
    report.initial_energy = lr.initial_energy;
    report.final_energy = lr.energy;
    return report;
}

} // namespace slidereg
