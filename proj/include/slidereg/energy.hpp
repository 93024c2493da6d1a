#pragma once

#include <cmath>
#include <cstdint>
#include <string>

#include "slidereg/errors.hpp"
#include "slidereg/geometry.hpp"
#include "slidereg/image.hpp"
#include "slidereg/random.hpp"

namespace slidereg {

/// Volumetric term h(delta) = a*delta^2 + a/delta + c*sqrt(delta) with
/// c = -2(a+2), so that h(delta) = delta*h(1/delta) holds termwise,
/// h'(1) = a + c/2 = -2 = -n, every summand is convex, and h -> +inf at both
/// 0+ and +inf (hence bounded below). The minimum is located numerically at
/// construction, never hardcoded.
struct VolumetricTerm {
    double quad_coeff = 1.0;  // coefficient of delta^2 and 1/delta
    double sqrt_coeff = -6.0; // derived: -2*(quad_coeff + 2)
    double min_value = 0.0;
    double argmin = 1.0;

    static VolumetricTerm make(double quad_coeff = 1.0) {
        if (!(quad_coeff > 0.0) || !std::isfinite(quad_coeff))
            throw InvalidInputError("VolumetricTerm: quad coefficient must be positive");
        VolumetricTerm h;
        h.quad_coeff = quad_coeff;
        h.sqrt_coeff = -2.0 * (quad_coeff + 2.0);
        h.locate_minimum();
        h.certify();
        return h;
    }

    double value(double d) const {
        return quad_coeff * (d * d + 1.0 / d) + sqrt_coeff * std::sqrt(d);
    }
    double deriv(double d) const {
        return quad_coeff * (2.0 * d - 1.0 / (d * d)) + 0.5 * sqrt_coeff / std::sqrt(d);
    }
    double deriv2(double d) const {
        return quad_coeff * (2.0 + 2.0 / (d * d * d)) - 0.25 * sqrt_coeff * std::pow(d, -1.5);
    }

  private:
    void locate_minimum() {
        // h' is increasing (h strictly convex); Newton from 1 with bisection guard.
        double lo = 1e-6, hi = 1e6;
        double d = 1.0;
        for (int it = 0; it < 200; ++it) {
            const double g = deriv(d);
            if (g > 0.0) hi = d; else lo = d;
            double next = d - g / deriv2(d);
            if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
            if (std::abs(next - d) <= 1e-16 * d) { d = next; break; }
            d = next;
        }
        argmin = d;
        min_value = value(d);
    }

    void certify() const {
        for (int i = 0; i <= 240; ++i) {
            const double d = std::exp(std::log(1e-3) + i * (std::log(1e3) - std::log(1e-3)) / 240.0);
            const double pair_gap = value(d) - d * value(1.0 / d);
            if (std::abs(pair_gap) > 1e-12 * (1.0 + std::abs(value(d))))
                throw InvalidInputError("VolumetricTerm: h(d) = d*h(1/d) identity failed");
            const double step = 1e-4 * d;
            const double second = value(d + step) - 2.0 * value(d) + value(d - step);
            if (second < -1e-10 * (1.0 + std::abs(value(d))))
                throw InvalidInputError("VolumetricTerm: sampled convexity failed");
        }
        if (std::abs(deriv(1.0) + 2.0) > 1e-12)
            throw InvalidInputError("VolumetricTerm: h'(1) != -n");
    }
};

enum class ElasticFamily { SingularValue, Fluid };

/// Parameters of the stored energy. SingularValue is
///   Psi(A) = v1^a + v2^a + det(A)*(v1^-a + v2^-a) + h(det A),
/// Fluid is the det-only energy Psi(A) = H(det A) with the same convex
///   H(d) = 2*(d^{a/2} + d^{1-a/2}) + h(d)
/// that the singular-value form reduces to on conformal matrices.
struct ElasticParams {
    ElasticFamily family = ElasticFamily::SingularValue;
    double alpha = 4.0;
    VolumetricTerm h;

    static ElasticParams singular_value(double alpha = 4.0, double h_quad = 1.0) {
        return make(ElasticFamily::SingularValue, alpha, h_quad);
    }
    static ElasticParams fluid(double alpha = 4.0, double h_quad = 1.0) {
        return make(ElasticFamily::Fluid, alpha, h_quad);
    }

    double big_h(double d) const {
        return 2.0 * (std::pow(d, 0.5 * alpha) + std::pow(d, 1.0 - 0.5 * alpha)) + h.value(d);
    }
    double big_h_deriv(double d) const {
        return 2.0 * (0.5 * alpha * std::pow(d, 0.5 * alpha - 1.0) +
                      (1.0 - 0.5 * alpha) * std::pow(d, -0.5 * alpha)) +
               h.deriv(d);
    }

  private:
    static ElasticParams make(ElasticFamily fam, double alpha, double h_quad) {
        if (!(alpha > 2.0) || !std::isfinite(alpha))
            throw InvalidInputError("ElasticParams: alpha must exceed n = 2");
        ElasticParams p;
        p.family = fam;
        p.alpha = alpha;
        p.h = VolumetricTerm::make(h_quad);
        // H inherits convexity (both power terms convex for alpha > 2);
        // sampled check to certify the assembled default.
        for (int i = 0; i <= 120; ++i) {
            const double d = std::exp(std::log(1e-2) + i * (std::log(1e2) - std::log(1e-2)) / 120.0);
            const double step = 1e-4 * d;
            const double second = p.big_h(d + step) - 2.0 * p.big_h(d) + p.big_h(d - step);
            if (second < -1e-10 * (1.0 + std::abs(p.big_h(d))))
                throw InvalidInputError("ElasticParams: H convexity check failed");
        }
        return p;
    }
};

enum class MismatchForm : std::uint8_t { Form8a, Form8b };

/// Intensity mismatch f(c1, c2, delta) scaled by `weight`.
/// Form8a: (1+delta)*|c1-c2|^2.
/// Form8b: (1+1/delta)*|c1-delta*c2|^2, the density-weighted quadratic; both
/// satisfy f(c1,c2,delta) = delta*f(c2,c1,1/delta) exactly.
struct MismatchParams {
    MismatchForm form = MismatchForm::Form8a;
    double weight = 1.0;

    static MismatchParams make(MismatchForm form = MismatchForm::Form8a, double weight = 1.0) {
        if (!(weight >= 0.0) || !std::isfinite(weight))
            throw InvalidInputError("MismatchParams: weight must be nonnegative");
        MismatchParams p;
        p.form = form;
        p.weight = weight;
        return p;
    }
};

inline double mismatch_eval(const MismatchParams& p, const Color& c1, const Color& c2,
                            double delta) {
    if (!(delta > 0.0)) throw OrientationError("mismatch_eval: delta <= 0");
    switch (p.form) {
    case MismatchForm::Form8a:
        return p.weight * (1.0 + delta) * color_squared_norm(color_sub(c1, c2));
    case MismatchForm::Form8b: {
        const Color e = {c1[0] - delta * c2[0], c1[1] - delta * c2[1], c1[2] - delta * c2[2]};
        return p.weight * (1.0 + 1.0 / delta) * color_squared_norm(e);
    }
    }
    return 0.0;
}

struct MismatchGrad {
    Color dc2{0.0, 0.0, 0.0}; // d f / d c2
    double ddelta = 0.0;      // d f / d delta
};

inline MismatchGrad mismatch_grad(const MismatchParams& p, const Color& c1, const Color& c2,
                                  double delta) {
    if (!(delta > 0.0)) throw OrientationError("mismatch_grad: delta <= 0");
    MismatchGrad g;
    switch (p.form) {
    case MismatchForm::Form8a: {
        const Color e = color_sub(c1, c2);
        for (int k = 0; k < 3; ++k) g.dc2[static_cast<std::size_t>(k)] = -2.0 * p.weight * (1.0 + delta) * e[static_cast<std::size_t>(k)];
        g.ddelta = p.weight * color_squared_norm(e);
        break;
    }
    case MismatchForm::Form8b: {
        const Color e = {c1[0] - delta * c2[0], c1[1] - delta * c2[1], c1[2] - delta * c2[2]};
        const double w = p.weight * (1.0 + 1.0 / delta);
        for (int k = 0; k < 3; ++k) g.dc2[static_cast<std::size_t>(k)] = -2.0 * w * delta * e[static_cast<std::size_t>(k)];
        g.ddelta = p.weight * (-color_squared_norm(e) / (delta * delta) -
                               2.0 * (1.0 + 1.0 / delta) * color_dot(e, c2));
        break;
    }
    }
    return g;
}

struct EnergyModel {
    ElasticParams elastic;
    MismatchParams mismatch;

    static EnergyModel standard() {
        return {ElasticParams::singular_value(), MismatchParams::make()};
    }
};

/// Psi(A) for the configured family. Requires det A > 0.
inline double elastic_eval(const ElasticParams& p, const Mat2& A) {
    const double det = A.det();
    if (!(det > 0.0)) throw OrientationError("elastic_eval: det A <= 0");
    if (p.family == ElasticFamily::Fluid) return p.big_h(det);
    const auto v = singular_values(A);
    const double va = std::pow(v[0], p.alpha) + std::pow(v[1], p.alpha);
    const double vi = std::pow(v[0], -p.alpha) + std::pow(v[1], -p.alpha);
    return va + det * vi + p.h.value(det);
}

/// dPsi/dA. For an isotropic Psi = phi(v1, v2),
///   dPsi/dA = U * diag(dphi/dv1, dphi/dv2) * V^T.
/// phi is symmetric, so both diagonal derivatives coincide in the conformal
/// limit; when v1 and v2 are within 1e-8 relative they are replaced by their
/// average, which removes SVD branch noise exactly at the minimizers.
inline Mat2 elastic_grad(const ElasticParams& p, const Mat2& A) {
    const double det = A.det();
    if (!(det > 0.0)) throw OrientationError("elastic_grad: det A <= 0");
    if (p.family == ElasticFamily::Fluid) return p.big_h_deriv(det) * A.cofactor();

    const RotationSvd svd = rotation_svd(A);
    const double v1 = svd.v1, v2 = svd.v2;
    const double a = p.alpha;
    const double hp = p.h.deriv(det);
    // d/dv1 [v1^a + v2^a + v1 v2 (v1^-a + v2^-a) + h(v1 v2)]
    double g1 = a * std::pow(v1, a - 1.0) + (1.0 - a) * v2 * std::pow(v1, -a) +
                std::pow(v2, 1.0 - a) + hp * v2;
    double g2 = a * std::pow(v2, a - 1.0) + (1.0 - a) * v1 * std::pow(v2, -a) +
                std::pow(v1, 1.0 - a) + hp * v1;
    if (v1 - v2 < 1e-8 * (v1 + v2)) {
        const double g = 0.5 * (g1 + g2);
        g1 = g2 = g;
    }
    return svd.U * Mat2::diag(g1, g2) * svd.V.transpose();
}

/// Psi and dPsi/dA from a single decomposition (assembly hot path).
inline std::pair<double, Mat2> elastic_value_and_grad(const ElasticParams& p, const Mat2& A) {
    const double det = A.det();
    if (!(det > 0.0)) throw OrientationError("elastic_value_and_grad: det A <= 0");
    if (p.family == ElasticFamily::Fluid)
        return {p.big_h(det), p.big_h_deriv(det) * A.cofactor()};

    const RotationSvd svd = rotation_svd(A);
    const double v1 = svd.v1, v2 = svd.v2;
    const double a = p.alpha;
    const double p1a = std::pow(v1, a), p2a = std::pow(v2, a);
    const double q1a = std::pow(v1, -a), q2a = std::pow(v2, -a);
    const double value = p1a + p2a + det * (q1a + q2a) + p.h.value(det);
    const double hp = p.h.deriv(det);
    double g1 = a * p1a / v1 + (1.0 - a) * v2 * q1a + v2 * q2a + hp * v2;
    double g2 = a * p2a / v2 + (1.0 - a) * v1 * q2a + v1 * q1a + hp * v1;
    if (v1 - v2 < 1e-8 * (v1 + v2)) {
        const double g = 0.5 * (g1 + g2);
        g1 = g2 = g;
    }
    return {value, svd.U * Mat2::diag(g1, g2) * svd.V.transpose()};
}

/// psi(c1, c2, A) = Psi(A) + f(c1, c2, det A).
inline double psi_eval(const EnergyModel& m, const Color& c1, const Color& c2, const Mat2& A) {
    const double det = A.det();
    if (!(det > 0.0)) throw OrientationError("psi_eval: det A <= 0");
    return elastic_eval(m.elastic, A) + mismatch_eval(m.mismatch, c1, c2, det);
}

/// d psi / dA at fixed intensities: dPsi/dA + (df/ddelta) * cofactor(A).
inline Mat2 psi_grad_A(const EnergyModel& m, const Color& c1, const Color& c2, const Mat2& A) {
    const double det = A.det();
    if (!(det > 0.0)) throw OrientationError("psi_grad_A: det A <= 0");
    const MismatchGrad mg = mismatch_grad(m.mismatch, c1, c2, det);
    return elastic_grad(m.elastic, A) + mg.ddelta * A.cofactor();
}

/// Psi(A) = H(det A) for the configured H (fluid form of Theorem-2 type).
inline double fluid_energy(const ElasticParams& p, const Mat2& A) {
    const double det = A.det();
    if (!(det > 0.0)) throw OrientationError("fluid_energy: det A <= 0");
    return p.big_h(det);
}

struct CauchyStress {
    Mat2 stress;            // DPsi(M) * M^T
    double deviation = 0.0; // Frobenius distance to its spherical part
};

/// DPsi(M)M^T and the deviation from a pure pressure p(M)*1. A zero deviation
/// is what sliding-boundary stationarity of y = Mx requires.
inline CauchyStress cauchy_stress(const ElasticParams& p, const Mat2& M) {
    CauchyStress out;
    out.stress = elastic_grad(p, M) * M.transpose();
    const double mean = 0.5 * out.stress.trace();
    out.deviation = (out.stress - Mat2::diag(mean, mean)).norm();
    return out;
}

/// Certificate for the growth bound (H2):
///   psi(c,d,A) >= C*(|A|^p + det A * |A^-1|^p) - C0,
/// with C = 2^{1-p/2} (so C = 1/2 at the default p = alpha = 4), C0 = -min h.
/// Also certifies the Hadamard-derived det bound
///   psi >= C1 * (det A)^{1 - p/2} - C0 with C1 = C * 2^{p/2} = 2.
struct CoercivityCertificate {
    double C = 0.5;
    double C0 = 0.0;
    double p = 4.0;
    double C1 = 2.0;
    long sample_count = 0;
    double worst_margin = 0.0;         // min over samples of psi - C*(...) + C0
    double worst_det_bound_margin = 0.0; // min over samples of psi + C0 - C1*det^{1-p/2}
    bool pass = false;
};

inline CoercivityCertificate certify_coercivity(const EnergyModel& m, long trial_count,
                                                std::uint64_t seed = 0x5EED) {
    if (trial_count < 1) throw InvalidInputError("certify_coercivity: trial count must be >= 1");
    CoercivityCertificate cert;
    cert.p = m.elastic.alpha;
    cert.C = std::pow(2.0, 1.0 - 0.5 * cert.p);
    cert.C0 = -m.elastic.h.min_value;
    cert.C1 = cert.C * std::pow(2.0, 0.5 * cert.p);
    cert.sample_count = trial_count;
    Rng rng(seed);
    double worst = std::numeric_limits<double>::infinity();
    double worst2 = std::numeric_limits<double>::infinity();
    for (long i = 0; i < trial_count; ++i) {
        const Mat2 A = rng.matrix_with_singular_values(1e-3, 1e3);
        Color c{rng.uniform(), rng.uniform(), rng.uniform()};
        Color d{rng.uniform(), rng.uniform(), rng.uniform()};
        const double det = A.det();
        const double normA2 = A.squared_norm();
        const double psi = psi_eval(m, c, d, A);
        // |A^-1| = |A| / det for 2x2 matrices.
        const double growth = std::pow(normA2, 0.5 * cert.p) +
                              det * std::pow(normA2 / (det * det), 0.5 * cert.p);
        worst = std::min(worst, psi - cert.C * growth + cert.C0);
        worst2 = std::min(worst2, psi + cert.C0 - cert.C1 * std::pow(det, 1.0 - 0.5 * cert.p));
    }
    cert.worst_margin = worst;
    cert.worst_det_bound_margin = worst2;
    cert.pass = worst >= 0.0 && worst2 >= 0.0;
    return cert;
}

} // namespace slidereg
