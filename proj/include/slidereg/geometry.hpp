#pragma once

#include <array>
#include <cmath>
#include <limits>

#include "slidereg/errors.hpp"

namespace slidereg {

struct Vec2 {
    double x = 0.0;
    double y = 0.0;

    constexpr Vec2() = default;
    constexpr Vec2(double x_, double y_) : x(x_), y(y_) {}

    constexpr Vec2 operator+(Vec2 o) const { return {x + o.x, y + o.y}; }
    constexpr Vec2 operator-(Vec2 o) const { return {x - o.x, y - o.y}; }
    constexpr Vec2 operator*(double s) const { return {x * s, y * s}; }
    constexpr Vec2 operator/(double s) const { return {x / s, y / s}; }
    constexpr Vec2& operator+=(Vec2 o) { x += o.x; y += o.y; return *this; }
    constexpr Vec2& operator-=(Vec2 o) { x -= o.x; y -= o.y; return *this; }
    constexpr Vec2 operator-() const { return {-x, -y}; }

    constexpr double dot(Vec2 o) const { return x * o.x + y * o.y; }
    /// z-component of the 3D cross product; twice the signed area of (0, *this, o).
    constexpr double cross(Vec2 o) const { return x * o.y - y * o.x; }
    double norm() const { return std::hypot(x, y); }
    constexpr double squared_norm() const { return x * x + y * y; }

    bool finite() const { return std::isfinite(x) && std::isfinite(y); }
};

constexpr Vec2 operator*(double s, Vec2 v) { return {v.x * s, v.y * s}; }

/// 2x2 matrix, row-major: [[a, b], [c, d]].
struct Mat2 {
    double a = 0.0, b = 0.0, c = 0.0, d = 0.0;

    constexpr Mat2() = default;
    constexpr Mat2(double a_, double b_, double c_, double d_) : a(a_), b(b_), c(c_), d(d_) {}

    static constexpr Mat2 identity() { return {1.0, 0.0, 0.0, 1.0}; }
    static Mat2 rotation(double angle) {
        const double cs = std::cos(angle), sn = std::sin(angle);
        return {cs, -sn, sn, cs};
    }
    static constexpr Mat2 from_columns(Vec2 c0, Vec2 c1) { return {c0.x, c1.x, c0.y, c1.y}; }
    static constexpr Mat2 diag(double v0, double v1) { return {v0, 0.0, 0.0, v1}; }

    constexpr double det() const { return a * d - b * c; }
    constexpr double trace() const { return a + d; }
    constexpr double squared_norm() const { return a * a + b * b + c * c + d * d; }
    double norm() const { return std::sqrt(squared_norm()); }

    constexpr Mat2 transpose() const { return {a, c, b, d}; }

    /// Matrix of cofactors: entry (i,j) = d(det)/dA_ij. For 2x2 this is
    /// [[d, -c], [-b, a]]; it satisfies cofactor(A) * A^T = det(A) * I.
    constexpr Mat2 cofactor() const { return {d, -c, -b, a}; }

    constexpr Mat2 inverse() const {
        const double dt = det();
        return {d / dt, -b / dt, -c / dt, a / dt};
    }

    constexpr Vec2 operator*(Vec2 v) const { return {a * v.x + b * v.y, c * v.x + d * v.y}; }
    constexpr Mat2 operator*(Mat2 o) const {
        return {a * o.a + b * o.c, a * o.b + b * o.d,
                c * o.a + d * o.c, c * o.b + d * o.d};
    }
    constexpr Mat2 operator+(Mat2 o) const { return {a + o.a, b + o.b, c + o.c, d + o.d}; }
    constexpr Mat2 operator-(Mat2 o) const { return {a - o.a, b - o.b, c - o.c, d - o.d}; }
    constexpr Mat2 operator*(double s) const { return {a * s, b * s, c * s, d * s}; }

    /// Frobenius inner product.
    constexpr double ddot(Mat2 o) const { return a * o.a + b * o.b + c * o.c + d * o.d; }

    constexpr Vec2 col(int j) const { return j == 0 ? Vec2{a, c} : Vec2{b, d}; }

    bool finite() const {
        return std::isfinite(a) && std::isfinite(b) && std::isfinite(c) && std::isfinite(d);
    }
};

constexpr Mat2 operator*(double s, Mat2 m) { return m * s; }
constexpr Mat2 outer(Vec2 u, Vec2 v) { return {u.x * v.x, u.x * v.y, u.y * v.x, u.y * v.y}; }

/// Rotation-form SVD of an orientation-preserving 2x2 matrix:
/// A = U * diag(v1, v2) * V^T with U, V in SO(2) and v1 >= v2 > 0.
struct RotationSvd {
    Mat2 U;
    double v1 = 0.0;
    double v2 = 0.0;
    Mat2 V;

    Mat2 reconstruct() const { return U * Mat2::diag(v1, v2) * V.transpose(); }
};

/// Singular values of A (eigenvalues of sqrt(A^T A)), largest first.
/// Closed form: with E=(a+d)/2, F=(a-d)/2, G=(c+b)/2, H=(c-b)/2,
/// v1 = hypot(E,H) + hypot(F,G) and v2 = hypot(E,H) - hypot(F,G).
/// Requires det A > 0 (orientation-preserving deformation gradients).
inline std::array<double, 2> singular_values(const Mat2& A) {
    if (!A.finite()) throw InvalidInputError("singular_values: non-finite matrix entry");
    if (!(A.det() > 0.0)) throw OrientationError("singular_values: det A <= 0");
    const double E = 0.5 * (A.a + A.d);
    const double F = 0.5 * (A.a - A.d);
    const double G = 0.5 * (A.c + A.b);
    const double H = 0.5 * (A.c - A.b);
    const double Q = std::hypot(E, H);
    const double R = std::hypot(F, G);
    return {Q + R, Q - R};
}

/// Full rotation SVD. U and V are proper rotations by construction, so this
/// is stable at coincident singular values (F = G = 0 falls back to the
/// polar factor split evenly between U and V).
inline RotationSvd rotation_svd(const Mat2& A) {
    if (!A.finite()) throw InvalidInputError("rotation_svd: non-finite matrix entry");
    if (!(A.det() > 0.0)) throw OrientationError("rotation_svd: det A <= 0");
    const double E = 0.5 * (A.a + A.d);
    const double F = 0.5 * (A.a - A.d);
    const double G = 0.5 * (A.c + A.b);
    const double H = 0.5 * (A.c - A.b);
    const double Q = std::hypot(E, H);
    const double R = std::hypot(F, G);
    const double a2 = std::atan2(H, E); // phi + psi
    const double a1 = std::atan2(G, F); // phi - psi
    const double phi = 0.5 * (a2 + a1);
    const double psi = 0.5 * (a2 - a1);
    RotationSvd out;
    out.U = Mat2::rotation(phi);
    out.V = Mat2::rotation(-psi);
    out.v1 = Q + R;
    out.v2 = Q - R;
    return out;
}

/// Frobenius distance from A (det A > 0) to SO(2):
/// sqrt((v1-1)^2 + (v2-1)^2), via the polar decomposition.
inline double distance_to_rotations(const Mat2& A) {
    const auto v = singular_values(A);
    return std::hypot(v[0] - 1.0, v[1] - 1.0);
}

/// Affine map x -> M x + a.
struct AffineMap2 {
    Mat2 M = Mat2::identity();
    Vec2 a{0.0, 0.0};

    Vec2 operator()(Vec2 x) const { return M * x + a; }

    AffineMap2 inverse() const {
        const Mat2 Mi = M.inverse();
        return {Mi, -(Mi * a)};
    }

    /// this ∘ other (apply `other` first).
    AffineMap2 compose(const AffineMap2& other) const {
        return {M * other.M, M * other.a + a};
    }

    static AffineMap2 rigid(double angle, Vec2 translation) {
        return {Mat2::rotation(angle), translation};
    }

    /// Rigid rotation about a fixed point.
    static AffineMap2 rotation_about(double angle, Vec2 center) {
        const Mat2 R = Mat2::rotation(angle);
        return {R, center - R * center};
    }
};

inline double clamp(double v, double lo, double hi) { return v < lo ? lo : (v > hi ? hi : v); }

} // namespace slidereg
