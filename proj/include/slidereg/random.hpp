#pragma once

#include <cstdint>
#include <random>

#include "slidereg/geometry.hpp"

namespace slidereg {

/// Deterministic RNG used by all experiments. std::uniform_real_distribution
/// is implementation-defined, so uniforms are derived from raw mt19937_64
/// words directly: same seed, same stream, everywhere.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    /// Uniform in [0, 1).
    double uniform() {
        return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// log-uniform on [lo, hi], lo > 0.
    double log_uniform(double lo, double hi) {
        return std::exp(uniform(std::log(lo), std::log(hi)));
    }

    std::uint64_t next_word() { return engine_(); }

    Vec2 uniform_vec(double lo, double hi) {
        const double x = uniform(lo, hi); // evaluation order of {f(), f()} is unspecified
        const double y = uniform(lo, hi);
        return {x, y};
    }

    /// Random matrix with det > det_floor, entries uniform in [lo, hi].
    Mat2 orientation_preserving_matrix(double lo, double hi, double det_floor = 1e-2) {
        for (;;) {
            const double a = uniform(lo, hi);
            const double b = uniform(lo, hi);
            const double c = uniform(lo, hi);
            const double d = uniform(lo, hi);
            const Mat2 m{a, b, c, d};
            if (m.det() > det_floor) return m;
        }
    }

    /// Random matrix via U diag(v) V^T with log-uniform singular values.
    Mat2 matrix_with_singular_values(double v_lo, double v_hi) {
        const double phi = uniform(0.0, 6.283185307179586);
        const double psi = uniform(0.0, 6.283185307179586);
        const double v1 = log_uniform(v_lo, v_hi);
        const double v2 = log_uniform(v_lo, v_hi);
        return Mat2::rotation(phi) * Mat2::diag(v1, v2) * Mat2::rotation(psi);
    }

    Mat2 rotation() { return Mat2::rotation(uniform(0.0, 6.283185307179586)); }

  private:
    std::mt19937_64 engine_;
};

} // namespace slidereg
