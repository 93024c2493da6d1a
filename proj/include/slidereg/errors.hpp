#pragma once

#include <stdexcept>
#include <string>

namespace slidereg {

/// Non-finite or otherwise malformed input value.
struct InvalidInputError : std::runtime_error {
    explicit InvalidInputError(const std::string& what) : std::runtime_error(what) {}
};

/// det A <= 0 where an orientation-preserving matrix is required.
struct OrientationError : std::runtime_error {
    explicit OrientationError(const std::string& what) : std::runtime_error(what) {}
};

/// Transform not representable for the given intensity source.
struct UnsupportedTransformError : std::runtime_error {
    explicit UnsupportedTransformError(const std::string& what) : std::runtime_error(what) {}
};

/// Deformation state violates determinant positivity, boundary monotonicity
/// or domain containment.
struct InfeasibleStateError : std::runtime_error {
    explicit InfeasibleStateError(const std::string& what) : std::runtime_error(what) {}
};

struct InvalidLandmarksError : std::runtime_error {
    explicit InvalidLandmarksError(const std::string& what) : std::runtime_error(what) {}
};

struct UnknownPatternError : std::runtime_error {
    explicit UnknownPatternError(const std::string& what) : std::runtime_error(what) {}
};

struct UnknownExperimentError : std::runtime_error {
    explicit UnknownExperimentError(const std::string& what) : std::runtime_error(what) {}
};

struct IoError : std::runtime_error {
    explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

} // namespace slidereg
