#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>
#include <string>

namespace motorkit {

#ifdef MOTORKIT_SINGLE_PRECISION
using real = float;
#else
using real = double;
#endif

using Vec2 = Eigen::Matrix<real, 2, 1>;
using Mat2 = Eigen::Matrix<real, 2, 2>;
using VecX = Eigen::Matrix<real, Eigen::Dynamic, 1>;
using MatX = Eigen::Matrix<real, Eigen::Dynamic, Eigen::Dynamic>;

inline constexpr real kPi = real(3.14159265358979323846L);

// Base error for everything the library throws on purpose.
struct Error : std::runtime_error {
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};
// Bad dimensions, unknown names, inconsistent specs.
struct ConfigError : Error {
  explicit ConfigError(const std::string& what) : Error(what) {}
};
// NaN/Inf or mathematically ill-posed inputs (e.g. under-determined solves).
struct NumericError : Error {
  explicit NumericError(const std::string& what) : Error(what) {}
};
// File format / serialization problems.
struct IoError : Error {
  explicit IoError(const std::string& what) : Error(what) {}
};
// Authored motion that cannot be realized: unreachable targets, joint limit
// violations, or clips that fail their own invariants.
struct GenerationError : Error {
  explicit GenerationError(const std::string& what) : Error(what) {}
};
// Reference frames inconsistent with the task phase machine.
struct SegmentationError : Error {
  explicit SegmentationError(const std::string& what) : Error(what) {}
};

// Wraps an angle to (-pi, pi].
inline real wrap_angle(real a) {
  a = std::fmod(a + kPi, real(2) * kPi);
  if (a <= real(0)) a += real(2) * kPi;
  return a - kPi;
}

inline Mat2 rot2(real angle) {
  const real c = std::cos(angle), s = std::sin(angle);
  Mat2 r;
  r << c, -s, s, c;
  return r;
}

inline bool all_finite(const VecX& v) { return v.allFinite(); }

}  // namespace motorkit
