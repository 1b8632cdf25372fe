#pragma once

// Common numeric types, physical constants and the error hierarchy shared by
// every momtopo module.

#include <complex>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace momtopo {

inline constexpr const char* momtopo_version = "0.1.0";

using cplx = std::complex<double>;

using MatC = Eigen::MatrixXcd;
using MatR = Eigen::MatrixXd;
using VecC = Eigen::VectorXcd;
using VecR = Eigen::VectorXd;
using RowC = Eigen::RowVectorXcd;
using Vec3 = Eigen::Vector3d;

using DofIndex = int;
using DofList = std::vector<DofIndex>;

namespace constants {
inline constexpr double pi = 3.14159265358979323846;
inline constexpr double c0 = 299792458.0;
inline constexpr double mu0 = 1.25663706212e-6;
inline constexpr double eps0 = 1.0 / (mu0 * c0 * c0);
// free-space impedance
inline constexpr double eta0 = mu0 * c0;
inline constexpr cplx j{0.0, 1.0};
}  // namespace constants

inline constexpr double infinity = std::numeric_limits<double>::infinity();

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Precondition or argument violation detected at an API boundary.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// Broken mesh topology (non-manifold edge, degenerate triangle, ...).
class MeshError : public Error {
 public:
  using Error::Error;
};

/// Numerical failure: singular systems, degenerate pivots, zero denominators.
class NumericalError : public Error {
 public:
  enum class Kind {
    singular_system,
    degenerate_pivot,
    degenerate_schur,
    non_radiating,
    open_port,
    zero_denominator,
    indefinite,
    no_sign_change,
    rank_zero,
  };

  NumericalError(Kind kind, const std::string& what) : Error(what), kind_(kind) {}
  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

/// Problems reading or writing persisted artifacts.
class IoError : public Error {
 public:
  using Error::Error;
};

class FormatError : public IoError {
 public:
  enum class Kind { bad_magic, version_mismatch, truncated, malformed };

  FormatError(Kind kind, const std::string& what) : IoError(what), kind_(kind) {}
  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

/// Run-configuration validation failure; carries every offending key.
class ConfigError : public Error {
 public:
  explicit ConfigError(std::vector<std::string> problems)
      : Error(join(problems)), problems_(std::move(problems)) {}
  const std::vector<std::string>& problems() const noexcept { return problems_; }

 private:
  static std::string join(const std::vector<std::string>& items) {
    std::string out = "invalid configuration:";
    for (const auto& s : items) out += "\n  " + s;
    return out;
  }
  std::vector<std::string> problems_;
};

}  // namespace momtopo
