#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>

namespace enz {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using VectorRef = Eigen::Ref<const Vector>;
using MatrixRef = Eigen::Ref<const Matrix>;
using Index = Eigen::Index;

/// Failure categories shared by every module. The numeric values are part of
/// the C ABI (see enz.h) and must not be reordered.
enum class Errc : int {
  ZeroVector = 1,
  InvalidArgument = 2,
  DimensionMismatch = 3,
  NonPositiveScale = 4,
  NonPositiveEps = 5,
  BadK = 6,
  BadCorrelation = 7,
  BadDelta = 8,
  BadOrder = 9,
  DeltaUnavailable = 10,
  LineSearchFailure = 11,
  NonFiniteObjective = 12,
  ZeroIterate = 13,
  EmptyInput = 14,
  ImageFormat = 15,
  Io = 16,
  Parse = 17,
};

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what) : std::runtime_error(what), code_(code) {}
  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

inline void require(bool cond, Errc code, const char* what) {
  if (!cond) throw Error(code, what);
}

}  // namespace enz
