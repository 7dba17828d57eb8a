#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace bhom {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Input outside the mathematical domain of an operation.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// A rational direction outside D_delta has no near-integer point at the
/// requested gap.
class NoNearIntegerPoint : public Error {
 public:
  using Error::Error;
};

/// The stability condition (n-1) lambda > Lambda fails.
class StabilityError : public Error {
 public:
  using Error::Error;
};

/// The exterior barrier exponent is not positive.
class DegenerateBarrier : public Error {
 public:
  using Error::Error;
};

/// A discretization is not monotone at some node.
class CertificateError : public Error {
 public:
  CertificateError(std::string what, long node, double coefficient)
      : Error(std::move(what)), node_(node), coefficient_(coefficient) {}
  long node() const { return node_; }
  double coefficient() const { return coefficient_; }

 private:
  long node_;
  double coefficient_;
};

/// An iterative solver hit its iteration cap.
class ConvergenceError : public Error {
 public:
  ConvergenceError(std::string what, std::vector<double> history)
      : Error(std::move(what)), history_(std::move(history)) {}
  const std::vector<double>& residual_history() const { return history_; }

 private:
  std::vector<double> history_;
};

/// Malformed experiment configuration; carries the offending field.
class ConfigError : public Error {
 public:
  ConfigError(std::string what, std::string field)
      : Error(std::move(what)), field_(std::move(field)) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

/// Two boundary samples inside the declared continuity radius differ by more
/// than delta plus their error bars.
class DeltaContinuityError : public Error {
 public:
  DeltaContinuityError(std::string what, double s1, double s2)
      : Error(std::move(what)), s1_(s1), s2_(s2) {}
  double first() const { return s1_; }
  double second() const { return s2_; }

 private:
  double s1_;
  double s2_;
};

}  // namespace bhom
