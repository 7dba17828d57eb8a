#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "bhom/expr.hpp"
#include "bhom/linalg.hpp"

namespace bhom {

/// M+ (sign > 0) or M- (sign < 0) of a symmetric matrix.
double pucci_eval(const SymMatrix& M, double lambda, double Lambda, int sign);

enum class OperatorKind { PucciPlus, PucciMinus, Linear, Bellman };

std::string to_string(OperatorKind k);

/// Uniformly elliptic, positively homogeneous F(M, y), periodic in y.
///
/// Linear operators are F(M, y) = tr(a(y) M) with a(y) given by n*n
/// expressions in y1..yn (row-major, symmetrized on evaluation). Bellman
/// operators are the sup or inf over a finite family of linear members.
class EllipticOperator {
 public:
  static EllipticOperator pucci(int sign, int n, double lambda, double Lambda);
  static EllipticOperator linear(int n, std::vector<Expr> a, double lambda, double Lambda,
                                 Point period = {});
  static EllipticOperator constant_linear(const SymMatrix& a, double lambda, double Lambda);
  static EllipticOperator laplacian(int n);
  static EllipticOperator bellman(const std::vector<EllipticOperator>& members, bool sup);

  OperatorKind kind() const { return kind_; }
  int dim() const { return n_; }
  double lambda() const { return lambda_; }
  double Lambda() const { return Lambda_; }
  const Point& period() const { return period_; }
  void set_period(Point period);

  double operator()(const SymMatrix& M, std::span<const double> y) const;

  /// Number of linear members (1 for linear, 0 for Pucci).
  int members() const { return static_cast<int>(coeffs_.size()); }
  bool is_sup() const { return sup_; }
  /// Coefficient matrix of a linear member at y.
  SymMatrix coefficients(int member, std::span<const double> y) const;
  bool is_pucci() const { return kind_ == OperatorKind::PucciPlus || kind_ == OperatorKind::PucciMinus; }
  bool y_dependent() const;
  /// F(Q M Q^T, y) = F(M, y) for every rotation Q.
  bool rotation_invariant() const;
  /// A single linear member with constant, y-independent coefficients.
  bool is_constant_linear() const { return kind_ == OperatorKind::Linear && !y_dependent(); }

  std::string describe() const;

 private:
  OperatorKind kind_ = OperatorKind::PucciPlus;
  int n_ = 2;
  double lambda_ = 1.0;
  double Lambda_ = 1.0;
  bool sup_ = true;
  Point period_;
  std::vector<std::vector<Expr>> coeffs_;
};

/// f(x, y) and g(x, y) of the oscillating problem with their period cell.
struct SourceAndBoundaryData {
  Expr f;
  Expr g;
  Point period;  // per axis; empty means unit periods
};

struct DataNorms {
  double sup_g = 0.0;
  double sup_grad_g = 0.0;
  double sup_hess_g = 0.0;
  double periodicity_error = 0.0;
  /// sup|g| + sup|grad g| + sup|D^2 g|.
  double c2() const { return sup_g + sup_grad_g + sup_hess_g; }
};

/// Samples g(x, .) on a per-axis grid of one period cell (derivatives by
/// central differences).
DataNorms estimate_data_norms(const Expr& g, std::span<const double> x, std::span<const double> period,
                              int dim, int per_axis = 48);

struct ValidationReport {
  int samples = 0;
  /// max over samples of how far F(M+N)-F(M) leaves [lambda tr N, Lambda tr N].
  double ellipticity_violation = 0.0;
  double homogeneity_error = 0.0;  // relative
  double periodicity_error = 0.0;
  double monotonicity_violation = 0.0;
  /// Linear members: how far coefficient eigenvalues leave [lambda, Lambda].
  double coefficient_violation = 0.0;
  bool passed = false;
  std::vector<std::string> failures;
};

ValidationReport validate_operator(const EllipticOperator& op, int samples, std::uint64_t seed = 12345);

struct EffectiveOperatorEstimate {
  double value = 0.0;
  /// max - min of delta * v over the cell grid.
  double spread = 0.0;
  int policy_iterations = 0;
  std::vector<double> residual_history;
};

/// Approximate cell problem delta v = F(M + D^2 v, y) on the periodic
/// cell_grid^n torus; returns delta times the grid average of v.
EffectiveOperatorEstimate effective_operator_estimate(const EllipticOperator& op, const SymMatrix& M,
                                                      double delta_ergodic, int cell_grid, int stencil_order = 2);

}  // namespace bhom
