#include "bhom/operators.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "bhom/error.hpp"

namespace bhom {

double pucci_eval(const SymMatrix& M, double lambda, double Lambda, int sign) {
  if (!(lambda > 0.0) || !(Lambda >= lambda)) throw DomainError("pucci_eval: need 0 < lambda <= Lambda");
  double scale = 1.0;
  for (int i = 0; i < M.dim(); ++i)
    for (int j = 0; j < M.dim(); ++j) scale = std::max(scale, std::abs(M(i, j)));
  if (M.max_asymmetry() > 1e-10 * scale) throw DomainError("pucci_eval: matrix is not symmetric");
  const double hi = sign >= 0 ? Lambda : lambda;
  const double lo = sign >= 0 ? lambda : Lambda;
  double v = 0.0;
  for (double e : symmetric_eigenvalues(M)) v += e > 0.0 ? hi * e : lo * e;
  return v;
}

std::string to_string(OperatorKind k) {
  switch (k) {
    case OperatorKind::PucciPlus: return "pucci_plus";
    case OperatorKind::PucciMinus: return "pucci_minus";
    case OperatorKind::Linear: return "linear";
    case OperatorKind::Bellman: return "bellman";
  }
  return "unknown";
}

namespace {

void check_constants(double lambda, double Lambda) {
  if (!(lambda > 0.0) || !(Lambda >= lambda))
    throw DomainError("elliptic constants must satisfy 0 < lambda <= Lambda");
}

Point default_period(int n, Point period) {
  if (period.empty()) return Point(n, 1.0);
  if (static_cast<int>(period.size()) != n) throw DomainError("period must have one entry per axis");
  for (double p : period)
    if (!(p > 0.0)) throw DomainError("periods must be positive");
  return period;
}

}  // namespace

EllipticOperator EllipticOperator::pucci(int sign, int n, double lambda, double Lambda) {
  check_constants(lambda, Lambda);
  if (n < 1 || n > 3) throw DomainError("operator dimension must be 1, 2 or 3");
  EllipticOperator op;
  op.kind_ = sign >= 0 ? OperatorKind::PucciPlus : OperatorKind::PucciMinus;
  op.n_ = n;
  op.lambda_ = lambda;
  op.Lambda_ = Lambda;
  op.period_ = Point(n, 1.0);
  return op;
}

EllipticOperator EllipticOperator::linear(int n, std::vector<Expr> a, double lambda, double Lambda,
                                          Point period) {
  check_constants(lambda, Lambda);
  if (n < 1 || n > 3) throw DomainError("operator dimension must be 1, 2 or 3");
  if (static_cast<int>(a.size()) != n * n) throw DomainError("linear operator needs n*n coefficient expressions");
  EllipticOperator op;
  op.kind_ = OperatorKind::Linear;
  op.n_ = n;
  op.lambda_ = lambda;
  op.Lambda_ = Lambda;
  op.period_ = default_period(n, std::move(period));
  op.coeffs_.push_back(std::move(a));
  return op;
}

EllipticOperator EllipticOperator::constant_linear(const SymMatrix& a, double lambda, double Lambda) {
  const int n = a.dim();
  std::vector<Expr> e;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) e.push_back(Expr::constant(0.5 * (a(i, j) + a(j, i))));
  return linear(n, std::move(e), lambda, Lambda);
}

EllipticOperator EllipticOperator::laplacian(int n) {
  return constant_linear(SymMatrix::identity(n), 1.0, 1.0);
}

EllipticOperator EllipticOperator::bellman(const std::vector<EllipticOperator>& members, bool sup) {
  if (members.empty() || members.size() > 64) throw DomainError("bellman family needs 1..64 linear members");
  EllipticOperator op;
  op.kind_ = OperatorKind::Bellman;
  op.n_ = members.front().dim();
  op.sup_ = sup;
  op.lambda_ = members.front().lambda();
  op.Lambda_ = members.front().Lambda();
  op.period_ = members.front().period();
  for (const auto& m : members) {
    if (m.kind() != OperatorKind::Linear) throw DomainError("bellman members must be linear");
    if (m.dim() != op.n_) throw DomainError("bellman members must share the dimension");
    op.lambda_ = std::min(op.lambda_, m.lambda());
    op.Lambda_ = std::max(op.Lambda_, m.Lambda());
    op.coeffs_.push_back(m.coeffs_.front());
  }
  return op;
}

void EllipticOperator::set_period(Point period) { period_ = default_period(n_, std::move(period)); }

SymMatrix EllipticOperator::coefficients(int member, std::span<const double> y) const {
  const auto& c = coeffs_.at(member);
  SymMatrix a(n_);
  for (int i = 0; i < n_; ++i)
    for (int j = 0; j < n_; ++j) a(i, j) = 0.5 * (c[n_ * i + j]({}, y) + c[n_ * j + i]({}, y));
  return a;
}

double EllipticOperator::operator()(const SymMatrix& M, std::span<const double> y) const {
  switch (kind_) {
    case OperatorKind::PucciPlus: return pucci_eval(M, lambda_, Lambda_, +1);
    case OperatorKind::PucciMinus: return pucci_eval(M, lambda_, Lambda_, -1);
    case OperatorKind::Linear:
    case OperatorKind::Bellman: {
      double best = 0.0;
      for (int m = 0; m < members(); ++m) {
        const SymMatrix a = coefficients(m, y);
        double v = 0.0;
        for (int i = 0; i < n_; ++i)
          for (int j = 0; j < n_; ++j) v += a(i, j) * M(i, j);
        if (m == 0 || (sup_ ? v > best : v < best)) best = v;
      }
      return best;
    }
  }
  return 0.0;
}

bool EllipticOperator::y_dependent() const {
  for (const auto& c : coeffs_)
    for (const auto& e : c)
      if (e.depends_on_y()) return true;
  return false;
}

bool EllipticOperator::rotation_invariant() const {
  if (is_pucci()) return true;
  if (kind_ != OperatorKind::Linear || y_dependent()) return false;
  const SymMatrix a = coefficients(0, {});
  for (int i = 0; i < n_; ++i)
    for (int j = 0; j < n_; ++j)
      if (std::abs(a(i, j) - (i == j ? a(0, 0) : 0.0)) > 1e-15) return false;
  return true;
}

std::string EllipticOperator::describe() const {
  std::ostringstream os;
  os << to_string(kind_) << "(n=" << n_ << ", lambda=" << lambda_ << ", Lambda=" << Lambda_;
  if (!is_pucci()) {
    os << (kind_ == OperatorKind::Bellman ? (sup_ ? ", sup" : ", inf") : "");
    for (const auto& c : coeffs_) {
      os << ", [";
      for (std::size_t k = 0; k < c.size(); ++k) os << (k ? "; " : "") << c[k].source();
      os << "]";
    }
  }
  os << ")";
  return os.str();
}

DataNorms estimate_data_norms(const Expr& g, std::span<const double> x, std::span<const double> period, int dim,
                              int per_axis) {
  if (dim < 1 || dim > 3 || static_cast<int>(period.size()) < dim) throw DomainError("estimate_data_norms: bad dimension");
  DataNorms out;
  std::vector<int> idx(dim, 0);
  Point y(dim);
  auto gv = [&](const Point& yy) { return g(x, yy); };
  for (;;) {
    for (int i = 0; i < dim; ++i) y[i] = period[i] * (idx[i] + 0.5) / per_axis;
    const double g0 = gv(y);
    out.sup_g = std::max(out.sup_g, std::abs(g0));
    SymMatrix H(dim);
    double grad2 = 0.0;
    for (int i = 0; i < dim; ++i) {
      const double d = 1e-4 * period[i];
      Point yp = y, ym = y;
      yp[i] += d;
      ym[i] -= d;
      const double gp = gv(yp), gm = gv(ym);
      grad2 += std::pow((gp - gm) / (2 * d), 2);
      H(i, i) = (gp - 2 * g0 + gm) / (d * d);
      for (int j = i + 1; j < dim; ++j) {
        const double e = 1e-4 * period[j];
        Point a = y, b = y, c = y, dd = y;
        a[i] += d, a[j] += e;
        b[i] += d, b[j] -= e;
        c[i] -= d, c[j] += e;
        dd[i] -= d, dd[j] -= e;
        H(i, j) = H(j, i) = (gv(a) - gv(b) - gv(c) + gv(dd)) / (4 * d * e);
      }
      Point yshift = y;
      yshift[i] += period[i];
      out.periodicity_error = std::max(out.periodicity_error, std::abs(gv(yshift) - g0));
    }
    out.sup_grad_g = std::max(out.sup_grad_g, std::sqrt(grad2));
    for (double e : symmetric_eigenvalues(H)) out.sup_hess_g = std::max(out.sup_hess_g, std::abs(e));
    int i = dim - 1;
    while (i >= 0 && ++idx[i] == per_axis) idx[i--] = 0;
    if (i < 0) break;
  }
  return out;
}

ValidationReport validate_operator(const EllipticOperator& op, int samples, std::uint64_t seed) {
  if (samples < 1) throw DomainError("validate_operator: samples must be >= 1");
  const int n = op.dim();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<int> shift(-3, 3);
  ValidationReport rep;
  rep.samples = samples;
  for (int s = 0; s < samples; ++s) {
    SymMatrix M(n), B(n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j <= i; ++j) M(i, j) = M(j, i) = gauss(rng);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) B(i, j) = gauss(rng);
    SymMatrix N(n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        for (int k = 0; k < n; ++k) N(i, j) += B(i, k) * B(j, k);
    Point y(n);
    for (int i = 0; i < n; ++i) y[i] = op.period()[i] * unit(rng);
    const double t = std::exp(std::log(0.1) + unit(rng) * std::log(100.0));

    const double fm = op(M, y);
    const double fmn = op(M + N, y);
    const double tr = N.trace();
    const double d = fmn - fm;
    const double scale = std::max(1.0, tr);
    rep.ellipticity_violation =
        std::max({rep.ellipticity_violation, (op.lambda() * tr - d) / scale, (d - op.Lambda() * tr) / scale});
    rep.monotonicity_violation = std::max(rep.monotonicity_violation, fm - fmn);

    const double ft = op(M * t, y);
    rep.homogeneity_error =
        std::max(rep.homogeneity_error, std::abs(ft - t * fm) / std::max({1.0, std::abs(t * fm), std::abs(ft)}));

    Point ys = y;
    for (int i = 0; i < n; ++i) ys[i] += op.period()[i] * shift(rng);
    rep.periodicity_error = std::max(rep.periodicity_error, std::abs(op(M, ys) - fm) / std::max(1.0, std::abs(fm)));

    for (int m = 0; m < op.members(); ++m) {
      for (double e : symmetric_eigenvalues(op.coefficients(m, y)))
        rep.coefficient_violation =
            std::max({rep.coefficient_violation, op.lambda() - e, e - op.Lambda()});
    }
  }
  constexpr double tol = 1e-9;
  auto fail = [&](double v, const char* what) {
    if (v > tol) {
      std::ostringstream os;
      os << what << " violated by " << v;
      rep.failures.push_back(os.str());
    }
  };
  fail(rep.ellipticity_violation, "ellipticity bound lambda tr N <= F(M+N)-F(M) <= Lambda tr N");
  fail(rep.monotonicity_violation, "degenerate-elliptic monotonicity");
  fail(rep.homogeneity_error, "positive homogeneity");
  fail(rep.periodicity_error, "periodicity");
  fail(rep.coefficient_violation, "coefficient eigenvalues in [lambda, Lambda]");
  rep.passed = rep.failures.empty();
  return rep;
}

}  // namespace bhom
