// Ergodic approximation of the effective interior operator.

#include <Eigen/Sparse>
#include <Eigen/SparseLU>
#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "bhom/error.hpp"
#include "bhom/fdsolver.hpp"
#include "bhom/operators.hpp"

namespace bhom {

EffectiveOperatorEstimate effective_operator_estimate(const EllipticOperator& op, const SymMatrix& M,
                                                      double delta_ergodic, int cell_grid, int stencil_order) {
  if (!(delta_ergodic > 0.0)) throw DomainError("effective_operator_estimate: delta must be positive");
  if (cell_grid < 4) throw DomainError("effective_operator_estimate: cell grid must be >= 4");
  const int n = op.dim();
  if (M.dim() != n) throw DomainError("effective_operator_estimate: matrix dimension mismatch");
  for (int i = 1; i < n; ++i)
    if (std::abs(op.period()[i] - op.period()[0]) > 1e-14)
      throw DomainError("effective_operator_estimate: needs equal periods on all axes");
  const Stencil st = make_stencil(n, stencil_order);
  const std::size_t nd = st.dirs.size();
  const double h = op.period()[0] / cell_grid;
  const double ih2 = 1.0 / (h * h);
  std::size_t N = 1;
  for (int i = 0; i < n; ++i) N *= static_cast<std::size_t>(cell_grid);

  auto node_of = [&](std::array<int, 3> ijk) {
    std::size_t idx = 0;
    for (int i = n - 1; i >= 0; --i) idx = idx * cell_grid + static_cast<std::size_t>(((ijk[i] % cell_grid) + cell_grid) % cell_grid);
    return idx;
  };
  auto ijk_of = [&](std::size_t idx) {
    std::array<int, 3> ijk{0, 0, 0};
    for (int i = 0; i < n; ++i) {
      ijk[i] = static_cast<int>(idx % cell_grid);
      idx /= cell_grid;
    }
    return ijk;
  };
  std::vector<std::int64_t> nb(N * 2 * nd);
  for (std::size_t idx = 0; idx < N; ++idx) {
    const auto ijk = ijk_of(idx);
    for (std::size_t d = 0; d < nd; ++d) {
      const auto& e = st.dirs[d];
      nb[idx * 2 * nd + 2 * d] = static_cast<std::int64_t>(node_of({ijk[0] + e[0], ijk[1] + e[1], ijk[2] + e[2]}));
      nb[idx * 2 * nd + 2 * d + 1] = static_cast<std::int64_t>(node_of({ijk[0] - e[0], ijk[1] - e[1], ijk[2] - e[2]}));
    }
  }
  // Second directional derivative of the constant matrix along each stencil direction.
  std::vector<double> mdir(nd);
  for (std::size_t d = 0; d < nd; ++d) {
    const Point e{double(st.dirs[d][0]), double(st.dirs[d][1]), double(st.dirs[d][2])};
    mdir[d] = M.quadratic(std::span<const double>(e.data(), n)) / st.len2[d];
  }

  const bool pucci = op.is_pucci();
  const bool plus = op.kind() == OperatorKind::PucciPlus;
  const double lam = op.lambda(), Lam = op.Lambda();
  auto coef = [&](double s) { return plus ? (s > 0 ? Lam : lam) : (s > 0 ? lam : Lam); };

  // Pucci frames only see M along lattice directions; the constant shift
  // restores F(M) exactly at v = 0 without touching monotonicity.
  double kappa = 0.0;
  if (pucci) {
    double best = 0.0;
    for (std::size_t f = 0; f < st.frames.size(); ++f) {
      double v = 0.0;
      for (int d : st.frames[f]) v += coef(mdir[d]) * mdir[d];
      if (f == 0 || (plus ? v > best : v < best)) best = v;
    }
    kappa = op(M, {}) - best;
  }

  const int members = pucci ? 0 : op.members();
  std::vector<double> weights;
  if (!pucci) {
    weights.assign(N * members * nd, 0.0);
    std::vector<char> avail(nd, 1);
    for (std::size_t idx = 0; idx < N; ++idx) {
      const auto ijk = ijk_of(idx);
      Point y(n);
      for (int i = 0; i < n; ++i) y[i] = h * ijk[i];
      for (int m = 0; m < members; ++m) {
        const WeightResult wr = monotone_weights(op.coefficients(m, y), st, avail);
        if (!wr.ok) {
          std::ostringstream os;
          os << "cell problem: coefficient " << wr.coefficient << " = " << wr.value
             << " has no monotone stencil at order " << st.order;
          throw CertificateError(os.str(), static_cast<long>(idx), wr.value);
        }
        std::copy(wr.w.begin(), wr.w.end(), weights.begin() + (idx * members + m) * nd);
      }
    }
  }

  // value(idx) = b + sum_j w_j (v_j - v_i) for the optimal policy at v.
  struct Choice {
    std::array<std::int64_t, 40> node;
    std::array<double, 40> w;
    int count = 0;
    double b = 0.0;
    std::uint32_t policy = 0;
  };
  auto evaluate = [&](std::size_t idx, const Eigen::VectorXd& v, Choice* ch) {
    std::array<double, 9> D{};
    const std::int64_t* nbi = &nb[idx * 2 * nd];
    for (std::size_t d = 0; d < nd; ++d) D[d] = (v[nbi[2 * d]] + v[nbi[2 * d + 1]] - 2.0 * v[idx]) * ih2 / st.len2[d];
    if (ch) ch->count = 0;
    if (pucci) {
      int bestf = 0;
      double best = 0.0;
      for (std::size_t f = 0; f < st.frames.size(); ++f) {
        double val = 0.0;
        for (int d : st.frames[f]) val += coef(mdir[d] + D[d]) * (mdir[d] + D[d]);
        if (f == 0 || (plus ? val > best : val < best)) {
          best = val;
          bestf = static_cast<int>(f);
        }
      }
      if (ch) {
        ch->b = kappa;
        ch->policy = static_cast<std::uint32_t>(bestf);
        int bit = 8;
        for (int d : st.frames[bestf]) {
          const double s = mdir[d] + D[d];
          const double c = coef(s);
          if (s > 0) ch->policy |= 1u << bit;
          ++bit;
          ch->b += c * mdir[d];
          for (int sgn = 0; sgn < 2; ++sgn) {
            ch->node[ch->count] = nbi[2 * d + sgn];
            ch->w[ch->count++] = c * ih2 / st.len2[d];
          }
        }
      }
      return best + kappa;
    }
    int bestm = 0;
    double best = 0.0;
    for (int m = 0; m < members; ++m) {
      const double* w = &weights[(idx * members + m) * nd];
      double val = 0.0;
      for (std::size_t d = 0; d < nd; ++d) val += w[d] * (mdir[d] + D[d]);
      if (m == 0 || (op.is_sup() ? val > best : val < best)) {
        best = val;
        bestm = m;
      }
    }
    if (ch) {
      const double* w = &weights[(idx * members + bestm) * nd];
      ch->b = 0.0;
      ch->policy = static_cast<std::uint32_t>(bestm);
      for (std::size_t d = 0; d < nd; ++d) {
        if (w[d] == 0.0) continue;
        ch->b += w[d] * mdir[d];
        for (int sgn = 0; sgn < 2; ++sgn) {
          ch->node[ch->count] = nbi[2 * d + sgn];
          ch->w[ch->count++] = w[d] * ih2 / st.len2[d];
        }
      }
    }
    return best;
  };

  EffectiveOperatorEstimate out;
  Eigen::VectorXd v = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(N));
  std::vector<std::uint32_t> prev;
  const double scale = std::max(1.0, std::abs(op(M, std::vector<double>(n, 0.0))));
  const double tol = 1e-10 * scale;
  for (int it = 0; it < 50; ++it) {
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(N * 12);
    Eigen::VectorXd rhs(static_cast<Eigen::Index>(N));
    std::vector<std::uint32_t> pol(N);
    Choice ch;
    for (std::size_t idx = 0; idx < N; ++idx) {
      evaluate(idx, v, &ch);
      pol[idx] = ch.policy;
      double W = 0.0;
      for (int e = 0; e < ch.count; ++e) {
        W += ch.w[e];
        trip.emplace_back(static_cast<int>(idx), static_cast<int>(ch.node[e]), -ch.w[e]);
      }
      trip.emplace_back(static_cast<int>(idx), static_cast<int>(idx), delta_ergodic + W);
      rhs[static_cast<Eigen::Index>(idx)] = ch.b;
    }
    Eigen::SparseMatrix<double> A(static_cast<Eigen::Index>(N), static_cast<Eigen::Index>(N));
    A.setFromTriplets(trip.begin(), trip.end());
    A.makeCompressed();
    Eigen::SparseLU<Eigen::SparseMatrix<double>, Eigen::COLAMDOrdering<int>> lu;
    lu.analyzePattern(A);
    lu.factorize(A);
    if (lu.info() != Eigen::Success) throw ConvergenceError("cell problem factorization failed", out.residual_history);
    v = lu.solve(rhs);
    double r = 0.0;
    for (std::size_t idx = 0; idx < N; ++idx)
      r = std::max(r, std::abs(delta_ergodic * v[static_cast<Eigen::Index>(idx)] - evaluate(idx, v, nullptr)));
    out.residual_history.push_back(r);
    out.policy_iterations = it + 1;
    const bool stable = pol == prev;
    prev = std::move(pol);
    // Second differences of v lose ~ eps * |v| / h^2 to cancellation.
    const double floor = 64.0 * std::numeric_limits<double>::epsilon() * ih2 * n * std::max(Lam, 1.0) *
                         v.cwiseAbs().maxCoeff();
    if (r <= std::max(tol, floor) || stable) {
      const double dv_min = delta_ergodic * v.minCoeff(), dv_max = delta_ergodic * v.maxCoeff();
      out.value = delta_ergodic * v.mean();
      out.spread = dv_max - dv_min;
      return out;
    }
  }
  throw ConvergenceError("cell problem policy iteration did not converge", out.residual_history);
}

}  // namespace bhom
