#include "bhom/fdsolver.hpp"

#include <Eigen/Sparse>
#include <Eigen/SparseLU>
#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <memory>
#include <mutex>
#include <sstream>

#include "bhom/error.hpp"

namespace bhom {

Stencil make_stencil(int dim, int order) {
  if (dim < 2 || dim > 3) throw DomainError("stencils are defined for 2D and 3D grids");
  if (order < 1 || order > 3) throw DomainError("stencil order must be 1, 2 or 3");
  Stencil st;
  st.dim = dim;
  st.order = order;
  if (dim == 2) {
    st.dirs = {{1, 0, 0}, {0, 1, 0}};
    st.frames = {{0, 1}};
    st.near_dirs = 2;
    if (order >= 2) {
      st.dirs.push_back({1, 1, 0});
      st.dirs.push_back({1, -1, 0});
      st.frames.push_back({2, 3});
      st.near_dirs = 4;
    }
    if (order >= 3) {
      st.dirs.push_back({1, 2, 0});
      st.dirs.push_back({2, -1, 0});
      st.dirs.push_back({2, 1, 0});
      st.dirs.push_back({1, -2, 0});
      st.frames.push_back({4, 5});
      st.frames.push_back({6, 7});
    }
  } else {
    st.order = std::min(order, 2);
    st.dirs = {{1, 0, 0}, {0, 1, 0}, {0, 0, 1}};
    st.frames = {{0, 1, 2}};
    st.near_dirs = 3;
    if (order >= 2) {
      st.dirs.insert(st.dirs.end(), {{1, 1, 0}, {1, -1, 0}, {1, 0, 1}, {1, 0, -1}, {0, 1, 1}, {0, 1, -1}});
      st.frames.push_back({3, 4, 2});
      st.frames.push_back({5, 6, 1});
      st.frames.push_back({7, 8, 0});
      st.near_dirs = 9;
    }
  }
  for (const auto& e : st.dirs) st.len2.push_back(double(e[0] * e[0] + e[1] * e[1] + e[2] * e[2]));
  return st;
}

namespace {

std::string coeff_name(int i, int j) { return "a" + std::to_string(i + 1) + std::to_string(j + 1); }

WeightResult weights_2d(const SymMatrix& A, const Stencil& st, std::span<const char> available) {
  WeightResult r;
  r.w.assign(st.dirs.size(), 0.0);
  const double a = A(0, 0), c = A(1, 1), b = 0.5 * (A(0, 1) + A(1, 0));
  const double scale = std::max({std::abs(a), std::abs(b), std::abs(c), 1e-300});
  const double tiny = 1e-13 * scale;
  if (a < -tiny || c < -tiny) {
    r.coefficient = a < -tiny ? "a11" : "a22";
    r.value = a < -tiny ? a : c;
    return r;
  }
  if (std::abs(b) <= tiny) {
    r.w[0] = std::max(a, 0.0);
    r.w[1] = std::max(c, 0.0);
    r.ok = true;
    return r;
  }
  const bool diag = st.dirs.size() >= 4 && available[2] && available[3];
  if (diag) {
    const double wa = a - std::abs(b), wc = c - std::abs(b);
    if (wa >= -tiny && wc >= -tiny) {
      r.w[0] = std::max(wa, 0.0);
      r.w[1] = std::max(wc, 0.0);
      r.w[b > 0 ? 2 : 3] = 2.0 * std::abs(b);
      r.ok = true;
      return r;
    }
  }
  // Wider stencils: first triple of available directions with a
  // nonnegative exact decomposition.
  const int nd = static_cast<int>(st.dirs.size());
  auto col = [&](int d) {
    const auto& e = st.dirs[d];
    return std::array<double, 3>{e[0] * e[0] / st.len2[d], e[0] * e[1] / st.len2[d], e[1] * e[1] / st.len2[d]};
  };
  if (nd > 4) {
    for (int i = 0; i < nd; ++i) {
      if (!available[i]) continue;
      for (int j = i + 1; j < nd; ++j) {
        if (!available[j]) continue;
        for (int k = j + 1; k < nd; ++k) {
          if (!available[k]) continue;
          const auto ci = col(i), cj = col(j), ck = col(k);
          auto det3 = [](const std::array<double, 3>& x, const std::array<double, 3>& y, const std::array<double, 3>& z) {
            return x[0] * (y[1] * z[2] - y[2] * z[1]) - y[0] * (x[1] * z[2] - x[2] * z[1]) +
                   z[0] * (x[1] * y[2] - x[2] * y[1]);
          };
          const double det = det3(ci, cj, ck);
          if (std::abs(det) < 1e-12) continue;
          const std::array<double, 3> rhs{a, b, c};
          const double wi = det3(rhs, cj, ck) / det;
          const double wj = det3(ci, rhs, ck) / det;
          const double wk = det3(ci, cj, rhs) / det;
          if (wi >= -tiny && wj >= -tiny && wk >= -tiny) {
            r.w[i] = std::max(wi, 0.0);
            r.w[j] = std::max(wj, 0.0);
            r.w[k] = std::max(wk, 0.0);
            r.ok = true;
            return r;
          }
        }
      }
    }
  }
  r.coefficient = "a12";
  r.value = b;
  return r;
}

WeightResult weights_3d(const SymMatrix& A, const Stencil& st, std::span<const char> available) {
  WeightResult r;
  r.w.assign(st.dirs.size(), 0.0);
  double scale = 1e-300;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) scale = std::max(scale, std::abs(A(i, j)));
  const double tiny = 1e-13 * scale;
  // (i, j) -> direction index of e_i + e_j and e_i - e_j
  constexpr int pair_dir[3][3][2] = {{{-1, -1}, {3, 4}, {5, 6}}, {{3, 4}, {-1, -1}, {7, 8}}, {{5, 6}, {7, 8}, {-1, -1}}};
  const bool diag = st.dirs.size() >= 9;
  for (int i = 0; i < 3; ++i) {
    double wi = A(i, i);
    for (int j = 0; j < 3; ++j) {
      if (j == i) continue;
      const double b = 0.5 * (A(i, j) + A(j, i));
      if (std::abs(b) <= tiny) continue;
      const int d = pair_dir[i][j][b > 0 ? 0 : 1];
      if (!diag || !available[d]) {
        r.coefficient = coeff_name(std::min(i, j), std::max(i, j));
        r.value = b;
        return r;
      }
      wi -= std::abs(b);
      if (j > i) r.w[d] = 2.0 * std::abs(b);
    }
    if (wi < -tiny) {
      r.coefficient = coeff_name(i, i);
      r.value = A(i, i);
      r.w.assign(st.dirs.size(), 0.0);
      return r;
    }
    r.w[i] = std::max(wi, 0.0);
  }
  r.ok = true;
  return r;
}

}  // namespace

WeightResult monotone_weights(const SymMatrix& A, const Stencil& st, std::span<const char> available) {
  if (A.dim() != st.dim) throw DomainError("monotone_weights: matrix and stencil dimensions differ");
  return st.dim == 2 ? weights_2d(A, st, available) : weights_3d(A, st, available);
}

FastVariable FastVariable::scaled(int dim, double epsilon) {
  if (!(epsilon > 0.0)) throw DomainError("epsilon must be positive");
  FastVariable fv;
  fv.dim = dim;
  fv.shift.assign(dim, 0.0);
  for (int i = 0; i < dim; ++i) {
    fv.matrix[3 * i + i] = 1.0 / epsilon;
    fv.rotation[3 * i + i] = 1.0;
  }
  return fv;
}

Point FastVariable::apply(std::span<const double> x) const {
  Point y = shift;
  y.resize(dim, 0.0);
  const int nx = std::min<int>(dim, static_cast<int>(x.size()));
  for (int i = 0; i < dim; ++i)
    for (int j = 0; j < nx; ++j) y[i] += matrix[3 * i + j] * x[j];
  return y;
}

namespace {

SymMatrix rotate_into_grid(const SymMatrix& a, const std::array<double, 9>& R) {
  const int n = a.dim();
  SymMatrix out(n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      double s = 0.0;
      for (int k = 0; k < n; ++k)
        for (int l = 0; l < n; ++l) s += R[3 * k + i] * a(k, l) * R[3 * l + j];
      out(i, j) = s;
    }
  // Quantize away rotation roundoff so that rotated isotropic coefficients
  // (and hence cached factorizations) do not depend on the frame.
  double scale = 0.0;
  for (int i = 0; i < n; ++i) scale = std::max(scale, std::abs(out(i, i)));
  const double q = 1e-13 * std::max(scale, 1e-300);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) out(i, j) = std::round(out(i, j) / q) * q;
  return out;
}

}  // namespace

void assemble(DiscreteProblem& p) {
  GridField& G = p.grid;
  const Stencil& st = p.stencil;
  if (st.dim != G.dim) throw DomainError("stencil and grid dimensions differ");
  if (G.axisymmetric && !p.op.is_pucci())
    throw DomainError("axisymmetric grids support Pucci operators only");
  const std::size_t n = G.size();
  std::vector<char> inside(n);
  for (std::size_t i = 0; i < n; ++i) inside[i] = G.mask[i] != NodeType::Exterior;

  auto neighbor = [&](const std::array<int, 3>& ijk, const std::array<int, 3>& e, int sgn) -> std::int64_t {
    std::array<int, 3> q{ijk[0] + sgn * e[0], ijk[1] + sgn * e[1], ijk[2] + sgn * e[2]};
    if (G.axisymmetric && q[0] < 0) q[0] = -q[0];
    if (!G.valid(q)) return -1;
    const auto idx = G.index(q);
    return inside[idx] ? idx : -1;
  };

  p.interior.clear();
  p.unknown.assign(n, -1);
  for (std::size_t idx = 0; idx < n; ++idx) {
    if (!inside[idx]) {
      G.mask[idx] = NodeType::Exterior;
      continue;
    }
    const auto ijk = G.multi_index(static_cast<std::int64_t>(idx));
    bool full = true;
    for (int d = 0; d < st.near_dirs && full; ++d)
      full = neighbor(ijk, st.dirs[d], +1) >= 0 && neighbor(ijk, st.dirs[d], -1) >= 0;
    G.mask[idx] = full ? NodeType::Interior : NodeType::Boundary;
    if (full) {
      p.unknown[idx] = static_cast<std::int32_t>(p.interior.size());
      p.interior.push_back(static_cast<std::int32_t>(idx));
    }
  }

  const std::size_t nd = st.dirs.size();
  const std::size_t N = p.interior.size();
  p.nbr.assign(N * 2 * nd, -1);
  p.frames_available.assign(N, 0);
  p.tangential.assign(G.axisymmetric ? N : 0, -1);
  std::vector<char> avail(nd);
  for (std::size_t k = 0; k < N; ++k) {
    const auto ijk = G.multi_index(p.interior[k]);
    for (std::size_t d = 0; d < nd; ++d) {
      p.nbr[k * 2 * nd + 2 * d] = static_cast<std::int32_t>(neighbor(ijk, st.dirs[d], +1));
      p.nbr[k * 2 * nd + 2 * d + 1] = static_cast<std::int32_t>(neighbor(ijk, st.dirs[d], -1));
    }
    for (std::size_t f = 0; f < st.frames.size(); ++f) {
      bool ok = true;
      for (int d : st.frames[f]) ok = ok && p.nbr[k * 2 * nd + 2 * d] >= 0 && p.nbr[k * 2 * nd + 2 * d + 1] >= 0;
      if (ok) p.frames_available[k] |= (1u << f);
    }
    if (G.axisymmetric) p.tangential[k] = static_cast<std::int32_t>(neighbor(ijk, {1, 0, 0}, +1));
  }

  p.weights.clear();
  if (p.op.is_pucci()) {
    std::ostringstream os;
    os << "pucci frame extremum over " << st.frames.size() << " frame(s); monotone by construction";
    p.certificate = os.str();
    return;
  }
  if (p.op.dim() != G.dim) throw DomainError("operator and grid dimensions differ");
  const int members = p.op.members();
  p.weights.assign(N * members * nd, 0.0);
  const bool ydep = p.op.y_dependent();
  std::vector<SymMatrix> constant;
  if (!ydep)
    for (int m = 0; m < members; ++m) constant.push_back(rotate_into_grid(p.op.coefficients(m, {}), p.fast.rotation));
  for (std::size_t k = 0; k < N; ++k) {
    for (std::size_t d = 0; d < nd; ++d) avail[d] = p.nbr[k * 2 * nd + 2 * d] >= 0 && p.nbr[k * 2 * nd + 2 * d + 1] >= 0;
    const Point y = ydep ? p.y_of(p.interior[k]) : Point{};
    for (int m = 0; m < members; ++m) {
      const SymMatrix A = ydep ? rotate_into_grid(p.op.coefficients(m, y), p.fast.rotation) : constant[m];
      const WeightResult wr = monotone_weights(A, st, avail);
      if (!wr.ok) {
        std::ostringstream os;
        os << "monotonicity certificate failed at node " << p.interior[k] << " (x = (";
        const Point x = G.coord(p.interior[k]);
        for (std::size_t i = 0; i < x.size(); ++i) os << (i ? ", " : "") << x[i];
        os << ")): coefficient " << wr.coefficient << " = " << wr.value
           << " admits no nonnegative stencil weights at order " << st.order;
        throw CertificateError(os.str(), p.interior[k], wr.value);
      }
      std::copy(wr.w.begin(), wr.w.end(), p.weights.begin() + (k * members + m) * nd);
    }
  }
  std::ostringstream os;
  os << "nonnegative stencil weights at " << N << " interior node(s), " << members << " member(s)";
  p.certificate = os.str();
}

DiscreteProblem discretize(const EllipticOperator& op, const Domain& dom, double h, int order,
                           const FastVariable& fast, const PointFunction& g, const PointFunction& f) {
  if (!(h > 0.0)) throw DomainError("grid spacing must be positive");
  const int dim = dom.dim();
  if (op.dim() != dim) throw DomainError("operator and domain dimensions differ");
  Point lo = dom.lo(), hi = dom.hi();
  std::array<int, 3> ext{1, 1, 1};
  for (int i = 0; i < dim; ++i) {
    lo[i] -= 2 * h;
    ext[i] = static_cast<int>(std::ceil((hi[i] + 2 * h - lo[i]) / h - 1e-9)) + 1;
  }
  DiscreteProblem p;
  p.grid = GridField::make(dim, lo, ext, h);
  p.op = op;
  p.stencil = make_stencil(dim, order);
  p.fast = fast;
  p.n_phys = dim;
  const double tol = 1e-12 * dom.diameter();
  for (std::size_t idx = 0; idx < p.grid.size(); ++idx)
    p.grid.mask[idx] = dom.phi(p.grid.coord(idx)) <= tol ? NodeType::Interior : NodeType::Exterior;
  assemble(p);
  p.source.assign(p.grid.size(), 0.0);
  for (std::size_t idx = 0; idx < p.grid.size(); ++idx) {
    if (p.grid.mask[idx] == NodeType::Boundary) {
      p.grid.values[idx] = g(dom.project(p.grid.coord(idx)));
    } else if (p.grid.mask[idx] == NodeType::Interior) {
      p.source[idx] = f(p.grid.coord(idx));
    }
  }
  return p;
}

DiscreteProblem discretize_box(const EllipticOperator& op, Point lo, Point hi, double h, int order,
                               const FastVariable& fast, const PointFunction& g, const PointFunction& f) {
  const int dim = static_cast<int>(lo.size());
  if (op.dim() != dim || hi.size() != lo.size()) throw DomainError("operator and box dimensions differ");
  std::array<int, 3> ext{1, 1, 1};
  for (int i = 0; i < dim; ++i) {
    const double cells = (hi[i] - lo[i]) / h;
    if (!(cells >= 2.0) || std::abs(cells - std::round(cells)) > 1e-6)
      throw DomainError("box sides must be integer multiples (>= 2) of the grid spacing");
    ext[i] = static_cast<int>(std::lround(cells)) + 1;
  }
  DiscreteProblem p;
  p.grid = GridField::make(dim, lo, ext, h);
  std::fill(p.grid.mask.begin(), p.grid.mask.end(), NodeType::Interior);
  p.op = op;
  p.stencil = make_stencil(dim, order);
  p.fast = fast;
  p.n_phys = dim;
  assemble(p);
  p.source.assign(p.grid.size(), 0.0);
  for (std::size_t idx = 0; idx < p.grid.size(); ++idx) {
    const Point x = p.grid.coord(idx);
    if (p.grid.mask[idx] == NodeType::Boundary) p.grid.values[idx] = g(x);
    else p.source[idx] = f(x);
  }
  return p;
}

DiscreteProblem discretize_axisymmetric(const EllipticOperator& op, int n_phys, const AxisymmetricGeometry& geo,
                                        double h, int order, const PointFunction& g, const PointFunction& f) {
  if (!op.is_pucci()) throw DomainError("axisymmetric discretization supports Pucci operators only");
  if (n_phys < 2 || n_phys > 3) throw DomainError("axisymmetric physical dimension must be 2 or 3");
  std::array<int, 3> ext{static_cast<int>(std::lround(geo.rho_max / h)) + 1,
                         static_cast<int>(std::lround((geo.z_hi - geo.z_lo) / h)) + 1, 1};
  DiscreteProblem p;
  p.grid = GridField::make(2, {0.0, geo.z_lo}, ext, h);
  p.grid.axisymmetric = true;
  p.op = op;
  p.stencil = make_stencil(2, order);
  p.fast = FastVariable::scaled(2, 1.0);
  p.n_phys = n_phys;
  const double tol = 1e-12 * (geo.rho_max + geo.z_hi - geo.z_lo);
  for (std::size_t idx = 0; idx < p.grid.size(); ++idx)
    p.grid.mask[idx] = geo.phi(p.grid.coord(idx)) <= tol ? NodeType::Interior : NodeType::Exterior;
  assemble(p);
  p.source.assign(p.grid.size(), 0.0);
  for (std::size_t idx = 0; idx < p.grid.size(); ++idx) {
    const Point x = p.grid.coord(idx);
    if (p.grid.mask[idx] == NodeType::Boundary) p.grid.values[idx] = g(geo.project(x));
    else if (p.grid.mask[idx] == NodeType::Interior) p.source[idx] = f(x);
  }
  return p;
}

namespace {

struct Row {
  int count = 0;
  std::array<std::int32_t, 40> node{};
  std::array<double, 40> w{};
  void add(std::int32_t j, double wj) {
    node[count] = j;
    w[count] = wj;
    ++count;
  }
};

// F_h[u] at interior node k (source excluded). Fills the optimal linear row
// and a policy id when requested; ties keep the lowest frame/member index.
double eval_node(const DiscreteProblem& p, std::size_t k, const double* u, Row* row, std::uint32_t* policy) {
  const std::size_t nd = p.ndirs();
  const std::int32_t* nb = &p.nbr[k * 2 * nd];
  const std::int32_t node = p.interior[k];
  const double ui = u[node];
  const double h = p.grid.h;
  const double ih2 = 1.0 / (h * h);
  std::array<double, 9> D{};
  for (std::size_t d = 0; d < nd; ++d)
    if (nb[2 * d] >= 0 && nb[2 * d + 1] >= 0) D[d] = (u[nb[2 * d]] + u[nb[2 * d + 1]] - 2.0 * ui) * ih2 / p.stencil.len2[d];
  if (row) row->count = 0;

  if (p.op.is_pucci()) {
    const bool plus = p.op.kind() == OperatorKind::PucciPlus;
    const double lam = p.op.lambda(), Lam = p.op.Lambda();
    auto coef = [&](double s) { return plus ? (s > 0 ? Lam : lam) : (s > 0 ? lam : Lam); };
    const auto& frames = p.stencil.frames;
    const std::uint32_t avail = p.frames_available[k];
    int bestf = -1;
    double best = 0.0;
    for (std::size_t f = 0; f < frames.size(); ++f) {
      if (!((avail >> f) & 1u)) continue;
      double v = 0.0;
      for (int d : frames[f]) v += coef(D[d]) * D[d];
      if (bestf < 0 || (plus ? v > best : v < best)) {
        best = v;
        bestf = static_cast<int>(f);
      }
    }
    std::uint32_t pol = static_cast<std::uint32_t>(bestf);
    int bit = 8;
    for (int d : frames[bestf]) {
      if (D[d] > 0) pol |= 1u << bit;
      ++bit;
      if (row) {
        const double w = coef(D[d]) * ih2 / p.stencil.len2[d];
        row->add(nb[2 * d], w);
        row->add(nb[2 * d + 1], w);
      }
    }
    if (p.grid.axisymmetric && p.n_phys > 2) {
      const int i0 = static_cast<int>(node % p.grid.extents[0]);
      const double scale = i0 > 0 ? 1.0 / (h * h * i0) : 2.0 * ih2;
      const std::int32_t t = p.tangential[k];
      const double st = (u[t] - ui) * scale;
      const double mult = p.n_phys - 2;
      best += mult * coef(st) * st;
      if (st > 0) pol |= 1u << 15;
      if (row) row->add(t, mult * coef(st) * scale);
    }
    if (policy) *policy = pol;
    return best;
  }

  const int members = p.op.members();
  const bool sup = p.op.is_sup();
  int bestm = 0;
  double best = 0.0;
  for (int m = 0; m < members; ++m) {
    const double* w = &p.weights[(k * members + m) * nd];
    double v = 0.0;
    for (std::size_t d = 0; d < nd; ++d)
      if (w[d] != 0.0) v += w[d] * D[d];
    if (m == 0 || (sup ? v > best : v < best)) {
      best = v;
      bestm = m;
    }
  }
  if (row) {
    const double* w = &p.weights[(k * members + bestm) * nd];
    for (std::size_t d = 0; d < nd; ++d) {
      if (w[d] == 0.0) continue;
      const double wd = w[d] * ih2 / p.stencil.len2[d];
      row->add(nb[2 * d], wd);
      row->add(nb[2 * d + 1], wd);
    }
  }
  if (policy) *policy = static_cast<std::uint32_t>(bestm);
  return best;
}

using SpMat = Eigen::SparseMatrix<double>;
using LU = Eigen::SparseLU<SpMat, Eigen::COLAMDOrdering<int>>;

struct CachedFactor {
  std::uint64_t key = 0;
  std::shared_ptr<SpMat> A;
  std::shared_ptr<LU> lu;
};

std::mutex g_cache_mutex;
std::deque<CachedFactor> g_cache;
constexpr std::size_t kCacheCapacity = 4;

struct Fnv {
  std::uint64_t h = 1469598103934665603ull;
  void add(const void* data, std::size_t n) {
    const auto* b = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= b[i];
      h *= 1099511628211ull;
    }
  }
};

struct LinearSystem {
  std::vector<Eigen::Triplet<double>> triplets;
  Eigen::VectorXd rhs;
  std::vector<std::uint32_t> policy;
};

LinearSystem build_system(const DiscreteProblem& p, const std::vector<double>& u) {
  const std::size_t N = p.interior.size();
  LinearSystem sys;
  sys.rhs.resize(static_cast<Eigen::Index>(N));
  sys.policy.resize(N);
  sys.triplets.reserve(N * 10);
  Row row;
  for (std::size_t k = 0; k < N; ++k) {
    eval_node(p, k, u.data(), &row, &sys.policy[k]);
    double diag = 0.0;
    double rhs = -p.source[p.interior[k]];
    for (int e = 0; e < row.count; ++e) {
      diag += row.w[e];
      const std::int32_t j = row.node[e];
      const std::int32_t uj = p.unknown[j];
      if (uj >= 0) sys.triplets.emplace_back(static_cast<int>(k), uj, -row.w[e]);
      else rhs += row.w[e] * u[j];
    }
    sys.triplets.emplace_back(static_cast<int>(k), static_cast<int>(k), diag);
    sys.rhs[static_cast<Eigen::Index>(k)] = rhs;
  }
  return sys;
}

std::uint64_t system_key(const DiscreteProblem& p, const LinearSystem& sys) {
  Fnv f;
  const std::size_t N = p.interior.size();
  f.add(&N, sizeof N);
  f.add(p.interior.data(), p.interior.size() * sizeof(std::int32_t));
  for (const auto& t : sys.triplets) {
    const int r = t.row(), c = t.col();
    const double v = t.value();
    f.add(&r, sizeof r);
    f.add(&c, sizeof c);
    f.add(&v, sizeof v);
  }
  return f.h;
}

CachedFactor factorize(const DiscreteProblem& p, const LinearSystem& sys, bool use_cache, bool& reused) {
  reused = false;
  std::uint64_t key = 0;
  if (use_cache) {
    key = system_key(p, sys);
    std::lock_guard<std::mutex> lock(g_cache_mutex);
    for (const auto& c : g_cache)
      if (c.key == key) {
        reused = true;
        return c;
      }
  }
  const auto N = static_cast<Eigen::Index>(p.interior.size());
  CachedFactor out;
  out.key = key;
  out.A = std::make_shared<SpMat>(N, N);
  out.A->setFromTriplets(sys.triplets.begin(), sys.triplets.end());
  out.A->makeCompressed();
  out.lu = std::make_shared<LU>();
  out.lu->analyzePattern(*out.A);
  out.lu->factorize(*out.A);
  if (out.lu->info() != Eigen::Success) throw ConvergenceError("sparse LU factorization failed", {});
  if (use_cache) {
    std::lock_guard<std::mutex> lock(g_cache_mutex);
    g_cache.push_back(out);
    if (g_cache.size() > kCacheCapacity) g_cache.pop_front();
  }
  return out;
}

Eigen::VectorXd solve_refined(const CachedFactor& f, const Eigen::VectorXd& rhs) {
  Eigen::VectorXd x = f.lu->solve(rhs);
  for (int it = 0; it < 2; ++it) {
    const Eigen::VectorXd r = rhs - (*f.A) * x;
    if (r.lpNorm<Eigen::Infinity>() <= 1e-15 * std::max(1.0, rhs.lpNorm<Eigen::Infinity>())) break;
    x += f.lu->solve(r);
  }
  return x;
}

void apply_initial(const DiscreteProblem& p, const SolveOptions& opt, std::vector<double>& u) {
  if (opt.initial.empty()) return;
  if (opt.initial.size() != u.size()) throw DomainError("solve_dirichlet: initial guess has wrong size");
  for (const auto node : p.interior) u[node] = opt.initial[node];
}

SolveResult solve_howard(const DiscreteProblem& p, const SolveOptions& opt) {
  SolveResult res;
  res.field = p.grid;
  res.record.method = "howard";
  std::vector<double>& u = res.field.values;
  const std::size_t N = p.interior.size();
  apply_initial(p, opt, u);
  const bool single_policy = p.op.kind() == OperatorKind::Linear;
  const bool cacheable = opt.use_cache && p.op.is_constant_linear();
  std::vector<std::uint32_t> prev;
  for (int it = 0; it < opt.max_policies; ++it) {
    LinearSystem sys = build_system(p, u);
    const bool stable = !prev.empty() && sys.policy == prev;
    bool reused = false;
    const CachedFactor f = factorize(p, sys, cacheable, reused);
    res.record.factorization_reused = res.record.factorization_reused || reused;
    const Eigen::VectorXd x = solve_refined(f, sys.rhs);
    for (std::size_t k = 0; k < N; ++k) u[p.interior[k]] = x[static_cast<Eigen::Index>(k)];
    prev = std::move(sys.policy);
    const double r = max_abs_residual(p, u);
    res.record.residual_history.push_back(r);
    res.record.iterations = it + 1;
    if (r <= opt.tol) {
      res.record.converged = true;
      break;
    }
    if ((stable || single_policy) && it > 0 && res.record.residual_history[it] >= res.record.residual_history[it - 1])
      break;  // policy fixed and the linear solve no longer improves: roundoff floor
  }
  res.record.final_residual = res.record.residual_history.empty() ? 0.0 : res.record.residual_history.back();
  return res;
}

SolveResult solve_gauss_seidel(const DiscreteProblem& p, const SolveOptions& opt, bool red_black) {
  SolveResult res;
  res.field = p.grid;
  res.record.method = red_black ? "red_black_gauss_seidel" : "gauss_seidel";
  res.record.red_black = red_black;
  std::vector<double>& u = res.field.values;
  const std::size_t N = p.interior.size();
  apply_initial(p, opt, u);
  const double omega = opt.damping > 0 ? opt.damping : (p.op.kind() == OperatorKind::Linear ? 1.0 : 0.8);
  std::vector<std::size_t> order(N);
  for (std::size_t k = 0; k < N; ++k) order[k] = k;
  if (red_black) {
    auto color = [&](std::size_t k) {
      const auto ijk = p.grid.multi_index(p.interior[k]);
      return (ijk[0] + ijk[1] + ijk[2]) & 1;
    };
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return color(a) < color(b); });
  }
  Row row;
  for (int sweep = 0; sweep < opt.max_sweeps; ++sweep) {
    for (std::size_t k : order) {
      const std::int32_t node = p.interior[k];
      const double old = u[node];
      const double f = p.source[node];
      std::uint32_t pol = 0, last = ~0u;
      double x = old;
      for (int it = 0; it < 32; ++it) {
        u[node] = x;
        eval_node(p, k, u.data(), &row, &pol);
        if (pol == last) break;
        last = pol;
        double W = 0.0, S = 0.0;
        for (int e = 0; e < row.count; ++e) {
          W += row.w[e];
          S += row.w[e] * (row.node[e] == node ? x : u[row.node[e]]);
        }
        // Self-references (axis reflections) cancel in w (u_j - u_i).
        double self = 0.0;
        for (int e = 0; e < row.count; ++e)
          if (row.node[e] == node) self += row.w[e];
        const double Wn = W - self;
        const double Sn = S - self * x;
        x = Wn > 0 ? (Sn - f) / Wn : old;
      }
      u[node] = old + omega * (x - old);
    }
    const double r = max_abs_residual(p, u);
    res.record.residual_history.push_back(r);
    res.record.iterations = sweep + 1;
    if (r <= opt.tol) {
      res.record.converged = true;
      break;
    }
  }
  res.record.final_residual = res.record.residual_history.empty() ? 0.0 : res.record.residual_history.back();
  return res;
}

}  // namespace

SolveResult solve_dirichlet(const DiscreteProblem& p, const SolveOptions& opt) {
  if (p.source.size() != p.grid.size()) throw DomainError("solve_dirichlet: source not sampled");
  SolveResult res;
  if (p.interior.empty()) {
    res.field = p.grid;
    res.record.converged = true;
    res.record.method = "none";
    return res;
  }
  switch (opt.method) {
    case SolveMethod::Howard: res = solve_howard(p, opt); break;
    case SolveMethod::GaussSeidel: res = solve_gauss_seidel(p, opt, false); break;
    case SolveMethod::RedBlack: res = solve_gauss_seidel(p, opt, true); break;
  }
  if (!res.record.converged && opt.throw_on_failure) {
    std::ostringstream os;
    os << res.record.method << " did not reach residual " << opt.tol << " (final " << res.record.final_residual
       << " after " << res.record.iterations << " iterations)";
    throw ConvergenceError(os.str(), res.record.residual_history);
  }
  return res;
}

std::vector<double> residual(const DiscreteProblem& p, std::span<const double> u) {
  std::vector<double> r(p.grid.size(), std::numeric_limits<double>::quiet_NaN());
  for (std::size_t k = 0; k < p.interior.size(); ++k) {
    const auto node = p.interior[k];
    r[node] = eval_node(p, k, u.data(), nullptr, nullptr) - p.source[node];
  }
  return r;
}

double max_abs_residual(const DiscreteProblem& p, std::span<const double> u) {
  double m = 0.0;
  for (std::size_t k = 0; k < p.interior.size(); ++k) {
    const auto node = p.interior[k];
    m = std::max(m, std::abs(eval_node(p, k, u.data(), nullptr, nullptr) - p.source[node]));
  }
  return m;
}

ComparisonReport comparison_check(const DiscreteProblem& p, const GridField& u, const GridField& v, double tol) {
  if (u.size() != p.grid.size() || v.size() != p.grid.size()) throw DomainError("comparison_check: grid mismatch");
  ComparisonReport rep;
  const auto ru = residual(p, u.values);
  const auto rv = residual(p, v.values);
  rep.max_super_residual = -std::numeric_limits<double>::infinity();
  rep.min_sub_residual = std::numeric_limits<double>::infinity();
  rep.min_boundary_gap = std::numeric_limits<double>::infinity();
  rep.worst_margin = std::numeric_limits<double>::infinity();
  for (std::size_t idx = 0; idx < p.grid.size(); ++idx) {
    const NodeType t = p.grid.mask[idx];
    if (t == NodeType::Boundary) {
      rep.min_boundary_gap = std::min(rep.min_boundary_gap, u.values[idx] - v.values[idx]);
    } else if (t == NodeType::Interior) {
      rep.max_super_residual = std::max(rep.max_super_residual, ru[idx]);
      rep.min_sub_residual = std::min(rep.min_sub_residual, rv[idx]);
      const double m = u.values[idx] - v.values[idx];
      if (m < rep.worst_margin) {
        rep.worst_margin = m;
        rep.worst_node = static_cast<std::int64_t>(idx);
      }
    }
  }
  rep.premises_hold = rep.max_super_residual <= tol && rep.min_sub_residual >= -tol && rep.min_boundary_gap >= -tol;
  rep.conclusion_holds = rep.worst_margin >= -tol;
  return rep;
}

OscillationDecay oscillation_decay_probe(const GridField& u, std::span<const double> center,
                                         std::span<const double> radii) {
  if (radii.size() < 2) throw DomainError("oscillation_decay_probe: need at least two radii");
  OscillationDecay out;
  for (double r : radii) {
    if (!(r > 0.0)) throw DomainError("oscillation_decay_probe: radii must be positive");
    for (int i = 0; i < u.dim; ++i) {
      const double lo = u.origin[i], hi = u.origin[i] + u.h * (u.extents[i] - 1);
      if (center[i] - r < lo - 1e-12 || center[i] + r > hi + 1e-12)
        throw DomainError("oscillation_decay_probe: ball leaves the grid");
    }
    double mn = std::numeric_limits<double>::infinity(), mx = -mn;
    for (std::size_t idx = 0; idx < u.size(); ++idx) {
      if (u.mask[idx] == NodeType::Exterior) continue;
      const Point x = u.coord(idx);
      double d2 = 0.0;
      for (int i = 0; i < u.dim; ++i) d2 += (x[i] - center[i]) * (x[i] - center[i]);
      if (d2 > r * r * (1 + 1e-12)) continue;
      mn = std::min(mn, u.values[idx]);
      mx = std::max(mx, u.values[idx]);
    }
    if (mx < mn) throw DomainError("oscillation_decay_probe: empty ball");
    out.radii.push_back(r);
    out.osc.push_back(mx - mn);
  }
  // Least-squares slope of log osc against log r over positive entries.
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int m = 0;
  for (std::size_t i = 0; i < out.osc.size(); ++i) {
    if (out.osc[i] <= 1e-14) continue;
    const double lx = std::log(out.radii[i]), ly = std::log(out.osc[i]);
    sx += lx, sy += ly, sxx += lx * lx, sxy += lx * ly;
    ++m;
  }
  if (m >= 2 && std::abs(m * sxx - sx * sx) > 1e-300) {
    const double beta = (m * sxy - sx * sy) / (m * sxx - sx * sx);
    out.gamma = std::pow(2.0, -beta);
  }
  return out;
}

void clear_factorization_cache() {
  std::lock_guard<std::mutex> lock(g_cache_mutex);
  g_cache.clear();
}

}  // namespace bhom
