#include "bhom/linalg.hpp"

#include <algorithm>
#include <cmath>

#include "bhom/error.hpp"

namespace bhom {

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }

Point normalized(std::span<const double> a) {
  const double r = norm(a);
  if (!(r > 0.0)) throw DomainError("cannot normalize a zero vector");
  Point out(a.begin(), a.end());
  for (double& v : out) v /= r;
  return out;
}

SymMatrix SymMatrix::identity(int n) {
  SymMatrix m(n);
  for (int i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

SymMatrix SymMatrix::diagonal(std::span<const double> d) {
  SymMatrix m(static_cast<int>(d.size()));
  for (std::size_t i = 0; i < d.size(); ++i) m(i, i) = d[i];
  return m;
}

SymMatrix SymMatrix::from_rows(int n, std::span<const double> rows) {
  if (static_cast<int>(rows.size()) != n * n) throw DomainError("from_rows: expected n*n entries");
  SymMatrix m(n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) m(i, j) = rows[n * i + j];
  return m;
}

SymMatrix SymMatrix::outer(std::span<const double> v) {
  SymMatrix m(static_cast<int>(v.size()));
  for (int i = 0; i < m.n_; ++i)
    for (int j = 0; j < m.n_; ++j) m(i, j) = v[i] * v[j];
  return m;
}

double SymMatrix::trace() const {
  double t = 0.0;
  for (int i = 0; i < n_; ++i) t += (*this)(i, i);
  return t;
}

double SymMatrix::max_asymmetry() const {
  double worst = 0.0;
  for (int i = 0; i < n_; ++i)
    for (int j = i + 1; j < n_; ++j) worst = std::max(worst, std::abs((*this)(i, j) - (*this)(j, i)));
  return worst;
}

double SymMatrix::quadratic(std::span<const double> v) const {
  double s = 0.0;
  for (int i = 0; i < n_; ++i)
    for (int j = 0; j < n_; ++j) s += v[i] * (*this)(i, j) * v[j];
  return s;
}

SymMatrix SymMatrix::operator+(const SymMatrix& o) const {
  SymMatrix r(n_);
  for (int k = 0; k < 9; ++k) r.a_[k] = a_[k] + o.a_[k];
  return r;
}

SymMatrix SymMatrix::operator-(const SymMatrix& o) const {
  SymMatrix r(n_);
  for (int k = 0; k < 9; ++k) r.a_[k] = a_[k] - o.a_[k];
  return r;
}

SymMatrix SymMatrix::operator*(double s) const {
  SymMatrix r(n_);
  for (int k = 0; k < 9; ++k) r.a_[k] = a_[k] * s;
  return r;
}

namespace {

std::vector<double> jacobi_eigenvalues(const SymMatrix& m) {
  double a[3][3];
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) a[i][j] = 0.5 * (m(i, j) + m(j, i));
  for (int sweep = 0; sweep < 64; ++sweep) {
    const double off = std::abs(a[0][1]) + std::abs(a[0][2]) + std::abs(a[1][2]);
    if (off < 1e-12) break;
    for (int p = 0; p < 2; ++p) {
      for (int q = p + 1; q < 3; ++q) {
        if (std::abs(a[p][q]) < 1e-300) continue;
        const double theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
        const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (int k = 0; k < 3; ++k) {
          const double akp = a[k][p], akq = a[k][q];
          a[k][p] = c * akp - s * akq;
          a[k][q] = s * akp + c * akq;
        }
        for (int k = 0; k < 3; ++k) {
          const double apk = a[p][k], aqk = a[q][k];
          a[p][k] = c * apk - s * aqk;
          a[q][k] = s * apk + c * aqk;
        }
      }
    }
  }
  return {a[0][0], a[1][1], a[2][2]};
}

}  // namespace

std::vector<double> symmetric_eigenvalues(const SymMatrix& m) {
  std::vector<double> ev;
  switch (m.dim()) {
    case 1:
      ev = {m(0, 0)};
      break;
    case 2: {
      const double a = m(0, 0), d = m(1, 1), b = 0.5 * (m(0, 1) + m(1, 0));
      const double mean = 0.5 * (a + d);
      const double rad = std::hypot(0.5 * (a - d), b);
      ev = {mean + rad, mean - rad};
      break;
    }
    case 3:
      ev = jacobi_eigenvalues(m);
      break;
    default:
      throw DomainError("symmetric_eigenvalues: dimension must be 1, 2 or 3");
  }
  std::sort(ev.begin(), ev.end(), std::greater<>());
  return ev;
}

Frame::Frame(std::span<const double> nu_in) : n_(static_cast<int>(nu_in.size())) {
  if (n_ < 1 || n_ > 3) throw DomainError("Frame: dimension must be 1, 2 or 3");
  const Point nu = normalized(nu_in);
  auto set_col = [&](int j, std::span<const double> v) {
    for (int i = 0; i < n_; ++i) q_[3 * i + j] = v[i];
  };
  if (n_ == 1) {
    set_col(0, nu);
  } else if (n_ == 2) {
    const Point t{nu[1], -nu[0]};
    set_col(0, t);
    set_col(1, nu);
  } else {
    int k = 0;
    for (int i = 1; i < 3; ++i)
      if (std::abs(nu[i]) < std::abs(nu[k])) k = i;
    Point e{0.0, 0.0, 0.0};
    e[k] = 1.0;
    const double c = dot(e, nu);
    for (int i = 0; i < 3; ++i) e[i] -= c * nu[i];
    const Point t1 = normalized(e);
    const Point t2{nu[1] * t1[2] - nu[2] * t1[1], nu[2] * t1[0] - nu[0] * t1[2],
                   nu[0] * t1[1] - nu[1] * t1[0]};
    set_col(0, t1);
    set_col(1, t2);
    set_col(2, nu);
  }
}

Point Frame::column(int j) const {
  Point c(n_);
  for (int i = 0; i < n_; ++i) c[i] = q_[3 * i + j];
  return c;
}

Point Frame::apply(std::span<const double> xi) const {
  Point y(n_, 0.0);
  for (int i = 0; i < n_; ++i)
    for (int j = 0; j < n_; ++j) y[i] += q_[3 * i + j] * xi[j];
  return y;
}

SymMatrix Frame::to_frame(const SymMatrix& m) const {
  SymMatrix r(n_);
  for (int i = 0; i < n_; ++i)
    for (int j = 0; j < n_; ++j) {
      double s = 0.0;
      for (int k = 0; k < n_; ++k)
        for (int l = 0; l < n_; ++l) s += q_[3 * k + i] * m(k, l) * q_[3 * l + j];
      r(i, j) = s;
    }
  return r;
}

SymMatrix Frame::from_frame(const SymMatrix& m) const {
  SymMatrix r(n_);
  for (int i = 0; i < n_; ++i)
    for (int j = 0; j < n_; ++j) {
      double s = 0.0;
      for (int k = 0; k < n_; ++k)
        for (int l = 0; l < n_; ++l) s += q_[3 * i + k] * m(k, l) * q_[3 * j + l];
      r(i, j) = s;
    }
  return r;
}

double Frame::orthogonality_error() const {
  double worst = 0.0;
  for (int i = 0; i < n_; ++i)
    for (int j = 0; j < n_; ++j) {
      double s = 0.0;
      for (int k = 0; k < n_; ++k) s += q_[3 * k + i] * q_[3 * k + j];
      worst = std::max(worst, std::abs(s - (i == j ? 1.0 : 0.0)));
    }
  return worst;
}

}  // namespace bhom
