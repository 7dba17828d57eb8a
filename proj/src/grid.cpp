#include "bhom/grid.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>

#include "bhom/error.hpp"

namespace bhom {

GridField GridField::make(int dim, Point origin, std::array<int, 3> extents, double h) {
  if (dim < 1 || dim > 3) throw DomainError("grid dimension must be 1, 2 or 3");
  if (!(h > 0.0)) throw DomainError("grid spacing must be positive");
  if (static_cast<int>(origin.size()) != dim) throw DomainError("grid origin has wrong dimension");
  GridField g;
  g.dim = dim;
  g.origin = std::move(origin);
  g.h = h;
  for (int i = 0; i < 3; ++i) {
    g.extents[i] = i < dim ? extents[i] : 1;
    if (g.extents[i] < 1) throw DomainError("grid extents must be positive");
  }
  const std::size_t n = static_cast<std::size_t>(g.extents[0]) * g.extents[1] * g.extents[2];
  g.mask.assign(n, NodeType::Exterior);
  g.values.assign(n, 0.0);
  return g;
}

std::array<int, 3> GridField::multi_index(std::int64_t idx) const {
  std::array<int, 3> ijk{};
  ijk[0] = static_cast<int>(idx % extents[0]);
  idx /= extents[0];
  ijk[1] = static_cast<int>(idx % extents[1]);
  ijk[2] = static_cast<int>(idx / extents[1]);
  return ijk;
}

bool GridField::valid(const std::array<int, 3>& ijk) const {
  for (int i = 0; i < 3; ++i)
    if (ijk[i] < 0 || ijk[i] >= extents[i]) return false;
  return true;
}

Point GridField::coord(std::int64_t idx) const {
  const auto ijk = multi_index(idx);
  Point x(dim);
  for (int i = 0; i < dim; ++i) x[i] = origin[i] + h * ijk[i];
  return x;
}

double GridField::interpolate(std::span<const double> x) const {
  const double nan = std::numeric_limits<double>::quiet_NaN();
  std::array<int, 3> base{0, 0, 0};
  std::array<double, 3> frac{0.0, 0.0, 0.0};
  for (int i = 0; i < dim; ++i) {
    const double s = (x[i] - origin[i]) / h;
    if (s < -1e-9 || s > extents[i] - 1 + 1e-9) return nan;
    int b = static_cast<int>(std::floor(s));
    b = std::clamp(b, 0, std::max(0, extents[i] - 2));
    base[i] = b;
    frac[i] = std::clamp(s - b, 0.0, 1.0);
    if (extents[i] == 1) frac[i] = 0.0;
  }
  double acc = 0.0;
  const int corners = 1 << dim;
  for (int c = 0; c < corners; ++c) {
    double w = 1.0;
    std::array<int, 3> ijk = base;
    for (int i = 0; i < dim; ++i) {
      const bool up = (c >> i) & 1;
      w *= up ? frac[i] : 1.0 - frac[i];
      if (up) ++ijk[i];
    }
    if (w == 0.0) continue;
    if (!valid(ijk)) return nan;
    const auto idx = index(ijk);
    if (mask[idx] == NodeType::Exterior) return nan;
    acc += w * values[idx];
  }
  return acc;
}

std::int64_t GridField::count(NodeType t) const {
  std::int64_t c = 0;
  for (auto m : mask) c += (m == t);
  return c;
}

namespace {

void write_number(std::ostream& os, double v) {
  if (std::isnan(v)) {
    os << "nan";
    return;
  }
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  os << buf;
}

}  // namespace

void write_grid(std::ostream& os, const GridField& g) {
  os << "# bhom grid\n";
  os << "dim " << g.dim << "\n";
  os << "extents";
  for (int i = 0; i < g.dim; ++i) os << ' ' << g.extents[i];
  os << "\nh ";
  write_number(os, g.h);
  os << "\norigin";
  for (int i = 0; i < g.dim; ++i) {
    os << ' ';
    write_number(os, g.origin[i]);
  }
  os << "\naxisymmetric " << (g.axisymmetric ? 1 : 0) << "\n";
  os << "values\n";
  const int row = g.extents[0];
  for (std::size_t idx = 0; idx < g.size(); ++idx) {
    write_number(os, g.mask[idx] == NodeType::Exterior ? std::numeric_limits<double>::quiet_NaN() : g.values[idx]);
    os << ((idx + 1) % row == 0 ? '\n' : ' ');
  }
  os << "mask\n";
  for (std::size_t idx = 0; idx < g.size(); ++idx)
    os << static_cast<int>(g.mask[idx]) << ((idx + 1) % row == 0 ? '\n' : ' ');
}

GridField read_grid(std::istream& is) {
  std::string line, key;
  auto expect = [&](const char* name) {
    if (!(is >> key) || key != name) throw ConfigError(std::string("grid dump: expected '") + name + "'", name);
  };
  std::getline(is, line);
  if (line.rfind("# bhom grid", 0) != 0) throw ConfigError("grid dump: missing header", "header");
  int dim = 0;
  expect("dim");
  is >> dim;
  if (dim < 1 || dim > 3) throw ConfigError("grid dump: bad dimension", "dim");
  std::array<int, 3> ext{1, 1, 1};
  expect("extents");
  for (int i = 0; i < dim; ++i) is >> ext[i];
  double h = 0.0;
  expect("h");
  is >> h;
  Point origin(dim);
  expect("origin");
  for (int i = 0; i < dim; ++i) is >> origin[i];
  int axi = 0;
  expect("axisymmetric");
  is >> axi;
  GridField g = GridField::make(dim, origin, ext, h);
  g.axisymmetric = axi != 0;
  expect("values");
  std::string tok;
  for (std::size_t idx = 0; idx < g.size(); ++idx) {
    if (!(is >> tok)) throw ConfigError("grid dump: truncated values", "values");
    g.values[idx] = tok == "nan" ? std::numeric_limits<double>::quiet_NaN() : std::stod(tok);
  }
  expect("mask");
  for (std::size_t idx = 0; idx < g.size(); ++idx) {
    int m = 0;
    if (!(is >> m) || m < 0 || m > 2) throw ConfigError("grid dump: bad mask", "mask");
    g.mask[idx] = static_cast<NodeType>(m);
    if (g.mask[idx] == NodeType::Exterior) g.values[idx] = 0.0;
  }
  return g;
}

void write_cross_section_csv(std::ostream& os, const GridField& g, int fixed_axis, double at) {
  if (g.dim != 2 || fixed_axis < 0 || fixed_axis > 1) throw DomainError("cross sections need a 2D grid");
  const int along = 1 - fixed_axis;
  const int fixed = std::clamp(static_cast<int>(std::lround((at - g.origin[fixed_axis]) / g.h)), 0,
                               g.extents[fixed_axis] - 1);
  os << "coord,value\n";
  for (int i = 0; i < g.extents[along]; ++i) {
    std::array<int, 3> ijk{0, 0, 0};
    ijk[along] = i;
    ijk[fixed_axis] = fixed;
    const auto idx = g.index(ijk);
    write_number(os, g.origin[along] + g.h * i);
    os << ',';
    write_number(os, g.mask[idx] == NodeType::Exterior ? std::numeric_limits<double>::quiet_NaN() : g.values[idx]);
    os << '\n';
  }
}

}  // namespace bhom
