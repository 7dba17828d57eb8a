#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "bhom/barriers.hpp"
#include "bhom/corrector.hpp"
#include "bhom/effective.hpp"
#include "bhom/error.hpp"
#include "bhom/geometry.hpp"
#include "bhom/io.hpp"
#include "bhom/operators.hpp"

namespace py = pybind11;
using namespace bhom;

namespace {

py::object to_py(const json& j) {
  switch (j.type()) {
    case json::value_t::null: return py::none();
    case json::value_t::boolean: return py::bool_(j.get<bool>());
    case json::value_t::number_integer: return py::int_(j.get<std::int64_t>());
    case json::value_t::number_unsigned: return py::int_(j.get<std::uint64_t>());
    case json::value_t::number_float: return py::float_(j.get<double>());
    case json::value_t::string: return py::str(j.get<std::string>());
    case json::value_t::array: {
      py::list l;
      for (const auto& e : j) l.append(to_py(e));
      return l;
    }
    default: {
      py::dict d;
      for (const auto& [k, v] : j.items()) d[py::str(k)] = to_py(v);
      return d;
    }
  }
}

json from_py(const py::handle& o) {
  if (o.is_none()) return nullptr;
  if (py::isinstance<py::bool_>(o)) return o.cast<bool>();
  if (py::isinstance<py::int_>(o)) return o.cast<std::int64_t>();
  if (py::isinstance<py::float_>(o)) return o.cast<double>();
  if (py::isinstance<py::str>(o)) return o.cast<std::string>();
  if (py::isinstance<py::dict>(o)) {
    json j = json::object();
    for (const auto& [k, v] : o.cast<py::dict>()) j[k.cast<std::string>()] = from_py(v);
    return j;
  }
  if (py::isinstance<py::sequence>(o)) {
    json j = json::array();
    for (const auto& v : o.cast<py::sequence>()) j.push_back(from_py(v));
    return j;
  }
  throw py::type_error("config values must be dicts, lists, numbers, strings or booleans");
}

py::dict grid_to_py(const GridField& g) {
  std::vector<py::ssize_t> shape;
  for (int k = g.dim - 1; k >= 0; --k) shape.push_back(g.extents[k]);
  py::array_t<double> values(shape);
  py::array_t<std::uint8_t> mask(shape);
  std::copy(g.values.begin(), g.values.end(), values.mutable_data());
  for (std::size_t i = 0; i < g.size(); ++i) mask.mutable_data()[i] = static_cast<std::uint8_t>(g.mask[i]);
  py::dict d;
  d["values"] = values;  // index [.., j, i]: the first axis varies fastest
  d["mask"] = mask;
  d["origin"] = g.origin;
  d["h"] = g.h;
  return d;
}

StripParams strip_from(const py::dict& cfg) { return parse_strip(ConfigReader(from_py(cfg))); }

}  // namespace

PYBIND11_MODULE(bhom, m) {
  m.doc() = "Homogenization of oscillating Dirichlet data for fully nonlinear elliptic equations";

  static py::exception<Error> base(m, "BhomError", PyExc_RuntimeError);
  py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
  py::register_exception<DomainError>(m, "DomainError", base.ptr());
  py::register_exception<StabilityError>(m, "StabilityError", base.ptr());
  py::register_exception<DegenerateBarrier>(m, "DegenerateBarrier", base.ptr());
  py::register_exception<NoNearIntegerPoint>(m, "NoNearIntegerPoint", base.ptr());
  py::register_exception<DeltaContinuityError>(m, "DeltaContinuityError", base.ptr());
  py::register_exception<ConvergenceError>(m, "ConvergenceError", base.ptr());
  py::register_exception<CertificateError>(m, "CertificateError", base.ptr());

  py::class_<Direction>(m, "Direction")
      .def_readonly("nu", &Direction::nu)
      .def_readonly("rational", &Direction::rational)
      .def_readonly("m", &Direction::m)
      .def("__repr__", [](const Direction& d) { return "Direction(" + to_json(d).dump() + ")"; });

  m.def("classify_direction", [](std::vector<double> v, double tol, std::int64_t max_den) {
        return classify_direction(v, tol, max_den);
      }, py::arg("v"), py::arg("tol") = 1e-9, py::arg("max_denominator") = 10000);
  m.def("in_D_delta", [](const Direction& d, double delta) { return in_D_delta(d, delta).member; });
  m.def("equidist_ratio", [](const Direction& d, double delta, double t0, std::int64_t R) {
        return to_py(to_json(equidist_ratio(d, delta, t0, R)));
      }, py::arg("direction"), py::arg("delta"), py::arg("t0"), py::arg("R"));
  m.def("near_integer_point", [](const Direction& d, std::vector<std::int64_t> k, double delta) {
        return to_py(to_json(near_integer_point(d, k, delta)));
      });

  py::class_<Domain>(m, "Domain")
      .def_static("disk", &Domain::disk, py::arg("center"), py::arg("radius"))
      .def_static("half_disk_flat_bottom", &Domain::half_disk_flat_bottom, py::arg("center") = Point{0.0, 1.0},
                  py::arg("radius") = 1.0)
      .def_static("rectangle", &Domain::rectangle)
      .def_static("implicit", [](const std::string& phi, Point lo, Point hi, int res) {
        return Domain::implicit(Expr::parse(phi), lo, hi, res);
      }, py::arg("phi"), py::arg("lo"), py::arg("hi"), py::arg("resolution") = 2048)
      .def("contains", [](const Domain& d, std::vector<double> x) { return d.contains(x); })
      .def("outward_normal", [](const Domain& d, std::vector<double> x) { return d.outward_normal(x); })
      .def("boundary_point", &Domain::boundary_point)
      .def("perimeter", &Domain::perimeter)
      .def("diameter", &Domain::diameter)
      .def("__repr__", &Domain::describe);

  m.def("iddc_audit", [](const Domain& d, int samples, std::int64_t max_den) {
        return to_py(to_json(iddc_audit(d, samples, max_den)));
      }, py::arg("domain"), py::arg("samples") = 4096, py::arg("max_denominator") = 10000);

  py::class_<EllipticOperator>(m, "Operator")
      .def_static("laplacian", &EllipticOperator::laplacian, py::arg("n") = 2)
      .def_static("pucci", &EllipticOperator::pucci, py::arg("sign"), py::arg("n"), py::arg("lambda_"), py::arg("Lambda"))
      .def_static("from_config", [](const py::dict& cfg) { return parse_operator(ConfigReader(from_py(cfg))); })
      .def("__call__", [](const EllipticOperator& op, std::vector<std::vector<double>> M, std::vector<double> y) {
        const int n = op.dim();
        if (static_cast<int>(M.size()) != n) throw DomainError("matrix size differs from the operator dimension");
        SymMatrix S(n);
        for (int i = 0; i < n; ++i)
          for (int j = 0; j < n; ++j) S(i, j) = 0.5 * (M[i][j] + M[j][i]);
        if (y.empty()) y.assign(n, 0.0);
        return op(S, y);
      }, py::arg("M"), py::arg("y") = std::vector<double>{})
      .def_property_readonly("dim", &EllipticOperator::dim)
      .def_property_readonly("lambda_", &EllipticOperator::lambda)
      .def_property_readonly("Lambda", &EllipticOperator::Lambda)
      .def("__repr__", &EllipticOperator::describe);

  m.def("validate_operator", [](const EllipticOperator& op, int samples, std::uint64_t seed) {
        return to_py(to_json(validate_operator(op, samples, seed)));
      }, py::arg("op"), py::arg("samples") = 200, py::arg("seed") = 12345);

  m.def("exponent_interior", &exponent_interior);
  m.def("exponent_exterior", &exponent_exterior);

  m.def("solve_oscillating", [](const Domain& dom, const EllipticOperator& op, const std::string& g, const std::string& f,
                                double eps, double h, int order) {
        OscillatingProblem p{dom, eps, op, {Expr::parse(f), Expr::parse(g), {}}};
        OscillatingSolution s;
        {
          py::gil_scoped_release release;
          s = solve_oscillating(p, h, order);
        }
        py::dict d = grid_to_py(s.field);
        d["record"] = to_py(to_json(s.record));
        d["sup_u"] = s.sup_u;
        d["uniform_bound"] = s.uniform_bound;
        d["warnings"] = s.warnings;
        return d;
      }, py::arg("domain"), py::arg("op"), py::arg("g"), py::arg("f") = "0", py::arg("epsilon"), py::arg("h"),
      py::arg("order") = 2);

  m.def("estimate_gbar", [](std::vector<double> x0, const Direction& nu, std::vector<double> eps_list,
                            const std::string& g, const EllipticOperator& op, const py::dict& strip) {
        const StripParams sp = strip_from(strip);
        GbarEstimate e;
        {
          py::gil_scoped_release release;
          e = estimate_gbar(x0, nu, eps_list, Expr::parse(g), op, sp);
        }
        return to_py(to_json(e));
      }, py::arg("x0"), py::arg("direction"), py::arg("eps_list"), py::arg("g"), py::arg("op"),
      py::arg("strip") = py::dict());

  m.def("fit_inverse_rate", [](std::vector<double> deltas, std::vector<double> gaps) {
    return to_py(to_json(fit_inverse_rate(deltas, gaps)));
  });

  m.def("parse_config", [](const std::string& text) { return to_py(parse_config(text)); });
  m.attr("__version__") = BHOM_VERSION;
}
