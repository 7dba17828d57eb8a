#include "bhom/io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <ostream>
#include <sstream>

#include "bhom/error.hpp"

namespace bhom {

ConfigReader ConfigReader::at(const std::string& key) const {
  if (!has(key)) fail(key, "missing object");
  if (!j_.at(key).is_object()) fail(key, "expected an object");
  return ConfigReader(j_.at(key), field(key));
}

void ConfigReader::fail(const std::string& key, const std::string& what) const {
  const std::string f = field(key);
  throw ConfigError("config field '" + f + "': " + what, f);
}

double ConfigReader::number(const std::string& key) const {
  if (!has(key)) fail(key, "missing number");
  const json& v = j_.at(key);
  if (!v.is_number()) fail(key, "expected a number, got " + v.dump());
  return v.get<double>();
}

double ConfigReader::number(const std::string& key, double fallback) const {
  return has(key) ? number(key) : fallback;
}

int ConfigReader::integer(const std::string& key) const {
  if (!has(key)) fail(key, "missing integer");
  const json& v = j_.at(key);
  if (!v.is_number_integer()) fail(key, "expected an integer, got " + v.dump());
  return v.get<int>();
}

int ConfigReader::integer(const std::string& key, int fallback) const {
  return has(key) ? integer(key) : fallback;
}

bool ConfigReader::boolean(const std::string& key, bool fallback) const {
  if (!has(key)) return fallback;
  const json& v = j_.at(key);
  if (!v.is_boolean()) fail(key, "expected true or false, got " + v.dump());
  return v.get<bool>();
}

std::string ConfigReader::string(const std::string& key) const {
  if (!has(key)) fail(key, "missing string");
  const json& v = j_.at(key);
  if (!v.is_string()) fail(key, "expected a string, got " + v.dump());
  return v.get<std::string>();
}

std::string ConfigReader::string(const std::string& key, const std::string& fallback) const {
  return has(key) ? string(key) : fallback;
}

std::vector<double> ConfigReader::numbers(const std::string& key) const {
  if (!has(key)) fail(key, "missing number list");
  const json& v = j_.at(key);
  if (!v.is_array()) fail(key, "expected a list of numbers, got " + v.dump());
  std::vector<double> out;
  for (const auto& e : v) {
    if (!e.is_number()) fail(key, "expected a list of numbers, got " + v.dump());
    out.push_back(e.get<double>());
  }
  return out;
}

std::vector<double> ConfigReader::numbers(const std::string& key, std::vector<double> fallback) const {
  return has(key) ? numbers(key) : fallback;
}

Expr ConfigReader::expr(const std::string& key) const {
  const std::string src = string(key);
  try {
    return Expr::parse(src);
  } catch (const Error& e) {
    fail(key, e.what());
  }
}

Expr ConfigReader::expr(const std::string& key, const std::string& fallback) const {
  return has(key) ? expr(key) : Expr::parse(fallback);
}

json parse_config(const std::string& text, const std::string& origin) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    // byte offset -> line and column
    int line = 1, col = 1;
    for (std::size_t i = 0; i + 1 < e.byte && i < text.size(); ++i) {
      if (text[i] == '\n') ++line, col = 1;
      else ++col;
    }
    std::ostringstream os;
    os << origin << ":" << line << ":" << col << ": " << e.what();
    throw ConfigError(os.str(), "");
  }
}

json load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path, "");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path);
}

Domain parse_domain(const ConfigReader& c) {
  const std::string kind = c.string("kind");
  try {
    if (kind == "disk") return Domain::disk(c.numbers("center", {0.0, 0.0}), c.number("radius", 1.0));
    if (kind == "half_disk") return Domain::half_disk_flat_bottom(c.numbers("center", {0.0, 1.0}), c.number("radius", 1.0));
    if (kind == "rectangle") return Domain::rectangle(c.numbers("lo"), c.numbers("hi"));
    if (kind == "implicit")
      return Domain::implicit(c.expr("phi"), c.numbers("lo"), c.numbers("hi"), c.integer("resolution", 2048));
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    c.fail("kind", e.what());
  }
  c.fail("kind", "unknown domain '" + kind + "' (disk, half_disk, rectangle, implicit)");
}

namespace {

EllipticOperator parse_linear(const ConfigReader& c, int n) {
  const json& a = c.raw().contains("a") ? c.raw().at("a") : json();
  if (!a.is_array() || static_cast<int>(a.size()) != n * n)
    c.fail("a", "expected " + std::to_string(n * n) + " coefficient expressions (row-major)");
  std::vector<Expr> coeffs;
  for (const auto& e : a) {
    if (e.is_number()) coeffs.push_back(Expr::parse(format_number(e.get<double>())));
    else if (e.is_string()) coeffs.push_back(Expr::parse(e.get<std::string>()));
    else c.fail("a", "coefficients are numbers or expression strings");
  }
  return EllipticOperator::linear(n, coeffs, c.number("lambda"), c.number("Lambda"), c.numbers("period", {}));
}

}  // namespace

EllipticOperator parse_operator(const ConfigReader& c) {
  const std::string kind = c.string("kind");
  const int n = c.integer("n", 2);
  try {
    if (kind == "laplacian") return EllipticOperator::laplacian(n);
    if (kind == "pucci_plus" || kind == "pucci_minus")
      return EllipticOperator::pucci(kind == "pucci_plus" ? +1 : -1, n, c.number("lambda"), c.number("Lambda"));
    if (kind == "linear") return parse_linear(c, n);
    if (kind == "bellman") {
      if (!c.has("members") || !c.raw().at("members").is_array()) c.fail("members", "expected a list of linear operators");
      std::vector<EllipticOperator> members;
      const json& arr = c.raw().at("members");
      for (std::size_t i = 0; i < arr.size(); ++i)
        members.push_back(parse_linear(ConfigReader(arr[i], c.field("members[" + std::to_string(i) + "]")), n));
      return EllipticOperator::bellman(members, c.boolean("sup", true));
    }
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    c.fail("kind", e.what());
  }
  c.fail("kind", "unknown operator '" + kind + "' (laplacian, pucci_plus, pucci_minus, linear, bellman)");
}

SourceAndBoundaryData parse_data(const ConfigReader& c) {
  SourceAndBoundaryData d;
  d.g = c.expr("g");
  d.f = c.expr("f", "0");
  d.period = c.numbers("period", {});
  return d;
}

StripParams parse_strip(const ConfigReader& c) {
  StripParams s;
  s.T = c.number("T", s.T);
  s.L = c.number("L", s.L);
  s.h = c.number("h", s.h);
  s.order = c.integer("order", s.order);
  s.tol = c.number("tol", s.tol);
  s.refine_top = c.boolean("refine_top", s.refine_top);
  s.rays = c.integer("rays", s.rays);
  s.seed = static_cast<std::uint64_t>(c.integer("seed", static_cast<int>(s.seed)));
  s.equality_factor = c.number("equality_factor", s.equality_factor);
  s.threads = c.integer("threads", s.threads);
  s.g_period = c.numbers("g_period", {});
  if (!(s.T > 0.0)) c.fail("T", "must be positive");
  if (!(s.h > 0.0)) c.fail("h", "must be positive");
  return s;
}

Direction parse_direction(const ConfigReader& c, const std::string& key) {
  const auto v = c.numbers(key);
  if (v.size() < 2 || v.size() > 3) c.fail(key, "expected 2 or 3 components");
  try {
    return classify_direction(v, c.number("direction_tol", 1e-9),
                              static_cast<std::int64_t>(c.number("max_denominator", 10000)));
  } catch (const Error& e) {
    c.fail(key, e.what());
  }
}

json to_json(const Direction& d) {
  return {{"nu", d.nu}, {"class", d.rational ? "rational" : "irrational"}, {"m", d.m}, {"tol", d.tol},
          {"max_denominator", d.max_denominator}};
}

json to_json(const ConvergenceRecord& r) {
  return {{"converged", r.converged},     {"method", r.method},
          {"iterations", r.iterations},   {"final_residual", r.final_residual},
          {"red_black", r.red_black},     {"factorization_reused", r.factorization_reused},
          {"residual_history", r.residual_history}};
}

json to_json(const RayLimit& r) {
  return {{"alpha", r.alpha},     {"err", r.err},   {"W_readout", r.W_readout}, {"lateral", r.lateral},
          {"top", r.top},         {"rays", r.ray_values}, {"spread", r.spread}, {"flagged", r.flagged}};
}

json to_json(const GbarRecord& r) {
  return {{"epsilon", r.epsilon}, {"alpha", r.alpha}, {"err", r.err}, {"spread", r.spread},
          {"flagged", r.flagged}, {"solves", r.solves}};
}

json to_json(const GbarEstimate& e) {
  json recs = json::array();
  for (const auto& r : e.records) recs.push_back(to_json(r));
  return {{"x0", e.x0},
          {"direction", to_json(e.nu)},
          {"records", recs},
          {"gbar_star", e.gbar_star},
          {"gbar_lower", e.gbar_lower},
          {"max_err", e.max_err},
          {"equal", e.equal},
          {"gbar", e.equal ? json(e.gbar) : json(nullptr)},
          {"flagged_eps", e.flagged_eps}};
}

json to_json(const SupersolutionReport& r) {
  json j = {{"samples", r.samples},
            {"max_operator_value", r.max_operator_value},
            {"worst_point", r.worst_point},
            {"holds", r.holds}};
  if (r.checks_boundary) {
    j["min_boundary_value"] = r.min_boundary_value;
    j["boundary_dominates"] = r.boundary_dominates;
  }
  return j;
}

json to_json(const ValidationReport& r) {
  return {{"samples", r.samples},
          {"ellipticity_violation", r.ellipticity_violation},
          {"homogeneity_error", r.homogeneity_error},
          {"periodicity_error", r.periodicity_error},
          {"monotonicity_violation", r.monotonicity_violation},
          {"coefficient_violation", r.coefficient_violation},
          {"passed", r.passed},
          {"failures", r.failures}};
}

json to_json(const IddcAudit& a) {
  json pts = json::array(), runs = json::array();
  for (const auto& [s, m] : a.rational_points) pts.push_back({{"s", s}, {"m", m}});
  for (const auto& r : a.rational_intervals)
    runs.push_back({{"s_begin", r.s_begin}, {"s_end", r.s_end}, {"count", r.count}, {"m", r.m}});
  return {{"samples", a.samples},
          {"rational_fraction", a.rational_fraction},
          {"rational_points", pts},
          {"rational_intervals", runs},
          {"degenerate_points", a.degenerate_points},
          {"plausible", a.plausible},
          {"verdict", a.verdict}};
}

json to_json(const EquidistRecord& r) { return {{"A", r.A}, {"N", r.N}, {"ratio", r.ratio}}; }

json to_json(const NearIntegerResult& r) {
  const auto& l = r.lattice;
  return {{"nu", l.direction.nu},       {"class", l.direction.rational ? "rational" : "irrational"},
          {"m", l.direction.m},         {"t", l.frac_part},
          {"R_used", r.R_used},         {"cube_index", l.cube_index},
          {"hat_point", l.hat_point},   {"integer_anchor", l.integer_anchor}};
}

json to_json(const SandwichVerdict& v) {
  json rows = json::array();
  for (const auto& r : v.rows)
    rows.push_back({{"epsilon", r.epsilon},
                    {"h", r.h},
                    {"gap_plus", r.gap_plus},
                    {"gap_minus", r.gap_minus},
                    {"above", r.above},
                    {"below", r.below},
                    {"sandwiched", r.sandwiched},
                    {"worst", r.worst},
                    {"sup_K_u", r.sup_K_u},
                    {"probe_values", r.probe_values},
                    {"sup_u", r.sup_u},
                    {"uniform_bound", r.uniform_bound}});
  return {{"delta", v.delta},         {"envelope_gap", v.envelope_gap}, {"budget", v.budget},
          {"rows", rows},             {"converged", v.converged},       {"reason", v.reason},
          {"stability", v.stability}, {"fbar_source", v.fbar_source}};
}

json to_json(const OscillationProfile& p) {
  return {{"heights", p.heights},
          {"W", p.W},
          {"fitted_exponent", p.fitted_exponent},
          {"gamma_est", p.gamma_est},
          {"non_increasing", p.non_increasing}};
}

json to_json(const InverseRateFit& f) { return {{"C", f.C}, {"spread", f.spread}, {"stable", f.stable}}; }

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

CsvWriter::CsvWriter(std::ostream& os, const std::vector<std::string>& header) : os_(os), columns_(header.size()) {
  for (const auto& h : header) cell(h);
  end_row();
}

void CsvWriter::sep() {
  if (in_row_++ > 0) os_ << ',';
}

CsvWriter& CsvWriter::cell(double v) {
  sep();
  os_ << format_number(v);
  return *this;
}

CsvWriter& CsvWriter::cell(long long v) {
  sep();
  os_ << v;
  return *this;
}

CsvWriter& CsvWriter::cell(const std::string& v) {
  sep();
  if (v.find_first_of(",\"\n") == std::string::npos) {
    os_ << v;
    return *this;
  }
  os_ << '"';
  for (char ch : v) {
    if (ch == '"') os_ << '"';
    os_ << ch;
  }
  os_ << '"';
  return *this;
}

void CsvWriter::end_row() {
  if (in_row_ != columns_) throw DomainError("csv: row has " + std::to_string(in_row_) + " cells, header has " +
                                             std::to_string(columns_));
  os_ << '\n';
  in_row_ = 0;
}

void write_profile_csv(std::ostream& os, const OscillationProfile& p) {
  CsvWriter w(os, {"t", "W"});
  for (std::size_t k = 0; k < p.heights.size(); ++k) {
    w.cell(p.heights[k]).cell(p.W[k]);
    w.end_row();
  }
}

void write_residual_csv(std::ostream& os, const ConvergenceRecord& r) {
  CsvWriter w(os, {"iteration", "residual"});
  for (std::size_t k = 0; k < r.residual_history.size(); ++k) {
    w.cell(static_cast<long long>(k)).cell(r.residual_history[k]);
    w.end_row();
  }
}

void write_envelope_csv(std::ostream& os, const BoundaryEnvelope& env, int points) {
  CsvWriter w(os, {"s", "h_minus", "h_plus"});
  for (int k = 0; k < points; ++k) {
    const double s = env.perimeter * k / points;
    w.cell(s).cell(env.h_minus(s)).cell(env.h_plus(s));
    w.end_row();
  }
}

void write_samples_csv(std::ostream& os, const BoundaryEnvelope& env) {
  CsvWriter w(os, {"s", "x1", "x2", "nu1", "nu2", "status", "usable", "gbar", "gbar_star", "gbar_lower", "err",
                   "equal", "h_minus", "h_plus"});
  for (const auto& smp : env.samples) {
    const double nu1 = smp.nu.size() > 0 ? smp.nu[0] : NAN, nu2 = smp.nu.size() > 1 ? smp.nu[1] : NAN;
    w.cell(smp.s).cell(smp.x[0]).cell(smp.x[1]).cell(nu1).cell(nu2).cell(smp.status).cell(smp.usable);
    if (smp.usable) w.cell(smp.gbar).cell(smp.gbar_star).cell(smp.gbar_lower).cell(smp.err).cell(smp.equal);
    else w.cell(std::string()).cell(std::string()).cell(std::string()).cell(std::string()).cell(std::string());
    if (env.completed()) w.cell(env.h_minus(smp.s)).cell(env.h_plus(smp.s));
    else w.cell(std::string()).cell(std::string());
    w.end_row();
  }
}

void write_convergence_csv(std::ostream& os, const SandwichVerdict& v) {
  std::vector<std::string> header = {"epsilon", "h", "gap_plus", "gap_minus", "above", "below", "sandwiched", "sup_K_u"};
  const std::size_t probes = v.rows.empty() ? 0 : v.rows.front().probe_values.size();
  for (std::size_t k = 0; k < probes; ++k) header.push_back("probe" + std::to_string(k));
  CsvWriter w(os, header);
  for (const auto& r : v.rows) {
    w.cell(r.epsilon).cell(r.h).cell(r.gap_plus).cell(r.gap_minus).cell(r.above).cell(r.below).cell(r.sandwiched).cell(
        r.sup_K_u);
    for (double p : r.probe_values) w.cell(p);
    w.end_row();
  }
}

}  // namespace bhom
