// Batch driver: one subcommand per pipeline stage, JSON config in, JSON and
// CSV out, plus a manifest that is enough to rerun the command.

#include <CLI11.hpp>

#include <Eigen/Core>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>

#include "bhom/barriers.hpp"
#include "bhom/corrector.hpp"
#include "bhom/effective.hpp"
#include "bhom/error.hpp"
#include "bhom/fdsolver.hpp"
#include "bhom/geometry.hpp"
#include "bhom/io.hpp"
#include "bhom/operators.hpp"
#include "bhom/parallel.hpp"

#ifndef BHOM_VERSION
#define BHOM_VERSION "0.0.0"
#endif

namespace fs = std::filesystem;
using namespace bhom;

namespace {

constexpr int kOk = 0, kConfigError = 2, kNumericalError = 3, kVerdictFalse = 4;

struct Run {
  json config;
  fs::path out;
  int threads = 0;
  std::vector<std::string> outputs;
  json summary = json::object();

  std::ofstream open(const std::string& name) {
    std::ofstream os(out / name);
    if (!os) throw ConfigError("cannot write " + (out / name).string(), "output_dir");
    outputs.push_back(name);
    return os;
  }
  void write_json(const std::string& name, const json& j) { open(name) << j.dump(2) << '\n'; }
};

std::vector<Point> parse_points(const ConfigReader& c, const std::string& key) {
  std::vector<Point> pts;
  if (!c.has(key)) return pts;
  const json& arr = c.raw().at(key);
  if (!arr.is_array()) c.fail(key, "expected a list of points");
  for (const auto& p : arr) {
    if (!p.is_array()) c.fail(key, "expected a list of points");
    Point x;
    for (const auto& v : p) {
      if (!v.is_number()) c.fail(key, "point coordinates must be numbers");
      x.push_back(v.get<double>());
    }
    pts.push_back(x);
  }
  return pts;
}

SolveMethod parse_method(const ConfigReader& c) {
  const std::string m = c.string("method", "howard");
  if (m == "howard") return SolveMethod::Howard;
  if (m == "gauss_seidel") return SolveMethod::GaussSeidel;
  if (m == "red_black") return SolveMethod::RedBlack;
  c.fail("method", "unknown solver '" + m + "' (howard, gauss_seidel, red_black)");
}

OscillatingProblem parse_problem(const ConfigReader& c) {
  OscillatingProblem p;
  p.domain = parse_domain(c.at("domain"));
  p.op = parse_operator(c.at("operator"));
  p.data = parse_data(c.at("data"));
  p.epsilon = c.number("epsilon", 0.1);
  if (p.op.dim() != p.domain.dim()) c.fail("operator", "dimension differs from the domain");
  return p;
}

// ---------------------------------------------------------------- subcommands

int cmd_solve(Run& run) {
  const ConfigReader c(run.config);
  const Domain dom = parse_domain(c.at("domain"));
  const EllipticOperator op = parse_operator(c.at("operator"));
  const SourceAndBoundaryData data = parse_data(c.at("data"));
  const double h = c.number("h");
  const int order = c.integer("order", 2);
  SolveOptions opt;
  opt.tol = c.number("tol", 1e-8);
  opt.method = parse_method(c);
  opt.max_sweeps = c.integer("max_sweeps", opt.max_sweeps);

  GridField field;
  ConvergenceRecord rec;
  json j;
  if (c.has("epsilon")) {
    OscillatingProblem p{dom, c.number("epsilon"), op, data};
    const OscillatingSolution s = solve_oscillating(p, h, order, opt.tol);
    field = s.field;
    rec = s.record;
    j = {{"epsilon", s.epsilon}, {"sup_u", s.sup_u}, {"uniform_bound", s.uniform_bound},
         {"bound_holds", s.bound_holds}, {"warnings", s.warnings}};
  } else {
    // No fast variable: g and f are evaluated with y = x.
    const PointFunction g = [&](const Point& x) { return data.g(x, x); };
    const PointFunction f = [&](const Point& x) { return data.f(x, x); };
    const DiscreteProblem dp = discretize(op, dom, h, order, FastVariable::scaled(dom.dim(), 1.0), g, f);
    SolveResult r = solve_dirichlet(dp, opt);
    field = std::move(r.field);
    rec = r.record;
    j = {{"certificate", dp.certificate}};
  }
  j["h"] = h;
  j["record"] = to_json(rec);
  j["interior_nodes"] = field.count(NodeType::Interior);
  run.write_json("solve.json", j);
  {
    auto os = run.open("solution.grid");
    write_grid(os, field);
  }
  {
    auto os = run.open("residuals.csv");
    write_residual_csv(os, rec);
  }
  if (field.dim == 2) {
    auto os = run.open("cross_section.csv");
    write_cross_section_csv(os, field, 1, dom.centroid()[1]);
  }
  run.summary = {{"converged", rec.converged}, {"iterations", rec.iterations}};
  return kOk;
}

int cmd_corrector(Run& run) {
  const ConfigReader c(run.config);
  const Point x0 = c.numbers("x0");
  const Direction nu = parse_direction(c, "direction");
  const EllipticOperator op = parse_operator(c.at("operator"));
  const SourceAndBoundaryData data = parse_data(c.at("data"));
  StripParams strip = c.has("strip") ? parse_strip(c.at("strip")) : StripParams{};
  strip.threads = run.threads;
  if (strip.g_period.empty()) strip.g_period = data.period;
  const std::vector<double> eps_list = c.numbers("eps_list", {c.number("epsilon", 1.0)});
  if (static_cast<int>(x0.size()) != nu.dim()) c.fail("x0", "dimension differs from the direction");

  json per_eps = json::array();
  for (std::size_t k = 0; k < eps_list.size(); ++k) {
    HalfspaceCorrectorProblem p = build_strip(x0, nu, eps_list[k], data.g, op, strip);
    const RefinedCorrector rc = solve_corrector_refined(p);
    per_eps.push_back({{"epsilon", eps_list[k]},
                       {"top_value", p.top_value},
                       {"limit", to_json(rc.limit)},
                       {"profile", to_json(rc.solution.profile)},
                       {"lateral_bound", rc.solution.lateral_bound},
                       {"top_bound", rc.solution.top_bound},
                       {"quadratic_lateral_bound", rc.solution.quadratic_lateral_bound},
                       {"record", to_json(rc.solution.record)}});
    const std::string tag = eps_list.size() > 1 ? "_" + std::to_string(k) : "";
    {
      auto os = run.open("profile" + tag + ".csv");
      write_profile_csv(os, rc.solution.profile);
    }
    if (c.boolean("dump_strip", false)) {
      auto os = run.open("strip" + tag + ".grid");
      write_grid(os, rc.solution.field);
    }
  }
  const GbarEstimate est = estimate_gbar(x0, nu, eps_list, data.g, op, strip);
  run.write_json("corrector.json", {{"estimate", to_json(est)}, {"solves", per_eps}});
  run.summary = {{"gbar_star", est.gbar_star}, {"gbar_lower", est.gbar_lower}, {"equal", est.equal}};
  return kOk;
}

GbarSamplingParams parse_sampling(const ConfigReader& c, int threads) {
  GbarSamplingParams sp;
  sp.eps_list = c.numbers("eps_list", sp.eps_list);
  sp.delta = c.number("delta", sp.delta);
  sp.direction_tol = c.number("direction_tol", sp.direction_tol);
  sp.max_denominator = static_cast<std::int64_t>(c.number("max_denominator", static_cast<double>(sp.max_denominator)));
  if (c.has("strip")) sp.strip = parse_strip(c.at("strip"));
  sp.strip.threads = threads;
  return sp;
}

std::vector<double> parse_arclengths(const ConfigReader& c, const Domain& dom) {
  if (c.has("arclengths")) return c.numbers("arclengths");
  return boundary_arclengths(dom, c.integer("count", 64), c.number("offset", 0.37));
}

void write_excluded_csv(Run& run, const BoundaryEnvelope& env) {
  auto os = run.open("excluded.csv");
  CsvWriter w(os, {"s_begin", "s_end", "z1", "z2", "m1", "m2", "corner", "estimated", "gbar_star", "gbar_lower", "err"});
  for (const auto& e : env.excluded) {
    w.cell(e.s_begin).cell(e.s_end).cell(e.z[0]).cell(e.z[1]);
    w.cell(static_cast<long long>(e.m[0])).cell(static_cast<long long>(e.m[1])).cell(e.corner).cell(e.estimated);
    w.cell(e.gbar_star).cell(e.gbar_lower).cell(e.err);
    w.end_row();
  }
}

int cmd_gbar(Run& run) {
  const ConfigReader c(run.config);
  const OscillatingProblem p = parse_problem(c);
  const ConfigReader sc = c.has("sampling") ? c.at("sampling") : c;
  const GbarSamplingParams sp = parse_sampling(sc, run.threads);
  const BoundaryEnvelope env = sample_gbar_on_boundary(p, parse_arclengths(sc, p.domain), sp);
  {
    auto os = run.open("boundary.csv");
    write_samples_csv(os, env);
  }
  write_excluded_csv(run, env);
  int usable = 0, equal = 0;
  double lo = INFINITY, hi = -INFINITY;
  for (const auto& s : env.samples) {
    if (!s.usable) continue;
    ++usable;
    equal += s.equal;
    lo = std::min(lo, s.gbar);
    hi = std::max(hi, s.gbar);
  }
  run.summary = {{"samples", env.samples.size()}, {"usable", usable}, {"equal", equal},
                 {"excluded_points", env.excluded.size()}, {"gbar_min", usable ? json(lo) : json(nullptr)},
                 {"gbar_max", usable ? json(hi) : json(nullptr)}, {"g_sup", env.g_sup}};
  run.write_json("gbar.json", run.summary);
  return kOk;
}

int cmd_equidist(Run& run) {
  const ConfigReader c(run.config);
  const Direction d = parse_direction(c, "direction");
  const double delta = c.number("delta");
  const double t0 = c.number("t0", 0.0);
  const std::vector<double> Rs = c.numbers("R_list", {c.number("R", 100)});
  json rows = json::array();
  {
    auto os = run.open("equidist.csv");
    CsvWriter w(os, {"R", "A", "N", "ratio", "deviation"});
    for (double Rd : Rs) {
      const auto R = static_cast<std::int64_t>(Rd);
      if (R < 1) c.fail("R_list", "cube sides must be positive integers");
      const EquidistRecord r = equidist_ratio(d, delta, t0, R);
      w.cell(static_cast<long long>(R)).cell(static_cast<long long>(r.A)).cell(static_cast<long long>(r.N)).cell(r.ratio).cell(
          std::abs(r.ratio - delta));
      w.end_row();
      json jr = to_json(r);
      jr["R"] = R;
      rows.push_back(jr);
    }
  }
  json j = {{"direction", to_json(d)}, {"delta", delta}, {"t0", t0}, {"table", rows}};
  if (c.has("cube_index")) {
    IntVec k;
    for (double v : c.numbers("cube_index")) k.push_back(static_cast<std::int64_t>(v));
    try {
      j["near_integer"] = to_json(near_integer_point(d, k, delta));
    } catch (const NoNearIntegerPoint& e) {
      j["near_integer"] = {{"error", e.what()}};
    }
  }
  run.write_json("equidist.json", j);
  run.summary = {{"rows", rows.size()}};
  return kOk;
}

int cmd_audit(Run& run) {
  const ConfigReader c(run.config);
  const Domain dom = parse_domain(c.at("domain"));
  const IddcAudit a = iddc_audit(dom, c.integer("samples", 4096),
                                 static_cast<std::int64_t>(c.number("max_denominator", 10000)), c.number("tol", 1e-9));
  run.write_json("audit.json", to_json(a));
  {
    auto os = run.open("rational_points.csv");
    CsvWriter w(os, {"s", "m1", "m2"});
    for (const auto& [s, m] : a.rational_points) {
      w.cell(s).cell(static_cast<long long>(m[0])).cell(static_cast<long long>(m.size() > 1 ? m[1] : 0));
      w.end_row();
    }
  }
  run.summary = {{"plausible", a.plausible}, {"verdict", a.verdict}};
  return kOk;
}

int cmd_barriers(Run& run) {
  const ConfigReader c(run.config);
  const int n = c.integer("n", 2);
  const double lambda = c.number("lambda", 1.0), Lambda = c.number("Lambda", 1.0);
  const int samples = c.integer("samples", 2000);
  const double tol = c.number("tol", 1e-9);
  const auto seed = static_cast<unsigned>(c.integer("seed", 1));
  const EllipticOperator mplus = EllipticOperator::pucci(+1, n, lambda, Lambda);
  json j = {{"n", n}, {"lambda", lambda}, {"Lambda", Lambda}};
  bool expected = true;

  auto check = [&](const std::string& name, const BarrierSpec& b, double inner, double outer, bool should_hold) {
    const auto pts = barrier_region_samples(b, samples, inner, outer, seed);
    const SupersolutionReport r = verify_supersolution(b, mplus, pts, tol);
    json jr = to_json(r);
    jr["barrier"] = b.describe();
    jr["expected_to_hold"] = should_hold;
    const bool ok = r.holds && (!r.checks_boundary || r.boundary_dominates);
    if (ok != should_hold) expected = false;
    j["checks"][name] = jr;
  };

  check("quad_strip", BarrierSpec::quad_strip(n, lambda, Lambda, c.number("scale", 1.0), c.number("amplitude", 4.0)), 0, 0,
        true);
  const Point origin(n, 0.0);
  try {
    const double a = exponent_interior(n, lambda, Lambda);
    j["exponent_interior"] = a;
    auto b = BarrierSpec::radial_interior(n, lambda, Lambda, origin);
    check("radial_interior", b, 0.1, 1.0, true);
    b.alpha = a + 0.01;
    check("radial_interior_perturbed", b, 0.1, 1.0, false);
  } catch (const StabilityError& e) {
    j["exponent_interior"] = {{"error", e.what()}};
  }
  try {
    const double a = exponent_exterior(n, lambda, Lambda);
    j["exponent_exterior"] = a;
    check("radial_exterior", BarrierSpec::radial_exterior(n, lambda, Lambda, origin, 1.0), 1.0, 3.0, true);
  } catch (const DegenerateBarrier& e) {
    j["exponent_exterior"] = {{"error", e.what()}};
  }
  if (c.has("stability_bound")) {
    const ConfigReader sb = c.at("stability_bound");
    const auto pts = parse_points(sb, "points"), K = parse_points(sb, "K");
    auto os = run.open("bounds.csv");
    CsvWriter w(os, {"r_m", "bound"});
    for (double r : sb.numbers("r_m")) {
      w.cell(r).cell(finite_boundary_stability_bound(pts, r, K, n, lambda, Lambda));
      w.end_row();
    }
  }
  j["all_as_expected"] = expected;
  run.write_json("barriers.json", j);
  run.summary = {{"all_as_expected", expected}};
  return expected ? kOk : kVerdictFalse;
}

int cmd_validate(Run& run) {
  const ConfigReader c(run.config);
  const EllipticOperator op = parse_operator(c.at("operator"));
  const ValidationReport r = validate_operator(op, c.integer("samples", 200), static_cast<std::uint64_t>(c.integer("seed", 12345)));
  json j = to_json(r);
  j["operator"] = op.describe();
  run.write_json("validation.json", j);
  run.summary = {{"passed", r.passed}};
  return r.passed ? kOk : kVerdictFalse;
}

EnvelopeParams parse_envelope(const ConfigReader& c, double K_scale) {
  EnvelopeParams ep;
  ep.delta = c.number("delta", ep.delta);
  ep.mollifier_radius = c.number("mollifier_radius", ep.mollifier_radius);
  ep.continuity_radius = c.number("continuity_radius", ep.continuity_radius);
  ep.exclusion_radius = c.number("exclusion_radius", ep.exclusion_radius);
  ep.bump_radius = c.number("bump_radius", ep.bump_radius);
  ep.bump_h = c.number("bump_h", ep.bump_h);
  ep.worst_case_bump = c.boolean("worst_case_bump", ep.worst_case_bump);
  ep.K.scale = K_scale;
  return ep;
}

int cmd_homogenize(Run& run) {
  const ConfigReader c(run.config);
  const OscillatingProblem p = parse_problem(c);
  const double K_scale = c.number("K_scale", 2.0 / 3.0);
  const ConfigReader sc = c.at("sampling");
  const GbarSamplingParams sp = parse_sampling(sc, run.threads);
  const EnvelopeParams ep = parse_envelope(c.at("envelope"), K_scale);
  const ConfigReader wc = c.at("sandwich");
  SandwichParams sw;
  sw.eps_list = wc.numbers("eps_list");
  sw.h_factor = wc.number("h_factor", sw.h_factor);
  sw.envelope_h = wc.number("envelope_h", sw.envelope_h);
  sw.tol = wc.number("tol", sw.tol);
  sw.reference = wc.number("reference", sw.reference);
  sw.probes = parse_points(wc, "probes");
  sw.K.scale = K_scale;
  sw.threads = run.threads;

  const BoundaryEnvelope sampled = sample_gbar_on_boundary(p, parse_arclengths(sc, p.domain), sp);
  write_excluded_csv(run, sampled);
  json verdict;
  BoundaryEnvelope env;
  try {
    env = build_envelopes(p, sampled, ep);
  } catch (const DeltaContinuityError& e) {
    // The data, not the numerics, rule out a sandwich at this delta.
    {
      auto os = run.open("boundary.csv");
      write_samples_csv(os, sampled);
    }
    verdict = {{"converged", false},
               {"reason", e.what()},
               {"delta_continuity_pair", {e.first(), e.second()}}};
    run.write_json("verdict.json", verdict);
    run.summary = verdict;
    return kVerdictFalse;
  }
  {
    auto os = run.open("boundary.csv");
    write_samples_csv(os, env);
  }
  {
    auto os = run.open("envelope.csv");
    write_envelope_csv(os, env, c.integer("envelope_points", 1024));
  }
  const SandwichVerdict v = effective_sandwich(p, env, sw);
  {
    auto os = run.open("convergence.csv");
    write_convergence_csv(os, v);
  }
  verdict = to_json(v);
  verdict["bumps"] = env.layers.front().bumps.size();
  verdict["bump_radius"] = env.layers.front().bump_radius;
  verdict["sup_K_bump"] = env.sup_K_bump;
  verdict["max_gap_outside"] = env.max_gap_outside;
  verdict["ordering_violation"] = env.ordering_violation;
  bool monotone = true;
  std::vector<SandwichRow> rows = v.rows;
  std::sort(rows.begin(), rows.end(), [](const SandwichRow& a, const SandwichRow& b) { return a.epsilon > b.epsilon; });
  for (std::size_t k = 1; k < rows.size(); ++k) monotone = monotone && rows[k].sup_K_u <= rows[k - 1].sup_K_u;
  verdict["sup_K_u_monotone"] = monotone;

  if (c.has("rate")) {
    const ConfigReader rc = c.at("rate");
    const std::vector<double> deltas = rc.numbers("deltas");
    const double h = rc.number("h", sw.envelope_h);
    std::vector<double> gaps;
    auto os = run.open("rate.csv");
    CsvWriter w(os, {"delta", "gap_K", "bumps", "sup_K_bump"});
    for (double d : deltas) {
      EnvelopeParams e2 = ep;
      e2.delta = d;
      const BoundaryEnvelope b = build_envelopes(p, sampled, e2);
      gaps.push_back(envelope_gap_on_K(p, b, h, e2.K));
      w.cell(d).cell(gaps.back()).cell(static_cast<long long>(b.layers.front().bumps.size())).cell(b.sup_K_bump);
      w.end_row();
    }
    verdict["rate"] = to_json(fit_inverse_rate(deltas, gaps));
  }
  run.write_json("verdict.json", verdict);
  run.summary = {{"converged", v.converged}, {"reason", v.reason}};
  return v.converged ? kOk : kVerdictFalse;
}

json error_payload(const std::exception& e) {
  json j = {{"error", e.what()}};
  if (const auto* ce = dynamic_cast<const ConfigError*>(&e)) j["field"] = ce->field();
  if (const auto* ce = dynamic_cast<const CertificateError*>(&e)) {
    j["type"] = "CertificateError";
    j["node"] = ce->node();
    j["coefficient"] = ce->coefficient();
  } else if (const auto* ve = dynamic_cast<const ConvergenceError*>(&e)) {
    j["type"] = "ConvergenceError";
    j["residual_history"] = ve->residual_history();
  } else if (const auto* de = dynamic_cast<const DeltaContinuityError*>(&e)) {
    j["type"] = "DeltaContinuityError";
    j["pair"] = {de->first(), de->second()};
  } else if (dynamic_cast<const StabilityError*>(&e)) {
    j["type"] = "StabilityError";
  } else if (dynamic_cast<const DegenerateBarrier*>(&e)) {
    j["type"] = "DegenerateBarrier";
  } else if (dynamic_cast<const NoNearIntegerPoint*>(&e)) {
    j["type"] = "NoNearIntegerPoint";
  } else if (dynamic_cast<const DomainError*>(&e)) {
    j["type"] = "DomainError";
  }
  return j;
}

}  // namespace

int main(int argc, char** argv) {
  const std::map<std::string, std::pair<std::string, std::function<int(Run&)>>> commands = {
      {"solve", {"one Dirichlet solve", cmd_solve}},
      {"corrector", {"half-space corrector strip solve and profile", cmd_corrector}},
      {"gbar", {"estimate gbar at boundary points", cmd_gbar}},
      {"equidist", {"lattice equidistribution counts", cmd_equidist}},
      {"audit", {"irrational direction dense condition audit", cmd_audit}},
      {"barriers", {"barrier verification suite", cmd_barriers}},
      {"homogenize", {"full envelope sandwich pipeline", cmd_homogenize}},
      {"validate", {"operator structure checks", cmd_validate}},
  };

  CLI::App app{"Homogenization of oscillating Dirichlet data: batch experiment driver"};
  app.set_version_flag("--version", BHOM_VERSION);
  app.require_subcommand(1);
  std::string config_path, output_dir;
  int threads = -1;
  for (const auto& [name, entry] : commands) {
    CLI::App* sub = app.add_subcommand(name, entry.first);
    sub->add_option("-c,--config", config_path, "JSON config file")->required();
    sub->add_option("-o,--output-dir", output_dir, "output directory (overrides BHOM_OUTPUT_DIR and the config)");
    sub->add_option("-j,--threads", threads, "worker threads, 0 for all cores (overrides the config)");
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kConfigError;
  }
  const std::string command = app.get_subcommands().front()->get_name();

  Run run;
  const auto t0 = std::chrono::steady_clock::now();
  int code = kOk;
  json error;
  try {
    run.config = load_config(config_path);
    const ConfigReader c(run.config);
    if (!run.config.is_object()) throw ConfigError("config must be a JSON object", "");
    std::string dir = c.string("output_dir", "out/" + command);
    if (const char* env = std::getenv("BHOM_OUTPUT_DIR"); env && *env) dir = env;
    if (!output_dir.empty()) dir = output_dir;
    run.out = dir;
    std::error_code ec;
    fs::create_directories(run.out, ec);
    if (ec) throw ConfigError("cannot create output directory " + dir + ": " + ec.message(), "output_dir");
    run.threads = threads >= 0 ? threads : c.integer("threads", 0);
    code = commands.at(command).second(run);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    error = error_payload(e);
    code = kConfigError;
  } catch (const Error& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    error = error_payload(e);
    code = kNumericalError;
  } catch (const std::exception& e) {
    std::cerr << "failure: " << e.what() << '\n';
    error = error_payload(e);
    code = kNumericalError;
  }
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  if (!run.out.empty() && fs::is_directory(run.out)) {
    if (!error.is_null()) {
      std::ofstream(run.out / "error.json") << error.dump(2) << '\n';
      run.outputs.push_back("error.json");
    }
    json manifest = {{"command", command},
                     {"config_path", fs::absolute(config_path).string()},
                     {"config", run.config},
                     {"threads", resolve_threads(run.threads)},
                     {"exit_code", code},
                     {"outputs", run.outputs},
                     {"summary", run.summary},
                     {"wall_time_s", wall},
                     {"versions",
                      {{"bhom", BHOM_VERSION},
                       {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                                     std::to_string(EIGEN_MINOR_VERSION)},
                       {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                                             std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                                             std::to_string(NLOHMANN_JSON_VERSION_PATCH)},
                       {"cli11", CLI11_VERSION}}}};
    std::ofstream(run.out / "manifest.json") << manifest.dump(2) << '\n';
  }
  if (code == kOk || code == kVerdictFalse)
    std::cout << command << ": " << (code == kOk ? "ok" : "verdict false") << " -> " << run.out.string() << '\n';
  return code;
}
