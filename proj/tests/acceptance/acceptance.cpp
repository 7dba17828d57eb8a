// End-to-end acceptance run. Prints one PASS/FAIL line per criterion and
// exits nonzero when any criterion fails.
//
// usage: bhom_acceptance <bhom cli> <configs dir> <work dir>

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "bhom/barriers.hpp"
#include "bhom/effective.hpp"
#include "bhom/fdsolver.hpp"
#include "bhom/operators.hpp"

using namespace bhom;
using json = nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Env {
  std::string cli;
  fs::path configs;
  fs::path work;
};

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

// Runs one CLI subcommand; returns its exit status.
int run_cli(const Env& env, const std::string& cmd, const std::string& config, const fs::path& out, int threads = 1) {
  fs::remove_all(out);
  const std::string line = "\"" + env.cli + "\" " + cmd + " -c \"" + (env.configs / config).string() + "\" -o \"" +
                           out.string() + "\" -j " + std::to_string(threads) + " > \"" + out.string() + ".log\" 2>&1";
  const int status = std::system(line.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

json read_json(const fs::path& p) {
  std::ifstream is(p);
  if (!is) throw std::runtime_error("missing " + p.string());
  return json::parse(is);
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

// Corrector records sorted by epsilon, looked up by value.
const json* record_for(const json& est, double eps) {
  for (const auto& r : est["records"])
    if (std::abs(r["epsilon"].get<double>() - eps) < 1e-12) return &r;
  return nullptr;
}

Outcome criterion1(const Env& env) {
  const fs::path out = env.work / "c1";
  const int code = run_cli(env, "corrector", "corrector_rational.json", out);
  if (code != 0) return {false, "corrector exited " + std::to_string(code)};
  const json est = read_json(out / "corrector.json")["estimate"];
  bool ok = true;
  std::string d;
  const std::pair<double, double> expect[] = {{1.0 / 4, 1.0}, {1.0 / 6, 1.0}, {1.0 / 3, -1.0}, {1.0 / 5, -1.0}};
  for (const auto& [eps, target] : expect) {
    const json* r = record_for(est, eps);
    if (!r) return {false, "no record for eps " + fmt(eps)};
    const double a = (*r)["alpha"].get<double>();
    ok = ok && std::abs(a - target) <= 0.02;
    d += "alpha(" + fmt(eps) + ")=" + fmt(a) + " ";
  }
  const bool equal = est["equal"].get<bool>();
  d += "equal=" + std::string(equal ? "true" : "false");
  return {ok && !equal, d};
}

Outcome criterion2(const Env& env) {
  const fs::path out = env.work / "c2";
  const int code = run_cli(env, "corrector", "corrector_linear.json", out);
  if (code != 0) return {false, "corrector exited " + std::to_string(code)};
  const json est = read_json(out / "corrector.json")["estimate"];
  const auto& recs = est["records"];
  if (recs.size() < 2) return {false, "fewer than two epsilons"};
  bool ok = true;
  std::string d;
  for (const auto& r : recs) {
    const double a = r["alpha"].get<double>();
    ok = ok && std::abs(a - 0.25) <= 0.05;
    d += "alpha(" + fmt(r["epsilon"].get<double>()) + ")=" + fmt(a) + "+-" + fmt(r["err"].get<double>()) + " ";
  }
  const double a0 = recs[0]["alpha"].get<double>(), a1 = recs[1]["alpha"].get<double>();
  const double e0 = recs[0]["err"].get<double>(), e1 = recs[1]["err"].get<double>();
  const bool agree = std::abs(a0 - a1) <= e0 + e1;
  const bool distinct = recs[0]["epsilon"].get<double>() != recs[1]["epsilon"].get<double>();
  d += "|diff|=" + fmt(std::abs(a0 - a1));
  return {ok && agree && distinct, d};
}

// Reads the profiles written by criterion 2's run.
Outcome criterion3(const Env& env) {
  const fs::path file = env.work / "c2" / "corrector.json";
  if (!fs::exists(file)) return {false, "criterion 2 output missing"};
  const json solves = read_json(file)["solves"];
  bool ok = !solves.empty();
  std::string d;
  for (const auto& s : solves) {
    const double T = s["profile"]["heights"].back().get<double>();
    const auto W = s["profile"]["W"].get<std::vector<double>>();
    if (W.size() != 8 || std::abs(T - 4.0) > 1e-12) return {false, "expected 8 readout heights up to T = 4"};
    bool mono = true;
    for (std::size_t k = 1; k < W.size(); ++k) mono = mono && W[k] <= W[k - 1] + 1e-7;
    const bool decay = W[5] <= W[0] / 4;  // heights T k / 8: index 5 is 3T/4, index 0 is T/8
    ok = ok && mono && decay;
    d += "eps " + fmt(s["epsilon"].get<double>()) + ": W(T/8)=" + fmt(W[0]) + " W(3T/4)=" + fmt(W[5]) +
         (mono ? " monotone; " : " NOT monotone; ");
  }
  return {ok, d};
}

Outcome criterion4(const Env& env) {
  const fs::path golden = env.work / "c4_golden", rational = env.work / "c4_rational";
  if (run_cli(env, "equidist", "equidist_golden.json", golden) != 0) return {false, "golden run failed"};
  if (run_cli(env, "equidist", "equidist_rational.json", rational) != 0) return {false, "rational run failed"};
  const json gt = read_json(golden / "equidist.json"), rt = read_json(rational / "equidist.json");
  double golden_ratio = NAN;
  for (const auto& r : gt["table"])
    if (r["R"].get<long long>() == 1000) golden_ratio = r["ratio"].get<double>();
  bool rational_zero = true;
  std::string d = "golden A/N(R=1000)=" + fmt(golden_ratio) + "; rational A:";
  for (const auto& r : rt["table"]) {
    rational_zero = rational_zero && r["A"].get<long long>() == 0 && r["ratio"].get<double>() == 0.0;
    d += " " + std::to_string(r["A"].get<long long>()) + "/" + std::to_string(r["N"].get<long long>());
  }
  return {std::abs(golden_ratio - 0.1) <= 0.02 && rational_zero, d};
}

// Independent recomputation: max |M+(D^2 b)| from the closed-form radial and
// quadratic Hessian eigenvalues, plus the CLI report.
Outcome criterion5(const Env& env) {
  const fs::path out = env.work / "c5";
  const int code = run_cli(env, "barriers", "barriers_n3.json", out);
  const int n = 3;
  const double lam = 1.0, Lam = 1.5;
  const double alpha = (n - 1) * lam / Lam - 1, c = (n - 1) * Lam / lam;
  auto mplus = [&](const std::vector<double>& eig) {
    double s = 0;
    for (double e : eig) s += e > 0 ? Lam * e : lam * e;
    return s;
  };
  // |x|^-a: radial eigenvalue a(a+1) r^(-a-2), tangential -a r^(-a-2) (n-1 times).
  auto radial = [&](double a, double r) {
    const double k = std::pow(r, -a - 2);
    std::vector<double> e(n, -a * k);
    e[0] = a * (a + 1) * k;
    return mplus(e);
  };
  double worst_radial = 0.0, perturbed_min = INFINITY;
  for (int i = 0; i <= 1000; ++i) {
    const double r = 0.1 + 0.9 * i / 1000.0;
    worst_radial = std::max(worst_radial, std::abs(radial(alpha, r)));
    perturbed_min = std::min(perturbed_min, radial(alpha + 0.01, r));
  }
  // amplitude * (|x'/s|^2 + c (1 - (x_n/s - 1)^2)): Hessian diag(2, ..., 2, -2c) / s^2.
  std::vector<double> quad(n, 2.0);
  quad[n - 1] = -2.0 * c;
  const double worst_quad = std::abs(mplus(quad));

  const json j = read_json(out / "barriers.json");
  const auto& ch = j["checks"];
  const double cli_radial = ch["radial_interior"]["max_operator_value"].get<double>();
  const double cli_quad = ch["quad_strip"]["max_operator_value"].get<double>();
  const bool cli_perturbed_breaks = !ch["radial_interior_perturbed"]["holds"].get<bool>();
  const bool ok = code == 0 && worst_radial <= 1e-9 && worst_quad <= 1e-9 && std::abs(cli_radial) <= 1e-9 &&
                  std::abs(cli_quad) <= 1e-9 && perturbed_min > 0 && cli_perturbed_breaks;
  return {ok, "|M+| radial=" + fmt(worst_radial) + " quad=" + fmt(worst_quad) + " cli=" + fmt(cli_radial) + "," +
                  fmt(cli_quad) + "; alpha+0.01 gives M+ >= " + fmt(perturbed_min)};
}

// Solved M+ bump in the unit ball of R^3 (axisymmetric), data 1 on B_r(z) with
// z the north pole, K the ball of radius 1/2 about the origin.
double bump_sup_K(double r_m, double h) {
  AxisymmetricGeometry geo;
  geo.phi = [](const Point& x) { return std::hypot(x[0], x[1]) - 1.0; };
  geo.project = [](const Point& x) {
    const double r = std::hypot(x[0], x[1]);
    return r > 0 ? Point{x[0] / r, x[1] / r} : Point{0.0, 1.0};
  };
  const PointFunction bump = [=](const Point& x) { return std::hypot(x[0], x[1] - 1.0) <= r_m ? 1.0 : 0.0; };
  const PointFunction f = [](const Point&) { return 0.0; };
  const auto p = discretize_axisymmetric(EllipticOperator::pucci(+1, 3, 1.0, 1.5), 3, geo, h, 2, bump, f);
  const GridField u = solve_dirichlet(p).field;
  double sup = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    if (u.mask[i] != NodeType::Interior) continue;
    const Point x = u.coord(i);
    if (std::hypot(x[0], x[1]) <= 0.5) sup = std::max(sup, u.values[i]);
  }
  return sup;
}

Outcome criterion6(const Env&) {
  const double h = 0.0025, r_m = 0.01;
  const double s1 = bump_sup_K(r_m, h), s2 = bump_sup_K(r_m / 2, h);
  const double bound = std::cbrt(0.02) + 2 * h, need = std::cbrt(2.0) * 0.9;
  const double ratio = s1 / s2;
  return {s1 <= bound && ratio >= need,
          "sup_K=" + fmt(s1) + " bound=" + fmt(bound) + " halved=" + fmt(s2) + " ratio=" + fmt(ratio) + " need=" + fmt(need)};
}

Outcome criterion7(const Env&) {
  std::vector<BoundaryLayerReport> reps;
  std::string d;
  const double x0[] = {std::cos(0.3), std::sin(0.3)};
  for (double eps : {1.0 / 16, 1.0 / 32}) {
    OscillatingProblem p{Domain::disk({0.0, 0.0}, 1.0), eps, EllipticOperator::laplacian(2),
                         {Expr::parse("0"), Expr::parse("cos(2*pi*y1)*cos(2*pi*y2)"), {}}};
    const OscillatingSolution u = solve_oscillating(p, eps / 16);
    BoundaryLayerParams bl;
    bl.p = 0.6;
    bl.q = 0.85;
    bl.strip.T = 4;
    bl.strip.L = 32;
    bl.strip.h = 1.0 / 32;
    bl.strip.threads = 1;
    reps.push_back(boundary_layer_compare(p, u.field, x0, bl));
    d += "C(" + fmt(eps) + ")=" + fmt(reps.back().constant) + " ";
  }
  const double spread = constant_spread(reps);
  return {spread <= 2.0, d + "spread=" + fmt(spread)};
}

Outcome criterion8(const Env& env) {
  const fs::path out = env.work / "c8";
  const int code = run_cli(env, "homogenize", "homogenize_disk.json", out);
  if (!fs::exists(out / "verdict.json")) return {false, "homogenize exited " + std::to_string(code) + " without a verdict"};
  const json v = read_json(out / "verdict.json");
  if (!v.contains("rows")) return {false, "no sandwich rows: " + v.value("reason", std::string())};
  std::vector<std::pair<double, double>> sup;  // (eps, sup_K |u_eps - <g>|)
  bool sandwiched = true;
  for (const auto& r : v["rows"]) {
    sandwiched = sandwiched && r["sandwiched"].get<bool>();
    sup.emplace_back(r["epsilon"].get<double>(), r["sup_K_u"].get<double>());
  }
  std::sort(sup.begin(), sup.end(), [](auto& a, auto& b) { return a.first > b.first; });
  bool monotone = true;
  for (std::size_t k = 1; k < sup.size(); ++k) monotone = monotone && sup[k].second < sup[k - 1].second;
  const bool small = !sup.empty() && std::abs(sup.back().first - 1.0 / 40) < 1e-12 && sup.back().second <= 0.1;
  const bool rate = v.contains("rate") && v["rate"]["stable"].get<bool>();
  std::string d = "sandwiched=" + std::string(sandwiched ? "yes" : "no") + " sup_K|u|:";
  for (const auto& [e, s] : sup) d += " " + fmt(s) + "@" + fmt(e);
  d += monotone ? " (decreasing)" : " (not decreasing)";
  if (rate) d += " C=" + fmt(v["rate"]["C"].get<double>()) + " spread=" + fmt(v["rate"]["spread"].get<double>());
  else d += " rate fit unstable";
  return {sandwiched && monotone && small && rate, d};
}

Outcome criterion9(const Env& env) {
  const fs::path out = env.work / "c9";
  const int code = run_cli(env, "homogenize", "homogenize_half_disk.json", out);
  const json v = read_json(out / "verdict.json");
  if (!v.contains("rows")) return {false, "no sandwich rows: " + v.value("reason", std::string())};
  bool ok = code == 4;
  std::string d = "exit=" + std::to_string(code);
  for (const auto& r : v["rows"]) {
    const double eps = r["epsilon"].get<double>(), u = r["probe_values"][0].get<double>();
    const bool high = std::abs(eps - 0.25) < 1e-12 || std::abs(eps - 1.0 / 6) < 1e-12;
    ok = ok && (high ? u >= 0.6 : u <= 0.4);
    d += " u(" + fmt(eps) + ")=" + fmt(u);
  }
  return {ok && v["rows"].size() == 4, d};
}

// Radial M+ profile: u'' from u' with the coefficient picked by sign, RK4.
double radial_ode(double r0, double u0, double slope, double r_eval, double lam, double Lam, int n) {
  auto rhs = [&](double r, double v) {
    const double t = (n - 1) * v / r;
    const double tang = t > 0 ? Lam * t : lam * t;
    const double up = -tang / Lam, un = -tang / lam;
    return up > 0 ? up : un;
  };
  const int steps = 4000;
  const double dr = (r_eval - r0) / steps;
  double r = r0, u = u0, v = slope;
  for (int s = 0; s < steps; ++s) {
    const double k1u = v, k1v = rhs(r, v);
    const double k2u = v + 0.5 * dr * k1v, k2v = rhs(r + 0.5 * dr, v + 0.5 * dr * k1v);
    const double k3u = v + 0.5 * dr * k2v, k3v = rhs(r + 0.5 * dr, v + 0.5 * dr * k2v);
    const double k4u = v + dr * k3v, k4v = rhs(r + dr, v + dr * k3v);
    u += dr / 6 * (k1u + 2 * k2u + 2 * k3u + k4u);
    v += dr / 6 * (k1v + 2 * k2v + 2 * k3v + k4v);
    r += dr;
  }
  return u;
}

Outcome criterion10(const Env&) {
  const FastVariable id = FastVariable::scaled(2, 1.0);
  std::mt19937_64 rng(20261016);
  std::uniform_real_distribution<double> uni(-1.0, 1.0), pos(0.05, 1.0);
  const Domain disk = Domain::disk({0.0, 0.0}, 1.0);
  int violations = 0, invalid = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const double lam = 1.0, Lam = 1.0 + 2.0 * pos(rng);
    const auto op = EllipticOperator::pucci(trial % 2 ? +1 : -1, 2, lam, Lam);
    const double a = uni(rng), b = 3 * uni(rng), c = 3 * uni(rng), dd = uni(rng);
    const PointFunction g = [=](const Point& x) { return a * std::sin(b * x[0] + 1) + dd * std::cos(c * x[1]); };
    const double lift = 0.5 * pos(rng), fs_ = pos(rng), fv = pos(rng);
    // Super: higher data and a negative source; sub: lower data and a positive source.
    const PointFunction gu = [=](const Point& x) { return g(x) + lift; };
    const PointFunction fu = [=](const Point&) { return -fs_; };
    const PointFunction fvv = [=](const Point&) { return fv; };
    const PointFunction zero = [](const Point&) { return 0.0; };
    const auto pu = discretize(op, disk, 1.0 / 12, 2, id, gu, fu);
    const auto pv = discretize(op, disk, 1.0 / 12, 2, id, g, fvv);
    const auto p0 = discretize(op, disk, 1.0 / 12, 2, id, g, zero);
    const GridField u = solve_dirichlet(pu).field, v = solve_dirichlet(pv).field;
    const ComparisonReport rep = comparison_check(p0, u, v, 1e-9);
    if (!rep.premises_hold) ++invalid;
    if (!rep.consistent()) ++violations;
  }

  const PointFunction quad = [](const Point& x) {
    return x[0] * x[0] - x[1] * x[1] + 0.5 * x[0] * x[1] + x[0] - 2 * x[1] + 1;
  };
  const PointFunction zero = [](const Point&) { return 0.0; };
  const auto pq = discretize_box(EllipticOperator::laplacian(2), {0, 0}, {1, 1}, 1.0 / 64, 1, id, quad, zero);
  const GridField uq = solve_dirichlet(pq).field;
  double quad_err = 0.0;
  for (std::size_t i = 0; i < uq.size(); ++i)
    if (uq.mask[i] != NodeType::Exterior) quad_err = std::max(quad_err, std::abs(uq.values[i] - quad(uq.coord(i))));

  // Annulus 1/2 < |x| < 1 in R^3, boundary data of the exact radial solution.
  const double lam = 1.0, Lam = 1.5, h = 1.0 / 32, alpha = 2 * lam / Lam - 1;
  AxisymmetricGeometry geo;
  geo.phi = [](const Point& x) { const double r = std::hypot(x[0], x[1]); return std::max(r - 1.0, 0.5 - r); };
  geo.project = [](const Point& x) {
    const double r = std::hypot(x[0], x[1]), target = r > 0.75 ? 1.0 : 0.5;
    return Point{x[0] * target / r, x[1] * target / r};
  };
  const PointFunction gr = [&](const Point& x) { return std::pow(std::hypot(x[0], x[1]), -alpha); };
  const auto pr = discretize_axisymmetric(EllipticOperator::pucci(+1, 3, lam, Lam), 3, geo, h, 2, gr, zero);
  const GridField ur = solve_dirichlet(pr).field;
  const double u0 = std::pow(0.5, -alpha);
  double lo = -10.0, hi = 0.0;
  for (int it = 0; it < 100; ++it) {
    const double s = 0.5 * (lo + hi);
    (radial_ode(0.5, u0, s, 1.0, lam, Lam, 3) > 1.0 ? hi : lo) = s;
  }
  const double slope = 0.5 * (lo + hi);
  double radial_err = 0.0;
  for (std::size_t i = 0; i < ur.size(); ++i) {
    if (ur.mask[i] != NodeType::Interior) continue;
    const Point x = ur.coord(i);
    radial_err = std::max(radial_err, std::abs(ur.values[i] - radial_ode(0.5, u0, slope, std::hypot(x[0], x[1]), lam, Lam, 3)));
  }
  const bool ok = violations == 0 && invalid == 0 && quad_err <= 1e-10 && radial_err <= 2 * h;
  return {ok, "violations=" + std::to_string(violations) + " invalid pairs=" + std::to_string(invalid) +
                  " quadratic err=" + fmt(quad_err) + " radial err=" + fmt(radial_err) + " (2h=" + fmt(2 * h) + ")"};
}

// Reruns every CLI config of criteria 1-9 and compares the CSV files byte for byte.
Outcome criterion11(const Env& env) {
  const std::vector<std::tuple<std::string, std::string, std::string>> runs = {
      {"c1", "corrector", "corrector_rational.json"},      {"c2", "corrector", "corrector_linear.json"},
      {"c4_golden", "equidist", "equidist_golden.json"},   {"c4_rational", "equidist", "equidist_rational.json"},
      {"c5", "barriers", "barriers_n3.json"},              {"c8", "homogenize", "homogenize_disk.json"},
      {"c9", "homogenize", "homogenize_half_disk.json"}};
  int files = 0;
  std::string mismatches;
  for (const auto& [dir, cmd, config] : runs) {
    const fs::path first = env.work / dir, second = env.work / (dir + "_rerun");
    if (!fs::exists(first)) return {false, dir + " has no first run"};
    run_cli(env, cmd, config, second, 2);
    std::vector<std::string> names;
    for (const auto& e : fs::directory_iterator(first))
      if (e.path().extension() == ".csv") names.push_back(e.path().filename().string());
    std::sort(names.begin(), names.end());
    for (const auto& name : names) {
      ++files;
      if (!fs::exists(second / name) || slurp(first / name) != slurp(second / name)) mismatches += " " + dir + "/" + name;
    }
  }
  if (files == 0) return {false, "no CSV output to compare"};
  return {mismatches.empty(), std::to_string(files) + " CSV files compared (rerun with 2 threads)" +
                                  (mismatches.empty() ? std::string() : "; differ:" + mismatches)};
}

}  // namespace

int main(int argc, char** argv) {
  if (argc != 4) {
    std::fprintf(stderr, "usage: %s <bhom cli> <configs dir> <work dir>\n", argv[0]);
    return 2;
  }
  const Env env{argv[1], argv[2], argv[3]};
  fs::create_directories(env.work);

  const std::vector<std::function<Outcome(const Env&)>> criteria = {
      criterion1, criterion2, criterion3, criterion4, criterion5, criterion6,
      criterion7, criterion8, criterion9, criterion10, criterion11};
  int failed = 0;
  for (std::size_t k = 0; k < criteria.size(); ++k) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[k](env);
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (!o.pass) ++failed;
    std::printf("criterion %2zu: %s  %s  [%.1fs]\n", k + 1, o.pass ? "PASS" : "FAIL", o.detail.c_str(), secs);
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria failed\n", failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
