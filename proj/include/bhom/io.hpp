#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "bhom/barriers.hpp"
#include "bhom/corrector.hpp"
#include "bhom/effective.hpp"
#include "bhom/fdsolver.hpp"
#include "bhom/geometry.hpp"
#include "bhom/operators.hpp"

namespace bhom {

using json = nlohmann::json;

/// Typed access to a JSON config object. Every failure raises ConfigError
/// naming the dotted field path.
class ConfigReader {
 public:
  ConfigReader(const json& j, std::string path = "") : j_(j), path_(std::move(path)) {}

  bool has(const std::string& key) const { return j_.is_object() && j_.contains(key); }
  ConfigReader at(const std::string& key) const;
  std::string field(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }
  const json& raw() const { return j_; }
  const std::string& path() const { return path_; }

  double number(const std::string& key) const;
  double number(const std::string& key, double fallback) const;
  int integer(const std::string& key) const;
  int integer(const std::string& key, int fallback) const;
  bool boolean(const std::string& key, bool fallback) const;
  std::string string(const std::string& key) const;
  std::string string(const std::string& key, const std::string& fallback) const;
  std::vector<double> numbers(const std::string& key) const;
  std::vector<double> numbers(const std::string& key, std::vector<double> fallback) const;
  Expr expr(const std::string& key) const;
  Expr expr(const std::string& key, const std::string& fallback) const;

  [[noreturn]] void fail(const std::string& key, const std::string& what) const;

 private:
  const json& j_;
  std::string path_;
};

/// Parses a config file; syntax errors carry line and column.
json load_config(const std::string& path);
json parse_config(const std::string& text, const std::string& origin = "<string>");

Domain parse_domain(const ConfigReader& c);
EllipticOperator parse_operator(const ConfigReader& c);
SourceAndBoundaryData parse_data(const ConfigReader& c);
StripParams parse_strip(const ConfigReader& c);
Direction parse_direction(const ConfigReader& c, const std::string& key);

json to_json(const Direction& d);
json to_json(const ConvergenceRecord& r);
json to_json(const RayLimit& r);
json to_json(const GbarRecord& r);
json to_json(const GbarEstimate& e);
json to_json(const SupersolutionReport& r);
json to_json(const ValidationReport& r);
json to_json(const IddcAudit& a);
json to_json(const EquidistRecord& r);
json to_json(const NearIntegerResult& r);
json to_json(const SandwichVerdict& v);
json to_json(const OscillationProfile& p);
json to_json(const InverseRateFit& f);

/// Shortest round-trip decimal form; CSV cells use it so reruns are byte-identical.
std::string format_number(double v);

/// Minimal CSV writer: a header row, then rows of cells.
class CsvWriter {
 public:
  CsvWriter(std::ostream& os, const std::vector<std::string>& header);
  CsvWriter& cell(double v);
  CsvWriter& cell(long long v);
  CsvWriter& cell(int v) { return cell(static_cast<long long>(v)); }
  CsvWriter& cell(bool v) { return cell(static_cast<long long>(v)); }
  CsvWriter& cell(const std::string& v);
  void end_row();

 private:
  void sep();
  std::ostream& os_;
  std::size_t columns_;
  std::size_t in_row_ = 0;
};

void write_profile_csv(std::ostream& os, const OscillationProfile& p);
void write_residual_csv(std::ostream& os, const ConvergenceRecord& r);
void write_envelope_csv(std::ostream& os, const BoundaryEnvelope& env, int points);
void write_samples_csv(std::ostream& os, const BoundaryEnvelope& env);
void write_convergence_csv(std::ostream& os, const SandwichVerdict& v);

}  // namespace bhom
