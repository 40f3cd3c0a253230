#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace falconer {

struct Verdict {
  std::string name;
  bool pass = false;
  double value = 0.0;
  double tolerance = 0.0;
  std::string detail;
};

/// Record of one experiment run. Raw tables depend only on (config, seed);
/// timing lives in separate fields so tables stay byte-identical across runs.
struct ExperimentReport {
  std::string name;
  std::map<std::string, std::string> config;
  std::uint64_t seed = 0;
  std::string started;  ///< UTC, ISO 8601
  double duration_s = 0.0;

  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;
  /// `param,value` table used when `columns` is empty.
  std::vector<std::pair<std::string, double>> params;
  std::map<std::string, double> fits;
  std::vector<Verdict> verdicts;
  std::vector<std::string> notes;

  bool pass() const;
  void add_verdict(std::string verdict_name, bool ok, double value, double tolerance,
                   std::string detail = {});

  /// `# key value` provenance comments, then the table (or `param,value`
  /// rows) at 17 digits.
  std::string csv() const;
  /// Full report; the table is included unless `with_table` is false.
  std::string json(bool with_table = true) const;
  /// Provenance comment lines only.
  std::string provenance() const;
};

/// Build revision recorded at configure time ("unknown" outside a checkout).
const char* build_revision();

/// Current UTC time as ISO 8601.
std::string utc_timestamp();

/// Writes `path.tmp` then renames onto `path`.
void write_text_atomic(const std::string& path, const std::string& text);

/// Decimal with 17 significant digits.
std::string format_real(double v);

}  // namespace falconer
