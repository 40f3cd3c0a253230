#include "falconer/report.hpp"

#include <json.hpp>

#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <system_error>

#ifndef FALCONER_REVISION
#define FALCONER_REVISION "unknown"
#endif

namespace falconer {

bool ExperimentReport::pass() const {
  for (const auto& v : verdicts)
    if (!v.pass) return false;
  return true;
}

void ExperimentReport::add_verdict(std::string verdict_name, bool ok, double value,
                                   double tolerance, std::string detail) {
  verdicts.push_back({std::move(verdict_name), ok, value, tolerance, std::move(detail)});
}

std::string format_real(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string ExperimentReport::provenance() const {
  std::ostringstream out;
  out << "# experiment " << name << '\n';
  out << "# revision " << build_revision() << '\n';
  out << "# seed " << seed << '\n';
  for (const auto& [k, v] : config) out << "# config " << k << '=' << v << '\n';
  return out.str();
}

std::string ExperimentReport::csv() const {
  std::ostringstream out;
  out << provenance();
  if (columns.empty() && !params.empty()) {
    out << "param,value\n";
    for (const auto& [k, v] : params) out << k << ',' << format_real(v) << '\n';
    return out.str();
  }
  for (std::size_t c = 0; c < columns.size(); ++c) out << (c ? "," : "") << columns[c];
  out << '\n';
  for (const auto& row : rows) {
    for (std::size_t c = 0; c < row.size(); ++c) out << (c ? "," : "") << format_real(row[c]);
    out << '\n';
  }
  return out.str();
}

std::string ExperimentReport::json(bool with_table) const {
  nlohmann::ordered_json j;
  j["experiment"] = name;
  j["revision"] = build_revision();
  j["seed"] = seed;
  j["started"] = started;
  j["duration_s"] = duration_s;
  j["config"] = config;
  if (with_table) {
    j["columns"] = columns;
    j["rows"] = rows;
    auto& pv = j["params"] = nlohmann::ordered_json::object();
    for (const auto& [k, val] : params) pv[k] = val;
  }
  j["fits"] = fits;
  auto& v = j["verdicts"] = nlohmann::ordered_json::array();
  for (const auto& verdict : verdicts)
    v.push_back({{"name", verdict.name},
                 {"pass", verdict.pass},
                 {"value", verdict.value},
                 {"tolerance", verdict.tolerance},
                 {"detail", verdict.detail}});
  j["notes"] = notes;
  j["pass"] = pass();
  return j.dump(2) + "\n";
}

const char* build_revision() { return FALCONER_REVISION; }

std::string utc_timestamp() {
  std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void write_text_atomic(const std::string& path, const std::string& text) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + tmp + " for writing");
    out << text;
    out.flush();
    if (!out) throw std::runtime_error("write to " + tmp + " failed");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw std::runtime_error("cannot rename " + tmp + " onto " + path);
  }
}

}  // namespace falconer
