#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <sstream>

#include <nlohmann/json.hpp>

#include "lrpr/errors.hpp"
#include "lrpr/harness.hpp"

namespace lrpr {

using nlohmann::json;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

json number(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

double number_from(const json& v) { return v.is_null() ? kNaN : v.get<double>(); }

std::string csv_number(double v) {
  if (!std::isfinite(v)) return "";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

std::string ratio_tag(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

json record_to_json(const TrialRecord& r) {
  json j;
  j["cell"] = r.cell;
  j["m_over_n"] = r.m_over_n;
  j["q"] = r.q;
  j["algorithm"] = r.algorithm;
  j["trial"] = r.trial;
  j["norm_err"] = number(r.norm_err);
  j["se"] = number(r.se);
  j["r_hat"] = r.r_hat;
  j["rank_correct"] = r.rank_correct ? json(*r.rank_correct) : json(nullptr);
  j["seconds"] = number(r.seconds);
  j["failed"] = r.failed;
  j["error"] = r.error;
  json trace = json::array();
  for (const TracePoint& p : r.trace) {
    trace.push_back(json::array({p.iteration, number(p.norm_err), number(p.elapsed_seconds)}));
  }
  j["trace"] = std::move(trace);
  return j;
}

TrialRecord record_from_json(const json& j) {
  TrialRecord r;
  r.cell = j.at("cell").get<std::size_t>();
  r.m_over_n = j.at("m_over_n").get<double>();
  r.q = j.at("q").get<Index>();
  r.algorithm = j.at("algorithm").get<std::string>();
  r.trial = j.at("trial").get<int>();
  r.norm_err = number_from(j.at("norm_err"));
  r.se = number_from(j.at("se"));
  r.r_hat = j.at("r_hat").get<Index>();
  if (!j.at("rank_correct").is_null()) r.rank_correct = j.at("rank_correct").get<bool>();
  r.seconds = number_from(j.at("seconds"));
  r.failed = j.at("failed").get<bool>();
  r.error = j.at("error").get<std::string>();
  for (const json& p : j.at("trace")) {
    r.trace.push_back(TracePoint{p.at(0).get<int>(), number_from(p.at(1)), number_from(p.at(2))});
  }
  return r;
}

json cell_to_json(const CellSummary& c) {
  json j;
  j["m_over_n"] = c.m_over_n;
  j["q"] = c.q;
  j["algorithm"] = c.algorithm;
  j["trials"] = c.trials;
  j["mean_norm_err"] = number(c.mean_norm_err);
  j["mean_se"] = number(c.mean_se);
  j["pr_rank_correct"] = number(c.pr_rank_correct);
  j["mean_seconds"] = number(c.mean_seconds);
  j["fail_count"] = c.fail_count;
  return j;
}

CellSummary cell_from_json(const json& j) {
  CellSummary c;
  c.m_over_n = j.at("m_over_n").get<double>();
  c.q = j.at("q").get<Index>();
  c.algorithm = j.at("algorithm").get<std::string>();
  c.trials = j.at("trials").get<int>();
  c.mean_norm_err = number_from(j.at("mean_norm_err"));
  c.mean_se = number_from(j.at("mean_se"));
  c.pr_rank_correct = number_from(j.at("pr_rank_correct"));
  c.mean_seconds = number_from(j.at("mean_seconds"));
  c.fail_count = j.at("fail_count").get<int>();
  return c;
}

}  // namespace

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
    if (ec) throw IoError("cannot create directory " + path.parent_path().string() + ": " + ec.message());
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << text;
  out.close();
  if (!out) throw IoError("write failed for " + path.string());
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string() + " for reading");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

std::string format_csv(const ExperimentReport& report) {
  if (report.cells.empty()) throw ConfigurationError("format_csv: empty report");
  std::ostringstream out;
  out << "m_over_n,q,algorithm,mean_norm_err,mean_se,pr_rank_correct,mean_seconds,fail_count\n";
  for (const CellSummary& c : report.cells) {
    out << csv_number(c.m_over_n) << ',' << c.q << ',' << c.algorithm << ','
        << csv_number(c.mean_norm_err) << ',' << csv_number(c.mean_se) << ','
        << csv_number(c.pr_rank_correct) << ',' << csv_number(c.mean_seconds) << ','
        << c.fail_count << '\n';
  }
  return out.str();
}

std::string report_to_json(const ExperimentReport& report) {
  json doc;
  doc["config"] = report.config_json.empty() ? json::object() : json::parse(report.config_json);
  json cells = json::array();
  for (const CellSummary& c : report.cells) cells.push_back(cell_to_json(c));
  doc["cells"] = std::move(cells);
  json records = json::array();
  for (const TrialRecord& r : report.records) records.push_back(record_to_json(r));
  doc["records"] = std::move(records);
  return doc.dump(1);
}

ExperimentReport report_from_json(const std::string& text) {
  try {
    const json doc = json::parse(text);
    ExperimentReport report;
    report.config_json = doc.at("config").dump(2);
    for (const json& c : doc.at("cells")) report.cells.push_back(cell_from_json(c));
    for (const json& r : doc.at("records")) report.records.push_back(record_from_json(r));
    return report;
  } catch (const json::exception& e) {
    throw IoError(std::string("malformed report JSON: ") + e.what());
  }
}

ExperimentReport read_report_json(const std::filesystem::path& path) {
  try {
    return report_from_json(read_text(path));
  } catch (const IoError& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

std::filesystem::path emit_table(const ExperimentReport& report, const std::filesystem::path& stem) {
  std::filesystem::path csv = stem;
  csv += ".csv";
  std::filesystem::path js = stem;
  js += ".json";
  write_text(csv, format_csv(report));
  write_text(js, report_to_json(report));
  return csv;
}

void write_trials_jsonl(const std::vector<TrialRecord>& records, const std::filesystem::path& path) {
  std::ostringstream out;
  for (const TrialRecord& r : records) out << record_to_json(r).dump() << '\n';
  write_text(path, out.str());
}

std::vector<TrialRecord> read_trials_jsonl(const std::filesystem::path& path) {
  std::istringstream in(read_text(path));
  std::vector<TrialRecord> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      out.push_back(record_from_json(json::parse(line)));
    } catch (const json::exception& e) {
      throw IoError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

std::string format_curves(const ExperimentReport& report, double m_over_n, Index q) {
  std::ostringstream out;
  out << "algorithm,trial,iteration,elapsed_seconds,norm_err\n";
  for (const TrialRecord& r : report.records) {
    if (std::abs(r.m_over_n - m_over_n) > 1e-12 || r.q != q) continue;
    for (const TracePoint& p : r.trace) {
      out << r.algorithm << ',' << r.trial << ',' << p.iteration << ','
          << csv_number(p.elapsed_seconds) << ',' << csv_number(p.norm_err) << '\n';
    }
  }
  return out.str();
}

std::vector<std::filesystem::path> emit_timing_curves(const ExperimentReport& report,
                                                      const std::filesystem::path& stem) {
  bool any = false;
  for (const TrialRecord& r : report.records) any = any || !r.trace.empty();
  if (!any) throw ConfigurationError("emit_timing_curves: no traces recorded (set record_traces)");
  std::vector<std::filesystem::path> written;
  std::vector<std::pair<double, Index>> seen;
  for (const CellSummary& c : report.cells) {
    const auto key = std::make_pair(c.m_over_n, c.q);
    if (std::find(seen.begin(), seen.end(), key) != seen.end()) continue;
    seen.push_back(key);
    std::filesystem::path path = stem;
    path += "_m" + ratio_tag(c.m_over_n) + "_q" + std::to_string(c.q) + ".csv";
    write_text(path, format_curves(report, c.m_over_n, c.q));
    written.push_back(path);
  }
  return written;
}

std::string format_table(const ExperimentReport& report) {
  std::vector<std::string> algorithms;
  std::vector<std::pair<double, Index>> rows;
  for (const CellSummary& c : report.cells) {
    if (std::find(algorithms.begin(), algorithms.end(), c.algorithm) == algorithms.end()) {
      algorithms.push_back(c.algorithm);
    }
    const auto key = std::make_pair(c.m_over_n, c.q);
    if (std::find(rows.begin(), rows.end(), key) == rows.end()) rows.push_back(key);
  }
  std::ostringstream out;
  out << std::left << std::setw(8) << "m/n" << std::setw(7) << "q";
  for (const auto& a : algorithms) out << std::setw(std::max<int>(14, static_cast<int>(a.size()) + 2)) << a;
  out << "Pr(r_hat=r)\n";
  for (const auto& [ratio, q] : rows) {
    out << std::setw(8) << ratio_tag(ratio) << std::setw(7) << q;
    std::string pr;
    for (const auto& a : algorithms) {
      std::string cell = "-";
      for (const CellSummary& c : report.cells) {
        if (c.m_over_n == ratio && c.q == q && c.algorithm == a) {
          char buf[64];
          std::snprintf(buf, sizeof buf, "%.4f", c.mean_norm_err);
          cell = std::isfinite(c.mean_norm_err) ? buf : "NaN";
          if (c.fail_count > 0) cell += "(" + std::to_string(c.fail_count) + "f)";
          if (pr.empty() && std::isfinite(c.pr_rank_correct)) {
            std::snprintf(buf, sizeof buf, "%.2f", c.pr_rank_correct);
            pr = buf;
          }
        }
      }
      out << std::setw(std::max<int>(14, static_cast<int>(a.size()) + 2)) << cell;
    }
    out << (pr.empty() ? "-" : pr) << '\n';
  }
  return out.str();
}

}  // namespace lrpr
