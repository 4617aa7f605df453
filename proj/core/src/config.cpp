#include <cmath>
#include <set>
#include <thread>

#include <nlohmann/json.hpp>

#include "lrpr/errors.hpp"
#include "lrpr/harness.hpp"

namespace lrpr {

using nlohmann::json;

AlgorithmSpec AlgorithmSpec::parse(const std::string& text) {
  AlgorithmSpec spec;
  spec.label = text;
  const auto colon = text.find(':');
  const std::string base = text.substr(0, colon);
  const std::string modifier = colon == std::string::npos ? "" : text.substr(colon + 1);

  if (base == "lrpr-init") spec.family = AlgorithmFamily::LrprInit;
  else if (base == "twf-init") spec.family = AlgorithmFamily::TwfInit;
  else if (base == "twfproj-init") spec.family = AlgorithmFamily::TwfProjInit;
  else if (base == "lrpr-twf") spec.family = AlgorithmFamily::LrprTwf;
  else if (base == "twf") spec.family = AlgorithmFamily::Twf;
  else if (base == "twfproj") spec.family = AlgorithmFamily::TwfProj;
  else if (base == "lrpr1") spec.family = AlgorithmFamily::Lrpr1;
  else if (base == "lrpr2") spec.family = AlgorithmFamily::Lrpr2;
  else throw ConfigurationError("unknown algorithm '" + text + "'");

  if (modifier.empty()) return spec;
  const bool uses_lrpr_init = spec.family == AlgorithmFamily::LrprInit ||
                              spec.family == AlgorithmFamily::LrprTwf ||
                              spec.family == AlgorithmFamily::Lrpr1 ||
                              spec.family == AlgorithmFamily::Lrpr2;
  if (modifier == "known") spec.rank_mode = RankMode::Known;
  else if (modifier == "gap") spec.rank_mode = RankMode::Gap;
  else if (modifier == "threshold") spec.rank_mode = RankMode::Threshold;
  else if (modifier == "same") spec.same = true;
  else if (modifier == "partitioned") spec.partitioned = true;
  else throw ConfigurationError("unknown algorithm modifier in '" + text + "'");

  if (spec.rank_mode && !uses_lrpr_init) {
    throw ConfigurationError("'" + text + "': rank rules apply only to LRPR-initialized methods");
  }
  if (spec.partitioned && spec.family != AlgorithmFamily::LrprInit) {
    throw ConfigurationError("'" + text + "': partitioned mode is an lrpr-init option");
  }
  return spec;
}

bool AlgorithmSpec::iterative() const {
  return family != AlgorithmFamily::LrprInit && family != AlgorithmFamily::TwfInit &&
         family != AlgorithmFamily::TwfProjInit;
}

namespace {

std::string rank_mode_name(RankMode mode) {
  switch (mode) {
    case RankMode::Known: return "known";
    case RankMode::Gap: return "gap";
    case RankMode::Threshold: return "threshold";
  }
  return "known";
}

RankMode parse_rank_mode(const std::string& text) {
  if (text == "known") return RankMode::Known;
  if (text == "gap") return RankMode::Gap;
  if (text == "threshold") return RankMode::Threshold;
  throw ConfigurationError("unknown rank_mode '" + text + "' (known|gap|threshold)");
}

template <class T>
T get_as(const json& doc, const char* key) {
  try {
    return doc.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigurationError(std::string("config key '") + key + "': " + e.what());
  }
}

template <class T>
std::vector<T> get_list(const json& doc, const char* key) {
  const json& v = doc.at(key);
  if (v.is_array()) return get_as<std::vector<T>>(doc, key);
  return {get_as<T>(doc, key)};
}

}  // namespace

ExperimentConfig ExperimentConfig::parse(const std::string& json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigurationError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw ConfigurationError("config must be a JSON object");

  static const std::set<std::string> known = {
      "n", "r", "q", "m_over_n", "field", "ensemble", "cdp_n1", "cdp_n2", "sharing",
      "noise_halfwidth", "trials", "algorithms", "rank_mode", "lambda_min", "max_rank",
      "fresh_over_n", "twf_step", "twf_alpha_lb", "twf_alpha_ub", "twf_alpha_h", "twf_events",
      "iterations", "power_iters", "dense_threshold", "ls_dense_unknowns", "cgls_iters",
      "stop_below", "record_traces", "seed", "threads", "timing_mode", "out"};
  for (const auto& item : doc.items()) {
    if (!known.count(item.key())) throw ConfigurationError("unknown config key '" + item.key() + "'");
  }

  ExperimentConfig cfg;
  if (doc.contains("n")) cfg.n = get_as<Index>(doc, "n");
  if (doc.contains("r")) cfg.r = get_as<Index>(doc, "r");
  if (doc.contains("q")) cfg.q = get_list<Index>(doc, "q");
  if (doc.contains("m_over_n")) cfg.m_over_n = get_list<double>(doc, "m_over_n");
  if (doc.contains("field")) {
    const auto f = get_as<std::string>(doc, "field");
    if (f == "real") cfg.field = Field::Real;
    else if (f == "complex") cfg.field = Field::Complex;
    else throw ConfigurationError("field must be 'real' or 'complex'");
  }
  if (doc.contains("ensemble")) cfg.ensemble = get_as<std::string>(doc, "ensemble");
  if (doc.contains("cdp_n1")) cfg.cdp_n1 = get_as<Index>(doc, "cdp_n1");
  if (doc.contains("cdp_n2")) cfg.cdp_n2 = get_as<Index>(doc, "cdp_n2");
  if (doc.contains("sharing")) cfg.sharing = parse_sharing(get_as<std::string>(doc, "sharing"));
  if (doc.contains("noise_halfwidth")) cfg.noise_halfwidth = get_as<double>(doc, "noise_halfwidth");
  if (doc.contains("trials")) cfg.trials = get_as<int>(doc, "trials");
  if (doc.contains("algorithms")) {
    for (const auto& name : get_list<std::string>(doc, "algorithms")) {
      cfg.algorithms.push_back(AlgorithmSpec::parse(name));
    }
  }
  if (doc.contains("rank_mode")) cfg.rank_mode = parse_rank_mode(get_as<std::string>(doc, "rank_mode"));
  if (doc.contains("lambda_min")) cfg.lambda_min = get_as<double>(doc, "lambda_min");
  if (doc.contains("max_rank")) cfg.max_rank = get_as<Index>(doc, "max_rank");
  if (doc.contains("fresh_over_n")) cfg.fresh_over_n = get_as<double>(doc, "fresh_over_n");
  if (doc.contains("twf_step")) cfg.twf.step = get_as<double>(doc, "twf_step");
  if (doc.contains("twf_alpha_lb")) cfg.twf.alpha_lb = get_as<double>(doc, "twf_alpha_lb");
  if (doc.contains("twf_alpha_ub")) cfg.twf.alpha_ub = get_as<double>(doc, "twf_alpha_ub");
  if (doc.contains("twf_alpha_h")) cfg.twf.alpha_h = get_as<double>(doc, "twf_alpha_h");
  if (doc.contains("twf_events")) cfg.twf.events = parse_event_rule(get_as<std::string>(doc, "twf_events"));
  if (doc.contains("iterations")) cfg.twf.iterations = get_as<int>(doc, "iterations");
  if (doc.contains("power_iters")) cfg.power_iters = get_as<int>(doc, "power_iters");
  if (doc.contains("dense_threshold")) cfg.dense_threshold = get_as<Index>(doc, "dense_threshold");
  if (doc.contains("ls_dense_unknowns")) cfg.ls_dense_unknowns = get_as<Index>(doc, "ls_dense_unknowns");
  if (doc.contains("cgls_iters")) cfg.cgls_iters = get_as<int>(doc, "cgls_iters");
  if (doc.contains("stop_below")) cfg.stop_below = get_as<double>(doc, "stop_below");
  if (doc.contains("record_traces")) cfg.record_traces = get_as<bool>(doc, "record_traces");
  if (doc.contains("seed")) cfg.seed = get_as<std::uint64_t>(doc, "seed");
  if (doc.contains("threads")) cfg.threads = get_as<int>(doc, "threads");
  if (doc.contains("timing_mode")) cfg.timing_mode = get_as<bool>(doc, "timing_mode");
  if (doc.contains("out")) cfg.out = get_as<std::string>(doc, "out");
  cfg.validate();
  return cfg;
}

ExperimentConfig ExperimentConfig::load(const std::filesystem::path& path) {
  try {
    return parse(read_text(path));
  } catch (const ConfigurationError& e) {
    throw ConfigurationError(path.string() + ": " + e.what());
  }
}

Index ExperimentConfig::rows_for(double ratio) const {
  const double rows = ratio * static_cast<double>(n);
  const double rounded = std::round(rows);
  if (!(rounded >= 1.0) || std::abs(rows - rounded) > 1e-9 * std::max(1.0, rows)) {
    throw ConfigurationError("m/n = " + std::to_string(ratio) + " with n = " + std::to_string(n) +
                             " does not give a positive integer m");
  }
  return static_cast<Index>(rounded);
}

void ExperimentConfig::validate() const {
  if (n < 1) throw ConfigurationError("n must be >= 1");
  if (r < 1 || r > n) throw ConfigurationError("r must be in [1, n]");
  if (q.empty() || m_over_n.empty()) throw ConfigurationError("q and m_over_n must be nonempty");
  for (Index qq : q) {
    if (qq < r) throw ConfigurationError("every q must be >= r");
  }
  if (trials < 1) throw ConfigurationError("trials must be >= 1");
  if (algorithms.empty()) throw ConfigurationError("algorithms must be nonempty");
  std::set<std::string> labels;
  for (const auto& a : algorithms) {
    if (!labels.insert(a.label).second) throw ConfigurationError("duplicate algorithm '" + a.label + "'");
    if (a.partitioned && !(fresh_over_n > 0.0)) {
      throw ConfigurationError("'" + a.label + "' needs fresh_over_n > 0");
    }
    if (a.same && ensemble == "cdp") throw ConfigurationError("the 'same' variant is Gaussian-only");
    if (a.partitioned && ensemble == "cdp") {
      throw ConfigurationError("partitioned measurements are Gaussian-only");
    }
  }
  if (!(noise_halfwidth >= 0.0)) throw ConfigurationError("noise_halfwidth must be >= 0");
  if (ensemble != "gaussian" && ensemble != "cdp") {
    throw ConfigurationError("ensemble must be 'gaussian' or 'cdp'");
  }
  for (double ratio : m_over_n) {
    const Index m = rows_for(ratio);
    if (ensemble == "cdp" && m % n != 0) {
      throw ConfigurationError("cdp needs m/n to be a whole number of masks");
    }
  }
  if (fresh_over_n > 0.0) rows_for(fresh_over_n);
  if (fresh_over_n < 0.0) throw ConfigurationError("fresh_over_n must be >= 0");
  if (ensemble == "cdp") {
    if (field != Field::Complex) throw ConfigurationError("cdp requires field = complex");
    if (cdp_n1 < 1 || cdp_n2 < 1 || cdp_n1 * cdp_n2 != n) {
      throw ConfigurationError("cdp requires cdp_n1 * cdp_n2 = n");
    }
  }
  if (lambda_min && !(*lambda_min > 0.0)) throw ConfigurationError("lambda_min must be > 0");
  if (max_rank < 1) throw ConfigurationError("max_rank must be >= 1");
  twf.validate();
  if (power_iters < 0 || cgls_iters < 1) throw ConfigurationError("invalid iteration counts");
  if (stop_below < 0.0) throw ConfigurationError("stop_below must be >= 0");
  if (threads < 0) throw ConfigurationError("threads must be >= 0");
}

int ExperimentConfig::effective_threads() const {
  if (timing_mode) return 1;
  if (threads > 0) return threads;
  return static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
}

std::string ExperimentConfig::to_json() const {
  json doc;
  doc["n"] = n;
  doc["r"] = r;
  doc["q"] = q;
  doc["m_over_n"] = m_over_n;
  doc["field"] = field == Field::Real ? "real" : "complex";
  doc["ensemble"] = ensemble;
  if (ensemble == "cdp") {
    doc["cdp_n1"] = cdp_n1;
    doc["cdp_n2"] = cdp_n2;
  }
  doc["sharing"] = to_string(sharing);
  doc["noise_halfwidth"] = noise_halfwidth;
  doc["trials"] = trials;
  std::vector<std::string> names;
  for (const auto& a : algorithms) names.push_back(a.label);
  doc["algorithms"] = names;
  doc["rank_mode"] = rank_mode_name(rank_mode);
  if (lambda_min) doc["lambda_min"] = *lambda_min;
  doc["max_rank"] = max_rank;
  doc["fresh_over_n"] = fresh_over_n;
  doc["twf_step"] = twf.step;
  doc["twf_alpha_lb"] = twf.alpha_lb;
  doc["twf_alpha_ub"] = twf.alpha_ub;
  doc["twf_alpha_h"] = twf.alpha_h;
  doc["twf_events"] = to_string(twf.events);
  doc["iterations"] = twf.iterations;
  doc["power_iters"] = power_iters;
  doc["dense_threshold"] = dense_threshold;
  doc["ls_dense_unknowns"] = ls_dense_unknowns;
  doc["cgls_iters"] = cgls_iters;
  doc["stop_below"] = stop_below;
  doc["record_traces"] = record_traces;
  doc["seed"] = seed;
  doc["out"] = out;
  return doc.dump(2);
}

}  // namespace lrpr
