#pragma once

#include "fwm/cascade.hpp"

#include <json.hpp>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

namespace fwm::io {

struct io_error : std::runtime_error {
  explicit io_error(const std::string& what) : std::runtime_error(what) {}
};

// Fixed 12-significant-digit formatting keeps emitted tables reproducible
// at tolerance level across platforms.
inline std::string format_sig(double value, int digits = 12) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*g", digits, value);
  return buf;
}

// Accepts plain radians or "pi"-suffixed multiples: "pi", "2pi", "0.5pi".
inline double parse_theta(const std::string& text) {
  std::string s = text;
  double factor = 1.0;
  if (s.size() >= 2 && s.substr(s.size() - 2) == "pi") {
    factor = std::numbers::pi;
    s = s.substr(0, s.size() - 2);
    if (s.empty()) s = "1";
  }
  std::size_t used = 0;
  double value = 0.0;
  try {
    value = std::stod(s, &used);
  } catch (const std::exception&) {
    throw std::invalid_argument("cannot parse angle '" + text + "'");
  }
  if (used != s.size()) throw std::invalid_argument("cannot parse angle '" + text + "'");
  return value * factor;
}

// "fock:N" or "coherent:MEAN"; coherent truncation defaults from the tail
// tolerance unless overridden separately.
inline InputSpec parse_input(const std::string& text, int truncation_override = -1) {
  const auto colon = text.find(':');
  const std::string kind = text.substr(0, colon);
  const std::string arg = colon == std::string::npos ? "" : text.substr(colon + 1);
  try {
    if (kind == "fock") return InputSpec::fock(std::stoi(arg));
    if (kind == "coherent") return InputSpec::coherent(std::stod(arg), truncation_override);
  } catch (const std::invalid_argument&) {
  }
  throw std::invalid_argument("cannot parse input '" + text + "' (want fock:N or coherent:MEAN)");
}

// Flat key = value configuration; '#' starts a comment. Keys mirror the long
// command-line flags; flags given on the command line win.
struct KeyValueConfig {
  std::map<std::string, std::string> values;

  static KeyValueConfig parse(std::istream& in) {
    KeyValueConfig cfg;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      const auto hash = line.find('#');
      if (hash != std::string::npos) line = line.substr(0, hash);
      auto trim = [](std::string s) {
        const auto a = s.find_first_not_of(" \t\r");
        const auto b = s.find_last_not_of(" \t\r");
        return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
      };
      line = trim(line);
      if (line.empty()) continue;
      const auto eq = line.find('=');
      if (eq == std::string::npos)
        throw std::invalid_argument("config line " + std::to_string(line_no) +
                                    ": expected key = value");
      const std::string key = trim(line.substr(0, eq));
      const std::string value = trim(line.substr(eq + 1));
      if (key.empty())
        throw std::invalid_argument("config line " + std::to_string(line_no) + ": empty key");
      cfg.values[key] = value;
    }
    return cfg;
  }

  static KeyValueConfig load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw io_error("cannot open config file '" + path + "'");
    return parse(in);
  }

  const std::string* find(const std::string& key) const {
    auto it = values.find(key);
    return it == values.end() ? nullptr : &it->second;
  }
};

inline void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw io_error("cannot open output file '" + path + "'");
  out << content;
  if (!out) throw io_error("failed writing output file '" + path + "'");
}

// Schema check for emitted JSON result documents; returns problems found.
inline std::vector<std::string> validate_result_json(const nlohmann::json& doc) {
  std::vector<std::string> problems;
  auto require = [&](bool ok, const std::string& what) {
    if (!ok) problems.push_back(what);
  };

  require(doc.is_object(), "document must be an object");
  if (!doc.is_object()) return problems;

  static const std::vector<std::string> kExperiments = {"coeffs", "filter", "detect", "tune",
                                                        "oracle-check"};
  require(doc.contains("experiment") && doc["experiment"].is_string(),
          "missing string field 'experiment'");
  std::string experiment;
  if (doc.contains("experiment") && doc["experiment"].is_string()) {
    experiment = doc["experiment"].get<std::string>();
    require(std::find(kExperiments.begin(), kExperiments.end(), experiment) !=
                kExperiments.end(),
            "unknown experiment '" + experiment + "'");
  }

  require(doc.contains("config") && doc["config"].is_object(), "missing object field 'config'");
  if (doc.contains("config") && doc["config"].is_object()) {
    const auto& cfg = doc["config"];
    require(cfg.contains("format") && cfg["format"].is_string(), "config: missing 'format'");
    if (experiment == "filter" || experiment == "detect") {
      require(cfg.contains("input") && cfg["input"].is_string(), "config: missing 'input'");
      require(cfg.contains("stages") && cfg["stages"].is_number_integer(),
              "config: missing integer 'stages'");
      require(cfg.contains("theta") && cfg["theta"].is_array(), "config: missing array 'theta'");
      require(cfg.contains("efficiency") && cfg["efficiency"].is_number(),
              "config: missing 'efficiency'");
      require(cfg.contains("seed") && cfg["seed"].is_number_integer(),
              "config: missing 'seed'");
    }
    if (experiment == "coeffs") {
      require(cfg.contains("theta") && cfg["theta"].is_array(), "config: missing array 'theta'");
      require(cfg.contains("max-n") && cfg["max-n"].is_number_integer(),
              "config: missing 'max-n'");
    }
    if (experiment == "tune") {
      require(cfg.contains("n") && cfg["n"].is_number_integer(), "config: missing 'n'");
      require(cfg.contains("tolerance") && cfg["tolerance"].is_number(),
              "config: missing 'tolerance'");
    }
    if (experiment == "oracle-check") {
      require(cfg.contains("truncation") && cfg["truncation"].is_number_integer(),
              "config: missing 'truncation'");
      require(cfg.contains("seed") && cfg["seed"].is_number_integer(),
              "config: missing 'seed'");
    }
  }

  require(doc.contains("results") && doc["results"].is_object(),
          "missing object field 'results'");
  if (doc.contains("results") && doc["results"].is_object()) {
    const auto& res = doc["results"];
    if (experiment == "coeffs")
      require(res.contains("coefficients") && res["coefficients"].is_array(),
              "results: missing array 'coefficients'");
    if (experiment == "filter")
      require(res.contains("stages") && res["stages"].is_array(),
              "results: missing array 'stages'");
    if (experiment == "detect") {
      require(res.contains("records") && res["records"].is_array(),
              "results: missing array 'records'");
      require(res.contains("p_only_final") && res["p_only_final"].is_number(),
              "results: missing 'p_only_final'");
    }
    if (experiment == "tune") {
      require(res.contains("theta") && res["theta"].is_number(), "results: missing 'theta'");
      require(res.contains("return_probability") && res["return_probability"].is_number(),
              "results: missing 'return_probability'");
    }
    if (experiment == "oracle-check")
      require(res.contains("checks") && res["checks"].is_array(),
              "results: missing array 'checks'");
  }
  return problems;
}

}  // namespace fwm::io
