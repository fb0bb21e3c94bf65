// Command-line front end for the cascaded four-wave-mixing filter simulator.
//
// Subcommands: coeffs, filter, detect, tune, oracle-check. Every flag can
// also come from a flat key = value config file (--config); flags given on
// the command line win. Exit codes: 0 success, 1 validation error,
// 2 numerical-tolerance failure (oracle-check), 3 I/O error.

#include <CLI11.hpp>
#include <json.hpp>

#include "fwm/fwm.hpp"

#include <functional>
#include <iostream>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

namespace {

using nlohmann::json;
using std::numbers::pi;

struct CommonOptions {
  std::string config_path;
  std::string format;  // csv | json
  std::string out_path;
  long long seed = 0;

  std::string resolved_format() const { return format.empty() ? "csv" : format; }
};

void add_common_flags(CLI::App* cmd, CommonOptions& common) {
  cmd->add_option("--config", common.config_path, "flat key = value configuration file");
  cmd->add_option("--format", common.format, "output format: csv or json");
  cmd->add_option("--out", common.out_path, "output path (default: stdout)");
  cmd->add_option("--seed", common.seed, "random seed for seeded checks");
}

// config values fill flags the command line left unset
class ConfigMerge {
 public:
  ConfigMerge(const CLI::App& cmd, const fwm::io::KeyValueConfig& cfg)
      : cmd_(cmd), cfg_(cfg) {}

  void fill(const std::string& key, const std::function<void(const std::string&)>& apply) const {
    if (cmd_.count("--" + key) > 0) return;
    if (const std::string* value = cfg_.find(key)) apply(*value);
  }

 private:
  const CLI::App& cmd_;
  const fwm::io::KeyValueConfig& cfg_;
};

fwm::io::KeyValueConfig load_config(const CLI::App& cmd, CommonOptions& common) {
  if (common.config_path.empty()) return {};
  const fwm::io::KeyValueConfig cfg = fwm::io::KeyValueConfig::load(common.config_path);
  if (const std::string* experiment = cfg.find("experiment")) {
    if (*experiment != cmd.get_name())
      throw std::invalid_argument("config requests experiment '" + *experiment +
                                  "' but subcommand is '" + cmd.get_name() + "'");
  }
  const ConfigMerge merge(cmd, cfg);
  merge.fill("format", [&](const std::string& v) { common.format = v; });
  merge.fill("out", [&](const std::string& v) { common.out_path = v; });
  merge.fill("seed", [&](const std::string& v) { common.seed = std::stoll(v); });
  return cfg;
}

void validate_format(const CommonOptions& common) {
  const std::string f = common.resolved_format();
  if (f != "csv" && f != "json")
    throw std::invalid_argument("unknown format '" + f + "' (want csv or json)");
}

void emit(const CommonOptions& common, const std::string& csv, const json& doc) {
  const std::string payload =
      common.resolved_format() == "csv" ? csv : doc.dump(2) + "\n";
  if (common.out_path.empty()) {
    std::cout << payload;
  } else {
    fwm::io::write_text_file(common.out_path, payload);
    std::cerr << "wrote " << common.out_path << "\n";
  }
}

std::vector<double> parse_theta_list(const std::vector<std::string>& raw) {
  std::vector<double> out;
  for (const std::string& item : raw) {
    std::string rest = item;
    std::size_t pos = 0;
    while ((pos = rest.find(',')) != std::string::npos) {
      const std::string head = rest.substr(0, pos);
      if (!head.empty()) out.push_back(fwm::io::parse_theta(head));
      rest = rest.substr(pos + 1);
    }
    if (!rest.empty()) out.push_back(fwm::io::parse_theta(rest));
  }
  return out;
}

std::vector<fwm::StageGeometry> to_geometries(const std::vector<double>& thetas) {
  std::vector<fwm::StageGeometry> gs;
  gs.reserve(thetas.size());
  for (double t : thetas) gs.push_back(fwm::StageGeometry::from_theta(t));
  return gs;
}

// ---------------------------------------------------------------- coeffs --

struct CoeffsOptions {
  CommonOptions common;
  std::vector<std::string> theta_raw;
  int max_n = 4;
  double phase = 0.0;
};

int run_coeffs(const CLI::App& cmd, CoeffsOptions& opt) {
  const fwm::io::KeyValueConfig cfg = load_config(cmd, opt.common);
  const ConfigMerge merge(cmd, cfg);
  merge.fill("theta", [&](const std::string& v) { opt.theta_raw = {v}; });
  merge.fill("max-n", [&](const std::string& v) { opt.max_n = std::stoi(v); });
  merge.fill("phase", [&](const std::string& v) { opt.phase = fwm::io::parse_theta(v); });
  validate_format(opt.common);

  if (opt.theta_raw.empty()) opt.theta_raw = {"pi"};
  const std::vector<double> thetas = parse_theta_list(opt.theta_raw);
  if (thetas.size() != 1)
    throw std::invalid_argument("coeffs expects exactly one --theta");
  if (opt.max_n < 0) throw std::invalid_argument("coeffs: --max-n must be >= 0");
  const double theta = thetas[0];

  std::string csv = "n,j,magnitude,phase\n";
  json rows = json::array();
  for (int n = 0; n <= opt.max_n; ++n) {
    const Eigen::VectorXcd xi =
        fwm::SectorPropagator(n).transfer_amplitudes(theta, opt.phase);
    for (int j = 0; j <= n; ++j) {
      const double mag = std::abs(xi(j));
      const double arg = std::arg(xi(j));
      csv += std::to_string(n) + "," + std::to_string(j) + "," + fwm::io::format_sig(mag) +
             "," + fwm::io::format_sig(arg) + "\n";
      rows.push_back({{"n", n}, {"j", j}, {"magnitude", mag}, {"phase", arg}});
    }
  }

  const json doc = {{"experiment", "coeffs"},
                    {"config",
                     {{"theta", json::array({theta})},
                      {"max-n", opt.max_n},
                      {"phase", opt.phase},
                      {"seed", opt.common.seed},
                      {"format", opt.common.resolved_format()}}},
                    {"results", {{"coefficients", rows}}}};
  emit(opt.common, csv, doc);
  return 0;
}

// ------------------------------------------------------- filter / detect --

struct CascadeOptionsCli {
  CommonOptions common;
  std::string input;
  int stages = 8;
  std::vector<std::string> theta_raw;
  double efficiency = 1.0;
  int truncation = -1;
};

void merge_cascade_options(const CLI::App& cmd, const fwm::io::KeyValueConfig& cfg,
                           CascadeOptionsCli& opt) {
  const ConfigMerge merge(cmd, cfg);
  merge.fill("input", [&](const std::string& v) { opt.input = v; });
  merge.fill("stages", [&](const std::string& v) { opt.stages = std::stoi(v); });
  merge.fill("theta", [&](const std::string& v) { opt.theta_raw = {v}; });
  merge.fill("efficiency", [&](const std::string& v) { opt.efficiency = std::stod(v); });
  merge.fill("truncation", [&](const std::string& v) { opt.truncation = std::stoi(v); });
  validate_format(opt.common);
  if (opt.input.empty())
    throw std::invalid_argument(cmd.get_name() + ": --input is required (fock:N or coherent:MEAN)");
  if (opt.theta_raw.empty()) opt.theta_raw = {"pi"};
}

struct CascadeRun {
  fwm::InputSpec input;
  std::vector<double> thetas;
  fwm::DetectorModel detector;
  fwm::CascadeResult result;
  json config;
};

CascadeRun execute_cascade(const CascadeOptionsCli& opt) {
  const fwm::InputSpec input = fwm::io::parse_input(opt.input, opt.truncation);
  const std::vector<double> thetas = parse_theta_list(opt.theta_raw);
  fwm::DetectorModel detector;
  detector.efficiency = opt.efficiency;
  const fwm::CascadeResult result = fwm::run_cascade(
      input, opt.stages, to_geometries(thetas), detector, fwm::MediumParams{});
  json config = {{"input", opt.input},
                 {"stages", opt.stages},
                 {"theta", thetas},
                 {"efficiency", opt.efficiency},
                 {"truncation", input.kind == fwm::InputSpec::Kind::Coherent
                                    ? json(input.truncation)
                                    : json(nullptr)},
                 {"seed", opt.common.seed},
                 {"format", opt.common.resolved_format()}};
  return CascadeRun{input, thetas, detector, result, std::move(config)};
}

int run_filter(const CLI::App& cmd, CascadeOptionsCli& opt) {
  const fwm::io::KeyValueConfig cfg = load_config(cmd, opt.common);
  merge_cascade_options(cmd, cfg, opt);
  CascadeRun run = execute_cascade(opt);

  const int n_max = run.input.max_photons();
  const std::vector<fwm::StageMetrics> metrics =
      fwm::filter_metrics(run.result.stage_occupations);

  std::string csv = "stage";
  for (int n = 0; n <= n_max; ++n) csv += ",p" + std::to_string(n);
  csv += ",p_ge2\n";
  json stages = json::array();
  for (std::size_t s = 0; s < run.result.stage_occupations.size(); ++s) {
    const Eigen::VectorXd& probs = run.result.stage_occupations[s].probs;
    csv += std::to_string(s);
    json prob_list = json::array();
    for (int n = 0; n <= n_max; ++n) {
      csv += "," + fwm::io::format_sig(probs(n));
      prob_list.push_back(probs(n));
    }
    csv += "," + fwm::io::format_sig(metrics[s].p_ge2) + "\n";
    stages.push_back({{"stage", s},
                      {"probs", prob_list},
                      {"p0", metrics[s].p0},
                      {"p1", metrics[s].p1},
                      {"p_ge2", metrics[s].p_ge2}});
  }

  const json doc = {{"experiment", "filter"},
                    {"config", run.config},
                    {"results", {{"stages", stages}}}};
  emit(opt.common, csv, doc);
  return 0;
}

int run_detect(const CLI::App& cmd, CascadeOptionsCli& opt) {
  const fwm::io::KeyValueConfig cfg = load_config(cmd, opt.common);
  merge_cascade_options(cmd, cfg, opt);
  CascadeRun run = execute_cascade(opt);

  std::string csv = "stage_clicks,final_click,label,probability\n";
  json records = json::array();
  for (const auto& [rec, p] : run.result.record_probabilities) {
    std::string bits;
    for (bool b : rec.stage_clicks) bits += b ? '1' : '0';
    csv += bits + "," + (rec.final_click ? "1" : "0") + "," + rec.label() + "," +
           fwm::io::format_sig(p) + "\n";
    records.push_back({{"stage_clicks", bits},
                       {"final_click", rec.final_click},
                       {"label", rec.label()},
                       {"probability", p}});
  }

  json results = {{"records", records},
                  {"p_only_final", run.result.p_only_final_click()},
                  {"p_no_clicks", run.result.p_no_clicks()},
                  {"p_any_stage_click", run.result.p_any_stage_click()}};
  if (run.input.kind == fwm::InputSpec::Kind::Fock && run.thetas.size() == 1) {
    if (run.input.photons == 2 && run.detector.efficiency == 1.0)
      results["misidentification_closed_form"] =
          fwm::misidentification_probability(opt.stages, run.thetas[0]);
    results["accuracy"] = run.input.photons == 1
                              ? run.result.p_only_final_click()
                              : 1.0 - run.result.p_only_final_click();
  }

  const json doc = {{"experiment", "detect"},
                    {"config", run.config},
                    {"results", results}};
  emit(opt.common, csv, doc);
  return 0;
}

// ------------------------------------------------------------------ tune --

struct TuneOptions {
  CommonOptions common;
  int n = -1;
  double tolerance = 1e-12;
  std::string theta_max = "40pi";
  std::string grid_step;
};

int run_tune(const CLI::App& cmd, TuneOptions& opt) {
  const fwm::io::KeyValueConfig cfg = load_config(cmd, opt.common);
  const ConfigMerge merge(cmd, cfg);
  merge.fill("n", [&](const std::string& v) { opt.n = std::stoi(v); });
  merge.fill("tolerance", [&](const std::string& v) { opt.tolerance = std::stod(v); });
  merge.fill("theta-max", [&](const std::string& v) { opt.theta_max = v; });
  merge.fill("grid-step", [&](const std::string& v) { opt.grid_step = v; });
  validate_format(opt.common);
  if (opt.n < 1) throw std::invalid_argument("tune: --n must be a sector >= 1");

  fwm::ReturnSearchOptions search;
  search.theta_max = fwm::io::parse_theta(opt.theta_max);
  if (!opt.grid_step.empty()) search.grid_step = fwm::io::parse_theta(opt.grid_step);
  const fwm::SectorReturn tuned = fwm::tune_length_for_sector(opt.n, opt.tolerance, search);

  std::string csv = "n,theta,return_probability,deficit,exact\n";
  csv += std::to_string(tuned.n) + "," + fwm::io::format_sig(tuned.theta) + "," +
         fwm::io::format_sig(tuned.return_probability) + "," +
         fwm::io::format_sig(1.0 - tuned.return_probability) + "," +
         (tuned.exact ? "1" : "0") + "\n";

  const json doc = {{"experiment", "tune"},
                    {"config",
                     {{"n", opt.n},
                      {"tolerance", opt.tolerance},
                      {"theta-max", search.theta_max},
                      {"grid-step", search.grid_step},
                      {"seed", opt.common.seed},
                      {"format", opt.common.resolved_format()}}},
                    {"results",
                     {{"theta", tuned.theta},
                      {"return_probability", tuned.return_probability},
                      {"deficit", 1.0 - tuned.return_probability},
                      {"exact", tuned.exact}}}};
  emit(opt.common, csv, doc);
  return 0;
}

// ---------------------------------------------------------- oracle-check --

struct OracleOptions {
  CommonOptions common;
  int truncation = 4;
  int theta_samples = 20;
};

int run_oracle_check(const CLI::App& cmd, OracleOptions& opt) {
  const fwm::io::KeyValueConfig cfg = load_config(cmd, opt.common);
  const ConfigMerge merge(cmd, cfg);
  merge.fill("truncation", [&](const std::string& v) { opt.truncation = std::stoi(v); });
  merge.fill("thetas", [&](const std::string& v) { opt.theta_samples = std::stoi(v); });
  validate_format(opt.common);
  if (opt.truncation < 1 || opt.truncation > fwm::kTruncationGuard)
    throw std::invalid_argument("oracle-check: --truncation must lie in [1, " +
                                std::to_string(fwm::kTruncationGuard) + "]");

  struct Check {
    std::string name;
    double value;
    double tolerance;
  };
  std::vector<Check> checks;
  const int t = opt.truncation;

  const fwm::FullHamiltonian h = fwm::build_full_hamiltonian(t);
  checks.push_back({"hermiticity", (h.matrix - h.matrix.adjoint()).cwiseAbs().maxCoeff(), 1e-12});
  checks.push_back({"kernel_annihilation", fwm::kernel_violation(h), 1e-12});

  if (t >= 2) {  // commutator checks need a two-photon ladder
    const fwm::ConservationReport report = fwm::check_constants_of_motion(t);
    checks.push_back({"commutator_photon_number", report.number_invariant, 1e-12});
    checks.push_back({"commutator_field_correlation", report.correlation_invariant, 1e-12});
    checks.push_back({"commutator_trilinear", report.trilinear_invariant, 1e-10});
  }

  // sector reduction against the full propagation at seeded random angles
  {
    const fwm::FullPropagator prop(h);
    fwm::SplitMix64 rng(static_cast<std::uint64_t>(opt.common.seed));
    double worst = 0.0, worst_leak = 0.0;
    for (int n = 1; n <= t; ++n) {
      const fwm::SectorPropagator sector(n);
      for (int k = 0; k < opt.theta_samples; ++k) {
        const double theta = rng.uniform() * 4.0 * pi;
        fwm::FullFockState out =
            prop.propagate(fwm::FullFockState::number_state(t, n, 0, 0), theta);
        const Eigen::VectorXcd expected = sector.transfer_amplitudes(theta);
        Eigen::VectorXcd projected(n + 1);
        for (int j = 0; j <= n; ++j) {
          projected(j) = out.amp(n - j, j, j);
          out.amps(out.index(n - j, j, j)) = 0.0;  // what remains is out-of-sector
        }
        worst = std::max(worst, (projected - expected).cwiseAbs().maxCoeff());
        worst_leak = std::max(worst_leak, out.amps.norm());
      }
    }
    checks.push_back({"sector_equivalence", worst, 1e-8});
    checks.push_back({"sector_leakage", worst_leak, 1e-12});
  }

  // the two independent propagation routes
  {
    const fwm::FullFockState in = fwm::FullFockState::number_state(t, std::min(2, t), 0, 0);
    const fwm::FullFockState spectral = fwm::propagate_full(in, pi);
    const fwm::FullFockState stepped = fwm::integrate_schrodinger(in, pi, 4000);
    checks.push_back(
        {"integrator_agreement", (spectral.amps - stepped.amps).cwiseAbs().maxCoeff(), 1e-7});
  }

  checks.push_back({"pure_vs_mixture",
                    fwm::compare_pure_vs_mixture(0.5, t, 3, fwm::StageGeometry{pi})
                        .max_deviation(),
                    1e-10});

  bool all_pass = true;
  std::string csv = "check,value,tolerance,pass\n";
  json rows = json::array();
  for (const Check& c : checks) {
    const bool pass = c.value < c.tolerance;
    all_pass = all_pass && pass;
    csv += c.name + "," + fwm::io::format_sig(c.value) + "," + fwm::io::format_sig(c.tolerance) +
           "," + (pass ? "1" : "0") + "\n";
    rows.push_back(
        {{"name", c.name}, {"value", c.value}, {"tolerance", c.tolerance}, {"pass", pass}});
  }

  const json doc = {{"experiment", "oracle-check"},
                    {"config",
                     {{"truncation", t},
                      {"thetas", opt.theta_samples},
                      {"seed", opt.common.seed},
                      {"format", opt.common.resolved_format()}}},
                    {"results", {{"checks", rows}, {"all_pass", all_pass}}}};
  emit(opt.common, csv, doc);
  return all_pass ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"cascaded resonant four-wave-mixing photon filter simulator"};
  app.require_subcommand(1);

  CoeffsOptions coeffs;
  CLI::App* coeffs_cmd =
      app.add_subcommand("coeffs", "one-pass transfer coefficients per photon-number sector");
  add_common_flags(coeffs_cmd, coeffs.common);
  coeffs_cmd->add_option("--theta", coeffs.theta_raw,
                         "propagation phase (radians; accepts pi suffix)");
  coeffs_cmd->add_option("--max-n", coeffs.max_n, "largest photon-number sector");
  coeffs_cmd->add_option("--phase", coeffs.phase, "drive phase (radians)");

  CascadeOptionsCli filter;
  CLI::App* filter_cmd =
      app.add_subcommand("filter", "per-stage photon-number distributions through the cascade");
  add_common_flags(filter_cmd, filter.common);
  filter_cmd->add_option("--input", filter.input, "fock:N or coherent:MEAN");
  filter_cmd->add_option("--stages", filter.stages, "number of cascade stages");
  filter_cmd->add_option("--theta", filter.theta_raw,
                         "per-stage phase, one value or one per stage (repeatable)");
  filter_cmd->add_option("--efficiency", filter.efficiency, "detector efficiency in (0,1]");
  filter_cmd->add_option("--truncation", filter.truncation,
                         "coherent-input sector cutoff (default: tail below 1e-8)");

  CascadeOptionsCli detect;
  CLI::App* detect_cmd =
      app.add_subcommand("detect", "detector-record distribution and discrimination accuracy");
  add_common_flags(detect_cmd, detect.common);
  detect_cmd->add_option("--input", detect.input, "fock:N or coherent:MEAN");
  detect_cmd->add_option("--stages", detect.stages, "number of cascade stages");
  detect_cmd->add_option("--theta", detect.theta_raw,
                         "per-stage phase, one value or one per stage (repeatable)");
  detect_cmd->add_option("--efficiency", detect.efficiency, "detector efficiency in (0,1]");
  detect_cmd->add_option("--truncation", detect.truncation,
                         "coherent-input sector cutoff (default: tail below 1e-8)");

  TuneOptions tune;
  CLI::App* tune_cmd =
      app.add_subcommand("tune", "stage length maximizing a sector's full return");
  add_common_flags(tune_cmd, tune.common);
  tune_cmd->add_option("--n", tune.n, "photon-number sector to tune for");
  tune_cmd->add_option("--tolerance", tune.tolerance, "deficit below which the return is exact");
  tune_cmd->add_option("--theta-max", tune.theta_max, "search window upper bound");
  tune_cmd->add_option("--grid-step", tune.grid_step, "coarse grid step");

  OracleOptions oracle;
  CLI::App* oracle_cmd =
      app.add_subcommand("oracle-check", "full-space validation of the sector reduction");
  add_common_flags(oracle_cmd, oracle.common);
  oracle_cmd->add_option("--truncation", oracle.truncation, "photons per mode in the full space");
  oracle_cmd->add_option("--thetas", oracle.theta_samples, "random angles per sector");

  int exit_code = 0;
  coeffs_cmd->callback([&] { exit_code = run_coeffs(*coeffs_cmd, coeffs); });
  filter_cmd->callback([&] { exit_code = run_filter(*filter_cmd, filter); });
  detect_cmd->callback([&] { exit_code = run_detect(*detect_cmd, detect); });
  tune_cmd->callback([&] { exit_code = run_tune(*tune_cmd, tune); });
  oracle_cmd->callback([&] { exit_code = run_oracle_check(*oracle_cmd, oracle); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const fwm::io::io_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return exit_code;
}
