#pragma once

#include "fwm/dynamics.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace fwm {

// Click history: one flag per traversed stage detector plus the terminal
// detector at the cascade exit. final_click is meaningful only on branches
// returned after the terminal measurement.
struct DetectorRecord {
  std::vector<bool> stage_clicks;
  bool final_click = false;

  int stages() const { return static_cast<int>(stage_clicks.size()); }

  bool any_stage_click() const {
    for (bool c : stage_clicks)
      if (c) return true;
    return false;
  }

  // "D0" when no stage detector fired, otherwise "D2+D5"-style, with "+Dinf"
  // appended when the terminal detector fired.
  std::string label() const {
    std::string out;
    for (int i = 0; i < stages(); ++i) {
      if (stage_clicks[i]) {
        if (!out.empty()) out += '+';
        out += 'D' + std::to_string(i + 1);
      }
    }
    if (out.empty()) out = "D0";
    if (final_click) out += "+Dinf";
    return out;
  }

  friend bool operator==(const DetectorRecord& a, const DetectorRecord& b) {
    return a.stage_clicks == b.stage_clicks && a.final_click == b.final_click;
  }
  friend bool operator<(const DetectorRecord& a, const DetectorRecord& b) {
    if (a.stage_clicks != b.stage_clicks) return a.stage_clicks < b.stage_clicks;
    return a.final_click < b.final_click;
  }
};

// Avalanche detector: clicks on k >= 1 arriving photons with probability
// 1 - (1-eta)^k and cannot report k. number_resolving is carried for
// completeness; with click/no-click records and a measurement that fully
// decoheres the diverted photon number it changes no output of this model.
struct DetectorModel {
  double efficiency = 1.0;
  bool number_resolving = false;

  void validate() const {
    if (!(efficiency > 0.0) || efficiency > 1.0)
      throw std::invalid_argument("DetectorModel: efficiency must lie in (0, 1]");
  }

  double click_probability(int photons) const {
    if (photons <= 0) return 0.0;
    return 1.0 - std::pow(1.0 - efficiency, photons);
  }
};

// One ensemble member. A branch that has never suffered a j >= 1 collapse
// carries coherent amplitudes over the remaining Omega1 photon number
// (amps[n], normalized); after any collapse the branch is classical with a
// definite remaining_n. For coherent branches remaining_n reports the
// largest occupied photon number.
struct CascadeBranch {
  double weight = 1.0;
  int remaining_n = 0;
  DetectorRecord record;
  std::optional<Eigen::VectorXcd> amps;

  bool coherent() const { return amps.has_value(); }

  static CascadeBranch pure(Eigen::VectorXcd amplitudes) {
    const double nrm = amplitudes.norm();
    if (!(nrm > 0.0)) throw std::invalid_argument("CascadeBranch::pure: zero state");
    CascadeBranch b;
    b.amps = amplitudes / nrm;
    b.remaining_n = static_cast<int>(amplitudes.size()) - 1;
    while (b.remaining_n > 0 && std::abs((*b.amps)(b.remaining_n)) == 0.0) --b.remaining_n;
    return b;
  }

  static CascadeBranch fock(int n, double weight = 1.0) {
    CascadeBranch b;
    b.weight = weight;
    b.remaining_n = n;
    return b;
  }

  // Occupation probabilities conditioned on this branch.
  Eigen::VectorXd occupation(int n_max) const {
    Eigen::VectorXd p = Eigen::VectorXd::Zero(n_max + 1);
    if (coherent()) {
      for (Eigen::Index k = 0; k < amps->size(); ++k) p(k) = std::norm((*amps)(k));
    } else {
      p(remaining_n) = 1.0;
    }
    return p;
  }
};

struct CascadeOptions {
  std::size_t branch_cap = 1u << 20;
  // Beamsplitter phase conventions (symmetric convention: reflection i).
  // Reflected photons are absorbed by the stage detector, so the reflection
  // phase cancels in every probability this module reports; the transmission
  // phase multiplies each surviving photon's amplitude.
  double reflection_phase = std::numbers::pi / 2;
  double transmission_phase = 0.0;
  // Branches below this weight are dropped (0 keeps everything but exact zeros).
  double prune_below = 0.0;
};

// One stage: medium pass, beamsplitter diverting the 2j generated photons to
// this stage's detector, then the detector measurement. The measurement
// projects the diverted photon number j; the j = 0 outcome keeps the
// surviving amplitudes coherent across sectors, every j >= 1 outcome
// collapses to a classical branch with remaining_n = n - j. With efficiency
// below one a j >= 1 outcome may still show no click; such branches stay
// classical. Total weight is conserved.
inline std::vector<CascadeBranch> apply_stage(const CascadeBranch& branch, StageGeometry geom,
                                              const DetectorModel& det,
                                              const MediumParams& params,
                                              const CascadeOptions& opts = {}) {
  det.validate();
  params.validate();

  const int n_top = branch.remaining_n;
  Eigen::VectorXcd input;
  if (branch.coherent()) {
    input = *branch.amps;
  } else {
    input = Eigen::VectorXcd::Zero(n_top + 1);
    input(n_top) = 1.0;
  }

  // per-sector one-pass transfer amplitudes
  std::vector<Eigen::VectorXcd> xi(static_cast<std::size_t>(n_top) + 1);
  for (int n = 0; n <= n_top; ++n) {
    if (std::abs(input(n)) > 0.0)
      xi[n] = SectorPropagator(n).transfer_amplitudes(geom.theta, params.drive_phase);
  }

  std::vector<CascadeBranch> out;

  // j = 0 projection: no photons reach the detector, no click possible
  Eigen::VectorXcd keep = Eigen::VectorXcd::Zero(input.size());
  for (int n = 0; n <= n_top; ++n) {
    if (xi[n].size() == 0) continue;
    keep(n) = input(n) * xi[n](0) * std::polar(1.0, opts.transmission_phase * n);
  }
  const double p_keep = keep.squaredNorm();
  if (p_keep > 0.0) {
    CascadeBranch b;
    b.weight = branch.weight * p_keep;
    b.record = branch.record;
    b.record.stage_clicks.push_back(false);
    if (branch.coherent()) {
      b.amps = keep / std::sqrt(p_keep);
      b.remaining_n = n_top;
    } else {
      b.remaining_n = n_top;  // classical branches stay classical
    }
    out.push_back(std::move(b));
  }

  // j >= 1 projections collapse; the stage detector sees 2j photons
  std::map<std::pair<bool, int>, double> collapsed;  // (clicked, remaining) -> weight
  for (int n = 1; n <= n_top; ++n) {
    if (xi[n].size() == 0) continue;
    for (int j = 1; j <= n; ++j) {
      const double p = branch.weight * std::norm(input(n) * xi[n](j));
      if (p == 0.0) continue;
      const double q = det.click_probability(2 * j);
      if (q > 0.0) collapsed[{true, n - j}] += p * q;
      if (q < 1.0) collapsed[{false, n - j}] += p * (1.0 - q);
    }
  }
  for (const auto& [key, weight] : collapsed) {
    if (weight < opts.prune_below) continue;
    CascadeBranch b = CascadeBranch::fock(key.second, weight);
    b.record = branch.record;
    b.record.stage_clicks.push_back(key.first);
    out.push_back(std::move(b));
  }
  return out;
}

// Full cascade output. Branch ordering is deterministic: sorted by
// (record, remaining_n). stage_occupations[k] is the Omega1 photon-number
// distribution after k stages (k = 0 is the input), taken before the
// terminal detector.
struct CascadeResult {
  std::vector<CascadeBranch> branches;
  std::vector<NumberDistribution> stage_occupations;
  std::map<DetectorRecord, double> record_probabilities;

  double probability(const DetectorRecord& r) const {
    auto it = record_probabilities.find(r);
    return it == record_probabilities.end() ? 0.0 : it->second;
  }

  // no stage detector fired and the terminal detector did
  double p_only_final_click() const {
    double p = 0.0;
    for (const auto& [rec, prob] : record_probabilities)
      if (!rec.any_stage_click() && rec.final_click) p += prob;
    return p;
  }

  double p_no_clicks() const {
    double p = 0.0;
    for (const auto& [rec, prob] : record_probabilities)
      if (!rec.any_stage_click() && !rec.final_click) p += prob;
    return p;
  }

  double p_any_stage_click() const {
    double p = 0.0;
    for (const auto& [rec, prob] : record_probabilities)
      if (rec.any_stage_click()) p += prob;
    return p;
  }
};

namespace detail {

inline void merge_classical(std::vector<CascadeBranch>& branches) {
  std::map<std::pair<DetectorRecord, int>, double> classical;
  std::vector<CascadeBranch> coherent;
  for (auto& b : branches) {
    if (b.coherent())
      coherent.push_back(std::move(b));
    else
      classical[{b.record, b.remaining_n}] += b.weight;
  }
  branches.clear();
  for (auto& b : coherent) branches.push_back(std::move(b));
  for (const auto& [key, weight] : classical) {
    CascadeBranch b = CascadeBranch::fock(key.second, weight);
    b.record = key.first;
    branches.push_back(std::move(b));
  }
}

inline NumberDistribution marginal_occupation(const std::vector<CascadeBranch>& branches,
                                              int n_max) {
  NumberDistribution d;
  d.probs = Eigen::VectorXd::Zero(n_max + 1);
  for (const auto& b : branches) d.probs += b.weight * b.occupation(n_max);
  return d;
}

inline std::vector<StageGeometry> stage_geometries(int stages,
                                                   const std::vector<StageGeometry>& geom) {
  if (stages < 1) throw std::invalid_argument("run_cascade: stages must be >= 1");
  if (geom.size() == 1) return std::vector<StageGeometry>(stages, geom[0]);
  if (static_cast<int>(geom.size()) != stages)
    throw std::invalid_argument("run_cascade: theta list length must be 1 or equal stages");
  return geom;
}

}  // namespace detail

// Exact branch enumeration of the whole cascade for a pure input
// sum_n amps[n] |n,0,0>, ending with the terminal detector, which sees all
// surviving photons. Returned branches are fully classical.
inline CascadeResult run_cascade_pure(const Eigen::VectorXcd& omega_amps, int stages,
                                      const std::vector<StageGeometry>& geom,
                                      const DetectorModel& det, const MediumParams& params,
                                      const CascadeOptions& opts = {}) {
  const std::vector<StageGeometry> thetas = detail::stage_geometries(stages, geom);
  const int n_max = static_cast<int>(omega_amps.size()) - 1;

  CascadeResult result;
  std::vector<CascadeBranch> current{CascadeBranch::pure(omega_amps)};
  result.stage_occupations.push_back(detail::marginal_occupation(current, n_max));

  for (const StageGeometry& g : thetas) {
    std::vector<CascadeBranch> next;
    for (const auto& b : current) {
      auto produced = apply_stage(b, g, det, params, opts);
      next.insert(next.end(), std::make_move_iterator(produced.begin()),
                  std::make_move_iterator(produced.end()));
    }
    detail::merge_classical(next);
    if (next.size() > opts.branch_cap)
      throw std::invalid_argument(
          "run_cascade: branch count " + std::to_string(next.size()) +
          " exceeds the cap; reduce stages or the input truncation");
    current = std::move(next);
    result.stage_occupations.push_back(detail::marginal_occupation(current, n_max));
  }

  // terminal detector: absorbs whatever arrives, cannot resolve the count
  std::map<std::pair<DetectorRecord, int>, double> final_branches;
  for (const auto& b : current) {
    const Eigen::VectorXd occ = b.occupation(n_max);
    for (int n = 0; n <= n_max; ++n) {
      const double w = b.weight * occ(n);
      if (w == 0.0) continue;
      const double q = det.click_probability(n);
      if (q > 0.0) {
        DetectorRecord rec = b.record;
        rec.final_click = true;
        final_branches[{rec, n}] += w * q;
      }
      if (q < 1.0) {
        DetectorRecord rec = b.record;
        rec.final_click = false;
        final_branches[{rec, n}] += w * (1.0 - q);
      }
    }
  }
  for (const auto& [key, weight] : final_branches) {
    CascadeBranch b = CascadeBranch::fock(key.second, weight);
    b.record = key.first;
    result.record_probabilities[b.record] += weight;
    result.branches.push_back(std::move(b));
  }
  return result;
}

// Exact cascade for a Fock or coherent input. Coherent inputs run as a
// classical mixture over photon-number sectors; see InputSpec.
inline CascadeResult run_cascade(const InputSpec& input, int stages,
                                 const std::vector<StageGeometry>& geom,
                                 const DetectorModel& det, const MediumParams& params,
                                 const CascadeOptions& opts = {}) {
  const Eigen::VectorXd weights = input.sector_weights();
  const int n_max = input.max_photons();

  CascadeResult total;
  bool first = true;
  for (int n = 0; n <= n_max; ++n) {
    if (weights(n) == 0.0) continue;
    Eigen::VectorXcd amps = Eigen::VectorXcd::Zero(n_max + 1);
    amps(n) = 1.0;
    CascadeResult part = run_cascade_pure(amps, stages, geom, det, params, opts);
    if (first) {
      total.stage_occupations.assign(part.stage_occupations.size(), NumberDistribution{});
      for (auto& d : total.stage_occupations) d.probs = Eigen::VectorXd::Zero(n_max + 1);
      first = false;
    }
    for (std::size_t s = 0; s < part.stage_occupations.size(); ++s)
      total.stage_occupations[s].probs += weights(n) * part.stage_occupations[s].probs;
    for (const auto& [rec, prob] : part.record_probabilities)
      total.record_probabilities[rec] += weights(n) * prob;
    for (auto& b : part.branches) {
      b.weight *= weights(n);
      total.branches.push_back(std::move(b));
    }
  }
  detail::merge_classical(total.branches);
  return total;
}

inline CascadeResult run_cascade(const InputSpec& input, int stages, StageGeometry geom,
                                 const DetectorModel& det, const MediumParams& params,
                                 const CascadeOptions& opts = {}) {
  return run_cascade(input, stages, std::vector<StageGeometry>{geom}, det, params, opts);
}

// Counter-based splittable stream; every trial gets an independent,
// reproducible generator regardless of execution order.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  static SplitMix64 stream(std::uint64_t seed, std::uint64_t index) {
    SplitMix64 mixer(seed ^ (0x9e3779b97f4a7c15ULL * (index + 1)));
    return SplitMix64(mixer.next());
  }

 private:
  std::uint64_t state_;
};

struct SampleStats {
  long long trials = 0;
  std::map<DetectorRecord, long long> record_counts;
  std::vector<long long> final_occupation_counts;  // photons entering the terminal detector
};

// Monte Carlo cross-check of run_cascade. Every trial follows one classical
// path; frequencies converge to the exact branch weights.
inline SampleStats sample_cascade(const InputSpec& input, int stages, StageGeometry geom,
                                  const DetectorModel& det, const MediumParams& params,
                                  long long trials, std::uint64_t seed) {
  if (trials < 1) throw std::invalid_argument("sample_cascade: trials must be >= 1");
  det.validate();
  params.validate();
  if (stages < 1) throw std::invalid_argument("sample_cascade: stages must be >= 1");

  const Eigen::VectorXd weights = input.sector_weights();
  const int n_max = input.max_photons();

  // per-sector outcome probabilities |xi_j|^2
  std::vector<Eigen::VectorXd> jump(static_cast<std::size_t>(n_max) + 1);
  for (int n = 0; n <= n_max; ++n)
    jump[n] = SectorPropagator(n)
                  .transfer_amplitudes(geom.theta, params.drive_phase)
                  .cwiseAbs2();

  auto draw = [](SplitMix64& rng, const Eigen::VectorXd& probs) {
    const double u = rng.uniform();
    double acc = 0.0;
    for (Eigen::Index k = 0; k + 1 < probs.size(); ++k) {
      acc += probs(k);
      if (u < acc) return static_cast<int>(k);
    }
    return static_cast<int>(probs.size()) - 1;
  };

  SampleStats stats;
  stats.trials = trials;
  stats.final_occupation_counts.assign(static_cast<std::size_t>(n_max) + 1, 0);
  for (long long t = 0; t < trials; ++t) {
    SplitMix64 rng = SplitMix64::stream(seed, static_cast<std::uint64_t>(t));
    int n = draw(rng, weights);
    DetectorRecord rec;
    for (int s = 0; s < stages; ++s) {
      const int j = draw(rng, jump[n]);
      bool click = false;
      if (j >= 1) click = rng.uniform() < det.click_probability(2 * j);
      rec.stage_clicks.push_back(click);
      n -= j;
    }
    rec.final_click = rng.uniform() < det.click_probability(n);
    ++stats.record_counts[rec];
    ++stats.final_occupation_counts[static_cast<std::size_t>(n)];
  }
  return stats;
}

}  // namespace fwm
