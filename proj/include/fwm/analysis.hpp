#pragma once

#include "fwm/cascade.hpp"

#include <algorithm>
#include <vector>

namespace fwm {

namespace detail {

// |<n,0,0| U_n(theta) |n,0,0>|^2 written on the sector spectrum:
//   1 - R(theta) = 2 sum_{a<b} w_a w_b (1 - cos((lambda_a - lambda_b) theta))
// with w the ground-overlap weight per distinct eigenvalue. Exact returns
// exist iff the eigenvalue gaps are commensurate.
struct ReturnSpectrum {
  std::vector<double> gaps;
  std::vector<double> pair_weights;

  explicit ReturnSpectrum(int n, double degeneracy_tol = 1e-9) {
    const SectorPropagator prop(n);
    const Eigen::VectorXd& lambda = prop.eigenvalues();
    const Eigen::VectorXd overlap = prop.ground_overlaps();
    std::vector<double> values;
    std::vector<double> weights;
    for (Eigen::Index k = 0; k < lambda.size(); ++k) {
      if (!values.empty() && std::abs(lambda(k) - values.back()) < degeneracy_tol) {
        weights.back() += overlap(k);
      } else {
        values.push_back(lambda(k));
        weights.push_back(overlap(k));
      }
    }
    for (std::size_t a = 0; a < values.size(); ++a) {
      for (std::size_t b = a + 1; b < values.size(); ++b) {
        gaps.push_back(values[b] - values[a]);
        pair_weights.push_back(weights[a] * weights[b]);
      }
    }
  }

  double deficit(double theta) const {  // 1 - R
    double d = 0.0;
    for (std::size_t k = 0; k < gaps.size(); ++k)
      d += 2.0 * pair_weights[k] * (1.0 - std::cos(gaps[k] * theta));
    return d;
  }

  double deficit_derivative(double theta) const {
    double d = 0.0;
    for (std::size_t k = 0; k < gaps.size(); ++k)
      d += 2.0 * pair_weights[k] * gaps[k] * std::sin(gaps[k] * theta);
    return d;
  }
};

}  // namespace detail

// Probability that an n-photon input fully returns to |n,0,0> after one pass.
inline double return_probability(int n, double theta) {
  if (n < 0) throw std::invalid_argument("return_probability: n must be nonnegative");
  if (n == 0) return 1.0;
  return std::min(1.0, std::max(0.0, 1.0 - detail::ReturnSpectrum(n).deficit(theta)));
}

// Probability that the i-th stage detector fires on a two-photon input with
// per-stage phase theta: |xi0|^{2i-2} (1 - |xi0|^2).
inline double detector_firing_probability(int stage_index, double theta) {
  if (stage_index < 1)
    throw std::invalid_argument("detector_firing_probability: stage index must be >= 1");
  const double p0 = std::norm(closed_form_n2(theta)[0]);
  return std::pow(p0, stage_index - 1) * (1.0 - p0);
}

// Probability that a two-photon input leaves the single-photon signature
// (no stage detector fires, only the terminal one): |xi0|^{2 stages}.
inline double misidentification_probability(int stages, double theta) {
  if (stages < 1)
    throw std::invalid_argument("misidentification_probability: stages must be >= 1");
  return std::pow(std::norm(closed_form_n2(theta)[0]), stages);
}

struct StageMetrics {
  double p0 = 0.0;
  double p1 = 0.0;
  double p_ge2 = 0.0;
};

inline std::vector<StageMetrics> filter_metrics(const std::vector<NumberDistribution>& history) {
  if (history.empty()) throw std::invalid_argument("filter_metrics: empty history");
  std::vector<StageMetrics> out;
  out.reserve(history.size());
  for (const auto& dist : history) {
    StageMetrics m;
    m.p0 = dist.probs.size() > 0 ? dist.probs(0) : 0.0;
    m.p1 = dist.probs.size() > 1 ? dist.probs(1) : 0.0;
    m.p_ge2 = dist.p_at_least(2);
    out.push_back(m);
  }
  return out;
}

struct ReturnSearchOptions {
  double theta_max = 40.0 * std::numbers::pi;
  double grid_step = std::numbers::pi / 200.0;
  double tie_tol = 1e-12;  // returns this close to the best count as ties
};

struct SectorReturn {
  int n = 0;
  double theta = 0.0;
  double return_probability = 0.0;
  bool exact = false;  // 1 - R below the requested tolerance
};

// Smallest theta > 0 maximizing the one-pass return probability of sector n.
// Candidates are the interior local maxima of R on the grid (theta -> 0 is a
// trivial supremum for incommensurate spectra and is excluded by treating
// R(0) = 1 as the left neighbor of the first grid point); each candidate is
// refined by bisection on dR/dtheta. Ties within tie_tol resolve to the
// smallest theta.
inline SectorReturn tune_length_for_sector(int n, double tolerance = 1e-12,
                                           const ReturnSearchOptions& opts = {}) {
  if (n < 1) throw std::invalid_argument("tune_length_for_sector: n must be >= 1");
  if (!(opts.grid_step > 0.0) || !(opts.theta_max > opts.grid_step))
    throw std::invalid_argument("tune_length_for_sector: bad search options");

  const detail::ReturnSpectrum spectrum(n);

  const int count = static_cast<int>(opts.theta_max / opts.grid_step);
  std::vector<double> deficit(static_cast<std::size_t>(count) + 1);
  deficit[0] = 0.0;  // theta = 0
  for (int i = 1; i <= count; ++i) deficit[static_cast<std::size_t>(i)] = spectrum.deficit(i * opts.grid_step);

  struct Candidate {
    double theta;
    double deficit;
  };
  std::vector<Candidate> candidates;
  for (int i = 1; i < count; ++i) {
    const double d = deficit[static_cast<std::size_t>(i)];
    if (d > deficit[static_cast<std::size_t>(i) - 1] ||
        d > deficit[static_cast<std::size_t>(i) + 1])
      continue;

    // refine: the deficit is smooth and locally quadratic, so bisect its
    // derivative across the bracketing grid cells
    double lo = (i - 1) * opts.grid_step;
    double hi = (i + 1) * opts.grid_step;
    if (spectrum.deficit_derivative(lo) > 0.0 || spectrum.deficit_derivative(hi) < 0.0) {
      candidates.push_back({i * opts.grid_step, d});
      continue;
    }
    for (int iter = 0; iter < 200 && hi - lo > 1e-16 * std::max(1.0, hi); ++iter) {
      const double mid = 0.5 * (lo + hi);
      if (spectrum.deficit_derivative(mid) < 0.0)
        lo = mid;
      else
        hi = mid;
    }
    const double theta = 0.5 * (lo + hi);
    candidates.push_back({theta, spectrum.deficit(theta)});
  }
  if (candidates.empty())
    throw std::runtime_error("tune_length_for_sector: no return candidate in search window");

  double best = candidates.front().deficit;
  for (const auto& c : candidates) best = std::min(best, c.deficit);
  const Candidate* chosen = nullptr;
  for (const auto& c : candidates) {
    if (c.deficit <= best + opts.tie_tol) {
      chosen = &c;
      break;  // grid order is ascending in theta
    }
  }

  SectorReturn result;
  result.n = n;
  result.theta = chosen->theta;
  result.return_probability = std::min(1.0, std::max(0.0, 1.0 - chosen->deficit));
  result.exact = chosen->deficit < tolerance;
  return result;
}

}  // namespace fwm
