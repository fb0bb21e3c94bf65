#pragma once

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace fwm {

inline constexpr double kNormTol = 1e-12;

// Basis of the n-photon invariant subspace. The two conserved charges
// (photon number in Omega1 + E1, and the E1/E2 pairing) force every
// occupation triple reachable from |n,0,0> into the pattern (n-j, j, j).
struct SectorBasis {
  int n = 0;
  std::vector<std::array<int, 3>> states;  // (omega1, e1, e2) for j = 0..n
};

inline SectorBasis sector_basis(int n) {
  if (n < 0) throw std::invalid_argument("sector_basis: n must be nonnegative");
  SectorBasis basis;
  basis.n = n;
  basis.states.reserve(static_cast<std::size_t>(n) + 1);
  for (int j = 0; j <= n; ++j) basis.states.push_back({n - j, j, j});
  return basis;
}

// Amplitudes over one photon-number sector; amps[j] multiplies |n-j, j, j>.
struct SectorState {
  int n = 0;
  Eigen::VectorXcd amps;

  // |n,0,0>: everything still in the Omega1 field
  static SectorState fock(int n) {
    if (n < 0) throw std::invalid_argument("SectorState::fock: n must be nonnegative");
    SectorState s;
    s.n = n;
    s.amps = Eigen::VectorXcd::Zero(n + 1);
    s.amps(0) = 1.0;
    return s;
  }

  double norm() const { return amps.norm(); }
  bool normalized(double tol = kNormTol) const { return std::abs(norm() - 1.0) <= tol; }

  void require_valid() const {
    if (amps.size() != n + 1)
      throw std::invalid_argument("SectorState: amplitude vector must have n+1 entries");
    if (!normalized())
      throw std::invalid_argument("SectorState: state is not normalized");
  }
};

// Probabilities over the Omega1 photon number 0..n_max.
struct NumberDistribution {
  Eigen::VectorXd probs;

  double mean() const {
    double m = 0.0;
    for (Eigen::Index k = 0; k < probs.size(); ++k) m += static_cast<double>(k) * probs(k);
    return m;
  }

  double p_at_least(int k) const {
    if (k <= 0) return probs.sum();
    if (k >= probs.size()) return 0.0;
    return probs.tail(probs.size() - k).sum();
  }

  void validate(double tol = kNormTol) const {
    for (Eigen::Index k = 0; k < probs.size(); ++k) {
      if (probs(k) < -tol || probs(k) > 1.0 + tol)
        throw std::runtime_error("NumberDistribution: entry outside [0,1]");
    }
    if (std::abs(probs.sum() - 1.0) > tol)
      throw std::runtime_error("NumberDistribution: probabilities do not sum to 1");
  }
};

inline double poisson_pmf(double mean, int k) {
  if (k == 0) return std::exp(-mean);
  return std::exp(static_cast<double>(k) * std::log(mean) - mean - std::lgamma(k + 1.0));
}

// Smallest cutoff whose Poisson tail mass stays below tail_tol.
inline int default_coherent_truncation(double mean_n, double tail_tol = 1e-8) {
  if (mean_n < 0) throw std::invalid_argument("default_coherent_truncation: mean_n must be >= 0");
  double cumulative = 0.0;
  constexpr int kMax = 10000;
  for (int n = 0; n <= kMax; ++n) {
    cumulative += poisson_pmf(mean_n, n);
    if (1.0 - cumulative < tail_tol) return n;
  }
  throw std::invalid_argument("default_coherent_truncation: mean_n too large");
}

struct CoherentWeights {
  Eigen::VectorXd probs;  // renormalized over 0..truncation
  double tail_mass = 0.0; // discarded Poisson mass before renormalization
};

// Photon-number statistics of a coherent input, renormalized to the cutoff.
// The truncation must leave a tail below tail_tol; otherwise the error names
// the truncation that would.
inline CoherentWeights coherent_sector_weights(double mean_n, int truncation,
                                               double tail_tol = 1e-8) {
  if (mean_n < 0) throw std::invalid_argument("coherent_sector_weights: mean_n must be >= 0");
  if (truncation < 0)
    throw std::invalid_argument("coherent_sector_weights: truncation must be >= 0");
  CoherentWeights w;
  w.probs = Eigen::VectorXd::Zero(truncation + 1);
  double total = 0.0;
  for (int n = 0; n <= truncation; ++n) {
    w.probs(n) = poisson_pmf(mean_n, n);
    total += w.probs(n);
  }
  w.tail_mass = std::max(0.0, 1.0 - total);
  if (w.tail_mass >= tail_tol) {
    throw std::invalid_argument(
        "coherent_sector_weights: truncation " + std::to_string(truncation) +
        " leaves tail mass " + std::to_string(w.tail_mass) + "; need truncation >= " +
        std::to_string(default_coherent_truncation(mean_n, tail_tol)));
  }
  w.probs /= total;
  return w;
}

// Input wave packet: a Fock state or a coherent state handled as a classical
// mixture over photon-number sectors. The dynamics is block-diagonal in the
// total photon number and every reported observable is diagonal in it, so
// the mixture reproduces the coherent input exactly (checked against the
// full-space propagation in the oracle module).
struct InputSpec {
  enum class Kind { Fock, Coherent };

  Kind kind = Kind::Fock;
  int photons = 0;       // Fock occupation
  double mean_n = 0.0;   // Coherent mean photon number
  int truncation = 0;    // Coherent sector cutoff
  double tail_tol = 1e-8;

  static InputSpec fock(int n) {
    if (n < 0) throw std::invalid_argument("InputSpec::fock: n must be nonnegative");
    InputSpec in;
    in.kind = Kind::Fock;
    in.photons = n;
    return in;
  }

  static InputSpec coherent(double mean_n, int truncation = -1, double tail_tol = 1e-8) {
    if (mean_n < 0) throw std::invalid_argument("InputSpec::coherent: mean_n must be >= 0");
    InputSpec in;
    in.kind = Kind::Coherent;
    in.mean_n = mean_n;
    in.tail_tol = tail_tol;
    in.truncation =
        truncation >= 0 ? truncation : default_coherent_truncation(mean_n, tail_tol);
    return in;
  }

  int max_photons() const { return kind == Kind::Fock ? photons : truncation; }

  // Mixture weights over the total photon number 0..max_photons().
  Eigen::VectorXd sector_weights() const {
    if (kind == Kind::Fock) {
      Eigen::VectorXd w = Eigen::VectorXd::Zero(photons + 1);
      w(photons) = 1.0;
      return w;
    }
    return coherent_sector_weights(mean_n, truncation, tail_tol).probs;
  }
};

}  // namespace fwm
