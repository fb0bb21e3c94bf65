#pragma once

#include "fwm/cascade.hpp"

#include <algorithm>
#include <complex>
#include <string>
#include <vector>

namespace fwm {

// Everything in this header works on the raw truncated three-mode Fock space
// (n1, m1, m2) with no use of the sector reduction, so it can serve as an
// independent check of it. Dimensions grow as (t+1)^3; keep t small.

inline constexpr int kTruncationGuard = 8;

struct FullFockState {
  int truncation = 0;
  Eigen::VectorXcd amps;  // flat index (n1*(t+1) + m1)*(t+1) + m2

  static FullFockState vacuum(int truncation) {
    return number_state(truncation, 0, 0, 0);
  }

  static FullFockState number_state(int truncation, int n1, int m1, int m2) {
    FullFockState s;
    if (truncation < 1) throw std::invalid_argument("FullFockState: truncation must be >= 1");
    s.truncation = truncation;
    s.amps = Eigen::VectorXcd::Zero(s.dim());
    s.amps(s.index(n1, m1, m2)) = 1.0;
    return s;
  }

  // sum_n cn[n] |n,0,0>, normalized
  static FullFockState omega_superposition(int truncation, const Eigen::VectorXcd& cn) {
    FullFockState s;
    if (truncation < 1) throw std::invalid_argument("FullFockState: truncation must be >= 1");
    if (cn.size() > truncation + 1)
      throw std::invalid_argument("FullFockState: superposition exceeds truncation");
    s.truncation = truncation;
    s.amps = Eigen::VectorXcd::Zero(s.dim());
    for (Eigen::Index n = 0; n < cn.size(); ++n) s.amps(s.index(static_cast<int>(n), 0, 0)) = cn(n);
    const double nrm = s.amps.norm();
    if (!(nrm > 0.0)) throw std::invalid_argument("FullFockState: zero state");
    s.amps /= nrm;
    return s;
  }

  int dim() const { return (truncation + 1) * (truncation + 1) * (truncation + 1); }

  int index(int n1, int m1, int m2) const {
    const int t = truncation;
    if (n1 < 0 || m1 < 0 || m2 < 0 || n1 > t || m1 > t || m2 > t)
      throw std::out_of_range("FullFockState: occupation outside truncation");
    return (n1 * (t + 1) + m1) * (t + 1) + m2;
  }

  std::complex<double> amp(int n1, int m1, int m2) const { return amps(index(n1, m1, m2)); }

  double norm() const { return amps.norm(); }
};

struct FullHamiltonian {
  int truncation = 0;
  double drive_phase = 0.0;
  Eigen::MatrixXcd matrix;  // units of hbar*kappa*|Omega2|*c
};

namespace detail {

// numerator b1+ b2+ a1 e^{i phi} + h.c., optionally divided by the conserved
// charge n1+m1 (the saturation denominator acting as a pseudo-inverse: the
// numerator annihilates the denominator's kernel, so zero-on-kernel is the
// unique consistent extension)
inline Eigen::MatrixXcd three_mode_coupling(int truncation, double drive_phase,
                                            bool divide_by_charge) {
  if (truncation < 1)
    throw std::invalid_argument("build_full_hamiltonian: truncation must be >= 1");
  const int t = truncation;
  const int dim = (t + 1) * (t + 1) * (t + 1);
  auto idx = [t](int n1, int m1, int m2) { return (n1 * (t + 1) + m1) * (t + 1) + m2; };
  Eigen::MatrixXcd h = Eigen::MatrixXcd::Zero(dim, dim);
  const std::complex<double> raise = std::polar(1.0, drive_phase);
  for (int n1 = 1; n1 <= t; ++n1) {
    for (int m1 = 0; m1 + 1 <= t; ++m1) {
      for (int m2 = 0; m2 + 1 <= t; ++m2) {
        double amp = std::sqrt(static_cast<double>(n1) * (m1 + 1) * (m2 + 1));
        if (divide_by_charge) amp /= static_cast<double>(n1 + m1);
        h(idx(n1 - 1, m1 + 1, m2 + 1), idx(n1, m1, m2)) += amp * raise;
        h(idx(n1, m1, m2), idx(n1 - 1, m1 + 1, m2 + 1)) += amp * std::conj(raise);
      }
    }
  }
  return h;
}

}  // namespace detail

inline FullHamiltonian build_full_hamiltonian(int truncation, double drive_phase = 0.0) {
  FullHamiltonian h;
  h.truncation = truncation;
  h.drive_phase = drive_phase;
  h.matrix = detail::three_mode_coupling(truncation, drive_phase, true);
  return h;
}

// The trilinear constant of motion (the interaction's numerator).
inline Eigen::MatrixXcd trilinear_invariant(int truncation, double drive_phase = 0.0) {
  return detail::three_mode_coupling(truncation, drive_phase, false);
}

// H annihilates every state with n1 = m1 = 0; report the worst violation.
inline double kernel_violation(const FullHamiltonian& h) {
  const int t = h.truncation;
  auto idx = [t](int n1, int m1, int m2) { return (n1 * (t + 1) + m1) * (t + 1) + m2; };
  double worst = 0.0;
  for (int m2 = 0; m2 <= t; ++m2)
    worst = std::max(worst, h.matrix.col(idx(0, 0, m2)).norm());
  return worst;
}

class FullPropagator {
 public:
  explicit FullPropagator(FullHamiltonian h) : h_(std::move(h)) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> solver(h_.matrix);
    if (solver.info() != Eigen::Success)
      throw std::runtime_error("FullPropagator: eigendecomposition failed");
    eigvals_ = solver.eigenvalues();
    eigvecs_ = solver.eigenvectors();
  }

  explicit FullPropagator(int truncation, double drive_phase = 0.0)
      : FullPropagator(build_full_hamiltonian(truncation, drive_phase)) {}

  const FullHamiltonian& hamiltonian() const { return h_; }

  FullFockState propagate(const FullFockState& in, double theta) const {
    if (in.truncation != h_.truncation)
      throw std::invalid_argument("FullPropagator: truncation mismatch");
    const Eigen::VectorXcd phases =
        (std::complex<double>(0.0, -theta) * eigvals_.cast<std::complex<double>>().array())
            .exp();
    FullFockState out = in;
    out.amps = eigvecs_ * phases.cwiseProduct(eigvecs_.adjoint() * in.amps);
    return out;
  }

 private:
  FullHamiltonian h_;
  Eigen::VectorXd eigvals_;
  Eigen::MatrixXcd eigvecs_;
};

inline FullFockState propagate_full(const FullFockState& in, double theta,
                                    double drive_phase = 0.0,
                                    int truncation_guard = kTruncationGuard) {
  if (in.truncation > truncation_guard)
    throw std::invalid_argument("propagate_full: truncation exceeds guard (" +
                                std::to_string(truncation_guard) + ")");
  return FullPropagator(in.truncation, drive_phase).propagate(in, theta);
}

// Fixed-step 4th-order integration of i d|psi>/d theta = H |psi>, run at
// `steps` and 2*steps; the difference is the reported accuracy estimate.
inline FullFockState integrate_schrodinger(const FullFockState& in, double theta, int steps,
                                           double halving_tol = 1e-8, double drive_phase = 0.0) {
  if (steps < 1) throw std::invalid_argument("integrate_schrodinger: steps must be >= 1");
  const FullHamiltonian h = build_full_hamiltonian(in.truncation, drive_phase);

  auto integrate = [&](int n_steps) {
    const double dt = theta / n_steps;
    const std::complex<double> minus_i(0.0, -1.0);
    Eigen::VectorXcd psi = in.amps;
    Eigen::VectorXcd k1, k2, k3, k4;
    for (int s = 0; s < n_steps; ++s) {
      k1 = minus_i * (h.matrix * psi);
      k2 = minus_i * (h.matrix * (psi + 0.5 * dt * k1));
      k3 = minus_i * (h.matrix * (psi + 0.5 * dt * k2));
      k4 = minus_i * (h.matrix * (psi + dt * k3));
      psi += (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    return psi;
  };

  const Eigen::VectorXcd coarse = integrate(steps);
  const Eigen::VectorXcd fine = integrate(2 * steps);
  const double estimate = (fine - coarse).cwiseAbs().maxCoeff();
  if (estimate > halving_tol)
    throw std::runtime_error("integrate_schrodinger: step-halving estimate " +
                             std::to_string(estimate) + " above tolerance; increase steps");
  FullFockState out = in;
  out.amps = fine;
  return out;
}

// A charge sector (q = n1+m1, c = m1-m2) whose full ladder fits inside the
// truncation; dynamics restricted to such a sector is exactly the
// untruncated dynamics.
inline bool charge_sector_interior(int q, int c, int truncation) {
  return q >= 0 && q <= truncation && q - c <= truncation && q - std::max(0, c) >= 0;
}

struct ConservationReport {
  int truncation = 0;
  double number_invariant = 0.0;       // ||[H, n1 + m1]||_F
  double correlation_invariant = 0.0;  // ||[H, m1 - m2]||_F
  double trilinear_invariant = 0.0;    // ||[H, T]||_F on interior charge sectors

  double max_norm() const {
    return std::max({number_invariant, correlation_invariant, trilinear_invariant});
  }
  bool pass(double tol = 1e-10) const { return max_norm() < tol; }
};

inline ConservationReport check_constants_of_motion(int truncation, double drive_phase = 0.0) {
  if (truncation < 2)
    throw std::invalid_argument("check_constants_of_motion: truncation must be >= 2");
  const FullHamiltonian h = build_full_hamiltonian(truncation, drive_phase);
  const int t = truncation;
  const int dim = h.matrix.rows();

  Eigen::VectorXd charge_number(dim), charge_correlation(dim);
  std::vector<bool> interior(static_cast<std::size_t>(dim));
  {
    int k = 0;
    for (int n1 = 0; n1 <= t; ++n1)
      for (int m1 = 0; m1 <= t; ++m1)
        for (int m2 = 0; m2 <= t; ++m2, ++k) {
          charge_number(k) = n1 + m1;
          charge_correlation(k) = m1 - m2;
          interior[static_cast<std::size_t>(k)] =
              charge_sector_interior(n1 + m1, m1 - m2, t);
        }
  }

  ConservationReport report;
  report.truncation = truncation;
  report.number_invariant =
      (h.matrix * charge_number.asDiagonal() - charge_number.asDiagonal() * h.matrix).norm();
  report.correlation_invariant =
      (h.matrix * charge_correlation.asDiagonal() -
       charge_correlation.asDiagonal() * h.matrix)
          .norm();

  const Eigen::MatrixXcd trilinear = trilinear_invariant(truncation, drive_phase);
  Eigen::MatrixXcd comm = h.matrix * trilinear - trilinear * h.matrix;
  for (int r = 0; r < dim; ++r)
    for (int c = 0; c < dim; ++c)
      if (!interior[static_cast<std::size_t>(r)] || !interior[static_cast<std::size_t>(c)])
        comm(r, c) = 0.0;
  report.trilinear_invariant = comm.norm();
  return report;
}

// Cascade evolved entirely in the truncated three-mode space, with no
// classicalization of the surviving photon number: every branch keeps
// coherent amplitudes over n1, including after clicks. Stage detectors are
// ideal (efficiency 1). Serves as the reference the sector cascade is
// compared against.
inline CascadeResult run_cascade_full(const Eigen::VectorXcd& omega_amps, int truncation,
                                      int stages, const std::vector<StageGeometry>& geom,
                                      const MediumParams& params,
                                      double prune_below = 1e-20) {
  params.validate();
  const std::vector<StageGeometry> thetas = detail::stage_geometries(stages, geom);
  const int t = truncation;
  const int n_max = static_cast<int>(omega_amps.size()) - 1;
  if (n_max > t)
    throw std::invalid_argument("run_cascade_full: input exceeds truncation");

  const FullPropagator propagator(t, params.drive_phase);

  struct FullBranch {
    double weight;
    DetectorRecord record;
    Eigen::VectorXcd cn;  // normalized amplitudes over n1, generated modes in vacuum
  };

  if (!(omega_amps.norm() > 0.0))
    throw std::invalid_argument("run_cascade_full: zero input state");
  Eigen::VectorXcd c0 = omega_amps / omega_amps.norm();
  c0.conservativeResize(t + 1);
  for (Eigen::Index k = n_max + 1; k <= t; ++k) c0(k) = 0.0;
  std::vector<FullBranch> current{{1.0, {}, c0}};

  CascadeResult result;
  auto marginal = [&](const std::vector<FullBranch>& branches) {
    NumberDistribution d;
    d.probs = Eigen::VectorXd::Zero(n_max + 1);
    for (const auto& b : branches)
      for (int n = 0; n <= n_max; ++n) d.probs(n) += b.weight * std::norm(b.cn(n));
    return d;
  };
  result.stage_occupations.push_back(marginal(current));

  for (const StageGeometry& g : thetas) {
    std::vector<FullBranch> next;
    for (const auto& b : current) {
      FullFockState state = FullFockState::omega_superposition(t, b.cn);
      state = propagator.propagate(state, g.theta);
      // project the generated-mode occupation (j, k); photons are absorbed by
      // the stage detector, leaving the surviving modes in vacuum
      for (int j = 0; j <= t; ++j) {
        for (int k = 0; k <= t; ++k) {
          Eigen::VectorXcd cn = Eigen::VectorXcd::Zero(t + 1);
          for (int n1 = 0; n1 <= t; ++n1) cn(n1) = state.amp(n1, j, k);
          const double p = cn.squaredNorm();
          const double w = b.weight * p;
          if (w <= prune_below) continue;
          FullBranch nb;
          nb.weight = w;
          nb.record = b.record;
          nb.record.stage_clicks.push_back(j + k >= 1);
          nb.cn = cn / std::sqrt(p);
          next.push_back(std::move(nb));
        }
      }
    }
    current = std::move(next);
    result.stage_occupations.push_back(marginal(current));
  }

  for (const auto& b : current) {
    for (int n = 0; n <= t; ++n) {
      const double w = b.weight * std::norm(b.cn(n));
      if (w <= prune_below) continue;
      DetectorRecord rec = b.record;
      rec.final_click = n >= 1;
      result.record_probabilities[rec] += w;
      CascadeBranch out = CascadeBranch::fock(n, w);
      out.record = rec;
      result.branches.push_back(std::move(out));
    }
  }
  detail::merge_classical(result.branches);
  return result;
}

struct MixtureComparison {
  double occupation_deviation = 0.0;
  double record_deviation = 0.0;
  double max_deviation() const { return std::max(occupation_deviation, record_deviation); }
};

// Evolves the coherent input as a genuine superposition over photon-number
// sectors (cross-sector coherences intact, no click classicalization)
// through the full-space cascade and compares every reported observable
// against the mixture-based sector cascade.
inline MixtureComparison compare_pure_vs_mixture(double mean_n, int truncation, int stages,
                                                 StageGeometry geom,
                                                 const MediumParams& params = {}) {
  if (truncation < 1 || truncation > kTruncationGuard)
    throw std::invalid_argument("compare_pure_vs_mixture: truncation out of range");

  // amplitudes of the truncated coherent state; |cn|^2 renormalizes to the
  // same weights the mixture uses
  Eigen::VectorXcd cn(truncation + 1);
  const double alpha = std::sqrt(mean_n);
  for (int n = 0; n <= truncation; ++n)
    cn(n) = std::pow(alpha, n) / std::sqrt(std::tgamma(n + 1.0));
  cn /= cn.norm();

  const CascadeResult full = run_cascade_full(cn, truncation, stages,
                                              std::vector<StageGeometry>{geom}, params);
  const InputSpec input = InputSpec::coherent(mean_n, truncation, /*tail_tol=*/1.0);
  const CascadeResult mixture =
      run_cascade(input, stages, geom, DetectorModel{}, params);

  MixtureComparison cmp;
  for (std::size_t s = 0; s < full.stage_occupations.size(); ++s) {
    const auto& a = full.stage_occupations[s].probs;
    const auto& b = mixture.stage_occupations[s].probs;
    for (Eigen::Index k = 0; k < std::min(a.size(), b.size()); ++k)
      cmp.occupation_deviation = std::max(cmp.occupation_deviation, std::abs(a(k) - b(k)));
  }
  std::map<DetectorRecord, double> records = full.record_probabilities;
  for (const auto& [rec, p] : mixture.record_probabilities) records[rec] -= p;
  for (const auto& [rec, diff] : records)
    cmp.record_deviation = std::max(cmp.record_deviation, std::abs(diff));
  return cmp;
}

}  // namespace fwm
