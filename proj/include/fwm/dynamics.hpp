#pragma once

#include "fwm/fock_sector.hpp"

#include <Eigen/Dense>

#include <array>
#include <complex>
#include <numbers>

namespace fwm {

using Complex = std::complex<double>;

// Medium constants. Only kappa*|Omega2| (rate per unit length) and the drive
// phase enter the dynamics; the atomic constituents are bookkeeping from
// which kappa = g/Delta can be filled in.
struct MediumParams {
  double kappa = 1.0;        // g/Delta
  double drive_mag = 1.0;    // |Omega2|
  double drive_phase = 0.0;  // arg Omega2, radians
  double light_speed = 1.0;

  void validate() const {
    if (!(kappa * drive_mag > 0.0))
      throw std::invalid_argument("MediumParams: kappa*drive_mag must be positive");
  }

  // g = 3 N lambda^2 gamma / (8 pi)
  static MediumParams from_atomic_data(double number_density, double wavelength,
                                       double decay_rate, double detuning,
                                       double drive_mag, double drive_phase = 0.0,
                                       double light_speed = 1.0) {
    if (detuning == 0.0)
      throw std::invalid_argument("MediumParams::from_atomic_data: detuning must be nonzero");
    const double g =
        3.0 * number_density * wavelength * wavelength * decay_rate / (8.0 * std::numbers::pi);
    MediumParams p;
    p.kappa = g / detuning;
    p.drive_mag = drive_mag;
    p.drive_phase = drive_phase;
    p.light_speed = light_speed;
    p.validate();
    return p;
  }
};

// Length of one full single-photon conversion cycle.
inline double cycle_length(const MediumParams& p) {
  p.validate();
  return std::numbers::pi / (p.kappa * p.drive_mag);
}

// One pass through the medium, kept dimensionless: theta = kappa*|Omega2|*L,
// i.e. theta = pi * L / L0.
struct StageGeometry {
  double theta = std::numbers::pi;

  static StageGeometry from_theta(double theta) {
    if (theta < 0.0) throw std::invalid_argument("StageGeometry: theta must be >= 0");
    return StageGeometry{theta};
  }

  static StageGeometry from_length(double length, const MediumParams& p) {
    p.validate();
    return from_theta(p.kappa * p.drive_mag * length);
  }

  double length(const MediumParams& p) const {
    p.validate();
    return theta / (p.kappa * p.drive_mag);
  }
};

// Nearest-neighbor couplings of the n-photon block, in units of
// hbar*kappa*|Omega2|*c. The saturation denominator of the interaction takes
// its conserved value n on this block, leaving
//   <n-j-1, j+1, j+1 | H | n-j, j, j> = (j+1) sqrt(n-j) / n.
inline Eigen::VectorXd sector_couplings(int n) {
  if (n < 0) throw std::invalid_argument("sector_couplings: n must be nonnegative");
  Eigen::VectorXd c(std::max(n, 0));
  for (int j = 0; j < n; ++j)
    c(j) = (j + 1) * std::sqrt(static_cast<double>(n - j)) / static_cast<double>(n);
  return c;
}

// Dimensionless sector Hamiltonian: Hermitian tridiagonal with zero diagonal.
// The raising coupling carries the drive phase e^{i phi}. Sector 0 is the
// 1x1 zero matrix.
inline Eigen::MatrixXcd sector_hamiltonian(int n, double drive_phase = 0.0) {
  const Eigen::VectorXd c = sector_couplings(n);
  Eigen::MatrixXcd h = Eigen::MatrixXcd::Zero(n + 1, n + 1);
  const Complex raise = std::polar(1.0, drive_phase);
  for (int j = 0; j < n; ++j) {
    h(j + 1, j) = c(j) * raise;
    h(j, j + 1) = c(j) * std::conj(raise);
  }
  return h;
}

// Exact propagator for one sector. Internally works in the phase-0 gauge,
// where the Hamiltonian is real symmetric tridiagonal; the drive phase is a
// diagonal gauge transform P = diag(e^{i j phi}) reattached on the way out.
class SectorPropagator {
 public:
  explicit SectorPropagator(int n) : n_(n) {
    if (n < 0) throw std::invalid_argument("SectorPropagator: n must be nonnegative");
    Eigen::MatrixXd h = Eigen::MatrixXd::Zero(n + 1, n + 1);
    const Eigen::VectorXd c = sector_couplings(n);
    for (int j = 0; j < n; ++j) h(j + 1, j) = h(j, j + 1) = c(j);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(h);
    if (solver.info() != Eigen::Success)
      throw std::runtime_error("SectorPropagator: eigendecomposition failed");
    eigvals_ = solver.eigenvalues();
    eigvecs_ = solver.eigenvectors();
  }

  int sector() const { return n_; }
  const Eigen::VectorXd& eigenvalues() const { return eigvals_; }

  // Overlap weights |<j=0|eigvec_k>|^2; degenerate return analysis lives on these.
  Eigen::VectorXd ground_overlaps() const {
    return eigvecs_.row(0).array().square().matrix();
  }

  SectorState propagate(const SectorState& in, double theta, double drive_phase = 0.0) const {
    in.require_valid();
    if (in.n != n_)
      throw std::invalid_argument("SectorPropagator: state belongs to a different sector");
    // strip gauge phases, evolve in the real gauge, reattach
    Eigen::VectorXcd v(n_ + 1);
    for (int j = 0; j <= n_; ++j) v(j) = in.amps(j) * std::polar(1.0, -j * drive_phase);
    const Eigen::VectorXcd phases =
        (Complex(0.0, -theta) * eigvals_.cast<Complex>().array()).exp();
    const Eigen::VectorXcd out =
        eigvecs_.cast<Complex>() * phases.cwiseProduct(eigvecs_.transpose().cast<Complex>() * v);
    SectorState result;
    result.n = n_;
    result.amps.resize(n_ + 1);
    for (int j = 0; j <= n_; ++j) result.amps(j) = out(j) * std::polar(1.0, j * drive_phase);
    return result;
  }

  // One-pass transfer amplitudes xi_j of an initial |n,0,0>.
  Eigen::VectorXcd transfer_amplitudes(double theta, double drive_phase = 0.0) const {
    return propagate(SectorState::fock(n_), theta, drive_phase).amps;
  }

 private:
  int n_;
  Eigen::VectorXd eigvals_;
  Eigen::MatrixXd eigvecs_;
};

inline SectorState propagate_sector(const SectorState& in, StageGeometry geom,
                                    const MediumParams& params) {
  params.validate();
  return SectorPropagator(in.n).propagate(in, geom.theta, params.drive_phase);
}

// Single-photon pass: (cos theta) |1,0,0> - i e^{i phi} (sin theta) |0,1,1>.
inline std::array<Complex, 2> closed_form_n1(double theta, double drive_phase = 0.0) {
  return {Complex(std::cos(theta), 0.0),
          Complex(0.0, -1.0) * std::polar(1.0, drive_phase) * std::sin(theta)};
}

// Two-photon pass. The sector eigenfrequencies are {0, +-sqrt(3/2)}, giving
//   xi0 = (2 + cos(w theta)) / 3
//   xi1 = -(i/sqrt 3) e^{i phi} sin(w theta)
//   xi2 = -(2 sqrt 2 / 3) e^{2 i phi} sin^2(w theta / 2)
// with w = sqrt(3/2).
inline std::array<Complex, 3> closed_form_n2(double theta, double drive_phase = 0.0) {
  const double w = std::sqrt(1.5);
  const Complex phase = std::polar(1.0, drive_phase);
  const double s = std::sin(w * theta);
  const double half = std::sin(0.5 * w * theta);
  return {Complex((2.0 + std::cos(w * theta)) / 3.0, 0.0),
          Complex(0.0, -1.0 / std::sqrt(3.0)) * phase * s,
          Complex(-2.0 * std::sqrt(2.0) / 3.0, 0.0) * phase * phase * half * half};
}

}  // namespace fwm
