#include <catch2/catch_amalgamated.hpp>

#include "fwm/oracle.hpp"
#include "test_support.hpp"

#include <numbers>

using namespace fwm;
using Catch::Matchers::WithinAbs;
using std::numbers::pi;

namespace {

constexpr double kXi0Pi = 0.41302457983158977;
constexpr double kXi1Pi = 0.37460700566216761;
constexpr double kXi2Pi = 0.83010859998181169;

struct Charges {
  int q;
  int c;
};

Charges charges_of(int t, int flat) {
  const int m2 = flat % (t + 1);
  const int m1 = (flat / (t + 1)) % (t + 1);
  const int n1 = flat / ((t + 1) * (t + 1));
  return {n1 + m1, m1 - m2};
}

}  // namespace

TEST_CASE("full Hamiltonian matrix elements", "[oracle]") {
  const double phase = 0.4;
  const FullHamiltonian h = build_full_hamiltonian(4, phase);
  const FullFockState probe = FullFockState::vacuum(4);

  SECTION("hermitian") {
    REQUIRE((h.matrix - h.matrix.adjoint()).cwiseAbs().maxCoeff() == 0.0);
  }
  SECTION("two-photon coupling sqrt(2)/2 with the drive phase") {
    const auto elem = h.matrix(probe.index(1, 1, 1), probe.index(2, 0, 0));
    REQUIRE_THAT(std::abs(elem - std::polar(std::sqrt(2.0) / 2.0, phase)),
                 WithinAbs(0.0, 1e-15));
  }
  SECTION("vacuum diagonal vanishes") {
    REQUIRE(std::abs(h.matrix(probe.index(0, 0, 0), probe.index(0, 0, 0))) == 0.0);
  }
  SECTION("single-photon block is the two-state coupling") {
    const auto elem = h.matrix(probe.index(0, 1, 1), probe.index(1, 0, 0));
    REQUIRE_THAT(std::abs(elem - std::polar(1.0, phase)), WithinAbs(0.0, 1e-15));
  }
  SECTION("truncation below one rejected") {
    REQUIRE_THROWS_AS(build_full_hamiltonian(0), std::invalid_argument);
  }
}

TEST_CASE("full Hamiltonian is block diagonal in both charges", "[oracle]") {
  const int t = 3;
  const FullHamiltonian h = build_full_hamiltonian(t, 0.2);
  const int dim = static_cast<int>(h.matrix.rows());
  for (int a = 0; a < dim; ++a) {
    const Charges ca = charges_of(t, a);
    for (int b = 0; b < dim; ++b) {
      const Charges cb = charges_of(t, b);
      if (ca.q != cb.q || ca.c != cb.c) REQUIRE(std::abs(h.matrix(a, b)) == 0.0);
    }
  }
}

TEST_CASE("denominator kernel is annihilated", "[oracle]") {
  REQUIRE(kernel_violation(build_full_hamiltonian(4, 0.7)) == 0.0);
}

TEST_CASE("full propagation reduces exactly to the sector dynamics", "[oracle]") {
  const int t = 4;
  const double phase = 0.3;
  const FullPropagator prop(t, phase);
  for (int n = 1; n <= t; ++n) {
    const SectorPropagator sector(n);
    for (int k = 0; k < 20; ++k) {
      const double theta = test_support::random_theta();
      FullFockState out = prop.propagate(FullFockState::number_state(t, n, 0, 0), theta);
      const Eigen::VectorXcd expected = sector.transfer_amplitudes(theta, phase);

      Eigen::VectorXcd projected(n + 1);
      for (int j = 0; j <= n; ++j) {
        projected(j) = out.amp(n - j, j, j);
        out.amps(out.index(n - j, j, j)) = 0.0;  // what remains is out-of-sector
      }
      const double outside = out.amps.norm();

      INFO("n=" << n << " theta=" << theta);
      REQUIRE_THAT((projected - expected).cwiseAbs().maxCoeff(), WithinAbs(0.0, 1e-8));
      REQUIRE_THAT(outside, WithinAbs(0.0, 1e-12));
    }
  }
}

TEST_CASE("full propagator on the published one- and two-photon passes", "[oracle]") {
  SECTION("pi phase flip of a single photon") {
    const FullFockState out = propagate_full(FullFockState::number_state(4, 1, 0, 0), pi);
    REQUIRE_THAT(std::abs(out.amp(1, 0, 0) + 1.0), WithinAbs(0.0, 1e-10));
  }
  SECTION("two-photon transfer magnitudes") {
    const FullFockState out = propagate_full(FullFockState::number_state(4, 2, 0, 0), pi);
    REQUIRE_THAT(std::abs(out.amp(2, 0, 0)), WithinAbs(kXi0Pi, 1e-10));
    REQUIRE_THAT(std::abs(out.amp(1, 1, 1)), WithinAbs(kXi1Pi, 1e-10));
    REQUIRE_THAT(std::abs(out.amp(0, 2, 2)), WithinAbs(kXi2Pi, 1e-10));
  }
  SECTION("three-photon populations match the sector propagation") {
    const FullFockState out = propagate_full(FullFockState::number_state(4, 3, 0, 0), pi);
    const Eigen::VectorXcd sector = SectorPropagator(3).transfer_amplitudes(pi);
    for (int j = 0; j <= 3; ++j)
      REQUIRE_THAT(std::norm(out.amp(3 - j, j, j)), WithinAbs(std::norm(sector(j)), 1e-10));
  }
  SECTION("truncation guard") {
    REQUIRE_THROWS_AS(propagate_full(FullFockState::number_state(9, 1, 0, 0), pi),
                      std::invalid_argument);
  }
}

TEST_CASE("explicit integration agrees with the spectral propagator", "[oracle]") {
  SECTION("zero time is the identity") {
    const FullFockState in = FullFockState::number_state(2, 2, 0, 0);
    const FullFockState out = integrate_schrodinger(in, 0.0, 16);
    REQUIRE_THAT((out.amps - in.amps).cwiseAbs().maxCoeff(), WithinAbs(0.0, 1e-15));
  }
  SECTION("half cycle of a single photon") {
    const double phase = 0.5;
    const FullFockState out = integrate_schrodinger(FullFockState::number_state(2, 1, 0, 0),
                                                    pi / 2.0, 10000, 1e-8, phase);
    REQUIRE_THAT(std::abs(out.amp(1, 0, 0)), WithinAbs(0.0, 1e-8));
    const std::complex<double> expected = std::complex<double>(0.0, -1.0) * std::polar(1.0, phase);
    REQUIRE_THAT(std::abs(out.amp(0, 1, 1) - expected), WithinAbs(0.0, 1e-8));
  }
  SECTION("two-photon pass against the eigendecomposition route") {
    const FullFockState in = FullFockState::number_state(2, 2, 0, 0);
    const FullFockState spectral = propagate_full(in, pi);
    const FullFockState stepped = integrate_schrodinger(in, pi, 10000);
    REQUIRE_THAT((spectral.amps - stepped.amps).cwiseAbs().maxCoeff(), WithinAbs(0.0, 1e-7));
    REQUIRE_THAT(stepped.norm(), WithinAbs(1.0, 1e-8));
  }
  SECTION("insufficient resolution is reported, not silently accepted") {
    REQUIRE_THROWS_WITH(
        integrate_schrodinger(FullFockState::number_state(2, 2, 0, 0), 4.0 * pi, 3),
        Catch::Matchers::ContainsSubstring("increase steps"));
  }
}

TEST_CASE("charge sector interior predicate", "[oracle]") {
  REQUIRE(charge_sector_interior(4, 0, 4));
  REQUIRE(charge_sector_interior(2, 1, 4));
  REQUIRE_FALSE(charge_sector_interior(4, -1, 4));  // m2 reaches 5
  REQUIRE_FALSE(charge_sector_interior(5, 0, 4));   // q beyond truncation
  REQUIRE_FALSE(charge_sector_interior(2, 3, 4));   // empty ladder
}

TEST_CASE("all three constants of motion commute with H", "[oracle]") {
  for (double phase : {0.0, 0.6}) {
    const ConservationReport report = check_constants_of_motion(4, phase);
    REQUIRE_THAT(report.number_invariant, WithinAbs(0.0, 1e-12));
    REQUIRE_THAT(report.correlation_invariant, WithinAbs(0.0, 1e-12));
    REQUIRE_THAT(report.trilinear_invariant, WithinAbs(0.0, 1e-10));
    REQUIRE(report.pass());
  }
  REQUIRE_THROWS_AS(check_constants_of_motion(1), std::invalid_argument);
}

TEST_CASE("full-space cascade matches the sector cascade on Fock input", "[oracle]") {
  const CascadeResult full =
      run_cascade_full(Eigen::VectorXcd::Unit(3, 2), 4, 2,
                       {StageGeometry{pi}}, MediumParams{});
  const CascadeResult sector =
      run_cascade(InputSpec::fock(2), 2, StageGeometry{pi}, DetectorModel{}, MediumParams{});
  for (const auto& [rec, p] : sector.record_probabilities) {
    if (p < 1e-15) continue;
    REQUIRE_THAT(full.probability(rec), WithinAbs(p, 1e-12));
  }
  for (std::size_t s = 0; s < sector.stage_occupations.size(); ++s) {
    for (int n = 0; n <= 2; ++n)
      REQUIRE_THAT(full.stage_occupations[s].probs(n),
                   WithinAbs(sector.stage_occupations[s].probs(n), 1e-12));
  }
}

TEST_CASE("coherent input: mixture and full superposition are indistinguishable", "[oracle]") {
  SECTION("vacuum input") {
    const MixtureComparison cmp = compare_pure_vs_mixture(0.0, 2, 2, StageGeometry{pi});
    REQUIRE_THAT(cmp.max_deviation(), WithinAbs(0.0, 1e-14));
  }
  SECTION("half a photon on average, three stages") {
    const MixtureComparison cmp = compare_pure_vs_mixture(0.5, 4, 3, StageGeometry{pi});
    REQUIRE(cmp.max_deviation() < 1e-10);
  }
  SECTION("off-cycle stage length") {
    const MixtureComparison cmp = compare_pure_vs_mixture(0.8, 4, 2, StageGeometry{1.7});
    REQUIRE(cmp.max_deviation() < 1e-10);
  }
  SECTION("guard rails") {
    REQUIRE_THROWS_AS(compare_pure_vs_mixture(0.5, 0, 1, StageGeometry{pi}),
                      std::invalid_argument);
    REQUIRE_THROWS_AS(compare_pure_vs_mixture(0.5, 9, 1, StageGeometry{pi}),
                      std::invalid_argument);
  }
}
