#include <catch2/catch_amalgamated.hpp>

#include "fwm/cascade.hpp"

#include <numbers>

using namespace fwm;
using Catch::Matchers::WithinAbs;
using std::numbers::pi;

namespace {

// squared one-pass transfer magnitudes |xi_j^(n)(pi)|^2, frozen from an
// independent evaluation of the closed forms / sector spectra
constexpr double kP0n2 = 0.17058930354506127;  // |xi_0^(2)|^2
constexpr double kP1n2 = 0.14033040869117527;  // |xi_1^(2)|^2
constexpr double kP2n2 = 0.68908028776376345;  // |xi_2^(2)|^2
constexpr double kP0n3 = 0.06597818504711955;  // |xi_0^(3)|^2

Eigen::VectorXcd fock_amps(int n, int n_max) {
  Eigen::VectorXcd amps = Eigen::VectorXcd::Zero(n_max + 1);
  amps(n) = 1.0;
  return amps;
}

double total_weight(const std::vector<CascadeBranch>& branches) {
  double w = 0.0;
  for (const auto& b : branches) w += b.weight;
  return w;
}

// probability that the stage-k detector (1-based) fired
double p_stage_click(const CascadeResult& r, int k) {
  double p = 0.0;
  for (const auto& [rec, prob] : r.record_probabilities)
    if (rec.stage_clicks[static_cast<std::size_t>(k - 1)]) p += prob;
  return p;
}

}  // namespace

TEST_CASE("detector record labels and ordering", "[cascade]") {
  DetectorRecord r;
  r.stage_clicks = {false, true, false};
  REQUIRE(r.label() == "D2");
  r.final_click = true;
  REQUIRE(r.label() == "D2+Dinf");
  r.stage_clicks = {false, false};
  r.final_click = false;
  REQUIRE(r.label() == "D0");
  REQUIRE_FALSE(r.any_stage_click());

  DetectorRecord a, b;
  a.stage_clicks = {false, true};
  b.stage_clicks = {true, false};
  REQUIRE(a < b);
  REQUIRE_FALSE(a == b);
}

TEST_CASE("detector model click probabilities", "[cascade]") {
  DetectorModel det;
  REQUIRE(det.click_probability(0) == 0.0);
  REQUIRE(det.click_probability(1) == 1.0);
  REQUIRE(det.click_probability(4) == 1.0);

  det.efficiency = 0.7;
  REQUIRE_THAT(det.click_probability(2), WithinAbs(1.0 - 0.09, 1e-15));

  det.efficiency = 0.0;
  REQUIRE_THROWS_AS(det.validate(), std::invalid_argument);
  det.efficiency = 1.5;
  REQUIRE_THROWS_AS(det.validate(), std::invalid_argument);
}

TEST_CASE("stage on a single photon at theta = pi is a sign flip", "[cascade]") {
  const CascadeBranch in = CascadeBranch::pure(fock_amps(1, 1));
  const auto out = apply_stage(in, StageGeometry{pi}, DetectorModel{}, MediumParams{});

  REQUIRE_FALSE(out.empty());
  const CascadeBranch& survivor = out.front();
  REQUIRE(survivor.coherent());
  REQUIRE(survivor.record.stage_clicks == std::vector<bool>{false});
  REQUIRE_THAT(survivor.weight, WithinAbs(1.0, 1e-12));
  REQUIRE_THAT(std::abs((*survivor.amps)(1) + 1.0), WithinAbs(0.0, 1e-12));

  // sin(pi) is not exactly zero in floating point; anything beyond the
  // surviving branch must be pure roundoff
  double residual = 0.0;
  for (std::size_t i = 1; i < out.size(); ++i) residual += out[i].weight;
  REQUIRE(residual < 1e-28);
}

TEST_CASE("stage on a two-photon input splits into the three outcomes", "[cascade]") {
  const CascadeBranch in = CascadeBranch::pure(fock_amps(2, 2));
  const auto out = apply_stage(in, StageGeometry{pi}, DetectorModel{}, MediumParams{});

  REQUIRE(out.size() == 3);
  REQUIRE(out[0].coherent());
  REQUIRE_THAT(out[0].weight, WithinAbs(kP0n2, 1e-12));
  REQUIRE(out[0].record.stage_clicks == std::vector<bool>{false});

  // collapsed branches, ordered by (clicked, remaining)
  REQUIRE_FALSE(out[1].coherent());
  REQUIRE(out[1].record.stage_clicks == std::vector<bool>{true});
  REQUIRE(out[1].remaining_n == 0);
  REQUIRE_THAT(out[1].weight, WithinAbs(kP2n2, 1e-12));
  REQUIRE(out[2].remaining_n == 1);
  REQUIRE_THAT(out[2].weight, WithinAbs(kP1n2, 1e-12));

  REQUIRE_THAT(total_weight(out), WithinAbs(1.0, 1e-12));
}

TEST_CASE("vacuum passes through untouched", "[cascade]") {
  const CascadeBranch in = CascadeBranch::pure(fock_amps(0, 0));
  const auto out = apply_stage(in, StageGeometry{pi}, DetectorModel{}, MediumParams{});
  REQUIRE(out.size() == 1);
  REQUIRE_THAT(out[0].weight, WithinAbs(1.0, 1e-15));
  REQUIRE(out[0].record.stage_clicks == std::vector<bool>{false});
}

TEST_CASE("weight is conserved through arbitrary cascades", "[cascade]") {
  const std::vector<InputSpec> inputs = {InputSpec::fock(0), InputSpec::fock(1),
                                         InputSpec::fock(3), InputSpec::coherent(1.3)};
  for (const auto& input : inputs) {
    for (double theta : {pi, 2.0 * pi, 1.234}) {
      for (double eta : {1.0, 0.7}) {
        DetectorModel det;
        det.efficiency = eta;
        const CascadeResult r =
            run_cascade(input, 4, StageGeometry{theta}, det, MediumParams{});
        double total = 0.0;
        for (const auto& [rec, p] : r.record_probabilities) total += p;
        INFO("theta=" << theta << " eta=" << eta);
        REQUIRE_THAT(total, WithinAbs(1.0, 1e-12));
        REQUIRE_THAT(total_weight(r.branches), WithinAbs(1.0, 1e-12));
        for (const auto& dist : r.stage_occupations) REQUIRE_NOTHROW(dist.validate());
      }
    }
  }
}

TEST_CASE("filtering is monotone: survival decays as |xi_0|^(2k)", "[cascade]") {
  struct Case {
    int n;
    double p0;
  };
  for (const Case c : {Case{2, kP0n2}, Case{3, kP0n3}}) {
    const CascadeResult r =
        run_cascade(InputSpec::fock(c.n), 5, StageGeometry{pi}, DetectorModel{}, MediumParams{});
    double previous = 1.0;
    for (int k = 1; k <= 5; ++k) {
      const double survival = r.stage_occupations[static_cast<std::size_t>(k)].probs(c.n);
      REQUIRE_THAT(survival, WithinAbs(std::pow(c.p0, k), 1e-12));
      REQUIRE(survival < previous);
      previous = survival;
    }
  }
}

TEST_CASE("single photon and vacuum are fixed points at theta = pi", "[cascade]") {
  for (int n : {0, 1}) {
    const CascadeResult r =
        run_cascade(InputSpec::fock(n), 6, StageGeometry{pi}, DetectorModel{}, MediumParams{});
    for (const auto& dist : r.stage_occupations)
      REQUIRE_THAT(dist.probs(n), WithinAbs(1.0, 1e-12));
    REQUIRE_THAT(r.p_only_final_click(), WithinAbs(n == 0 ? 0.0 : 1.0, 1e-12));
  }
}

TEST_CASE("coherent branch keeps the pi phase per stage", "[cascade]") {
  CascadeBranch branch = CascadeBranch::pure(fock_amps(1, 1));
  Complex previous = (*branch.amps)(1);
  for (int stage = 0; stage < 5; ++stage) {
    branch = apply_stage(branch, StageGeometry{pi}, DetectorModel{}, MediumParams{}).front();
    const Complex current = (*branch.amps)(1);
    REQUIRE_THAT(std::abs(current + previous), WithinAbs(0.0, 1e-10));  // phase pi per pass
    previous = current;
  }
}

TEST_CASE("two-photon record statistics reconstruct the stage distribution", "[cascade]") {
  const int stages = 6;
  const CascadeResult r = run_cascade(InputSpec::fock(2), stages, StageGeometry{pi},
                                      DetectorModel{}, MediumParams{});
  for (int k = 1; k <= stages; ++k) {
    const double expected = std::pow(kP0n2, k - 1) * (1.0 - kP0n2);
    REQUIRE_THAT(p_stage_click(r, k), WithinAbs(expected, 1e-12));
  }
  // given a click at stage k, the terminal detector fires iff one photon
  // survived: |xi_1|^2 / (|xi_1|^2 + |xi_2|^2)
  for (int k = 1; k <= stages; ++k) {
    double clicked = 0.0, clicked_and_final = 0.0;
    for (const auto& [rec, p] : r.record_probabilities) {
      if (!rec.stage_clicks[static_cast<std::size_t>(k - 1)]) continue;
      clicked += p;
      if (rec.final_click) clicked_and_final += p;
    }
    REQUIRE_THAT(clicked_and_final / clicked, WithinAbs(kP1n2 / (kP1n2 + kP2n2), 1e-12));
  }
}

TEST_CASE("click statistics are independent of the drive phase", "[cascade]") {
  const InputSpec input = InputSpec::coherent(1.1, 6, 1.0);
  std::vector<CascadeResult> results;
  for (double phase : {0.0, pi / 4.0, pi}) {
    MediumParams p;
    p.drive_phase = phase;
    results.push_back(run_cascade(input, 3, StageGeometry{pi}, DetectorModel{}, p));
  }
  for (std::size_t i = 1; i < results.size(); ++i) {
    REQUIRE(results[i].record_probabilities.size() ==
            results[0].record_probabilities.size());
    for (const auto& [rec, p] : results[0].record_probabilities)
      REQUIRE_THAT(results[i].probability(rec), WithinAbs(p, 1e-12));
    for (std::size_t s = 0; s < results[0].stage_occupations.size(); ++s) {
      const auto diff = (results[i].stage_occupations[s].probs -
                         results[0].stage_occupations[s].probs)
                            .cwiseAbs()
                            .maxCoeff();
      REQUIRE_THAT(diff, WithinAbs(0.0, 1e-12));
    }
  }
}

TEST_CASE("inefficient detectors split clicks as 1-(1-eta)^(2j)", "[cascade]") {
  DetectorModel det;
  det.efficiency = 0.7;
  const CascadeResult r =
      run_cascade(InputSpec::fock(2), 1, StageGeometry{pi}, det, MediumParams{});

  // worked out by hand from the one-stage outcome weights
  const double q2 = 1.0 - 0.3 * 0.3;        // 2 photons at a detector
  const double q4 = 1.0 - 0.3 * 0.3 * 0.3 * 0.3;
  const double q1 = 0.7;
  const double expected_only_final = kP0n2 * q2 + kP1n2 * (1.0 - q2) * q1;
  REQUIRE_THAT(r.p_only_final_click(), WithinAbs(expected_only_final, 1e-12));

  const double expected_silent = kP0n2 * (1.0 - q2) + kP1n2 * (1.0 - q2) * (1.0 - q1) +
                                 kP2n2 * (1.0 - q4);
  REQUIRE_THAT(r.p_no_clicks(), WithinAbs(expected_silent, 1e-12));
}

TEST_CASE("coherent filtering drives the ensemble to vacuum and one photon", "[cascade]") {
  const CascadeResult r = run_cascade(InputSpec::coherent(2.25, 20), 8, StageGeometry{pi},
                                      DetectorModel{}, MediumParams{});
  const NumberDistribution& final = r.stage_occupations.back();
  REQUIRE(final.probs(0) + final.probs(1) >= 0.99);

  // spot values from an independent enumeration of the same cascade
  REQUIRE_THAT(r.stage_occupations[1].probs(0), WithinAbs(0.4977712992068489, 1e-9));
  REQUIRE_THAT(r.stage_occupations[4].p_at_least(2), WithinAbs(5.814843750637093e-3, 1e-9));
  REQUIRE_THAT(final.probs(1), WithinAbs(0.3344158324304590, 1e-9));
}

TEST_CASE("per-stage geometry list is validated", "[cascade]") {
  const std::vector<StageGeometry> two = {StageGeometry{pi}, StageGeometry{2.0 * pi}};
  REQUIRE_NOTHROW(
      run_cascade(InputSpec::fock(1), 2, two, DetectorModel{}, MediumParams{}));
  REQUIRE_THROWS_AS(run_cascade(InputSpec::fock(1), 3, two, DetectorModel{}, MediumParams{}),
                    std::invalid_argument);
  REQUIRE_THROWS_AS(run_cascade(InputSpec::fock(1), 0, StageGeometry{pi}, DetectorModel{},
                                MediumParams{}),
                    std::invalid_argument);
}

TEST_CASE("branch cap guards runaway enumerations", "[cascade]") {
  CascadeOptions opts;
  opts.branch_cap = 2;
  REQUIRE_THROWS_WITH(run_cascade(InputSpec::coherent(2.25, 20), 4, StageGeometry{pi},
                                  DetectorModel{}, MediumParams{}, opts),
                      Catch::Matchers::ContainsSubstring("cap"));
}

TEST_CASE("sampling reproduces the exact enumeration", "[cascade]") {
  SECTION("single photon path is deterministic") {
    const SampleStats stats = sample_cascade(InputSpec::fock(1), 3, StageGeometry{pi},
                                             DetectorModel{}, MediumParams{}, 2000, 42);
    REQUIRE(stats.record_counts.size() == 1);
    const auto& [rec, count] = *stats.record_counts.begin();
    REQUIRE(count == 2000);
    REQUIRE_FALSE(rec.any_stage_click());
    REQUIRE(rec.final_click);
  }

  SECTION("two-photon single stage click frequency") {
    const long long trials = 1000000;
    const SampleStats stats = sample_cascade(InputSpec::fock(2), 1, StageGeometry{pi},
                                             DetectorModel{}, MediumParams{}, trials, 7);
    long long clicks = 0;
    for (const auto& [rec, count] : stats.record_counts)
      if (rec.any_stage_click()) clicks += count;
    const double p = 1.0 - kP0n2;  // 0.8294
    const double sigma = std::sqrt(p * (1.0 - p) / trials);
    REQUIRE_THAT(static_cast<double>(clicks) / trials, WithinAbs(p, 3.0 * sigma));
  }

  SECTION("coherent input against exact record probabilities") {
    const InputSpec input = InputSpec::coherent(1.3);
    const long long trials = 50000;
    const CascadeResult exact =
        run_cascade(input, 3, StageGeometry{pi}, DetectorModel{}, MediumParams{});
    const SampleStats stats = sample_cascade(input, 3, StageGeometry{pi}, DetectorModel{},
                                             MediumParams{}, trials, 1234);
    for (const auto& [rec, p] : exact.record_probabilities) {
      if (p < 1e-3) continue;
      const double freq =
          static_cast<double>(stats.record_counts.count(rec) ? stats.record_counts.at(rec) : 0) /
          trials;
      const double sigma = std::sqrt(p * (1.0 - p) / trials);
      INFO("record " << rec.label());
      REQUIRE_THAT(freq, WithinAbs(p, 4.0 * sigma));
    }
  }

  SECTION("fixed seed reproduces, different seed varies") {
    const auto a = sample_cascade(InputSpec::coherent(1.3), 2, StageGeometry{pi},
                                  DetectorModel{}, MediumParams{}, 5000, 99);
    const auto b = sample_cascade(InputSpec::coherent(1.3), 2, StageGeometry{pi},
                                  DetectorModel{}, MediumParams{}, 5000, 99);
    const auto c = sample_cascade(InputSpec::coherent(1.3), 2, StageGeometry{pi},
                                  DetectorModel{}, MediumParams{}, 5000, 100);
    REQUIRE(a.record_counts == b.record_counts);
    REQUIRE(a.final_occupation_counts == b.final_occupation_counts);
    REQUIRE(a.record_counts != c.record_counts);
  }
}
