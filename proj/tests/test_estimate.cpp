#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <set>
#include <vector>

#include "helpers.hpp"

using demsm::Model;
using demsm::Sample;
using demsm::SampleRow;
using demsm::SensitivitySpec;

namespace {

SensitivitySpec worked_spec() {
  SensitivitySpec spec;
  spec.lam = demsm::LambdaPair(0.5, 2.0);
  spec.gam = demsm::GammaPair(0.5, 2.0);
  spec.gam_prime = demsm::GammaPair(0.5, 2.0);
  return spec;
}

// One row per (y, t) combination over y in {0, 1, 2}: the empirical law is
// the worked single-stratum instance with e = 1/2 and uniform arms.
Sample exact_sample() {
  Sample s;
  for (int t : {0, 1})
    for (double y : {0.0, 1.0, 2.0}) s.rows.push_back({y, t, "s"});
  return s;
}

// Random two-stratum sample where both arms of both strata are guaranteed
// at least one row, so plug-in bounds always exist.
Sample random_sample(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> extra(10, 40);
  std::uniform_real_distribution<double> y(-2.0, 2.0);
  std::bernoulli_distribution arm(0.5);
  std::bernoulli_distribution which(0.5);
  Sample s;
  for (const char* x : {"east", "west"}) {
    s.rows.push_back({y(rng), 0, x});
    s.rows.push_back({y(rng), 1, x});
  }
  const int n = extra(rng);
  for (int i = 0; i < n; ++i)
    s.rows.push_back({y(rng), arm(rng) ? 1 : 0, which(rng) ? "east" : "west"});
  return s;
}

}  // namespace

TEST_CASE("sample validation rejects malformed rows") {
  CHECK_THROWS_AS(Sample{}.validate(), demsm::EmptySample);

  Sample bad_t;
  bad_t.rows.push_back({1.0, 2, "a"});
  CHECK_THROWS_AS(bad_t.validate(), demsm::DataError);

  Sample nan_y;
  nan_y.rows.push_back({std::numeric_limits<double>::quiet_NaN(), 0, "a"});
  CHECK_THROWS_AS(nan_y.validate(), demsm::DataError);

  Sample inf_y;
  inf_y.rows.push_back({std::numeric_limits<double>::infinity(), 1, "a"});
  CHECK_THROWS_AS(inf_y.validate(), demsm::DataError);
}

TEST_CASE("empirical law aggregates cells into strata") {
  Sample s;
  s.rows.push_back({0.0, 1, "a"});
  s.rows.push_back({2.0, 1, "a"});
  s.rows.push_back({1.0, 0, "a"});
  s.rows.push_back({1.0, 0, "a"});
  const auto law = demsm::empirical_observed_law(s);

  REQUIRE(law.strata.size() == 1);
  const auto& st = law.strata.front();
  CHECK(st.id == "a");
  CHECK(st.weight == 1.0);
  CHECK(st.propensity == 0.5);
  REQUIRE(st.dist1.has_value());
  REQUIRE(st.dist0.has_value());
  CHECK(st.dist1->support() == std::vector<double>{0.0, 2.0});
  CHECK(st.dist1->probs()[0] == Catch::Approx(0.5).margin(1e-15));
  CHECK(st.dist0->size() == 1);
  CHECK(st.dist0->mean() == 1.0);
}

TEST_CASE("strata follow lexicographic label order with frequency weights") {
  Sample s;
  for (const char* x : {"b", "a", "c10", "c2", "b", "a", "a", "b"}) {
    s.rows.push_back({0.0, 0, x});
    s.rows.push_back({1.0, 1, x});
  }
  const auto law = demsm::empirical_observed_law(s);
  REQUIRE(law.strata.size() == 4);
  CHECK(law.strata[0].id == "a");
  CHECK(law.strata[1].id == "b");
  CHECK(law.strata[2].id == "c10");
  CHECK(law.strata[3].id == "c2");
  CHECK(law.strata[0].weight == Catch::Approx(6.0 / 16.0).margin(1e-15));
  CHECK(law.strata[2].weight == Catch::Approx(2.0 / 16.0).margin(1e-15));
  double total = 0.0;
  for (const auto& st : law.strata) total += st.weight;
  CHECK(total == Catch::Approx(1.0).margin(1e-12));
}

TEST_CASE("an arm never observed in a cell stays absent") {
  Sample s;
  s.rows.push_back({1.0, 1, "solo"});
  s.rows.push_back({2.0, 1, "solo"});
  const auto law = demsm::empirical_observed_law(s);
  REQUIRE(law.strata.size() == 1);
  CHECK(law.strata.front().propensity == 1.0);
  CHECK(law.strata.front().dist1.has_value());
  CHECK_FALSE(law.strata.front().dist0.has_value());

  // Bounds over such a law cannot be formed while the cell carries weight.
  CHECK_THROWS_AS(demsm::aggregate_bounds(law, worked_spec(), Model::demsm),
                  demsm::MissingStratumDistribution);
}

TEST_CASE("plug-in bounds on the exact sample hit the worked values") {
  const Sample s = exact_sample();
  const auto spec = worked_spec();

  const auto de = demsm::plugin_bounds(s, spec, Model::demsm);
  CHECK(de.mu1.lo == Catch::Approx(0.875).margin(1e-12));
  CHECK(de.mu1.hi == Catch::Approx(1.125).margin(1e-12));
  CHECK(de.mu0.lo == Catch::Approx(0.875).margin(1e-12));
  CHECK(de.mu0.hi == Catch::Approx(1.125).margin(1e-12));
  CHECK(de.ate.lo == Catch::Approx(-0.25).margin(1e-12));
  CHECK(de.ate.hi == Catch::Approx(0.25).margin(1e-12));
  CHECK(de.ate_ref == Catch::Approx(0.0).margin(1e-12));

  const auto ms = demsm::plugin_bounds(s, spec, Model::msm);
  CHECK(ms.ate.lo == Catch::Approx(-0.5).margin(1e-12));
  CHECK(ms.ate.hi == Catch::Approx(0.5).margin(1e-12));

  SensitivitySpec point = spec;
  point.lam = demsm::LambdaPair(1.0, 1.0);
  point.gam = demsm::GammaPair(1.0, 1.0);
  point.gam_prime = demsm::GammaPair(1.0, 1.0);
  const auto exact = demsm::plugin_bounds(s, point, Model::demsm);
  CHECK(exact.ate.lo == Catch::Approx(0.0).margin(1e-12));
  CHECK(exact.ate.hi == Catch::Approx(0.0).margin(1e-12));
  CHECK(exact.mu1.lo == Catch::Approx(1.0).margin(1e-12));
}

TEST_CASE("plug-in demsm bounds nest inside msm bounds on random samples") {
  std::mt19937_64 rng(4402);
  for (int rep = 0; rep < 50; ++rep) {
    const Sample s = random_sample(rng);
    SensitivitySpec spec;
    spec.lam = testutil::random_lambda(rng);
    spec.gam = testutil::random_gamma(rng);
    spec.gam_prime = testutil::random_gamma(rng);
    const auto de = demsm::plugin_bounds(s, spec, Model::demsm);
    const auto ms = demsm::plugin_bounds(s, spec, Model::msm);
    INFO("rep " << rep);
    CHECK(de.ate.lo >= ms.ate.lo - 1e-12);
    CHECK(de.ate.hi <= ms.ate.hi + 1e-12);
    CHECK(de.mu1.lo >= ms.mu1.lo - 1e-12);
    CHECK(de.mu1.hi <= ms.mu1.hi + 1e-12);
    CHECK(de.ate.lo <= de.ate_ref + 1e-12);
    CHECK(de.ate.hi >= de.ate_ref - 1e-12);
  }
}

TEST_CASE("bootstrap intervals are deterministic and row-order independent") {
  std::mt19937_64 rng(97);
  Sample s = random_sample(rng);
  const auto spec = worked_spec();

  const auto a = demsm::bootstrap_ci(s, spec, Model::demsm, 200, 0.95, 12345);
  const auto b = demsm::bootstrap_ci(s, spec, Model::demsm, 200, 0.95, 12345);
  CHECK(a.ate_lo.lo == b.ate_lo.lo);
  CHECK(a.ate_hi.hi == b.ate_hi.hi);
  CHECK(a.mu1_lo.lo == b.mu1_lo.lo);
  CHECK(a.mu0_hi.hi == b.mu0_hi.hi);

  Sample shuffled = s;
  std::shuffle(shuffled.rows.begin(), shuffled.rows.end(), rng);
  const auto c = demsm::bootstrap_ci(shuffled, spec, Model::demsm, 200, 0.95, 12345);
  CHECK(a.ate_lo.lo == c.ate_lo.lo);
  CHECK(a.ate_lo.hi == c.ate_lo.hi);
  CHECK(a.ate_hi.lo == c.ate_hi.lo);
  CHECK(a.ate_hi.hi == c.ate_hi.hi);
  CHECK(a.mu1_hi.hi == c.mu1_hi.hi);

  const auto d = demsm::bootstrap_ci(s, spec, Model::demsm, 200, 0.95, 54321);
  const bool any_differs = a.ate_lo.lo != d.ate_lo.lo || a.ate_hi.hi != d.ate_hi.hi ||
                           a.mu1_lo.lo != d.mu1_lo.lo;
  CHECK(any_differs);

  // Point estimates are the plug-in bounds and metadata echoes the request.
  const auto point = demsm::plugin_bounds(s, spec, Model::demsm);
  CHECK(a.ate_lo.estimate == point.ate.lo);
  CHECK(a.ate_hi.estimate == point.ate.hi);
  CHECK(a.mu1_lo.estimate == point.mu1.lo);
  CHECK(a.replicates == 200);
  CHECK(a.level == 0.95);
  CHECK(a.seed == 12345);
  CHECK(a.ate_lo.lo <= a.ate_lo.hi);
  CHECK(a.mu0_hi.lo <= a.mu0_hi.hi);

  // A narrower confidence level nests inside a wider one.
  const auto tight = demsm::bootstrap_ci(s, spec, Model::demsm, 200, 0.5, 12345);
  CHECK(tight.ate_lo.lo >= a.ate_lo.lo - 1e-15);
  CHECK(tight.ate_lo.hi <= a.ate_lo.hi + 1e-15);
  CHECK(tight.ate_hi.lo >= a.ate_hi.lo - 1e-15);
  CHECK(tight.ate_hi.hi <= a.ate_hi.hi + 1e-15);
}

TEST_CASE("bootstrap rejects bad configuration") {
  const Sample s = exact_sample();
  const auto spec = worked_spec();
  CHECK_THROWS_AS(demsm::bootstrap_ci(s, spec, Model::demsm, 99, 0.95, 1),
                  demsm::ValidationError);
  CHECK_THROWS_AS(demsm::bootstrap_ci(s, spec, Model::demsm, 200, 0.0, 1),
                  demsm::ValidationError);
  CHECK_THROWS_AS(demsm::bootstrap_ci(s, spec, Model::demsm, 200, 1.0, 1),
                  demsm::ValidationError);
  CHECK_THROWS_AS(demsm::bootstrap_ci(s, spec, Model::demsm, 200, -0.1, 1),
                  demsm::ValidationError);
}

TEST_CASE("bootstrap survives a rare stratum through deterministic redraws") {
  std::mt19937_64 rng(2026);
  std::uniform_real_distribution<double> y(-1.0, 1.0);
  Sample s;
  s.rows.push_back({0.5, 1, "rare"});
  s.rows.push_back({-0.5, 0, "rare"});
  for (int i = 0; i < 28; ++i) s.rows.push_back({y(rng), i % 2, "common"});
  const auto spec = worked_spec();

  // Losing one of the two "rare" rows is likely in any given resample, so
  // the redraw path runs many times; the result must stay reproducible.
  const auto a = demsm::bootstrap_ci(s, spec, Model::demsm, 150, 0.9, 7);
  const auto b = demsm::bootstrap_ci(s, spec, Model::demsm, 150, 0.9, 7);
  CHECK(a.ate_lo.lo == b.ate_lo.lo);
  CHECK(a.ate_hi.hi == b.ate_hi.hi);
  CHECK(a.replicates == 150);
  CHECK(std::isfinite(a.ate_lo.lo));
  CHECK(a.ate_lo.lo <= a.ate_hi.hi);
}

TEST_CASE("percentile helper interpolates order statistics") {
  const std::vector<double> v{3.0, 1.0, 2.0};
  CHECK(demsm::detail::percentile(v, 0.0) == 1.0);
  CHECK(demsm::detail::percentile(v, 1.0) == 3.0);
  CHECK(demsm::detail::percentile(v, 0.5) == 2.0);
  CHECK(demsm::detail::percentile(v, 0.25) == Catch::Approx(1.5).margin(1e-15));
  CHECK(demsm::detail::percentile({7.0}, 0.3) == 7.0);
}

TEST_CASE("seed mixing yields distinct replicate streams") {
  std::set<std::uint64_t> seen;
  for (std::uint64_t b = 0; b < 1000; ++b) seen.insert(demsm::detail::mix_seed(42, b));
  CHECK(seen.size() == 1000);
  CHECK(demsm::detail::mix_seed(1, 0) != demsm::detail::mix_seed(2, 0));
}
