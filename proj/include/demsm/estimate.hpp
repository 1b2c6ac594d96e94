#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "demsm/bounds.hpp"
#include "demsm/errors.hpp"

namespace demsm {

struct SampleRow {
  double y = 0.0;
  int t = 0;
  std::string x;
};

struct Sample {
  std::vector<SampleRow> rows;

  void validate() const {
    if (rows.empty()) throw EmptySample("sample has no rows");
    for (const auto& r : rows) {
      if (r.t != 0 && r.t != 1)
        throw DataError("treatment indicator must be 0 or 1, got " + std::to_string(r.t));
      if (!std::isfinite(r.y)) throw DataError("outcome values must be finite");
    }
  }
};

/// Empirical observed law: strata are the distinct covariate labels (in
/// lexicographic order), weights are cell frequencies, propensities are
/// within-cell treated fractions, and each observed arm becomes the
/// empirical outcome distribution. An arm never observed in a cell is left
/// absent rather than invented.
inline ObservedLaw empirical_observed_law(const Sample& s) {
  s.validate();
  struct Cell {
    std::vector<std::pair<double, double>> arm1, arm0;
  };
  std::map<std::string, Cell> cells;
  for (const auto& r : s.rows) {
    auto& c = cells[r.x];
    (r.t == 1 ? c.arm1 : c.arm0).emplace_back(r.y, 1.0);
  }
  const double n = static_cast<double>(s.rows.size());
  ObservedLaw law;
  for (auto& [id, c] : cells) {
    Stratum st;
    st.id = id;
    const double n1 = static_cast<double>(c.arm1.size());
    const double n0 = static_cast<double>(c.arm0.size());
    st.weight = (n1 + n0) / n;
    st.propensity = n1 / (n1 + n0);
    if (!c.arm1.empty()) st.dist1 = WeightedDistribution::from_pairs(c.arm1);
    if (!c.arm0.empty()) st.dist0 = WeightedDistribution::from_pairs(c.arm0);
    law.strata.push_back(std::move(st));
  }
  return law;
}

/// Plug-in bounds: the aggregate bounds of the empirical observed law.
inline BoundsReport plugin_bounds(const Sample& s, const SensitivitySpec& spec, Model model) {
  return aggregate_bounds(empirical_observed_law(s), spec, model);
}

struct EndpointCI {
  double estimate = 0.0;
  double lo = 0.0;
  double hi = 0.0;
};

struct BootstrapCI {
  EndpointCI mu1_lo, mu1_hi, mu0_lo, mu0_hi, ate_lo, ate_hi;
  int replicates = 0;
  double level = 0.0;
  std::uint64_t seed = 0;
};

namespace detail {

inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t index) {
  // splitmix64 step on seed ^ f(index): independent streams per replicate.
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

inline double percentile(std::vector<double> v, double p) {
  std::sort(v.begin(), v.end());
  const double h = p * static_cast<double>(v.size() - 1);
  const std::size_t i = static_cast<std::size_t>(h);
  if (i + 1 >= v.size()) return v.back();
  const double frac = h - static_cast<double>(i);
  return v[i] + frac * (v[i + 1] - v[i]);
}

}  // namespace detail

/// Nonparametric bootstrap percentile intervals for all six bound endpoints.
/// Deterministic given the seed, and independent of row order: rows are
/// canonically sorted before resampling, so two shufflings of the same data
/// produce identical intervals. Each replicate draws from its own sub-seeded
/// stream; a resample that loses a required arm is redrawn from the same
/// stream, with at most 10 * B draws in total across the run.
inline BootstrapCI bootstrap_ci(const Sample& s, const SensitivitySpec& spec, Model model,
                                int B, double level, std::uint64_t seed) {
  if (B < 100) throw ValidationError("bootstrap needs at least 100 replicates");
  if (!(level > 0.0 && level < 1.0)) throw ValidationError("level must lie in (0, 1)");
  Sample canon = s;
  std::sort(canon.rows.begin(), canon.rows.end(), [](const SampleRow& a, const SampleRow& b) {
    return std::tie(a.x, a.t, a.y) < std::tie(b.x, b.t, b.y);
  });
  const BoundsReport point = plugin_bounds(canon, spec, model);

  const std::size_t n = canon.rows.size();
  std::vector<double> draws[6];
  for (auto& d : draws) d.reserve(static_cast<std::size_t>(B));
  long long attempts = 0;
  const long long max_attempts = 10LL * B;
  Sample resample;
  resample.rows.resize(n);
  for (int b = 0; b < B; ++b) {
    std::mt19937_64 rng(detail::mix_seed(seed, static_cast<std::uint64_t>(b)));
    std::uniform_int_distribution<std::size_t> pick(0, n - 1);
    for (;;) {
      if (++attempts > max_attempts)
        throw DegenerateResample("more than " + std::to_string(max_attempts) +
                                 " resampling attempts lost a required arm");
      for (std::size_t i = 0; i < n; ++i) resample.rows[i] = canon.rows[pick(rng)];
      try {
        const BoundsReport rep = plugin_bounds(resample, spec, model);
        draws[0].push_back(rep.mu1.lo);
        draws[1].push_back(rep.mu1.hi);
        draws[2].push_back(rep.mu0.lo);
        draws[3].push_back(rep.mu0.hi);
        draws[4].push_back(rep.ate.lo);
        draws[5].push_back(rep.ate.hi);
        break;
      } catch (const MissingStratumDistribution&) {
        continue;  // redraw from the same stream
      }
    }
  }

  const double alpha = 1.0 - level;
  auto ci = [&](int k, double estimate) {
    return EndpointCI{estimate, detail::percentile(draws[k], alpha / 2.0),
                      detail::percentile(draws[k], 1.0 - alpha / 2.0)};
  };
  BootstrapCI out;
  out.mu1_lo = ci(0, point.mu1.lo);
  out.mu1_hi = ci(1, point.mu1.hi);
  out.mu0_lo = ci(2, point.mu0.lo);
  out.mu0_hi = ci(3, point.mu0.hi);
  out.ate_lo = ci(4, point.ate.lo);
  out.ate_hi = ci(5, point.ate.hi);
  out.replicates = B;
  out.level = level;
  out.seed = seed;
  return out;
}

}  // namespace demsm
