#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "demsm/errors.hpp"

namespace demsm {

/// Finite discrete distribution on the real line.
///
/// Invariants, established at construction and never broken afterwards:
///  - support is strictly increasing (duplicate values merged by summing weight)
///  - every probability is strictly positive (zero-weight points dropped)
///  - probabilities sum to one (weights are normalized by their total)
class WeightedDistribution {
 public:
  /// Build from parallel value/weight vectors. Weights need not be
  /// normalized; they must be nonnegative with a positive total.
  WeightedDistribution(std::vector<double> values, std::vector<double> weights) {
    if (values.size() != weights.size())
      throw ValidationError("values and weights must have equal length");
    if (values.empty()) throw EmptyInput("distribution needs at least one point");
    std::vector<std::size_t> order(values.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    double total = 0.0;
    for (std::size_t k : order) {
      const double y = values[k];
      const double w = weights[k];
      if (!std::isfinite(y)) throw ValidationError("support values must be finite");
      if (std::isnan(w) || w < 0.0)
        throw NegativeWeight("weight must be nonnegative, got " + std::to_string(w));
      if (w == 0.0) continue;
      if (!support_.empty() && support_.back() == y) {
        probs_.back() += w;
      } else {
        support_.push_back(y);
        probs_.push_back(w);
      }
      total += w;
    }
    if (!(total > 0.0)) throw ZeroTotalWeight("total weight must be positive");
    for (double& p : probs_) p /= total;
  }

  static WeightedDistribution from_pairs(const std::vector<std::pair<double, double>>& pairs) {
    std::vector<double> values, weights;
    values.reserve(pairs.size());
    weights.reserve(pairs.size());
    for (const auto& [y, w] : pairs) {
      values.push_back(y);
      weights.push_back(w);
    }
    return WeightedDistribution(std::move(values), std::move(weights));
  }

  static WeightedDistribution point_mass(double value) {
    return WeightedDistribution({value}, {1.0});
  }

  /// Equal weight on each listed value (duplicates act as multiplicity).
  static WeightedDistribution uniform_on(const std::vector<double>& values) {
    return WeightedDistribution(values, std::vector<double>(values.size(), 1.0));
  }

  const std::vector<double>& support() const noexcept { return support_; }
  const std::vector<double>& probs() const noexcept { return probs_; }
  std::size_t size() const noexcept { return support_.size(); }
  double min() const noexcept { return support_.front(); }
  double max() const noexcept { return support_.back(); }

  double mean() const noexcept {
    double m = 0.0;
    for (std::size_t i = 0; i < support_.size(); ++i) m += probs_[i] * support_[i];
    return m;
  }

  /// P(Y <= y)
  double cdf(double y) const noexcept {
    double c = 0.0;
    for (std::size_t i = 0; i < support_.size() && support_[i] <= y; ++i) c += probs_[i];
    return c;
  }

  /// P(Y < y)
  double cdf_below(double y) const noexcept {
    double c = 0.0;
    for (std::size_t i = 0; i < support_.size() && support_[i] < y; ++i) c += probs_[i];
    return c;
  }

  /// P(Y = y); zero off the support.
  double prob_at(double y) const noexcept {
    auto it = std::lower_bound(support_.begin(), support_.end(), y);
    if (it == support_.end() || *it != y) return 0.0;
    return probs_[static_cast<std::size_t>(it - support_.begin())];
  }

  /// Left-continuous generalized inverse: the smallest support point y with
  /// CDF(y) >= gamma. Requires gamma in (0, 1).
  double quantile(double gamma) const {
    require_level(gamma);
    double c = 0.0;
    for (std::size_t i = 0; i < support_.size(); ++i) {
      c += probs_[i];
      if (c >= gamma) return support_[i];
    }
    return support_.back();  // guards accumulated rounding just below 1
  }

  /// E[ rho_gamma(Y, q) ] where rho_gamma(y, q) is the check (pinball) loss
  /// gamma (y-q)^+ + (1-gamma) (q-y)^+. Requires gamma in (0, 1).
  double check_loss_expectation(double gamma, double q) const {
    require_level(gamma);
    double loss = 0.0;
    for (std::size_t i = 0; i < support_.size(); ++i) {
      const double y = support_[i];
      loss += probs_[i] * (y > q ? gamma * (y - q) : (1.0 - gamma) * (q - y));
    }
    return loss;
  }

 private:
  static void require_level(double gamma) {
    if (!(gamma > 0.0 && gamma < 1.0))
      throw GammaOutOfRange("quantile level must lie strictly between 0 and 1, got " +
                            std::to_string(gamma));
  }

  std::vector<double> support_;
  std::vector<double> probs_;
};

/// Check-loss expectation evaluated at the level's own quantile,
/// E[ rho_t(Y, q_t) ]. The boundary levels 0 and 1 are taken as the exact
/// limit 0, which is what every bound formula below needs when a sensitivity
/// box degenerates on one side.
inline double check_loss_at_quantile(const WeightedDistribution& d, double level) {
  if (level == 0.0 || level == 1.0) return 0.0;
  return d.check_loss_expectation(level, d.quantile(level));
}

}  // namespace demsm
