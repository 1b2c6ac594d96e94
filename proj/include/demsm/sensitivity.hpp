#pragma once

#include <cmath>
#include <limits>
#include <string>
#include <utility>

#include "demsm/errors.hpp"
#include "demsm/weighted_distribution.hpp"

namespace demsm {

/// Treatment density-ratio box [lambda1, lambda2] with
/// 0 <= lambda1 <= 1 <= lambda2 < infinity.
struct LambdaPair {
  double lambda1 = 1.0;
  double lambda2 = 1.0;

  LambdaPair() = default;
  LambdaPair(double l1, double l2) : lambda1(l1), lambda2(l2) {
    if (!(l1 >= 0.0 && l1 <= 1.0 && l2 >= 1.0) || !std::isfinite(l2))
      throw ValidationError("lambda pair must satisfy 0 <= lambda1 <= 1 <= lambda2 < inf");
  }

  /// The usual one-parameter form (1/L, L).
  static LambdaPair symmetric(double lambda) {
    if (!(lambda >= 1.0) || !std::isfinite(lambda))
      throw ValidationError("lambda must be >= 1 for symmetric specification");
    return LambdaPair(1.0 / lambda, lambda);
  }

  double width() const noexcept { return lambda2 - lambda1; }
};

/// Outcome density-ratio box [gamma1, gamma2] with 0 <= gamma1 <= 1 <= gamma2.
/// gamma2 = +infinity marks the one-sided (unbounded above) specification.
struct GammaPair {
  double gamma1 = 0.0;
  double gamma2 = std::numeric_limits<double>::infinity();

  GammaPair() = default;
  GammaPair(double g1, double g2) : gamma1(g1), gamma2(g2) {
    if (std::isnan(g1) || std::isnan(g2) || !(g1 >= 0.0 && g1 <= 1.0 && g2 >= 1.0))
      throw ValidationError("gamma pair must satisfy 0 <= gamma1 <= 1 <= gamma2");
  }

  static GammaPair symmetric(double gamma) {
    if (!(gamma >= 1.0) || !std::isfinite(gamma))
      throw ValidationError("gamma must be >= 1 for symmetric specification");
    return GammaPair(1.0 / gamma, gamma);
  }

  /// No outcome constraint at all: (0, inf).
  static GammaPair uninformative() {
    return GammaPair(0.0, std::numeric_limits<double>::infinity());
  }

  bool unbounded() const noexcept { return std::isinf(gamma2); }
  double width() const noexcept { return gamma2 - gamma1; }
};

/// c / (1 - c)
inline double odds(double c) { return c / (1.0 - c); }

/// Pivot quantile level of a density-ratio box [lower, upper] containing 1:
/// (upper - 1) / (upper - lower). A fully degenerate box (both ends 1) gets
/// the convention 1/2; an unbounded upper end gives the limit 1.
inline double tau_level(double lower, double upper) {
  if (upper == lower) return 0.5;
  if (std::isinf(upper)) return 1.0;
  return (upper - 1.0) / (upper - lower);
}

inline double tau_level(const LambdaPair& lam) { return tau_level(lam.lambda1, lam.lambda2); }

inline double tau_level(const GammaPair& gam) {
  if (gam.unbounded()) throw UnboundedGamma("tau level needs a bounded gamma pair");
  return tau_level(gam.gamma1, gam.gamma2);
}

/// Treatment box implied by combining a lambda box with an outcome box,
/// together with its pivot level.
struct ImpliedLambda {
  double lambda_bar1 = 1.0;
  double lambda_bar2 = 1.0;
  double tau_bar = 0.5;

  double width() const noexcept { return lambda_bar2 - lambda_bar1; }
};

namespace detail {

// Product with the 0 * inf = 0 convention. The degenerate side of a box
// contributes nothing even when the other factor is infinite (lambda1 = 0
// makes 1/lambda1 - 1 infinite on the control side).
inline double gap_product(double a, double b) {
  if (a == 0.0 || b == 0.0) return 0.0;
  return a * b;
}

// Core of the implied-box computation in product form. lo_gap and hi_gap are
// the distances of the treatment box ends from 1 (either orientation), and
// may be infinite. This form has no 0/0 hazard when a box degenerates.
inline ImpliedLambda implied_from_gaps(double lo_gap, double hi_gap, const GammaPair& gam) {
  const double g_lo = 1.0 - gam.gamma1;
  const double g_hi = gam.gamma2 - 1.0;
  const double down = std::min(gap_product(lo_gap, g_lo), gap_product(hi_gap, g_hi));
  const double up = std::min(gap_product(lo_gap, g_hi), gap_product(hi_gap, g_lo));
  const double l1 = 1.0 - down;
  const double l2 = 1.0 + up;
  return ImpliedLambda{l1, l2, tau_level(l1, l2)};
}

inline void require_unbounded_means_zero(const GammaPair& gam) {
  if (gam.gamma1 > 0.0)
    throw UnboundedGammaWithNonzeroGamma1(
        "unbounded gamma2 is only supported with gamma1 = 0");
}

}  // namespace detail

/// Treatment box implied for the treated-arm potential outcome. An
/// uninformative gamma (0, inf) leaves the lambda box unchanged; an unbounded
/// gamma2 with gamma1 > 0 is rejected rather than guessed at.
inline ImpliedLambda implied_lambda(const LambdaPair& lam, const GammaPair& gam) {
  if (gam.unbounded()) {
    detail::require_unbounded_means_zero(gam);
    return ImpliedLambda{lam.lambda1, lam.lambda2, tau_level(lam)};
  }
  return detail::implied_from_gaps(1.0 - lam.lambda1, lam.lambda2 - 1.0, gam);
}

/// Control-arm analogue: the roles of the two ends swap because the relevant
/// treatment ratio is inverted, so the gaps come from (1/lambda2, 1/lambda1).
/// lambda1 = 0 is allowed; the infinite gap simply never wins a minimum.
inline ImpliedLambda implied_lambda_control(const LambdaPair& lam, const GammaPair& gam_prime) {
  const double inv_lo = 1.0 / lam.lambda2;
  const double inv_hi =
      lam.lambda1 > 0.0 ? 1.0 / lam.lambda1 : std::numeric_limits<double>::infinity();
  if (gam_prime.unbounded()) {
    detail::require_unbounded_means_zero(gam_prime);
    return ImpliedLambda{inv_lo, inv_hi, tau_level(inv_lo, inv_hi)};
  }
  return detail::implied_from_gaps(1.0 - inv_lo, inv_hi - 1.0, gam_prime);
}

/// Outcome-side deviation budget pair implied by a bounded gamma box:
/// (gamma2 - gamma1) * E[rho at level 1 - tau_gamma resp. tau_gamma].
inline std::pair<double, double> implied_emsm_deltas(const GammaPair& gam,
                                                     const WeightedDistribution& d) {
  if (gam.unbounded())
    throw UnboundedGamma("implied deltas need a bounded gamma pair");
  const double tg = tau_level(gam);
  const double w = gam.width();
  return {w * check_loss_at_quantile(d, 1.0 - tg), w * check_loss_at_quantile(d, tg)};
}

/// Single sensitivity loading for the deviation-budget model.
struct EmsmDeltaSpec {
  double delta = 1.0;

  EmsmDeltaSpec() = default;
  explicit EmsmDeltaSpec(double d) : delta(d) {
    if (!(d >= 0.0 && d <= 1.0)) throw ValidationError("delta must lie in [0, 1]");
  }
};

/// Recommended deviation budgets for loading delta under the lambda box:
/// delta / (1 - m) * E[rho at level 1 - m resp. m] with m = max(tau, 1 - tau).
/// At m = 1 the exact limits delta (mean - min) and delta (max - mean) apply.
inline std::pair<double, double> emsm_recommended_deltas(const EmsmDeltaSpec& spec,
                                                         const LambdaPair& lam,
                                                         const WeightedDistribution& d) {
  const double t = tau_level(lam);
  const double m = std::max(t, 1.0 - t);
  if (m == 1.0)
    return {spec.delta * (d.mean() - d.min()), spec.delta * (d.max() - d.mean())};
  const double scale = spec.delta / (1.0 - m);
  return {scale * check_loss_at_quantile(d, 1.0 - m), scale * check_loss_at_quantile(d, m)};
}

/// The gamma box whose implied treatment box reproduces the recommended
/// deviation budgets exactly: (1 - delta, 1 + delta * odds(tau)).
/// Requires tau in [1/2, 1).
inline GammaPair matching_gammas(double delta, double tau) {
  if (!(delta >= 0.0 && delta <= 1.0)) throw ValidationError("delta must lie in [0, 1]");
  if (!(tau < 1.0)) throw ValidationError("matching gammas need tau < 1");
  if (!(tau >= 0.5)) throw TauBelowHalf("matching gammas need tau >= 1/2");
  return GammaPair(1.0 - delta, 1.0 + delta * odds(tau));
}

/// Smallest delta whose matching gamma box can be written symmetrically,
/// i.e. 1 + delta * odds(tau) <= 1 / (1 - delta).
inline double symmetric_matching_threshold(double tau) {
  if (!(tau >= 0.5 && tau < 1.0)) throw TauBelowHalf("threshold needs tau in [1/2, 1)");
  return (2.0 * tau - 1.0) / tau;
}

inline bool symmetric_matching_feasible(double delta, double tau) {
  return delta >= symmetric_matching_threshold(tau);
}

/// Treatment box shrunk by the loading delta:
/// (1 - delta (1 - lambda1), 1 + delta (lambda2 - 1)).
inline LambdaPair emsm_implied_lambdas(double delta, const LambdaPair& lam) {
  if (!(delta >= 0.0 && delta <= 1.0)) throw ValidationError("delta must lie in [0, 1]");
  return LambdaPair(1.0 - delta * (1.0 - lam.lambda1), 1.0 + delta * (lam.lambda2 - 1.0));
}

}  // namespace demsm
