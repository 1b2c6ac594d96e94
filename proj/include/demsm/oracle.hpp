#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "demsm/bounds.hpp"
#include "demsm/errors.hpp"
#include "demsm/sensitivity.hpp"
#include "demsm/weighted_distribution.hpp"

namespace demsm {

enum class Direction { maximize, minimize };

/// Exact optimum of E[r(Y) Y] over ratios r(y) in [lo, hi] with E[r(Y)] = 1,
/// computed by direct greedy allocation: walk the support in preference
/// order, give each point as much ratio as the remaining budget allows while
/// the points still to come keep at least lo each. One support point may end
/// up strictly between lo and hi. Serves as an independent check on the
/// closed-form bounds; hi may be infinite.
inline double greedy_density_ratio_bound(const WeightedDistribution& d, double lo, double hi,
                                         Direction dir) {
  if (std::isnan(lo) || std::isnan(hi) || lo > hi || lo < 0.0)
    throw ValidationError("ratio box must satisfy 0 <= lo <= hi");
  if (lo > 1.0 + 1e-12 || hi < 1.0 - 1e-12)
    throw InfeasibleBox("ratio box must contain 1 to admit a density ratio");
  const auto& ys = d.support();
  const auto& ps = d.probs();
  const std::size_t n = ys.size();
  double budget = 1.0;
  double mass_left = 1.0;
  double value = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t i = dir == Direction::maximize ? n - 1 - k : k;
    const double p = ps[i];
    const double others = std::max(mass_left - p, 0.0);
    double r = (budget - others * lo) / p;
    if (r > hi) r = hi;
    if (r < lo) r = lo;
    value += p * r * ys[i];
    budget -= p * r;
    mass_left = others;
  }
  return value;
}

inline double greedy_density_ratio_bound(const WeightedDistribution& d, const LambdaPair& lam,
                                         Direction dir) {
  return greedy_density_ratio_bound(d, lam.lambda1, lam.lambda2, dir);
}

/// The law that attains the greedy optimum, as a distribution: ratio lo on
/// one side of the pivot quantile, hi on the other, with the pivot atom split
/// so that the ratio integrates to one. Requires a bounded box.
inline WeightedDistribution extremal_ratio_law(const WeightedDistribution& d, double lo,
                                               double hi, Direction dir) {
  if (std::isnan(lo) || !std::isfinite(hi) || lo > hi || lo < 0.0)
    throw ValidationError("ratio law needs a bounded box with 0 <= lo <= hi");
  if (lo > 1.0 + 1e-12 || hi < 1.0 - 1e-12)
    throw InfeasibleBox("ratio box must contain 1 to admit a density ratio");
  if (hi == lo) return d;
  // Mass fraction below the pivot: it receives lo when maximizing and hi
  // when minimizing, and in both cases the ratio then integrates to one.
  const double below = dir == Direction::maximize ? (hi - 1.0) / (hi - lo)
                                                  : (1.0 - lo) / (hi - lo);
  const double r_below = dir == Direction::maximize ? lo : hi;
  const double r_above = dir == Direction::maximize ? hi : lo;
  std::vector<std::pair<double, double>> pairs;
  pairs.reserve(d.size());
  double cum = 0.0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    const double p = d.probs()[i];
    const double in_below = std::clamp(below - cum, 0.0, p);
    pairs.emplace_back(d.support()[i], in_below * r_below + (p - in_below) * r_above);
    cum += p;
  }
  return WeightedDistribution::from_pairs(pairs);
}

/// Brute-force sharp bound over all couplings with one binary latent class.
/// Searches the class probability p1 = Q(U=1 | T=1) and the treatment ratio
/// lambda(1) on regular grids; the other ratio follows from normalization and
/// must stay inside the lambda box (tolerance 1e-12). For fixed p1 the inner
/// outcome problem is a greedy bound over the gamma box intersected with the
/// normalization constraints of the complementary class.
inline double binary_u_grid_oracle(const WeightedDistribution& d, const LambdaPair& lam,
                                   const GammaPair& gam, Direction dir, double resolution) {
  if (gam.unbounded()) throw UnboundedGamma("grid oracle needs a bounded gamma pair");
  if (!(resolution > 0.0 && resolution <= 0.1))
    throw ResolutionOutOfRange("resolution must lie in (0, 0.1]");
  const int steps = static_cast<int>(std::lround(1.0 / resolution));
  const double mean = d.mean();
  const bool maximize = dir == Direction::maximize;
  double best = maximize ? -std::numeric_limits<double>::infinity()
                         : std::numeric_limits<double>::infinity();
  for (int k = 1; k < steps; ++k) {
    const double p1 = static_cast<double>(k) / steps;
    // Ratio box for the U=1 outcome law keeping the U=0 law inside the
    // gamma box as well. It always contains 1 (the independent law is
    // feasible for every p1), so clamp away rounding that would invert it.
    const double wlo =
        std::min(1.0, std::max(gam.gamma1, (1.0 - (1.0 - p1) * gam.gamma2) / p1));
    const double whi =
        std::max(1.0, std::min(gam.gamma2, (1.0 - (1.0 - p1) * gam.gamma1) / p1));
    const double s_max = greedy_density_ratio_bound(d, wlo, whi, Direction::maximize);
    const double s_min = greedy_density_ratio_bound(d, wlo, whi, Direction::minimize);
    for (int j = 0; j <= steps; ++j) {
      const double l1 =
          lam.lambda1 + (lam.lambda2 - lam.lambda1) * static_cast<double>(j) / steps;
      const double l0 = (1.0 - p1 * l1) / (1.0 - p1);
      if (l0 < lam.lambda1 - 1e-12 || l0 > lam.lambda2 + 1e-12) continue;
      // nu = a * E[Y under the U=1 law] + b * mean, linear in the inner law.
      const double a = p1 * (l1 - 1.0) / (1.0 - p1);
      const double b = (1.0 - p1 * l1) / (1.0 - p1);
      const double s = (a >= 0.0) == maximize ? s_max : s_min;
      const double v = a * s + b * mean;
      best = maximize ? std::max(best, v) : std::min(best, v);
    }
  }
  return best;
}

/// Explicit joint law of (T, U, Y^1, Y^0) with one binary latent class that
/// reproduces the observed arm distributions, satisfies both ratio boxes,
/// and attains the upper treated-arm bound and lower control-arm bound
/// simultaneously. The two potential outcomes are coupled as a product
/// given (T, U), which encodes latent unconfoundedness by construction.
struct WitnessJoint {
  double p_treat = 0.5;        // Q(T = 1)
  double u_given_t1 = 0.0;     // Q(U = 1 | T = 1)
  double u_given_t0 = 0.0;     // Q(U = 1 | T = 0)
  WeightedDistribution y1_given_u1;
  WeightedDistribution y1_given_u0;
  WeightedDistribution y0_given_u1;
  WeightedDistribution y0_given_u0;
  bool product_coupling = true;

  /// E_Q[Y^1 | T = 0]
  double nu1_attained() const {
    return u_given_t0 * y1_given_u1.mean() + (1.0 - u_given_t0) * y1_given_u0.mean();
  }
  /// E_Q[Y^0 | T = 1]
  double nu0_attained() const {
    return u_given_t1 * y0_given_u1.mean() + (1.0 - u_given_t1) * y0_given_u0.mean();
  }
};

namespace detail {

// Solve w_u1 * comp + w_u0 * rest = base for rest, pointwise on the support
// of base. Rounding can leave probabilities a hair below zero; anything
// worse than -1e-12 means the caller constructed an invalid component.
inline WeightedDistribution invert_mixture(const WeightedDistribution& base,
                                           const WeightedDistribution& comp, double w_u1,
                                           double w_u0) {
  std::vector<std::pair<double, double>> pairs;
  pairs.reserve(base.size());
  for (std::size_t i = 0; i < base.size(); ++i) {
    const double y = base.support()[i];
    const double q = (base.probs()[i] - w_u1 * comp.prob_at(y)) / w_u0;
    if (q < -1e-12)
      throw NegativeImpliedDensity("mixture inversion produced probability " +
                                   std::to_string(q) + " at y = " + std::to_string(y));
    pairs.emplace_back(y, std::max(q, 0.0));
  }
  return WeightedDistribution::from_pairs(pairs);
}

}  // namespace detail

/// Build the attaining joint law for the pair (upper treated-arm bound,
/// lower control-arm bound). p_treat sets Q(T = 1) and defaults to 1/2; it
/// does not affect either attained value.
inline WitnessJoint build_witness(const WeightedDistribution& d1,
                                  const WeightedDistribution& d0, const LambdaPair& lam,
                                  const GammaPair& gam, const GammaPair& gam_prime,
                                  double p_treat = 0.5) {
  if (gam.unbounded() || gam_prime.unbounded())
    throw UnboundedGamma("witness construction needs bounded gamma pairs");
  if (!(p_treat >= 0.0 && p_treat <= 1.0))
    throw ValidationError("p_treat must lie in [0, 1]");
  const double tau = tau_level(lam);
  if (tau == 0.0 || tau == 1.0) {
    // One lambda end sits at 1: the latent class degenerates in both arms
    // and every conditional law is the observed one. Q(U = 1 | T = 0) =
    // lambda2 (1 - tau), written so both boundaries come out exactly.
    const double u_t0 = std::clamp(
        lam.lambda2 * (1.0 - lam.lambda1) / lam.width(), 0.0, 1.0);
    return WitnessJoint{p_treat, 1.0 - tau, u_t0, d1, d1, d0, d0, true};
  }

  // Here lambda1 < 1 and lambda2 > 1, or the box is the degenerate (1, 1).
  // The class weights and odds are written as direct cancellation-free
  // ratios, so they carry only relative rounding error even when a lambda
  // end sits arbitrarily close to a boundary: u1_t1 = 1 - tau, u1_t0 = tau'
  // = lambda2 (1 - tau), ot = odds(tau), op = odds(1 - tau').
  const double w = lam.width();
  const double u1_t1 = w == 0.0 ? 0.5 : std::clamp((1.0 - lam.lambda1) / w, 0.0, 1.0);
  const double u1_t0 =
      w == 0.0 ? 0.5 : std::clamp(lam.lambda2 * (1.0 - lam.lambda1) / w, 0.0, 1.0);
  const double ot = w == 0.0 ? 1.0 : (lam.lambda2 - 1.0) / (1.0 - lam.lambda1);
  const double op = w == 0.0 ? 1.0
                             : lam.lambda1 * (lam.lambda2 - 1.0) /
                                   (lam.lambda2 * (1.0 - lam.lambda1));

  // Treated-arm potential outcome: the U=1 law tilts d1 by a two-value ratio
  // in the clipped gamma box; the clipping keeps the complementary class's
  // implied law nonnegative and inside the raw box.
  const double g1b = std::max(gam.gamma1, 1.0 - ot * (gam.gamma2 - 1.0));
  const double g2b = std::min(gam.gamma2, 1.0 + ot * (1.0 - gam.gamma1));
  WeightedDistribution y1_u1 = extremal_ratio_law(d1, g1b, g2b, Direction::maximize);
  WeightedDistribution y1_u0 = detail::invert_mixture(d1, y1_u1, u1_t1, 1.0 - u1_t1);

  // Control-arm potential outcome, mirrored through the inverted ratio: the
  // large ratio sits above the pivot, which pushes E[Y^0 | T=1] down.
  const double g1bp = std::max(gam_prime.gamma1, 1.0 - op * (gam_prime.gamma2 - 1.0));
  const double g2bp = std::min(gam_prime.gamma2, 1.0 + op * (1.0 - gam_prime.gamma1));
  WeightedDistribution y0_u1 = extremal_ratio_law(d0, g1bp, g2bp, Direction::maximize);
  WeightedDistribution y0_u0 =
      lam.lambda1 > 0.0
          ? detail::invert_mixture(d0, y0_u1, u1_t0, 1.0 - u1_t0)
          // lambda1 = 0 puts all control-arm mass on U=1, so the U=0 law is
          // unconstrained there; it still enters E[Y^0 | T=1], where the
          // minimizing choice is the extremal law over the raw box.
          : extremal_ratio_law(d0, gam_prime.gamma1, gam_prime.gamma2, Direction::minimize);

  return WitnessJoint{p_treat, u1_t1, u1_t0,
                      std::move(y1_u1), std::move(y1_u0),
                      std::move(y0_u1), std::move(y0_u0), true};
}

struct AuditCheck {
  std::string name;
  bool pass = false;
  double error = 0.0;
  std::string detail;
};

struct WitnessAudit {
  double tolerance = 0.0;
  std::vector<AuditCheck> checks;
  double nu1_attained = 0.0, nu1_target = 0.0;
  double nu0_attained = 0.0, nu0_target = 0.0;

  bool all_pass() const {
    for (const auto& c : checks)
      if (!c.pass) return false;
    return true;
  }
};

namespace detail {

inline std::vector<double> merged_support(const WeightedDistribution& a,
                                          const WeightedDistribution& b,
                                          const WeightedDistribution& c) {
  std::set<double> s(a.support().begin(), a.support().end());
  s.insert(b.support().begin(), b.support().end());
  s.insert(c.support().begin(), c.support().end());
  return {s.begin(), s.end()};
}

inline void audit_mixture(WitnessAudit& out, const std::string& name,
                          const WeightedDistribution& base, const WeightedDistribution& u1,
                          const WeightedDistribution& u0, double w_u1, double tol) {
  double worst = 0.0;
  for (double y : merged_support(base, u1, u0)) {
    const double mix = w_u1 * u1.prob_at(y) + (1.0 - w_u1) * u0.prob_at(y);
    worst = std::max(worst, std::fabs(mix - base.prob_at(y)));
  }
  out.checks.push_back({name, worst <= tol, worst,
                        "max pointwise gap between the latent mixture and the observed law"});
}

inline void audit_outcome_ratios(WitnessAudit& out, const std::string& name,
                                 const WeightedDistribution& base,
                                 const WeightedDistribution& law, double g1, double g2,
                                 double tol) {
  double worst = 0.0;
  bool pass = true;
  for (double y : merged_support(base, law, base)) {
    const double p = base.prob_at(y);
    const double q = law.prob_at(y);
    if (p == 0.0) {
      if (q > tol) pass = false;  // mass outside the observed support
      continue;
    }
    const double ratio = q / p;
    const double excess = std::max(g1 - ratio, ratio - g2);
    worst = std::max(worst, excess);
  }
  out.checks.push_back({name, pass && worst <= tol, std::max(worst, 0.0),
                        "largest violation of the outcome ratio box"});
}

}  // namespace detail

/// Audit a witness against the observed arm laws and a sensitivity
/// specification: mixture consistency in both arms, both ratio boxes, exact
/// attainment of the closed-form bounds, and the latent-unconfoundedness
/// representation.
inline WitnessAudit verify_witness(const WitnessJoint& w, const WeightedDistribution& d1,
                                   const WeightedDistribution& d0, const SensitivitySpec& spec,
                                   double tol = 1e-10) {
  WitnessAudit out;
  out.tolerance = tol;

  detail::audit_mixture(out, "mixture_y1_given_t1", d1, w.y1_given_u1, w.y1_given_u0,
                        w.u_given_t1, tol);
  detail::audit_mixture(out, "mixture_y0_given_t0", d0, w.y0_given_u1, w.y0_given_u0,
                        w.u_given_t0, tol);

  // Treatment ratio per latent class. The construction places it exactly at
  // a lambda box end; a class with no mass in either arm is vacuous.
  {
    double worst = 0.0;
    bool pass = true;
    std::string detail_msg = "Q(u|T=0)/Q(u|T=1) sits at a lambda box end for each class";
    const double q1[2] = {1.0 - w.u_given_t1, w.u_given_t1};
    const double q0[2] = {1.0 - w.u_given_t0, w.u_given_t0};
    for (int u = 0; u < 2; ++u) {
      if (q1[u] == 0.0 && q0[u] == 0.0) continue;
      if (q1[u] == 0.0) {
        pass = false;
        detail_msg = "latent class has control-arm mass but no treated-arm mass";
        continue;
      }
      const double r = q0[u] / q1[u];
      const double at_end = std::min(std::fabs(r - spec.lam.lambda1),
                                     std::fabs(r - spec.lam.lambda2));
      const double in_box = std::max(spec.lam.lambda1 - r, r - spec.lam.lambda2);
      worst = std::max(worst, std::max(at_end, in_box));
    }
    out.checks.push_back({"treatment_ratio", pass && worst <= tol, worst, detail_msg});
  }

  detail::audit_outcome_ratios(out, "outcome_ratio_y1_u1", d1, w.y1_given_u1,
                               spec.gam.gamma1, spec.gam.gamma2, tol);
  detail::audit_outcome_ratios(out, "outcome_ratio_y1_u0", d1, w.y1_given_u0,
                               spec.gam.gamma1, spec.gam.gamma2, tol);
  detail::audit_outcome_ratios(out, "outcome_ratio_y0_u1", d0, w.y0_given_u1,
                               spec.gam_prime.gamma1, spec.gam_prime.gamma2, tol);
  detail::audit_outcome_ratios(out, "outcome_ratio_y0_u0", d0, w.y0_given_u0,
                               spec.gam_prime.gamma1, spec.gam_prime.gamma2, tol);

  out.nu1_attained = w.nu1_attained();
  out.nu1_target = demsm_nu1_bounds(d1, spec.lam, spec.gam).hi;
  const double e1 = std::fabs(out.nu1_attained - out.nu1_target);
  out.checks.push_back({"attains_nu1_upper", e1 <= tol, e1,
                        "E_Q(Y^1 | T=0) against the closed-form upper bound"});

  out.nu0_attained = w.nu0_attained();
  out.nu0_target = demsm_nu0_bounds(d0, spec.lam, spec.gam_prime).lo;
  const double e0 = std::fabs(out.nu0_attained - out.nu0_target);
  out.checks.push_back({"attains_nu0_lower", e0 <= tol, e0,
                        "E_Q(Y^0 | T=1) against the closed-form lower bound"});

  // Latent unconfoundedness is a property of the representation: conditional
  // on (T, U) the potential outcomes are drawn independently from laws that
  // do not vary with T, which the product coupling encodes.
  out.checks.push_back({"latent_unconfoundedness", w.product_coupling, 0.0,
                        "product coupling given (T, U) with T-free conditional laws"});

  return out;
}

}  // namespace demsm
