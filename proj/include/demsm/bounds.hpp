#pragma once

#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "demsm/errors.hpp"
#include "demsm/sensitivity.hpp"
#include "demsm/weighted_distribution.hpp"

namespace demsm {

struct Interval {
  double lo = 0.0;
  double hi = 0.0;

  double width() const noexcept { return hi - lo; }
  bool contains(const Interval& other, double tol = 0.0) const noexcept {
    return lo - tol <= other.lo && other.hi <= hi + tol;
  }
  bool contains(double x, double tol = 0.0) const noexcept {
    return lo - tol <= x && x <= hi + tol;
  }
};

/// Sharp range of E[r(Y) Y] over density ratios r with values in [lo, hi]
/// (lo <= 1 <= hi) and E[r(Y)] = 1. The closed form is
///   mean +- (hi - lo) * E[rho at level t resp. 1 - t],  t = (hi-1)/(hi-lo).
/// An unbounded upper end has the finite limit lo*mean + (1-lo)*extreme,
/// because the whole surplus concentrates on one extreme support point.
inline Interval nu_bounds_from_box(const WeightedDistribution& d, double lo, double hi) {
  if (std::isnan(lo) || std::isnan(hi) || lo > hi || lo < 0.0)
    throw ValidationError("ratio box must satisfy 0 <= lo <= hi");
  if (lo > 1.0 || hi < 1.0)
    throw InfeasibleBox("ratio box must contain 1 to admit a density ratio");
  const double mean = d.mean();
  if (std::isinf(hi))
    return {lo * mean + (1.0 - lo) * d.min(), lo * mean + (1.0 - lo) * d.max()};
  const double width = hi - lo;
  if (width == 0.0) return {mean, mean};
  const double t = tau_level(lo, hi);
  return {mean - width * check_loss_at_quantile(d, 1.0 - t),
          mean + width * check_loss_at_quantile(d, t)};
}

/// Bounds on the treated-arm potential-outcome mean among the untreated,
/// under the treatment box alone.
inline Interval msm_nu1_bounds(const WeightedDistribution& d1, const LambdaPair& lam) {
  return nu_bounds_from_box(d1, lam.lambda1, lam.lambda2);
}

/// Same target with the outcome box added: the treatment box tightens to the
/// implied one and the pivot level moves to tau_bar.
inline Interval demsm_nu1_bounds(const WeightedDistribution& d1, const LambdaPair& lam,
                                 const GammaPair& gam) {
  const ImpliedLambda bar = implied_lambda(lam, gam);
  return nu_bounds_from_box(d1, bar.lambda_bar1, bar.lambda_bar2);
}

/// Equivalent four-term form of the upper bound, written directly in the raw
/// boxes. Useful as an independent cross-check of the implied-box route.
inline double demsm_nu1_upper_minform(const WeightedDistribution& d1, const LambdaPair& lam,
                                      const GammaPair& gam) {
  if (gam.unbounded()) throw UnboundedGamma("min form needs a bounded gamma pair");
  const double t = tau_level(lam);
  const double tg = tau_level(gam);
  const double pre = lam.width() * gam.width();
  const double m =
      std::min(std::min(tg * check_loss_at_quantile(d1, 1.0 - t),
                        (1.0 - tg) * check_loss_at_quantile(d1, t)),
               std::min(t * check_loss_at_quantile(d1, 1.0 - tg),
                        (1.0 - t) * check_loss_at_quantile(d1, tg)));
  return d1.mean() + pre * m;
}

/// Control-arm analogues: the treatment ratio inverts, so the box is
/// (1/lambda2, 1/lambda1), infinite above when lambda1 = 0.
inline Interval msm_nu0_bounds(const WeightedDistribution& d0, const LambdaPair& lam) {
  const double hi =
      lam.lambda1 > 0.0 ? 1.0 / lam.lambda1 : std::numeric_limits<double>::infinity();
  return nu_bounds_from_box(d0, 1.0 / lam.lambda2, hi);
}

inline Interval demsm_nu0_bounds(const WeightedDistribution& d0, const LambdaPair& lam,
                                 const GammaPair& gam_prime) {
  const ImpliedLambda bar = implied_lambda_control(lam, gam_prime);
  return nu_bounds_from_box(d0, bar.lambda_bar1, bar.lambda_bar2);
}

/// Deviation-budget bounds with the recommended budgets: the lambda box
/// shrinks by the loading delta while the pivot level stays put. Stated for
/// tau >= 1/2; smaller tau is rejected rather than silently extended.
inline Interval emsm_nu1_bounds_recommended(const WeightedDistribution& d1,
                                            const LambdaPair& lam, double delta) {
  EmsmDeltaSpec check(delta);
  if (!(tau_level(lam) >= 0.5))
    throw TauBelowHalf("recommended budgets are stated for tau >= 1/2");
  const LambdaPair shrunk = emsm_implied_lambdas(delta, lam);
  return nu_bounds_from_box(d1, shrunk.lambda1, shrunk.lambda2);
}

/// Control-arm version by label symmetry: the inverted box shrinks by delta.
/// Requires the inverted pivot level tau' to be >= 1/2.
inline Interval emsm_nu0_bounds_recommended(const WeightedDistribution& d0,
                                            const LambdaPair& lam, double delta) {
  EmsmDeltaSpec check(delta);
  const double inv_lo = 1.0 / lam.lambda2;
  const double inv_hi =
      lam.lambda1 > 0.0 ? 1.0 / lam.lambda1 : std::numeric_limits<double>::infinity();
  if (!(tau_level(inv_lo, inv_hi) >= 0.5))
    throw TauBelowHalf("recommended budgets need the control pivot level >= 1/2");
  const double lo = 1.0 - delta * (1.0 - inv_lo);
  const double hi = std::isinf(inv_hi)
                        ? (delta > 0.0 ? inv_hi : 1.0)
                        : 1.0 + delta * (inv_hi - 1.0);
  return nu_bounds_from_box(d0, lo, hi);
}

enum class Model { msm, demsm, emsm_rec };

inline std::string to_string(Model m) {
  switch (m) {
    case Model::msm: return "msm";
    case Model::demsm: return "demsm";
    case Model::emsm_rec: return "emsm";
  }
  return "demsm";
}

inline Model model_from_string(const std::string& s) {
  if (s == "msm") return Model::msm;
  if (s == "demsm") return Model::demsm;
  if (s == "emsm") return Model::emsm_rec;
  throw ValidationError("unknown model '" + s + "', expected msm|demsm|emsm");
}

/// One covariate cell of the observed law: its population weight, treatment
/// propensity, and the observed outcome distribution in each arm. An arm may
/// be absent (for example never observed in a sample).
struct Stratum {
  std::string id;
  double weight = 0.0;
  double propensity = 0.0;
  std::optional<WeightedDistribution> dist1;
  std::optional<WeightedDistribution> dist0;
};

struct ObservedLaw {
  std::vector<Stratum> strata;

  void validate() const {
    if (strata.empty()) throw DataError("observed law has no strata");
    double total = 0.0;
    for (const auto& st : strata) {
      if (!(st.weight >= 0.0) || !std::isfinite(st.weight))
        throw DataError("stratum '" + st.id + "' has invalid weight");
      if (!(st.propensity >= 0.0 && st.propensity <= 1.0))
        throw DataError("stratum '" + st.id + "' has propensity outside [0, 1]");
      total += st.weight;
    }
    if (std::fabs(total - 1.0) > 1e-9)
      throw DataError("stratum weights must sum to 1, got " + std::to_string(total));
  }
};

/// Per-stratum parameter overrides; unset fields fall back to the globals.
struct StratumParams {
  std::optional<LambdaPair> lam;
  std::optional<GammaPair> gam;
  std::optional<GammaPair> gam_prime;
  std::optional<double> delta;
};

struct SensitivitySpec {
  LambdaPair lam{};
  GammaPair gam = GammaPair::uninformative();
  GammaPair gam_prime = GammaPair::uninformative();
  double delta = 1.0;
  std::map<std::string, StratumParams> overrides;

  struct Resolved {
    LambdaPair lam;
    GammaPair gam;
    GammaPair gam_prime;
    double delta;
  };

  Resolved resolve(const std::string& id) const {
    Resolved r{lam, gam, gam_prime, delta};
    auto it = overrides.find(id);
    if (it != overrides.end()) {
      const StratumParams& o = it->second;
      if (o.lam) r.lam = *o.lam;
      if (o.gam) r.gam = *o.gam;
      if (o.gam_prime) r.gam_prime = *o.gam_prime;
      if (o.delta) r.delta = *o.delta;
    }
    return r;
  }
};

struct StratumBounds {
  std::string id;
  double weight = 0.0;
  double propensity = 0.0;
  std::optional<double> mean1;
  std::optional<double> mean0;
  std::optional<Interval> nu1;
  std::optional<Interval> nu0;
};

struct BoundsReport {
  Model model = Model::demsm;
  SensitivitySpec spec;
  std::vector<StratumBounds> strata;
  Interval mu1, mu0, ate;
  double mu1_ref = 0.0, mu0_ref = 0.0, ate_ref = 0.0;
};

namespace detail {

inline Interval nu1_for_model(const WeightedDistribution& d1,
                              const SensitivitySpec::Resolved& p, Model model) {
  switch (model) {
    case Model::msm: return msm_nu1_bounds(d1, p.lam);
    case Model::demsm: return demsm_nu1_bounds(d1, p.lam, p.gam);
    case Model::emsm_rec: return emsm_nu1_bounds_recommended(d1, p.lam, p.delta);
  }
  throw ValidationError("unknown model");
}

inline Interval nu0_for_model(const WeightedDistribution& d0,
                              const SensitivitySpec::Resolved& p, Model model) {
  switch (model) {
    case Model::msm: return msm_nu0_bounds(d0, p.lam);
    case Model::demsm: return demsm_nu0_bounds(d0, p.lam, p.gam_prime);
    case Model::emsm_rec: return emsm_nu0_bounds_recommended(d0, p.lam, p.delta);
  }
  throw ValidationError("unknown model");
}

}  // namespace detail

/// Population bounds on the two potential-outcome means and their difference.
/// Per stratum, the observed arm mean enters with the weight of its own arm
/// and the cross-arm mean is replaced by its sharp bounds; the two ends are
/// attained jointly across strata, and the difference interval pairs the
/// opposite ends.
inline BoundsReport aggregate_bounds(const ObservedLaw& law, const SensitivitySpec& spec,
                                     Model model) {
  law.validate();
  BoundsReport rep;
  rep.model = model;
  rep.spec = spec;
  double mu1_lo = 0.0, mu1_hi = 0.0, mu0_lo = 0.0, mu0_hi = 0.0;
  double mu1_ref = 0.0, mu0_ref = 0.0;
  for (const auto& st : law.strata) {
    const auto p = spec.resolve(st.id);
    const double w = st.weight;
    const double e = st.propensity;
    StratumBounds sb;
    sb.id = st.id;
    sb.weight = w;
    sb.propensity = e;
    if (st.dist1) {
      sb.mean1 = st.dist1->mean();
      sb.nu1 = detail::nu1_for_model(*st.dist1, p, model);
    } else if (w > 0.0) {
      throw MissingStratumDistribution("stratum '" + st.id +
                                       "' has positive weight but no treated-arm distribution");
    }
    if (st.dist0) {
      sb.mean0 = st.dist0->mean();
      sb.nu0 = detail::nu0_for_model(*st.dist0, p, model);
    } else if (w > 0.0) {
      throw MissingStratumDistribution("stratum '" + st.id +
                                       "' has positive weight but no control-arm distribution");
    }
    if (w > 0.0) {
      mu1_ref += w * *sb.mean1;
      mu0_ref += w * *sb.mean0;
      mu1_lo += w * (e * *sb.mean1 + (1.0 - e) * sb.nu1->lo);
      mu1_hi += w * (e * *sb.mean1 + (1.0 - e) * sb.nu1->hi);
      mu0_lo += w * ((1.0 - e) * *sb.mean0 + e * sb.nu0->lo);
      mu0_hi += w * ((1.0 - e) * *sb.mean0 + e * sb.nu0->hi);
    }
    rep.strata.push_back(std::move(sb));
  }
  rep.mu1 = {mu1_lo, mu1_hi};
  rep.mu0 = {mu0_lo, mu0_hi};
  rep.ate = {mu1_lo - mu0_hi, mu1_hi - mu0_lo};
  rep.mu1_ref = mu1_ref;
  rep.mu0_ref = mu0_ref;
  rep.ate_ref = mu1_ref - mu0_ref;
  return rep;
}

struct CurveRow {
  double value = 0.0;
  Interval mu1, mu0, ate;
  double mu1_ref = 0.0, mu0_ref = 0.0, ate_ref = 0.0;
};

/// Bounds along a one-dimensional sensitivity grid. For msm the grid holds
/// symmetric lambda values; for demsm the same value is used for lambda and
/// both gamma boxes; for the deviation-budget model the grid holds delta
/// values in [0, 1] applied to a fixed base lambda box.
inline std::vector<CurveRow> sensitivity_curve(const ObservedLaw& law,
                                               const std::vector<double>& grid, Model mode,
                                               const std::optional<LambdaPair>& base_lam = {}) {
  if (grid.empty()) throw EmptyGrid("sensitivity grid must be nonempty");
  std::vector<CurveRow> rows;
  rows.reserve(grid.size());
  for (double v : grid) {
    SensitivitySpec spec;
    switch (mode) {
      case Model::msm:
        spec.lam = LambdaPair::symmetric(v);
        break;
      case Model::demsm:
        spec.lam = LambdaPair::symmetric(v);
        spec.gam = GammaPair::symmetric(v);
        spec.gam_prime = spec.gam;
        break;
      case Model::emsm_rec:
        if (!base_lam)
          throw ValidationError("delta grid needs a base lambda box");
        spec.lam = *base_lam;
        spec.delta = EmsmDeltaSpec(v).delta;
        break;
    }
    const BoundsReport rep = aggregate_bounds(law, spec, mode);
    rows.push_back(CurveRow{v, rep.mu1, rep.mu0, rep.ate, rep.mu1_ref, rep.mu0_ref,
                            rep.ate_ref});
  }
  return rows;
}

}  // namespace demsm
