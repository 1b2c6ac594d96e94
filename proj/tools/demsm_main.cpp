// Command-line front end for the sensitivity-bounds library.
//
// Subcommands: bounds, curve, compare, witness, check. Inputs are either a
// population law (--law, JSON) or raw observations (--sample, CSV). Exit
// codes: 0 success, 2 invalid configuration, 3 data problems, 4 failed
// audit or cross-check.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>

#include "demsm/demsm.hpp"

namespace {

struct Opts {
  std::string law, sample, params, out;
  std::string format = "json";
  std::string model = "demsm";
  double lambda = 1.0;
  std::string gamma, gamma0;
  double delta = 1.0;
  std::string grid;
  int boot = 0;
  double level = 0.95;
  std::uint64_t seed = 12345;
  double resolution = 0.01;
  std::string stratum;
  bool corrupt = false;
};

demsm::ObservedLaw load_input(const Opts& o) {
  if (o.law.empty() == o.sample.empty())
    throw demsm::ValidationError("exactly one of --law and --sample is required");
  if (!o.law.empty()) return demsm::load_law(o.law);
  return demsm::empirical_observed_law(demsm::load_sample_csv(o.sample));
}

double parse_double(const std::string& s, const std::string& what) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw demsm::ValidationError("bad " + what + " value '" + s + "'");
  }
}

demsm::GammaPair parse_gamma(const std::string& s, const std::string& what) {
  if (s == "inf") return demsm::GammaPair::uninformative();
  return demsm::GammaPair::symmetric(parse_double(s, what));
}

std::vector<double> parse_grid(const std::string& s) {
  std::vector<double> grid;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    const auto a = tok.find_first_not_of(" \t");
    const auto b = tok.find_last_not_of(" \t");
    if (a == std::string::npos) continue;
    grid.push_back(parse_double(tok.substr(a, b - a + 1), "grid"));
  }
  return grid;
}

demsm::LambdaPair lambda_from_json(const demsm::json& v) {
  if (v.is_number()) return demsm::LambdaPair::symmetric(v.get<double>());
  if (v.is_array() && v.size() == 2)
    return demsm::LambdaPair(v[0].get<double>(), v[1].get<double>());
  throw demsm::ValidationError("lambda override must be a number or [lambda1, lambda2]");
}

demsm::GammaPair gamma_from_json(const demsm::json& v) {
  if (v.is_string()) {
    if (v.get<std::string>() == "inf") return demsm::GammaPair::uninformative();
    throw demsm::ValidationError("gamma override string must be 'inf'");
  }
  if (v.is_number()) return demsm::GammaPair::symmetric(v.get<double>());
  if (v.is_array() && v.size() == 2) {
    const double g1 = v[0].get<double>();
    if (v[1].is_string() && v[1].get<std::string>() == "inf") {
      demsm::GammaPair g(g1, std::numeric_limits<double>::infinity());
      return g;
    }
    return demsm::GammaPair(g1, v[1].get<double>());
  }
  throw demsm::ValidationError("gamma override must be a number, [gamma1, gamma2], or 'inf'");
}

demsm::SensitivitySpec build_spec(const Opts& o) {
  demsm::SensitivitySpec spec;
  spec.lam = demsm::LambdaPair::symmetric(o.lambda);
  spec.gam = o.gamma.empty() ? demsm::GammaPair::uninformative()
                             : parse_gamma(o.gamma, "gamma");
  spec.gam_prime = o.gamma0.empty() ? spec.gam : parse_gamma(o.gamma0, "gamma0");
  spec.delta = demsm::EmsmDeltaSpec(o.delta).delta;
  if (!o.params.empty()) {
    demsm::json j;
    try {
      j = demsm::json::parse(demsm::read_file(o.params));
    } catch (const nlohmann::json::exception& e) {
      throw demsm::DataError("invalid JSON in " + o.params + ": " + e.what());
    }
    if (!j.is_object())
      throw demsm::ValidationError("--params must hold an object keyed by stratum id");
    for (auto it = j.begin(); it != j.end(); ++it) {
      demsm::StratumParams p;
      const demsm::json& e = it.value();
      if (e.contains("lambda")) p.lam = lambda_from_json(e.at("lambda"));
      if (e.contains("gamma")) p.gam = gamma_from_json(e.at("gamma"));
      if (e.contains("gamma0")) p.gam_prime = gamma_from_json(e.at("gamma0"));
      if (e.contains("delta")) p.delta = demsm::EmsmDeltaSpec(e.at("delta").get<double>()).delta;
      spec.overrides[it.key()] = std::move(p);
    }
  }
  return spec;
}

void emit(const Opts& o, const std::string& payload) {
  if (o.out.empty())
    std::cout << payload;
  else
    demsm::write_file(o.out, payload);
}

int run_bounds(const Opts& o) {
  const demsm::Model model = demsm::model_from_string(o.model);
  const demsm::SensitivitySpec spec = build_spec(o);
  if (o.format != "json" && o.format != "csv")
    throw demsm::ValidationError("unknown format '" + o.format + "', expected json|csv");
  if (o.boot > 0) {
    if (o.sample.empty())
      throw demsm::ValidationError("--boot requires --sample (resampling needs rows)");
    if (o.format != "json")
      throw demsm::ValidationError("--boot output is JSON only");
    const demsm::Sample s = demsm::load_sample_csv(o.sample);
    const demsm::BoundsReport rep = demsm::plugin_bounds(s, spec, model);
    const demsm::BootstrapCI ci = demsm::bootstrap_ci(s, spec, model, o.boot, o.level, o.seed);
    demsm::json j = demsm::report_to_json(rep);
    j["bootstrap"] = demsm::bootstrap_to_json(ci);
    emit(o, demsm::dump_canonical(j));
    return 0;
  }
  const demsm::ObservedLaw law = load_input(o);
  const demsm::BoundsReport rep = demsm::aggregate_bounds(law, spec, model);
  if (o.format == "csv")
    emit(o, demsm::report_to_csv(rep));
  else
    emit(o, demsm::dump_canonical(demsm::report_to_json(rep)));
  return 0;
}

int run_curve(const Opts& o) {
  const demsm::ObservedLaw law = load_input(o);
  const demsm::Model mode = demsm::model_from_string(o.model);
  const std::vector<double> grid = parse_grid(o.grid);
  const std::vector<demsm::CurveRow> rows =
      demsm::sensitivity_curve(law, grid, mode, demsm::LambdaPair::symmetric(o.lambda));
  emit(o, demsm::curve_to_csv(rows));
  return 0;
}

int run_compare(const Opts& o) {
  const demsm::ObservedLaw law = load_input(o);
  const demsm::SensitivitySpec spec = build_spec(o);
  const demsm::BoundsReport rep_msm = demsm::aggregate_bounds(law, spec, demsm::Model::msm);
  const demsm::BoundsReport rep_de = demsm::aggregate_bounds(law, spec, demsm::Model::demsm);
  const demsm::BoundsReport rep_em =
      demsm::aggregate_bounds(law, spec, demsm::Model::emsm_rec);

  demsm::json j;
  j["spec"] = demsm::spec_to_json(spec);
  auto block = [](const demsm::BoundsReport& r) {
    demsm::json m;
    m["mu1"] = demsm::interval_to_json(r.mu1);
    m["mu0"] = demsm::interval_to_json(r.mu0);
    m["ate"] = demsm::interval_to_json(r.ate);
    return m;
  };
  demsm::json models;
  models["msm"] = block(rep_msm);
  models["demsm"] = block(rep_de);
  models["emsm"] = block(rep_em);
  j["models"] = std::move(models);
  demsm::json ref;
  ref["mu1"] = rep_de.mu1_ref;
  ref["mu0"] = rep_de.mu0_ref;
  ref["ate"] = rep_de.ate_ref;
  j["reference"] = std::move(ref);

  const double tau = demsm::tau_level(spec.lam);
  const demsm::ImpliedLambda bar = demsm::implied_lambda(spec.lam, spec.gam);
  const demsm::GammaPair match = demsm::matching_gammas(spec.delta, tau);
  const demsm::LambdaPair tilde = demsm::emsm_implied_lambdas(spec.delta, spec.lam);
  demsm::json diag;
  diag["tau"] = tau;
  diag["tau_bar"] = bar.tau_bar;
  diag["implied_lambda_bar"] = demsm::json::array({bar.lambda_bar1, bar.lambda_bar2});
  diag["matching_gamma"] = demsm::gamma_to_json(match);
  diag["emsm_implied_lambda"] = demsm::json::array({tilde.lambda1, tilde.lambda2});
  diag["symmetric_matching_feasible"] = demsm::symmetric_matching_feasible(spec.delta, tau);
  j["diagnostics"] = std::move(diag);

  emit(o, demsm::dump_canonical(j));
  return 0;
}

demsm::WitnessJoint corrupted(demsm::WitnessJoint w) {
  // Test hook: shift a latent class weight so the treatment-ratio audit
  // cannot hold at a lambda box end.
  w.u_given_t0 = w.u_given_t0 >= 0.5 ? w.u_given_t0 - 0.25 : w.u_given_t0 + 0.25;
  return w;
}

int run_witness(const Opts& o) {
  const demsm::ObservedLaw law = load_input(o);
  const demsm::SensitivitySpec spec = build_spec(o);
  const double tol = 1e-10;
  demsm::json strata = demsm::json::array();
  bool all = true;
  for (const auto& st : law.strata) {
    if (!o.stratum.empty() && st.id != o.stratum) continue;
    if (!st.dist1 || !st.dist0)
      throw demsm::MissingStratumDistribution("stratum '" + st.id +
                                              "' needs both arms for a witness");
    const auto p = spec.resolve(st.id);
    demsm::WitnessJoint w =
        demsm::build_witness(*st.dist1, *st.dist0, p.lam, p.gam, p.gam_prime, st.propensity);
    if (o.corrupt) w = corrupted(std::move(w));
    demsm::SensitivitySpec local;
    local.lam = p.lam;
    local.gam = p.gam;
    local.gam_prime = p.gam_prime;
    const demsm::WitnessAudit audit = demsm::verify_witness(w, *st.dist1, *st.dist0, local, tol);
    all = all && audit.all_pass();
    demsm::json e;
    e["id"] = st.id;
    e["witness"] = demsm::witness_to_json(w);
    e["audit"] = demsm::audit_to_json(audit);
    strata.push_back(std::move(e));
  }
  if (strata.empty())
    throw demsm::ValidationError("stratum '" + o.stratum + "' not found in the input");
  demsm::json j;
  j["all_pass"] = all;
  j["tolerance"] = tol;
  j["strata"] = std::move(strata);
  emit(o, demsm::dump_canonical(j));
  return all ? 0 : 4;
}

int run_check(const Opts& o) {
  const demsm::ObservedLaw law = load_input(o);
  const demsm::SensitivitySpec spec = build_spec(o);
  std::string csv = "stratum,arm,endpoint,closed,greedy,greedy_diff,grid,grid_gap\n";
  bool ok = true;
  bool any = false;
  const double greedy_tol = 1e-12;
  auto row = [&](const std::string& id, int arm, const char* endpoint, double closed,
                 double greedy, double grid, bool have_grid) {
    const double gdiff = std::fabs(closed - greedy);
    // the oracle searches inside the identified set, so it must not beat the
    // closed form, and must come close at the chosen resolution
    const double gap = std::string(endpoint) == "hi" ? closed - grid : grid - closed;
    ok = ok && gdiff <= greedy_tol;
    if (have_grid) ok = ok && gap >= -1e-12 && gap <= 2.0 * o.resolution;
    csv += id + "," + std::to_string(arm) + "," + endpoint + "," + demsm::format_number(closed) +
           "," + demsm::format_number(greedy) + "," + demsm::format_number(gdiff) + ",";
    csv += have_grid ? demsm::format_number(grid) + "," + demsm::format_number(gap)
                     : std::string(",");
    csv += "\n";
  };
  for (const auto& st : law.strata) {
    if (!o.stratum.empty() && st.id != o.stratum) continue;
    const auto p = spec.resolve(st.id);
    if (st.dist1) {
      any = true;
      const demsm::Interval closed = demsm::demsm_nu1_bounds(*st.dist1, p.lam, p.gam);
      const demsm::ImpliedLambda bar = demsm::implied_lambda(p.lam, p.gam);
      row(st.id, 1, "lo", closed.lo,
          demsm::greedy_density_ratio_bound(*st.dist1, bar.lambda_bar1, bar.lambda_bar2,
                                            demsm::Direction::minimize),
          demsm::binary_u_grid_oracle(*st.dist1, p.lam, p.gam, demsm::Direction::minimize,
                                      o.resolution),
          true);
      row(st.id, 1, "hi", closed.hi,
          demsm::greedy_density_ratio_bound(*st.dist1, bar.lambda_bar1, bar.lambda_bar2,
                                            demsm::Direction::maximize),
          demsm::binary_u_grid_oracle(*st.dist1, p.lam, p.gam, demsm::Direction::maximize,
                                      o.resolution),
          true);
    }
    if (st.dist0) {
      any = true;
      const demsm::Interval closed = demsm::demsm_nu0_bounds(*st.dist0, p.lam, p.gam_prime);
      const demsm::ImpliedLambda bar = demsm::implied_lambda_control(p.lam, p.gam_prime);
      const bool have_grid = p.lam.lambda1 > 0.0;
      double grid_lo = 0.0, grid_hi = 0.0;
      if (have_grid) {
        const demsm::LambdaPair inverted(1.0 / p.lam.lambda2, 1.0 / p.lam.lambda1);
        grid_lo = demsm::binary_u_grid_oracle(*st.dist0, inverted, p.gam_prime,
                                              demsm::Direction::minimize, o.resolution);
        grid_hi = demsm::binary_u_grid_oracle(*st.dist0, inverted, p.gam_prime,
                                              demsm::Direction::maximize, o.resolution);
      }
      row(st.id, 0, "lo", closed.lo,
          demsm::greedy_density_ratio_bound(*st.dist0, bar.lambda_bar1, bar.lambda_bar2,
                                            demsm::Direction::minimize),
          grid_lo, have_grid);
      row(st.id, 0, "hi", closed.hi,
          demsm::greedy_density_ratio_bound(*st.dist0, bar.lambda_bar1, bar.lambda_bar2,
                                            demsm::Direction::maximize),
          grid_hi, have_grid);
    }
  }
  if (!any) throw demsm::ValidationError("no strata with distributions matched the request");
  emit(o, csv);
  return ok ? 0 : 4;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sharp bounds for causal means under marginal sensitivity models"};
  app.require_subcommand(1);
  Opts o;

  auto add_input = [&](CLI::App* cmd) {
    cmd->add_option("--law", o.law, "observed-law JSON file");
    cmd->add_option("--sample", o.sample, "sample CSV file with header y,t,x");
    cmd->add_option("--out", o.out, "write output here instead of stdout");
    cmd->add_option("--params", o.params, "per-stratum parameter overrides (JSON)");
  };
  auto add_spec = [&](CLI::App* cmd, bool gamma_required) {
    cmd->add_option("--lambda", o.lambda, "symmetric treatment box (1/L, L), L >= 1");
    auto* g = cmd->add_option("--gamma", o.gamma,
                              "symmetric outcome box (1/G, G), G >= 1, or 'inf'");
    cmd->add_option("--gamma0", o.gamma0, "control-arm outcome box; defaults to --gamma");
    cmd->add_option("--delta", o.delta, "deviation-budget loading in [0, 1]");
    if (gamma_required) g->required();
  };

  auto* bounds = app.add_subcommand("bounds", "aggregate bounds for one specification");
  add_input(bounds);
  add_spec(bounds, false);
  bounds->add_option("--model", o.model, "msm | demsm | emsm");
  bounds->add_option("--format", o.format, "json | csv");
  bounds->add_option("--boot", o.boot, "bootstrap replicates (needs --sample)");
  bounds->add_option("--level", o.level, "bootstrap confidence level");
  bounds->add_option("--seed", o.seed, "bootstrap seed");

  auto* curve = app.add_subcommand("curve", "bounds along a sensitivity grid (CSV)");
  add_input(curve);
  curve->add_option("--model", o.model, "msm | demsm | emsm (emsm reads --grid as deltas)");
  curve->add_option("--grid", o.grid, "comma-separated grid values");
  curve->add_option("--lambda", o.lambda, "base lambda for the emsm delta grid");

  auto* compare = app.add_subcommand("compare", "all three models side by side");
  add_input(compare);
  add_spec(compare, false);

  auto* witness = app.add_subcommand("witness", "attaining joint law per stratum, audited");
  add_input(witness);
  add_spec(witness, true);
  witness->add_option("--stratum", o.stratum, "restrict to one stratum id");
  witness->add_flag("--corrupt-witness", o.corrupt)->group("");  // test hook

  auto* check = app.add_subcommand("check", "closed form vs greedy vs grid oracle (CSV)");
  add_input(check);
  add_spec(check, true);
  check->add_option("--resolution", o.resolution, "grid-oracle resolution in (0, 0.1]");
  check->add_option("--stratum", o.stratum, "restrict to one stratum id");

  try {
    app.parse(argc, argv);
    if (*bounds) return run_bounds(o);
    if (*curve) return run_curve(o);
    if (*compare) return run_compare(o);
    if (*witness) return run_witness(o);
    if (*check) return run_check(o);
    return 2;
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  } catch (const demsm::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const demsm::DataError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}
