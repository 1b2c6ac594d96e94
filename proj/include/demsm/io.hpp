#pragma once

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "demsm/bounds.hpp"
#include "demsm/errors.hpp"
#include "demsm/estimate.hpp"
#include "demsm/oracle.hpp"

namespace demsm {

using json = nlohmann::ordered_json;

/// Canonical number rendering: 12 significant digits, shortest form.
inline std::string format_number(double x) {
  if (std::isinf(x)) return x > 0.0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", x);
  return buf;
}

namespace detail {

inline void dump_canonical_impl(const json& j, std::string& out, int depth) {
  const std::string pad(static_cast<std::size_t>(depth) * 2, ' ');
  const std::string pad_in(static_cast<std::size_t>(depth + 1) * 2, ' ');
  switch (j.type()) {
    case json::value_t::object: {
      if (j.empty()) {
        out += "{}";
        return;
      }
      out += "{\n";
      bool first = true;
      for (auto it = j.begin(); it != j.end(); ++it) {
        if (!first) out += ",\n";
        first = false;
        out += pad_in + nlohmann::json(it.key()).dump() + ": ";
        dump_canonical_impl(it.value(), out, depth + 1);
      }
      out += "\n" + pad + "}";
      return;
    }
    case json::value_t::array: {
      bool scalar_only = true;
      for (const auto& e : j)
        if (e.is_structured()) scalar_only = false;
      if (j.empty()) {
        out += "[]";
        return;
      }
      if (scalar_only) {
        out += "[";
        bool first = true;
        for (const auto& e : j) {
          if (!first) out += ", ";
          first = false;
          dump_canonical_impl(e, out, depth);
        }
        out += "]";
        return;
      }
      out += "[\n";
      bool first = true;
      for (const auto& e : j) {
        if (!first) out += ",\n";
        first = false;
        out += pad_in;
        dump_canonical_impl(e, out, depth + 1);
      }
      out += "\n" + pad + "]";
      return;
    }
    case json::value_t::number_float:
      out += format_number(j.get<double>());
      return;
    default:
      out += j.dump();
      return;
  }
}

}  // namespace detail

/// Serialize with stable key order, fixed layout, and canonical numbers, so
/// equal inputs produce byte-identical output. Ends with a newline.
inline std::string dump_canonical(const json& j) {
  std::string out;
  detail::dump_canonical_impl(j, out, 0);
  out += "\n";
  return out;
}

// ---------------------------------------------------------------------------
// observed law

inline json dist_to_json(const WeightedDistribution& d) {
  json j;
  j["support"] = d.support();
  j["probs"] = d.probs();
  return j;
}

inline WeightedDistribution dist_from_json(const json& j) {
  if (!j.contains("support") || !j.contains("probs"))
    throw DataError("distribution needs 'support' and 'probs' arrays");
  return WeightedDistribution(j.at("support").get<std::vector<double>>(),
                              j.at("probs").get<std::vector<double>>());
}

inline json law_to_json(const ObservedLaw& law) {
  json strata = json::array();
  for (const auto& st : law.strata) {
    json s;
    s["id"] = st.id;
    s["weight"] = st.weight;
    s["propensity"] = st.propensity;
    s["dist1"] = st.dist1 ? dist_to_json(*st.dist1) : json(nullptr);
    s["dist0"] = st.dist0 ? dist_to_json(*st.dist0) : json(nullptr);
    strata.push_back(std::move(s));
  }
  json j;
  j["strata"] = std::move(strata);
  return j;
}

inline ObservedLaw law_from_json(const json& j) {
  if (!j.contains("strata") || !j.at("strata").is_array())
    throw DataError("observed law needs a 'strata' array");
  ObservedLaw law;
  double total = 0.0;
  for (const auto& s : j.at("strata")) {
    Stratum st;
    st.id = s.value("id", std::string("stratum" + std::to_string(law.strata.size())));
    if (!s.contains("weight") || !s.contains("propensity"))
      throw DataError("stratum '" + st.id + "' needs 'weight' and 'propensity'");
    st.weight = s.at("weight").get<double>();
    st.propensity = s.at("propensity").get<double>();
    if (s.contains("dist1") && !s.at("dist1").is_null()) st.dist1 = dist_from_json(s.at("dist1"));
    if (s.contains("dist0") && !s.at("dist0").is_null()) st.dist0 = dist_from_json(s.at("dist0"));
    total += st.weight;
    law.strata.push_back(std::move(st));
  }
  if (law.strata.empty()) throw DataError("observed law has no strata");
  if (!(total > 0.0) || !std::isfinite(total))
    throw DataError("stratum weights must have a positive finite total");
  if (std::fabs(total - 1.0) > 1e-6)
    throw DataError("stratum weights must sum to 1, got " + format_number(total));
  for (auto& st : law.strata) st.weight /= total;  // absorb rounding in the file
  law.validate();
  return law;
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write file: " + path);
  out << content;
}

inline ObservedLaw load_law(const std::string& path) {
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw DataError("invalid JSON in " + path + ": " + e.what());
  }
  return law_from_json(j);
}

// ---------------------------------------------------------------------------
// sample CSV: header "y,t,x", one row per observation

inline Sample sample_from_csv(std::istream& in) {
  Sample s;
  std::string line;
  std::size_t lineno = 0;
  auto trim = [](std::string v) {
    const auto a = v.find_first_not_of(" \t\r");
    const auto b = v.find_last_not_of(" \t\r");
    return a == std::string::npos ? std::string() : v.substr(a, b - a + 1);
  };
  while (std::getline(in, line)) {
    ++lineno;
    const std::string stripped = trim(line);
    if (stripped.empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ls(stripped);
    std::string field;
    while (std::getline(ls, field, ',')) fields.push_back(trim(field));
    if (stripped.back() == ',') fields.push_back("");
    if (lineno == 1) {
      if (fields.size() != 3 || fields[0] != "y" || fields[1] != "t" || fields[2] != "x")
        throw DataError("sample CSV must start with header 'y,t,x'");
      continue;
    }
    if (fields.size() != 3)
      throw DataError("line " + std::to_string(lineno) + ": expected 3 fields, got " +
                      std::to_string(fields.size()));
    SampleRow row;
    std::size_t used = 0;
    try {
      row.y = std::stod(fields[0], &used);
    } catch (const std::exception&) {
      throw DataError("line " + std::to_string(lineno) + ": bad outcome '" + fields[0] + "'");
    }
    if (used != fields[0].size())
      throw DataError("line " + std::to_string(lineno) + ": bad outcome '" + fields[0] + "'");
    if (fields[1] == "0")
      row.t = 0;
    else if (fields[1] == "1")
      row.t = 1;
    else
      throw DataError("line " + std::to_string(lineno) + ": treatment must be 0 or 1, got '" +
                      fields[1] + "'");
    row.x = fields[2];
    s.rows.push_back(std::move(row));
  }
  if (s.rows.empty()) throw EmptySample("sample CSV has no data rows");
  return s;
}

inline Sample load_sample_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open file: " + path);
  return sample_from_csv(in);
}

// ---------------------------------------------------------------------------
// reports

inline json interval_to_json(const Interval& iv) { return json::array({iv.lo, iv.hi}); }

inline json gamma_to_json(const GammaPair& g) {
  json arr = json::array();
  arr.push_back(g.gamma1);
  if (g.unbounded())
    arr.push_back("inf");
  else
    arr.push_back(g.gamma2);
  return arr;
}

inline json spec_to_json(const SensitivitySpec& spec) {
  json j;
  j["lambda"] = json::array({spec.lam.lambda1, spec.lam.lambda2});
  j["gamma"] = gamma_to_json(spec.gam);
  j["gamma0"] = gamma_to_json(spec.gam_prime);
  j["delta"] = spec.delta;
  if (!spec.overrides.empty()) {
    json o;
    for (const auto& [id, p] : spec.overrides) {
      json e;
      if (p.lam) e["lambda"] = json::array({p.lam->lambda1, p.lam->lambda2});
      if (p.gam) e["gamma"] = gamma_to_json(*p.gam);
      if (p.gam_prime) e["gamma0"] = gamma_to_json(*p.gam_prime);
      if (p.delta) e["delta"] = *p.delta;
      o[id] = std::move(e);
    }
    j["overrides"] = std::move(o);
  }
  return j;
}

inline json report_to_json(const BoundsReport& rep) {
  json j;
  j["model"] = to_string(rep.model);
  j["spec"] = spec_to_json(rep.spec);
  j["mu1"] = interval_to_json(rep.mu1);
  j["mu0"] = interval_to_json(rep.mu0);
  j["ate"] = interval_to_json(rep.ate);
  json ref;
  ref["mu1"] = rep.mu1_ref;
  ref["mu0"] = rep.mu0_ref;
  ref["ate"] = rep.ate_ref;
  j["reference"] = std::move(ref);
  json strata = json::array();
  for (const auto& sb : rep.strata) {
    json s;
    s["id"] = sb.id;
    s["weight"] = sb.weight;
    s["propensity"] = sb.propensity;
    s["mean1"] = sb.mean1 ? json(*sb.mean1) : json(nullptr);
    s["mean0"] = sb.mean0 ? json(*sb.mean0) : json(nullptr);
    s["nu1"] = sb.nu1 ? interval_to_json(*sb.nu1) : json(nullptr);
    s["nu0"] = sb.nu0 ? interval_to_json(*sb.nu0) : json(nullptr);
    strata.push_back(std::move(s));
  }
  j["strata"] = std::move(strata);
  return j;
}

inline std::string report_to_csv(const BoundsReport& rep) {
  std::string out = "quantity,lo,hi\n";
  auto row = [&](const std::string& name, const Interval& iv) {
    out += name + "," + format_number(iv.lo) + "," + format_number(iv.hi) + "\n";
  };
  row("mu1", rep.mu1);
  row("mu0", rep.mu0);
  row("ate", rep.ate);
  out += "mu1_ref," + format_number(rep.mu1_ref) + "," + format_number(rep.mu1_ref) + "\n";
  out += "mu0_ref," + format_number(rep.mu0_ref) + "," + format_number(rep.mu0_ref) + "\n";
  out += "ate_ref," + format_number(rep.ate_ref) + "," + format_number(rep.ate_ref) + "\n";
  return out;
}

inline json bootstrap_to_json(const BootstrapCI& ci) {
  json j;
  j["replicates"] = ci.replicates;
  j["level"] = ci.level;
  j["seed"] = ci.seed;
  auto endpoint = [](const EndpointCI& e) {
    json x;
    x["estimate"] = e.estimate;
    x["ci"] = json::array({e.lo, e.hi});
    return x;
  };
  json endpoints;
  endpoints["mu1_lo"] = endpoint(ci.mu1_lo);
  endpoints["mu1_hi"] = endpoint(ci.mu1_hi);
  endpoints["mu0_lo"] = endpoint(ci.mu0_lo);
  endpoints["mu0_hi"] = endpoint(ci.mu0_hi);
  endpoints["ate_lo"] = endpoint(ci.ate_lo);
  endpoints["ate_hi"] = endpoint(ci.ate_hi);
  j["endpoints"] = std::move(endpoints);
  return j;
}

inline std::string curve_to_csv(const std::vector<CurveRow>& rows) {
  std::string out = "value,mu1_lo,mu1_hi,mu0_lo,mu0_hi,ate_lo,ate_hi,mu1_ref,mu0_ref,ate_ref\n";
  for (const auto& r : rows) {
    out += format_number(r.value);
    for (double v : {r.mu1.lo, r.mu1.hi, r.mu0.lo, r.mu0.hi, r.ate.lo, r.ate.hi, r.mu1_ref,
                     r.mu0_ref, r.ate_ref})
      out += "," + format_number(v);
    out += "\n";
  }
  return out;
}

inline json witness_to_json(const WitnessJoint& w) {
  json j;
  j["p_treat"] = w.p_treat;
  j["u_given_t1"] = w.u_given_t1;
  j["u_given_t0"] = w.u_given_t0;
  j["y1_given_u1"] = dist_to_json(w.y1_given_u1);
  j["y1_given_u0"] = dist_to_json(w.y1_given_u0);
  j["y0_given_u1"] = dist_to_json(w.y0_given_u1);
  j["y0_given_u0"] = dist_to_json(w.y0_given_u0);
  j["coupling"] = w.product_coupling ? "product" : "unspecified";
  return j;
}

inline json audit_to_json(const WitnessAudit& a) {
  json j;
  j["tolerance"] = a.tolerance;
  j["all_pass"] = a.all_pass();
  j["nu1_attained"] = a.nu1_attained;
  j["nu1_target"] = a.nu1_target;
  j["nu0_attained"] = a.nu0_attained;
  j["nu0_target"] = a.nu0_target;
  json checks = json::array();
  for (const auto& c : a.checks) {
    json e;
    e["name"] = c.name;
    e["pass"] = c.pass;
    e["error"] = c.error;
    e["detail"] = c.detail;
    checks.push_back(std::move(e));
  }
  j["checks"] = std::move(checks);
  return j;
}

}  // namespace demsm
