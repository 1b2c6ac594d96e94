#pragma once

// Shared test utilities: random instance generators, a brute-force vertex
// enumeration oracle for the density-ratio linear program, and a small
// subprocess harness for driving the command-line binary.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <unistd.h>
#include <vector>

#include "demsm/demsm.hpp"

namespace testutil {

// Random discrete distribution with up to max_points support points.
// Values stay in a modest range so absolute tolerances stay meaningful.
inline demsm::WeightedDistribution random_dist(std::mt19937_64& rng, int max_points = 6,
                                               double y_lo = -2.0, double y_hi = 2.0) {
  std::uniform_int_distribution<int> np(1, max_points);
  std::uniform_real_distribution<double> yv(y_lo, y_hi);
  std::uniform_real_distribution<double> wv(0.05, 1.0);
  const int n = np(rng);
  std::vector<double> vals(static_cast<std::size_t>(n)), ws(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    vals[static_cast<std::size_t>(i)] = yv(rng);
    ws[static_cast<std::size_t>(i)] = wv(rng);
  }
  return demsm::WeightedDistribution(vals, ws);
}

inline demsm::LambdaPair random_lambda(std::mt19937_64& rng, double max_upper = 3.0) {
  std::uniform_real_distribution<double> lo(0.0, 1.0), hi(1.0, max_upper);
  return demsm::LambdaPair(lo(rng), hi(rng));
}

inline demsm::GammaPair random_gamma(std::mt19937_64& rng, double max_upper = 3.0) {
  std::uniform_real_distribution<double> lo(0.0, 1.0), hi(1.0, max_upper);
  return demsm::GammaPair(lo(rng), hi(rng));
}

// Lambda pair whose pivot level tau = (l2-1)/(l2-l1) is at least 1/2,
// which the deviation-budget formulas require.
inline demsm::LambdaPair random_lambda_tau_half(std::mt19937_64& rng, double max_upper = 3.0) {
  std::uniform_real_distribution<double> hi(1.0, max_upper);
  const double l2 = hi(rng);
  std::uniform_real_distribution<double> lo(std::max(0.0, 2.0 - l2), 1.0);
  return demsm::LambdaPair(lo(rng), l2);
}

// Exhaustive optimum of E[r(Y) Y] over r(y) in [lo, hi] with E[r(Y)] = 1,
// by enumerating polytope vertices: every coordinate at a box end except at
// most one, whose value is forced by the normalization. Only for bounded
// boxes and small supports; completely independent of the greedy solver.
inline double vertex_lp_bound(const demsm::WeightedDistribution& d, double lo, double hi,
                              demsm::Direction dir) {
  const auto& ys = d.support();
  const auto& ps = d.probs();
  const int n = static_cast<int>(ys.size());
  const bool maximize = dir == demsm::Direction::maximize;
  double best = maximize ? -std::numeric_limits<double>::infinity()
                         : std::numeric_limits<double>::infinity();
  bool found = false;
  for (int pivot = -1; pivot < n; ++pivot) {
    const int free = pivot < 0 ? n : n - 1;
    for (int mask = 0; mask < (1 << free); ++mask) {
      double budget = 1.0;
      double value = 0.0;
      int bit = 0;
      for (int i = 0; i < n; ++i) {
        if (i == pivot) continue;
        const double r = ((mask >> bit++) & 1) != 0 ? hi : lo;
        budget -= ps[static_cast<std::size_t>(i)] * r;
        value += ps[static_cast<std::size_t>(i)] * r * ys[static_cast<std::size_t>(i)];
      }
      if (pivot < 0) {
        if (std::fabs(budget) > 1e-9) continue;
      } else {
        double r = budget / ps[static_cast<std::size_t>(pivot)];
        if (r < lo - 1e-9 || r > hi + 1e-9) continue;
        r = std::clamp(r, lo, hi);
        value += ps[static_cast<std::size_t>(pivot)] * r * ys[static_cast<std::size_t>(pivot)];
      }
      found = true;
      best = maximize ? std::max(best, value) : std::min(best, value);
    }
  }
  if (!found) throw std::runtime_error("vertex enumeration found no feasible point");
  return best;
}

// ---------------------------------------------------------------------------
// fixtures

inline demsm::WeightedDistribution uniform012() {
  return demsm::WeightedDistribution::uniform_on({0.0, 1.0, 2.0});
}

// Single stratum, propensity 1/2, both arms uniform on {0, 1, 2}.
inline demsm::ObservedLaw uniform_law() {
  demsm::Stratum st;
  st.id = "a";
  st.weight = 1.0;
  st.propensity = 0.5;
  st.dist1 = uniform012();
  st.dist0 = uniform012();
  demsm::ObservedLaw law;
  law.strata.push_back(std::move(st));
  return law;
}

inline std::string uniform_law_json() {
  return demsm::dump_canonical(demsm::law_to_json(uniform_law()));
}

// ---------------------------------------------------------------------------
// subprocess harness

struct CmdResult {
  int exit_code = -1;
  std::string out;
  std::string err;
};

inline std::filesystem::path test_tmp_dir() {
  static const std::filesystem::path dir = [] {
    auto p = std::filesystem::temp_directory_path() /
             ("demsm_tests_" + std::to_string(::getpid()));
    std::filesystem::create_directories(p);
    return p;
  }();
  return dir;
}

inline std::string write_temp(const std::string& name, const std::string& content) {
  const auto path = test_tmp_dir() / name;
  std::ofstream out(path, std::ios::binary);
  out << content;
  out.close();
  return path.string();
}

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Run the CLI binary with the given argument string; capture exit code,
// stdout, and stderr.
inline CmdResult run_cli(const std::string& args) {
  static int counter = 0;
  const auto dir = test_tmp_dir();
  const auto out_path = dir / ("stdout_" + std::to_string(counter) + ".txt");
  const auto err_path = dir / ("stderr_" + std::to_string(counter) + ".txt");
  ++counter;
  const std::string cmd = std::string(DEMSM_CLI_PATH) + " " + args + " > " +
                          out_path.string() + " 2> " + err_path.string();
  const int status = std::system(cmd.c_str());
  CmdResult r;
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = slurp(out_path);
  r.err = slurp(err_path);
  std::filesystem::remove(out_path);
  std::filesystem::remove(err_path);
  return r;
}

}  // namespace testutil
