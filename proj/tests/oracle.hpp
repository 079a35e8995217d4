#pragma once

// Test-side reference implementations. Nothing here calls into disco_core, so
// agreement with the library is a real cross-check.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "disco/losses.hpp"

namespace oracle {

inline std::string data_path(const std::string& name) {
  return std::string(DISCO_TEST_DATA_DIR) + "/" + name;
}

inline nlohmann::json load_json(const std::string& name) {
  std::ifstream in(data_path(name));
  std::stringstream ss;
  ss << in.rdbuf();
  return nlohmann::json::parse(ss.str());
}

inline double hex_double(const std::string& s) { return std::strtod(s.c_str(), nullptr); }

inline double sig(double x) { return 1.0 / (1.0 + std::exp(-x)); }
inline double neg_logsig(double x) { return std::log1p(std::exp(-x)); }

// Closed forms of the pointwise losses at beta * rho.
inline double dpo(double rho, double beta) { return neg_logsig(beta * rho); }
inline double slic(double rho, double beta) { return std::max(0.0, 1.0 - beta * rho); }
inline double exp_loss(double rho, double beta) { return std::exp(-beta * rho); }
inline double ipo(double rho, double beta) {
  const double d = rho - 1.0 / (2.0 * beta);
  return d * d;
}

// Direct normalization: p_i = e^{l_i} / sum_j e^{l_j}.
inline std::vector<double> brute_log_softmax(const std::vector<double>& logits) {
  long double sum = 0.0L;
  for (double l : logits) sum += std::exp(static_cast<long double>(l));
  std::vector<double> out;
  for (double l : logits) {
    out.push_back(static_cast<double>(std::log(std::exp(static_cast<long double>(l)) / sum)));
  }
  return out;
}

// Random batches from a generator unrelated to the library's.
inline disco::PreferenceBatch random_batch(std::mt19937_64& gen, std::size_t n,
                                           double lo = -12.0, double hi = -0.05) {
  std::uniform_real_distribution<double> d(lo, hi);
  auto draw = [&] {
    std::vector<double> v(n);
    for (double& x : v) x = d(gen);
    return disco::BatchVector(std::move(v));
  };
  disco::PreferenceBatch b;
  b.policy_chosen_logps = draw();
  b.policy_rejected_logps = draw();
  b.reference_chosen_logps = draw();
  b.reference_rejected_logps = draw();
  return b;
}

inline double max_abs_diff(const disco::BatchVector& a, const disco::BatchVector& b) {
  if (a.size() != b.size()) return INFINITY;
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace oracle
