#pragma once

// Test-side oracles, kept independent of the library implementation paths
// they are used to check.

#include <Eigen/Core>
#include <cmath>
#include <random>
#include <vector>

namespace oracles {

// Digamma via central differences of std::lgamma. Accuracy is limited by
// cancellation to roughly 1e-8 relative; good enough for cross-checks.
inline double fd_digamma(double x) {
  const double h = 1e-6 * std::max(1.0, x);
  return (std::lgamma(x + h) - std::lgamma(x - h)) / (2.0 * h);
}

struct McEstimate {
  double mean = 0;
  double se = 0;
};

// Monte-Carlo estimate of E[log v] for v ~ Beta(a, b).
inline McEstimate mc_expected_log_v(double a, double b, int n,
                                    unsigned seed) {
  std::mt19937_64 gen(seed);
  std::gamma_distribution<double> ga(a, 1.0), gb(b, 1.0);
  double sum = 0, sum2 = 0;
  for (int i = 0; i < n; ++i) {
    const double x = ga(gen), y = gb(gen);
    const double v = std::log(x) - std::log(x + y);
    sum += v;
    sum2 += v * v;
  }
  McEstimate e;
  e.mean = sum / n;
  e.se = std::sqrt((sum2 / n - e.mean * e.mean) / n);
  return e;
}

// Monte-Carlo estimate of E[log(1 - prod_{t<=m} v_t)], v_t ~ Beta(tau_t1, tau_t2).
inline McEstimate mc_stick_log(const Eigen::ArrayX2d& tau, int m, int n,
                               unsigned seed) {
  std::mt19937_64 gen(seed);
  std::vector<std::gamma_distribution<double>> ga, gb;
  for (int t = 0; t < m; ++t) {
    ga.emplace_back(tau(t, 0), 1.0);
    gb.emplace_back(tau(t, 1), 1.0);
  }
  double sum = 0, sum2 = 0;
  for (int i = 0; i < n; ++i) {
    double log_prod = 0;
    for (int t = 0; t < m; ++t) {
      const double x = ga[t](gen), y = gb[t](gen);
      log_prod += std::log(x) - std::log(x + y);
    }
    const double v = std::log1p(-std::exp(log_prod));
    sum += v;
    sum2 += v * v;
  }
  McEstimate e;
  e.mean = sum / n;
  e.se = std::sqrt((sum2 / n - e.mean * e.mean) / n);
  return e;
}

// Interpolation-free average precision over a ranking given by (score desc,
// index asc); naive quadratic scan.
inline double naive_average_precision(const std::vector<double>& scores,
                                      const std::vector<int>& truth) {
  const int n = static_cast<int>(scores.size());
  std::vector<int> order(n);
  for (int i = 0; i < n; ++i) order[i] = i;
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      const bool better = scores[order[j]] > scores[order[i]] ||
                          (scores[order[j]] == scores[order[i]] &&
                           order[j] < order[i]);
      if (better) std::swap(order[i], order[j]);
    }
  }
  int positives = 0;
  for (int f : truth) positives += f;
  double ap = 0;
  int hits = 0;
  for (int r = 0; r < n; ++r) {
    if (truth[order[r]]) {
      ++hits;
      ap += static_cast<double>(hits) / (r + 1);
    }
  }
  return ap / positives;
}

// Max recall at precision >= p, averaged over the grid; naive per-rank scan.
inline double naive_mar_single(const std::vector<int>& ranked_relevance,
                               const std::vector<double>& grid) {
  const int n = static_cast<int>(ranked_relevance.size());
  int total = 0;
  for (int f : ranked_relevance) total += f;
  double acc = 0;
  for (double p : grid) {
    double best = 0;
    int hits = 0;
    for (int r = 0; r < n; ++r) {
      hits += ranked_relevance[r];
      const double prec = static_cast<double>(hits) / (r + 1);
      const double rec = total > 0 ? static_cast<double>(hits) / total : 0.0;
      if (prec >= p && rec > best) best = rec;
    }
    acc += best;
  }
  return acc / static_cast<double>(grid.size());
}

}  // namespace oracles
