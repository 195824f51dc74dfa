#pragma once

// Per-image update kernels shared by training and test-time inference.

#include <algorithm>
#include <cmath>
#include <thread>
#include <vector>

#include "wsibp/data_model.hpp"
#include "wsibp/special_math.hpp"
#include "wsibp/train.hpp"

namespace wsibp::detail {

constexpr double kTwoPi = 6.283185307179586476925286766559;

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

/// Runs fn(i) for i in [0, n) over contiguous blocks on `threads` workers.
/// Safe whenever iterations touch disjoint state.
template <typename Fn>
void parallel_images(int n, int threads, Fn&& fn) {
  threads = std::max(1, std::min(threads, n));
  if (threads == 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(threads));
  const int chunk = (n + threads - 1) / threads;
  for (int t = 0; t < threads; ++t) {
    const int lo = t * chunk;
    const int hi = std::min(n, lo + chunk);
    if (lo >= hi) break;
    pool.emplace_back([lo, hi, &fn] {
      for (int i = lo; i < hi; ++i) fn(i);
    });
  }
  for (auto& th : pool) th.join();
}

/// Stick terms of the assignment logit at the image's current tau.
inline Eigen::ArrayXd assignment_stick_terms(const StickTable& table,
                                             bool literal) {
  if (literal) return table.elog_pi_literal - table.bound;
  return table.elog_pi - table.bound;
}

/// Per-image stick update; all q weights come from the pre-update tau.
inline void stick_pass(VariationalState::Image& img, double alpha) {
  const Eigen::Index n = img.nu.rows();
  const StickTable table = stick_table(img.tau);
  const Eigen::ArrayXd sum_nu = img.nu.colwise().sum().transpose().array();
  const Eigen::ArrayXd w = (static_cast<double>(n) - sum_nu).max(0.0);
  const StickUpdateSums sums = stick_q_sums(table, w);

  double suffix_nu = 0.0;
  for (Eigen::Index k = img.tau.rows() - 1; k >= 0; --k) {
    suffix_nu += sum_nu(k);
    img.tau(k, 0) = alpha + suffix_nu + sums.cross(k);
    img.tau(k, 1) = 1.0 + sums.qk(k);
  }
}

/// Assignment pass over one image with a precomputed stick table. Patches
/// are independent for a fixed factor, so the factor loop is outermost and
/// the residual cache is adjusted row by row.
inline void assignment_pass(VariationalState::Image& img, const MatrixRM& phi,
                            const Eigen::ArrayXd& phi_var, double sigma, int d,
                            bool eta_literal, const StickTable& table) {
  const double inv_s2 = 1.0 / (sigma * sigma);
  const Eigen::Index n = img.nu.rows();
  const Eigen::ArrayXd stick_terms = assignment_stick_terms(table, eta_literal);

  for (int k : img.active) {
    const auto phi_k = phi.row(k);
    const double phi_sq = phi_k.squaredNorm();
    const double base =
        stick_terms(k) - 0.5 * inv_s2 * (d * phi_var(k) + phi_sq);
    for (Eigen::Index j = 0; j < n; ++j) {
      const double old = img.nu(j, k);
      const double proj = phi_k.dot(img.resid.row(j)) + old * phi_sq;
      const double next = sigmoid(base + inv_s2 * proj);
      img.resid.row(j) -= (next - old) * phi_k;
      img.nu(j, k) = next;
    }
  }
}

/// Per-image terms of the surrogate objective: stick prior and entropy, the
/// activation term with the multinomial bound standing in for
/// E[log(1 - prod v)], the Gaussian likelihood, and assignment entropies.
/// Masked factors contribute the full complementary bound mass by
/// construction (their nu column is identically zero).
inline double image_objective_terms(const VariationalState::Image& img,
                                    const MatrixRM& phi,
                                    const Eigen::ArrayXd& phi_var, double alpha,
                                    double sigma, int d) {
  const double s2 = sigma * sigma;
  const Eigen::Index n = img.nu.rows();
  const Eigen::Index k_max = img.tau.rows();
  const StickTable table = stick_table(img.tau);

  double acc = 0.0;
  const double log_alpha = std::log(alpha);
  for (Eigen::Index k = 0; k < k_max; ++k) {
    acc += log_alpha + (alpha - 1.0) * table.elog_v(k);
    acc += beta_entropy(img.tau(k, 0), img.tau(k, 1));
  }

  const Eigen::ArrayXd sum_nu = img.nu.colwise().sum().transpose().array();
  acc += (sum_nu * table.elog_pi).sum();
  acc += ((static_cast<double>(n) - sum_nu) * table.bound).sum();

  // E||X - ZA||^2 = ||R||^2 + sum_k nu(1-nu)||phi_k||^2 + d sum_k nu c_k.
  acc += -0.5 * d * std::log(kTwoPi * s2) * static_cast<double>(n);
  double quad = img.resid.squaredNorm();
  for (Eigen::Index k = 0; k < k_max; ++k) {
    const auto col = img.nu.col(k);
    const double nu_sum = col.sum();
    quad += (nu_sum - col.squaredNorm()) * phi.row(k).squaredNorm() +
            nu_sum * d * phi_var(k);
  }
  acc -= quad / (2.0 * s2);

  for (Eigen::Index j = 0; j < n; ++j) {
    for (int k : img.active) acc += bernoulli_entropy(img.nu(j, k));
  }
  return acc;
}

/// Appearance prior plus posterior entropy, the image-independent part of
/// the surrogate objective.
inline double appearance_objective_terms(const MatrixRM& phi,
                                         const Eigen::ArrayXd& phi_var,
                                         double sigma_a, int d) {
  const double sa2 = sigma_a * sigma_a;
  double acc = 0.0;
  for (Eigen::Index k = 0; k < phi.rows(); ++k) {
    acc += -0.5 * d * std::log(kTwoPi * sa2) -
           (d * phi_var(k) + phi.row(k).squaredNorm()) / (2.0 * sa2);
    acc += 0.5 * d * std::log(kTwoPi * std::exp(1.0) * phi_var(k));
  }
  return acc;
}

}  // namespace wsibp::detail
