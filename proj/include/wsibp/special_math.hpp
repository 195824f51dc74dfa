#pragma once

#include <Eigen/Core>

namespace wsibp {

/// Digamma function for x > 0. Asymptotic series with recurrence shift-up
/// below x = 6; relative accuracy better than 1e-12 away from the real root.
/// Throws std::domain_error for non-positive or non-finite arguments.
double digamma(double x);

/// E[log v] for v ~ Beta(tau1, tau2): psi(tau1) - psi(tau1 + tau2).
double expected_log_v(double tau1, double tau2);

/// E[log(1 - v)] for v ~ Beta(tau1, tau2): psi(tau2) - psi(tau1 + tau2).
double expected_log_1mv(double tau1, double tau2);

/// E[log prod_{t<=k} v_t] = sum of the first k Beta log-expectations.
/// tau holds one (tau1, tau2) pair per row; k is a count in [1, rows].
double stick_log_active(const Eigen::Ref<const Eigen::ArrayX2d>& tau,
                        Eigen::Index k);

/// Literal variant summing psi(tau1) - psi(tau2) instead of the Beta
/// expectation; kept selectable for side-by-side comparison.
double stick_log_active_literal(const Eigen::Ref<const Eigen::ArrayX2d>& tau,
                                Eigen::Index k);

/// Multinomial lower bound on E[log(1 - prod_{t<=m} v_t)] together with the
/// auxiliary distribution q that attains it.
struct StickBound {
  Eigen::ArrayXd q;  // length m, non-negative, sums to 1
  double value = 0;  // the lower bound; exact for m = 1
};

/// Computes q_s ∝ exp(psi(tau_s2) + sum_{t<s} psi(tau_t1)
///                    - sum_{t<=s} psi(tau_t1 + tau_t2)), s = 1..m,
/// in the log domain (max-subtracted), then
///   value = sum_s q_s psi(tau_s2)
///         + sum_{t<m} (sum_{s>t} q_s) psi(tau_t1)
///         - sum_{t<=m} (sum_{s>=t} q_s) psi(tau_t1 + tau_t2) + H(q).
StickBound stick_bound(const Eigen::Ref<const Eigen::ArrayX2d>& tau,
                       Eigen::Index m);

/// All per-truncation stick quantities for one image, computed in a single
/// O(K) streaming pass (running-max rescaled prefix sums). Row k of `tau`
/// parameterizes stick k.
struct StickTable {
  Eigen::ArrayXd psi1, psi2, psi12;  // psi(tau1), psi(tau2), psi(tau1+tau2)
  Eigen::ArrayXd elog_v;             // E[log v_k]
  Eigen::ArrayXd elog_1mv;           // E[log(1 - v_k)]
  Eigen::ArrayXd elog_pi;            // prefix sums of elog_v
  Eigen::ArrayXd elog_pi_literal;    // prefix sums of psi(tau1) - psi(tau2)
  Eigen::ArrayXd bound;              // stick_bound(tau, k).value for each k
  Eigen::ArrayXd score;              // raw log score of stick k
  Eigen::ArrayXd log_z;              // log normalizer of q at truncation k
};

StickTable stick_table(const Eigen::Ref<const Eigen::ArrayX2d>& tau);

/// Weighted sums of the optimal q over truncation levels, as consumed by the
/// per-image stick update. For non-negative weights w (length K):
///   qk(k)    = sum_{m>=k} w_m q_{m,k}
///   cross(k) = sum_{m>k}  w_m sum_{s=k+1..m} q_{m,s}
struct StickUpdateSums {
  Eigen::ArrayXd qk;
  Eigen::ArrayXd cross;
};

StickUpdateSums stick_q_sums(const StickTable& table,
                             const Eigen::Ref<const Eigen::ArrayXd>& w);

/// Entropy of Beta(tau1, tau2).
double beta_entropy(double tau1, double tau2);

/// Entropy of Bernoulli(p); exactly 0 at p in {0, 1}.
double bernoulli_entropy(double p);

}  // namespace wsibp
