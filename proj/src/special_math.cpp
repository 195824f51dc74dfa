#include "wsibp/special_math.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace wsibp {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

void require_positive(double x, const char* who) {
  if (!(x > 0.0) || !std::isfinite(x)) {
    throw std::domain_error(std::string(who) + ": argument must be positive and finite, got " +
                            std::to_string(x));
  }
}

void check_tau(const Eigen::Ref<const Eigen::ArrayX2d>& tau, const char* who) {
  for (Eigen::Index i = 0; i < tau.rows(); ++i) {
    require_positive(tau(i, 0), who);
    require_positive(tau(i, 1), who);
  }
}

// log(exp(a) + exp(b)) with -inf handled.
double log_add_exp(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  const double hi = std::max(a, b);
  return hi + std::log1p(std::exp(std::min(a, b) - hi));
}

}  // namespace

double digamma(double x) {
  require_positive(x, "digamma");
  // Shift into the asymptotic regime, then evaluate the Bernoulli-number
  // series psi(x) ~ ln x - 1/(2x) - sum_n B_{2n} / (2n x^{2n}).
  double shift = 0.0;
  while (x < 6.0) {
    shift -= 1.0 / x;
    x += 1.0;
  }
  const double z = 1.0 / (x * x);
  const double series =
      z * (1.0 / 12.0 -
           z * (1.0 / 120.0 -
                z * (1.0 / 252.0 -
                     z * (1.0 / 240.0 -
                          z * (1.0 / 132.0 -
                               z * (691.0 / 32760.0 -
                                    z * (1.0 / 12.0 - z * (3617.0 / 8160.0))))))));
  return shift + std::log(x) - 0.5 / x - series;
}

double expected_log_v(double tau1, double tau2) {
  require_positive(tau1, "expected_log_v");
  require_positive(tau2, "expected_log_v");
  return digamma(tau1) - digamma(tau1 + tau2);
}

double expected_log_1mv(double tau1, double tau2) {
  require_positive(tau1, "expected_log_1mv");
  require_positive(tau2, "expected_log_1mv");
  return digamma(tau2) - digamma(tau1 + tau2);
}

double stick_log_active(const Eigen::Ref<const Eigen::ArrayX2d>& tau,
                        Eigen::Index k) {
  if (k < 1 || k > tau.rows()) {
    throw std::out_of_range("stick_log_active: k out of range");
  }
  double sum = 0.0;
  for (Eigen::Index t = 0; t < k; ++t) {
    sum += expected_log_v(tau(t, 0), tau(t, 1));
  }
  return sum;
}

double stick_log_active_literal(const Eigen::Ref<const Eigen::ArrayX2d>& tau,
                                Eigen::Index k) {
  if (k < 1 || k > tau.rows()) {
    throw std::out_of_range("stick_log_active_literal: k out of range");
  }
  double sum = 0.0;
  for (Eigen::Index t = 0; t < k; ++t) {
    require_positive(tau(t, 0), "stick_log_active_literal");
    require_positive(tau(t, 1), "stick_log_active_literal");
    sum += digamma(tau(t, 0)) - digamma(tau(t, 1));
  }
  return sum;
}

StickBound stick_bound(const Eigen::Ref<const Eigen::ArrayX2d>& tau,
                       Eigen::Index m) {
  if (m < 1 || m > tau.rows()) {
    throw std::out_of_range("stick_bound: m out of range");
  }
  check_tau(tau.topRows(m), "stick_bound");

  Eigen::ArrayXd psi1(m), psi2(m), psi12(m), score(m);
  double cum_psi1 = 0.0, cum_psi12 = 0.0;
  for (Eigen::Index s = 0; s < m; ++s) {
    psi1(s) = digamma(tau(s, 0));
    psi2(s) = digamma(tau(s, 1));
    psi12(s) = digamma(tau(s, 0) + tau(s, 1));
    cum_psi12 += psi12(s);
    score(s) = psi2(s) + cum_psi1 - cum_psi12;
    cum_psi1 += psi1(s);
  }

  StickBound out;
  const double top = score.maxCoeff();
  const Eigen::ArrayXd e = (score - top).exp();
  const double z = e.sum();
  out.q = e / z;

  // Suffix sums of q give the coefficients of psi(tau1) and psi(tau12).
  double value = 0.0;
  double suffix = 0.0;
  double entropy = 0.0;
  const double log_z = std::log(z);
  for (Eigen::Index s = m - 1; s >= 0; --s) {
    value -= (suffix + out.q(s)) * psi12(s);  // s >= t coefficient
    value += suffix * psi1(s);                // s > t coefficient
    suffix += out.q(s);
    value += out.q(s) * psi2(s);
    if (out.q(s) > 0.0) {
      entropy -= out.q(s) * ((score(s) - top) - log_z);
    }
  }
  out.value = value + entropy;
  return out;
}

StickTable stick_table(const Eigen::Ref<const Eigen::ArrayX2d>& tau) {
  const Eigen::Index K = tau.rows();
  check_tau(tau, "stick_table");

  StickTable t;
  t.psi1.resize(K);
  t.psi2.resize(K);
  t.psi12.resize(K);
  t.elog_v.resize(K);
  t.elog_1mv.resize(K);
  t.elog_pi.resize(K);
  t.elog_pi_literal.resize(K);
  t.bound.resize(K);
  t.score.resize(K);
  t.log_z.resize(K);

  // Streaming pass over truncation levels m = 1..K. All accumulators are
  // linear in e_s = exp(score_s - top), so when the running max moves they
  // are rescaled in place.
  double top = kNegInf;     // running max of scores
  double z = 0.0;           // sum e_s
  double p_b2 = 0.0;        // sum e_s psi2_s
  double p_ent = 0.0;       // sum e_s (score_s - top)
  double b1 = 0.0;          // sum_{t<=m-1} psi1_t Z_t   (lagged by one level)
  double c12 = 0.0;         // sum_{t<=m} psi12_t Z_{t-1}
  double a1 = 0.0;          // sum_{t<m} psi1_t
  double a12 = 0.0;         // sum_{t<=m} psi12_t
  double cum_psi1 = 0.0, cum_psi12 = 0.0;
  double cum_elogv = 0.0, cum_literal = 0.0;

  for (Eigen::Index m = 0; m < K; ++m) {
    t.psi1(m) = digamma(tau(m, 0));
    t.psi2(m) = digamma(tau(m, 1));
    t.psi12(m) = digamma(tau(m, 0) + tau(m, 1));
    t.elog_v(m) = t.psi1(m) - t.psi12(m);
    t.elog_1mv(m) = t.psi2(m) - t.psi12(m);
    cum_elogv += t.elog_v(m);
    t.elog_pi(m) = cum_elogv;
    cum_literal += t.psi1(m) - t.psi2(m);
    t.elog_pi_literal(m) = cum_literal;

    cum_psi12 += t.psi12(m);
    const double score = t.psi2(m) + cum_psi1 - cum_psi12;
    t.score(m) = score;
    cum_psi1 += t.psi1(m);

    if (score > top) {
      const double rescale = (top == kNegInf) ? 0.0 : std::exp(top - score);
      z *= rescale;
      p_b2 *= rescale;
      p_ent *= rescale;
      b1 *= rescale;
      c12 *= rescale;
      // p_ent tracks sum e_s (score_s - top); shifting top adds
      // (top_old - top_new) * z to the tracked quantity.
      p_ent += (top == kNegInf ? 0.0 : (top - score)) * z;
      top = score;
    }
    const double e = std::exp(score - top);

    c12 += t.psi12(m) * z;  // uses Z_{m-1}
    z += e;
    p_b2 += e * t.psi2(m);
    p_ent += e * (score - top);
    a12 += t.psi12(m);

    const double log_z_scaled = std::log(z);
    t.log_z(m) = top + log_z_scaled;
    const double t1 = p_b2 / z;
    const double t2 = a1 - b1 / z;
    const double t3 = a12 - c12 / z;
    const double entropy = log_z_scaled - p_ent / z;
    t.bound(m) = t1 + t2 - t3 + entropy;

    b1 += t.psi1(m) * z;  // now covers t <= m for the next level
    a1 += t.psi1(m);
  }
  return t;
}

StickUpdateSums stick_q_sums(const StickTable& table,
                             const Eigen::Ref<const Eigen::ArrayXd>& w) {
  const Eigen::Index K = table.score.size();
  if (w.size() != K) {
    throw std::invalid_argument("stick_q_sums: weight length mismatch");
  }

  // u(k) = log sum_{m>=k} w_m exp(-log_z_m), accumulated backwards so that
  // every exponent stays non-positive when combined with score or log_z of
  // an earlier level.
  Eigen::ArrayXd u(K + 1);
  u(K) = kNegInf;
  for (Eigen::Index m = K - 1; m >= 0; --m) {
    const double term = (w(m) > 0.0) ? std::log(w(m)) - table.log_z(m) : kNegInf;
    u(m) = log_add_exp(term, u(m + 1));
  }

  Eigen::ArrayXd w_suffix(K + 1);
  w_suffix(K) = 0.0;
  for (Eigen::Index m = K - 1; m >= 0; --m) w_suffix(m) = w_suffix(m + 1) + w(m);

  StickUpdateSums out;
  out.qk.resize(K);
  out.cross.resize(K);
  for (Eigen::Index k = 0; k < K; ++k) {
    out.qk(k) = (u(k) == kNegInf) ? 0.0 : std::exp(table.score(k) + u(k));
    const double covered =
        (u(k + 1) == kNegInf) ? 0.0 : std::exp(table.log_z(k) + u(k + 1));
    out.cross(k) = std::max(0.0, w_suffix(k + 1) - covered);
  }
  return out;
}

double beta_entropy(double tau1, double tau2) {
  require_positive(tau1, "beta_entropy");
  require_positive(tau2, "beta_entropy");
  const double log_beta =
      std::lgamma(tau1) + std::lgamma(tau2) - std::lgamma(tau1 + tau2);
  return log_beta - (tau1 - 1.0) * digamma(tau1) - (tau2 - 1.0) * digamma(tau2) +
         (tau1 + tau2 - 2.0) * digamma(tau1 + tau2);
}

double bernoulli_entropy(double p) {
  if (p <= 0.0 || p >= 1.0) return 0.0;
  return -p * std::log(p) - (1.0 - p) * std::log1p(-p);
}

}  // namespace wsibp
