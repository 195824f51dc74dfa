#pragma once

#include <vector>

#include "wsibp/data_model.hpp"

namespace wsibp {

struct TrainOptions {
  /// Use the literal printed stick term psi(tau1) - psi(tau2) in the
  /// assignment logit instead of the Beta log-expectation. Comparison mode
  /// only; the ascent guarantee holds for the default.
  bool eta_literal = false;
  /// Worker threads for the per-image stick/assignment phase. Results are
  /// identical for any value: images do not interact within the phase and
  /// reductions keep a fixed order.
  int threads = 1;
};

/// Mutable training state. Residuals cache R_j = X_j - sum_l nu_jl phi_l per
/// patch; every update maintains the cache incrementally.
struct VariationalState {
  struct Image {
    Eigen::ArrayX2d tau;       // k_max x 2 stick parameters
    MatrixRM nu;               // N x k_max; exactly 0 wherever masked
    MatrixRM resid;            // N x d residual cache
    Eigen::ArrayXd eff_label;  // k_max effective labels (background = 1)
    std::vector<int> active;   // factor indices with eff_label == 1
  };

  FactorLayout layout;
  Hyperparams hyper;
  TrainOptions options;
  MatrixRM phi;             // k_max x d
  Eigen::ArrayXd phi_var;   // k_max isotropic coefficients
  std::vector<Image> images;
  std::vector<double> objective_trace;
};

/// tau at the prior (alpha, 1); nu at L_k * Uniform(0.05, 0.15); phi small
/// seeded Gaussian; phi_var at the prior variance. Every bag must be labeled.
VariationalState init_state(const Dataset& dataset, const FactorLayout& layout,
                            const Hyperparams& hyper,
                            const TrainOptions& options = {});

/// Appearance update for factor k:
///   phi_k   = (sigma^-2 sum_ij nu_jk (X_j - sum_{l!=k} nu_jl phi_l)) /
///             (sigma_a^-2 + sigma^-2 sum_ij nu_jk)
///   phi_var = (sigma_a^-2 + sigma^-2 sum_ij nu_jk)^-1
/// Residuals are adjusted for the change in phi_k.
void update_appearance(VariationalState& state, int k);

/// Per-image stick update; all q weights are evaluated at the pre-update tau.
void update_sticks(VariationalState& state, int i);

/// Single assignment update. Returns the new nu_jk (exactly 0 when masked);
/// the residual cache absorbs the change.
double update_assignments(VariationalState& state, int i, int j, int k);

/// Evidence lower bound with the multinomial stick bound substituted for
/// E[log(1 - prod v)]; the quantity each sweep monotonically increases.
double surrogate_objective(const VariationalState& state);

/// One Gauss-Seidel sweep: appearance for k = 1..k_max, then per image
/// sticks followed by all patch/factor assignments, then the objective
/// (appended to the trace and returned).
double sweep(VariationalState& state);

struct TrainResult {
  Model model;
  std::vector<double> trace;
  VariationalState state;  // final state, exposed for diagnostics
};

/// Runs sweeps until the relative objective change drops below hyper.tol or
/// hyper.max_sweeps is reached. tol = inf performs exactly one sweep.
TrainResult train(const Dataset& dataset, const FactorLayout& layout,
                  const Hyperparams& hyper, const TrainOptions& options = {});

/// Rebuilds residuals from the raw patches; verification helper.
void recompute_residuals(VariationalState& state, const Dataset& dataset);

}  // namespace wsibp
