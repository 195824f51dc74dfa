#include "wsibp/train.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "engine_detail.hpp"
#include "wsibp/rng.hpp"
#include "wsibp/special_math.hpp"

namespace wsibp {

VariationalState init_state(const Dataset& dataset, const FactorLayout& layout,
                            const Hyperparams& hyper,
                            const TrainOptions& options) {
  layout.validate();
  hyper.validate();
  if (dataset.empty()) throw std::invalid_argument("init_state: empty dataset");

  VariationalState state;
  state.layout = layout;
  state.hyper = hyper;
  state.options = options;

  Rng rng(hyper.seed);
  const double phi_std = 0.1 * hyper.sigma_a;
  state.phi.resize(layout.k_max, layout.d);
  for (int k = 0; k < layout.k_max; ++k) {
    for (int c = 0; c < layout.d; ++c) state.phi(k, c) = phi_std * rng.normal();
  }
  state.phi_var =
      Eigen::ArrayXd::Constant(layout.k_max, hyper.sigma_a * hyper.sigma_a);

  state.images.reserve(dataset.size());
  for (const auto& bag : dataset) {
    validate_bag(bag, layout);
    if (!bag.labels) {
      throw std::invalid_argument("init_state: unlabeled bag '" + bag.id +
                                  "' in training set");
    }
    VariationalState::Image img;
    const Eigen::Index n = bag.n_patches();
    img.tau.resize(layout.k_max, 2);
    img.tau.col(0).setConstant(hyper.alpha);
    img.tau.col(1).setConstant(1.0);
    img.eff_label.resize(layout.k_max);
    for (int k = 0; k < layout.k_max; ++k) {
      img.eff_label(k) = k < layout.annotated() ? (*bag.labels)(k) : 1.0;
      if (img.eff_label(k) > 0) img.active.push_back(k);
    }
    img.nu = MatrixRM::Zero(n, layout.k_max);
    for (Eigen::Index j = 0; j < n; ++j) {
      for (int k : img.active) img.nu(j, k) = rng.uniform(0.05, 0.15);
    }
    img.resid = bag.patches - img.nu * state.phi;
    state.images.push_back(std::move(img));
  }
  return state;
}

void update_appearance(VariationalState& state, int k) {
  if (k < 0 || k >= state.layout.k_max) {
    throw std::out_of_range("update_appearance: factor out of range");
  }
  const double s2 = state.hyper.sigma * state.hyper.sigma;
  const double sa2 = state.hyper.sigma_a * state.hyper.sigma_a;

  double nu_sum = 0.0, nu_sq_sum = 0.0;
  Eigen::VectorXd weighted = Eigen::VectorXd::Zero(state.layout.d);
  for (const auto& img : state.images) {
    if (img.eff_label(k) == 0) continue;  // column is identically zero
    const auto col = img.nu.col(k);
    nu_sum += col.sum();
    nu_sq_sum += col.squaredNorm();
    weighted.noalias() += img.resid.transpose() * col;
  }

  const Eigen::RowVectorXd phi_old = state.phi.row(k);
  const Eigen::RowVectorXd phi_new =
      (weighted.transpose() + nu_sq_sum * phi_old) / (s2 / sa2 + nu_sum);
  state.phi_var(k) = 1.0 / (1.0 / sa2 + nu_sum / s2);

  const Eigen::RowVectorXd delta = phi_new - phi_old;
  if (delta.squaredNorm() > 0) {
    for (auto& img : state.images) {
      if (img.eff_label(k) == 0) continue;
      img.resid.noalias() -= img.nu.col(k) * delta;
    }
  }
  state.phi.row(k) = phi_new;
}

void update_sticks(VariationalState& state, int i) {
  if (i < 0 || i >= static_cast<int>(state.images.size())) {
    throw std::out_of_range("update_sticks: image out of range");
  }
  detail::stick_pass(state.images[static_cast<std::size_t>(i)],
                     state.hyper.alpha);
}

double update_assignments(VariationalState& state, int i, int j, int k) {
  if (i < 0 || i >= static_cast<int>(state.images.size())) {
    throw std::out_of_range("update_assignments: image out of range");
  }
  auto& img = state.images[static_cast<std::size_t>(i)];
  if (j < 0 || j >= img.nu.rows() || k < 0 || k >= state.layout.k_max) {
    throw std::out_of_range("update_assignments: patch or factor out of range");
  }
  if (img.eff_label(k) == 0) return 0.0;

  const double s2 = state.hyper.sigma * state.hyper.sigma;
  const int d = state.layout.d;
  const double stick_term =
      (state.options.eta_literal ? stick_log_active_literal(img.tau, k + 1)
                                 : stick_log_active(img.tau, k + 1)) -
      stick_bound(img.tau, k + 1).value;

  const auto phi_k = state.phi.row(k);
  const double phi_sq = phi_k.squaredNorm();
  const double old = img.nu(j, k);
  const double proj = phi_k.dot(img.resid.row(j)) + old * phi_sq;
  const double eta =
      stick_term - (d * state.phi_var(k) + phi_sq - 2.0 * proj) / (2.0 * s2);
  const double next = detail::sigmoid(eta);
  img.resid.row(j) -= (next - old) * phi_k;
  img.nu(j, k) = next;
  return next;
}

double surrogate_objective(const VariationalState& state) {
  double obj = detail::appearance_objective_terms(
      state.phi, state.phi_var, state.hyper.sigma_a, state.layout.d);

  std::vector<double> partial(state.images.size(), 0.0);
  detail::parallel_images(
      static_cast<int>(state.images.size()), state.options.threads,
      [&](int i) {
        partial[static_cast<std::size_t>(i)] = detail::image_objective_terms(
            state.images[static_cast<std::size_t>(i)], state.phi,
            state.phi_var, state.hyper.alpha, state.hyper.sigma,
            state.layout.d);
      });
  for (double p : partial) obj += p;  // fixed accumulation order
  return obj;
}

double sweep(VariationalState& state) {
  for (int k = 0; k < state.layout.k_max; ++k) update_appearance(state, k);
  detail::parallel_images(
      static_cast<int>(state.images.size()), state.options.threads, [&](int i) {
        auto& img = state.images[static_cast<std::size_t>(i)];
        detail::stick_pass(img, state.hyper.alpha);
        const StickTable table = stick_table(img.tau);
        detail::assignment_pass(img, state.phi, state.phi_var,
                                state.hyper.sigma, state.layout.d,
                                state.options.eta_literal, table);
      });
  const double obj = surrogate_objective(state);
  state.objective_trace.push_back(obj);
  return obj;
}

TrainResult train(const Dataset& dataset, const FactorLayout& layout,
                  const Hyperparams& hyper, const TrainOptions& options) {
  VariationalState state = init_state(dataset, layout, hyper, options);
  double prev = 0.0;
  for (int s = 0; s < hyper.max_sweeps; ++s) {
    const double obj = sweep(state);
    const double rel_change =
        (s == 0) ? std::numeric_limits<double>::infinity()
                 : std::abs(obj - prev) / std::max(std::abs(prev), 1e-12);
    prev = obj;
    if (rel_change <= hyper.tol) break;
  }

  TrainResult result;
  result.model.layout = layout;
  result.model.hyper = hyper;
  result.model.phi = state.phi;
  result.model.phi_var = state.phi_var.matrix();
  result.trace = state.objective_trace;
  result.state = std::move(state);
  return result;
}

void recompute_residuals(VariationalState& state, const Dataset& dataset) {
  if (dataset.size() != state.images.size()) {
    throw std::invalid_argument("recompute_residuals: dataset size mismatch");
  }
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    state.images[i].resid = dataset[i].patches - state.images[i].nu * state.phi;
  }
}

}  // namespace wsibp
