#include "wsibp/infer.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "engine_detail.hpp"
#include "wsibp/rng.hpp"
#include "wsibp/special_math.hpp"

namespace wsibp {

namespace {

Eigen::VectorXd pi_mean_from_tau(const Eigen::ArrayX2d& tau) {
  Eigen::VectorXd pi(tau.rows());
  double prod = 1.0;
  for (Eigen::Index k = 0; k < tau.rows(); ++k) {
    prod *= tau(k, 0) / (tau(k, 0) + tau(k, 1));
    pi(k) = prod;
  }
  return pi;
}

VariationalState::Image make_test_image(const Model& model,
                                        const ImageBag& bag,
                                        const InferOptions& options) {
  const auto& layout = model.layout;
  if (bag.patches.cols() != layout.d) {
    throw std::invalid_argument("infer: bag dimension " +
                                std::to_string(bag.patches.cols()) +
                                " does not match model d=" +
                                std::to_string(layout.d));
  }
  if (bag.patches.rows() < 1) {
    throw std::invalid_argument("infer: bag needs at least one patch");
  }
  if (!bag.patches.allFinite()) {
    throw std::invalid_argument("infer: non-finite feature value");
  }

  VariationalState::Image img;
  img.tau.resize(layout.k_max, 2);
  img.tau.col(0).setConstant(model.hyper.alpha);
  img.tau.col(1).setConstant(1.0);
  img.eff_label = Eigen::ArrayXd::Ones(layout.k_max);
  img.active.resize(static_cast<std::size_t>(layout.k_max));
  for (int k = 0; k < layout.k_max; ++k) img.active[static_cast<std::size_t>(k)] = k;

  if (options.seed) {
    Rng rng(*options.seed);
    img.nu.resize(bag.patches.rows(), layout.k_max);
    for (Eigen::Index j = 0; j < img.nu.rows(); ++j) {
      for (int k = 0; k < layout.k_max; ++k) img.nu(j, k) = rng.uniform(0.05, 0.15);
    }
  } else {
    img.nu = MatrixRM::Constant(bag.patches.rows(), layout.k_max, 0.1);
  }
  img.resid = bag.patches - img.nu * model.phi;
  return img;
}

}  // namespace

PosteriorSummary infer(const Model& model, const ImageBag& bag,
                       const InferOptions& options) {
  model.validate();
  const Eigen::ArrayXd phi_var = model.phi_var.array();
  VariationalState::Image img = make_test_image(model, bag, options);

  double prev = 0.0;
  for (int s = 0; s < options.max_sweeps; ++s) {
    detail::stick_pass(img, model.hyper.alpha);
    const StickTable table = stick_table(img.tau);
    detail::assignment_pass(img, model.phi, phi_var, model.hyper.sigma,
                            model.layout.d, options.eta_literal, table);
    const double obj = detail::image_objective_terms(
        img, model.phi, phi_var, model.hyper.alpha, model.hyper.sigma,
        model.layout.d);
    const double rel_change =
        (s == 0) ? std::numeric_limits<double>::infinity()
                 : std::abs(obj - prev) / std::max(std::abs(prev), 1e-12);
    prev = obj;
    if (rel_change <= options.tol) break;
  }

  PosteriorSummary post;
  post.tau = img.tau;
  post.nu = img.nu;
  post.pi_mean = pi_mean_from_tau(img.tau);
  return post;
}

std::vector<std::pair<std::string, PosteriorSummary>> infer_all(
    const Model& model, const Dataset& bags, const InferOptions& options,
    int threads) {
  std::vector<std::pair<std::string, PosteriorSummary>> out(bags.size());
  detail::parallel_images(static_cast<int>(bags.size()), threads, [&](int i) {
    const auto& bag = bags[static_cast<std::size_t>(i)];
    out[static_cast<std::size_t>(i)] = {bag.id, infer(model, bag, options)};
  });
  return out;
}

double bag_objective(const Model& model, const ImageBag& bag,
                     const PosteriorSummary& post) {
  VariationalState::Image img;
  img.tau = post.tau;
  img.nu = post.nu;
  img.resid = bag.patches - post.nu * model.phi;
  img.eff_label = Eigen::ArrayXd::Ones(model.layout.k_max);
  for (int k = 0; k < model.layout.k_max; ++k) img.active.push_back(k);
  return detail::image_objective_terms(img, model.phi, model.phi_var.array(),
                                       model.hyper.alpha, model.hyper.sigma,
                                       model.layout.d);
}

}  // namespace wsibp
