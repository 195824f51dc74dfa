#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "wsibp/sampler.hpp"
#include "wsibp/special_math.hpp"
#include "wsibp/train.hpp"

using namespace wsibp;

namespace {

FactorLayout layout_for(int k_o, int k_a, int k_max, int d) {
  FactorLayout layout;
  layout.k_o = k_o;
  layout.k_a = k_a;
  layout.k_max = k_max;
  layout.d = d;
  return layout;
}

Dataset small_synth(std::uint64_t seed, int m = 12, int n = 4) {
  const auto layout = layout_for(2, 2, 8, 6);
  GenParams params;
  params.n_images = m;
  params.n_patches = n;
  params.k_background = 2;
  params.separation = 4.0;
  return sample_dataset(layout, params, seed).first;
}

/// Hand-built single-factor state used by the closed-form update checks.
/// Bypasses layout validation on purpose: the formulas are untruncated.
VariationalState tiny_state(double alpha, double sigma, double sigma_a,
                            double x, double nu, double phi, double phi_var,
                            double tau1, double tau2) {
  VariationalState state;
  state.layout = layout_for(1, 0, 1, 1);
  state.hyper.alpha = alpha;
  state.hyper.sigma = sigma;
  state.hyper.sigma_a = sigma_a;
  state.phi = MatrixRM::Constant(1, 1, phi);
  state.phi_var = Eigen::ArrayXd::Constant(1, phi_var);
  VariationalState::Image img;
  img.tau.resize(1, 2);
  img.tau << tau1, tau2;
  img.nu = MatrixRM::Constant(1, 1, nu);
  img.resid = MatrixRM::Constant(1, 1, x - nu * phi);
  img.eff_label = Eigen::ArrayXd::Ones(1);
  img.active = {0};
  state.images.push_back(std::move(img));
  return state;
}

}  // namespace

TEST_CASE("init_state applies the label mask and the prior") {
  const auto layout = layout_for(2, 2, 8, 6);
  Dataset dataset = small_synth(3);
  // Force one absent label to exercise the mask.
  (*dataset[0].labels)(1) = 0;
  Hyperparams hyper;
  hyper.seed = 42;
  const auto state = init_state(dataset, layout, hyper);

  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const auto& img = state.images[i];
    CHECK((img.tau.col(0) == hyper.alpha).all());
    CHECK((img.tau.col(1) == 1.0).all());
    for (int k = 0; k < layout.k_max; ++k) {
      const double label =
          k < layout.annotated() ? (*dataset[i].labels)(k) : 1.0;
      for (Eigen::Index j = 0; j < img.nu.rows(); ++j) {
        if (label == 0.0) {
          CHECK(img.nu(j, k) == 0.0);
        } else {
          CHECK(img.nu(j, k) >= 0.05);
          CHECK(img.nu(j, k) <= 0.15);
        }
      }
    }
    // Residual cache matches its definition at init.
    const MatrixRM expect = dataset[i].patches - img.nu * state.phi;
    CHECK((img.resid - expect).cwiseAbs().maxCoeff() < 1e-12);
  }

  const auto again = init_state(dataset, layout, hyper);
  CHECK(again.phi == state.phi);
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    CHECK(again.images[i].nu == state.images[i].nu);
  }

  Dataset unlabeled = dataset;
  unlabeled[2].labels.reset();
  CHECK_THROWS_AS(init_state(unlabeled, layout, hyper), std::invalid_argument);
  CHECK_THROWS_AS(init_state(Dataset{}, layout, hyper), std::invalid_argument);
}

TEST_CASE("update_appearance closed form: single patch") {
  // M=1, N=1, D=1, nu=1, X=2, sigma^2=1, sigma_a^2=1 -> phi=1, var=0.5.
  auto state = tiny_state(1.0, 1.0, 1.0, /*x=*/2.0, /*nu=*/1.0, /*phi=*/0.0,
                          /*phi_var=*/1.0, 1.0, 1.0);
  update_appearance(state, 0);
  CHECK(std::abs(state.phi(0, 0) - 1.0) < 1e-12);
  CHECK(std::abs(state.phi_var(0) - 0.5) < 1e-12);
  // Residual follows: R = X - nu * phi = 1.
  CHECK(std::abs(state.images[0].resid(0, 0) - 1.0) < 1e-12);
}

TEST_CASE("update_appearance reverts unused factors to the prior") {
  const auto layout = layout_for(2, 2, 8, 6);
  Dataset dataset = small_synth(5);
  for (auto& bag : dataset) (*bag.labels)(0) = 0;  // factor 0 absent everywhere
  Hyperparams hyper;
  const auto base = init_state(dataset, layout, hyper);
  auto state = base;
  update_appearance(state, 0);
  CHECK((state.phi.row(0).array() == 0.0).all());
  CHECK(state.phi_var(0) == hyper.sigma_a * hyper.sigma_a);
}

TEST_CASE("update_appearance matches an uncached evaluation") {
  const auto layout = layout_for(2, 2, 8, 6);
  const Dataset dataset = small_synth(7);
  Hyperparams hyper;
  hyper.seed = 17;
  auto state = init_state(dataset, layout, hyper);
  // Run one sweep first so nu/tau are in general position.
  sweep(state);

  for (int k : {0, 3, 7}) {
    // Oracle: direct evaluation of the update without the residual cache.
    const double s2 = hyper.sigma * hyper.sigma;
    const double sa2 = hyper.sigma_a * hyper.sigma_a;
    double nu_sum = 0.0;
    Eigen::RowVectorXd num = Eigen::RowVectorXd::Zero(layout.d);
    for (std::size_t i = 0; i < dataset.size(); ++i) {
      const auto& img = state.images[i];
      for (Eigen::Index j = 0; j < img.nu.rows(); ++j) {
        Eigen::RowVectorXd others = Eigen::RowVectorXd::Zero(layout.d);
        for (int l = 0; l < layout.k_max; ++l) {
          if (l != k) others += img.nu(j, l) * state.phi.row(l);
        }
        num += img.nu(j, k) * (dataset[i].patches.row(j) - others);
        nu_sum += img.nu(j, k);
      }
    }
    const Eigen::RowVectorXd phi_expect = (num / s2) / (1.0 / sa2 + nu_sum / s2);
    const double var_expect = 1.0 / (1.0 / sa2 + nu_sum / s2);

    update_appearance(state, k);
    CHECK((state.phi.row(k) - phi_expect).cwiseAbs().maxCoeff() < 1e-10);
    CHECK(std::abs(state.phi_var(k) - var_expect) < 1e-12);
  }
}

TEST_CASE("update_sticks closed form: single stick") {
  // K=1, N=1, nu=0.4, alpha=1.5 -> tau = (1.9, 1.6) since q_11 = 1.
  auto state = tiny_state(1.5, 0.5, 1.0, 1.0, 0.4, 0.0, 1.0, 1.0, 1.0);
  update_sticks(state, 0);
  CHECK(std::abs(state.images[0].tau(0, 0) - 1.9) < 1e-12);
  CHECK(std::abs(state.images[0].tau(0, 1) - 1.6) < 1e-12);

  // All nu = 0: tau1 = alpha, tau2 = 1 + N.
  auto zero = tiny_state(1.5, 0.5, 1.0, 1.0, 0.0, 0.0, 1.0, 2.0, 3.0);
  update_sticks(zero, 0);
  CHECK(std::abs(zero.images[0].tau(0, 0) - 1.5) < 1e-12);
  CHECK(std::abs(zero.images[0].tau(0, 1) - 2.0) < 1e-12);
}

TEST_CASE("update_sticks matches naive double sums") {
  const auto layout = layout_for(2, 2, 8, 6);
  const Dataset dataset = small_synth(11);
  Hyperparams hyper;
  hyper.seed = 4;
  auto state = init_state(dataset, layout, hyper);
  sweep(state);

  const int i = 2;
  const auto& img = state.images[i];
  const Eigen::ArrayX2d tau_before = img.tau;
  const Eigen::Index n = img.nu.rows();
  const int k_max = layout.k_max;

  // Naive oracle: explicit q from the public stick_bound at each level.
  Eigen::ArrayXd sum_nu(k_max);
  for (int k = 0; k < k_max; ++k) sum_nu(k) = img.nu.col(k).sum();
  Eigen::ArrayX2d expect(k_max, 2);
  for (int k = 0; k < k_max; ++k) {
    double t1 = hyper.alpha;
    for (int m = k; m < k_max; ++m) t1 += sum_nu(m);
    for (int m = k + 1; m < k_max; ++m) {
      const auto b = stick_bound(tau_before, m + 1);
      double inner = 0;
      for (int s = k + 1; s <= m; ++s) inner += b.q(s);
      t1 += (static_cast<double>(n) - sum_nu(m)) * inner;
    }
    double t2 = 1.0;
    for (int m = k; m < k_max; ++m) {
      const auto b = stick_bound(tau_before, m + 1);
      t2 += (static_cast<double>(n) - sum_nu(m)) * b.q(k);
    }
    expect(k, 0) = t1;
    expect(k, 1) = t2;
  }

  update_sticks(state, i);
  CHECK((state.images[i].tau - expect).abs().maxCoeff() < 1e-9);
  CHECK((state.images[i].tau.col(0) >= hyper.alpha - 1e-12).all());
  CHECK((state.images[i].tau.col(1) >= 1.0 - 1e-12).all());
}

TEST_CASE("update_assignments honors the mask and the sigmoid midpoint") {
  auto state = tiny_state(1.5, 0.5, 2.0, 1.0, 0.2, 0.6, 0.05, 1.9, 1.6);

  SUBCASE("masked factor stays exactly zero") {
    state.images[0].eff_label(0) = 0.0;
    state.images[0].active.clear();
    state.images[0].nu(0, 0) = 0.0;
    state.images[0].resid(0, 0) = 1.0;
    CHECK(update_assignments(state, 0, 0, 0) == 0.0);
    CHECK(state.images[0].nu(0, 0) == 0.0);
  }

  SUBCASE("eta near zero gives nu near one half") {
    // With tau = (1,1) the stick terms cancel exactly; phi = 0 and a tiny
    // posterior variance leave eta at -d*c/(2 sigma^2).
    auto mid = tiny_state(1.0, 0.5, 1.0, 1.0, 0.2, 0.0, 1e-13, 1.0, 1.0);
    const double nu = update_assignments(mid, 0, 0, 0);
    CHECK(std::abs(nu - 0.5) < 1e-12);
  }
}

TEST_CASE("update_assignments matches the scripted eta oracle") {
  // K=1, D=1, tau=(1.9,1.6), phi=0.8, c=0.05, X=1, sigma^2=0.25, L=1.
  // eta = Elog v - (psi(1.6)-psi(3.5)) - (c + phi^2 - 2 phi X)/(2 sigma^2).
  auto state = tiny_state(1.5, 0.5, 2.0, 1.0, 0.3, 0.8, 0.05, 1.9, 1.6);
  const double nu = update_assignments(state, 0, 0, 0);
  CHECK(std::abs(nu - 0.88596143161355678) < 1e-12);
  // Residual cache absorbed the move.
  CHECK(std::abs(state.images[0].resid(0, 0) - (1.0 - nu * 0.8)) < 1e-12);
}

TEST_CASE("surrogate objective matches the term-by-term oracle") {
  auto state = tiny_state(/*alpha=*/1.5, /*sigma=*/0.5, /*sigma_a=*/2.0,
                          /*x=*/0.7, /*nu=*/0.35, /*phi=*/0.8,
                          /*phi_var=*/0.05, /*tau1=*/1.9, /*tau2=*/1.6);
  CHECK(std::abs(surrogate_objective(state) - (-2.993199402225313910)) < 1e-9);
}

TEST_CASE("doubling sigma_a moves only the appearance prior terms") {
  const auto layout = layout_for(2, 2, 8, 6);
  const Dataset dataset = small_synth(19);
  Hyperparams hyper;
  auto state = init_state(dataset, layout, hyper);
  state.phi.setZero();
  recompute_residuals(state, dataset);

  const double base = surrogate_objective(state);
  auto doubled = state;
  doubled.hyper.sigma_a = 2.0 * hyper.sigma_a;
  const double moved = surrogate_objective(doubled);

  // With phi = 0 only -(d/2) log(2 pi sa^2) - d c_k / (2 sa^2) changes.
  const double sa2 = hyper.sigma_a * hyper.sigma_a;
  double delta = 0.0;
  for (int k = 0; k < layout.k_max; ++k) {
    const double c = state.phi_var(k);
    delta += -0.5 * layout.d * std::log(4.0) -
             layout.d * c / (2.0 * 4.0 * sa2) + layout.d * c / (2.0 * sa2);
  }
  CHECK(std::abs((moved - base) - delta) < 1e-9);
}

TEST_CASE("objective is finite and negative after init on synthetic data") {
  const auto layout = layout_for(2, 2, 8, 6);
  const Dataset dataset = small_synth(23);
  const auto state = init_state(dataset, layout, Hyperparams{});
  const double obj = surrogate_objective(state);
  CHECK(std::isfinite(obj));
  CHECK(obj < 0.0);
}

TEST_CASE("sweeps are deterministic and monotone") {
  const auto layout = layout_for(2, 2, 8, 6);
  const Dataset dataset = small_synth(29, 16, 5);
  Hyperparams hyper;
  hyper.seed = 13;
  hyper.max_sweeps = 30;
  hyper.tol = 0.0;

  const auto r1 = train(dataset, layout, hyper);
  const auto r2 = train(dataset, layout, hyper);
  CHECK(r1.trace == r2.trace);

  REQUIRE(r1.trace.size() >= 2);
  for (std::size_t s = 1; s < r1.trace.size(); ++s) {
    CHECK(r1.trace[s] >=
          r1.trace[s - 1] - 1e-8 * std::abs(r1.trace[s - 1]));
  }

  // Thread count must not change the result.
  TrainOptions threaded;
  threaded.threads = 3;
  const auto r3 = train(dataset, layout, hyper, threaded);
  CHECK(r3.trace == r1.trace);
}

TEST_CASE("permuting patches permutes the sweep output") {
  const auto layout = layout_for(2, 2, 8, 6);
  Dataset dataset = small_synth(31, 1, 5);
  Hyperparams hyper;
  hyper.seed = 3;

  auto s1 = init_state(dataset, layout, hyper);

  std::vector<int> perm = {4, 2, 0, 3, 1};
  Dataset permuted = dataset;
  for (int j = 0; j < 5; ++j) {
    permuted[0].patches.row(j) = dataset[0].patches.row(perm[j]);
  }
  auto s2 = init_state(permuted, layout, hyper);
  for (int j = 0; j < 5; ++j) {
    s2.images[0].nu.row(j) = s1.images[0].nu.row(perm[j]);
  }
  recompute_residuals(s2, permuted);

  sweep(s1);
  sweep(s2);

  CHECK((s1.phi - s2.phi).cwiseAbs().maxCoeff() < 1e-9);
  CHECK((s1.images[0].tau - s2.images[0].tau).abs().maxCoeff() < 1e-9);
  for (int j = 0; j < 5; ++j) {
    CHECK((s1.images[0].nu.row(perm[j]) - s2.images[0].nu.row(j))
              .cwiseAbs()
              .maxCoeff() < 1e-9);
  }
}

TEST_CASE("infinite tolerance performs exactly one sweep") {
  const auto layout = layout_for(2, 2, 8, 6);
  const Dataset dataset = small_synth(37);
  Hyperparams hyper;
  hyper.tol = std::numeric_limits<double>::infinity();
  const auto result = train(dataset, layout, hyper);
  CHECK(result.trace.size() == 1);
}

TEST_CASE("label mask holds bit-exactly after training") {
  const auto layout = layout_for(2, 2, 8, 6);
  const Dataset dataset = small_synth(41, 20, 5);
  Hyperparams hyper;
  hyper.max_sweeps = 15;
  const auto result = train(dataset, layout, hyper);

  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const auto& img = result.state.images[i];
    for (int k = 0; k < layout.annotated(); ++k) {
      if ((*dataset[i].labels)(k) == 0) {
        for (Eigen::Index j = 0; j < img.nu.rows(); ++j) {
          CHECK(img.nu(j, k) == 0.0);
        }
      }
    }
  }
}

TEST_CASE("parameter bounds and cache stay consistent across sweeps") {
  const auto layout = layout_for(2, 2, 8, 6);
  const Dataset dataset = small_synth(43, 14, 5);
  Hyperparams hyper;
  hyper.seed = 8;
  auto state = init_state(dataset, layout, hyper);
  const double sa2 = hyper.sigma_a * hyper.sigma_a;

  for (int s = 0; s < 6; ++s) {
    sweep(state);
    for (const auto& img : state.images) {
      CHECK((img.tau.col(0) >= hyper.alpha - 1e-12).all());
      CHECK((img.tau.col(1) >= 1.0 - 1e-12).all());
      CHECK((img.nu.array() >= 0.0).all());
      CHECK((img.nu.array() <= 1.0).all());
    }
    CHECK((state.phi_var > 0.0).all());
    CHECK((state.phi_var <= sa2 + 1e-15).all());

    auto check = state;
    recompute_residuals(check, dataset);
    double worst = 0.0;
    for (std::size_t i = 0; i < dataset.size(); ++i) {
      worst = std::max(worst, (check.images[i].resid - state.images[i].resid)
                                  .cwiseAbs()
                                  .maxCoeff());
    }
    CHECK(worst < 1e-8);
  }
}

TEST_CASE("converged states are coordinate-wise locally optimal") {
  const auto layout = layout_for(2, 2, 8, 6);
  const Dataset dataset = small_synth(47, 10, 4);
  Hyperparams hyper;
  hyper.seed = 21;
  hyper.max_sweeps = 1500;
  hyper.tol = 0.0;  // grind to a fixed point
  auto result = train(dataset, layout, hyper);
  const double at_opt = surrogate_objective(result.state);

  std::mt19937_64 gen(5);
  int tried = 0;
  while (tried < 40) {
    const int i = static_cast<int>(gen() % dataset.size());
    const auto& img = result.state.images[static_cast<std::size_t>(i)];
    const int j = static_cast<int>(gen() % img.nu.rows());
    const int k = img.active[gen() % img.active.size()];
    for (double delta : {1e-3, -1e-3}) {
      auto probe = result.state;
      auto& nu = probe.images[static_cast<std::size_t>(i)].nu(j, k);
      nu = std::clamp(nu + delta, 0.0, 1.0);
      recompute_residuals(probe, dataset);
      CHECK(surrogate_objective(probe) <= at_opt + 1e-10);
    }
    ++tried;
  }
  for (int rep = 0; rep < 10; ++rep) {
    const int k = static_cast<int>(gen() % layout.k_max);
    const int c = static_cast<int>(gen() % layout.d);
    for (double delta : {1e-3, -1e-3}) {
      auto probe = result.state;
      probe.phi(k, c) += delta;
      recompute_residuals(probe, dataset);
      CHECK(surrogate_objective(probe) <= at_opt + 1e-10);
    }
  }
}

TEST_CASE("training recovers planted appearances on separated data") {
  const auto layout = layout_for(2, 2, 8, 10);
  GenParams params;
  params.n_images = 60;
  params.n_patches = 8;
  params.k_background = 1;
  params.separation = 6.0;
  const auto [dataset, truth] = sample_dataset(layout, params, 51);

  Hyperparams hyper;
  hyper.seed = 9;
  hyper.max_sweeps = 120;
  hyper.tol = 1e-7;
  const auto result = train(dataset, layout, hyper);

  for (int k = 0; k < layout.annotated(); ++k) {
    const double cos =
        result.model.phi.row(k).dot(truth.a_true.row(k)) /
        (result.model.phi.row(k).norm() * truth.a_true.row(k).norm());
    CHECK(cos >= 0.8);
  }
}

TEST_CASE("literal stick term is a distinct comparison mode") {
  const auto layout = layout_for(2, 2, 8, 6);
  const Dataset dataset = small_synth(53);
  Hyperparams hyper;
  hyper.max_sweeps = 3;
  TrainOptions literal;
  literal.eta_literal = true;
  const auto a = train(dataset, layout, hyper);
  const auto b = train(dataset, layout, hyper, literal);
  CHECK(a.trace.back() != b.trace.back());
}
