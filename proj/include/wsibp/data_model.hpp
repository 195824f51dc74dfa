#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace wsibp {

/// Row-major dense storage so that per-patch rows are contiguous.
using MatrixRM =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Factor index layout: objects first, then attributes, then background.
/// Indices are 0-based throughout the code and the file formats:
/// objects occupy [0, k_o), attributes [k_o, k_o + k_a), background the rest.
struct FactorLayout {
  int k_o = 0;    // object factors
  int k_a = 0;    // attribute factors
  int k_max = 0;  // truncation level
  int d = 0;      // feature dimension

  int annotated() const { return k_o + k_a; }
  bool is_object(int k) const { return k >= 0 && k < k_o; }
  bool is_attribute(int k) const { return k >= k_o && k < k_o + k_a; }
  bool is_background(int k) const { return k >= k_o + k_a && k < k_max; }

  /// Throws std::invalid_argument unless k_o >= 1, k_a >= 0, d >= 1 and
  /// k_max > k_o + k_a (background factors must exist).
  void validate() const;
};

/// One image as a bag of patch feature vectors plus an optional image-level
/// binary annotation vector over the annotated factors.
struct ImageBag {
  std::string id;
  MatrixRM patches;                         // N x D
  std::optional<Eigen::VectorXi> labels;    // length k_o + k_a, entries 0/1

  Eigen::Index n_patches() const { return patches.rows(); }
};

using Dataset = std::vector<ImageBag>;

/// Fixed model parameters and run controls.
struct Hyperparams {
  double alpha = 2.0;    // stick-breaking concentration
  double sigma = 0.5;    // observation noise std
  double sigma_a = 1.0;  // appearance prior std
  int max_sweeps = 200;
  double tol = 1e-5;     // relative objective tolerance
  std::uint64_t seed = 0;

  void validate() const;
};

/// Frozen appearance posteriors: the product of training and the input to
/// test-time inference. phi_var holds the isotropic coefficient c_k of the
/// posterior covariance c_k * I.
struct Model {
  FactorLayout layout;
  Hyperparams hyper;
  MatrixRM phi;             // k_max x d posterior means
  Eigen::VectorXd phi_var;  // k_max coefficients, 0 < c_k <= sigma_a^2

  void validate() const;
};

/// Per-image posterior used by all downstream tasks.
struct PosteriorSummary {
  Eigen::ArrayX2d tau;      // k_max rows of (tau1, tau2)
  MatrixRM nu;              // N x k_max assignment probabilities
  Eigen::VectorXd pi_mean;  // E[pi_k] = prod_{t<=k} tau_t1 / (tau_t1 + tau_t2)
};

/// Throws std::invalid_argument if the bag violates the layout (dimension
/// mismatch, non-finite feature, bad label vector).
void validate_bag(const ImageBag& bag, const FactorLayout& layout);

/// JSON-lines dataset, one image per line:
///   {"id": "...", "patches": [[f64 x D], ...], "labels": [0|1 x (k_o+k_a)]}
/// "labels" is optional. Errors carry the offending line number.
Dataset load_dataset(const std::filesystem::path& path,
                     const FactorLayout& layout);
void save_dataset(const Dataset& dataset, const std::filesystem::path& path);

/// Model file (JSON, version 1). load(save(m)) is bit-exact.
void save_model(const Model& model, const std::filesystem::path& path);
Model load_model(const std::filesystem::path& path);

/// Batch inference output, one image per line:
///   {"id": "...", "pi_mean": [...], "nu": [[...] x N]}
void save_posteriors(
    const std::vector<std::pair<std::string, PosteriorSummary>>& posts,
    const std::filesystem::path& path);
std::vector<std::pair<std::string, PosteriorSummary>> load_posteriors(
    const std::filesystem::path& path, const FactorLayout& layout);

}  // namespace wsibp
