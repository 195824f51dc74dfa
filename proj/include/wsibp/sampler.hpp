#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <utility>
#include <vector>

#include "wsibp/data_model.hpp"

namespace wsibp {

/// Generation controls. The number of planted factors is
/// layout.k_o + layout.k_a + k_background (independent of layout.k_max).
struct GenParams {
  double alpha = 2.0;
  double sigma = 0.5;    // observation noise std; 0 gives noiseless patches
  double sigma_a = 1.0;  // appearance prior std when a_true is not given
  int n_images = 0;      // M
  int n_patches = 0;     // N per image
  int k_background = 3;
  /// When > 0 (and a_true is absent), planted appearance rows are mutually
  /// orthogonal with norm separation * sigma.
  double separation = 0.0;
  std::optional<MatrixRM> a_true;  // explicit planted appearances, K x D
};

struct GroundTruthImage {
  Eigen::MatrixXi z;   // N x K binary activations
  Eigen::VectorXd pi;  // K stick weights
};

/// Planted parameters and activations: the sampler's answer key.
struct GroundTruth {
  MatrixRM a_true;  // K x D
  std::vector<GroundTruthImage> images;
  std::uint64_t seed = 0;
};

/// Forward-samples the generative process: per image, sticks v_t ~
/// Beta(alpha, 1) define pi_k = prod v_t; each patch activates factor k with
/// probability pi_k; patches are the sum of active appearance rows plus
/// isotropic Gaussian noise. Weak labels are the OR over patches of the
/// annotated factor activations.
std::pair<Dataset, GroundTruth> sample_dataset(const FactorLayout& layout,
                                               const GenParams& params,
                                               std::uint64_t seed);

/// Sidecar ground-truth file (JSON) for test harnesses and `eval`.
void save_ground_truth(const GroundTruth& truth, const Dataset& dataset,
                       const std::filesystem::path& path);
GroundTruth load_ground_truth(const std::filesystem::path& path);

/// The standard synthetic preset: orthogonal planted rows with norm
/// 5 * sigma, the regime where recovery is easy and failures indicate bugs.
GenParams well_separated_preset(int n_images, int n_patches, int k_background);

}  // namespace wsibp
