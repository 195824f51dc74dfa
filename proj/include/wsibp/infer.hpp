#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "wsibp/data_model.hpp"

namespace wsibp {

struct InferOptions {
  double tol = 1e-6;    // relative change of the per-bag objective
  int max_sweeps = 100;
  bool eta_literal = false;
  /// Deterministic flat init at 0.1 by default; a seed jitters the init in
  /// [0.05, 0.15) for sensitivity studies.
  std::optional<std::uint64_t> seed;
};

/// Posterior inference for one unlabeled bag under frozen appearances:
/// stick and assignment updates only, with every effective label set to 1.
/// Bag labels, if present, are ignored.
PosteriorSummary infer(const Model& model, const ImageBag& bag,
                       const InferOptions& options = {});

/// Convenience batch front end; bags are independent, so inference runs in
/// parallel over `threads` workers with deterministic output order.
std::vector<std::pair<std::string, PosteriorSummary>> infer_all(
    const Model& model, const Dataset& bags, const InferOptions& options = {},
    int threads = 1);

/// The per-bag surrogate objective trace of the last options-controlled run
/// is not retained; this evaluates the per-bag objective for a given
/// posterior, used by tests to verify monotone ascent.
double bag_objective(const Model& model, const ImageBag& bag,
                     const PosteriorSummary& post);

}  // namespace wsibp
