#pragma once

#include <string>
#include <utility>
#include <vector>

#include "wsibp/data_model.hpp"

namespace wsibp {

struct AttributeScore {
  int factor = 0;     // attribute factor index, in [k_o, k_o + k_a)
  double score = 0;   // assignment probability at the located patch
};

/// One described object: the factor, its located patch, and the ranked
/// attribute list read off that patch.
struct Annotation {
  int object = 0;          // object factor index, in [0, k_o)
  int patch = 0;           // argmax_j nu(j, object); ties to the lowest index
  double object_score = 0; // posterior stick mean of the object factor
  std::vector<AttributeScore> attributes;  // non-increasing in score
};

/// Ranks objects by pi_mean, locates each at its strongest patch and reads
/// the top-t attributes there. Ties break to the lowest factor/patch index.
std::vector<Annotation> free_annotate(const PosteriorSummary& post,
                                      const FactorLayout& layout,
                                      int n_objects, int t);

/// Threshold variant: keeps every object with pi_mean >= threshold.
std::vector<Annotation> free_annotate_threshold(const PosteriorSummary& post,
                                                const FactorLayout& layout,
                                                double threshold, int t);

/// Describes one named object: locate j* = argmax_j nu(j, object), then rank
/// all attributes by nu(j*, .).
Annotation annotate_given_names(const PosteriorSummary& post,
                                const FactorLayout& layout, int object);

/// Ranks attributes by their mean assignment probability over the given
/// patches. The patch set must be non-empty, valid, and duplicate-free.
std::vector<AttributeScore> attributes_given_location(
    const PosteriorSummary& post, const FactorLayout& layout,
    const std::vector<int>& patch_set);

struct QueryResult {
  std::string id;
  double score = 0;
};

/// Conjunction query: the image score is
///   max_j nu(j, object) * prod_a nu(j, a)
/// over its patches; an empty attribute list ranks by object evidence alone.
/// Descending scores, ties broken by id order.
std::vector<QueryResult> query(
    const std::vector<std::pair<std::string, PosteriorSummary>>& corpus,
    const FactorLayout& layout, int object, const std::vector<int>& attrs);

}  // namespace wsibp
