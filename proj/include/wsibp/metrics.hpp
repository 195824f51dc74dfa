#pragma once

#include <map>
#include <set>
#include <vector>

namespace wsibp {

/// Precision/recall at every rank of a relevance-flagged ranking.
struct PRCurve {
  std::vector<int> relevance;      // ranked 0/1 flags
  std::vector<double> precision;   // precision at rank r+1
  std::vector<double> recall;      // recall at rank r+1 (0 if no positives)
};

PRCurve pr_curve(const std::vector<int>& ranked_relevance);

/// One image's prediction for the annotation protocol: the most confident
/// object and its ranked attribute list.
struct AnnotationPrediction {
  int object = 0;
  std::vector<int> attributes;  // ranked attribute factors, best first
};

/// Truth for the annotation protocol: objects present in the image, each
/// with the attribute set associated to it.
struct AnnotationTruth {
  std::map<int, std::set<int>> object_attributes;
};

/// Per image: zero when the predicted object is absent from the truth
/// (a wrong object makes all its attributes wrong); otherwise average
/// precision of the top-t attribute list against the object's truth set,
/// normalized by min(t, truth size). Mean over images.
double ap_at_t(const std::vector<AnnotationPrediction>& predictions,
               const std::vector<AnnotationTruth>& truth, int t);

/// Interpolation-free average precision of one score vector against binary
/// truth; ties broken by item index. Throws when truth has no positives.
double pr_map(const std::vector<double>& scores, const std::vector<int>& truth);

/// Mean average recall over precision levels: per query, the maximum recall
/// achieved at any rank with precision >= p (0 when unreachable), averaged
/// over the grid, then over queries.
double mar(const std::vector<std::vector<int>>& rankings,
           const std::vector<double>& precision_grid);

/// The default precision grid {0.1, 0.2, ..., 1.0}.
std::vector<double> default_precision_grid();

}  // namespace wsibp
