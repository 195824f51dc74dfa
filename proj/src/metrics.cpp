#include "wsibp/metrics.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

namespace wsibp {

PRCurve pr_curve(const std::vector<int>& ranked_relevance) {
  PRCurve curve;
  curve.relevance = ranked_relevance;
  const int n = static_cast<int>(ranked_relevance.size());
  int total = 0;
  for (int f : ranked_relevance) {
    if (f != 0 && f != 1) throw std::invalid_argument("pr_curve: flags must be 0/1");
    total += f;
  }
  curve.precision.resize(static_cast<std::size_t>(n));
  curve.recall.resize(static_cast<std::size_t>(n));
  int hits = 0;
  for (int r = 0; r < n; ++r) {
    hits += ranked_relevance[static_cast<std::size_t>(r)];
    curve.precision[static_cast<std::size_t>(r)] =
        static_cast<double>(hits) / (r + 1);
    curve.recall[static_cast<std::size_t>(r)] =
        total > 0 ? static_cast<double>(hits) / total : 0.0;
  }
  return curve;
}

double ap_at_t(const std::vector<AnnotationPrediction>& predictions,
               const std::vector<AnnotationTruth>& truth, int t) {
  if (t < 1) throw std::invalid_argument("ap_at_t: t must be >= 1");
  if (predictions.size() != truth.size()) {
    throw std::invalid_argument("ap_at_t: prediction/truth size mismatch");
  }
  if (predictions.empty()) throw std::invalid_argument("ap_at_t: no images");

  double total = 0.0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const auto& pred = predictions[i];
    const auto it = truth[i].object_attributes.find(pred.object);
    if (it == truth[i].object_attributes.end()) continue;  // object wrong -> 0
    const auto& truth_set = it->second;
    if (truth_set.empty()) continue;

    double ap = 0.0;
    int hits = 0;
    const int depth = std::min<int>(t, static_cast<int>(pred.attributes.size()));
    for (int r = 0; r < depth; ++r) {
      if (truth_set.count(pred.attributes[static_cast<std::size_t>(r)])) {
        ++hits;
        ap += static_cast<double>(hits) / (r + 1);
      }
    }
    const int denom = std::min<int>(t, static_cast<int>(truth_set.size()));
    total += ap / denom;
  }
  return total / static_cast<double>(predictions.size());
}

double pr_map(const std::vector<double>& scores, const std::vector<int>& truth) {
  if (scores.size() != truth.size()) {
    throw std::invalid_argument("pr_map: score/truth size mismatch");
  }
  int positives = 0;
  for (int f : truth) {
    if (f != 0 && f != 1) throw std::invalid_argument("pr_map: truth must be 0/1");
    positives += f;
  }
  if (positives == 0) throw std::invalid_argument("pr_map: truth has no positives");

  std::vector<int> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    if (scores[static_cast<std::size_t>(a)] != scores[static_cast<std::size_t>(b)]) {
      return scores[static_cast<std::size_t>(a)] > scores[static_cast<std::size_t>(b)];
    }
    return a < b;
  });

  double ap = 0.0;
  int hits = 0;
  for (std::size_t r = 0; r < order.size(); ++r) {
    if (truth[static_cast<std::size_t>(order[r])]) {
      ++hits;
      ap += static_cast<double>(hits) / static_cast<double>(r + 1);
    }
  }
  return ap / positives;
}

double mar(const std::vector<std::vector<int>>& rankings,
           const std::vector<double>& precision_grid) {
  if (rankings.empty()) throw std::invalid_argument("mar: no rankings");
  if (precision_grid.empty()) throw std::invalid_argument("mar: empty precision grid");
  for (double p : precision_grid) {
    if (!(p > 0.0) || p > 1.0) {
      throw std::invalid_argument("mar: grid values must lie in (0, 1]");
    }
  }

  double total = 0.0;
  for (const auto& ranking : rankings) {
    if (ranking.empty()) throw std::invalid_argument("mar: empty ranking");
    const PRCurve curve = pr_curve(ranking);
    double acc = 0.0;
    for (double p : precision_grid) {
      double best = 0.0;
      for (std::size_t r = 0; r < curve.precision.size(); ++r) {
        if (curve.precision[r] >= p && curve.recall[r] > best) best = curve.recall[r];
      }
      acc += best;
    }
    total += acc / static_cast<double>(precision_grid.size());
  }
  return total / static_cast<double>(rankings.size());
}

std::vector<double> default_precision_grid() {
  std::vector<double> grid;
  for (int i = 1; i <= 10; ++i) grid.push_back(i / 10.0);
  return grid;
}

}  // namespace wsibp
