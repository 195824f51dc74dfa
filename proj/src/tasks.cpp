#include "wsibp/tasks.hpp"

#include <algorithm>
#include <set>
#include <stdexcept>

namespace wsibp {

namespace {

void check_post(const PosteriorSummary& post, const FactorLayout& layout) {
  layout.validate();
  if (post.nu.cols() != layout.k_max || post.pi_mean.size() != layout.k_max) {
    throw std::invalid_argument("tasks: posterior width does not match layout");
  }
}

int argmax_patch(const PosteriorSummary& post, int k) {
  int best = 0;
  for (Eigen::Index j = 1; j < post.nu.rows(); ++j) {
    if (post.nu(j, k) > post.nu(best, k)) best = static_cast<int>(j);
  }
  return best;
}

std::vector<AttributeScore> ranked_attributes(const Eigen::RowVectorXd& row,
                                              const FactorLayout& layout,
                                              int t) {
  std::vector<AttributeScore> attrs;
  attrs.reserve(static_cast<std::size_t>(layout.k_a));
  for (int a = layout.k_o; a < layout.k_o + layout.k_a; ++a) {
    attrs.push_back({a, row(a)});
  }
  std::sort(attrs.begin(), attrs.end(), [](const auto& x, const auto& y) {
    if (x.score != y.score) return x.score > y.score;
    return x.factor < y.factor;
  });
  if (t < static_cast<int>(attrs.size())) attrs.resize(static_cast<std::size_t>(t));
  return attrs;
}

Annotation annotate_object(const PosteriorSummary& post,
                           const FactorLayout& layout, int object, int t) {
  Annotation ann;
  ann.object = object;
  ann.object_score = post.pi_mean(object);
  ann.patch = argmax_patch(post, object);
  ann.attributes = ranked_attributes(post.nu.row(ann.patch), layout, t);
  return ann;
}

std::vector<int> ranked_objects(const PosteriorSummary& post,
                                const FactorLayout& layout) {
  std::vector<int> order(static_cast<std::size_t>(layout.k_o));
  for (int k = 0; k < layout.k_o; ++k) order[static_cast<std::size_t>(k)] = k;
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    if (post.pi_mean(a) != post.pi_mean(b)) return post.pi_mean(a) > post.pi_mean(b);
    return a < b;
  });
  return order;
}

}  // namespace

std::vector<Annotation> free_annotate(const PosteriorSummary& post,
                                      const FactorLayout& layout,
                                      int n_objects, int t) {
  check_post(post, layout);
  if (n_objects < 1 || n_objects > layout.k_o) {
    throw std::invalid_argument("free_annotate: n_objects must be in [1, k_o]");
  }
  if (t < 0 || t > layout.k_a) {
    throw std::invalid_argument("free_annotate: t must be in [0, k_a]");
  }
  std::vector<Annotation> out;
  const auto order = ranked_objects(post, layout);
  for (int r = 0; r < n_objects; ++r) {
    out.push_back(annotate_object(post, layout, order[static_cast<std::size_t>(r)], t));
  }
  return out;
}

std::vector<Annotation> free_annotate_threshold(const PosteriorSummary& post,
                                                const FactorLayout& layout,
                                                double threshold, int t) {
  check_post(post, layout);
  if (t < 0 || t > layout.k_a) {
    throw std::invalid_argument("free_annotate_threshold: t must be in [0, k_a]");
  }
  std::vector<Annotation> out;
  for (int object : ranked_objects(post, layout)) {
    if (post.pi_mean(object) >= threshold) {
      out.push_back(annotate_object(post, layout, object, t));
    }
  }
  return out;
}

Annotation annotate_given_names(const PosteriorSummary& post,
                                const FactorLayout& layout, int object) {
  check_post(post, layout);
  if (object < 0 || object >= layout.k_o) {
    throw std::invalid_argument("annotate_given_names: object index out of range");
  }
  return annotate_object(post, layout, object, layout.k_a);
}

std::vector<AttributeScore> attributes_given_location(
    const PosteriorSummary& post, const FactorLayout& layout,
    const std::vector<int>& patch_set) {
  check_post(post, layout);
  if (patch_set.empty()) {
    throw std::invalid_argument("attributes_given_location: empty patch set");
  }
  std::set<int> seen;
  for (int j : patch_set) {
    if (j < 0 || j >= post.nu.rows()) {
      throw std::invalid_argument("attributes_given_location: patch index out of range");
    }
    if (!seen.insert(j).second) {
      throw std::invalid_argument("attributes_given_location: duplicate patch index");
    }
  }
  Eigen::RowVectorXd mean = Eigen::RowVectorXd::Zero(layout.k_max);
  for (int j : patch_set) mean += post.nu.row(j);
  mean /= static_cast<double>(patch_set.size());
  return ranked_attributes(mean, layout, layout.k_a);
}

std::vector<QueryResult> query(
    const std::vector<std::pair<std::string, PosteriorSummary>>& corpus,
    const FactorLayout& layout, int object, const std::vector<int>& attrs) {
  layout.validate();
  if (object < 0 || object >= layout.k_o) {
    throw std::invalid_argument("query: object index out of range");
  }
  for (int a : attrs) {
    if (a < layout.k_o || a >= layout.k_o + layout.k_a) {
      throw std::invalid_argument("query: attribute index out of range");
    }
  }

  std::vector<QueryResult> out;
  out.reserve(corpus.size());
  for (const auto& [id, post] : corpus) {
    check_post(post, layout);
    double best = 0.0;
    for (Eigen::Index j = 0; j < post.nu.rows(); ++j) {
      double s = post.nu(j, object);
      for (int a : attrs) s *= post.nu(j, a);
      if (s > best) best = s;
    }
    out.push_back({id, best});
  }
  std::sort(out.begin(), out.end(), [](const QueryResult& a, const QueryResult& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.id < b.id;
  });
  return out;
}

}  // namespace wsibp
