#include "wsibp/sampler.hpp"

#include <Eigen/Dense>
#include <fstream>
#include <json.hpp>
#include <stdexcept>

#include "wsibp/rng.hpp"

namespace wsibp {

using nlohmann::json;

namespace {

/// First k rows of a random orthonormal basis of R^d, seeded.
MatrixRM random_orthonormal_rows(int k, int d, Rng& rng) {
  Eigen::MatrixXd g(d, d);
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j < d; ++j) g(i, j) = rng.normal();
  }
  const Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
  Eigen::MatrixXd q = qr.householderQ();
  MatrixRM rows(k, d);
  for (int i = 0; i < k; ++i) rows.row(i) = q.col(i).transpose();
  return rows;
}

}  // namespace

GenParams well_separated_preset(int n_images, int n_patches, int k_background) {
  GenParams p;
  p.n_images = n_images;
  p.n_patches = n_patches;
  p.k_background = k_background;
  p.separation = 5.0;
  return p;
}

std::pair<Dataset, GroundTruth> sample_dataset(const FactorLayout& layout,
                                               const GenParams& params,
                                               std::uint64_t seed) {
  layout.validate();
  if (params.n_images < 1) throw std::invalid_argument("sampler: n_images must be >= 1");
  if (params.n_patches < 1) throw std::invalid_argument("sampler: n_patches must be >= 1");
  if (params.k_background < 0) throw std::invalid_argument("sampler: k_background must be >= 0");
  if (!(params.alpha > 0)) throw std::invalid_argument("sampler: alpha must be > 0");
  if (!(params.sigma >= 0)) throw std::invalid_argument("sampler: sigma must be >= 0");

  const int k = layout.annotated() + params.k_background;
  const int d = layout.d;

  GroundTruth truth;
  truth.seed = seed;
  Rng plant_rng(derive_seed(seed, 0));
  if (params.a_true) {
    if (params.a_true->rows() != k || params.a_true->cols() != d) {
      throw std::invalid_argument("sampler: a_true shape must be (k_o+k_a+k_background) x d");
    }
    truth.a_true = *params.a_true;
  } else if (params.separation > 0) {
    if (k > d) {
      throw std::invalid_argument(
          "sampler: orthogonal planting needs d >= number of planted factors");
    }
    if (!(params.sigma > 0)) {
      throw std::invalid_argument("sampler: separation scaling needs sigma > 0");
    }
    truth.a_true =
        params.separation * params.sigma * random_orthonormal_rows(k, d, plant_rng);
  } else {
    if (!(params.sigma_a > 0)) throw std::invalid_argument("sampler: sigma_a must be > 0");
    truth.a_true.resize(k, d);
    for (int i = 0; i < k; ++i) {
      for (int j = 0; j < d; ++j) truth.a_true(i, j) = params.sigma_a * plant_rng.normal();
    }
  }

  Dataset dataset;
  dataset.reserve(params.n_images);
  truth.images.reserve(params.n_images);
  for (int i = 0; i < params.n_images; ++i) {
    Rng rng(derive_seed(seed, 1 + static_cast<std::uint64_t>(i)));
    GroundTruthImage gti;
    gti.pi.resize(k);
    double pi = 1.0;
    for (int f = 0; f < k; ++f) {
      pi *= rng.beta_alpha_one(params.alpha);
      gti.pi(f) = pi;
    }
    gti.z.resize(params.n_patches, k);
    for (int j = 0; j < params.n_patches; ++j) {
      for (int f = 0; f < k; ++f) gti.z(j, f) = rng.bernoulli(gti.pi(f)) ? 1 : 0;
    }

    ImageBag bag;
    bag.id = "img" + std::to_string(i);
    bag.patches.resize(params.n_patches, d);
    for (int j = 0; j < params.n_patches; ++j) {
      Eigen::RowVectorXd x = Eigen::RowVectorXd::Zero(d);
      for (int f = 0; f < k; ++f) {
        if (gti.z(j, f)) x += truth.a_true.row(f);
      }
      if (params.sigma > 0) {
        for (int c = 0; c < d; ++c) x(c) += params.sigma * rng.normal();
      }
      bag.patches.row(j) = x;
    }
    Eigen::VectorXi labels = Eigen::VectorXi::Zero(layout.annotated());
    for (int f = 0; f < layout.annotated(); ++f) {
      labels(f) = gti.z.col(f).maxCoeff() > 0 ? 1 : 0;
    }
    bag.labels = std::move(labels);

    dataset.push_back(std::move(bag));
    truth.images.push_back(std::move(gti));
  }
  return {std::move(dataset), std::move(truth)};
}

void save_ground_truth(const GroundTruth& truth, const Dataset& dataset,
                       const std::filesystem::path& path) {
  if (dataset.size() != truth.images.size()) {
    throw std::invalid_argument("ground truth / dataset size mismatch");
  }
  json obj;
  obj["seed"] = truth.seed;
  json a = json::array();
  for (Eigen::Index i = 0; i < truth.a_true.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < truth.a_true.cols(); ++j) row.push_back(truth.a_true(i, j));
    a.push_back(std::move(row));
  }
  obj["a_true"] = std::move(a);
  json images = json::array();
  for (std::size_t i = 0; i < truth.images.size(); ++i) {
    json img;
    img["id"] = dataset[i].id;
    json z = json::array();
    for (Eigen::Index r = 0; r < truth.images[i].z.rows(); ++r) {
      json row = json::array();
      for (Eigen::Index c = 0; c < truth.images[i].z.cols(); ++c) {
        row.push_back(truth.images[i].z(r, c));
      }
      z.push_back(std::move(row));
    }
    img["z"] = std::move(z);
    json pi = json::array();
    for (Eigen::Index f = 0; f < truth.images[i].pi.size(); ++f) {
      pi.push_back(truth.images[i].pi(f));
    }
    img["pi"] = std::move(pi);
    images.push_back(std::move(img));
  }
  obj["images"] = std::move(images);
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << obj.dump() << '\n';
}

GroundTruth load_ground_truth(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  json obj;
  try {
    in >> obj;
  } catch (const json::exception& e) {
    throw std::runtime_error(path.string() + ": corrupted ground truth: " + e.what());
  }
  GroundTruth truth;
  truth.seed = obj.value("seed", 0ULL);
  const auto& a = obj.at("a_true");
  truth.a_true.resize(static_cast<Eigen::Index>(a.size()),
                      static_cast<Eigen::Index>(a.front().size()));
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = 0; j < a[i].size(); ++j) {
      truth.a_true(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          a[i][j].get<double>();
    }
  }
  for (const auto& img : obj.at("images")) {
    GroundTruthImage gti;
    const auto& z = img.at("z");
    gti.z.resize(static_cast<Eigen::Index>(z.size()),
                 static_cast<Eigen::Index>(z.front().size()));
    for (std::size_t r = 0; r < z.size(); ++r) {
      for (std::size_t c = 0; c < z[r].size(); ++c) {
        gti.z(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
            z[r][c].get<int>();
      }
    }
    const auto& pi = img.at("pi");
    gti.pi.resize(static_cast<Eigen::Index>(pi.size()));
    for (std::size_t f = 0; f < pi.size(); ++f) {
      gti.pi(static_cast<Eigen::Index>(f)) = pi[f].get<double>();
    }
    truth.images.push_back(std::move(gti));
  }
  return truth;
}

}  // namespace wsibp
