#include "wsibp/data_model.hpp"

#include <cmath>
#include <fstream>
#include <json.hpp>
#include <stdexcept>

namespace wsibp {

using nlohmann::json;

namespace {

[[noreturn]] void fail(const std::string& msg) { throw std::runtime_error(msg); }

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail("cannot open " + path.string());
  return in;
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) fail("cannot open " + path.string() + " for writing");
  return out;
}

json matrix_to_json(const MatrixRM& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

MatrixRM matrix_from_json(const json& rows, const std::string& what) {
  if (!rows.is_array() || rows.empty()) fail(what + ": expected non-empty array of rows");
  const auto cols = rows.front().size();
  MatrixRM m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& row = rows[i];
    if (!row.is_array() || row.size() != cols) fail(what + ": ragged rows");
    for (std::size_t j = 0; j < cols; ++j) {
      if (!row[j].is_number()) fail(what + ": non-numeric entry");
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = row[j].get<double>();
    }
  }
  return m;
}

}  // namespace

void FactorLayout::validate() const {
  if (k_o < 1) throw std::invalid_argument("layout: k_o must be >= 1");
  if (k_a < 0) throw std::invalid_argument("layout: k_a must be >= 0");
  if (d < 1) throw std::invalid_argument("layout: d must be >= 1");
  if (k_max <= k_o + k_a) {
    throw std::invalid_argument(
        "layout: k_max must exceed k_o + k_a (background factors must exist)");
  }
}

void Hyperparams::validate() const {
  if (!(alpha > 0)) throw std::invalid_argument("hyperparams: alpha must be > 0");
  if (!(sigma > 0)) throw std::invalid_argument("hyperparams: sigma must be > 0");
  if (!(sigma_a > 0)) throw std::invalid_argument("hyperparams: sigma_a must be > 0");
  if (max_sweeps < 1) throw std::invalid_argument("hyperparams: max_sweeps must be >= 1");
  if (std::isnan(tol) || tol < 0) throw std::invalid_argument("hyperparams: tol must be >= 0");
}

void Model::validate() const {
  layout.validate();
  hyper.validate();
  if (phi.rows() != layout.k_max || phi.cols() != layout.d) {
    throw std::invalid_argument("model: phi shape does not match layout");
  }
  if (phi_var.size() != layout.k_max) {
    throw std::invalid_argument("model: phi_var length does not match layout");
  }
  if (!phi.allFinite()) throw std::invalid_argument("model: non-finite phi entry");
  const double cap = hyper.sigma_a * hyper.sigma_a;
  for (Eigen::Index k = 0; k < phi_var.size(); ++k) {
    if (!(phi_var(k) > 0) || phi_var(k) > cap * (1.0 + 1e-12)) {
      throw std::invalid_argument(
          "model: phi_var must satisfy 0 < c_k <= sigma_a^2 (factor " +
          std::to_string(k) + ")");
    }
  }
}

void validate_bag(const ImageBag& bag, const FactorLayout& layout) {
  if (bag.patches.rows() < 1) {
    throw std::invalid_argument("bag " + bag.id + ": needs at least one patch");
  }
  if (bag.patches.cols() != layout.d) {
    throw std::invalid_argument("bag " + bag.id + ": patch dimension " +
                                std::to_string(bag.patches.cols()) +
                                " does not match layout d=" + std::to_string(layout.d));
  }
  if (!bag.patches.allFinite()) {
    throw std::invalid_argument("bag " + bag.id + ": non-finite feature value");
  }
  if (bag.labels) {
    if (bag.labels->size() != layout.annotated()) {
      throw std::invalid_argument(
          "bag " + bag.id + ": label vector length " + std::to_string(bag.labels->size()) +
          " does not match k_o+k_a=" + std::to_string(layout.annotated()));
    }
    for (Eigen::Index k = 0; k < bag.labels->size(); ++k) {
      const int v = (*bag.labels)(k);
      if (v != 0 && v != 1) {
        throw std::invalid_argument("bag " + bag.id + ": label entries must be 0 or 1");
      }
    }
  }
}

Dataset load_dataset(const std::filesystem::path& path, const FactorLayout& layout) {
  layout.validate();
  auto in = open_in(path);
  Dataset dataset;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json obj;
    try {
      obj = json::parse(line);
    } catch (const json::exception& e) {
      fail(path.string() + ": line " + std::to_string(line_no) + ": " + e.what());
    }
    ImageBag bag;
    try {
      if (!obj.contains("id") || !obj["id"].is_string()) fail("missing string field 'id'");
      bag.id = obj["id"].get<std::string>();
      if (!obj.contains("patches")) fail("missing field 'patches'");
      bag.patches = matrix_from_json(obj["patches"], "patches");
      if (obj.contains("labels")) {
        const auto& lab = obj["labels"];
        if (!lab.is_array()) fail("labels: expected array");
        Eigen::VectorXi labels(static_cast<Eigen::Index>(lab.size()));
        for (std::size_t k = 0; k < lab.size(); ++k) {
          if (!lab[k].is_number_integer()) fail("labels: entries must be integers");
          labels(static_cast<Eigen::Index>(k)) = lab[k].get<int>();
        }
        bag.labels = std::move(labels);
      }
      validate_bag(bag, layout);
    } catch (const std::exception& e) {
      fail(path.string() + ": line " + std::to_string(line_no) + ": " + e.what());
    }
    dataset.push_back(std::move(bag));
  }
  return dataset;
}

void save_dataset(const Dataset& dataset, const std::filesystem::path& path) {
  auto out = open_out(path);
  for (const auto& bag : dataset) {
    json obj;
    obj["id"] = bag.id;
    obj["patches"] = matrix_to_json(bag.patches);
    if (bag.labels) {
      json lab = json::array();
      for (Eigen::Index k = 0; k < bag.labels->size(); ++k) lab.push_back((*bag.labels)(k));
      obj["labels"] = std::move(lab);
    }
    out << obj.dump() << '\n';
  }
}

void save_model(const Model& model, const std::filesystem::path& path) {
  model.validate();
  json obj;
  obj["version"] = 1;
  obj["layout"] = {{"k_o", model.layout.k_o},
                   {"k_a", model.layout.k_a},
                   {"k_max", model.layout.k_max},
                   {"d", model.layout.d}};
  obj["hyper"] = {{"alpha", model.hyper.alpha},
                  {"sigma", model.hyper.sigma},
                  {"sigma_a", model.hyper.sigma_a}};
  obj["phi"] = matrix_to_json(model.phi);
  json pv = json::array();
  for (Eigen::Index k = 0; k < model.phi_var.size(); ++k) pv.push_back(model.phi_var(k));
  obj["phi_var"] = std::move(pv);
  auto out = open_out(path);
  out << obj.dump(2) << '\n';
}

Model load_model(const std::filesystem::path& path) {
  auto in = open_in(path);
  json obj;
  try {
    in >> obj;
  } catch (const json::exception& e) {
    fail(path.string() + ": corrupted model payload: " + e.what());
  }
  if (!obj.contains("version") || !obj["version"].is_number_integer() ||
      obj["version"].get<int>() != 1) {
    fail(path.string() + ": unsupported model version (expected 1)");
  }
  Model model;
  try {
    const auto& lay = obj.at("layout");
    model.layout.k_o = lay.at("k_o").get<int>();
    model.layout.k_a = lay.at("k_a").get<int>();
    model.layout.k_max = lay.at("k_max").get<int>();
    model.layout.d = lay.at("d").get<int>();
    const auto& hyper = obj.at("hyper");
    model.hyper.alpha = hyper.at("alpha").get<double>();
    model.hyper.sigma = hyper.at("sigma").get<double>();
    model.hyper.sigma_a = hyper.at("sigma_a").get<double>();
    model.phi = matrix_from_json(obj.at("phi"), "phi");
    const auto& pv = obj.at("phi_var");
    if (!pv.is_array()) fail("phi_var: expected array");
    model.phi_var.resize(static_cast<Eigen::Index>(pv.size()));
    for (std::size_t k = 0; k < pv.size(); ++k) {
      model.phi_var(static_cast<Eigen::Index>(k)) = pv[k].get<double>();
    }
  } catch (const json::exception& e) {
    fail(path.string() + ": corrupted model payload: " + e.what());
  }
  model.validate();
  return model;
}

void save_posteriors(
    const std::vector<std::pair<std::string, PosteriorSummary>>& posts,
    const std::filesystem::path& path) {
  auto out = open_out(path);
  for (const auto& [id, post] : posts) {
    json obj;
    obj["id"] = id;
    json pi = json::array();
    for (Eigen::Index k = 0; k < post.pi_mean.size(); ++k) pi.push_back(post.pi_mean(k));
    obj["pi_mean"] = std::move(pi);
    obj["nu"] = matrix_to_json(post.nu);
    json tau = json::array();
    for (Eigen::Index k = 0; k < post.tau.rows(); ++k) {
      tau.push_back(json::array({post.tau(k, 0), post.tau(k, 1)}));
    }
    obj["tau"] = std::move(tau);
    out << obj.dump() << '\n';
  }
}

std::vector<std::pair<std::string, PosteriorSummary>> load_posteriors(
    const std::filesystem::path& path, const FactorLayout& layout) {
  auto in = open_in(path);
  std::vector<std::pair<std::string, PosteriorSummary>> posts;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const json obj = json::parse(line);
      PosteriorSummary post;
      const auto& pi = obj.at("pi_mean");
      post.pi_mean.resize(static_cast<Eigen::Index>(pi.size()));
      for (std::size_t k = 0; k < pi.size(); ++k) {
        post.pi_mean(static_cast<Eigen::Index>(k)) = pi[k].get<double>();
      }
      post.nu = matrix_from_json(obj.at("nu"), "nu");
      if (obj.contains("tau")) {
        const auto& tau = obj.at("tau");
        post.tau.resize(static_cast<Eigen::Index>(tau.size()), 2);
        for (std::size_t k = 0; k < tau.size(); ++k) {
          post.tau(static_cast<Eigen::Index>(k), 0) = tau[k].at(0).get<double>();
          post.tau(static_cast<Eigen::Index>(k), 1) = tau[k].at(1).get<double>();
        }
      }
      if (post.nu.cols() != layout.k_max || post.pi_mean.size() != layout.k_max) {
        fail("posterior width does not match layout k_max");
      }
      posts.emplace_back(obj.at("id").get<std::string>(), std::move(post));
    } catch (const std::exception& e) {
      fail(path.string() + ": line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return posts;
}

}  // namespace wsibp
