#include <Eigen/SparseCore>
#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "shillbench/recommender.hpp"

namespace shillbench {

ItemKnnModel::ItemKnnModel(std::vector<std::vector<Neighbor>> neighbors, std::vector<std::vector<ItemIndex>> user_items,
                           int k_neighbors)
    : neighbors_(std::move(neighbors)), user_items_(std::move(user_items)), k_(k_neighbors) {}

void ItemKnnModel::score_items(UserIndex u, std::span<double> out) const {
  if (u < 0 || static_cast<std::size_t>(u) >= n_users()) throw std::out_of_range("unknown user index " + std::to_string(u));
  if (out.size() != n_items()) throw std::invalid_argument("score buffer size mismatch");
  std::vector<char> mine(n_items(), 0);
  for (const auto j : user_items_[static_cast<std::size_t>(u)]) mine[static_cast<std::size_t>(j)] = 1;
  for (std::size_t i = 0; i < n_items(); ++i) {
    double s = 0.0;
    for (const auto& nb : neighbors_[i])
      if (mine[static_cast<std::size_t>(nb.item)]) s += nb.similarity;
    out[i] = s;
  }
}

Matrix item_cosine_similarity(const InteractionDataset& d) {
  using Sparse = Eigen::SparseMatrix<double>;
  std::vector<Eigen::Triplet<double>> entries;
  entries.reserve(d.size());
  for (const auto& x : d.interactions()) entries.emplace_back(x.user, x.item, x.rating);
  Sparse r(static_cast<Eigen::Index>(d.n_users()), static_cast<Eigen::Index>(d.n_items()));
  r.setFromTriplets(entries.begin(), entries.end());
  const Sparse gram = (r.transpose() * r).pruned();
  Matrix sim = Matrix(gram);
  const Eigen::VectorXd norms = sim.diagonal().cwiseSqrt();
  for (Eigen::Index a = 0; a < sim.rows(); ++a) {
    for (Eigen::Index b = 0; b < sim.cols(); ++b) {
      const double denom = norms[a] * norms[b];
      sim(a, b) = denom > 0.0 ? sim(a, b) / denom : 0.0;
    }
  }
  return sim;
}

ItemKnnModel train_itemknn(const InteractionDataset& train, int k_neighbors) {
  if (k_neighbors < 1) throw std::invalid_argument("k_neighbors must be at least 1");
  const Matrix sim = item_cosine_similarity(train);
  const auto n = train.n_items();
  std::vector<std::vector<ItemKnnModel::Neighbor>> neighbors(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto& list = neighbors[i];
    for (std::size_t j = 0; j < n; ++j) {
      const double s = sim(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
      if (j != i && s > 0.0) list.push_back({static_cast<ItemIndex>(j), s});
    }
    const auto keep = std::min(list.size(), static_cast<std::size_t>(k_neighbors));
    std::partial_sort(list.begin(), list.begin() + static_cast<std::ptrdiff_t>(keep), list.end(),
                      [](const auto& a, const auto& b) {
                        return a.similarity != b.similarity ? a.similarity > b.similarity : a.item < b.item;
                      });
    list.resize(keep);
  }
  std::vector<std::vector<ItemIndex>> user_items(train.n_users());
  for (std::size_t u = 0; u < train.n_users(); ++u) {
    const auto items = train.user_items(static_cast<UserIndex>(u));
    user_items[u].assign(items.begin(), items.end());
  }
  return ItemKnnModel(std::move(neighbors), std::move(user_items), k_neighbors);
}

}  // namespace shillbench
