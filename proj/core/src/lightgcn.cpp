#include <cmath>

#include "pairwise.hpp"
#include "shillbench/recommender.hpp"

namespace shillbench {

SparseMatrix normalized_adjacency(const InteractionDataset& train) {
  const auto nu = static_cast<Eigen::Index>(train.n_users());
  const auto ni = static_cast<Eigen::Index>(train.n_items());
  std::vector<Eigen::Triplet<double>> entries;
  entries.reserve(2 * train.size());
  for (const auto& x : train.interactions()) {
    const double du = static_cast<double>(train.user_items(x.user).size());
    const double di = static_cast<double>(train.item_users(x.item).size());
    const double w = 1.0 / std::sqrt(du * di);
    entries.emplace_back(x.user, nu + x.item, w);
    entries.emplace_back(nu + x.item, x.user, w);
  }
  SparseMatrix a(nu + ni, nu + ni);
  a.setFromTriplets(entries.begin(), entries.end());
  return a;
}

Matrix propagate_mean(const SparseMatrix& adjacency, const Matrix& ego, int n_layers) {
  Matrix sum = ego;
  Matrix layer = ego;
  for (int k = 0; k < n_layers; ++k) {
    Matrix next = adjacency * layer;
    sum += next;
    layer = std::move(next);
  }
  return sum / static_cast<double>(n_layers + 1);
}

double bpr_batch_loss(const EmbeddingModel& m, std::span<const Triple> batch, double l2, Matrix* grad) {
  const auto nu = m.user_factors.rows();
  const auto ni = m.item_factors.rows();
  Matrix ego(nu + ni, m.user_factors.cols());
  ego << m.user_factors, m.item_factors;
  const Matrix final = m.n_layers == 0 ? ego : propagate_mean(m.norm_adjacency, ego, m.n_layers);

  Matrix g_final;
  if (grad) g_final = Matrix::Zero(nu + ni, ego.cols());
  double loss = 0.0;
  for (const auto& t : batch) {
    const auto u = static_cast<Eigen::Index>(t.user);
    const auto i = nu + t.positive;
    const auto j = nu + t.negative;
    const double x = final.row(u).dot(final.row(i) - final.row(j));
    loss += detail::softplus(-x) + l2 * (ego.row(u).squaredNorm() + ego.row(i).squaredNorm() + ego.row(j).squaredNorm());
    if (!grad) continue;
    const double s = detail::sigmoid(-x);
    g_final.row(u) -= s * (final.row(i) - final.row(j));
    g_final.row(i) -= s * final.row(u);
    g_final.row(j) += s * final.row(u);
  }
  if (!grad) return loss;

  // The forward map is linear and the adjacency symmetric, so the backward
  // pass is the same layer mean applied to the output gradient.
  *grad = m.n_layers == 0 ? g_final : propagate_mean(m.norm_adjacency, g_final, m.n_layers);
  for (const auto& t : batch) {
    for (const auto r : {static_cast<Eigen::Index>(t.user), nu + t.positive, nu + t.negative})
      grad->row(r) += 2.0 * l2 * ego.row(r);
  }
  return loss;
}

EmbeddingModel train_lightgcn(const InteractionDataset& train, const TrainConfig& cfg, int n_layers, TrainLog* log) {
  return detail::train_pairwise(train, cfg, n_layers, log);
}

}  // namespace shillbench
