#include "shillbench/recommender.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

#include "pairwise.hpp"
#include "shillbench/rng.hpp"

namespace shillbench {
namespace detail {

double softplus(double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

EmbeddingModel init_embedding_model(const InteractionDataset& train, int dim, Rng& rng) {
  EmbeddingModel m;
  const auto nu = static_cast<Eigen::Index>(train.n_users());
  const auto ni = static_cast<Eigen::Index>(train.n_items());
  m.user_bias = Eigen::VectorXd::Zero(nu);
  m.item_bias = Eigen::VectorXd::Zero(ni);
  m.user_factors.resize(nu, dim);
  m.item_factors.resize(ni, dim);
  std::normal_distribution<double> init(0.0, 0.1 / std::sqrt(static_cast<double>(dim)));
  for (Eigen::Index r = 0; r < nu; ++r)
    for (int c = 0; c < dim; ++c) m.user_factors(r, c) = init(rng);
  for (Eigen::Index r = 0; r < ni; ++r)
    for (int c = 0; c < dim; ++c) m.item_factors(r, c) = init(rng);
  m.bounds = train.bounds();
  return m;
}

namespace {

bool sample_negative(const InteractionDataset& train, UserIndex u, Rng& rng, ItemIndex& out) {
  const auto seen = train.user_items(u);
  if (seen.size() >= train.n_items()) return false;
  std::uniform_int_distribution<ItemIndex> pick(0, static_cast<ItemIndex>(train.n_items()) - 1);
  do {
    out = pick(rng);
  } while (std::binary_search(seen.begin(), seen.end(), out));
  return true;
}

// Accumulates sparse row gradients for one batch of the unpropagated model.
class RowGradient {
 public:
  RowGradient(Eigen::Index rows, int dim) : grad_(Matrix::Zero(rows, dim)), touched_(static_cast<std::size_t>(rows)) {}

  auto row(Eigen::Index r) {
    if (!touched_[static_cast<std::size_t>(r)]) {
      touched_[static_cast<std::size_t>(r)] = true;
      rows_.push_back(r);
    }
    return grad_.row(r);
  }

  void apply(Matrix& users, Matrix& items, double lr) {
    const auto nu = users.rows();
    for (const auto r : rows_) {
      if (r < nu)
        users.row(r) -= lr * grad_.row(r);
      else
        items.row(r - nu) -= lr * grad_.row(r);
      grad_.row(r).setZero();
      touched_[static_cast<std::size_t>(r)] = false;
    }
    rows_.clear();
  }

 private:
  Matrix grad_;
  std::vector<bool> touched_;
  std::vector<Eigen::Index> rows_;
};

}  // namespace

EmbeddingModel train_pairwise(const InteractionDataset& train, const TrainConfig& cfg, int n_layers, TrainLog* log) {
  cfg.validate();
  if (n_layers < 0) throw TrainingError("n_layers must be non-negative", 0);
  if (train.is_explicit()) throw TrainingError("pairwise training needs implicit feedback", 0);
  auto rng = make_stream(cfg.seed, streams::kTraining);
  EmbeddingModel m = init_embedding_model(train, cfg.dim, rng);
  m.form = ScoreForm::kDot;
  m.n_layers = n_layers;
  if (n_layers > 0) m.norm_adjacency = normalized_adjacency(train);

  const auto nu = static_cast<Eigen::Index>(train.n_users());
  const auto ni = static_cast<Eigen::Index>(train.n_items());
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const auto& all = train.interactions();

  RowGradient sparse(nu + ni, cfg.dim);
  Matrix dense_grad;
  std::vector<Triple> batch;
  batch.reserve(static_cast<std::size_t>(cfg.batch_size));

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0.0;

    auto flush = [&] {
      if (batch.empty()) return;
      if (n_layers == 0) {
        for (const auto& t : batch) {
          const auto g = bpr_triple_gradient(m, t, cfg.l2);
          epoch_loss += g.loss;
          sparse.row(t.user) += g.user_factor.transpose();
          sparse.row(nu + t.positive) += g.positive_factor.transpose();
          sparse.row(nu + t.negative) += g.negative_factor.transpose();
        }
        sparse.apply(m.user_factors, m.item_factors, cfg.learning_rate);
      } else {
        epoch_loss += bpr_batch_loss(m, batch, cfg.l2, &dense_grad);
        m.user_factors -= cfg.learning_rate * dense_grad.topRows(nu);
        m.item_factors -= cfg.learning_rate * dense_grad.bottomRows(ni);
      }
      batch.clear();
    };

    for (const auto idx : order) {
      const auto& x = all[idx];
      for (int n = 0; n < cfg.negatives_per_positive; ++n) {
        ItemIndex j = 0;
        if (!sample_negative(train, x.user, rng, j)) break;
        batch.push_back({x.user, x.item, j});
        if (batch.size() == static_cast<std::size_t>(cfg.batch_size)) flush();
      }
    }
    flush();

    if (!std::isfinite(epoch_loss) || !m.user_factors.allFinite() || !m.item_factors.allFinite())
      throw TrainingError("pairwise training diverged at epoch " + std::to_string(epoch), epoch - 1);
    if (log) log->epoch_loss.push_back(epoch_loss);
  }
  m.refresh();
  return m;
}

}  // namespace detail

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw TrainingError("learning_rate must be positive", 0);
  if (!(l2 >= 0.0)) throw TrainingError("l2 must be non-negative", 0);
  if (dim < 1) throw TrainingError("dim must be at least 1", 0);
  if (epochs < 0) throw TrainingError("epochs must be non-negative", 0);
  if (negatives_per_positive < 1) throw TrainingError("negatives_per_positive must be at least 1", 0);
  if (batch_size < 1) throw TrainingError("batch_size must be at least 1", 0);
}

void EmbeddingModel::refresh() {
  if (n_layers == 0) {
    final_users_.resize(0, 0);
    final_items_.resize(0, 0);
    return;
  }
  Matrix ego(user_factors.rows() + item_factors.rows(), user_factors.cols());
  ego << user_factors, item_factors;
  const Matrix out = propagate_mean(norm_adjacency, ego, n_layers);
  final_users_ = out.topRows(user_factors.rows());
  final_items_ = out.bottomRows(item_factors.rows());
}

double EmbeddingModel::raw_score(UserIndex u, ItemIndex i) const {
  if (u < 0 || static_cast<std::size_t>(u) >= n_users()) throw std::out_of_range("unknown user index " + std::to_string(u));
  if (i < 0 || static_cast<std::size_t>(i) >= n_items()) throw std::out_of_range("unknown item index " + std::to_string(i));
  const double dot = final_users().row(u).dot(final_items().row(i));
  if (form == ScoreForm::kDot) return dot;
  return global_mean + user_bias[u] + item_bias[i] + dot;
}

double EmbeddingModel::predict_rating(UserIndex u, ItemIndex i) const {
  return std::clamp(raw_score(u, i), bounds.min, bounds.max);
}

void EmbeddingModel::score_items(UserIndex u, std::span<double> out) const {
  if (u < 0 || static_cast<std::size_t>(u) >= n_users()) throw std::out_of_range("unknown user index " + std::to_string(u));
  if (out.size() != n_items()) throw std::invalid_argument("score buffer size mismatch");
  Eigen::Map<Eigen::VectorXd> scores(out.data(), static_cast<Eigen::Index>(out.size()));
  scores.noalias() = final_items() * final_users().row(u).transpose();
  if (form == ScoreForm::kPointwise) scores.array() += global_mean + user_bias[u] + item_bias.array();
}

bool EmbeddingModel::all_finite() const {
  return std::isfinite(global_mean) && user_bias.allFinite() && item_bias.allFinite() && user_factors.allFinite() &&
         item_factors.allFinite();
}

PointwiseGradient pointwise_sample_gradient(const EmbeddingModel& m, UserIndex u, ItemIndex i, double rating,
                                            double l2) {
  const auto p = m.user_factors.row(u);
  const auto q = m.item_factors.row(i);
  const double bu = m.user_bias[u];
  const double bi = m.item_bias[i];
  const double e = rating - (m.global_mean + bu + bi + p.dot(q));
  PointwiseGradient g;
  g.loss = e * e + l2 * (bu * bu + bi * bi + p.squaredNorm() + q.squaredNorm());
  g.user_bias = -2.0 * e + 2.0 * l2 * bu;
  g.item_bias = -2.0 * e + 2.0 * l2 * bi;
  g.user_factor = (-2.0 * e * q + 2.0 * l2 * p).transpose();
  g.item_factor = (-2.0 * e * p + 2.0 * l2 * q).transpose();
  return g;
}

PairwiseGradient bpr_triple_gradient(const EmbeddingModel& m, const Triple& t, double l2) {
  const auto p = m.user_factors.row(t.user);
  const auto qi = m.item_factors.row(t.positive);
  const auto qj = m.item_factors.row(t.negative);
  const double x = p.dot(qi - qj);
  const double s = detail::sigmoid(-x);  // -d/dx ln sigmoid(x)
  PairwiseGradient g;
  g.loss = detail::softplus(-x) + l2 * (p.squaredNorm() + qi.squaredNorm() + qj.squaredNorm());
  g.user_factor = (-s * (qi - qj) + 2.0 * l2 * p).transpose();
  g.positive_factor = (-s * p + 2.0 * l2 * qi).transpose();
  g.negative_factor = (s * p + 2.0 * l2 * qj).transpose();
  return g;
}

EmbeddingModel train_mf_pointwise(const InteractionDataset& train, const TrainConfig& cfg, TrainLog* log) {
  cfg.validate();
  if (!train.is_explicit()) throw TrainingError("pointwise MF needs explicit ratings", 0);
  if (train.empty()) throw TrainingError("empty training set", 0);
  auto rng = make_stream(cfg.seed, streams::kTraining);
  EmbeddingModel m = detail::init_embedding_model(train, cfg.dim, rng);
  m.form = ScoreForm::kPointwise;
  double sum = 0.0;
  for (const auto& x : train.interactions()) sum += x.rating;
  m.global_mean = sum / static_cast<double>(train.size());

  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const auto& all = train.interactions();
  const double lr = cfg.learning_rate;
  const double l2 = cfg.l2;
  Eigen::RowVectorXd p_old(cfg.dim);

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0.0;
    for (const auto idx : order) {
      const auto& x = all[idx];
      auto p = m.user_factors.row(x.user);
      auto q = m.item_factors.row(x.item);
      double& bu = m.user_bias[x.user];
      double& bi = m.item_bias[x.item];
      const double e = x.rating - (m.global_mean + bu + bi + p.dot(q));
      epoch_loss += e * e + l2 * (bu * bu + bi * bi + p.squaredNorm() + q.squaredNorm());
      p_old = p;
      const double bu_old = bu;
      bu -= lr * (-2.0 * e + 2.0 * l2 * bu_old);
      bi -= lr * (-2.0 * e + 2.0 * l2 * bi);
      p -= lr * (-2.0 * e * q + 2.0 * l2 * p_old);
      q -= lr * (-2.0 * e * p_old + 2.0 * l2 * q);
    }
    if (!std::isfinite(epoch_loss) || !m.all_finite())
      throw TrainingError("pointwise MF diverged at epoch " + std::to_string(epoch), epoch - 1);
    if (log) log->epoch_loss.push_back(epoch_loss);
  }
  return m;
}

EmbeddingModel train_bpr(const InteractionDataset& train, const TrainConfig& cfg, TrainLog* log) {
  return detail::train_pairwise(train, cfg, 0, log);
}

RankedList topk_from_scores(UserIndex u, std::span<const double> scores, std::size_t k,
                            std::span<const ItemIndex> excluded_sorted) {
  if (k == 0) throw std::invalid_argument("K must be at least 1");
  std::vector<ItemIndex> candidates;
  candidates.reserve(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const auto item = static_cast<ItemIndex>(i);
    if (!std::binary_search(excluded_sorted.begin(), excluded_sorted.end(), item)) candidates.push_back(item);
  }
  const auto better = [&](ItemIndex a, ItemIndex b) {
    const double sa = scores[static_cast<std::size_t>(a)];
    const double sb = scores[static_cast<std::size_t>(b)];
    return sa != sb ? sa > sb : a < b;
  };
  RankedList out;
  out.user = u;
  out.short_list = candidates.size() < k;
  const auto n = std::min(k, candidates.size());
  std::partial_sort(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(n), candidates.end(), better);
  out.items.assign(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(n));
  for (const auto i : out.items) out.scores.push_back(scores[static_cast<std::size_t>(i)]);
  return out;
}

RankedList recommend_topk(const Scorer& model, UserIndex u, std::size_t k, const InteractionDataset* exclude) {
  std::vector<double> scores(model.n_items());
  model.score_items(u, scores);
  std::span<const ItemIndex> excluded;
  if (exclude && u >= 0 && static_cast<std::size_t>(u) < exclude->n_users()) excluded = exclude->user_items(u);
  return topk_from_scores(u, scores, k, excluded);
}

}  // namespace shillbench
