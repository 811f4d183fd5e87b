#pragma once

#include <Eigen/Dense>
#include <Eigen/SparseCore>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "shillbench/dataset.hpp"

namespace shillbench {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

enum class Task { kRating, kRanking };
enum class Loss { kSquaredPointwise, kBprPairwise };

struct TrainConfig {
  Task task = Task::kRanking;
  Loss loss = Loss::kBprPairwise;
  int dim = 32;
  double learning_rate = 0.01;
  double l2 = 1e-4;
  int epochs = 50;
  int negatives_per_positive = 1;
  /// Triples per pairwise update. Propagating models need more than 1.
  int batch_size = 1;
  std::uint64_t seed = 0;

  /// Throws TrainingError on invalid values.
  void validate() const;
};

struct TrainLog {
  std::vector<double> epoch_loss;
};

/// Anything that can score every item for a user.
class Scorer {
 public:
  virtual ~Scorer() = default;
  virtual std::size_t n_users() const = 0;
  virtual std::size_t n_items() const = 0;
  virtual void score_items(UserIndex u, std::span<double> out) const = 0;
};

enum class ScoreForm {
  kPointwise,  ///< mu + b_u + b_i + <e_u, e_i>
  kDot,        ///< <e_u, e_i>
};

/// Latent-factor model shared by MF, BPR-MF and LightGCN.
///
/// `user_factors` / `item_factors` are the trainable (layer-0) embeddings.
/// With `n_layers >= 1` scores use the mean of the propagated layers over
/// `norm_adjacency`; call `refresh()` after changing parameters.
class EmbeddingModel : public Scorer {
 public:
  double global_mean = 0.0;
  Eigen::VectorXd user_bias;
  Eigen::VectorXd item_bias;
  Matrix user_factors;
  Matrix item_factors;
  int n_layers = 0;
  SparseMatrix norm_adjacency;
  ScoreForm form = ScoreForm::kDot;
  RatingBounds bounds{1.0, 5.0};

  std::size_t n_users() const override { return static_cast<std::size_t>(user_factors.rows()); }
  std::size_t n_items() const override { return static_cast<std::size_t>(item_factors.rows()); }
  int dim() const { return static_cast<int>(user_factors.cols()); }

  void refresh();
  const Matrix& final_users() const { return n_layers == 0 ? user_factors : final_users_; }
  const Matrix& final_items() const { return n_layers == 0 ? item_factors : final_items_; }

  /// Unclipped score; throws std::out_of_range on unknown ids.
  double raw_score(UserIndex u, ItemIndex i) const;
  /// Score clipped to the rating bounds, for rating metrics.
  double predict_rating(UserIndex u, ItemIndex i) const;
  void score_items(UserIndex u, std::span<double> out) const override;

  bool all_finite() const;

 private:
  Matrix final_users_;
  Matrix final_items_;
};

/// Symmetric-normalised bipartite adjacency over users then items:
/// entry (u, n_users + i) = 1 / sqrt(deg(u) deg(i)).
SparseMatrix normalized_adjacency(const InteractionDataset& train);

/// Mean of layers 0..n_layers of E_{k+1} = A E_k.
Matrix propagate_mean(const SparseMatrix& adjacency, const Matrix& ego, int n_layers);

EmbeddingModel train_mf_pointwise(const InteractionDataset& train, const TrainConfig& cfg, TrainLog* log = nullptr);
EmbeddingModel train_bpr(const InteractionDataset& train, const TrainConfig& cfg, TrainLog* log = nullptr);
/// `n_layers == 0` disables propagation and matches `train_bpr` exactly.
EmbeddingModel train_lightgcn(const InteractionDataset& train, const TrainConfig& cfg, int n_layers,
                              TrainLog* log = nullptr);

// Per-sample objectives with analytic gradients.
struct PointwiseGradient {
  double loss = 0.0;
  double user_bias = 0.0;
  double item_bias = 0.0;
  Eigen::VectorXd user_factor;
  Eigen::VectorXd item_factor;
};
/// (r - r_hat)^2 + l2 * (b_u^2 + b_i^2 + |p_u|^2 + |q_i|^2)
PointwiseGradient pointwise_sample_gradient(const EmbeddingModel& m, UserIndex u, ItemIndex i, double rating,
                                            double l2);

struct Triple {
  UserIndex user;
  ItemIndex positive;
  ItemIndex negative;
};
struct PairwiseGradient {
  double loss = 0.0;
  Eigen::VectorXd user_factor;
  Eigen::VectorXd positive_factor;
  Eigen::VectorXd negative_factor;
};
/// -ln sigmoid(<p_u, q_i - q_j>) + l2 * (|p_u|^2 + |q_i|^2 + |q_j|^2)
PairwiseGradient bpr_triple_gradient(const EmbeddingModel& m, const Triple& t, double l2);

/// Sum of BPR triple losses on the propagated embeddings, regularising the
/// ego embeddings of each triple's nodes. When `grad` is non-null it receives
/// d loss / d [user_factors; item_factors] as a (n_users + n_items) x d matrix.
double bpr_batch_loss(const EmbeddingModel& m, std::span<const Triple> batch, double l2, Matrix* grad);

/// Item-based kNN with cosine similarity between item rating columns.
class ItemKnnModel : public Scorer {
 public:
  struct Neighbor {
    ItemIndex item;
    double similarity;
  };

  ItemKnnModel() = default;
  ItemKnnModel(std::vector<std::vector<Neighbor>> neighbors, std::vector<std::vector<ItemIndex>> user_items,
               int k_neighbors);

  std::size_t n_users() const override { return user_items_.size(); }
  std::size_t n_items() const override { return neighbors_.size(); }
  int k_neighbors() const { return k_; }
  /// Neighbours of `i`, most similar first, ties by lower item id.
  std::span<const Neighbor> neighbors(ItemIndex i) const { return neighbors_.at(static_cast<std::size_t>(i)); }
  const std::vector<std::vector<ItemIndex>>& user_items() const { return user_items_; }
  void score_items(UserIndex u, std::span<double> out) const override;

 private:
  std::vector<std::vector<Neighbor>> neighbors_;
  std::vector<std::vector<ItemIndex>> user_items_;
  int k_ = 0;
};

/// Dense n_items x n_items cosine similarity of item rating columns
/// (0 for items without interactions).
Matrix item_cosine_similarity(const InteractionDataset& d);

ItemKnnModel train_itemknn(const InteractionDataset& train, int k_neighbors);

struct RankedList {
  UserIndex user = 0;
  std::vector<ItemIndex> items;
  std::vector<double> scores;
  bool short_list = false;  ///< fewer than K candidates were available
};

/// Top-K by score, skipping `exclude`'s items for this user (when given);
/// ties go to the lower item id.
RankedList recommend_topk(const Scorer& model, UserIndex u, std::size_t k, const InteractionDataset* exclude);
RankedList topk_from_scores(UserIndex u, std::span<const double> scores, std::size_t k,
                            std::span<const ItemIndex> excluded_sorted);

void save_model(std::ostream& out, const EmbeddingModel& m);
EmbeddingModel load_embedding_model(std::istream& in);
void save_model(std::ostream& out, const ItemKnnModel& m);
ItemKnnModel load_itemknn_model(std::istream& in);

}  // namespace shillbench
