#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "shillbench/dataset.hpp"
#include "shillbench/recommender.hpp"
#include "shillbench/rng.hpp"

namespace shillbench {

enum class Intent { kPush, kNuke };
enum class OutputKind { kExplicitTriplets, kImplicitPairs };

struct ItemRating {
  ItemIndex item = 0;
  double rating = 0.0;
  friend bool operator==(const ItemRating&, const ItemRating&) = default;
};

struct AttackParams {
  /// Number of fake users; 0 gives an empty (null) attack.
  int attack_size = 0;
  int filler_size = 0;
  std::vector<ItemIndex> target_items;
  std::vector<ItemRating> selected_items;
  Intent intent = Intent::kPush;
  std::uint64_t seed = 0;
  OutputKind output_kind = OutputKind::kExplicitTriplets;
  friend bool operator==(const AttackParams&, const AttackParams&) = default;
};

struct FakeProfile {
  std::vector<ItemRating> filler;
  std::vector<ItemRating> selected;
  std::vector<ItemRating> targets;
  std::size_t size() const { return filler.size() + selected.size() + targets.size(); }
  friend bool operator==(const FakeProfile&, const FakeProfile&) = default;
};

struct FakeProfileSet {
  std::vector<FakeProfile> profiles;
  std::string generator;
  AttackParams params;
  /// Adversarial loss per outer step (gradient attacks only).
  std::vector<double> loss_trace;
  friend bool operator==(const FakeProfileSet&, const FakeProfileSet&) = default;
};

/// Attack size, filler size and targets derived from the dataset:
/// floor(0.2 n_users) fakes, round(avg actions per user) fillers, and either
/// floor(size/3) popular targets (explicit) or max(1, floor(0.005 size))
/// random targets (implicit).
AttackParams default_attack_params(const InteractionDataset& d, const DatasetStats& stats, std::uint64_t seed);

enum class TargetMode { kPopular, kRandom };
std::vector<ItemIndex> select_targets(const InteractionDataset& d, const DatasetStats& stats, int count,
                                      TargetMode mode, std::uint64_t seed);

FakeProfileSet gen_random_attack(const InteractionDataset& d, const DatasetStats& stats, const AttackParams& params);
FakeProfileSet gen_average_attack(const InteractionDataset& d, const DatasetStats& stats, const AttackParams& params);

enum class PopularityRule { kByCount, kByMeanRating };
FakeProfileSet gen_bandwagon_attack(const InteractionDataset& d, const DatasetStats& stats, const AttackParams& params,
                                    double popular_fraction, PopularityRule rule = PopularityRule::kByCount);
FakeProfileSet gen_lovehate_attack(const InteractionDataset& d, const AttackParams& params);
/// Segment items are rated at the top of the scale and come on top of the
/// filler_size fillers.
FakeProfileSet gen_segment_attack(const InteractionDataset& d, const AttackParams& params,
                                  std::span<const ItemIndex> segment_items);

/// The `count` items most similar to `target` by co-rating cosine, ties by
/// lower item id.
std::vector<ItemIndex> nearest_items(const InteractionDataset& d, ItemIndex target, int count);

/// Appends one user `fake_<k>` per profile and labels origins.
InteractionDataset inject(const InteractionDataset& train, const FakeProfileSet& fakes);

/// Profiles in the dataset dump layout (user, item, rating, timestamp, origin).
void write_fake_profiles(std::ostream& out, const FakeProfileSet& fakes, const InteractionDataset& train);

// Gradient-based attacks.

enum class SurrogateModel {
  kMfPointwise,  ///< weighted squared loss over the full presence matrix
  kBprMf,        ///< BPR over one sampled negative per positive
};

struct SurrogateSpec {
  SurrogateModel model = SurrogateModel::kMfPointwise;
  TrainConfig train_config;
  int inner_steps = 1;
  int outer_steps = 20;
  double outer_step_size = 0.2;
  enum class Hypergradient { kUnrolled, kImplicit };
  Hypergradient hypergradient = Hypergradient::kUnrolled;
  /// Differentiated training steps per hypergradient (unrolled).
  int unroll_steps = 5;
  /// Conjugate-gradient iterations and damping (implicit).
  int cg_iterations = 30;
  double damping = 0.01;
  /// Step size of the differentiated steps; 0 picks per-row steps from the
  /// row curvature (see row_step_sizes).
  double unroll_learning_rate = 0.0;
  /// Weight of unobserved entries in the pointwise surrogate.
  double unobserved_weight = 0.05;
  /// Alternating least squares sweeps (pointwise) or epochs (BPR) of pretraining.
  int pretrain_steps = 10;
  int adversarial_users = 200;
  /// Rank of the non-target competitor item in each user's list.
  int competitor_rank = 1;

  /// Throws AttackError on invalid values.
  void validate() const;
};

/// Surrogate parameters: genuine user rows first, then one row per fake user.
struct SurrogateState {
  Matrix users;
  Matrix items;
};

/// Training loss of the surrogate as a function of parameters and the fake
/// users' continuous interaction weights w (n_fake x n_items, in [0, 1]).
class SurrogateObjective {
 public:
  virtual ~SurrogateObjective() = default;
  virtual std::size_t n_genuine() const = 0;
  virtual double loss(const SurrogateState& theta, const Matrix& w) const = 0;
  virtual SurrogateState gradient(const SurrogateState& theta, const Matrix& w) const = 0;
  /// Hessian-vector product in parameter space.
  virtual SurrogateState hvp(const SurrogateState& theta, const Matrix& w, const SurrogateState& v) const = 0;
  /// d/dw <a, grad_theta loss(theta, w)>.
  virtual Matrix mixed(const SurrogateState& theta, const Matrix& w, const SurrogateState& a) const = 0;
};

std::unique_ptr<SurrogateObjective> make_pointwise_objective(const InteractionDataset& genuine, std::size_t n_fake,
                                                             double l2, double unobserved_weight);
/// `fake_negatives(f, i)` is the negative paired with fake f's item i.
std::unique_ptr<SurrogateObjective> make_bpr_objective(const InteractionDataset& genuine, std::vector<Triple> triples,
                                                       Eigen::MatrixXi fake_negatives, double l2);

/// Pairs (user, target) with a fixed competitor item each.
struct AdversarialSetup {
  std::vector<UserIndex> users;
  std::vector<ItemIndex> targets;
  std::vector<ItemIndex> competitors;  ///< users.size() x targets.size(), row-major
  Intent intent = Intent::kPush;
};

/// Competitor = item at `competitor_rank` among the user's unseen non-target items.
AdversarialSetup make_adversarial_setup(const SurrogateState& theta, const InteractionDataset& genuine,
                                        std::vector<UserIndex> users, std::vector<ItemIndex> targets, Intent intent,
                                        int competitor_rank);

/// Mean of softplus(competitor - target) (push) or its mirror (nuke).
double adversarial_loss(const SurrogateState& theta, const AdversarialSetup& setup, SurrogateState* grad = nullptr);

struct Hypergradient {
  double loss = 0.0;  ///< adversarial loss after the unrolled steps
  Matrix grad_w;
};

/// Adversarial loss after `steps` gradient steps from theta0 and its exact
/// derivative with respect to w through those steps.
Hypergradient unrolled_hypergradient(const SurrogateObjective& obj, const SurrogateState& theta0, const Matrix& w,
                                     const AdversarialSetup& setup, int steps, double lr);
double unrolled_adversarial_loss(const SurrogateObjective& obj, const SurrogateState& theta0, const Matrix& w,
                                 const AdversarialSetup& setup, int steps, double lr);

/// Same with a step size per parameter entry (update theta -= step * grad).
Hypergradient unrolled_hypergradient(const SurrogateObjective& obj, const SurrogateState& theta0, const Matrix& w,
                                     const AdversarialSetup& setup, int steps, const SurrogateState& step);
double unrolled_adversarial_loss(const SurrogateObjective& obj, const SurrogateState& theta0, const Matrix& w,
                                 const AdversarialSetup& setup, int steps, const SurrogateState& step);

/// Per-row step sizes 0.5 / tr(H_rr), the row-block Hessian traces estimated
/// with `probes` Rademacher probes; each trace is at least floor * dim.
SurrogateState row_step_sizes(const SurrogateObjective& obj, const SurrogateState& theta, const Matrix& w,
                              double floor, int probes, Rng& rng);

/// Derivative of the adversarial loss at a stationary theta through the
/// implicit response dtheta/dw = -(H + damping I)^-1 d(grad)/dw, solved with
/// `cg_iterations` of conjugate gradients preconditioned by `preconditioner`
/// (entrywise scaling, e.g. row_step_sizes).
Hypergradient implicit_hypergradient(const SurrogateObjective& obj, const SurrogateState& theta, const Matrix& w,
                                     const AdversarialSetup& setup, int cg_iterations, double damping,
                                     const SurrogateState& preconditioner);

/// Keeps the filler_size largest non-target weights per fake (ties by lower item id).
std::vector<std::vector<ItemIndex>> harden_weights(const Matrix& w, std::span<const ItemIndex> targets,
                                                   int filler_size);

/// Surrogate fixed after clean training; fake weights follow the hypergradient.
FakeProfileSet gen_single_level_gradient_attack(const InteractionDataset& train, const DatasetStats& stats,
                                                const SurrogateSpec& surrogate, const AttackParams& params);
/// Alternates surrogate training on clean + fake data with hypergradient steps.
FakeProfileSet gen_bilevel_attack(const InteractionDataset& train, const DatasetStats& stats,
                                  const SurrogateSpec& surrogate, const AttackParams& params);

}  // namespace shillbench
