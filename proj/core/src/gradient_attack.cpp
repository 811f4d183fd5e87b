#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <string>

#include "pairwise.hpp"
#include "shillbench/attack.hpp"
#include "shillbench/rng.hpp"

namespace shillbench {

void SurrogateSpec::validate() const {
  if (inner_steps < 1) throw AttackError("inner_steps must be at least 1");
  if (outer_steps < 1) throw AttackError("outer_steps must be at least 1");
  if (!(outer_step_size >= 0.0)) throw AttackError("outer_step_size must be non-negative");
  if (unroll_steps < 1) throw AttackError("unroll_steps must be at least 1");
  if (!(unroll_learning_rate >= 0.0)) throw AttackError("unroll_learning_rate must be non-negative");
  if (!(unobserved_weight > 0.0 && unobserved_weight <= 1.0)) throw AttackError("unobserved_weight must be in (0, 1]");
  if (pretrain_steps < 0) throw AttackError("pretrain_steps must be non-negative");
  if (adversarial_users < 1) throw AttackError("adversarial_users must be at least 1");
  if (cg_iterations < 1) throw AttackError("cg_iterations must be at least 1");
  if (!(damping >= 0.0)) throw AttackError("damping must be non-negative");
  if (competitor_rank < 1) throw AttackError("competitor_rank must be at least 1");
  try {
    train_config.validate();
  } catch (const TrainingError& e) {
    throw AttackError(std::string("surrogate ") + e.what());
  }
}

namespace {

/// Exact block update of the pointwise surrogate: each row of `target`
/// minimises sum_k y_k (1 - s_k)^2 + c0 (1 - y_k) s_k^2 + l2 |row|^2.
void solve_rows(const Matrix& y, const Matrix& fixed, Matrix& target, double c0, double l2) {
  const auto d = fixed.cols();
  const Eigen::MatrixXd gram = c0 * (fixed.transpose() * fixed) + l2 * Eigen::MatrixXd::Identity(d, d);
  Eigen::MatrixXd a(d, d);
  Eigen::VectorXd b(d);
  for (Eigen::Index r = 0; r < y.rows(); ++r) {
    a = gram;
    b.setZero();
    for (Eigen::Index k = 0; k < y.cols(); ++k) {
      const double v = y(r, k);
      if (v == 0.0) continue;
      const auto f = fixed.row(k);
      a.noalias() += ((1.0 - c0) * v) * f.transpose() * f;
      b.noalias() += v * f.transpose();
    }
    target.row(r) = a.ldlt().solve(b).transpose();
  }
}

void als_sweep(const Matrix& y, SurrogateState& theta, double c0, double l2) {
  solve_rows(y, theta.items, theta.users, c0, l2);
  const Matrix yt = y.transpose();
  solve_rows(yt, theta.users, theta.items, c0, l2);
}

Matrix stack(const Matrix& top, const Matrix& bottom) {
  Matrix out(top.rows() + bottom.rows(), top.cols());
  out << top, bottom;
  return out;
}

enum class Level { kSingle, kBilevel };

class GradientAttack {
 public:
  GradientAttack(const InteractionDataset& train, const DatasetStats& stats, const SurrogateSpec& spec,
                 const AttackParams& params)
      : train_(train), stats_(stats), spec_(spec), params_(params), rng_(make_stream(params.seed, streams::kSurrogate)) {}

  FakeProfileSet run(Level level) {
    spec_.validate();
    init_ = train_.is_explicit() ? gen_average_attack(train_, stats_, params_) : gen_random_attack(train_, stats_, params_);
    FakeProfileSet out;
    out.generator = level == Level::kSingle ? "single_level_gradient" : "bilevel";
    out.params = params_;
    if (params_.attack_size == 0) return out;

    implicit_ = train_.is_explicit() ? convert_to_implicit(train_) : train_;
    setup_weights();
    pretrain();
    build_objective();
    pick_users();
    SurrogateState theta{stack(clean_.users, fold_in(w_)), clean_.items};
    if (spec_.unroll_learning_rate > 0.0) {
      step_ = {Matrix::Constant(theta.users.rows(), theta.users.cols(), spec_.unroll_learning_rate),
               Matrix::Constant(theta.items.rows(), theta.items.cols(), spec_.unroll_learning_rate)};
    } else {
      step_ = row_step_sizes(*obj_, theta, w_, spec_.train_config.l2, 8, rng_);
    }
    spdlog::debug("{}: unroll step sizes in [{:.6g}, {:.6g}]", out.generator,
                  std::min(step_.users.minCoeff(), step_.items.minCoeff()),
                  std::max(step_.users.maxCoeff(), step_.items.maxCoeff()));

    for (int step = 1; step <= spec_.outer_steps; ++step) {
      if (level == Level::kSingle) {
        theta.users.bottomRows(w_.rows()) = fold_in(w_);
      } else {
        inner_train(theta, step);
      }
      const auto setup = make_adversarial_setup(theta, implicit_, users_, params_.target_items, params_.intent,
                                                spec_.competitor_rank);
      const auto hg = spec_.hypergradient == SurrogateSpec::Hypergradient::kImplicit
                          ? implicit_hypergradient(*obj_, theta, w_, setup, spec_.cg_iterations, spec_.damping, step_)
                          : unrolled_hypergradient(*obj_, theta, w_, setup, spec_.unroll_steps, step_);
      if (!std::isfinite(hg.loss) || !hg.grad_w.allFinite()) {
        throw AttackError(out.generator + ": non-finite hypergradient at outer step " + std::to_string(step) +
                          " (loss " + std::to_string(hg.loss) + ", |theta| " +
                          std::to_string(std::sqrt(theta.users.squaredNorm() + theta.items.squaredNorm())) + ")");
      }
      out.loss_trace.push_back(hg.loss);
      spdlog::debug("{}: outer step {} adversarial loss {:.6g}", out.generator, step, hg.loss);
      outer_update(hg.grad_w);
    }
    out.profiles = harden();
    return out;
  }

 private:
  void setup_weights() {
    w_ = Matrix::Zero(params_.attack_size, static_cast<Eigen::Index>(train_.n_items()));
    for (std::size_t f = 0; f < init_.profiles.size(); ++f) {
      const auto& p = init_.profiles[f];
      for (const auto* group : {&p.targets, &p.selected, &p.filler})
        for (const auto& e : *group) w_(static_cast<Eigen::Index>(f), e.item) = 1.0;
    }
    fixed_.assign(params_.target_items.begin(), params_.target_items.end());
    for (const auto& s : params_.selected_items) fixed_.push_back(s.item);
    std::sort(fixed_.begin(), fixed_.end());
  }

  void pretrain() {
    const auto& cfg = spec_.train_config;
    if (spec_.model == SurrogateModel::kBprMf) {
      TrainConfig c = cfg;
      c.epochs = spec_.pretrain_steps;
      c.seed = params_.seed;
      const auto m = train_bpr(implicit_, c);
      clean_ = {m.user_factors, m.item_factors};
      return;
    }
    auto init_rng = make_stream(params_.seed, streams::kTraining);
    const auto model = detail::init_embedding_model(implicit_, cfg.dim, init_rng);
    clean_ = {model.user_factors, model.item_factors};
    y_genuine_ = Matrix::Zero(static_cast<Eigen::Index>(implicit_.n_users()), static_cast<Eigen::Index>(implicit_.n_items()));
    for (const auto& x : implicit_.interactions()) y_genuine_(x.user, x.item) = 1.0;
    for (int s = 0; s < spec_.pretrain_steps; ++s) als_sweep(y_genuine_, clean_, spec_.unobserved_weight, cfg.l2);
  }

  Matrix fold_in(const Matrix& w) const {
    Matrix rows = Matrix::Zero(w.rows(), clean_.items.cols());
    solve_rows(w, clean_.items, rows, spec_.unobserved_weight, spec_.train_config.l2);
    return rows;
  }

  void build_objective() {
    const double l2 = spec_.train_config.l2;
    if (spec_.model == SurrogateModel::kMfPointwise) {
      obj_ = make_pointwise_objective(implicit_, w_.rows(), l2, spec_.unobserved_weight);
      return;
    }
    const auto n_items = static_cast<ItemIndex>(implicit_.n_items());
    std::uniform_int_distribution<ItemIndex> pick(0, n_items - 1);
    std::vector<Triple> triples;
    for (const auto& x : implicit_.interactions()) {
      const auto seen = implicit_.user_items(x.user);
      if (seen.size() >= implicit_.n_items()) continue;
      ItemIndex j;
      do {
        j = pick(rng_);
      } while (std::binary_search(seen.begin(), seen.end(), j));
      triples.push_back({x.user, x.item, j});
    }
    Eigen::MatrixXi negatives = Eigen::MatrixXi::Constant(w_.rows(), w_.cols(), -1);
    if (n_items > 1) {
      for (Eigen::Index f = 0; f < w_.rows(); ++f) {
        for (Eigen::Index i = 0; i < w_.cols(); ++i) {
          ItemIndex j;
          do {
            j = pick(rng_);
          } while (j == i);
          negatives(f, i) = j;
        }
      }
    }
    obj_ = make_bpr_objective(implicit_, std::move(triples), std::move(negatives), l2);
  }

  void pick_users() {
    std::vector<UserIndex> all;
    for (std::size_t u = 0; u < implicit_.n_users(); ++u)
      if (implicit_.user_items(static_cast<UserIndex>(u)).size() < implicit_.n_items()) all.push_back(static_cast<UserIndex>(u));
    std::shuffle(all.begin(), all.end(), rng_);
    if (all.size() > static_cast<std::size_t>(spec_.adversarial_users)) all.resize(static_cast<std::size_t>(spec_.adversarial_users));
    std::sort(all.begin(), all.end());
    if (all.empty()) throw AttackError("no genuine user can be reached by the attack");
    users_ = std::move(all);
  }

  void inner_train(SurrogateState& theta, int step) {
    for (int k = 0; k < spec_.inner_steps; ++k) {
      if (spec_.model == SurrogateModel::kMfPointwise) {
        als_sweep(stack(y_genuine_, w_), theta, spec_.unobserved_weight, spec_.train_config.l2);
      } else {
        const auto g = obj_->gradient(theta, w_);
        theta.users -= step_.users.cwiseProduct(g.users);
        theta.items -= step_.items.cwiseProduct(g.items);
      }
    }
    if (!theta.users.allFinite() || !theta.items.allFinite() || !std::isfinite(obj_->loss(theta, w_)))
      throw TrainingError("surrogate training diverged at outer step " + std::to_string(step), step - 1);
  }

  void outer_update(const Matrix& grad) {
    double scale = 0.0;
    Eigen::Index free = 0;
    for (Eigen::Index i = 0; i < grad.cols(); ++i) {
      if (std::binary_search(fixed_.begin(), fixed_.end(), static_cast<ItemIndex>(i))) continue;
      scale += grad.col(i).cwiseAbs().sum();
      free += grad.rows();
    }
    if (free > 0) scale /= static_cast<double>(free);
    if (scale == 0.0 || spec_.outer_step_size == 0.0) return;
    for (Eigen::Index i = 0; i < w_.cols(); ++i) {
      if (std::binary_search(fixed_.begin(), fixed_.end(), static_cast<ItemIndex>(i))) continue;
      w_.col(i) = (w_.col(i) - (spec_.outer_step_size / scale) * grad.col(i)).cwiseMax(0.0).cwiseMin(1.0);
    }
  }

  std::vector<FakeProfile> harden() const {
    const auto chosen = harden_weights(w_, fixed_, params_.filler_size);
    const auto tie = params_.intent == Intent::kPush ? RatingScale::Tie::kUp : RatingScale::Tie::kDown;
    const auto scale = train_.scale();
    std::vector<FakeProfile> out;
    for (std::size_t f = 0; f < chosen.size(); ++f) {
      const auto& init = init_.profiles[f];
      FakeProfile p;
      p.targets = init.targets;
      p.selected = init.selected;
      std::map<ItemIndex, double> init_rating;
      for (const auto& e : init.filler) init_rating[e.item] = e.rating;
      for (const auto i : chosen[f]) {
        double r = 1.0;
        if (params_.output_kind == OutputKind::kExplicitTriplets) {
          const auto it = init_rating.find(i);
          const auto k = static_cast<std::size_t>(i);
          r = it != init_rating.end() ? it->second
                                      : scale.snap(stats_.per_item_count[k] > 0 ? stats_.per_item_mean[k] : stats_.global_mean, tie);
        }
        p.filler.push_back({i, r});
      }
      out.push_back(std::move(p));
    }
    return out;
  }

  const InteractionDataset& train_;
  const DatasetStats& stats_;
  SurrogateSpec spec_;
  AttackParams params_;
  Rng rng_;
  FakeProfileSet init_;
  InteractionDataset implicit_;
  Matrix w_;
  Matrix y_genuine_;
  std::vector<ItemIndex> fixed_;
  SurrogateState clean_;
  std::unique_ptr<SurrogateObjective> obj_;
  std::vector<UserIndex> users_;
  SurrogateState step_;
};

}  // namespace

FakeProfileSet gen_single_level_gradient_attack(const InteractionDataset& train, const DatasetStats& stats,
                                                const SurrogateSpec& surrogate, const AttackParams& params) {
  return GradientAttack(train, stats, surrogate, params).run(Level::kSingle);
}

FakeProfileSet gen_bilevel_attack(const InteractionDataset& train, const DatasetStats& stats,
                                  const SurrogateSpec& surrogate, const AttackParams& params) {
  return GradientAttack(train, stats, surrogate, params).run(Level::kBilevel);
}

}  // namespace shillbench
