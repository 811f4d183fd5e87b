#include <algorithm>
#include <cmath>
#include <numeric>

#include "pairwise.hpp"
#include "shillbench/attack.hpp"

namespace shillbench {
namespace {

SurrogateState zeros_like(const SurrogateState& s) {
  return {Matrix::Zero(s.users.rows(), s.users.cols()), Matrix::Zero(s.items.rows(), s.items.cols())};
}

/// Sum over all user-item cells of y (1 - s)^2 + c0 (1 - y) s^2, with
/// y in {0, 1} for genuine rows and the fake weights for fake rows.
class PointwiseObjective final : public SurrogateObjective {
 public:
  PointwiseObjective(const InteractionDataset& genuine, std::size_t n_fake, double l2, double c0)
      : y_genuine_(Matrix::Zero(static_cast<Eigen::Index>(genuine.n_users()), static_cast<Eigen::Index>(genuine.n_items()))),
        n_fake_(static_cast<Eigen::Index>(n_fake)),
        l2_(l2),
        c0_(c0) {
    for (const auto& x : genuine.interactions()) y_genuine_(x.user, x.item) = 1.0;
  }

  std::size_t n_genuine() const override { return static_cast<std::size_t>(y_genuine_.rows()); }

  double loss(const SurrogateState& t, const Matrix& w) const override {
    const Matrix y = full(w);
    const Matrix s = t.users * t.items.transpose();
    const double fit = (y.array() * (1.0 - s.array()).square() + c0_ * (1.0 - y.array()) * s.array().square()).sum();
    return fit + l2_ * (t.users.squaredNorm() + t.items.squaredNorm());
  }

  SurrogateState gradient(const SurrogateState& t, const Matrix& w) const override {
    const Matrix f1 = first(t, full(w));
    return {f1 * t.items + 2.0 * l2_ * t.users, f1.transpose() * t.users + 2.0 * l2_ * t.items};
  }

  SurrogateState hvp(const SurrogateState& t, const Matrix& w, const SurrogateState& v) const override {
    const Matrix y = full(w);
    const Matrix f1 = first(t, y);
    const Matrix ds = v.users * t.items.transpose() + t.users * v.items.transpose();
    const Matrix df1 = (2.0 * weight(y).array() * ds.array()).matrix();
    return {df1 * t.items + f1 * v.items + 2.0 * l2_ * v.users,
            df1.transpose() * t.users + f1.transpose() * v.users + 2.0 * l2_ * v.items};
  }

  Matrix mixed(const SurrogateState& t, const Matrix& w, const SurrogateState& a) const override {
    check(w);
    const auto p = t.users.bottomRows(n_fake_);
    const Matrix s = p * t.items.transpose();
    const Matrix da = a.users.bottomRows(n_fake_) * t.items.transpose() + p * a.items.transpose();
    return (2.0 * ((1.0 - c0_) * s.array() - 1.0) * da.array()).matrix();
  }

 private:
  void check(const Matrix& w) const {
    if (w.rows() != n_fake_ || w.cols() != y_genuine_.cols()) throw AttackError("fake weight matrix has the wrong shape");
  }
  Matrix full(const Matrix& w) const {
    check(w);
    Matrix y(y_genuine_.rows() + n_fake_, y_genuine_.cols());
    y << y_genuine_, w;
    return y;
  }
  Matrix weight(const Matrix& y) const { return (c0_ + (1.0 - c0_) * y.array()).matrix(); }
  /// d f / d s = 2 (a s - y) with a = c0 + (1 - c0) y.
  Matrix first(const SurrogateState& t, const Matrix& y) const {
    const Matrix s = t.users * t.items.transpose();
    return (2.0 * (weight(y).array() * s.array() - y.array())).matrix();
  }

  Matrix y_genuine_;
  Eigen::Index n_fake_;
  double l2_;
  double c0_;
};

/// Genuine triples with weight 1 plus one triple (f, i, j) per fake user and
/// item weighted by w(f, i).
class BprObjective final : public SurrogateObjective {
 public:
  BprObjective(const InteractionDataset& genuine, std::vector<Triple> triples, Eigen::MatrixXi fake_negatives, double l2)
      : n_genuine_(genuine.n_users()), triples_(std::move(triples)), negatives_(std::move(fake_negatives)), l2_(l2) {}

  std::size_t n_genuine() const override { return n_genuine_; }

  double loss(const SurrogateState& t, const Matrix& w) const override {
    double total = l2_ * (t.users.squaredNorm() + t.items.squaredNorm());
    for_each(w, [&](Eigen::Index u, Eigen::Index i, Eigen::Index j, double omega) {
      total += omega * detail::softplus(-margin(t, u, i, j));
    });
    return total;
  }

  SurrogateState gradient(const SurrogateState& t, const Matrix& w) const override {
    SurrogateState g{2.0 * l2_ * t.users, 2.0 * l2_ * t.items};
    for_each(w, [&](Eigen::Index u, Eigen::Index i, Eigen::Index j, double omega) {
      const double h = omega * (detail::sigmoid(margin(t, u, i, j)) - 1.0);
      g.users.row(u) += h * (t.items.row(i) - t.items.row(j));
      g.items.row(i) += h * t.users.row(u);
      g.items.row(j) -= h * t.users.row(u);
    });
    return g;
  }

  SurrogateState hvp(const SurrogateState& t, const Matrix& w, const SurrogateState& v) const override {
    SurrogateState out{2.0 * l2_ * v.users, 2.0 * l2_ * v.items};
    for_each(w, [&](Eigen::Index u, Eigen::Index i, Eigen::Index j, double omega) {
      const double x = margin(t, u, i, j);
      const double sig = detail::sigmoid(x);
      const double h = omega * (sig - 1.0);
      const double h2 = omega * sig * (1.0 - sig);
      const double dx = directional(t, v, u, i, j);
      out.users.row(u) += h2 * dx * (t.items.row(i) - t.items.row(j)) + h * (v.items.row(i) - v.items.row(j));
      out.items.row(i) += h2 * dx * t.users.row(u) + h * v.users.row(u);
      out.items.row(j) -= h2 * dx * t.users.row(u) + h * v.users.row(u);
    });
    return out;
  }

  Matrix mixed(const SurrogateState& t, const Matrix& w, const SurrogateState& a) const override {
    check(w);
    Matrix out = Matrix::Zero(w.rows(), w.cols());
    for (Eigen::Index f = 0; f < negatives_.rows(); ++f) {
      const auto u = static_cast<Eigen::Index>(n_genuine_) + f;
      for (Eigen::Index i = 0; i < negatives_.cols(); ++i) {
        const auto j = static_cast<Eigen::Index>(negatives_(f, i));
        if (j < 0) continue;
        const double h = detail::sigmoid(margin(t, u, i, j)) - 1.0;
        out(f, i) = h * directional(t, a, u, i, j);
      }
    }
    return out;
  }

 private:
  void check(const Matrix& w) const {
    if (w.rows() != negatives_.rows() || w.cols() != negatives_.cols())
      throw AttackError("fake weight matrix has the wrong shape");
  }
  template <typename F>
  void for_each(const Matrix& w, F&& f) const {
    check(w);
    for (const auto& tr : triples_) f(tr.user, tr.positive, tr.negative, 1.0);
    for (Eigen::Index r = 0; r < negatives_.rows(); ++r) {
      const auto u = static_cast<Eigen::Index>(n_genuine_) + r;
      for (Eigen::Index i = 0; i < negatives_.cols(); ++i)
        if (negatives_(r, i) >= 0) f(u, i, static_cast<Eigen::Index>(negatives_(r, i)), w(r, i));
    }
  }
  static double margin(const SurrogateState& t, Eigen::Index u, Eigen::Index i, Eigen::Index j) {
    return t.users.row(u).dot(t.items.row(i) - t.items.row(j));
  }
  /// Derivative of the margin along v.
  static double directional(const SurrogateState& t, const SurrogateState& v, Eigen::Index u, Eigen::Index i,
                            Eigen::Index j) {
    return v.users.row(u).dot(t.items.row(i) - t.items.row(j)) + t.users.row(u).dot(v.items.row(i) - v.items.row(j));
  }

  std::size_t n_genuine_;
  std::vector<Triple> triples_;
  Eigen::MatrixXi negatives_;
  double l2_;
};

}  // namespace

std::unique_ptr<SurrogateObjective> make_pointwise_objective(const InteractionDataset& genuine, std::size_t n_fake,
                                                             double l2, double unobserved_weight) {
  return std::make_unique<PointwiseObjective>(genuine, n_fake, l2, unobserved_weight);
}

std::unique_ptr<SurrogateObjective> make_bpr_objective(const InteractionDataset& genuine, std::vector<Triple> triples,
                                                       Eigen::MatrixXi fake_negatives, double l2) {
  return std::make_unique<BprObjective>(genuine, std::move(triples), std::move(fake_negatives), l2);
}

AdversarialSetup make_adversarial_setup(const SurrogateState& theta, const InteractionDataset& genuine,
                                        std::vector<UserIndex> users, std::vector<ItemIndex> targets, Intent intent,
                                        int competitor_rank) {
  if (targets.empty()) throw AttackError("adversarial loss needs at least one target");
  if (competitor_rank < 1) throw AttackError("competitor_rank must be at least 1");
  AdversarialSetup s;
  s.intent = intent;
  std::vector<ItemIndex> sorted_targets = targets;
  std::sort(sorted_targets.begin(), sorted_targets.end());
  const auto n_items = theta.items.rows();
  Eigen::VectorXd scores(n_items);
  std::vector<ItemIndex> candidates;
  for (const auto u : users) {
    scores.noalias() = theta.items * theta.users.row(u).transpose();
    const auto seen = genuine.user_items(u);
    candidates.clear();
    for (ItemIndex i = 0; i < static_cast<ItemIndex>(n_items); ++i) {
      if (std::binary_search(seen.begin(), seen.end(), i)) continue;
      if (std::binary_search(sorted_targets.begin(), sorted_targets.end(), i)) continue;
      candidates.push_back(i);
    }
    if (candidates.empty()) continue;
    const auto rank = std::min<std::size_t>(static_cast<std::size_t>(competitor_rank), candidates.size());
    std::nth_element(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(rank - 1), candidates.end(),
                     [&](ItemIndex a, ItemIndex b) { return scores[a] != scores[b] ? scores[a] > scores[b] : a < b; });
    s.users.push_back(u);
    for (std::size_t t = 0; t < targets.size(); ++t) s.competitors.push_back(candidates[rank - 1]);
  }
  s.targets = std::move(targets);
  return s;
}

double adversarial_loss(const SurrogateState& theta, const AdversarialSetup& setup, SurrogateState* grad) {
  const std::size_t n_t = setup.targets.size();
  const std::size_t pairs = setup.users.size() * n_t;
  if (pairs == 0) throw AttackError("adversarial loss over zero user-target pairs");
  if (grad) *grad = zeros_like(theta);
  const double sign = setup.intent == Intent::kPush ? 1.0 : -1.0;
  const double scale = 1.0 / static_cast<double>(pairs);
  double total = 0.0;
  for (std::size_t a = 0; a < setup.users.size(); ++a) {
    const auto u = static_cast<Eigen::Index>(setup.users[a]);
    for (std::size_t b = 0; b < n_t; ++b) {
      const auto t = static_cast<Eigen::Index>(setup.targets[b]);
      const auto c = static_cast<Eigen::Index>(setup.competitors[a * n_t + b]);
      const double m = sign * theta.users.row(u).dot(theta.items.row(c) - theta.items.row(t));
      total += detail::softplus(m);
      if (!grad) continue;
      const double g = scale * sign * detail::sigmoid(m);
      grad->users.row(u) += g * (theta.items.row(c) - theta.items.row(t));
      grad->items.row(c) += g * theta.users.row(u);
      grad->items.row(t) -= g * theta.users.row(u);
    }
  }
  return total * scale;
}

namespace {

std::vector<SurrogateState> unroll(const SurrogateObjective& obj, const SurrogateState& theta0, const Matrix& w,
                                   int steps, const SurrogateState& step) {
  if (steps < 0) throw AttackError("unroll steps must be non-negative");
  std::vector<SurrogateState> states{theta0};
  states.reserve(static_cast<std::size_t>(steps) + 1);
  for (int k = 0; k < steps; ++k) {
    const auto& cur = states.back();
    auto g = obj.gradient(cur, w);
    states.push_back({cur.users - step.users.cwiseProduct(g.users), cur.items - step.items.cwiseProduct(g.items)});
  }
  return states;
}

SurrogateState constant_step(const SurrogateState& theta, double lr) {
  return {Matrix::Constant(theta.users.rows(), theta.users.cols(), lr),
          Matrix::Constant(theta.items.rows(), theta.items.cols(), lr)};
}

}  // namespace

SurrogateState row_step_sizes(const SurrogateObjective& obj, const SurrogateState& theta, const Matrix& w,
                              double floor, int probes, Rng& rng) {
  if (probes < 1) throw AttackError("need at least one curvature probe");
  std::bernoulli_distribution coin(0.5);
  const auto rademacher = [&](const Matrix& like) {
    Matrix v(like.rows(), like.cols());
    for (Eigen::Index k = 0; k < v.size(); ++k) v.data()[k] = coin(rng) ? 1.0 : -1.0;
    return v;
  };
  SurrogateState diag = zeros_like(theta);
  for (int p = 0; p < probes; ++p) {
    const SurrogateState v{rademacher(theta.users), rademacher(theta.items)};
    const auto hv = obj.hvp(theta, w, v);
    diag.users += v.users.cwiseProduct(hv.users);
    diag.items += v.items.cwiseProduct(hv.items);
  }
  const auto to_steps = [&](const Matrix& d) {
    Matrix out(d.rows(), d.cols());
    for (Eigen::Index r = 0; r < d.rows(); ++r) {
      const double trace = std::max(d.row(r).cwiseAbs().sum() / probes, floor * static_cast<double>(d.cols()));
      out.row(r).setConstant(0.5 / trace);
    }
    return out;
  };
  return {to_steps(diag.users), to_steps(diag.items)};
}

double unrolled_adversarial_loss(const SurrogateObjective& obj, const SurrogateState& theta0, const Matrix& w,
                                 const AdversarialSetup& setup, int steps, double lr) {
  return unrolled_adversarial_loss(obj, theta0, w, setup, steps, constant_step(theta0, lr));
}

double unrolled_adversarial_loss(const SurrogateObjective& obj, const SurrogateState& theta0, const Matrix& w,
                                 const AdversarialSetup& setup, int steps, const SurrogateState& step) {
  return adversarial_loss(unroll(obj, theta0, w, steps, step).back(), setup);
}

Hypergradient unrolled_hypergradient(const SurrogateObjective& obj, const SurrogateState& theta0, const Matrix& w,
                                     const AdversarialSetup& setup, int steps, double lr) {
  return unrolled_hypergradient(obj, theta0, w, setup, steps, constant_step(theta0, lr));
}

Hypergradient unrolled_hypergradient(const SurrogateObjective& obj, const SurrogateState& theta0, const Matrix& w,
                                     const AdversarialSetup& setup, int steps, const SurrogateState& step) {
  const auto states = unroll(obj, theta0, w, steps, step);
  Hypergradient out;
  SurrogateState a;
  out.loss = adversarial_loss(states.back(), setup, &a);
  out.grad_w = Matrix::Zero(w.rows(), w.cols());
  for (int k = steps - 1; k >= 0; --k) {
    const auto& st = states[static_cast<std::size_t>(k)];
    const SurrogateState da{step.users.cwiseProduct(a.users), step.items.cwiseProduct(a.items)};
    out.grad_w -= obj.mixed(st, w, da);
    const auto hv = obj.hvp(st, w, da);
    a.users -= hv.users;
    a.items -= hv.items;
  }
  return out;
}

namespace {

double dot(const SurrogateState& a, const SurrogateState& b) {
  return a.users.cwiseProduct(b.users).sum() + a.items.cwiseProduct(b.items).sum();
}

void axpy(double alpha, const SurrogateState& x, SurrogateState& y) {
  y.users += alpha * x.users;
  y.items += alpha * x.items;
}

SurrogateState scaled(const SurrogateState& d, const SurrogateState& v) {
  return {d.users.cwiseProduct(v.users), d.items.cwiseProduct(v.items)};
}

}  // namespace

Hypergradient implicit_hypergradient(const SurrogateObjective& obj, const SurrogateState& theta, const Matrix& w,
                                     const AdversarialSetup& setup, int cg_iterations, double damping,
                                     const SurrogateState& preconditioner) {
  if (cg_iterations < 1) throw AttackError("need at least one conjugate-gradient iteration");
  Hypergradient out;
  SurrogateState g;
  out.loss = adversarial_loss(theta, setup, &g);
  // Preconditioned CG on (H + damping I) z = g.
  SurrogateState z = zeros_like(theta);
  SurrogateState r = g;
  SurrogateState y = scaled(preconditioner, r);
  SurrogateState p = y;
  double ry = dot(r, y);
  const double stop = 1e-10 * std::sqrt(std::max(dot(g, g), 0.0));
  for (int it = 0; it < cg_iterations && ry > 0.0; ++it) {
    auto hp = obj.hvp(theta, w, p);
    axpy(damping, p, hp);
    const double curvature = dot(p, hp);
    if (!(curvature > 0.0)) break;
    const double alpha = ry / curvature;
    axpy(alpha, p, z);
    axpy(-alpha, hp, r);
    if (std::sqrt(dot(r, r)) <= stop) break;
    y = scaled(preconditioner, r);
    const double ry_next = dot(r, y);
    const double beta = ry_next / ry;
    ry = ry_next;
    p.users = y.users + beta * p.users;
    p.items = y.items + beta * p.items;
  }
  out.grad_w = -obj.mixed(theta, w, z);
  return out;
}

std::vector<std::vector<ItemIndex>> harden_weights(const Matrix& w, std::span<const ItemIndex> targets,
                                                   int filler_size) {
  std::vector<ItemIndex> fixed(targets.begin(), targets.end());
  std::sort(fixed.begin(), fixed.end());
  std::vector<std::vector<ItemIndex>> out(static_cast<std::size_t>(w.rows()));
  std::vector<ItemIndex> order;
  for (Eigen::Index f = 0; f < w.rows(); ++f) {
    order.clear();
    for (ItemIndex i = 0; i < static_cast<ItemIndex>(w.cols()); ++i)
      if (!std::binary_search(fixed.begin(), fixed.end(), i)) order.push_back(i);
    const auto keep = std::min(order.size(), static_cast<std::size_t>(std::max(filler_size, 0)));
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(keep), order.end(),
                      [&](ItemIndex a, ItemIndex b) { return w(f, a) != w(f, b) ? w(f, a) > w(f, b) : a < b; });
    order.resize(keep);
    std::sort(order.begin(), order.end());
    out[static_cast<std::size_t>(f)] = order;
  }
  return out;
}

}  // namespace shillbench
