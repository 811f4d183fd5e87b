#include "shillbench/metrics.hpp"

#include <algorithm>
#include <cmath>

namespace shillbench::metrics {
namespace {

struct Counted {
  std::size_t hits = 0;
  std::size_t listed = 0;
  std::ptrdiff_t first_hit = -1;  // zero-based position
};

std::vector<ItemIndex> sorted_copy(std::span<const ItemIndex> v) {
  std::vector<ItemIndex> out(v.begin(), v.end());
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

std::size_t cutoff(const TopKGroundTruth& gt, const UserTopK& u) { return std::min(gt.k, u.ranked.size()); }

Counted count(const TopKGroundTruth& gt, const UserTopK& u, const std::vector<ItemIndex>& relevant) {
  Counted c;
  c.listed = cutoff(gt, u);
  for (std::size_t n = 0; n < c.listed; ++n) {
    if (std::binary_search(relevant.begin(), relevant.end(), u.ranked[n])) {
      if (c.first_hit < 0) c.first_hit = static_cast<std::ptrdiff_t>(n);
      ++c.hits;
    }
  }
  return c;
}

void require_users(const TopKGroundTruth& gt) {
  if (gt.users.empty()) throw MetricError("top-k metric over zero users");
  if (gt.k == 0) throw MetricError("K must be at least 1");
}

}  // namespace

double mae(std::span<const RatingPrediction> preds) {
  if (preds.empty()) throw MetricError("MAE of empty predictions");
  double sum = 0.0;
  for (const auto& p : preds) sum += std::abs(p.predicted - p.actual);
  return sum / static_cast<double>(preds.size());
}

double rmse(std::span<const RatingPrediction> preds) {
  if (preds.empty()) throw MetricError("RMSE of empty predictions");
  double sum = 0.0;
  for (const auto& p : preds) sum += (p.predicted - p.actual) * (p.predicted - p.actual);
  return std::sqrt(sum / static_cast<double>(preds.size()));
}

double precision_at_k(const TopKGroundTruth& gt) {
  require_users(gt);
  std::size_t hits = 0, listed = 0;
  for (const auto& u : gt.users) {
    const auto c = count(gt, u, sorted_copy(u.relevant));
    hits += c.hits;
    listed += c.listed;
  }
  return listed == 0 ? 0.0 : static_cast<double>(hits) / static_cast<double>(listed);
}

double recall_at_k(const TopKGroundTruth& gt) {
  require_users(gt);
  std::size_t hits = 0, relevant = 0;
  for (const auto& u : gt.users) {
    const auto rel = sorted_copy(u.relevant);
    hits += count(gt, u, rel).hits;
    relevant += rel.size();
  }
  return relevant == 0 ? 0.0 : static_cast<double>(hits) / static_cast<double>(relevant);
}

double f1(double precision, double recall) {
  if (precision + recall == 0.0) return 0.0;
  return 2.0 * precision * recall / (precision + recall);
}

double f1_at_k(const TopKGroundTruth& gt) { return f1(precision_at_k(gt), recall_at_k(gt)); }

double hit_rate(const TopKGroundTruth& gt, HitVariant variant, std::span<const ItemIndex> targets) {
  require_users(gt);
  const auto target_set = sorted_copy(targets);
  std::size_t hits = 0, users = 0;
  for (const auto& u : gt.users) {
    if (variant == HitVariant::kTargetItem && !u.genuine) continue;
    ++users;
    const auto c = count(gt, u, variant == HitVariant::kTargetItem ? target_set : sorted_copy(u.relevant));
    if (c.hits > 0) ++hits;
  }
  if (users == 0) throw MetricError("hit rate over zero genuine users");
  return static_cast<double>(hits) / static_cast<double>(users);
}

NdcgResult ndcg_at_k(const TopKGroundTruth& gt) {
  require_users(gt);
  NdcgResult out;
  double total = 0.0;
  for (const auto& u : gt.users) {
    const auto rel = sorted_copy(u.relevant);
    if (rel.empty()) {
      ++out.excluded_users;
      continue;
    }
    double dcg = 0.0;
    const auto listed = cutoff(gt, u);
    for (std::size_t n = 0; n < listed; ++n) {
      if (std::binary_search(rel.begin(), rel.end(), u.ranked[n])) dcg += 1.0 / std::log2(static_cast<double>(n) + 2.0);
    }
    double idcg = 0.0;
    const auto ideal = std::min(gt.k, rel.size());
    for (std::size_t n = 0; n < ideal; ++n) idcg += (std::exp2(1.0) - 1.0) / std::log2(static_cast<double>(n) + 2.0);
    total += dcg / idcg;
    ++out.evaluated_users;
  }
  out.value = out.evaluated_users == 0 ? 0.0 : total / static_cast<double>(out.evaluated_users);
  return out;
}

double mrr(const TopKGroundTruth& gt) {
  require_users(gt);
  double total = 0.0;
  for (const auto& u : gt.users) {
    const auto c = count(gt, u, sorted_copy(u.relevant));
    if (c.first_hit >= 0) total += 1.0 / static_cast<double>(c.first_hit + 1);
  }
  return total / static_cast<double>(gt.users.size());
}

double map_at_k(const TopKGroundTruth& gt) {
  require_users(gt);
  double total = 0.0;
  for (const auto& u : gt.users) {
    const auto rel = sorted_copy(u.relevant);
    const auto listed = cutoff(gt, u);
    std::size_t hits = 0;
    double ap = 0.0;
    for (std::size_t n = 0; n < listed; ++n) {
      if (!std::binary_search(rel.begin(), rel.end(), u.ranked[n])) continue;
      ++hits;
      ap += static_cast<double>(hits) / static_cast<double>(n + 1);
    }
    total += ap / static_cast<double>(gt.k);
  }
  return total / static_cast<double>(gt.users.size());
}

double prediction_shift(std::span<const double> pre, std::span<const double> post) {
  if (pre.size() != post.size()) throw MetricError("prediction shift needs aligned predictions");
  if (pre.empty()) throw MetricError("prediction shift over zero pairs");
  double sum = 0.0;
  for (std::size_t k = 0; k < pre.size(); ++k) sum += post[k] - pre[k];
  return sum / static_cast<double>(pre.size());
}

std::optional<double> rank_improvement(double hr_origin, double hr_attack, double hr_defense) {
  if (hr_attack == hr_origin) return std::nullopt;
  return 1.0 - (hr_defense - hr_origin) / (hr_attack - hr_origin);
}

double drop_rate(double p_iid, double p_ood) {
  if (p_iid == 0.0) throw MetricError("drop rate undefined for P_I = 0");
  return (p_iid - p_ood) / p_iid;
}

double failure_rate(const TopKGroundTruth& gt) {
  require_users(gt);
  std::size_t failures = 0;
  for (const auto& u : gt.users) {
    if (count(gt, u, sorted_copy(u.relevant)).hits == 0) ++failures;
  }
  return 100.0 * static_cast<double>(failures) / static_cast<double>(gt.users.size());
}

TopKGroundTruth with_target_relevance(const TopKGroundTruth& gt, std::span<const ItemIndex> targets) {
  TopKGroundTruth out;
  out.k = gt.k;
  for (const auto& u : gt.users) {
    if (!u.genuine) continue;
    out.users.push_back({u.user, u.ranked, std::vector<ItemIndex>(targets.begin(), targets.end()), true});
  }
  return out;
}

}  // namespace shillbench::metrics
