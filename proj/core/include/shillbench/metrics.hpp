#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "shillbench/common.hpp"

namespace shillbench::metrics {

struct RatingPrediction {
  UserIndex user = 0;
  ItemIndex item = 0;
  double predicted = 0.0;
  double actual = 0.0;
};

/// One evaluated user: the ranked list R(u) (best first) and relevant set T(u).
struct UserTopK {
  UserIndex user = 0;
  std::vector<ItemIndex> ranked;
  std::vector<ItemIndex> relevant;
  bool genuine = true;
};

/// Per-user lists for a cutoff K. Lists longer than K are truncated on use.
struct TopKGroundTruth {
  std::size_t k = 10;
  std::vector<UserTopK> users;
};

// Rating prediction. Both divide by the number of evaluated pairs.
double mae(std::span<const RatingPrediction> preds);
double rmse(std::span<const RatingPrediction> preds);

// Micro-averaged over users: sum |R n T| / sum |R| (resp. sum |T|).
double precision_at_k(const TopKGroundTruth& gt);
double recall_at_k(const TopKGroundTruth& gt);
/// Harmonic mean of precision and recall; 0 when both are 0.
double f1(double precision, double recall);
double f1_at_k(const TopKGroundTruth& gt);

enum class HitVariant { kTestHit, kTargetItem };

/// Fraction of users whose list contains a relevant item. The target-item
/// variant swaps T(u) for `targets` and only counts genuine users.
double hit_rate(const TopKGroundTruth& gt, HitVariant variant = HitVariant::kTestHit,
                std::span<const ItemIndex> targets = {});

struct NdcgResult {
  double value = 0.0;
  std::size_t evaluated_users = 0;
  std::size_t excluded_users = 0;  ///< users with empty T(u)
};
NdcgResult ndcg_at_k(const TopKGroundTruth& gt);

/// Users without a relevant item in R(u) contribute 0.
double mrr(const TopKGroundTruth& gt);

/// AP@K = sum_n Precision@n * rel(n) / K, averaged over all users.
double map_at_k(const TopKGroundTruth& gt);

/// Mean of (post - pre) over aligned prediction pairs.
double prediction_shift(std::span<const double> pre, std::span<const double> post);

/// 1 - (defense - origin) / (attack - origin); empty when attack == origin.
std::optional<double> rank_improvement(double hr_origin, double hr_attack, double hr_defense);

/// (P_I - P_N) / P_I. Throws MetricError when P_I == 0.
double drop_rate(double p_iid, double p_ood);

/// Percentage of users with no hit in R(u).
double failure_rate(const TopKGroundTruth& gt);

/// Replaces every user's relevant set with `targets` and keeps genuine users.
TopKGroundTruth with_target_relevance(const TopKGroundTruth& gt, std::span<const ItemIndex> targets);

}  // namespace shillbench::metrics
