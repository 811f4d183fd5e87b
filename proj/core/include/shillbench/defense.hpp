#pragma once

#include <optional>
#include <string>
#include <vector>

#include "shillbench/dataset.hpp"
#include "shillbench/recommender.hpp"

namespace shillbench {

/// Which end of the loading score is treated as suspicious.
enum class SuspicionRule {
  kHighestLoading,  ///< users that dominate the leading components
  kLowestLoading,
};

struct ConfusionCounts {
  std::size_t true_positive = 0;
  std::size_t false_positive = 0;
  std::size_t false_negative = 0;
  std::size_t true_negative = 0;
  double recall() const;
  double precision() const;
};

struct SuspectReport {
  std::vector<UserIndex> flagged;  ///< sorted
  std::vector<double> scores;      ///< one per user
  int n_components = 1;
  int flag_count = 0;
  SuspicionRule rule = SuspicionRule::kHighestLoading;
  /// Present when the dataset carries origin labels.
  std::optional<ConfusionCounts> confusion;
};

/// Principal directions of the z-scored user rows (missing entries 0),
/// as columns of a n_users x n_components matrix of unit loadings.
Matrix user_principal_loadings(const InteractionDataset& d, int n_components);

SuspectReport pca_varselect(const InteractionDataset& d, int n_components, int flag_count,
                            SuspicionRule rule = SuspicionRule::kHighestLoading);

/// Flags exactly the users labelled fake.
SuspectReport oracle_suspects(const InteractionDataset& d);

struct FilteredDataset {
  InteractionDataset data;
  /// Index in the input dataset of each kept user.
  std::vector<UserIndex> kept_users;
};

/// Drops every interaction of the flagged users and re-indexes the rest.
FilteredDataset filter_users(const InteractionDataset& d, const std::vector<UserIndex>& flagged);

/// Tab-separated per-user lines (user, score, flagged, origin) and a
/// trailing summary with the confusion counts when known.
std::string suspect_report_text(const SuspectReport& r, const InteractionDataset& d);

}  // namespace shillbench
