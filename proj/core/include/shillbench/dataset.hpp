#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "shillbench/common.hpp"

namespace shillbench {

enum class FeedbackKind { kExplicit, kImplicit };
enum class Origin : std::uint8_t { kGenuine, kFake };

struct RatingBounds {
  double min = 1.0;
  double max = 5.0;
  friend bool operator==(const RatingBounds&, const RatingBounds&) = default;
};

/// Rating bounds plus grid spacing. `step == 0` means ratings are continuous.
struct RatingScale {
  RatingBounds bounds;
  double step = 1.0;

  enum class Tie { kUp, kDown };
  /// Clip to the bounds and round to the nearest grid point.
  double snap(double value, Tie tie) const;
};

struct Interaction {
  UserIndex user = 0;
  ItemIndex item = 0;
  double rating = 1.0;
  std::optional<std::int64_t> timestamp;
  friend bool operator==(const Interaction&, const Interaction&) = default;
};

/// Immutable user-item interaction table with dense indices.
///
/// Interactions are stored sorted by (user, item); each user's block is
/// contiguous and each item additionally has a list of the users that rated
/// it. Raw ids are kept so dense -> raw -> dense is the identity.
class InteractionDataset {
 public:
  struct Parts {
    std::vector<std::string> user_ids;
    std::vector<std::string> item_ids;
    std::vector<Interaction> interactions;
    FeedbackKind kind = FeedbackKind::kExplicit;
    RatingBounds bounds;
    std::optional<std::vector<Origin>> origin;
  };

  InteractionDataset() = default;

  /// Validates every invariant and builds the adjacency. Throws DataError.
  static InteractionDataset from_parts(Parts parts);

  std::size_t n_users() const noexcept { return user_ids_.size(); }
  std::size_t n_items() const noexcept { return item_ids_.size(); }
  std::size_t size() const noexcept { return interactions_.size(); }
  bool empty() const noexcept { return interactions_.empty(); }

  FeedbackKind kind() const noexcept { return kind_; }
  bool is_explicit() const noexcept { return kind_ == FeedbackKind::kExplicit; }
  const RatingBounds& bounds() const noexcept { return bounds_; }
  /// Grid spacing inferred from the stored ratings (1, 0.5 or 0 for continuous).
  double rating_step() const noexcept { return rating_step_; }
  RatingScale scale() const noexcept { return {bounds_, rating_step_}; }

  std::span<const Interaction> interactions() const noexcept { return interactions_; }
  std::span<const Interaction> user_interactions(UserIndex u) const;
  /// Sorted item indices rated by `u`.
  std::span<const ItemIndex> user_items(UserIndex u) const;
  /// Users that rated `i`, in increasing order.
  std::span<const UserIndex> item_users(ItemIndex i) const;
  bool contains(UserIndex u, ItemIndex i) const;
  std::optional<double> rating(UserIndex u, ItemIndex i) const;

  const std::string& user_id(UserIndex u) const { return user_ids_.at(static_cast<std::size_t>(u)); }
  const std::string& item_id(ItemIndex i) const { return item_ids_.at(static_cast<std::size_t>(i)); }
  const std::vector<std::string>& user_ids() const noexcept { return user_ids_; }
  const std::vector<std::string>& item_ids() const noexcept { return item_ids_; }
  std::optional<UserIndex> find_user(const std::string& raw) const;
  std::optional<ItemIndex> find_item(const std::string& raw) const;

  const std::optional<std::vector<Origin>>& origin_labels() const noexcept { return origin_; }
  bool is_fake(UserIndex u) const;
  std::size_t n_genuine_users() const;

  /// Copy of the underlying parts, e.g. to derive a modified dataset.
  Parts to_parts() const;

  friend bool operator==(const InteractionDataset& a, const InteractionDataset& b);

 private:
  std::vector<std::string> user_ids_;
  std::vector<std::string> item_ids_;
  std::unordered_map<std::string, UserIndex> user_lookup_;
  std::unordered_map<std::string, ItemIndex> item_lookup_;
  std::vector<Interaction> interactions_;
  std::vector<std::size_t> user_offsets_;
  std::vector<ItemIndex> user_item_list_;
  std::vector<std::size_t> item_offsets_;
  std::vector<UserIndex> item_user_list_;
  FeedbackKind kind_ = FeedbackKind::kExplicit;
  RatingBounds bounds_;
  double rating_step_ = 0.0;
  std::optional<std::vector<Origin>> origin_;
};

struct DatasetStats {
  double global_mean = 0.0;
  double global_std = 0.0;
  std::vector<double> per_item_mean;  ///< 0 for items without ratings
  std::vector<double> per_item_std;   ///< population std; 0 when count <= 1
  std::vector<std::int64_t> per_item_count;
  std::vector<std::int64_t> per_user_count;
  double avg_actions_per_user = 0.0;
  double avg_actions_per_item = 0.0;
};

/// Population statistics over the present ratings. Throws on an empty dataset.
DatasetStats compute_stats(const InteractionDataset& d);

/// Column mapping for delimited input. Each column is given either by header
/// name or by zero-based position ("0", "1", ...).
struct LoadSchema {
  std::string user = "0";
  std::string item = "1";
  std::string rating = "2";
  std::optional<std::string> timestamp;
  enum class Delimiter { kAuto, kTab, kComma };
  Delimiter delimiter = Delimiter::kAuto;
  enum class Header { kAuto, kPresent, kAbsent };
  Header header = Header::kAuto;
  std::optional<RatingBounds> bounds;
};

struct LoadReport {
  std::size_t rows = 0;
  std::size_t duplicates_resolved = 0;
};

InteractionDataset load_explicit(const std::filesystem::path& path, const LoadSchema& schema,
                                 LoadReport* report = nullptr);
InteractionDataset parse_explicit(std::istream& in, const LoadSchema& schema,
                                  LoadReport* report = nullptr);

/// Without a threshold every interaction becomes a positive; otherwise only
/// ratings >= threshold are kept. The user and item index is preserved.
InteractionDataset convert_to_implicit(const InteractionDataset& d,
                                       std::optional<double> threshold = std::nullopt);

struct SplitSpec {
  enum class Strategy { kRatioRandom, kLeaveKOut };
  Strategy strategy = Strategy::kRatioRandom;
  double train_fraction = 0.8;
  int k = 1;
  std::uint64_t seed = 0;
};

struct Split {
  InteractionDataset train;
  InteractionDataset test;
  /// Users left out of the test side under leave-k-out.
  std::size_t users_without_test = 0;
};

/// Disjoint, exhaustive, seeded partition. Train and test share the index.
Split split_holdout(const InteractionDataset& d, const SplitSpec& spec);

/// Canonical delimited dump: header row then one row per interaction with raw
/// ids, `%.17g` ratings, optional timestamp and origin columns.
void write_delimited(std::ostream& out, const InteractionDataset& d);

}  // namespace shillbench
