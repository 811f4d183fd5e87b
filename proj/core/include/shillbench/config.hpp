#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "shillbench/attack.hpp"
#include "shillbench/dataset.hpp"
#include "shillbench/defense.hpp"
#include "shillbench/metrics.hpp"
#include "shillbench/recommender.hpp"

namespace shillbench {

struct DatasetConfig {
  std::string name = "dataset";
  std::filesystem::path path;
  LoadSchema schema;
  FeedbackKind feedback = FeedbackKind::kExplicit;
  std::optional<double> implicit_threshold;
  SplitSpec split;  ///< seed comes from the experiment seed
};

enum class AttackKind { kNone, kRandom, kAverage, kBandwagon, kLoveHate, kSegment, kSingleLevel, kBilevel };

struct AttackConfig {
  AttackKind kind = AttackKind::kNone;
  std::string name = "none";
  // Unset sizes fall back to the dataset-derived defaults.
  std::optional<int> size;
  std::optional<int> filler_size;
  std::optional<int> target_count;
  std::optional<TargetMode> target_mode;
  std::vector<std::string> targets;  ///< raw item ids; overrides target selection
  Intent intent = Intent::kPush;
  std::optional<std::uint64_t> seed;
  double popular_fraction = 0.1;
  PopularityRule popularity_rule = PopularityRule::kByCount;
  int segment_size = 10;
  SurrogateSpec surrogate;
};

enum class ModelKind { kMf, kBpr, kLightGcn, kItemKnn };

struct ModelConfig {
  ModelKind kind = ModelKind::kBpr;
  std::string name = "bpr";
  TrainConfig train;
  int layers = 2;
  int k_neighbors = 50;
};

struct MetricConfig {
  std::vector<std::size_t> k{10, 50};
};

enum class DefenseKind { kNone, kIdentity, kOracle, kPca };

struct DefenseConfig {
  DefenseKind kind = DefenseKind::kNone;
  std::string name = "none";
  int n_components = 1;
  std::optional<int> flag_count;  ///< defaults to the attack size
  SuspicionRule rule = SuspicionRule::kHighestLoading;
};

struct ExperimentConfig {
  std::uint64_t seed = 0;
  std::filesystem::path output_dir = "runs";
  /// Empty: $SHILLBENCH_CACHE_DIR, else <output_dir>/cache.
  std::filesystem::path cache_dir;
  /// Directory holding the section files; empty means the top-level file's.
  std::filesystem::path config_dir;
  /// Resolved snapshots turn this off so reloading them is exact.
  bool section_files = true;
  DatasetConfig dataset;
  AttackConfig attack;
  ModelConfig model;
  MetricConfig metrics;
  DefenseConfig defense;
};

/// Resolution order: built-in defaults < top-level file < the section files
/// <config_dir>/{dataset,model,attack}/<name>.yaml < `key=value` overrides.
/// Throws ConfigError naming the offending field.
ExperimentConfig load_config(const std::filesystem::path& top_level, const std::vector<std::string>& overrides = {});
/// Same as load_config with the top-level document given as text.
ExperimentConfig load_config_text(const std::string& top_level_yaml, const std::filesystem::path& config_dir,
                                  const std::vector<std::string>& overrides = {});

/// Fully resolved configuration as YAML; identical configs give identical bytes.
std::string resolved_snapshot(const ExperimentConfig& cfg);

/// Effective cache root after applying the environment variable fallback.
std::filesystem::path cache_root(const ExperimentConfig& cfg);

inline constexpr const char* kCacheEnvVar = "SHILLBENCH_CACHE_DIR";

}  // namespace shillbench
