#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "shillbench/config.hpp"
#include "shillbench/defense.hpp"
#include "shillbench/report.hpp"

namespace shillbench {

/// A pipeline stage threw; `stage()` names it ("split", "attack", ...).
class StageError : public Error {
 public:
  StageError(std::string stage, const std::string& what) : Error(stage + ": " + what), stage_(std::move(stage)) {}
  const std::string& stage() const noexcept { return stage_; }

 private:
  std::string stage_;
};

struct RunArtifacts {
  std::filesystem::path run_dir;
  ExperimentConfig config;
  std::string snapshot;
  DatasetStats stats;
  /// Content key per cached stage ("clean_model", "attack", ...).
  std::map<std::string, std::string> cache_keys;
  std::map<std::string, bool> cache_hits;
  /// Cache entry holding the attacked training set, when an attack ran.
  std::optional<std::filesystem::path> attacked_data;
  EvalReport report;
  /// Every file written into run_dir, relative to it, sorted.
  std::vector<std::string> files;
  std::optional<SuspectReport> suspects;
  std::optional<std::string> failed_stage;
  std::filesystem::path log_path;
};

/// `<dataset>_<attack>_<model>_seed<seed>[_<defense>]` under the output directory.
std::filesystem::path run_directory(const ExperimentConfig& cfg);

/// Clean and attacked conditions plus their deltas. The defense section is ignored.
/// Throws ConfigError for an unusable output directory and StageError when a
/// stage fails; partial artifacts and `failure.txt` stay in the run directory.
RunArtifacts run_attack_eval(const ExperimentConfig& cfg);

/// As run_attack_eval plus the defended condition and RI@K.
/// Throws ConfigError when no defense is configured.
RunArtifacts run_robustness_eval(const ExperimentConfig& cfg);

/// Generates and injects the attack only; writes `attacked_train.tsv`.
RunArtifacts run_attack_only(const ExperimentConfig& cfg);

/// Writes report.json, report.txt and artifacts.json and records them.
void write_report(RunArtifacts& artifacts);

}  // namespace shillbench
