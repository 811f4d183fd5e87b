#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace shillbench {

/// Metric values per evaluated condition ("clean", "attacked", "defended")
/// plus run metadata. Ordered maps keep serialization byte-deterministic.
struct EvalReport {
  std::map<std::string, std::string> metadata;
  std::map<std::string, std::map<std::string, double>> conditions;
  /// Cross-condition quantities; empty optional means not applicable.
  std::map<std::string, std::optional<double>> summary;

  friend bool operator==(const EvalReport&, const EvalReport&) = default;
};

std::string to_json(const EvalReport& r);
/// Throws DataError on malformed input.
EvalReport report_from_json(const std::string& text);

/// Columns NDCG@10, NDCG@50, HR@10, HR@50 first, then any other metrics.
std::string render_table(const EvalReport& r);

}  // namespace shillbench
