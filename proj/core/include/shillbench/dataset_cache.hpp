#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>

#include "shillbench/dataset.hpp"

namespace shillbench {

/// Directory-per-key artifact store. An entry is written to a private temp
/// directory and renamed into place, so readers never see partial entries.
class ArtifactStore {
 public:
  explicit ArtifactStore(std::filesystem::path root);

  const std::filesystem::path& root() const noexcept { return root_; }
  std::filesystem::path entry_dir(const std::string& key) const { return root_ / key; }
  bool contains(const std::string& key) const;

  /// Returns false when another writer committed the same key first.
  bool commit(const std::string& key, const std::map<std::string, std::string>& files) const;
  std::optional<std::string> read(const std::string& key, const std::string& file) const;
  void discard(const std::string& key) const;

 private:
  std::filesystem::path root_;
};

/// Content-addressed store for attacked datasets: a canonical delimited dump
/// plus `meta.json` with the key parameters, counts, bounds and a checksum.
class DatasetCache {
 public:
  explicit DatasetCache(std::filesystem::path root) : store_(std::move(root)) {}

  void persist(const std::string& key, const InteractionDataset& d,
               const std::map<std::string, std::string>& params = {}) const;
  /// Absent when the key is unknown. A corrupt entry is discarded with a
  /// warning and reported as absent.
  std::optional<InteractionDataset> load(const std::string& key) const;

  const ArtifactStore& store() const noexcept { return store_; }

 private:
  ArtifactStore store_;
};

/// Canonical text serialisation used by the cache (metadata + dump).
std::string serialize_dataset(const InteractionDataset& d);
InteractionDataset deserialize_dataset(const std::string& meta_json, const std::string& dump);
std::string dataset_meta_json(const InteractionDataset& d, const std::string& dump_sha256,
                              const std::map<std::string, std::string>& params);

}  // namespace shillbench
