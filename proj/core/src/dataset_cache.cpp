#include "shillbench/dataset_cache.hpp"

#include <spdlog/spdlog.h>
#include <unistd.h>

#include <atomic>
#include <chrono>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "shillbench/hash.hpp"

namespace shillbench {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error("cannot read " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string unique_suffix() {
  static std::atomic<unsigned> counter{0};
  const auto now = std::chrono::steady_clock::now().time_since_epoch().count();
  return std::to_string(::getpid()) + "-" + std::to_string(now) + "-" + std::to_string(counter++);
}

}  // namespace

ArtifactStore::ArtifactStore(fs::path root) : root_(std::move(root)) {}

bool ArtifactStore::contains(const std::string& key) const { return fs::is_directory(entry_dir(key)); }

bool ArtifactStore::commit(const std::string& key, const std::map<std::string, std::string>& files) const {
  fs::create_directories(root_);
  const fs::path tmp = root_ / (".tmp-" + key + "-" + unique_suffix());
  fs::create_directories(tmp);
  for (const auto& [name, bytes] : files) {
    std::ofstream out(tmp / name, std::ios::binary);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) {
      fs::remove_all(tmp);
      throw Error("cannot write cache file " + (tmp / name).string());
    }
  }
  std::error_code ec;
  fs::rename(tmp, entry_dir(key), ec);
  if (ec) {
    fs::remove_all(tmp);
    if (contains(key)) return false;
    throw Error("cannot commit cache entry " + key + ": " + ec.message());
  }
  return true;
}

std::optional<std::string> ArtifactStore::read(const std::string& key, const std::string& file) const {
  const fs::path p = entry_dir(key) / file;
  if (!fs::is_regular_file(p)) return std::nullopt;
  return read_file(p);
}

void ArtifactStore::discard(const std::string& key) const {
  std::error_code ec;
  fs::remove_all(entry_dir(key), ec);
}

std::string dataset_meta_json(const InteractionDataset& d, const std::string& dump_sha256,
                              const std::map<std::string, std::string>& params) {
  json meta;
  meta["format"] = 1;
  meta["kind"] = d.is_explicit() ? "explicit" : "implicit";
  meta["bounds"] = {d.bounds().min, d.bounds().max};
  meta["n_users"] = d.n_users();
  meta["n_items"] = d.n_items();
  meta["n_interactions"] = d.size();
  meta["user_ids"] = d.user_ids();
  meta["item_ids"] = d.item_ids();
  if (d.origin_labels()) {
    std::string labels;
    for (auto o : *d.origin_labels()) labels.push_back(o == Origin::kFake ? 'f' : 'g');
    meta["origin"] = labels;
  }
  meta["dump_sha256"] = dump_sha256;
  meta["params"] = params;
  return meta.dump(1) + "\n";
}

std::string serialize_dataset(const InteractionDataset& d) {
  std::ostringstream dump;
  write_delimited(dump, d);
  const std::string text = dump.str();
  return dataset_meta_json(d, sha256_hex(text), {}) + text;
}

InteractionDataset deserialize_dataset(const std::string& meta_json, const std::string& dump) {
  const json meta = json::parse(meta_json);
  if (meta.at("format").get<int>() != 1) throw DataError("unsupported cache format");
  if (meta.at("dump_sha256").get<std::string>() != sha256_hex(dump)) throw DataError("checksum mismatch");
  InteractionDataset::Parts parts;
  parts.kind = meta.at("kind").get<std::string>() == "explicit" ? FeedbackKind::kExplicit : FeedbackKind::kImplicit;
  parts.bounds = {meta.at("bounds").at(0).get<double>(), meta.at("bounds").at(1).get<double>()};
  parts.user_ids = meta.at("user_ids").get<std::vector<std::string>>();
  parts.item_ids = meta.at("item_ids").get<std::vector<std::string>>();
  if (meta.contains("origin")) {
    std::vector<Origin> origin;
    for (char c : meta.at("origin").get<std::string>()) origin.push_back(c == 'f' ? Origin::kFake : Origin::kGenuine);
    parts.origin = std::move(origin);
  }
  std::unordered_map<std::string, UserIndex> users;
  std::unordered_map<std::string, ItemIndex> items;
  for (std::size_t k = 0; k < parts.user_ids.size(); ++k) users.emplace(parts.user_ids[k], static_cast<UserIndex>(k));
  for (std::size_t k = 0; k < parts.item_ids.size(); ++k) items.emplace(parts.item_ids[k], static_cast<ItemIndex>(k));

  std::istringstream in(dump);
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) {
    std::istringstream row(line);
    std::string user, item, rating, ts;
    std::getline(row, user, '\t');
    std::getline(row, item, '\t');
    std::getline(row, rating, '\t');
    std::getline(row, ts, '\t');
    const auto u = users.find(user);
    const auto i = items.find(item);
    if (u == users.end() || i == items.end()) throw DataError("unknown id in cached dump");
    Interaction r{u->second, i->second, std::stod(rating), std::nullopt};
    if (!ts.empty()) r.timestamp = std::stoll(ts);
    parts.interactions.push_back(r);
  }
  if (parts.interactions.size() != meta.at("n_interactions").get<std::size_t>()) {
    throw DataError("interaction count mismatch");
  }
  return InteractionDataset::from_parts(std::move(parts));
}

void DatasetCache::persist(const std::string& key, const InteractionDataset& d,
                           const std::map<std::string, std::string>& params) const {
  std::ostringstream dump;
  write_delimited(dump, d);
  const std::string text = dump.str();
  store_.commit(key, {{"interactions.tsv", text}, {"meta.json", dataset_meta_json(d, sha256_hex(text), params)}});
}

std::optional<InteractionDataset> DatasetCache::load(const std::string& key) const {
  if (!store_.contains(key)) return std::nullopt;
  try {
    const auto meta = store_.read(key, "meta.json");
    const auto dump = store_.read(key, "interactions.tsv");
    if (!meta || !dump) throw DataError("missing files");
    return deserialize_dataset(*meta, *dump);
  } catch (const std::exception& e) {
    spdlog::warn("discarding corrupt cache entry {}: {}", key, e.what());
    store_.discard(key);
    return std::nullopt;
  }
}

}  // namespace shillbench
