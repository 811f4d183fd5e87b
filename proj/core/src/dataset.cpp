#include "shillbench/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <map>
#include <numeric>
#include <ostream>
#include <sstream>

#include "shillbench/rng.hpp"

namespace shillbench {

double RatingScale::snap(double value, Tie tie) const {
  double v = std::clamp(value, bounds.min, bounds.max);
  if (step <= 0.0) return v;
  const double k = (v - bounds.min) / step;
  const double lower = std::floor(k);
  const double frac = k - lower;
  double n = lower;
  if (frac > 0.5 || (frac == 0.5 && tie == Tie::kUp)) n = lower + 1.0;
  return std::min(bounds.min + n * step, bounds.max);
}

namespace {

double infer_step(const std::vector<Interaction>& rows, FeedbackKind kind) {
  if (kind == FeedbackKind::kImplicit) return 1.0;
  bool integral = true;
  bool halves = true;
  for (const auto& r : rows) {
    if (r.rating != std::floor(r.rating)) integral = false;
    if (2.0 * r.rating != std::floor(2.0 * r.rating)) halves = false;
  }
  if (integral) return 1.0;
  if (halves) return 0.5;
  return 0.0;
}

template <class Index>
std::unordered_map<std::string, Index> build_lookup(const std::vector<std::string>& ids, const char* what) {
  std::unordered_map<std::string, Index> lookup;
  lookup.reserve(ids.size());
  for (std::size_t k = 0; k < ids.size(); ++k) {
    if (!lookup.emplace(ids[k], static_cast<Index>(k)).second) {
      throw DataError(std::string("duplicate raw ") + what + " id '" + ids[k] + "'");
    }
  }
  return lookup;
}

}  // namespace

InteractionDataset InteractionDataset::from_parts(Parts parts) {
  InteractionDataset d;
  d.user_lookup_ = build_lookup<UserIndex>(parts.user_ids, "user");
  d.item_lookup_ = build_lookup<ItemIndex>(parts.item_ids, "item");
  d.user_ids_ = std::move(parts.user_ids);
  d.item_ids_ = std::move(parts.item_ids);
  d.kind_ = parts.kind;
  d.bounds_ = parts.bounds;
  if (!(d.bounds_.min <= d.bounds_.max) || !std::isfinite(d.bounds_.min) || !std::isfinite(d.bounds_.max)) {
    throw DataError("invalid rating bounds");
  }

  const auto n_users = static_cast<UserIndex>(d.user_ids_.size());
  const auto n_items = static_cast<ItemIndex>(d.item_ids_.size());
  auto& rows = parts.interactions;
  for (const auto& r : rows) {
    if (r.user < 0 || r.user >= n_users || r.item < 0 || r.item >= n_items) {
      throw DataError("interaction index out of range");
    }
    if (!std::isfinite(r.rating)) throw DataError("non-finite rating");
    if (d.kind_ == FeedbackKind::kImplicit) {
      if (r.rating != 1.0) throw DataError("implicit interactions must have rating 1");
    } else if (r.rating < d.bounds_.min || r.rating > d.bounds_.max) {
      throw DataError("rating outside bounds");
    }
  }
  std::sort(rows.begin(), rows.end(), [](const Interaction& a, const Interaction& b) {
    return a.user != b.user ? a.user < b.user : a.item < b.item;
  });
  for (std::size_t k = 1; k < rows.size(); ++k) {
    if (rows[k].user == rows[k - 1].user && rows[k].item == rows[k - 1].item) {
      throw DataError("duplicate (user, item) pair for user '" + d.user_ids_[rows[k].user] + "', item '" +
                      d.item_ids_[rows[k].item] + "'");
    }
  }
  if (parts.origin && parts.origin->size() != d.user_ids_.size()) {
    throw DataError("origin labels must cover every user exactly once");
  }
  d.origin_ = std::move(parts.origin);
  d.rating_step_ = infer_step(rows, d.kind_);
  d.interactions_ = std::move(rows);

  d.user_offsets_.assign(d.user_ids_.size() + 1, 0);
  d.item_offsets_.assign(d.item_ids_.size() + 1, 0);
  for (const auto& r : d.interactions_) {
    ++d.user_offsets_[static_cast<std::size_t>(r.user) + 1];
    ++d.item_offsets_[static_cast<std::size_t>(r.item) + 1];
  }
  std::partial_sum(d.user_offsets_.begin(), d.user_offsets_.end(), d.user_offsets_.begin());
  std::partial_sum(d.item_offsets_.begin(), d.item_offsets_.end(), d.item_offsets_.begin());
  d.user_item_list_.resize(d.interactions_.size());
  d.item_user_list_.resize(d.interactions_.size());
  std::vector<std::size_t> fill(d.item_offsets_.begin(), d.item_offsets_.end() - 1);
  for (std::size_t k = 0; k < d.interactions_.size(); ++k) {
    const auto& r = d.interactions_[k];
    d.user_item_list_[k] = r.item;
    d.item_user_list_[fill[static_cast<std::size_t>(r.item)]++] = r.user;
  }
  return d;
}

std::span<const Interaction> InteractionDataset::user_interactions(UserIndex u) const {
  const auto k = static_cast<std::size_t>(u);
  return std::span<const Interaction>(interactions_).subspan(user_offsets_.at(k), user_offsets_.at(k + 1) - user_offsets_[k]);
}

std::span<const ItemIndex> InteractionDataset::user_items(UserIndex u) const {
  const auto k = static_cast<std::size_t>(u);
  return std::span<const ItemIndex>(user_item_list_).subspan(user_offsets_.at(k), user_offsets_.at(k + 1) - user_offsets_[k]);
}

std::span<const UserIndex> InteractionDataset::item_users(ItemIndex i) const {
  const auto k = static_cast<std::size_t>(i);
  return std::span<const UserIndex>(item_user_list_).subspan(item_offsets_.at(k), item_offsets_.at(k + 1) - item_offsets_[k]);
}

bool InteractionDataset::contains(UserIndex u, ItemIndex i) const {
  const auto items = user_items(u);
  return std::binary_search(items.begin(), items.end(), i);
}

std::optional<double> InteractionDataset::rating(UserIndex u, ItemIndex i) const {
  const auto items = user_items(u);
  const auto it = std::lower_bound(items.begin(), items.end(), i);
  if (it == items.end() || *it != i) return std::nullopt;
  return user_interactions(u)[static_cast<std::size_t>(it - items.begin())].rating;
}

std::optional<UserIndex> InteractionDataset::find_user(const std::string& raw) const {
  const auto it = user_lookup_.find(raw);
  if (it == user_lookup_.end()) return std::nullopt;
  return it->second;
}

std::optional<ItemIndex> InteractionDataset::find_item(const std::string& raw) const {
  const auto it = item_lookup_.find(raw);
  if (it == item_lookup_.end()) return std::nullopt;
  return it->second;
}

bool InteractionDataset::is_fake(UserIndex u) const {
  return origin_ && (*origin_).at(static_cast<std::size_t>(u)) == Origin::kFake;
}

std::size_t InteractionDataset::n_genuine_users() const {
  if (!origin_) return n_users();
  return static_cast<std::size_t>(std::count(origin_->begin(), origin_->end(), Origin::kGenuine));
}

InteractionDataset::Parts InteractionDataset::to_parts() const {
  return Parts{user_ids_, item_ids_, interactions_, kind_, bounds_, origin_};
}

bool operator==(const InteractionDataset& a, const InteractionDataset& b) {
  return a.user_ids_ == b.user_ids_ && a.item_ids_ == b.item_ids_ && a.interactions_ == b.interactions_ &&
         a.kind_ == b.kind_ && a.bounds_ == b.bounds_ && a.origin_ == b.origin_;
}

DatasetStats compute_stats(const InteractionDataset& d) {
  if (d.empty()) throw DataError("statistics of an empty dataset");
  DatasetStats s;
  const auto n_items = d.n_items();
  s.per_item_count.assign(n_items, 0);
  s.per_user_count.assign(d.n_users(), 0);
  std::vector<double> sum(n_items, 0.0);
  double total = 0.0;
  for (const auto& r : d.interactions()) {
    ++s.per_item_count[static_cast<std::size_t>(r.item)];
    ++s.per_user_count[static_cast<std::size_t>(r.user)];
    sum[static_cast<std::size_t>(r.item)] += r.rating;
    total += r.rating;
  }
  const auto n = static_cast<double>(d.size());
  s.global_mean = total / n;
  s.per_item_mean.assign(n_items, 0.0);
  for (std::size_t i = 0; i < n_items; ++i) {
    if (s.per_item_count[i] > 0) s.per_item_mean[i] = sum[i] / static_cast<double>(s.per_item_count[i]);
  }
  std::vector<double> sq(n_items, 0.0);
  double total_sq = 0.0;
  for (const auto& r : d.interactions()) {
    const double g = r.rating - s.global_mean;
    const double l = r.rating - s.per_item_mean[static_cast<std::size_t>(r.item)];
    total_sq += g * g;
    sq[static_cast<std::size_t>(r.item)] += l * l;
  }
  s.global_std = std::sqrt(total_sq / n);
  s.per_item_std.assign(n_items, 0.0);
  for (std::size_t i = 0; i < n_items; ++i) {
    if (s.per_item_count[i] > 1) s.per_item_std[i] = std::sqrt(sq[i] / static_cast<double>(s.per_item_count[i]));
  }
  s.avg_actions_per_user = n / static_cast<double>(d.n_users());
  s.avg_actions_per_item = n / static_cast<double>(n_items);
  return s;
}

namespace {

std::vector<std::string_view> split_fields(std::string_view line, char delim) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(delim, start);
    auto field = line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start);
    while (!field.empty() && (field.front() == ' ' || field.front() == '"')) field.remove_prefix(1);
    while (!field.empty() && (field.back() == ' ' || field.back() == '"')) field.remove_suffix(1);
    out.push_back(field);
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

bool parse_double(std::string_view s, double& out) {
  if (s.empty()) return false;
  if (s.front() == '+') s.remove_prefix(1);
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size() && std::isfinite(out);
}

bool parse_timestamp(std::string_view s, std::int64_t& out) {
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  if (ec == std::errc() && ptr == s.data() + s.size()) return true;
  double v = 0.0;
  if (!parse_double(s, v) || v != std::floor(v)) return false;
  out = static_cast<std::int64_t>(v);
  return true;
}

bool is_position(const std::string& spec) {
  return !spec.empty() && std::all_of(spec.begin(), spec.end(), [](char c) { return c >= '0' && c <= '9'; });
}

struct RawRow {
  std::string user;
  std::string item;
  double rating;
  std::optional<std::int64_t> timestamp;
};

}  // namespace

InteractionDataset parse_explicit(std::istream& in, const LoadSchema& schema, LoadReport* report) {
  std::vector<std::pair<std::size_t, std::string>> lines;
  {
    std::string line;
    std::size_t number = 0;
    while (std::getline(in, line)) {
      ++number;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.find_first_not_of(" \t") == std::string::npos) continue;
      lines.emplace_back(number, std::move(line));
    }
  }
  if (lines.empty()) throw DataError("no interactions");

  char delim = '\t';
  switch (schema.delimiter) {
    case LoadSchema::Delimiter::kTab: delim = '\t'; break;
    case LoadSchema::Delimiter::kComma: delim = ','; break;
    case LoadSchema::Delimiter::kAuto: delim = lines.front().second.find('\t') != std::string::npos ? '\t' : ','; break;
  }

  const bool named = !is_position(schema.user) || !is_position(schema.item) || !is_position(schema.rating) ||
                     (schema.timestamp && !is_position(*schema.timestamp));
  const auto first = split_fields(lines.front().second, delim);
  bool header = false;
  switch (schema.header) {
    case LoadSchema::Header::kPresent: header = true; break;
    case LoadSchema::Header::kAbsent: header = false; break;
    case LoadSchema::Header::kAuto: {
      if (named) {
        header = true;
      } else {
        const auto pos = std::stoul(schema.rating);
        double v = 0.0;
        header = pos >= first.size() || !parse_double(first[pos], v);
      }
      break;
    }
  }
  if (named && !header) throw DataError("columns given by name but the input has no header row");

  auto resolve = [&](const std::string& spec) -> std::size_t {
    if (!header || is_position(spec)) {
      if (!is_position(spec)) throw DataError("column '" + spec + "' not found");
      return std::stoul(spec);
    }
    for (std::size_t k = 0; k < first.size(); ++k) {
      if (first[k] == spec) return k;
    }
    throw DataError("column '" + spec + "' not found in header");
  };
  const std::size_t c_user = resolve(schema.user);
  const std::size_t c_item = resolve(schema.item);
  const std::size_t c_rating = resolve(schema.rating);
  const std::optional<std::size_t> c_time =
      schema.timestamp ? std::optional<std::size_t>(resolve(*schema.timestamp)) : std::nullopt;
  const std::size_t needed = std::max({c_user, c_item, c_rating, c_time.value_or(0)}) + 1;

  std::vector<RawRow> rows;
  rows.reserve(lines.size());
  for (std::size_t k = header ? 1 : 0; k < lines.size(); ++k) {
    const auto& [number, text] = lines[k];
    const auto fields = split_fields(text, delim);
    const auto fail = [&, n = number](const std::string& why) {
      return DataError("line " + std::to_string(n) + ": " + why);
    };
    if (fields.size() < needed) throw fail("expected at least " + std::to_string(needed) + " fields");
    RawRow row{std::string(fields[c_user]), std::string(fields[c_item]), 0.0, std::nullopt};
    if (row.user.empty() || row.item.empty()) throw fail("empty user or item id");
    if (!parse_double(fields[c_rating], row.rating)) {
      throw fail("unparseable rating '" + std::string(fields[c_rating]) + "'");
    }
    if (c_time && !fields[*c_time].empty()) {
      std::int64_t t = 0;
      if (!parse_timestamp(fields[*c_time], t)) throw fail("unparseable timestamp '" + std::string(fields[*c_time]) + "'");
      row.timestamp = t;
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw DataError("no interactions");

  // Latest timestamp wins; equal or missing timestamps fall back to the last occurrence.
  std::map<std::pair<std::string, std::string>, std::size_t> seen;
  std::vector<bool> keep(rows.size(), true);
  std::size_t duplicates = 0;
  for (std::size_t k = 0; k < rows.size(); ++k) {
    auto [it, inserted] = seen.try_emplace({rows[k].user, rows[k].item}, k);
    if (inserted) continue;
    ++duplicates;
    const auto prev = it->second;
    const bool newer = !(rows[prev].timestamp && rows[k].timestamp && *rows[prev].timestamp > *rows[k].timestamp);
    if (newer) {
      keep[prev] = false;
      it->second = k;
    } else {
      keep[k] = false;
    }
  }

  InteractionDataset::Parts parts;
  parts.kind = FeedbackKind::kExplicit;
  std::unordered_map<std::string, UserIndex> users;
  std::unordered_map<std::string, ItemIndex> items;
  double lo = rows.front().rating;
  double hi = lo;
  for (std::size_t k = 0; k < rows.size(); ++k) {
    auto& r = rows[k];
    auto [u, new_user] = users.try_emplace(r.user, static_cast<UserIndex>(parts.user_ids.size()));
    if (new_user) parts.user_ids.push_back(r.user);
    auto [i, new_item] = items.try_emplace(r.item, static_cast<ItemIndex>(parts.item_ids.size()));
    if (new_item) parts.item_ids.push_back(r.item);
    if (!keep[k]) continue;
    lo = std::min(lo, r.rating);
    hi = std::max(hi, r.rating);
    parts.interactions.push_back({u->second, i->second, r.rating, r.timestamp});
  }
  parts.bounds = schema.bounds.value_or(RatingBounds{lo, hi});
  if (lo < parts.bounds.min || hi > parts.bounds.max) throw DataError("ratings fall outside the configured bounds");
  if (report) {
    report->rows = rows.size();
    report->duplicates_resolved = duplicates;
  }
  return InteractionDataset::from_parts(std::move(parts));
}

InteractionDataset load_explicit(const std::filesystem::path& path, const LoadSchema& schema, LoadReport* report) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open dataset file " + path.string());
  return parse_explicit(in, schema, report);
}

InteractionDataset convert_to_implicit(const InteractionDataset& d, std::optional<double> threshold) {
  if (!d.is_explicit()) throw DataError("convert_to_implicit requires explicit feedback");
  auto parts = d.to_parts();
  std::vector<Interaction> kept;
  kept.reserve(parts.interactions.size());
  for (auto r : parts.interactions) {
    if (threshold && r.rating < *threshold) continue;
    r.rating = 1.0;
    kept.push_back(r);
  }
  if (kept.empty()) throw DataError("empty conversion");
  parts.interactions = std::move(kept);
  parts.kind = FeedbackKind::kImplicit;
  parts.bounds = {0.0, 1.0};
  return InteractionDataset::from_parts(std::move(parts));
}

Split split_holdout(const InteractionDataset& d, const SplitSpec& spec) {
  const auto all = d.interactions();
  std::vector<bool> to_test(all.size(), false);
  std::size_t skipped = 0;
  auto rng = make_stream(spec.seed, streams::kSplit);
  if (spec.strategy == SplitSpec::Strategy::kRatioRandom) {
    if (!(spec.train_fraction > 0.0 && spec.train_fraction < 1.0)) {
      throw DataError("train_fraction must lie in (0, 1)");
    }
    std::vector<std::size_t> order(all.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng);
    const auto n_train = static_cast<std::size_t>(std::floor(spec.train_fraction * static_cast<double>(all.size())));
    for (std::size_t k = n_train; k < order.size(); ++k) to_test[order[k]] = true;
  } else {
    if (spec.k < 1) throw DataError("leave-k-out requires k >= 1");
    std::size_t offset = 0;
    for (UserIndex u = 0; u < static_cast<UserIndex>(d.n_users()); ++u) {
      const auto count = d.user_interactions(u).size();
      if (count >= static_cast<std::size_t>(spec.k) + 1) {
        std::vector<std::size_t> local(count);
        std::iota(local.begin(), local.end(), std::size_t{0});
        std::shuffle(local.begin(), local.end(), rng);
        for (int j = 0; j < spec.k; ++j) to_test[offset + local[static_cast<std::size_t>(j)]] = true;
      } else if (count > 0) {
        ++skipped;
      }
      offset += count;
    }
  }
  auto train_parts = d.to_parts();
  auto test_parts = d.to_parts();
  train_parts.interactions.clear();
  test_parts.interactions.clear();
  for (std::size_t k = 0; k < all.size(); ++k) {
    (to_test[k] ? test_parts : train_parts).interactions.push_back(all[k]);
  }
  return Split{InteractionDataset::from_parts(std::move(train_parts)),
               InteractionDataset::from_parts(std::move(test_parts)), skipped};
}

void write_delimited(std::ostream& out, const InteractionDataset& d) {
  out << "user\titem\trating\ttimestamp\torigin\n";
  char buf[40];
  for (const auto& r : d.interactions()) {
    std::snprintf(buf, sizeof buf, "%.17g", r.rating);
    out << d.user_id(r.user) << '\t' << d.item_id(r.item) << '\t' << buf << '\t';
    if (r.timestamp) out << *r.timestamp;
    out << '\t';
    if (d.origin_labels()) out << (d.is_fake(r.user) ? "fake" : "genuine");
    out << '\n';
  }
}

}  // namespace shillbench
