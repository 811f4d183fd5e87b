#include "shillbench/attack.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <ostream>
#include <random>
#include <set>

#include "shillbench/rng.hpp"

namespace shillbench {
namespace {

bool is_implicit_output(const AttackParams& p) { return p.output_kind == OutputKind::kImplicitPairs; }

RatingScale::Tie tie_for(Intent intent) { return intent == Intent::kPush ? RatingScale::Tie::kUp : RatingScale::Tie::kDown; }

double top_rating(const InteractionDataset& d, const AttackParams& p) {
  return is_implicit_output(p) ? 1.0 : d.bounds().max;
}
double bottom_rating(const InteractionDataset& d, const AttackParams& p) {
  return is_implicit_output(p) ? 1.0 : d.bounds().min;
}
double target_rating(const InteractionDataset& d, const AttackParams& p) {
  return p.intent == Intent::kPush ? top_rating(d, p) : bottom_rating(d, p);
}

void validate(const InteractionDataset& d, const AttackParams& p) {
  if (p.attack_size < 0) throw AttackError("attack_size must be non-negative");
  if (p.filler_size < 0) throw AttackError("filler_size must be non-negative");
  if (p.attack_size > 0 && p.target_items.empty()) throw AttackError("attack needs at least one target item");
  if (p.output_kind == OutputKind::kExplicitTriplets && !d.is_explicit())
    throw AttackError("explicit triplets need an explicit dataset");
  if (p.output_kind == OutputKind::kImplicitPairs && d.is_explicit())
    throw AttackError("implicit pairs need an implicit dataset");
  std::set<ItemIndex> seen;
  for (const auto t : p.target_items) {
    if (t < 0 || static_cast<std::size_t>(t) >= d.n_items()) throw AttackError("target item out of range");
    if (!seen.insert(t).second) throw AttackError("duplicate target item");
  }
  for (const auto& s : p.selected_items) {
    if (s.item < 0 || static_cast<std::size_t>(s.item) >= d.n_items()) throw AttackError("selected item out of range");
    if (seen.count(s.item)) throw AttackError("selected item overlaps a target");
  }
}

/// Items that may serve as fillers: everything except `excluded`.
std::vector<ItemIndex> filler_pool(std::size_t n_items, const std::vector<ItemIndex>& excluded) {
  std::vector<char> skip(n_items, 0);
  for (const auto i : excluded) skip[static_cast<std::size_t>(i)] = 1;
  std::vector<ItemIndex> pool;
  for (std::size_t i = 0; i < n_items; ++i)
    if (!skip[i]) pool.push_back(static_cast<ItemIndex>(i));
  return pool;
}

std::vector<ItemIndex> sample_without_replacement(std::vector<ItemIndex> pool, std::size_t count, Rng& rng) {
  count = std::min(count, pool.size());
  for (std::size_t k = 0; k < count; ++k) {
    std::uniform_int_distribution<std::size_t> pick(k, pool.size() - 1);
    std::swap(pool[k], pool[pick(rng)]);
  }
  pool.resize(count);
  std::sort(pool.begin(), pool.end());
  return pool;
}

double draw_rating(const RatingScale& scale, double mean, double sd, RatingScale::Tie tie, Rng& rng) {
  double x = mean;
  if (sd > 0.0) x = std::normal_distribution<double>(mean, sd)(rng);
  return scale.snap(x, tie);
}

void sort_by_item(std::vector<ItemRating>& v) {
  std::sort(v.begin(), v.end(), [](const ItemRating& a, const ItemRating& b) { return a.item < b.item; });
}

void warn_if_short(std::size_t pool, int filler_size, const char* generator) {
  if (pool < static_cast<std::size_t>(filler_size))
    spdlog::warn("{}: filler_size {} exceeds the {} available items; using all of them", generator, filler_size, pool);
}

/// Shared skeleton: targets, user-selected items, then fillers produced by
/// `fill(profile_index, rng, excluded, profile)`.
template <typename Fill>
FakeProfileSet build_profiles(const InteractionDataset& d, const AttackParams& p, const char* name, Fill fill) {
  validate(d, p);
  FakeProfileSet out;
  out.generator = name;
  out.params = p;
  const auto tie = tie_for(p.intent);
  for (int k = 0; k < p.attack_size; ++k) {
    auto rng = make_stream(p.seed, streams::kProfiles + static_cast<std::uint64_t>(k));
    FakeProfile prof;
    for (const auto t : p.target_items) prof.targets.push_back({t, target_rating(d, p)});
    for (const auto& s : p.selected_items)
      prof.selected.push_back({s.item, is_implicit_output(p) ? 1.0 : d.scale().snap(s.rating, tie)});
    std::vector<ItemIndex> excluded(p.target_items.begin(), p.target_items.end());
    for (const auto& s : p.selected_items) excluded.push_back(s.item);
    fill(k, rng, excluded, prof);
    sort_by_item(prof.targets);
    sort_by_item(prof.selected);
    sort_by_item(prof.filler);
    out.profiles.push_back(std::move(prof));
  }
  return out;
}

}  // namespace

AttackParams default_attack_params(const InteractionDataset& d, const DatasetStats& stats, std::uint64_t seed) {
  AttackParams p;
  p.seed = seed;
  p.attack_size = static_cast<int>(std::floor(0.2 * static_cast<double>(d.n_genuine_users())));
  p.filler_size = static_cast<int>(std::lround(stats.avg_actions_per_user));
  if (d.is_explicit()) {
    p.output_kind = OutputKind::kExplicitTriplets;
    const int count = std::max(1, p.attack_size / 3);
    p.target_items = select_targets(d, stats, count, TargetMode::kPopular, seed);
  } else {
    p.output_kind = OutputKind::kImplicitPairs;
    const int count = std::max(1, static_cast<int>(std::floor(0.005 * static_cast<double>(p.attack_size))));
    p.target_items = select_targets(d, stats, count, TargetMode::kRandom, seed);
  }
  return p;
}

std::vector<ItemIndex> select_targets(const InteractionDataset& d, const DatasetStats& stats, int count,
                                      TargetMode mode, std::uint64_t seed) {
  if (count <= 0) throw AttackError("target count must be positive");
  if (static_cast<std::size_t>(count) > d.n_items()) throw AttackError("target count exceeds the number of items");
  std::vector<ItemIndex> items(d.n_items());
  std::iota(items.begin(), items.end(), 0);
  if (mode == TargetMode::kPopular) {
    std::stable_sort(items.begin(), items.end(), [&](ItemIndex a, ItemIndex b) {
      return stats.per_item_count[static_cast<std::size_t>(a)] > stats.per_item_count[static_cast<std::size_t>(b)];
    });
    items.resize(static_cast<std::size_t>(count));
    std::sort(items.begin(), items.end());
    return items;
  }
  auto rng = make_stream(seed, streams::kTargets);
  return sample_without_replacement(std::move(items), static_cast<std::size_t>(count), rng);
}

FakeProfileSet gen_random_attack(const InteractionDataset& d, const DatasetStats& stats, const AttackParams& params) {
  const auto scale = d.scale();
  const auto tie = tie_for(params.intent);
  return build_profiles(d, params, "random", [&](int, Rng& rng, const auto& excluded, FakeProfile& prof) {
    const auto pool = filler_pool(d.n_items(), excluded);
    warn_if_short(pool.size(), params.filler_size, "random");
    for (const auto i : sample_without_replacement(pool, static_cast<std::size_t>(params.filler_size), rng)) {
      const double r = is_implicit_output(params) ? 1.0
                                                  : draw_rating(scale, stats.global_mean, stats.global_std, tie, rng);
      prof.filler.push_back({i, r});
    }
  });
}

FakeProfileSet gen_average_attack(const InteractionDataset& d, const DatasetStats& stats, const AttackParams& params) {
  const auto scale = d.scale();
  const auto tie = tie_for(params.intent);
  return build_profiles(d, params, "average", [&](int, Rng& rng, const auto& excluded, FakeProfile& prof) {
    const auto pool = filler_pool(d.n_items(), excluded);
    warn_if_short(pool.size(), params.filler_size, "average");
    for (const auto i : sample_without_replacement(pool, static_cast<std::size_t>(params.filler_size), rng)) {
      const auto k = static_cast<std::size_t>(i);
      double r = 1.0;
      if (!is_implicit_output(params)) {
        r = stats.per_item_count[k] > 0 ? draw_rating(scale, stats.per_item_mean[k], stats.per_item_std[k], tie, rng)
                                        : draw_rating(scale, stats.global_mean, stats.global_std, tie, rng);
      }
      prof.filler.push_back({i, r});
    }
  });
}

FakeProfileSet gen_bandwagon_attack(const InteractionDataset& d, const DatasetStats& stats, const AttackParams& params,
                                    double popular_fraction, PopularityRule rule) {
  if (!(popular_fraction >= 0.0 && popular_fraction <= 1.0)) throw AttackError("popular_fraction must be in [0, 1]");
  const auto scale = d.scale();
  const auto tie = tie_for(params.intent);
  const auto popular_rating = params.intent == Intent::kPush ? top_rating(d, params) : bottom_rating(d, params);
  const auto n_popular =
      static_cast<std::size_t>(std::floor(popular_fraction * static_cast<double>(params.filler_size)));
  return build_profiles(d, params, "bandwagon", [&](int, Rng& rng, const auto& excluded, FakeProfile& prof) {
    auto ranked = filler_pool(d.n_items(), excluded);
    warn_if_short(ranked.size(), params.filler_size, "bandwagon");
    const auto& count = stats.per_item_count;
    const auto& mean = stats.per_item_mean;
    std::stable_sort(ranked.begin(), ranked.end(), [&](ItemIndex a, ItemIndex b) {
      const auto ia = static_cast<std::size_t>(a), ib = static_cast<std::size_t>(b);
      if (rule == PopularityRule::kByMeanRating && mean[ia] != mean[ib]) return mean[ia] > mean[ib];
      return count[ia] > count[ib];
    });
    const auto take = std::min(n_popular, ranked.size());
    for (std::size_t k = 0; k < take; ++k) prof.selected.push_back({ranked[k], popular_rating});
    std::vector<ItemIndex> rest(ranked.begin() + static_cast<std::ptrdiff_t>(take), ranked.end());
    std::sort(rest.begin(), rest.end());
    const auto n_rest = static_cast<std::size_t>(params.filler_size) - std::min<std::size_t>(take, params.filler_size);
    for (const auto i : sample_without_replacement(std::move(rest), n_rest, rng)) {
      const double r = is_implicit_output(params) ? 1.0
                                                  : draw_rating(scale, stats.global_mean, stats.global_std, tie, rng);
      prof.filler.push_back({i, r});
    }
  });
}

FakeProfileSet gen_lovehate_attack(const InteractionDataset& d, const AttackParams& params) {
  const double filler_rating = params.intent == Intent::kPush ? bottom_rating(d, params) : top_rating(d, params);
  return build_profiles(d, params, "lovehate", [&](int, Rng& rng, const auto& excluded, FakeProfile& prof) {
    const auto pool = filler_pool(d.n_items(), excluded);
    warn_if_short(pool.size(), params.filler_size, "lovehate");
    for (const auto i : sample_without_replacement(pool, static_cast<std::size_t>(params.filler_size), rng))
      prof.filler.push_back({i, filler_rating});
  });
}

FakeProfileSet gen_segment_attack(const InteractionDataset& d, const AttackParams& params,
                                  std::span<const ItemIndex> segment_items) {
  if (segment_items.empty()) throw AttackError("segment attack needs at least one segment item");
  std::set<ItemIndex> segment;
  for (const auto s : segment_items) {
    if (s < 0 || static_cast<std::size_t>(s) >= d.n_items()) throw AttackError("segment item out of range");
    if (std::find(params.target_items.begin(), params.target_items.end(), s) != params.target_items.end())
      throw AttackError("segment overlaps targets");
    segment.insert(s);
  }
  return build_profiles(d, params, "segment", [&](int, Rng& rng, auto excluded, FakeProfile& prof) {
    for (const auto s : segment) {
      if (std::find(excluded.begin(), excluded.end(), s) != excluded.end()) continue;
      prof.selected.push_back({s, top_rating(d, params)});
      excluded.push_back(s);
    }
    const auto pool = filler_pool(d.n_items(), excluded);
    warn_if_short(pool.size(), params.filler_size, "segment");
    for (const auto i : sample_without_replacement(pool, static_cast<std::size_t>(params.filler_size), rng))
      prof.filler.push_back({i, bottom_rating(d, params)});
  });
}

std::vector<ItemIndex> nearest_items(const InteractionDataset& d, ItemIndex target, int count) {
  if (target < 0 || static_cast<std::size_t>(target) >= d.n_items()) throw AttackError("target item out of range");
  if (count < 0) throw AttackError("neighbour count must be non-negative");
  std::vector<double> dot(d.n_items(), 0.0), norm2(d.n_items(), 0.0);
  for (const auto& x : d.interactions()) norm2[static_cast<std::size_t>(x.item)] += x.rating * x.rating;
  for (const auto u : d.item_users(target)) {
    const double rt = *d.rating(u, target);
    for (const auto& x : d.user_interactions(u)) dot[static_cast<std::size_t>(x.item)] += rt * x.rating;
  }
  std::vector<std::pair<double, ItemIndex>> sims;
  const double nt = std::sqrt(norm2[static_cast<std::size_t>(target)]);
  for (std::size_t j = 0; j < d.n_items(); ++j) {
    if (static_cast<ItemIndex>(j) == target) continue;
    const double denom = nt * std::sqrt(norm2[j]);
    sims.emplace_back(denom > 0.0 ? dot[j] / denom : 0.0, static_cast<ItemIndex>(j));
  }
  std::sort(sims.begin(), sims.end(), [](const auto& a, const auto& b) {
    return a.first != b.first ? a.first > b.first : a.second < b.second;
  });
  std::vector<ItemIndex> out;
  for (std::size_t k = 0; k < sims.size() && out.size() < static_cast<std::size_t>(count); ++k)
    out.push_back(sims[k].second);
  return out;
}

InteractionDataset inject(const InteractionDataset& train, const FakeProfileSet& fakes) {
  auto parts = train.to_parts();
  if (!parts.origin) parts.origin = std::vector<Origin>(parts.user_ids.size(), Origin::kGenuine);
  const bool implicit = !train.is_explicit();
  for (std::size_t k = 0; k < fakes.profiles.size(); ++k) {
    std::string id = "fake_" + std::to_string(k);
    if (train.find_user(id)) throw AttackError("fake user id collides with an existing user: " + id);
    const auto u = static_cast<UserIndex>(parts.user_ids.size());
    parts.user_ids.push_back(std::move(id));
    parts.origin->push_back(Origin::kFake);
    const auto& p = fakes.profiles[k];
    for (const auto* group : {&p.targets, &p.selected, &p.filler}) {
      for (const auto& e : *group) {
        if (e.item < 0 || static_cast<std::size_t>(e.item) >= train.n_items())
          throw AttackError("fake profile references an unknown item");
        parts.interactions.push_back({u, e.item, implicit ? 1.0 : e.rating, std::nullopt});
      }
    }
  }
  return InteractionDataset::from_parts(std::move(parts));
}

void write_fake_profiles(std::ostream& out, const FakeProfileSet& fakes, const InteractionDataset& train) {
  out << "user\titem\trating\ttimestamp\torigin\n";
  char buf[40];
  for (std::size_t k = 0; k < fakes.profiles.size(); ++k) {
    const auto& p = fakes.profiles[k];
    std::vector<ItemRating> all;
    for (const auto* group : {&p.targets, &p.selected, &p.filler}) all.insert(all.end(), group->begin(), group->end());
    sort_by_item(all);
    for (const auto& e : all) {
      std::snprintf(buf, sizeof buf, "%.17g", e.rating);
      out << "fake_" << k << '\t' << train.item_id(e.item) << '\t' << buf << "\t\tfake\n";
    }
  }
}

}  // namespace shillbench
