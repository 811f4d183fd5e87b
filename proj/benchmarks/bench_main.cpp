#include <benchmark/benchmark.h>

#include <algorithm>
#include <numeric>
#include <random>

#include "shillbench/attack.hpp"
#include "shillbench/defense.hpp"
#include "shillbench/metrics.hpp"
#include "shillbench/recommender.hpp"

namespace {

using namespace shillbench;

// Synthetic explicit dataset with a skewed item popularity.
InteractionDataset synthetic(int n_users, int n_items, int per_user, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> rating(1, 5);
  std::vector<double> weight(static_cast<std::size_t>(n_items));
  for (int i = 0; i < n_items; ++i) weight[static_cast<std::size_t>(i)] = 1.0 / (1.0 + i);
  std::discrete_distribution<int> item(weight.begin(), weight.end());
  InteractionDataset::Parts p;
  for (int u = 0; u < n_users; ++u) p.user_ids.push_back("u" + std::to_string(u));
  for (int i = 0; i < n_items; ++i) p.item_ids.push_back("i" + std::to_string(i));
  for (int u = 0; u < n_users; ++u) {
    std::vector<char> seen(static_cast<std::size_t>(n_items), 0);
    for (int k = 0; k < per_user; ++k) {
      const int i = item(rng);
      if (seen[static_cast<std::size_t>(i)]) continue;
      seen[static_cast<std::size_t>(i)] = 1;
      p.interactions.push_back({u, i, static_cast<double>(rating(rng)), std::nullopt});
    }
  }
  return InteractionDataset::from_parts(std::move(p));
}

const InteractionDataset& explicit_data() {
  static const auto d = synthetic(500, 800, 60, 7);
  return d;
}

const InteractionDataset& implicit_data() {
  static const auto d = convert_to_implicit(explicit_data());
  return d;
}

void BM_TrainMfEpoch(benchmark::State& state) {
  TrainConfig cfg;
  cfg.task = Task::kRating;
  cfg.loss = Loss::kSquaredPointwise;
  cfg.epochs = 1;
  for (auto _ : state) benchmark::DoNotOptimize(train_mf_pointwise(explicit_data(), cfg));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(explicit_data().size()));
}
BENCHMARK(BM_TrainMfEpoch)->Unit(benchmark::kMillisecond);

void BM_TrainBprEpoch(benchmark::State& state) {
  TrainConfig cfg;
  cfg.epochs = 1;
  for (auto _ : state) benchmark::DoNotOptimize(train_bpr(implicit_data(), cfg));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(implicit_data().size()));
}
BENCHMARK(BM_TrainBprEpoch)->Unit(benchmark::kMillisecond);

void BM_TrainLightGcnEpoch(benchmark::State& state) {
  TrainConfig cfg;
  cfg.epochs = 1;
  cfg.batch_size = 1024;
  for (auto _ : state) benchmark::DoNotOptimize(train_lightgcn(implicit_data(), cfg, static_cast<int>(state.range(0))));
}
BENCHMARK(BM_TrainLightGcnEpoch)->Arg(1)->Arg(2)->Arg(3)->Unit(benchmark::kMillisecond);

void BM_ItemKnn(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(train_itemknn(implicit_data(), 50));
}
BENCHMARK(BM_ItemKnn)->Unit(benchmark::kMillisecond);

void BM_RecommendTopK(benchmark::State& state) {
  TrainConfig cfg;
  cfg.epochs = 1;
  const auto model = train_bpr(implicit_data(), cfg);
  const auto k = static_cast<std::size_t>(state.range(0));
  UserIndex u = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(recommend_topk(model, u, k, &implicit_data()));
    u = (u + 1) % static_cast<UserIndex>(implicit_data().n_users());
  }
}
BENCHMARK(BM_RecommendTopK)->Arg(10)->Arg(50);

void BM_Ndcg(benchmark::State& state) {
  std::mt19937_64 rng(3);
  metrics::TopKGroundTruth gt;
  gt.k = 50;
  std::uniform_int_distribution<ItemIndex> item(0, 999);
  for (UserIndex u = 0; u < 1000; ++u) {
    metrics::UserTopK row{u, {}, {}, true};
    for (int k = 0; k < 50; ++k) row.ranked.push_back(item(rng));
    for (int k = 0; k < 10; ++k) row.relevant.push_back(item(rng));
    std::sort(row.relevant.begin(), row.relevant.end());
    row.relevant.erase(std::unique(row.relevant.begin(), row.relevant.end()), row.relevant.end());
    gt.users.push_back(std::move(row));
  }
  for (auto _ : state) benchmark::DoNotOptimize(metrics::ndcg_at_k(gt));
}
BENCHMARK(BM_Ndcg);

void BM_AverageAttack(benchmark::State& state) {
  const auto stats = compute_stats(explicit_data());
  auto params = default_attack_params(explicit_data(), stats, 1);
  for (auto _ : state) benchmark::DoNotOptimize(gen_average_attack(explicit_data(), stats, params));
}
BENCHMARK(BM_AverageAttack)->Unit(benchmark::kMillisecond);

void BM_UnrolledHypergradient(benchmark::State& state) {
  const auto& d = implicit_data();
  const std::size_t n_fake = 50;
  const auto obj = make_pointwise_objective(d, n_fake, 0.01, 0.05);
  std::mt19937_64 rng(5);
  std::normal_distribution<double> z(0.0, 0.1);
  const auto n_rows = static_cast<Eigen::Index>(d.n_users() + n_fake);
  SurrogateState theta{Matrix(n_rows, 16), Matrix(static_cast<Eigen::Index>(d.n_items()), 16)};
  for (Eigen::Index k = 0; k < theta.users.size(); ++k) theta.users.data()[k] = z(rng);
  for (Eigen::Index k = 0; k < theta.items.size(); ++k) theta.items.data()[k] = z(rng);
  Matrix w = Matrix::Constant(static_cast<Eigen::Index>(n_fake), static_cast<Eigen::Index>(d.n_items()), 0.05);
  std::vector<UserIndex> users(100);
  std::iota(users.begin(), users.end(), 0);
  const auto setup = make_adversarial_setup(theta, d, users, {7}, Intent::kPush, 10);
  const auto steps = static_cast<int>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(unrolled_hypergradient(*obj, theta, w, setup, steps, 1e-3));
}
BENCHMARK(BM_UnrolledHypergradient)->Arg(1)->Arg(5)->Unit(benchmark::kMillisecond);

void BM_PcaVarSelect(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(pca_varselect(explicit_data(), 3, 50));
}
BENCHMARK(BM_PcaVarSelect)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
