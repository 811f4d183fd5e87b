#include "shillbench/pipeline.hpp"

#include <spdlog/sinks/basic_file_sink.h>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>
#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <json.hpp>
#include <numeric>
#include <set>
#include <sstream>

#include "shillbench/dataset_cache.hpp"
#include "shillbench/hash.hpp"
#include "shillbench/metrics.hpp"

namespace shillbench {
namespace {

using nlohmann::json;
namespace fs = std::filesystem;

std::string sanitize(const std::string& s) {
  std::string out = s.empty() ? "unnamed" : s;
  for (auto& c : out)
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '-' && c != '.') c = '-';
  return out;
}

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + p.string());
  out << text;
  if (!out.flush()) throw Error("cannot write " + p.string());
}

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

/// Routes the default spdlog logger to run.log (and stderr) for one run.
class LogScope {
 public:
  explicit LogScope(const fs::path& file) : previous_(spdlog::default_logger()) {
    auto file_sink = std::make_shared<spdlog::sinks::basic_file_sink_mt>(file.string(), true);
    file_sink->set_level(spdlog::level::debug);
    auto err_sink = std::make_shared<spdlog::sinks::stderr_color_sink_mt>();
    // The console honours the caller's level; run.log always gets everything.
    err_sink->set_level(std::max(spdlog::level::info, previous_->level()));
    auto logger = std::make_shared<spdlog::logger>("shillbench", spdlog::sinks_init_list{file_sink, err_sink});
    logger->set_level(spdlog::level::debug);
    logger->set_pattern("[%Y-%m-%d %H:%M:%S.%e] [%l] %v");
    logger->flush_on(spdlog::level::debug);
    spdlog::set_default_logger(logger);
  }
  ~LogScope() {
    spdlog::default_logger()->flush();
    spdlog::set_default_logger(previous_);
  }
  LogScope(const LogScope&) = delete;
  LogScope& operator=(const LogScope&) = delete;

 private:
  std::shared_ptr<spdlog::logger> previous_;
};

/// A trained victim, always rebuilt from its text dump so cold and cached
/// runs score through the same code path.
struct Victim {
  std::optional<EmbeddingModel> embedding;
  std::optional<ItemKnnModel> knn;
  std::string text;

  const Scorer& scorer() const {
    if (embedding) return *embedding;
    return *knn;
  }
};

Victim parse_victim(ModelKind kind, std::string text) {
  Victim v;
  std::istringstream in(text);
  if (kind == ModelKind::kItemKnn)
    v.knn = load_itemknn_model(in);
  else
    v.embedding = load_embedding_model(in);
  v.text = std::move(text);
  return v;
}

/// Pairs of (index in the model's data, index in the clean split).
using UserMap = std::vector<std::pair<UserIndex, UserIndex>>;

struct Evaluation {
  std::map<std::string, double> metrics;
  std::vector<double> target_predictions;
};

enum class Mode { kAttack, kRobustness, kAttackOnly };

class Pipeline {
 public:
  Pipeline(const ExperimentConfig& cfg, Mode mode) : cfg_(cfg), mode_(mode) {
    art_.config = cfg;
    art_.snapshot = resolved_snapshot(cfg);
    art_.run_dir = run_directory(cfg);
    art_.log_path = art_.run_dir / "run.log";
  }

  RunArtifacts execute() {
    if (mode_ == Mode::kRobustness && cfg_.defense.kind == DefenseKind::kNone)
      throw ConfigError("defense.name: a robustness run needs a defense (identity, oracle or pca)");
    prepare_directory();
    LogScope log(art_.log_path);
    record("run.log");
    write_file("resolved_config.yaml", art_.snapshot);
    spdlog::info("run directory {}", art_.run_dir.string());
    try {
      run_stages();
    } catch (const StageError& e) {
      spdlog::error("stage {} failed: {}", e.stage(), e.what());
      art_.failed_stage = e.stage();
      write_file("failure.txt", "stage: " + e.stage() + "\nerror: " + e.what() + "\n");
      write_report(art_);
      throw;
    }
    write_report(art_);
    spdlog::info("done");
    return art_;
  }

 private:
  void prepare_directory() {
    std::error_code ec;
    fs::create_directories(art_.run_dir, ec);
    if (ec) throw ConfigError("output_dir: cannot create " + art_.run_dir.string() + ": " + ec.message());
    const auto probe = art_.run_dir / ".write_probe";
    {
      std::ofstream out(probe);
      if (!out || !(out << "probe").flush()) throw ConfigError("output_dir: " + art_.run_dir.string() + " is not writable");
    }
    fs::remove(probe, ec);
    fs::remove(art_.run_dir / "failure.txt", ec);
  }

  template <typename F>
  auto stage(const char* name, F&& f) {
    spdlog::info("{} stage", name);
    try {
      return f();
    } catch (const StageError&) {
      throw;
    } catch (const std::exception& e) {
      throw StageError(name, e.what());
    }
  }

  void record(const std::string& file) {
    if (std::find(art_.files.begin(), art_.files.end(), file) == art_.files.end()) art_.files.push_back(file);
  }

  void write_file(const std::string& name, const std::string& text) {
    const auto p = art_.run_dir / name;
    fs::create_directories(p.parent_path());
    write_text(p, text);
    record(name);
  }

  void run_stages() {
    auto full = stage("load", [&] {
      auto d = load_explicit(cfg_.dataset.path, cfg_.dataset.schema);
      if (cfg_.dataset.feedback == FeedbackKind::kImplicit) d = convert_to_implicit(d, cfg_.dataset.implicit_threshold);
      spdlog::info("loaded {} users, {} items, {} interactions", d.n_users(), d.n_items(), d.size());
      return d;
    });
    split_ = stage("split", [&] { return split_holdout(full, cfg_.dataset.split); });
    art_.stats = stage("stats", [&] { return compute_stats(split_.train); });
    n_genuine_ = split_.train.n_users();
    auto& md = art_.report.metadata;
    md["dataset"] = cfg_.dataset.name;
    md["attack"] = cfg_.attack.name;
    md["model"] = cfg_.model.name;
    md["seed"] = std::to_string(cfg_.seed);
    md["n_users"] = std::to_string(split_.train.n_users());
    md["n_items"] = std::to_string(split_.train.n_items());
    md["n_train"] = std::to_string(split_.train.size());
    md["n_test"] = std::to_string(split_.test.size());

    params_ = stage("attack_params", [&] { return attack_params(); });
    md["intent"] = params_.intent == Intent::kPush ? "push" : "nuke";
    md["n_fake"] = std::to_string(params_.attack_size);
    std::string targets;
    for (const auto t : params_.target_items) targets += (targets.empty() ? "" : ",") + split_.train.item_id(t);
    md["targets"] = targets;

    if (mode_ == Mode::kAttackOnly) {
      attacked_ = stage("attack", [&] { return attack(); });
      stage("export", [&] {
        std::ostringstream out;
        write_delimited(out, attacked_);
        write_file("attacked_train.tsv", out.str());
        return 0;
      });
      return;
    }

    const auto clean_view = view(split_.train);
    const auto clean = stage("clean_train", [&] { return victim("clean", clean_view); });
    const auto clean_eval = stage("clean_eval", [&] { return evaluate(clean, clean_view, identity_users(), true); });
    art_.report.conditions["clean"] = clean_eval.metrics;

    Evaluation attacked_eval;
    std::optional<Victim> attacked_model;
    if (params_.attack_size == 0) {
      spdlog::info("null attack: attacked condition copies the clean condition");
      attacked_ = split_.train;
      attacked_eval = clean_eval;
    } else {
      attacked_ = stage("attack", [&] { return attack(); });
      const auto attacked_view = view(attacked_);
      attacked_model = stage("attacked_train", [&] { return victim("attacked", attacked_view); });
      attacked_eval =
          stage("attacked_eval", [&] { return evaluate(*attacked_model, attacked_view, identity_users(), true); });
    }
    art_.report.conditions["attacked"] = attacked_eval.metrics;

    auto& summary = art_.report.summary;
    for (const auto k : cfg_.metrics.k) {
      for (const char* base : {"HR@", "NDCG@"}) {
        const auto name = base + std::to_string(k);
        const auto& c = clean_eval.metrics;
        const auto& a = attacked_eval.metrics;
        if (c.count(name)) summary["delta_" + name] = a.at(name) - c.at(name);
      }
    }
    if (is_mf() && !clean_eval.target_predictions.empty())
      summary["PS"] = metrics::prediction_shift(clean_eval.target_predictions, attacked_eval.target_predictions);

    if (mode_ != Mode::kRobustness) return;
    art_.report.metadata["defense"] = cfg_.defense.name;
    const auto suspects = stage("defense", [&] { return detect(); });
    art_.suspects = suspects;
    write_file("suspects.tsv", suspect_report_text(suspects, attacked_));
    if (suspects.confusion) {
      summary["detector_recall"] = suspects.confusion->recall();
      summary["detector_precision"] = suspects.confusion->precision();
    }
    const auto filtered = stage("filter", [&] { return filter_users(attacked_, suspects.flagged); });
    UserMap users;
    for (std::size_t j = 0; j < filtered.kept_users.size(); ++j)
      if (static_cast<std::size_t>(filtered.kept_users[j]) < n_genuine_)
        users.emplace_back(static_cast<UserIndex>(j), filtered.kept_users[j]);
    const auto defended_view = view(filtered.data);
    const auto defended = stage("defended_train", [&] { return victim("defended", defended_view); });
    const auto defended_eval = stage("defended_eval", [&] { return evaluate(defended, defended_view, users, false); });
    art_.report.conditions["defended"] = defended_eval.metrics;
    for (const auto k : cfg_.metrics.k) {
      const auto name = "HR@" + std::to_string(k);
      if (!clean_eval.metrics.count(name)) continue;
      summary["RI@" + std::to_string(k)] = metrics::rank_improvement(
          clean_eval.metrics.at(name), attacked_eval.metrics.at(name), defended_eval.metrics.at(name));
    }
  }

  bool is_mf() const { return cfg_.model.kind == ModelKind::kMf; }

  /// Ranking victims train on implicit feedback.
  InteractionDataset view(const InteractionDataset& d) const {
    if (is_mf() || !d.is_explicit()) return d;
    return convert_to_implicit(d, cfg_.dataset.implicit_threshold);
  }

  UserMap identity_users() const {
    UserMap m;
    for (std::size_t u = 0; u < n_genuine_; ++u) m.emplace_back(static_cast<UserIndex>(u), static_cast<UserIndex>(u));
    return m;
  }

  std::string section(const char* name) const {
    const auto root = YAML::Load(art_.snapshot);
    YAML::Emitter out;
    out << root[name];
    return out.c_str();
  }

  AttackParams attack_params() const {
    const auto& a = cfg_.attack;
    const auto seed = a.seed.value_or(cfg_.seed);
    AttackParams p = default_attack_params(split_.train, art_.stats, seed);
    if (a.size) p.attack_size = *a.size;
    if (a.filler_size) p.filler_size = *a.filler_size;
    if (a.kind == AttackKind::kNone) p.attack_size = 0;
    if (!a.targets.empty()) {
      p.target_items.clear();
      for (const auto& raw : a.targets) {
        const auto i = split_.train.find_item(raw);
        if (!i) throw ConfigError("attack.targets: unknown item '" + raw + "'");
        p.target_items.push_back(*i);
      }
    } else if (a.target_count || a.target_mode) {
      const auto mode = a.target_mode.value_or(split_.train.is_explicit() ? TargetMode::kPopular : TargetMode::kRandom);
      const int count = a.target_count.value_or(static_cast<int>(p.target_items.size()));
      p.target_items = select_targets(split_.train, art_.stats, count, mode, seed);
    }
    p.intent = a.intent;
    p.seed = seed;
    p.output_kind = split_.train.is_explicit() ? OutputKind::kExplicitTriplets : OutputKind::kImplicitPairs;
    if (p.attack_size < 0) throw ConfigError("attack.size: must be non-negative");
    if (p.filler_size < 0) throw ConfigError("attack.filler_size: must be non-negative");
    return p;
  }

  std::string params_text() const {
    std::ostringstream out;
    out << "size=" << params_.attack_size << ";filler=" << params_.filler_size << ";targets=";
    for (const auto t : params_.target_items) out << t << ',';
    out << ";intent=" << static_cast<int>(params_.intent) << ";seed=" << params_.seed
        << ";output=" << static_cast<int>(params_.output_kind);
    return out.str();
  }

  FakeProfileSet generate() const {
    const auto& a = cfg_.attack;
    const auto& d = split_.train;
    switch (a.kind) {
      case AttackKind::kRandom:
        return gen_random_attack(d, art_.stats, params_);
      case AttackKind::kAverage:
        return gen_average_attack(d, art_.stats, params_);
      case AttackKind::kBandwagon:
        return gen_bandwagon_attack(d, art_.stats, params_, a.popular_fraction, a.popularity_rule);
      case AttackKind::kLoveHate:
        return gen_lovehate_attack(d, params_);
      case AttackKind::kSegment: {
        if (params_.target_items.empty()) throw AttackError("segment attack needs a target");
        const auto near = nearest_items(d, params_.target_items.front(),
                                        a.segment_size + static_cast<int>(params_.target_items.size()));
        std::vector<ItemIndex> segment;
        for (const auto i : near) {
          if (std::find(params_.target_items.begin(), params_.target_items.end(), i) != params_.target_items.end())
            continue;
          if (static_cast<int>(segment.size()) < a.segment_size) segment.push_back(i);
        }
        return gen_segment_attack(d, params_, segment);
      }
      case AttackKind::kSingleLevel:
      case AttackKind::kBilevel: {
        auto spec = a.surrogate;
        spec.train_config.seed = params_.seed;
        return a.kind == AttackKind::kSingleLevel ? gen_single_level_gradient_attack(d, art_.stats, spec, params_)
                                                  : gen_bilevel_attack(d, art_.stats, spec, params_);
      }
      case AttackKind::kNone:
        break;
    }
    return {};
  }

  InteractionDataset attack() {
    const DatasetCache cache(cache_root(cfg_) / "datasets");
    const auto key = ContentKey()
                         .add("stage", "attack")
                         .add("train", sha256_hex(serialize_dataset(split_.train)))
                         .add("attack", section("attack"))
                         .add("params", params_text())
                         .hex();
    art_.cache_keys["attack"] = key;
    art_.attacked_data = cache.store().entry_dir(key);
    if (auto hit = cache.load(key)) {
      art_.cache_hits["attack"] = true;
      spdlog::info("attack stage: cache hit, skipped");
      return std::move(*hit);
    }
    art_.cache_hits["attack"] = false;
    const auto fakes = generate();
    for (std::size_t s = 0; s < fakes.loss_trace.size(); ++s)
      spdlog::info("{} outer step {} adversarial loss {}", fakes.generator, s + 1, num(fakes.loss_trace[s]));
    auto attacked = inject(split_.train, fakes);
    cache.persist(key, attacked, {{"generator", fakes.generator}, {"attack_size", std::to_string(params_.attack_size)}});
    spdlog::info("injected {} fake users ({} interactions)", fakes.profiles.size(), attacked.size() - split_.train.size());
    return attacked;
  }

  Victim victim(const std::string& condition, const InteractionDataset& data) {
    const ArtifactStore store(cache_root(cfg_) / "models");
    const auto key = ContentKey()
                         .add("stage", "model")
                         .add("model", section("model"))
                         .add("seed", static_cast<long long>(cfg_.seed))
                         .add("data", sha256_hex(serialize_dataset(data)))
                         .hex();
    art_.cache_keys[condition + "_model"] = key;
    std::string text;
    if (auto hit = store.read(key, "model.txt")) {
      art_.cache_hits[condition + "_model"] = true;
      spdlog::info("{} model: cache hit, training skipped", condition);
      text = std::move(*hit);
    } else {
      art_.cache_hits[condition + "_model"] = false;
      text = train(data);
      store.commit(key, {{"model.txt", text}});
    }
    write_file("models/" + condition + ".model", text);
    return parse_victim(cfg_.model.kind, std::move(text));
  }

  std::string train(const InteractionDataset& data) const {
    std::ostringstream out;
    TrainLog log;
    const auto& m = cfg_.model;
    switch (m.kind) {
      case ModelKind::kMf:
        save_model(out, train_mf_pointwise(data, m.train, &log));
        break;
      case ModelKind::kBpr:
        save_model(out, train_bpr(data, m.train, &log));
        break;
      case ModelKind::kLightGcn:
        save_model(out, train_lightgcn(data, m.train, m.layers, &log));
        break;
      case ModelKind::kItemKnn:
        save_model(out, train_itemknn(data, m.k_neighbors));
        break;
    }
    if (!log.epoch_loss.empty())
      spdlog::info("trained {} epochs, final loss {}", log.epoch_loss.size(), num(log.epoch_loss.back()));
    return out.str();
  }

  Evaluation evaluate(const Victim& v, const InteractionDataset& seen, const UserMap& users, bool with_predictions) const {
    Evaluation e;
    const auto& ks = cfg_.metrics.k;
    const auto k_max = *std::max_element(ks.begin(), ks.end());
    const auto& targets = params_.target_items;

    metrics::TopKGroundTruth test_gt, target_gt;
    for (const auto& [mu, bu] : users) {
      const auto list = recommend_topk(v.scorer(), mu, k_max, &seen);
      const auto relevant = split_.test.user_items(bu);
      if (!relevant.empty())
        test_gt.users.push_back({bu, list.items, {relevant.begin(), relevant.end()}, true});
      target_gt.users.push_back({bu, list.items, targets, true});
    }
    for (const auto k : ks) {
      const auto suffix = "@" + std::to_string(k);
      test_gt.k = target_gt.k = k;
      if (!targets.empty()) {
        e.metrics["HR" + suffix] = metrics::hit_rate(target_gt, metrics::HitVariant::kTargetItem, targets);
        e.metrics["NDCG" + suffix] = metrics::ndcg_at_k(metrics::with_target_relevance(target_gt, targets)).value;
      }
      if (test_gt.users.empty()) continue;
      const double p = metrics::precision_at_k(test_gt), r = metrics::recall_at_k(test_gt);
      e.metrics["test_HR" + suffix] = metrics::hit_rate(test_gt);
      e.metrics["test_NDCG" + suffix] = metrics::ndcg_at_k(test_gt).value;
      e.metrics["Precision" + suffix] = p;
      e.metrics["Recall" + suffix] = r;
      e.metrics["F1" + suffix] = metrics::f1(p, r);
      e.metrics["MRR" + suffix] = metrics::mrr(test_gt);
      e.metrics["MAP" + suffix] = metrics::map_at_k(test_gt);
      e.metrics["FailureRate" + suffix] = metrics::failure_rate(test_gt);
    }

    if (!is_mf()) return e;
    const auto& model = *v.embedding;
    std::vector<metrics::RatingPrediction> preds;
    for (const auto& [mu, bu] : users)
      for (const auto& x : split_.test.user_interactions(bu))
        preds.push_back({bu, x.item, model.predict_rating(mu, x.item), x.rating});
    if (!preds.empty()) {
      e.metrics["MAE"] = metrics::mae(preds);
      e.metrics["RMSE"] = metrics::rmse(preds);
    }
    if (with_predictions) {
      for (const auto& [mu, bu] : users)
        for (const auto t : targets)
          if (!split_.train.contains(bu, t)) e.target_predictions.push_back(model.predict_rating(mu, t));
      if (!e.target_predictions.empty())
        e.metrics["target_prediction"] =
            std::accumulate(e.target_predictions.begin(), e.target_predictions.end(), 0.0) /
            static_cast<double>(e.target_predictions.size());
    }
    return e;
  }

  SuspectReport detect() const {
    const auto& d = cfg_.defense;
    switch (d.kind) {
      case DefenseKind::kIdentity: {
        auto r = pca_varselect(attacked_, d.n_components, 0, d.rule);
        r.flag_count = 0;
        return r;
      }
      case DefenseKind::kOracle:
        return oracle_suspects(attacked_);
      case DefenseKind::kPca: {
        const int count = d.flag_count.value_or(params_.attack_size);
        auto r = pca_varselect(attacked_, d.n_components, count, d.rule);
        spdlog::info("pca-varselect flagged {} users", r.flagged.size());
        return r;
      }
      case DefenseKind::kNone:
        break;
    }
    throw ConfigError("no defense configured");
  }

  const ExperimentConfig& cfg_;
  Mode mode_;
  RunArtifacts art_;
  Split split_;
  std::size_t n_genuine_ = 0;
  AttackParams params_;
  InteractionDataset attacked_;
};

}  // namespace

fs::path run_directory(const ExperimentConfig& cfg) {
  auto name = sanitize(cfg.dataset.name) + "_" + sanitize(cfg.attack.name) + "_" + sanitize(cfg.model.name) + "_seed" +
              std::to_string(cfg.seed);
  if (cfg.defense.kind != DefenseKind::kNone) name += "_" + sanitize(cfg.defense.name);
  return cfg.output_dir / name;
}

RunArtifacts run_attack_eval(const ExperimentConfig& cfg) { return Pipeline(cfg, Mode::kAttack).execute(); }

RunArtifacts run_robustness_eval(const ExperimentConfig& cfg) { return Pipeline(cfg, Mode::kRobustness).execute(); }

RunArtifacts run_attack_only(const ExperimentConfig& cfg) { return Pipeline(cfg, Mode::kAttackOnly).execute(); }

void write_report(RunArtifacts& a) {
  const auto put = [&](const std::string& name, const std::string& text) {
    write_text(a.run_dir / name, text);
    if (std::find(a.files.begin(), a.files.end(), name) == a.files.end()) a.files.push_back(name);
  };
  put("report.json", to_json(a.report));
  put("report.txt", render_table(a.report));
  if (std::find(a.files.begin(), a.files.end(), "artifacts.json") == a.files.end()) a.files.push_back("artifacts.json");
  std::sort(a.files.begin(), a.files.end());

  json m;
  m["files"] = a.files;
  m["cache_keys"] = a.cache_keys;
  m["cache_hits"] = a.cache_hits;
  m["attacked_data"] = a.attacked_data ? json(a.attacked_data->string()) : json(nullptr);
  m["failed_stage"] = a.failed_stage ? json(*a.failed_stage) : json(nullptr);
  m["log"] = "run.log";
  m["config_sha256"] = sha256_hex(a.snapshot);
  m["stats"] = {{"global_mean", a.stats.global_mean},
                {"global_std", a.stats.global_std},
                {"avg_actions_per_user", a.stats.avg_actions_per_user},
                {"avg_actions_per_item", a.stats.avg_actions_per_item}};
  write_text(a.run_dir / "artifacts.json", m.dump(2) + "\n");
}

}  // namespace shillbench
