#include "shillbench/config.hpp"

#include <yaml-cpp/yaml.h>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace shillbench {
namespace {

constexpr const char* kDefaults = R"(
seed: 0
output_dir: runs
cache_dir: ""
config_dir: ""
section_files: true
dataset:
  name: dataset
  path: ~
  user_column: "0"
  item_column: "1"
  rating_column: "2"
  timestamp_column: ""
  delimiter: auto
  header: auto
  rating_min: ~
  rating_max: ~
  feedback: explicit
  implicit_threshold: ~
  split:
    strategy: ratio_random
    train_fraction: 0.8
    k: 1
attack:
  name: none
  size: ~
  filler_size: ~
  target_count: ~
  target_mode: ~
  targets: []
  intent: push
  seed: ~
  popular_fraction: 0.1
  popularity_rule: by_count
  segment_size: 10
  surrogate:
    model: mf_pointwise
    dim: 32
    learning_rate: 0.01
    l2: 0.0001
    inner_steps: 1
    outer_steps: 20
    outer_step_size: 0.2
    hypergradient: unrolled
    unroll_steps: 5
    unroll_learning_rate: 0
    cg_iterations: 30
    damping: 0.01
    unobserved_weight: 0.05
    pretrain_steps: 10
    adversarial_users: 200
    competitor_rank: 1
model:
  name: bpr
  dim: 32
  learning_rate: 0.01
  l2: 0.0001
  epochs: 50
  negatives: 1
  batch_size: 1
  layers: 2
  k_neighbors: 50
metrics:
  k: [10, 50]
defense:
  name: none
  n_components: 1
  flag_count: ~
  rule: highest
)";

std::string join_path(const std::string& parent, const std::string& key) {
  return parent.empty() ? key : parent + "." + key;
}

std::string valid_keys(const YAML::Node& map) {
  std::string out;
  for (const auto& kv : map) out += (out.empty() ? "" : ", ") + kv.first.as<std::string>();
  return out;
}

/// Overlays `over` onto `base` in place; only keys present in `schema` are allowed.
void merge(YAML::Node base, const YAML::Node& over, const YAML::Node& schema, const std::string& path) {
  if (!over || over.IsNull()) return;
  if (!over.IsMap()) throw ConfigError((path.empty() ? std::string("top level") : path) + ": expected a mapping");
  for (const auto& kv : over) {
    const auto key = kv.first.as<std::string>();
    const auto here = join_path(path, key);
    const auto sub_schema = schema[key];
    if (!sub_schema) throw ConfigError("unknown key '" + here + "'; valid keys: " + valid_keys(schema));
    if (sub_schema.IsMap()) {
      if (!kv.second.IsMap() && !kv.second.IsNull()) throw ConfigError(here + ": expected a mapping");
      merge(base[key], kv.second, sub_schema, here);
    } else {
      if (kv.second.IsMap()) throw ConfigError(here + ": expected a value, got a mapping");
      base[key] = YAML::Clone(kv.second);
    }
  }
}

YAML::Node parse_document(const std::string& text, const std::string& origin) {
  try {
    return YAML::Load(text);
  } catch (const YAML::Exception& e) {
    throw ConfigError(origin + ": " + e.what());
  }
}

YAML::Node overrides_node(const std::vector<std::string>& overrides) {
  YAML::Node root(YAML::NodeType::Map);
  for (const auto& o : overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("override '" + o + "' is not key=value");
    const auto key = o.substr(0, eq);
    const auto value = parse_document(o.substr(eq + 1), "override " + key);
    std::vector<std::string> parts;
    std::stringstream ss(key);
    for (std::string part; std::getline(ss, part, '.');) {
      if (part.empty()) throw ConfigError("override '" + o + "' has an empty key segment");
      parts.push_back(part);
    }
    YAML::Node cur = root;
    for (std::size_t k = 0; k + 1 < parts.size(); ++k) {
      if (!cur[parts[k]] || !cur[parts[k]].IsMap()) cur[parts[k]] = YAML::Node(YAML::NodeType::Map);
      cur.reset(cur[parts[k]]);
    }
    cur[parts.back()] = value.IsNull() && o.substr(eq + 1).empty() ? YAML::Node(std::string()) : value;
  }
  return root;
}

std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw ConfigError("cannot read config file " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Typed access with the field path in every error.
class Reader {
 public:
  explicit Reader(YAML::Node root) : root_(std::move(root)) {}

  YAML::Node node(const std::string& path) const {
    YAML::Node cur = root_;
    std::stringstream ss(path);
    for (std::string part; std::getline(ss, part, '.');) cur.reset(cur[part]);
    return cur;
  }

  template <typename T>
  T get(const std::string& path, const char* type) const {
    const auto n = node(path);
    if (!n || n.IsNull()) throw ConfigError("missing required field " + path);
    try {
      return n.as<T>();
    } catch (const YAML::Exception&) {
      throw ConfigError(path + ": expected " + type + ", got '" + describe(n) + "'");
    }
  }

  template <typename T>
  std::optional<T> optional(const std::string& path, const char* type) const {
    const auto n = node(path);
    if (!n || n.IsNull()) return std::nullopt;
    return get<T>(path, type);
  }

  template <typename E>
  E choice(const std::string& path, std::initializer_list<std::pair<const char*, E>> options) const {
    const auto v = get<std::string>(path, "string");
    std::string names;
    for (const auto& [name, value] : options) {
      if (v == name) return value;
      names += (names.empty() ? "" : ", ") + std::string(name);
    }
    throw ConfigError(path + ": unknown value '" + v + "'; expected one of: " + names);
  }

  template <typename T>
  std::vector<T> list(const std::string& path, const char* type) const {
    const auto n = node(path);
    if (!n || n.IsNull()) return {};
    if (!n.IsSequence()) throw ConfigError(path + ": expected a list of " + type);
    std::vector<T> out;
    for (std::size_t k = 0; k < n.size(); ++k) {
      try {
        out.push_back(n[k].as<T>());
      } catch (const YAML::Exception&) {
        throw ConfigError(path + "[" + std::to_string(k) + "]: expected " + type + ", got '" + describe(n[k]) + "'");
      }
    }
    return out;
  }

 private:
  static std::string describe(const YAML::Node& n) {
    if (n.IsScalar()) return n.Scalar();
    if (n.IsSequence()) return "a list";
    if (n.IsMap()) return "a mapping";
    return "null";
  }
  YAML::Node root_;
};

// Relative paths are taken relative to the file that declares them.
void anchor(YAML::Node map, const char* key, const std::filesystem::path& dir) {
  if (!map || !map.IsMap()) return;
  const auto n = map[key];
  if (!n || !n.IsScalar() || n.Scalar().empty()) return;
  const std::filesystem::path p(n.Scalar());
  if (p.is_relative()) map[key] = (dir / p).lexically_normal().string();
}

std::string section_name(const YAML::Node& root, const char* section) {
  const auto n = root[section]["name"];
  if (!n || !n.IsScalar()) throw ConfigError(std::string(section) + ".name: expected string");
  return n.Scalar();
}

ExperimentConfig extract(const YAML::Node& root) {
  const Reader r(root);
  ExperimentConfig c;
  c.seed = r.get<std::uint64_t>("seed", "unsigned integer");
  c.output_dir = r.get<std::string>("output_dir", "string");
  c.cache_dir = r.get<std::string>("cache_dir", "string");
  c.config_dir = r.get<std::string>("config_dir", "string");
  c.section_files = r.get<bool>("section_files", "boolean");

  auto& d = c.dataset;
  d.name = r.get<std::string>("dataset.name", "string");
  d.path = r.get<std::string>("dataset.path", "string");
  d.schema.user = r.get<std::string>("dataset.user_column", "string");
  d.schema.item = r.get<std::string>("dataset.item_column", "string");
  d.schema.rating = r.get<std::string>("dataset.rating_column", "string");
  const auto ts = r.get<std::string>("dataset.timestamp_column", "string");
  if (!ts.empty()) d.schema.timestamp = ts;
  d.schema.delimiter = r.choice<LoadSchema::Delimiter>(
      "dataset.delimiter",
      {{"auto", LoadSchema::Delimiter::kAuto}, {"tab", LoadSchema::Delimiter::kTab}, {"comma", LoadSchema::Delimiter::kComma}});
  d.schema.header = r.choice<LoadSchema::Header>(
      "dataset.header",
      {{"auto", LoadSchema::Header::kAuto}, {"present", LoadSchema::Header::kPresent}, {"absent", LoadSchema::Header::kAbsent}});
  const auto rmin = r.optional<double>("dataset.rating_min", "number");
  const auto rmax = r.optional<double>("dataset.rating_max", "number");
  if (rmin.has_value() != rmax.has_value()) throw ConfigError("dataset.rating_min and dataset.rating_max go together");
  if (rmin) d.schema.bounds = RatingBounds{*rmin, *rmax};
  d.feedback = r.choice<FeedbackKind>("dataset.feedback",
                                      {{"explicit", FeedbackKind::kExplicit}, {"implicit", FeedbackKind::kImplicit}});
  d.implicit_threshold = r.optional<double>("dataset.implicit_threshold", "number");
  d.split.strategy = r.choice<SplitSpec::Strategy>(
      "dataset.split.strategy",
      {{"ratio_random", SplitSpec::Strategy::kRatioRandom}, {"leave_k_out", SplitSpec::Strategy::kLeaveKOut}});
  d.split.train_fraction = r.get<double>("dataset.split.train_fraction", "number");
  d.split.k = r.get<int>("dataset.split.k", "integer");
  d.split.seed = c.seed;
  if (!(d.split.train_fraction > 0.0 && d.split.train_fraction < 1.0))
    throw ConfigError("dataset.split.train_fraction: must be in (0, 1)");
  if (d.split.k < 1) throw ConfigError("dataset.split.k: must be at least 1");

  auto& a = c.attack;
  a.name = r.get<std::string>("attack.name", "string");
  a.kind = r.choice<AttackKind>("attack.name", {{"none", AttackKind::kNone},
                                                {"random", AttackKind::kRandom},
                                                {"average", AttackKind::kAverage},
                                                {"bandwagon", AttackKind::kBandwagon},
                                                {"lovehate", AttackKind::kLoveHate},
                                                {"segment", AttackKind::kSegment},
                                                {"single_level", AttackKind::kSingleLevel},
                                                {"bilevel", AttackKind::kBilevel}});
  a.size = r.optional<int>("attack.size", "integer");
  a.filler_size = r.optional<int>("attack.filler_size", "integer");
  a.target_count = r.optional<int>("attack.target_count", "integer");
  if (r.optional<std::string>("attack.target_mode", "string"))
    a.target_mode = r.choice<TargetMode>("attack.target_mode", {{"popular", TargetMode::kPopular}, {"random", TargetMode::kRandom}});
  a.targets = r.list<std::string>("attack.targets", "string");
  a.intent = r.choice<Intent>("attack.intent", {{"push", Intent::kPush}, {"nuke", Intent::kNuke}});
  a.seed = r.optional<std::uint64_t>("attack.seed", "unsigned integer");
  a.popular_fraction = r.get<double>("attack.popular_fraction", "number");
  a.popularity_rule = r.choice<PopularityRule>(
      "attack.popularity_rule", {{"by_count", PopularityRule::kByCount}, {"by_mean_rating", PopularityRule::kByMeanRating}});
  a.segment_size = r.get<int>("attack.segment_size", "integer");
  auto& s = a.surrogate;
  s.model = r.choice<SurrogateModel>("attack.surrogate.model",
                                     {{"mf_pointwise", SurrogateModel::kMfPointwise}, {"bpr_mf", SurrogateModel::kBprMf}});
  s.train_config.dim = r.get<int>("attack.surrogate.dim", "integer");
  s.train_config.learning_rate = r.get<double>("attack.surrogate.learning_rate", "number");
  s.train_config.l2 = r.get<double>("attack.surrogate.l2", "number");
  s.inner_steps = r.get<int>("attack.surrogate.inner_steps", "integer");
  s.outer_steps = r.get<int>("attack.surrogate.outer_steps", "integer");
  s.outer_step_size = r.get<double>("attack.surrogate.outer_step_size", "number");
  s.hypergradient = r.choice<SurrogateSpec::Hypergradient>(
      "attack.surrogate.hypergradient",
      {{"unrolled", SurrogateSpec::Hypergradient::kUnrolled}, {"implicit", SurrogateSpec::Hypergradient::kImplicit}});
  s.unroll_steps = r.get<int>("attack.surrogate.unroll_steps", "integer");
  s.unroll_learning_rate = r.get<double>("attack.surrogate.unroll_learning_rate", "number");
  s.cg_iterations = r.get<int>("attack.surrogate.cg_iterations", "integer");
  s.damping = r.get<double>("attack.surrogate.damping", "number");
  s.unobserved_weight = r.get<double>("attack.surrogate.unobserved_weight", "number");
  s.pretrain_steps = r.get<int>("attack.surrogate.pretrain_steps", "integer");
  s.adversarial_users = r.get<int>("attack.surrogate.adversarial_users", "integer");
  s.competitor_rank = r.get<int>("attack.surrogate.competitor_rank", "integer");

  auto& m = c.model;
  m.name = r.get<std::string>("model.name", "string");
  m.kind = r.choice<ModelKind>("model.name", {{"mf", ModelKind::kMf},
                                              {"bpr", ModelKind::kBpr},
                                              {"lightgcn", ModelKind::kLightGcn},
                                              {"itemknn", ModelKind::kItemKnn}});
  m.train.dim = r.get<int>("model.dim", "integer");
  m.train.learning_rate = r.get<double>("model.learning_rate", "number");
  m.train.l2 = r.get<double>("model.l2", "number");
  m.train.epochs = r.get<int>("model.epochs", "integer");
  m.train.negatives_per_positive = r.get<int>("model.negatives", "integer");
  m.train.batch_size = r.get<int>("model.batch_size", "integer");
  m.train.seed = c.seed;
  if (m.kind == ModelKind::kMf) {
    m.train.task = Task::kRating;
    m.train.loss = Loss::kSquaredPointwise;
  }
  m.layers = r.get<int>("model.layers", "integer");
  m.k_neighbors = r.get<int>("model.k_neighbors", "integer");
  try {
    m.train.validate();
  } catch (const TrainingError& e) {
    throw ConfigError(std::string("model: ") + e.what());
  }

  c.metrics.k = r.list<std::size_t>("metrics.k", "positive integer");
  if (c.metrics.k.empty()) throw ConfigError("metrics.k: needs at least one cutoff");
  for (const auto k : c.metrics.k)
    if (k == 0) throw ConfigError("metrics.k: cutoffs must be positive");

  auto& df = c.defense;
  df.name = r.get<std::string>("defense.name", "string");
  df.kind = r.choice<DefenseKind>("defense.name", {{"none", DefenseKind::kNone},
                                                   {"identity", DefenseKind::kIdentity},
                                                   {"oracle", DefenseKind::kOracle},
                                                   {"pca", DefenseKind::kPca}});
  df.n_components = r.get<int>("defense.n_components", "integer");
  df.flag_count = r.optional<int>("defense.flag_count", "integer");
  df.rule = r.choice<SuspicionRule>("defense.rule",
                                    {{"highest", SuspicionRule::kHighestLoading}, {"lowest", SuspicionRule::kLowestLoading}});
  return c;
}

ExperimentConfig resolve(const YAML::Node& top, const std::filesystem::path& base_dir,
                         const std::vector<std::string>& overrides) {
  const auto schema = YAML::Load(kDefaults);
  const auto over = overrides_node(overrides);

  YAML::Node names = YAML::Clone(schema);
  merge(names, top, schema, "");
  merge(names, over, schema, "");

  YAML::Node merged = YAML::Clone(schema);
  YAML::Node top_copy = YAML::Clone(top);
  anchor(top_copy, "output_dir", base_dir);
  anchor(top_copy, "cache_dir", base_dir);
  if (top_copy && top_copy.IsMap()) anchor(top_copy["dataset"], "path", base_dir);
  merge(merged, top_copy, schema, "");
  if (names["section_files"].as<bool>(true)) {
    const auto dir_text = names["config_dir"].IsScalar() ? names["config_dir"].Scalar() : std::string();
    const std::filesystem::path dir = dir_text.empty() ? base_dir : base_dir / dir_text;
    for (const char* section : {"dataset", "model", "attack"}) {
      const auto file = dir / section / (section_name(names, section) + ".yaml");
      if (!std::filesystem::exists(file)) continue;
      auto doc = parse_document(read_file(file), file.string());
      if (std::string(section) == "dataset") anchor(doc, "path", file.parent_path());
      merge(merged[section], doc, schema[section], section);
    }
  }
  merge(merged, over, schema, "");
  auto c = extract(merged);
  // The default output_dir is also anchored, so snapshots carry absolute paths.
  if (c.output_dir.is_relative()) c.output_dir = (base_dir / c.output_dir).lexically_normal();
  return c;
}

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

template <typename T>
void emit_optional(YAML::Emitter& out, const char* key, const std::optional<T>& v) {
  out << YAML::Key << key << YAML::Value;
  if (v)
    out << *v;
  else
    out << YAML::Null;
}

}  // namespace

ExperimentConfig load_config(const std::filesystem::path& top_level, const std::vector<std::string>& overrides) {
  const auto text = read_file(top_level);
  return resolve(parse_document(text, top_level.string()), top_level.parent_path(), overrides);
}

ExperimentConfig load_config_text(const std::string& top_level_yaml, const std::filesystem::path& config_dir,
                                  const std::vector<std::string>& overrides) {
  return resolve(parse_document(top_level_yaml, "config"), config_dir, overrides);
}

std::string resolved_snapshot(const ExperimentConfig& c) {
  YAML::Emitter out;
  out << YAML::BeginMap;
  out << YAML::Key << "seed" << YAML::Value << c.seed;
  out << YAML::Key << "output_dir" << YAML::Value << c.output_dir.string();
  out << YAML::Key << "cache_dir" << YAML::Value << c.cache_dir.string();
  out << YAML::Key << "config_dir" << YAML::Value << c.config_dir.string();
  out << YAML::Key << "section_files" << YAML::Value << false;

  const auto& d = c.dataset;
  out << YAML::Key << "dataset" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "name" << YAML::Value << d.name;
  out << YAML::Key << "path" << YAML::Value << d.path.string();
  out << YAML::Key << "user_column" << YAML::Value << YAML::DoubleQuoted << d.schema.user;
  out << YAML::Key << "item_column" << YAML::Value << YAML::DoubleQuoted << d.schema.item;
  out << YAML::Key << "rating_column" << YAML::Value << YAML::DoubleQuoted << d.schema.rating;
  out << YAML::Key << "timestamp_column" << YAML::Value << YAML::DoubleQuoted << d.schema.timestamp.value_or("");
  const char* delim[] = {"auto", "tab", "comma"};
  out << YAML::Key << "delimiter" << YAML::Value << delim[static_cast<int>(d.schema.delimiter)];
  const char* header[] = {"auto", "present", "absent"};
  out << YAML::Key << "header" << YAML::Value << header[static_cast<int>(d.schema.header)];
  std::optional<std::string> rmin, rmax;
  if (d.schema.bounds) {
    rmin = num(d.schema.bounds->min);
    rmax = num(d.schema.bounds->max);
  }
  emit_optional(out, "rating_min", rmin);
  emit_optional(out, "rating_max", rmax);
  out << YAML::Key << "feedback" << YAML::Value << (d.feedback == FeedbackKind::kExplicit ? "explicit" : "implicit");
  emit_optional(out, "implicit_threshold",
                d.implicit_threshold ? std::optional<std::string>(num(*d.implicit_threshold)) : std::nullopt);
  out << YAML::Key << "split" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "strategy" << YAML::Value
      << (d.split.strategy == SplitSpec::Strategy::kRatioRandom ? "ratio_random" : "leave_k_out");
  out << YAML::Key << "train_fraction" << YAML::Value << num(d.split.train_fraction);
  out << YAML::Key << "k" << YAML::Value << d.split.k;
  out << YAML::EndMap << YAML::EndMap;

  const auto& a = c.attack;
  out << YAML::Key << "attack" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "name" << YAML::Value << a.name;
  emit_optional(out, "size", a.size);
  emit_optional(out, "filler_size", a.filler_size);
  emit_optional(out, "target_count", a.target_count);
  emit_optional(out, "target_mode",
                a.target_mode ? std::optional<std::string>(*a.target_mode == TargetMode::kPopular ? "popular" : "random")
                              : std::nullopt);
  out << YAML::Key << "targets" << YAML::Value << YAML::Flow << YAML::BeginSeq;
  for (const auto& t : a.targets) out << YAML::DoubleQuoted << t;
  out << YAML::EndSeq;
  out << YAML::Key << "intent" << YAML::Value << (a.intent == Intent::kPush ? "push" : "nuke");
  emit_optional(out, "seed", a.seed);
  out << YAML::Key << "popular_fraction" << YAML::Value << num(a.popular_fraction);
  out << YAML::Key << "popularity_rule" << YAML::Value
      << (a.popularity_rule == PopularityRule::kByCount ? "by_count" : "by_mean_rating");
  out << YAML::Key << "segment_size" << YAML::Value << a.segment_size;
  const auto& s = a.surrogate;
  out << YAML::Key << "surrogate" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "model" << YAML::Value << (s.model == SurrogateModel::kMfPointwise ? "mf_pointwise" : "bpr_mf");
  out << YAML::Key << "dim" << YAML::Value << s.train_config.dim;
  out << YAML::Key << "learning_rate" << YAML::Value << num(s.train_config.learning_rate);
  out << YAML::Key << "l2" << YAML::Value << num(s.train_config.l2);
  out << YAML::Key << "inner_steps" << YAML::Value << s.inner_steps;
  out << YAML::Key << "outer_steps" << YAML::Value << s.outer_steps;
  out << YAML::Key << "outer_step_size" << YAML::Value << num(s.outer_step_size);
  out << YAML::Key << "hypergradient" << YAML::Value
      << (s.hypergradient == SurrogateSpec::Hypergradient::kImplicit ? "implicit" : "unrolled");
  out << YAML::Key << "unroll_steps" << YAML::Value << s.unroll_steps;
  out << YAML::Key << "unroll_learning_rate" << YAML::Value << num(s.unroll_learning_rate);
  out << YAML::Key << "cg_iterations" << YAML::Value << s.cg_iterations;
  out << YAML::Key << "damping" << YAML::Value << num(s.damping);
  out << YAML::Key << "unobserved_weight" << YAML::Value << num(s.unobserved_weight);
  out << YAML::Key << "pretrain_steps" << YAML::Value << s.pretrain_steps;
  out << YAML::Key << "adversarial_users" << YAML::Value << s.adversarial_users;
  out << YAML::Key << "competitor_rank" << YAML::Value << s.competitor_rank;
  out << YAML::EndMap << YAML::EndMap;

  const auto& m = c.model;
  out << YAML::Key << "model" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "name" << YAML::Value << m.name;
  out << YAML::Key << "dim" << YAML::Value << m.train.dim;
  out << YAML::Key << "learning_rate" << YAML::Value << num(m.train.learning_rate);
  out << YAML::Key << "l2" << YAML::Value << num(m.train.l2);
  out << YAML::Key << "epochs" << YAML::Value << m.train.epochs;
  out << YAML::Key << "negatives" << YAML::Value << m.train.negatives_per_positive;
  out << YAML::Key << "batch_size" << YAML::Value << m.train.batch_size;
  out << YAML::Key << "layers" << YAML::Value << m.layers;
  out << YAML::Key << "k_neighbors" << YAML::Value << m.k_neighbors;
  out << YAML::EndMap;

  out << YAML::Key << "metrics" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "k" << YAML::Value << YAML::Flow << YAML::BeginSeq;
  for (const auto k : c.metrics.k) out << k;
  out << YAML::EndSeq << YAML::EndMap;

  const auto& df = c.defense;
  out << YAML::Key << "defense" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "name" << YAML::Value << df.name;
  out << YAML::Key << "n_components" << YAML::Value << df.n_components;
  emit_optional(out, "flag_count", df.flag_count);
  out << YAML::Key << "rule" << YAML::Value << (df.rule == SuspicionRule::kHighestLoading ? "highest" : "lowest");
  out << YAML::EndMap;

  out << YAML::EndMap;
  return std::string(out.c_str()) + "\n";
}

std::filesystem::path cache_root(const ExperimentConfig& cfg) {
  if (!cfg.cache_dir.empty()) return cfg.cache_dir;
  if (const char* env = std::getenv(kCacheEnvVar); env && *env) return env;
  return cfg.output_dir / "cache";
}

}  // namespace shillbench
