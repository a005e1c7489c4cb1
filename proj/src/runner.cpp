#include "fairgnn/runner.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>
#include <thread>
#include <tuple>

#include <json.hpp>

#include "fairgnn/attacks.hpp"
#include "fairgnn/error.hpp"

namespace fairgnn {

using nlohmann::json;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Read-only view of a config node that knows its own key path.
class Node {
 public:
  Node(const json& j, std::string path) : j_(j), path_(std::move(path)) {}

  const std::string& path() const { return path_; }
  const json& raw() const { return j_; }

  std::string child_path(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  void expect_object() const {
    if (!j_.is_object()) throw ConfigError(path_.empty() ? "<root>" : path_, "expected an object");
  }
  void only_keys(std::initializer_list<const char*> allowed) const {
    expect_object();
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      bool ok = false;
      for (const char* a : allowed) ok = ok || it.key() == a;
      if (!ok) throw ConfigError(child_path(it.key()), "unknown key");
    }
  }
  bool has(const std::string& key) const { return j_.is_object() && j_.contains(key); }
  Node at(const std::string& key) const {
    if (!has(key)) throw ConfigError(child_path(key), "required key missing");
    return Node(j_.at(key), child_path(key));
  }
  Node index(std::size_t i) const {
    return Node(j_.at(i), path_ + "[" + std::to_string(i) + "]");
  }
  std::size_t array_size() const {
    if (!j_.is_array()) throw ConfigError(path_, "expected an array");
    return j_.size();
  }

  double number() const {
    if (!j_.is_number()) throw ConfigError(path_, "expected a number");
    return j_.get<double>();
  }
  long long integer() const {
    if (!j_.is_number_integer()) throw ConfigError(path_, "expected an integer");
    return j_.get<long long>();
  }
  std::uint64_t unsigned_integer() const {
    const long long v = integer();
    if (v < 0) throw ConfigError(path_, "must be >= 0");
    return static_cast<std::uint64_t>(v);
  }
  bool boolean() const {
    if (!j_.is_boolean()) throw ConfigError(path_, "expected true or false");
    return j_.get<bool>();
  }
  std::string string() const {
    if (!j_.is_string()) throw ConfigError(path_, "expected a string");
    return j_.get<std::string>();
  }
  std::vector<std::string> strings() const {
    std::vector<std::string> out;
    for (std::size_t i = 0; i < array_size(); ++i) out.push_back(index(i).string());
    return out;
  }
  /// A number or a non-empty array of distinct numbers, each finite and >= 0.
  std::vector<double> grid() const {
    std::vector<double> out;
    if (j_.is_array()) {
      if (j_.empty()) throw ConfigError(path_, "grid must not be empty");
      for (std::size_t i = 0; i < j_.size(); ++i) out.push_back(index(i).number());
    } else {
      out.push_back(number());
    }
    for (double v : out)
      if (!std::isfinite(v) || v < 0.0) throw ConfigError(path_, "values must be finite and >= 0");
    std::vector<double> sorted = out;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
      throw ConfigError(path_, "grid values must be distinct");
    return out;
  }

  double number_in(double lo, double hi, bool hi_open = false) const {
    const double v = number();
    if (!(v >= lo && (hi_open ? v < hi : v <= hi)))
      throw ConfigError(path_, "must be in [" + format_number(lo) + ", " + format_number(hi) +
                                   (hi_open ? ")" : "]"));
    return v;
  }

 private:
  const json& j_;
  std::string path_;
};

json parse_strict(const std::string& text) {
  std::vector<std::set<std::string>> keys;
  std::vector<std::string> names;
  json::parser_callback_t cb = [&](int, json::parse_event_t ev, json& parsed) {
    if (ev == json::parse_event_t::object_start) {
      keys.emplace_back();
    } else if (ev == json::parse_event_t::object_end) {
      keys.pop_back();
    } else if (ev == json::parse_event_t::key) {
      const std::string k = parsed.get<std::string>();
      if (!keys.back().insert(k).second) throw ConfigError(k, "duplicate key");
    }
    return true;
  };
  try {
    return json::parse(text, cb);
  } catch (const json::parse_error& e) {
    throw ConfigError("<document>", std::string("malformed JSON: ") + e.what());
  }
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  std::filesystem::path path(p);
  if (path.is_relative() && !base.empty()) return base / path;
  return path;
}

RoleColumn parse_role(const Node& n) {
  n.only_keys({"column", "rule"});
  RoleColumn r;
  r.column = n.at("column").string();
  if (n.has("rule")) {
    try {
      r.rule = DerivationRule::parse(n.at("rule").string());
    } catch (const ConfigError&) {
      throw;
    } catch (const Error& e) {
      throw ConfigError(n.child_path("rule"), e.what());
    }
  }
  return r;
}

SyntheticSpec parse_synthetic(const Node& n, std::uint64_t& seed) {
  n.only_keys({"n_nodes", "n_groups", "intra_group_edge_prob", "inter_group_edge_prob",
               "label_group_correlation", "feature_dim", "feature_noise_sd", "feature_scale",
               "n_privacy_groups", "privacy_feature_scale", "seed"});
  SyntheticSpec s;
  if (n.has("n_nodes")) s.n_nodes = n.at("n_nodes").unsigned_integer();
  if (n.has("n_groups")) s.n_groups = static_cast<int>(n.at("n_groups").integer());
  if (n.has("intra_group_edge_prob")) s.intra_group_edge_prob = n.at("intra_group_edge_prob").number_in(0, 1);
  if (n.has("inter_group_edge_prob")) s.inter_group_edge_prob = n.at("inter_group_edge_prob").number_in(0, 1);
  if (n.has("label_group_correlation"))
    s.label_group_correlation = n.at("label_group_correlation").number_in(0, 1);
  if (n.has("feature_dim")) s.feature_dim = n.at("feature_dim").unsigned_integer();
  if (n.has("feature_noise_sd")) s.feature_noise_sd = n.at("feature_noise_sd").number();
  if (n.has("feature_scale")) s.feature_scale = n.at("feature_scale").number();
  if (n.has("n_privacy_groups")) s.n_privacy_groups = static_cast<int>(n.at("n_privacy_groups").integer());
  if (n.has("privacy_feature_scale")) s.privacy_feature_scale = n.at("privacy_feature_scale").number();
  if (n.has("seed")) seed = n.at("seed").unsigned_integer();
  try {
    s.validate();
  } catch (const Error& e) {
    throw ConfigError(n.path(), e.what());
  }
  return s;
}

DatasetRef parse_dataset(const Node& n, const std::filesystem::path& base) {
  n.only_keys({"name", "synthetic", "nodes", "edges", "schema", "region"});
  DatasetRef d;
  d.name = n.at("name").string();
  if (d.name.empty() ||
      !std::all_of(d.name.begin(), d.name.end(), [](char c) {
        return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '.';
      }))
    throw ConfigError(n.child_path("name"), "must be non-empty and use only [A-Za-z0-9_.-]");
  if (n.has("synthetic")) {
    for (const char* k : {"nodes", "edges", "schema", "region"})
      if (n.has(k)) throw ConfigError(n.child_path(k), "not allowed together with synthetic");
    d.synthetic = parse_synthetic(n.at("synthetic"), d.synthetic_seed);
    return d;
  }
  d.nodes_file = resolve(base, n.at("nodes").string());
  d.edges_file = resolve(base, n.at("edges").string());
  const Node s = n.at("schema");
  s.only_keys({"id_column", "label", "fairness", "privacy", "features", "categorical", "exclude",
               "edges_header"});
  if (s.has("id_column")) d.schema.id_column = s.at("id_column").string();
  d.schema.label = parse_role(s.at("label"));
  d.schema.fairness = parse_role(s.at("fairness"));
  if (s.has("privacy")) d.schema.privacy = parse_role(s.at("privacy"));
  if (s.has("features")) d.schema.features = s.at("features").strings();
  if (s.has("categorical")) d.schema.categorical = s.at("categorical").strings();
  if (s.has("exclude")) d.schema.exclude = s.at("exclude").strings();
  if (s.has("edges_header")) d.schema.edges_header = s.at("edges_header").boolean();
  if (n.has("region")) {
    const Node r = n.at("region");
    r.only_keys({"column", "prefix"});
    d.region = RegionFilter{r.at("column").string(), r.at("prefix").string()};
  }
  return d;
}

MethodGrid parse_method_entry(const Node& n) {
  n.only_keys({"method", "params"});
  MethodGrid g;
  try {
    g.method = parse_method(n.at("method").string());
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(n.child_path("method"), e.what());
  }
  std::vector<std::string> allowed, required;
  switch (g.method) {
    case Method::none:
    case Method::embed_proj:
    case Method::edge_weight: break;
    case Method::adv_debias:
    case Method::ew_ad: allowed = required = {"alpha", "beta"}; break;
    case Method::fair_learn:
      allowed = {"alpha", "mode"};
      required = {"alpha"};
      break;
    case Method::ew_flpar: allowed = required = {"alpha"}; break;
    case Method::filter: allowed = required = {"lambda"}; break;
  }
  if (!n.has("params")) {
    if (!required.empty()) throw ConfigError(n.child_path("params"), "required key missing");
    return g;
  }
  const Node p = n.at("params");
  p.expect_object();
  for (auto it = p.raw().begin(); it != p.raw().end(); ++it)
    if (std::find(allowed.begin(), allowed.end(), it.key()) == allowed.end())
      throw ConfigError(p.child_path(it.key()), "not a parameter of " + to_string(g.method));
  for (const auto& r : required)
    if (!p.has(r)) throw ConfigError(p.child_path(r), "required key missing");
  if (p.has("alpha")) g.alpha = p.at("alpha").grid();
  if (p.has("beta")) g.beta = p.at("beta").grid();
  if (p.has("lambda")) g.lambda = p.at("lambda").grid();
  if (p.has("mode")) {
    const Node m = p.at("mode");
    std::vector<std::string> names = m.raw().is_array() ? m.strings() : std::vector{m.string()};
    if (names.empty()) throw ConfigError(m.path(), "grid must not be empty");
    for (const auto& s : names) {
      try {
        g.mode.push_back(parse_fair_mode(s));
      } catch (const Error& e) {
        throw ConfigError(m.path(), e.what());
      }
    }
    std::set<FairMode> uniq(g.mode.begin(), g.mode.end());
    if (uniq.size() != g.mode.size()) throw ConfigError(m.path(), "grid values must be distinct");
  }
  return g;
}

TrainingConfig parse_training(const Node& n) {
  n.only_keys({"lr", "epochs", "weight_decay", "hidden", "n_layers", "dropout", "gat_heads"});
  TrainingConfig t;
  if (n.has("lr")) {
    t.lr = n.at("lr").number();
    if (!(t.lr > 0.0)) throw ConfigError(n.child_path("lr"), "must be > 0");
  }
  if (n.has("epochs")) t.epochs = static_cast<int>(n.at("epochs").unsigned_integer());
  if (n.has("weight_decay")) {
    t.weight_decay = n.at("weight_decay").number();
    if (!(t.weight_decay >= 0.0)) throw ConfigError(n.child_path("weight_decay"), "must be >= 0");
  }
  if (n.has("hidden")) {
    t.hidden = n.at("hidden").unsigned_integer();
    if (t.hidden == 0) throw ConfigError(n.child_path("hidden"), "must be > 0");
  }
  if (n.has("n_layers")) {
    t.n_layers = static_cast<int>(n.at("n_layers").unsigned_integer());
    if (t.n_layers < 1) throw ConfigError(n.child_path("n_layers"), "must be >= 1");
  }
  if (n.has("dropout")) t.dropout = n.at("dropout").number_in(0.0, 1.0, true);
  if (n.has("gat_heads")) {
    t.gat_heads = static_cast<int>(n.at("gat_heads").unsigned_integer());
    if (t.gat_heads < 1) throw ConfigError(n.child_path("gat_heads"), "must be >= 1");
  }
  return t;
}

bool uses_mode(Method m) { return m == Method::fair_learn || m == Method::ew_flpar; }

std::string mode_string(const InterventionParams& p) {
  return uses_mode(p.method) ? to_string(p.mode) : std::string();
}

}  // namespace

std::vector<InterventionParams> MethodGrid::points() const {
  const std::vector<double> a = alpha.empty() ? std::vector<double>{0.0} : alpha;
  const std::vector<double> b = beta.empty() ? std::vector<double>{0.0} : beta;
  const std::vector<double> l = lambda.empty() ? std::vector<double>{0.0} : lambda;
  const std::vector<FairMode> m = mode.empty() ? std::vector<FairMode>{FairMode::par} : mode;
  std::vector<InterventionParams> out;
  for (double av : a)
    for (double bv : b)
      for (double lv : l)
        for (FairMode mv : m) {
          InterventionParams p;
          p.method = method;
          p.alpha = av;
          p.beta = bv;
          p.lambda = lv;
          p.mode = mv;
          out.push_back(p);
        }
  return out;
}

std::size_t ExperimentPlan::expected_runs() const {
  std::size_t per_seed_model = 1;  // baseline
  for (const MethodGrid& g : methods)
    if (g.method != Method::none) per_seed_model += g.points().size();
  return per_seed_model * models.size() * seeds.size();
}

ExperimentPlan parse_config(const std::string& text, const std::filesystem::path& base_dir) {
  const json doc = parse_strict(text);
  const Node root(doc, "");
  root.only_keys({"schema_version", "dataset", "models", "methods", "seeds", "fix_split",
                  "split_seed", "training", "workers", "output_dir"});
  ExperimentPlan plan;
  plan.schema_version = static_cast<int>(root.at("schema_version").integer());
  if (plan.schema_version != kSchemaVersion)
    throw ConfigError("schema_version", "unsupported version " + std::to_string(plan.schema_version) +
                                            " (expected " + std::to_string(kSchemaVersion) + ")");
  plan.dataset = parse_dataset(root.at("dataset"), base_dir);

  const Node models = root.at("models");
  for (std::size_t i = 0; i < models.array_size(); ++i) {
    const Node m = models.index(i);
    try {
      plan.models.push_back(parse_model_kind(m.string()));
    } catch (const ConfigError&) {
      throw;
    } catch (const Error& e) {
      throw ConfigError(m.path(), e.what());
    }
  }
  if (plan.models.empty()) throw ConfigError("models", "must not be empty");
  if (std::set<ModelKind>(plan.models.begin(), plan.models.end()).size() != plan.models.size())
    throw ConfigError("models", "model kinds must be distinct");

  if (root.has("methods")) {
    const Node methods = root.at("methods");
    std::set<Method> seen;
    for (std::size_t i = 0; i < methods.array_size(); ++i) {
      MethodGrid g = parse_method_entry(methods.index(i));
      if (!seen.insert(g.method).second)
        throw ConfigError(methods.index(i).child_path("method"), "method listed twice");
      if (g.method != Method::none) plan.methods.push_back(std::move(g));
    }
  }

  const Node seeds = root.at("seeds");
  for (std::size_t i = 0; i < seeds.array_size(); ++i) plan.seeds.push_back(seeds.index(i).unsigned_integer());
  if (plan.seeds.empty()) throw ConfigError("seeds", "must not be empty");
  if (std::set<std::uint64_t>(plan.seeds.begin(), plan.seeds.end()).size() != plan.seeds.size())
    throw ConfigError("seeds", "seeds must be distinct");

  if (root.has("fix_split")) plan.fix_split = root.at("fix_split").boolean();
  if (root.has("split_seed")) plan.split_seed = root.at("split_seed").unsigned_integer();
  if (root.has("training")) plan.training = parse_training(root.at("training"));
  if (root.has("workers")) {
    plan.workers = static_cast<int>(root.at("workers").unsigned_integer());
    if (plan.workers < 1) throw ConfigError("workers", "must be >= 1");
  }
  if (root.has("output_dir")) plan.output_dir = resolve(base_dir, root.at("output_dir").string());
  else plan.output_dir = resolve(base_dir, "results");
  return plan;
}

ExperimentPlan load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path.parent_path());
}

std::vector<RunSpec> enumerate_runs(const ExperimentPlan& plan) {
  std::vector<RunSpec> runs;
  for (ModelKind m : plan.models)
    for (std::uint64_t s : plan.seeds) runs.push_back({m, InterventionParams{}, s});
  for (const MethodGrid& g : plan.methods)
    for (const InterventionParams& p : g.points())
      for (ModelKind m : plan.models)
        for (std::uint64_t s : plan.seeds) runs.push_back({m, p, s});
  return runs;
}

Graph load_dataset(const DatasetRef& ref) {
  if (ref.synthetic) return generate_synthetic(*ref.synthetic, ref.synthetic_seed);
  Graph g = load_tabular_graph(ref.nodes_file, ref.edges_file, ref.schema);
  if (ref.region) g = extract_region(g, ref.region->column, ref.region->prefix);
  return g;
}

namespace {

MetricRecord provenance(const ExperimentPlan& plan, const RunSpec& run) {
  MetricRecord r;
  r.dataset = plan.dataset.name;
  r.model_kind = to_string(run.model);
  r.method = to_string(run.params.method);
  r.alpha = run.params.alpha;
  r.beta = run.params.beta;
  r.lambda = run.params.lambda;
  r.mode = mode_string(run.params);
  r.seed = run.seed;
  r.split_seed = plan.fix_split ? plan.split_seed : run.seed;
  return r;
}

void set_metrics_nan(MetricRecord& r) {
  r.accuracy = r.delta_sp = r.delta_eo = r.fair_leak = r.priv_leak = r.mia_tree = r.mia_mlp = kNaN;
}

}  // namespace

MetricRecord run_one(const ExperimentPlan& plan, const Graph& graph, const RunSpec& run) {
  const MetricRecord prov = provenance(plan, run);
  const NodeSplit split = make_splits(graph, {}, prov.split_seed);
  const Graph g = standardize_features(graph, split.train);
  ModelSpec spec;
  spec.kind = run.model;
  spec.layer_dims.assign(static_cast<std::size_t>(plan.training.n_layers) + 1, plan.training.hidden);
  spec.layer_dims.front() = g.features.cols();
  spec.n_classes = std::max(2, g.n_classes());
  spec.dropout_p = plan.training.dropout;
  spec.gat_heads = plan.training.gat_heads;
  TrainHyper hyper;
  hyper.lr = plan.training.lr;
  hyper.epochs = plan.training.epochs;
  hyper.weight_decay = plan.training.weight_decay;
  hyper.seed = run.seed;
  const TrainedModel model = run_intervention(spec, g, split, hyper, run.params);
  const AttackResults attacks = run_attacks(model, g, split, run.seed);
  MetricRecord r = evaluate_all(model, g, split, attacks);
  const double mia_tree = r.mia_tree, mia_mlp = r.mia_mlp;
  MetricRecord out = prov;
  out.accuracy = r.accuracy;
  out.delta_sp = r.delta_sp;
  out.delta_eo = r.delta_eo;
  out.fair_leak = r.fair_leak;
  out.priv_leak = r.priv_leak;
  out.mia_tree = mia_tree;
  out.mia_mlp = mia_mlp;
  return out;
}

ResultTable execute(const ExperimentPlan& plan) {
  const Graph graph = load_dataset(plan.dataset);
  const std::vector<RunSpec> runs = enumerate_runs(plan);
  ResultTable table;
  table.rows.resize(runs.size());

  int workers = plan.workers;
  if (const char* env = std::getenv("AUDIT_WORKERS")) {
    int v = 0;
    const char* end = env + std::char_traits<char>::length(env);
    auto [p, ec] = std::from_chars(env, end, v);
    if (ec == std::errc() && p == end && v >= 1) workers = v;
    else warn(std::string("ignoring invalid AUDIT_WORKERS='") + env + "'");
  }
  workers = std::max(1, std::min<int>(workers, static_cast<int>(runs.size())));

  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next++; i < runs.size(); i = next++) {
      ResultRow& row = table.rows[i];
      try {
        row.record = run_one(plan, graph, runs[i]);
      } catch (const std::exception& e) {
        row.record = provenance(plan, runs[i]);
        set_metrics_nan(row.record);
        row.error = e.what();
        if (row.error.empty()) row.error = "unknown error";
      }
    }
  };
  if (workers == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  sort_canonical(table);
  return table;
}

void sort_canonical(ResultTable& table) {
  auto key = [](const MetricRecord& r) {
    return std::tie(r.dataset, r.model_kind, r.method, r.alpha, r.beta, r.lambda, r.mode, r.seed);
  };
  std::stable_sort(table.rows.begin(), table.rows.end(), [&](const ResultRow& a, const ResultRow& b) {
    return key(a.record) < key(b.record);
  });
}

const std::vector<std::string>& csv_columns() {
  static const std::vector<std::string> cols{
      "dataset",  "model",    "method",    "alpha",     "beta",     "lambda",   "mode",   "seed",
      "accuracy", "delta_sp", "delta_eo", "fair_leak", "priv_leak", "mia_tree", "mia_mlp"};
  return cols;
}

const std::vector<std::string>& metric_names() {
  static const std::vector<std::string> names{"accuracy",  "delta_sp", "delta_eo", "fair_leak",
                                              "priv_leak", "mia_tree", "mia_mlp"};
  return names;
}

double metric_value(const MetricRecord& r, const std::string& metric) {
  if (metric == "accuracy") return r.accuracy;
  if (metric == "delta_sp") return r.delta_sp;
  if (metric == "delta_eo") return r.delta_eo;
  if (metric == "fair_leak") return r.fair_leak;
  if (metric == "priv_leak") return r.priv_leak;
  if (metric == "mia_tree") return r.mia_tree;
  if (metric == "mia_mlp") return r.mia_mlp;
  throw Error("unknown metric '" + metric + "'");
}

namespace {

double* metric_slot(MetricRecord& r, std::size_t i) {
  double* slots[] = {&r.accuracy, &r.delta_sp, &r.delta_eo, &r.fair_leak,
                     &r.priv_leak, &r.mia_tree, &r.mia_mlp};
  return slots[i];
}

std::string key_value(const MetricRecord& r, const std::string& column) {
  if (column == "dataset") return r.dataset;
  if (column == "model") return r.model_kind;
  if (column == "method") return r.method;
  if (column == "alpha") return format_number(r.alpha);
  if (column == "beta") return format_number(r.beta);
  if (column == "lambda") return format_number(r.lambda);
  if (column == "mode") return r.mode;
  if (column == "seed") return std::to_string(r.seed);
  throw Error("unknown group-by column '" + column + "' (expected one of dataset, model, method, "
              "alpha, beta, lambda, mode, seed)");
}

bool numeric_key(const std::string& column) {
  return column == "alpha" || column == "beta" || column == "lambda" || column == "seed";
}

double parse_double(const std::string& s, std::size_t line, const std::string& column) {
  if (s == "NA") return kNaN;
  double v = 0.0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size())
    throw Error("csv line " + std::to_string(line) + ": bad number '" + s + "' in column " + column);
  return v;
}

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

json number_json(double v) { return std::isnan(v) ? json(nullptr) : json(v); }
double json_number(const json& j) { return j.is_null() ? kNaN : j.get<double>(); }

std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out.push_back(c);
    }
  }
  return out;
}

}  // namespace

std::vector<SummaryRow> aggregate(const ResultTable& table, const std::vector<std::string>& group_by) {
  std::map<std::vector<std::string>, std::vector<const MetricRecord*>> groups;
  for (const ResultRow& row : table.rows) {
    if (!row.ok()) continue;
    std::vector<std::string> key;
    for (const auto& c : group_by) key.push_back(key_value(row.record, c));
    groups[key].push_back(&row.record);
  }
  std::vector<SummaryRow> out;
  for (const auto& [key, recs] : groups) {
    SummaryRow s;
    s.key = key;
    s.n = recs.size();
    for (const auto& m : metric_names()) {
      std::vector<double> vals;
      for (const MetricRecord* r : recs) {
        const double v = metric_value(*r, m);
        if (!std::isnan(v)) vals.push_back(v);
      }
      if (vals.empty()) {
        s.mean[m] = s.std[m] = kNaN;
        continue;
      }
      double mean = 0.0;
      for (double v : vals) mean += v;
      mean /= static_cast<double>(vals.size());
      double ss = 0.0;
      for (double v : vals) ss += (v - mean) * (v - mean);
      s.mean[m] = mean;
      s.std[m] = vals.size() > 1 ? std::sqrt(ss / static_cast<double>(vals.size() - 1)) : 0.0;
    }
    out.push_back(std::move(s));
  }
  // Numeric key columns sort by value rather than by text.
  std::stable_sort(out.begin(), out.end(), [&](const SummaryRow& a, const SummaryRow& b) {
    for (std::size_t i = 0; i < group_by.size(); ++i) {
      if (a.key[i] == b.key[i]) continue;
      if (numeric_key(group_by[i])) return std::stod(a.key[i]) < std::stod(b.key[i]);
      return a.key[i] < b.key[i];
    }
    return false;
  });
  return out;
}

std::string format_number(double v) {
  if (std::isnan(v)) return "NA";
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc()) throw Error("format_number failed");
  return std::string(buf, p);
}

std::string to_csv(const ResultTable& table) {
  std::string out;
  const auto& cols = csv_columns();
  for (std::size_t i = 0; i < cols.size(); ++i) out += (i ? "," : "") + cols[i];
  out += '\n';
  for (const ResultRow& row : table.rows) {
    const MetricRecord& r = row.record;
    out += r.dataset + ',' + r.model_kind + ',' + r.method + ',' + format_number(r.alpha) + ',' +
           format_number(r.beta) + ',' + format_number(r.lambda) + ',' + r.mode + ',' +
           std::to_string(r.seed);
    for (const auto& m : metric_names()) out += ',' + format_number(metric_value(r, m));
    out += '\n';
  }
  return out;
}

ResultTable parse_csv(const std::string& text) {
  ResultTable table;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  const auto& cols = csv_columns();
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto fields = split_fields(line);
    if (line_no == 1) {
      if (fields != cols) throw Error("csv: unexpected header");
      continue;
    }
    if (line.empty()) continue;
    if (fields.size() != cols.size())
      throw Error("csv line " + std::to_string(line_no) + ": expected " + std::to_string(cols.size()) +
                  " fields, got " + std::to_string(fields.size()));
    ResultRow row;
    MetricRecord& r = row.record;
    r.dataset = fields[0];
    r.model_kind = fields[1];
    r.method = fields[2];
    r.alpha = parse_double(fields[3], line_no, cols[3]);
    r.beta = parse_double(fields[4], line_no, cols[4]);
    r.lambda = parse_double(fields[5], line_no, cols[5]);
    r.mode = fields[6];
    {
      auto [p, ec] = std::from_chars(fields[7].data(), fields[7].data() + fields[7].size(), r.seed);
      if (ec != std::errc() || p != fields[7].data() + fields[7].size())
        throw Error("csv line " + std::to_string(line_no) + ": bad seed '" + fields[7] + "'");
    }
    r.split_seed = r.seed;
    bool all_na = true;
    for (std::size_t i = 0; i < metric_names().size(); ++i) {
      *metric_slot(r, i) = parse_double(fields[8 + i], line_no, cols[8 + i]);
      all_na = all_na && std::isnan(*metric_slot(r, i));
    }
    if (all_na) row.error = "run failed (see errors.log)";
    table.rows.push_back(std::move(row));
  }
  if (line_no == 0) throw Error("csv: empty document");
  return table;
}

std::string summary_to_csv(const std::vector<SummaryRow>& rows, const std::vector<std::string>& group_by) {
  std::string out;
  for (const auto& c : group_by) out += c + ',';
  out += "n";
  for (const auto& m : metric_names()) out += ',' + m + "_mean," + m + "_std";
  out += '\n';
  for (const SummaryRow& s : rows) {
    for (const auto& k : s.key) out += k + ',';
    out += std::to_string(s.n);
    for (const auto& m : metric_names()) out += ',' + format_number(s.mean.at(m)) + ',' + format_number(s.std.at(m));
    out += '\n';
  }
  return out;
}

std::string to_json(const ResultTable& table, const ExperimentPlan* plan) {
  json j;
  j["schema_version"] = table.schema_version;
  json meta;
  meta["columns"] = csv_columns();
  meta["fairness_scalarization"] =
      "max pairwise group difference; multiclass tasks take the max over one-vs-rest classes";
  meta["std"] = "sample standard deviation (n-1); reported as 0 when n = 1";
  std::size_t failed = 0;
  for (const ResultRow& r : table.rows) failed += r.ok() ? 0 : 1;
  meta["runs"] = table.rows.size();
  meta["failed_runs"] = failed;
  if (plan) {
    meta["dataset"] = plan->dataset.name;
    meta["expected_runs"] = plan->expected_runs();
    meta["fix_split"] = plan->fix_split;
    meta["training"] = {{"lr", plan->training.lr},
                        {"epochs", plan->training.epochs},
                        {"weight_decay", plan->training.weight_decay},
                        {"hidden", plan->training.hidden},
                        {"n_layers", plan->training.n_layers},
                        {"dropout", plan->training.dropout},
                        {"gat_heads", plan->training.gat_heads}};
  }
  j["metadata"] = meta;
  json rows = json::array();
  for (const ResultRow& row : table.rows) {
    const MetricRecord& r = row.record;
    json o;
    o["dataset"] = r.dataset;
    o["model"] = r.model_kind;
    o["method"] = r.method;
    o["alpha"] = r.alpha;
    o["beta"] = r.beta;
    o["lambda"] = r.lambda;
    o["mode"] = r.mode;
    o["seed"] = r.seed;
    o["split_seed"] = r.split_seed;
    for (const auto& m : metric_names()) o[m] = number_json(metric_value(r, m));
    o["error"] = row.ok() ? json(nullptr) : json(row.error);
    rows.push_back(std::move(o));
  }
  j["records"] = std::move(rows);
  return j.dump(1) + "\n";
}

ResultTable parse_json(const std::string& text) {
  const json j = json::parse(text);
  ResultTable table;
  table.schema_version = j.at("schema_version").get<int>();
  for (const json& o : j.at("records")) {
    ResultRow row;
    MetricRecord& r = row.record;
    r.dataset = o.at("dataset").get<std::string>();
    r.model_kind = o.at("model").get<std::string>();
    r.method = o.at("method").get<std::string>();
    r.alpha = o.at("alpha").get<double>();
    r.beta = o.at("beta").get<double>();
    r.lambda = o.at("lambda").get<double>();
    r.mode = o.at("mode").get<std::string>();
    r.seed = o.at("seed").get<std::uint64_t>();
    r.split_seed = o.at("split_seed").get<std::uint64_t>();
    for (std::size_t i = 0; i < metric_names().size(); ++i)
      *metric_slot(r, i) = json_number(o.at(metric_names()[i]));
    if (!o.at("error").is_null()) row.error = o.at("error").get<std::string>();
    table.rows.push_back(std::move(row));
  }
  return table;
}

std::string scatter_svg(const ResultTable& table, const std::string& x_metric,
                        const std::string& y_metric) {
  const MetricRecord probe;
  metric_value(probe, x_metric);
  metric_value(probe, y_metric);

  const std::vector<std::string> setting{"dataset", "model", "method", "alpha", "beta", "lambda", "mode"};
  struct Point {
    std::string dataset, model, method, label;
    double x, y;
  };
  std::vector<Point> points;
  for (const SummaryRow& s : aggregate(table, setting)) {
    const double x = s.mean.at(x_metric), y = s.mean.at(y_metric);
    if (std::isnan(x) || std::isnan(y)) continue;
    std::string label = s.key[2];
    if (s.key[2] != "none") label += " a=" + s.key[3] + " b=" + s.key[4] + " l=" + s.key[5] + (s.key[6].empty() ? "" : " " + s.key[6]);
    points.push_back({s.key[0], s.key[1], s.key[2], label, x, y});
  }

  const double W = 720, H = 480, left = 70, right = 190, top = 40, bottom = 60;
  double x0 = 0, x1 = 1, y0 = 0, y1 = 1;
  if (!points.empty()) {
    x0 = y0 = std::numeric_limits<double>::infinity();
    x1 = y1 = -std::numeric_limits<double>::infinity();
    for (const Point& p : points) {
      x0 = std::min(x0, p.x);
      x1 = std::max(x1, p.x);
      y0 = std::min(y0, p.y);
      y1 = std::max(y1, p.y);
    }
    const double px = std::max(0.05 * (x1 - x0), 0.01), py = std::max(0.05 * (y1 - y0), 0.01);
    x0 -= px;
    x1 += px;
    y0 -= py;
    y1 += py;
  }
  auto sx = [&](double v) { return left + (v - x0) / (x1 - x0) * (W - left - right); };
  auto sy = [&](double v) { return H - bottom - (v - y0) / (y1 - y0) * (H - top - bottom); };
  auto f = [](double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return std::string(buf);
  };

  const std::map<std::string, std::string> colors{
      {"gcn", "#1f77b4"}, {"sage", "#ff7f0e"}, {"gat", "#2ca02c"}, {"gin", "#d62728"}};
  auto color_of = [&](const std::string& model) {
    auto it = colors.find(model);
    return it == colors.end() ? std::string("#555555") : it->second;
  };
  const std::vector<std::string> method_order{"adv_debias", "embed_proj", "edge_weight", "filter",
                                              "fair_learn", "ew_ad", "ew_flpar"};
  auto marker = [&](const std::string& method, double cx, double cy, const std::string& fill,
                    const std::string& cls) {
    const double r = 5;
    std::string attrs = " class=\"" + cls + "\" fill=\"" + fill + "\" stroke=\"#222\" stroke-width=\"0.6\"";
    auto poly = [&](std::vector<std::pair<double, double>> pts) {
      std::string s = "<polygon points=\"";
      for (std::size_t i = 0; i < pts.size(); ++i)
        s += (i ? " " : "") + f(cx + pts[i].first) + "," + f(cy + pts[i].second);
      return s + "\"" + attrs + "/>";
    };
    if (method == "adv_debias") return "<circle cx=\"" + f(cx) + "\" cy=\"" + f(cy) + "\" r=\"" + f(r) + "\"" + attrs + "/>";
    if (method == "embed_proj") return poly({{-r, -r}, {r, -r}, {r, r}, {-r, r}});
    if (method == "edge_weight") return poly({{0, -r}, {r, r}, {-r, r}});
    if (method == "filter") return poly({{0, -r}, {r, 0}, {0, r}, {-r, 0}});
    if (method == "fair_learn") return poly({{-r, -r}, {r, -r}, {0, r}});
    if (method == "ew_ad") {
      std::vector<std::pair<double, double>> pts;
      for (int k = 0; k < 10; ++k) {
        const double a = -M_PI / 2 + k * M_PI / 5, rr = k % 2 ? r * 0.45 : r * 1.2;
        pts.emplace_back(rr * std::cos(a), rr * std::sin(a));
      }
      return poly(pts);
    }
    std::vector<std::pair<double, double>> pts;
    for (int k = 0; k < 6; ++k) {
      const double a = k * M_PI / 3;
      pts.emplace_back(r * std::cos(a), r * std::sin(a));
    }
    return poly(pts);
  };
  auto x_glyph = [&](double cx, double cy, const std::string& stroke, const std::string& cls,
                     const std::string& extra) {
    const double r = 7;
    return "<path class=\"" + cls + "\"" + extra + " d=\"M" + f(cx - r) + "," + f(cy - r) + " L" + f(cx + r) +
           "," + f(cy + r) + " M" + f(cx - r) + "," + f(cy + r) + " L" + f(cx + r) + "," + f(cy - r) +
           "\" stroke=\"" + stroke + "\" stroke-width=\"2.5\" fill=\"none\"/>";
  };

  std::ostringstream s;
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
    << "\" viewBox=\"0 0 " << W << " " << H << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  s << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  s << "<text x=\"" << f((left + W - right) / 2) << "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">"
    << xml_escape(y_metric) << " vs " << xml_escape(x_metric) << "</text>\n";
  // Axes and ticks.
  s << "<g class=\"axes\" stroke=\"#333\">\n";
  s << "<line x1=\"" << left << "\" y1=\"" << H - bottom << "\" x2=\"" << W - right << "\" y2=\"" << H - bottom << "\"/>\n";
  s << "<line x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left << "\" y2=\"" << H - bottom << "\"/>\n";
  s << "</g>\n<g class=\"ticks\" fill=\"#333\">\n";
  for (int t = 0; t <= 4; ++t) {
    const double vx = x0 + (x1 - x0) * t / 4, vy = y0 + (y1 - y0) * t / 4;
    s << "<text x=\"" << f(sx(vx)) << "\" y=\"" << f(H - bottom + 16) << "\" text-anchor=\"middle\">"
      << f(vx) << "</text>\n";
    s << "<text x=\"" << f(left - 6) << "\" y=\"" << f(sy(vy) + 4) << "\" text-anchor=\"end\">" << f(vy)
      << "</text>\n";
  }
  s << "</g>\n";
  s << "<text x=\"" << f((left + W - right) / 2) << "\" y=\"" << H - 18 << "\" text-anchor=\"middle\">"
    << xml_escape(x_metric) << "</text>\n";
  s << "<text transform=\"translate(18," << f((top + H - bottom) / 2) << ") rotate(-90)\" text-anchor=\"middle\">"
    << xml_escape(y_metric) << "</text>\n";

  s << "<g class=\"points\">\n";
  for (const Point& p : points) {
    if (p.method != "none") {
      s << marker(p.method, sx(p.x), sy(p.y), color_of(p.model), "point") << "<title>"
        << xml_escape(p.dataset + " " + p.model + " " + p.label) << "</title>\n";
    }
  }
  for (const Point& p : points) {
    if (p.method == "none") {
      s << x_glyph(sx(p.x), sy(p.y), color_of(p.model), "baseline-x",
                   " data-dataset=\"" + xml_escape(p.dataset) + "\" data-model=\"" + xml_escape(p.model) + "\"")
        << "\n";
    }
  }
  s << "</g>\n";

  // Legend: baseline glyph, method shapes, model colors.
  std::set<std::string> methods_present, models_present;
  for (const Point& p : points) {
    models_present.insert(p.model);
    if (p.method != "none") methods_present.insert(p.method);
  }
  double ly = top + 10;
  const double lx = W - right + 20;
  s << "<g class=\"legend\">\n";
  s << x_glyph(lx, ly, "#222", "legend-baseline", "") << "<text x=\"" << f(lx + 14) << "\" y=\"" << f(ly + 4)
    << "\">baseline</text>\n";
  ly += 20;
  for (const auto& m : method_order) {
    if (!methods_present.count(m)) continue;
    s << marker(m, lx, ly, "#bbbbbb", "legend-marker") << "<text x=\"" << f(lx + 14) << "\" y=\"" << f(ly + 4)
      << "\">" << m << "</text>\n";
    ly += 18;
  }
  ly += 8;
  for (const auto& m : models_present) {
    s << "<rect class=\"legend-color\" x=\"" << f(lx - 5) << "\" y=\"" << f(ly - 5)
      << "\" width=\"10\" height=\"10\" fill=\"" << color_of(m) << "\"/><text x=\"" << f(lx + 14) << "\" y=\""
      << f(ly + 4) << "\">" << xml_escape(m) << "</text>\n";
    ly += 18;
  }
  s << "</g>\n</svg>\n";
  return s.str();
}

void write_outputs(const ResultTable& table, const ExperimentPlan& plan) {
  std::filesystem::create_directories(plan.output_dir);
  auto write = [&](const std::string& name, const std::string& content) {
    std::ofstream out(plan.output_dir / name, std::ios::binary);
    if (!out) throw Error("cannot write " + (plan.output_dir / name).string());
    out << content;
  };
  write("results.csv", to_csv(table));
  write("results.json", to_json(table, &plan));
  std::string log;
  for (const ResultRow& row : table.rows) {
    if (row.ok()) continue;
    const MetricRecord& r = row.record;
    log += r.dataset + " " + r.model_kind + " " + r.method + " alpha=" + format_number(r.alpha) +
           " beta=" + format_number(r.beta) + " lambda=" + format_number(r.lambda) +
           (r.mode.empty() ? "" : " mode=" + r.mode) + " seed=" + std::to_string(r.seed) + ": " + row.error + "\n";
  }
  write("errors.log", log);
}

}  // namespace fairgnn
