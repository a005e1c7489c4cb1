#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "benchmark.hpp"
#include "fairgnn/error.hpp"
#include "fairgnn/rng.hpp"
#include "fairgnn/runner.hpp"

using namespace fairgnn;

namespace {

const char* kTinyDataset = R"("dataset": {"name": "tiny", "synthetic": {"n_nodes": 80, "intra_group_edge_prob": 0.1,
                               "inter_group_edge_prob": 0.01, "seed": 3}})";

std::string config(const std::string& methods, const std::string& extra = "",
                   const std::string& models = R"(["gcn"])", const std::string& seeds = "[1]") {
  return std::string("{\"schema_version\": 1, ") + kTinyDataset + ", \"models\": " + models +
         ", \"methods\": " + methods + ", \"seeds\": " + seeds +
         R"(, "training": {"epochs": 5, "hidden": 8})" + extra + "}";
}

std::string config_error(const std::string& text) {
  try {
    parse_config(text);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

std::size_t count_of(const std::string& haystack, const std::string& needle) {
  std::size_t n = 0;
  for (std::size_t pos = haystack.find(needle); pos != std::string::npos;
       pos = haystack.find(needle, pos + needle.size()))
    ++n;
  return n;
}

ResultRow row(const std::string& dataset, const std::string& model, const std::string& method,
              std::uint64_t seed, double acc, double sp) {
  ResultRow r;
  r.record.dataset = dataset;
  r.record.model_kind = model;
  r.record.method = method;
  r.record.seed = seed;
  r.record.split_seed = seed;
  r.record.accuracy = acc;
  r.record.delta_sp = sp;
  r.record.delta_eo = 0.25;
  r.record.fair_leak = 0.5;
  r.record.priv_leak = 0.5;
  r.record.mia_tree = 0.5;
  r.record.mia_mlp = 0.5;
  if (method == "adv_debias") {
    r.record.alpha = 4.0;
    r.record.beta = 0.01;
  }
  return r;
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::filesystem::path temp_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("fairgnn_runner_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace

TEST_CASE("config parsing") {
  SUBCASE("minimal config gives one run") {
    const ExperimentPlan p = parse_config(config(R"([{"method": "none"}])"));
    CHECK(p.expected_runs() == 1);
    const auto runs = enumerate_runs(p);
    REQUIRE(runs.size() == 1);
    CHECK(runs[0].params.method == Method::none);
    CHECK(p.dataset.synthetic.has_value());
    CHECK(p.training.epochs == 5);
  }
  SUBCASE("a 4 x 3 grid over two models gives 24 runs plus 2 baselines") {
    const ExperimentPlan p = parse_config(config(
        R"([{"method": "adv_debias", "params": {"alpha": [0.1, 1, 4, 10], "beta": [0.001, 0.01, 0.1]}}])", "",
        R"(["gcn", "gat"])"));
    CHECK(p.expected_runs() == 26);
    const auto runs = enumerate_runs(p);
    CHECK(runs.size() == 26);
    CHECK(std::count_if(runs.begin(), runs.end(),
                        [](const RunSpec& r) { return r.params.method == Method::none; }) == 2);
  }
  SUBCASE("cardinality formula") {
    const ExperimentPlan p = parse_config(config(
        R"([{"method": "edge_weight"}, {"method": "filter", "params": {"lambda": [0.5, 1]}},
            {"method": "fair_learn", "params": {"alpha": [1, 2], "mode": ["par", "eoo"]}}])",
        "", R"(["gcn", "sage", "gin"])", "[1, 2, 3]"));
    CHECK(p.expected_runs() == (1 + 1 + 2 + 4) * 3 * 3);
    CHECK(enumerate_runs(p).size() == p.expected_runs());
  }
  SUBCASE("scalar knobs are one-point grids") {
    const ExperimentPlan p = parse_config(config(R"([{"method": "ew_ad", "params": {"alpha": 4, "beta": 0.01}}])"));
    REQUIRE(p.methods.size() == 1);
    CHECK(p.methods[0].points().size() == 1);
  }
  SUBCASE("negative alpha names params.alpha") {
    const std::string e = config_error(config(R"([{"method": "adv_debias", "params": {"alpha": [1, -1], "beta": 0}}])"));
    CHECK(e.find("methods[0].params.alpha") != std::string::npos);
  }
  SUBCASE("rejections") {
    CHECK(config_error(config(R"([{"method": "none"}])", R"(, "colour": 1)")).find("colour") != std::string::npos);
    CHECK(config_error(config(R"([{"method": "none"}])", R"(, "seeds": [2])")).find("duplicate") != std::string::npos);
    CHECK(config_error(config(R"([{"method": "filter", "params": {"lambda": 1, "alpha": 1}}])"))
              .find("params.alpha") != std::string::npos);
    CHECK(config_error(config(R"([{"method": "filter"}])")).find("params") != std::string::npos);
    CHECK(config_error(config(R"([{"method": "mystery"}])")).find("methods[0].method") != std::string::npos);
    CHECK(config_error(config(R"([{"method": "edge_weight"}, {"method": "edge_weight"}])")) != "");
    CHECK(config_error(config(R"([{"method": "none"}])", "", R"(["gcn"])", "[1, 1]")).find("seeds") !=
          std::string::npos);
    CHECK(config_error(config(R"([{"method": "none"}])", "", "[]")).find("models") != std::string::npos);
    CHECK(config_error(config(R"([{"method": "filter", "params": {"lambda": []}}])")).find("empty") !=
          std::string::npos);
    CHECK(config_error(config(R"([{"method": "none"}])", R"(, "workers": 0)")).find("workers") !=
          std::string::npos);
    CHECK(config_error("{\"schema_version\": 2}").find("schema_version") != std::string::npos);
    CHECK(config_error("{not json").find("malformed") != std::string::npos);
    CHECK(config_error(R"({"schema_version": 1, "dataset": {"name": "bad name!", "synthetic": {}},
                           "models": ["gcn"], "methods": [], "seeds": [1]})")
              .find("dataset.name") != std::string::npos);
  }
  SUBCASE("file datasets resolve against the config directory") {
    const ExperimentPlan p = parse_config(
        R"({"schema_version": 1, "dataset": {"name": "nba", "nodes": "nba.csv", "edges": "nba_relationship.txt",
             "schema": {"label": {"column": "SALARY", "rule": "median"}, "fairness": {"column": "country"}}},
             "models": ["gcn"], "methods": [], "seeds": [1]})",
        "/data/dir");
    CHECK(p.dataset.nodes_file == std::filesystem::path("/data/dir/nba.csv"));
    CHECK(p.dataset.schema.label.rule.kind == DerivationRule::Kind::median_threshold);
  }
}

TEST_CASE("execution") {
  SUBCASE("two seeds of the baseline") {
    ExperimentPlan p = parse_config(config(R"([{"method": "none"}])", "", R"(["gcn"])", "[1, 2]"));
    const ResultTable t = execute(p);
    REQUIRE(t.rows.size() == 2);
    const MetricRecord& a = t.rows[0].record;
    const MetricRecord& b = t.rows[1].record;
    CHECK(a.seed == 1);
    CHECK(b.seed == 2);
    CHECK(a.dataset == b.dataset);
    CHECK(a.model_kind == b.model_kind);
    CHECK(a.method == "none");
    CHECK(b.method == "none");
    CHECK(a.split_seed == 1);
    CHECK(b.split_seed == 2);
  }
  SUBCASE("fixed split varies only the initialization") {
    ExperimentPlan p = parse_config(
        config(R"([{"method": "none"}])", R"(, "fix_split": true, "split_seed": 9)", R"(["gcn"])", "[1, 2]"));
    const ResultTable t = execute(p);
    for (const auto& r : t.rows) CHECK(r.record.split_seed == 9);
  }
  SUBCASE("determinism across repeats and worker counts") {
    ExperimentPlan p = parse_config(config(
        R"([{"method": "edge_weight"}, {"method": "adv_debias", "params": {"alpha": 1, "beta": 0.01}}])",
        R"(, "workers": 1)", R"(["gcn", "sage"])", "[1, 2]"));
    const std::string once = to_csv(execute(p));
    CHECK(to_csv(execute(p)) == once);
    p.workers = 3;
    CHECK(to_csv(execute(p)) == once);
    setenv("AUDIT_WORKERS", "2", 1);
    CHECK(to_csv(execute(p)) == once);
    unsetenv("AUDIT_WORKERS");
    CHECK(count_of(once, "\n") == 1 + p.expected_runs());
  }
  SUBCASE("failed runs keep provenance and report NA") {
    ExperimentPlan p = parse_config(config(R"([{"method": "edge_weight"}])"));
    p.training.lr = 1e200;
    const ResultTable t = execute(p);
    REQUIRE(t.rows.size() == 2);
    for (const auto& r : t.rows) {
      CHECK_FALSE(r.ok());
      CHECK(std::isnan(r.record.accuracy));
      CHECK(r.record.dataset == "tiny");
    }
    const std::string csv = to_csv(t);
    CHECK(csv.find(",NA,NA,NA,NA,NA,NA,NA\n") != std::string::npos);
    const ResultTable back = parse_csv(csv);
    for (const auto& r : back.rows) CHECK_FALSE(r.ok());
    const auto dir = temp_dir("failed");
    p.output_dir = dir;
    write_outputs(t, p);
    CHECK(read_text(dir / "errors.log").find("edge_weight") != std::string::npos);
    CHECK(parse_csv(read_text(dir / "results.csv")).rows.size() == 2);
    CHECK(parse_json(read_text(dir / "results.json")).rows.size() == 2);
  }
  SUBCASE("an unreadable dataset aborts before any run") {
    ExperimentPlan p = parse_config(
        R"({"schema_version": 1, "dataset": {"name": "gone", "nodes": "missing.csv", "edges": "missing.txt",
             "schema": {"label": {"column": "y"}, "fairness": {"column": "a"}}},
             "models": ["gcn"], "methods": [], "seeds": [1]})",
        temp_dir("missing"));
    CHECK_THROWS_AS(execute(p), Error);
  }
}

TEST_CASE("edge weighting lowers mean delta_sp on the biased benchmark") {
  const auto base = testutil::benchmark_means({Method::none});
  const auto ew = testutil::benchmark_means({Method::edge_weight});
  CHECK(ew.delta_sp < base.delta_sp);
}

TEST_CASE("emitters") {
  ResultTable t;
  SUBCASE("empty table is a header-only CSV") {
    const std::string csv = to_csv(t);
    CHECK(count_of(csv, "\n") == 1);
    CHECK(csv.rfind("dataset,model,method,alpha,beta,lambda,mode,seed,accuracy,delta_sp,delta_eo,"
                    "fair_leak,priv_leak,mia_tree,mia_mlp\n",
                    0) == 0);
    CHECK(parse_csv(csv).rows.empty());
  }
  SUBCASE("one record round-trips through CSV and JSON") {
    t.rows.push_back(row("d", "gcn", "adv_debias", 3, 0.1 + 0.2, 1.0 / 3.0));
    t.rows[0].record.mode = "";
    const std::string csv = to_csv(t);
    CHECK(count_of(csv, "\n") == 2);
    const ResultTable c = parse_csv(csv);
    REQUIRE(c.rows.size() == 1);
    CHECK(c.rows[0].record == t.rows[0].record);
    CHECK(to_csv(c) == csv);
    const ResultTable j = parse_json(to_json(t));
    REQUIRE(j.rows.size() == 1);
    CHECK(j.rows[0].record == t.rows[0].record);
    CHECK(j.schema_version == kSchemaVersion);
  }
  SUBCASE("JSON keeps NaN metrics and error messages") {
    ResultRow r = row("d", "gin", "filter", 1, NAN, NAN);
    r.error = "diverged at epoch 3";
    t.rows.push_back(r);
    const ResultTable j = parse_json(to_json(t));
    CHECK(std::isnan(j.rows[0].record.accuracy));
    CHECK(j.rows[0].error == "diverged at epoch 3");
    CHECK(to_json(j) == to_json(t));
  }
  SUBCASE("numbers") {
    CHECK(format_number(0.1) == "0.1");
    CHECK(format_number(4.0) == "4");
    CHECK(format_number(NAN) == "NA");
    Rng rng(3);
    for (int i = 0; i < 200; ++i) {
      const double v = rng.normal() * std::pow(10.0, static_cast<double>(rng.below(20)) - 10.0);
      CHECK(std::stod(format_number(v)) == v);
    }
  }
  SUBCASE("csv parse errors") {
    CHECK_THROWS_AS(parse_csv(""), Error);
    CHECK_THROWS_AS(parse_csv("a,b\n"), Error);
    t.rows.push_back(row("d", "gcn", "none", 1, 0.5, 0.5));
    std::string csv = to_csv(t);
    csv.insert(csv.size() - 1, ",extra");
    CHECK_THROWS_AS(parse_csv(csv), Error);
  }
}

TEST_CASE("canonical order") {
  ResultTable t;
  t.rows = {row("b", "gcn", "none", 2, 0.5, 0.1), row("a", "sage", "none", 1, 0.5, 0.1),
            row("a", "gcn", "none", 10, 0.5, 0.1), row("a", "gcn", "none", 2, 0.5, 0.1),
            row("a", "gcn", "adv_debias", 1, 0.5, 0.1)};
  ResultTable shuffled = t;
  std::reverse(shuffled.rows.begin(), shuffled.rows.end());
  sort_canonical(t);
  sort_canonical(shuffled);
  CHECK(to_csv(t) == to_csv(shuffled));
  CHECK(t.rows[0].record.method == "adv_debias");
  CHECK(t.rows[1].record.seed == 2);
  CHECK(t.rows[2].record.seed == 10);
  CHECK(t.rows.back().record.dataset == "b");
}

TEST_CASE("aggregate") {
  ResultTable t;
  t.rows = {row("d", "gcn", "none", 1, 0.6, 0.2), row("d", "gcn", "none", 2, 0.8, 0.4),
            row("d", "sage", "none", 1, 0.7, 0.3)};
  const std::vector<std::string> keys{"model"};
  const auto s = aggregate(t, keys);
  REQUIRE(s.size() == 2);
  CHECK(s[0].key == std::vector<std::string>{"gcn"});
  CHECK(s[0].n == 2);
  CHECK(s[0].mean.at("accuracy") == doctest::Approx(0.7).epsilon(1e-15));
  CHECK(s[0].std.at("accuracy") == doctest::Approx(std::sqrt(0.02)).epsilon(1e-12));
  CHECK(s[1].n == 1);
  CHECK(s[1].std.at("accuracy") == 0.0);

  ResultTable reversed = t;
  std::reverse(reversed.rows.begin(), reversed.rows.end());
  const auto r = aggregate(reversed, keys);
  CHECK(summary_to_csv(r, keys) == summary_to_csv(s, keys));
  CHECK(summary_to_csv(s, keys).rfind("model,n,accuracy_mean,accuracy_std,", 0) == 0);

  SUBCASE("failed rows and NA values are skipped") {
    ResultRow bad = row("d", "gcn", "none", 3, NAN, NAN);
    bad.error = "x";
    t.rows.push_back(bad);
    CHECK(aggregate(t, keys)[0].n == 2);
  }
  SUBCASE("unknown group key") { CHECK_THROWS_AS(aggregate(t, {"accuracy"}), Error); }
}

TEST_CASE("scatter plot") {
  ResultTable t;
  for (const char* d : {"d1", "d2"})
    for (const char* m : {"gcn", "gat"})
      for (std::uint64_t seed : {1, 2}) {
        t.rows.push_back(row(d, m, "none", seed, 0.8, 0.3));
        t.rows.push_back(row(d, m, "adv_debias", seed, 0.7, 0.1));
      }
  const std::string svg = scatter_svg(t, "accuracy", "delta_sp");
  CHECK(svg.rfind("<svg", 0) == 0);
  CHECK(count_of(svg, "class=\"baseline-x\"") == 4);
  CHECK(svg.find("adv_debias") != std::string::npos);
  CHECK_THROWS_AS(scatter_svg(t, "accuracy", "unfairness"), Error);
  CHECK_THROWS_AS(metric_value(t.rows[0].record, "speed"), Error);
}
