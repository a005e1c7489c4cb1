#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "fairgnn/dataset.hpp"
#include "fairgnn/evaluation.hpp"
#include "fairgnn/interventions.hpp"
#include "fairgnn/models.hpp"

namespace fairgnn {

inline constexpr int kSchemaVersion = 1;

struct RegionFilter {
  std::string column;
  std::string prefix;
};

/// Either a synthetic generator spec or a pair of local files plus schema.
struct DatasetRef {
  std::string name;
  std::optional<SyntheticSpec> synthetic;
  std::uint64_t synthetic_seed = 0;
  std::filesystem::path nodes_file;
  std::filesystem::path edges_file;
  TabularSchema schema;
  std::optional<RegionFilter> region;
};

/// One method with its parameter grid. Knobs the method does not use stay
/// empty; points() expands the cartesian product.
struct MethodGrid {
  Method method = Method::none;
  std::vector<double> alpha;
  std::vector<double> beta;
  std::vector<double> lambda;
  std::vector<FairMode> mode;

  std::vector<InterventionParams> points() const;
};

struct TrainingConfig {
  double lr = 0.01;
  int epochs = 200;
  double weight_decay = 5e-4;
  std::size_t hidden = 64;
  int n_layers = 2;
  double dropout = 0.5;
  int gat_heads = 4;
};

struct ExperimentPlan {
  int schema_version = kSchemaVersion;
  DatasetRef dataset;
  std::vector<ModelKind> models;
  /// Intervention methods; the baseline (method none) is always added.
  std::vector<MethodGrid> methods;
  std::vector<std::uint64_t> seeds;
  /// Keep one split (split_seed) and vary only initialization across seeds.
  bool fix_split = false;
  std::uint64_t split_seed = 0;
  TrainingConfig training;
  int workers = 1;
  std::filesystem::path output_dir = "results";

  /// sum over methods of |grid| * |seeds| * |models|, plus |models| * |seeds| baselines.
  std::size_t expected_runs() const;
};

/// Parses and validates a JSON config. Unknown or duplicate keys and schema
/// violations raise ConfigError naming the offending key path. Relative file
/// paths resolve against `base_dir`.
ExperimentPlan parse_config(const std::string& text, const std::filesystem::path& base_dir = {});
ExperimentPlan load_config(const std::filesystem::path& path);

struct RunSpec {
  ModelKind model = ModelKind::gcn;
  InterventionParams params;
  std::uint64_t seed = 0;
};

/// Baselines first, then every method grid point, for every model and seed.
std::vector<RunSpec> enumerate_runs(const ExperimentPlan& plan);

struct ResultRow {
  MetricRecord record;
  /// Empty for a successful run; otherwise the failure message and every
  /// metric is NaN (written as NA).
  std::string error;

  bool ok() const { return error.empty(); }
};

struct ResultTable {
  int schema_version = kSchemaVersion;
  std::vector<ResultRow> rows;
};

Graph load_dataset(const DatasetRef& ref);

/// Provenance-filled record for one run on an already loaded graph.
MetricRecord run_one(const ExperimentPlan& plan, const Graph& graph, const RunSpec& run);

/// Loads the dataset (failure aborts before any run), executes every run on
/// a worker pool and returns the canonically sorted table. The worker count
/// comes from the plan unless AUDIT_WORKERS is set.
ResultTable execute(const ExperimentPlan& plan);

/// Sort by (dataset, model, method, alpha, beta, lambda, mode, seed).
void sort_canonical(ResultTable& table);

const std::vector<std::string>& csv_columns();
const std::vector<std::string>& metric_names();
/// Throws Error for an unknown metric name.
double metric_value(const MetricRecord& r, const std::string& metric);

/// Keys accepted by aggregate(): any non-metric CSV column.
struct SummaryRow {
  std::vector<std::string> key;
  std::size_t n = 0;
  std::map<std::string, double> mean;
  /// Sample standard deviation; 0 when n == 1.
  std::map<std::string, double> std;
};

/// Groups successful rows by `group_by` columns and reports mean, sample
/// standard deviation and count per metric. Groups come out sorted by key.
std::vector<SummaryRow> aggregate(const ResultTable& table, const std::vector<std::string>& group_by);

/// Shortest representation that parses back to the same double; NA for NaN.
std::string format_number(double v);

std::string to_csv(const ResultTable& table);
ResultTable parse_csv(const std::string& text);
std::string summary_to_csv(const std::vector<SummaryRow>& rows,
                           const std::vector<std::string>& group_by);

std::string to_json(const ResultTable& table, const ExperimentPlan* plan = nullptr);
ResultTable parse_json(const std::string& text);

/// Metric-vs-metric scatter of per-setting means. Each (dataset, model)
/// baseline is drawn as one X glyph of class "baseline-x"; methods differ by
/// marker shape and models by color.
std::string scatter_svg(const ResultTable& table, const std::string& x_metric,
                        const std::string& y_metric);

/// Writes results.csv, results.json and errors.log into plan.output_dir.
void write_outputs(const ResultTable& table, const ExperimentPlan& plan);

}  // namespace fairgnn
