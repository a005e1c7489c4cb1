// audit: run fairness/privacy sweeps over GNNs and summarize the results.
//
//   audit run <config.json> [--workers N] [--output DIR]
//   audit report <results-dir> --group-by model,method [--output FILE]
//   audit plot <results-dir> --x accuracy --y delta_sp [--output FILE]

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "fairgnn/error.hpp"
#include "fairgnn/runner.hpp"

namespace {

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw fairgnn::Error("cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw fairgnn::Error("cannot write " + path.string());
  out << content;
}

fairgnn::ResultTable load_results(const std::filesystem::path& dir) {
  if (std::filesystem::exists(dir / "results.json"))
    return fairgnn::parse_json(read_file(dir / "results.json"));
  return fairgnn::parse_csv(read_file(dir / "results.csv"));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"GNN fairness and privacy audit"};
  app.require_subcommand(1);

  auto* run = app.add_subcommand("run", "Execute every run of an experiment config");
  std::string config_path;
  int workers = 0;
  std::string run_output;
  bool quiet = false;
  run->add_option("config", config_path, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
  run->add_option("--workers", workers, "Worker threads (overrides the config)")->check(CLI::PositiveNumber);
  run->add_option("--output", run_output, "Output directory (overrides the config)");
  run->add_flag("--quiet", quiet, "Suppress warnings");

  auto* report = app.add_subcommand("report", "Per-group mean, sample std and count");
  std::string report_dir;
  std::vector<std::string> group_by{"dataset", "model", "method", "alpha", "beta", "lambda", "mode"};
  std::string report_output;
  report->add_option("results-dir", report_dir, "Directory with results.csv or results.json")
      ->required()
      ->check(CLI::ExistingDirectory);
  report->add_option("--group-by", group_by, "Key columns to group by")->delimiter(',');
  report->add_option("--output", report_output, "Write the summary CSV here instead of stdout");

  auto* plot = app.add_subcommand("plot", "Metric-vs-metric SVG scatter");
  std::string plot_dir;
  std::string x_metric = "accuracy", y_metric = "delta_sp";
  std::string plot_output;
  plot->add_option("results-dir", plot_dir, "Directory with results.csv or results.json")
      ->required()
      ->check(CLI::ExistingDirectory);
  plot->add_option("--x", x_metric, "Metric on the x axis");
  plot->add_option("--y", y_metric, "Metric on the y axis");
  plot->add_option("--output", plot_output, "SVG path (default <results-dir>/<y>_vs_<x>.svg)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) {
      if (quiet) fairgnn::set_warnings_enabled(false);
      fairgnn::ExperimentPlan plan = fairgnn::load_config(config_path);
      if (workers > 0) plan.workers = workers;
      if (!run_output.empty()) plan.output_dir = run_output;
      const fairgnn::ResultTable table = fairgnn::execute(plan);
      fairgnn::write_outputs(table, plan);
      std::size_t failed = 0;
      for (const auto& row : table.rows) failed += row.ok() ? 0 : 1;
      std::cout << table.rows.size() << " runs (" << plan.expected_runs() << " planned), " << failed
                << " failed; results in " << plan.output_dir.string() << "\n";
      return failed == 0 ? 0 : 3;
    }
    if (*report) {
      const fairgnn::ResultTable table = load_results(report_dir);
      const std::string csv = fairgnn::summary_to_csv(fairgnn::aggregate(table, group_by), group_by);
      if (report_output.empty()) std::cout << csv;
      else write_file(report_output, csv);
      return 0;
    }
    if (*plot) {
      const fairgnn::ResultTable table = load_results(plot_dir);
      const std::string svg = fairgnn::scatter_svg(table, x_metric, y_metric);
      const std::filesystem::path out =
          plot_output.empty() ? std::filesystem::path(plot_dir) / (y_metric + "_vs_" + x_metric + ".svg")
                              : std::filesystem::path(plot_output);
      write_file(out, svg);
      std::cout << "wrote " << out.string() << "\n";
      return 0;
    }
  } catch (const fairgnn::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
