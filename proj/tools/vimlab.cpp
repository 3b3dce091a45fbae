#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <thread>

#include "CLI11.hpp"
#include "vimlab/checkpoint.hpp"
#include "vimlab/config.hpp"
#include "vimlab/errors.hpp"
#include "vimlab/harness.hpp"
#include "vimlab/metrics.hpp"
#include "vimlab/report.hpp"

namespace fs = std::filesystem;
using namespace vimlab;

namespace {

struct Options {
  std::string config;
  std::string data_dir;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::size_t jobs = std::max(1u, std::thread::hardware_concurrency());
  std::size_t samples = 0;
  std::string which = "error";
  std::string checkpoint;
  std::string reports;
  bool quiet = false;
};

std::optional<fs::path> data_flag(const Options& o) {
  if (o.data_dir.empty()) return std::nullopt;
  return fs::path(o.data_dir);
}

int cmd_train(const Options& o) {
  RunConfig cfg = load_run_config(o.config);
  if (o.seed) cfg.train.seed = *o.seed;
  if (o.samples > 0) cfg.eval.test_samples = o.samples;
  const fs::path out = o.out.empty() ? cfg.output_dir : fs::path(o.out);
  const DataBundle data = load_data(cfg.dataset, data_flag(o));
  const auto res = run_experiment(cfg, data, out, o.quiet ? nullptr : &std::cerr);
  std::cout << variant_name(cfg.train.objective.variant) << " beta=" << format_double(cfg.train.objective.beta)
            << " sigma=" << format_double(cfg.train.objective.sigma) << " seed=" << cfg.train.seed
            << " test_error=" << format_double(res.report["final_test_error"].get<double>()) << "%"
            << " time=" << res.wall_seconds << "s report=" << res.report_path.string() << '\n';
  return kExitOk;
}

int cmd_sweep(const Options& o) {
  RunConfig cfg = load_run_config(o.config);
  if (o.seed) cfg.sweep.seeds = {*o.seed};
  if (o.samples > 0) cfg.eval.test_samples = o.samples;
  const fs::path out = o.out.empty() ? cfg.output_dir : fs::path(o.out);
  sweep_cells(cfg);  // grid errors before loading data
  const DataBundle data = load_data(cfg.dataset, data_flag(o));
  const auto summary = run_sweep(cfg, data, out, o.jobs, o.quiet ? nullptr : &std::cerr);
  std::cout << "sweep: " << summary.ok << " ok, " << summary.failed << " failed, summary " << summary.csv.string()
            << '\n';
  return summary.failed == 0 ? kExitOk : kExitFailure;
}

int cmd_eval(const Options& o) {
  const EvalWhich which = parse_eval_which(o.which);
  Checkpoint ck = load_checkpoint(o.checkpoint);
  RunConfig cfg;
  if (!o.config.empty()) {
    cfg = load_run_config(o.config);
    if (!(cfg.model == ck.model.shape())) {
      throw VersionError("checkpoint " + o.checkpoint + " does not match the model in " + o.config);
    }
  } else if (ck.meta.contains("config")) {
    cfg = parse_run_config(ck.meta["config"]);
  } else {
    throw ConfigError({"checkpoint carries no config; pass --config"});
  }
  if (o.seed) cfg.train.seed = *o.seed;
  const DataBundle data = load_data(cfg.dataset, data_flag(o));
  if (data.test.dim() != ck.model.shape().input_dim) {
    throw VersionError("checkpoint input width differs from the evaluation data");
  }
  nlohmann::json frag = evaluate(ck.model, cfg, data.test, which, o.samples);
  frag["checkpoint"] = o.checkpoint;
  if (!o.out.empty()) write_json(o.out, frag);
  std::cout << frag.dump(2) << '\n';
  return kExitOk;
}

int cmd_plotdata(const Options& o) {
  const fs::path out = o.out.empty() ? fs::path(o.reports) : fs::path(o.out);
  for (const auto& p : write_plot_data(o.reports, out)) std::cout << p.string() << '\n';
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Stochastic classifier training, sweeps and evaluation"};
  app.set_version_flag("--version", code_version());
  app.require_subcommand(1);
  Options o;

  auto* train = app.add_subcommand("train", "Train one configuration and write its report and checkpoint");
  auto* sweep = app.add_subcommand("sweep", "Run the beta x sigma x seed grid of a configuration");
  auto* eval = app.add_subcommand("eval", "Evaluate a saved checkpoint");
  auto* plot = app.add_subcommand("plotdata", "Emit error/adjR/hoyer series versus log10(beta)");

  for (auto* sub : {train, sweep}) {
    sub->add_option("--config", o.config, "RunConfig JSON file (a report.json also works)")->required();
    sub->add_option("--samples", o.samples, "Also report test error averaged over N latent draws");
  }
  for (auto* sub : {train, sweep, eval}) {
    sub->add_option("--data-dir", o.data_dir, std::string("MNIST directory (default: $") + kDataDirEnv + ")");
    sub->add_option("--seed", o.seed, "Override the run seed");
    sub->add_flag("--quiet", o.quiet, "No per-epoch log on stderr");
  }
  train->add_option("--out", o.out, "Output directory (default: output_dir from the config)");
  sweep->add_option("--out", o.out, "Output directory (default: output_dir from the config)");
  sweep->add_option("--jobs", o.jobs, "Cells run in parallel")->check(CLI::PositiveNumber);

  eval->add_option("--checkpoint", o.checkpoint, "Checkpoint written by train")->required();
  eval->add_option("--which", o.which, "Evaluator")->check(CLI::IsMember({"error", "repr", "attack"}));
  eval->add_option("--config", o.config, "Expected configuration (default: the one stored in the checkpoint)");
  eval->add_option("--samples", o.samples, "Test error averaged over N latent draws");
  eval->add_option("--out", o.out, "Also write the fragment to this JSON file");

  plot->add_option("reports", o.reports, "Directory searched recursively for report.json")->required();
  plot->add_option("--out", o.out, "Directory for the series files (default: the reports directory)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*train) return cmd_train(o);
    if (*sweep) return cmd_sweep(o);
    if (*eval) return cmd_eval(o);
    if (*plot) return cmd_plotdata(o);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code_for(e);
  }
  return kExitFailure;
}
