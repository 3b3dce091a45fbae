#include "vimlab/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <fstream>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include "vimlab/errors.hpp"
#include "vimlab/metrics.hpp"
#include "vimlab/report.hpp"

namespace vimlab {

using nlohmann::json;
namespace fs = std::filesystem;

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e)) return kExitConfig;
  if (dynamic_cast<const VersionError*>(&e)) return kExitVersion;
  if (dynamic_cast<const DataError*>(&e)) return kExitData;
  if (dynamic_cast<const NumericalAbort*>(&e)) return kExitNumerical;
  return kExitFailure;
}

std::optional<fs::path> mnist_dir(const DatasetConfig& config, const std::optional<fs::path>& flag) {
  if (flag && !flag->empty()) return flag;
  if (config.dir && !config.dir->empty()) return config.dir;
  return resolve_data_dir(std::nullopt);
}

DataBundle load_data(const DatasetConfig& config, const std::optional<fs::path>& data_dir_flag) {
  DataBundle out;
  if (config.kind == DatasetKind::blobs) {
    out.train = synthetic_blobs(config.blobs, Split::train);
    BlobSpec test_spec = config.blobs;
    test_spec.per_class = config.blobs_test_per_class;
    test_spec.seed = config.blobs_test_seed;
    out.test = synthetic_blobs(test_spec, Split::test);
  } else {
    const auto dir = mnist_dir(config, data_dir_flag);
    if (!dir) {
      throw DataError(std::string("no MNIST directory given: use --data-dir, dataset.dir or $") + kDataDirEnv);
    }
    out.train = load_mnist(*dir, Split::train);
    out.test = load_mnist(*dir, Split::test);
  }
  if (config.train_subsample > 0) out.train = out.train.head(config.train_subsample);
  if (config.test_subsample > 0) out.test = out.test.head(config.test_subsample);
  return out;
}

namespace {

json data_json(const Dataset& d) {
  return {{"size", d.size()}, {"dim", d.dim()}, {"classes", d.classes}, {"provenance", d.provenance}};
}

std::size_t class_count(const Dataset& d, int c) {
  return static_cast<std::size_t>(std::count(d.labels.begin(), d.labels.end(), c));
}

void log_line(std::ostream* log, const std::string& line) {
  static std::mutex mu;
  if (!log) return;
  std::lock_guard lock(mu);
  *log << line << '\n' << std::flush;
}

}  // namespace

json evaluate(const StochasticClassifier& model, const RunConfig& config, const Dataset& test, EvalWhich which,
              std::size_t samples) {
  json out = json::object();
  const std::uint64_t seed = config.train.seed;
  switch (which) {
    case EvalWhich::error: {
      out["test_error"] = test_error(model, test);
      if (samples > 0) {
        auto rng = make_stream(seed, Stream::eval);
        const auto pred = model.predict_sampled(test.images, samples, rng);
        out["sampled_test_error"] = test_error(pred.classes, test.labels);
        out["test_samples"] = samples;
      }
      break;
    }
    case EvalWhich::repr:
      out["repr"] = repr_to_json(representation_report(model, test, seed, config.eval.kmeans_restarts));
      break;
    case EvalWhich::attack: {
      const auto& ev = config.eval;
      if (class_count(test, ev.attack_source) < ev.attack_count) {
        throw DataError("test split has fewer than " + std::to_string(ev.attack_count) + " examples of class " +
                        std::to_string(ev.attack_source));
      }
      out["robustness"] = robustness_to_json(
          robustness_report(model, test, config.attack, ev.attack_source, ev.attack_target, ev.attack_count));
      break;
    }
  }
  return out;
}

RunResult run_experiment(const RunConfig& config, const DataBundle& data, const fs::path& out_dir, std::ostream* log) {
  using clock = std::chrono::steady_clock;
  const auto t0 = clock::now();
  if (data.train.dim() != config.model.input_dim || data.train.classes != config.model.classes) {
    throw ConfigError({"model: input_dim/classes do not match the loaded dataset"});
  }
  auto init_rng = make_stream(config.train.seed, Stream::init);
  StochasticClassifier model = StochasticClassifier::initialized(config.model, init_rng);

  const std::string tag = std::string(variant_name(config.train.objective.variant)) +
                          " beta=" + format_double(config.train.objective.beta) +
                          " sigma=" + format_double(config.train.objective.sigma) +
                          " seed=" + std::to_string(config.train.seed);
  const TrainHistory history = train(model, data.train, data.test, config.train, [&](const EpochRecord& e) {
    std::ostringstream os;
    os << "[" << tag << "] epoch " << e.epoch << " loss " << e.train_loss;
    if (e.test_error) os << " test_error " << *e.test_error << "%";
    log_line(log, os.str());
  });
  const auto t_train = clock::now();

  json report;
  report["code_version"] = code_version();
  report["config"] = run_config_to_json(config);
  report["seed"] = config.train.seed;
  report["objective"] = {{"variant", std::string(variant_name(config.train.objective.variant))},
                         {"beta", config.train.objective.beta},
                         {"sigma", config.train.objective.sigma}};
  report["data"] = {{"train", data_json(data.train)}, {"test", data_json(data.test)}};
  report["history"] = history_to_json(history);
  report["steps"] = history.steps;
  report["final_test_error"] = history.final_test_error;
  if (config.eval.test_samples > 0) {
    report.update(evaluate(model, config, data.test, EvalWhich::error, config.eval.test_samples));
    report["final_test_error"] = history.final_test_error;
  }
  if (config.eval.repr) report.update(evaluate(model, config, data.test, EvalWhich::repr));
  if (config.eval.attack) report.update(evaluate(model, config, data.test, EvalWhich::attack));
  report["checkpoint"] = kCheckpointFile;

  fs::create_directories(out_dir);
  RunResult result;
  result.report = report;
  result.report_path = out_dir / kReportFile;
  result.checkpoint_path = out_dir / kCheckpointFile;
  save_checkpoint(result.checkpoint_path, model,
                  {{"config", report["config"]}, {"code_version", code_version()},
                   {"final_test_error", history.final_test_error}});
  write_json(result.report_path, report);

  const auto t_end = clock::now();
  result.wall_seconds = std::chrono::duration<double>(t_end - t0).count();
  write_json(out_dir / kTimingFile, {{"wall_seconds", result.wall_seconds},
                                     {"train_seconds", std::chrono::duration<double>(t_train - t0).count()},
                                     {"eval_seconds", std::chrono::duration<double>(t_end - t_train).count()}});
  std::ostringstream os;
  os << "[" << tag << "] final test error " << history.final_test_error << "% -> " << result.report_path.string();
  log_line(log, os.str());
  return result;
}

std::vector<SweepCell> sweep_cells(const RunConfig& config) {
  std::vector<std::string> problems;
  if (config.sweep.beta.empty()) problems.emplace_back("sweep.beta: grid must be nonempty for a sweep");
  if (config.sweep.sigma.empty()) problems.emplace_back("sweep.sigma: grid must be nonempty for a sweep");
  if (!problems.empty()) throw ConfigError(std::move(problems));
  std::vector<std::uint64_t> seeds = config.sweep.seeds;
  if (seeds.empty()) seeds.push_back(config.train.seed);

  std::vector<SweepCell> cells;
  for (double beta : config.sweep.beta) {
    for (double sigma : config.sweep.sigma) {
      for (std::uint64_t seed : seeds) {
        SweepCell cell{config, {}};
        cell.config.sweep = {};
        cell.config.train.objective.beta = beta;
        cell.config.train.objective.sigma = sigma;
        cell.config.train.seed = seed;
        cell.name = "cell_" + std::string(variant_name(config.train.objective.variant)) + "_b" +
                    format_double(beta) + "_s" + format_double(sigma) + "_seed" + std::to_string(seed);
        cells.push_back(std::move(cell));
      }
    }
  }
  return cells;
}

SweepSummary run_sweep(const RunConfig& config, const DataBundle& data, const fs::path& out_dir, std::size_t jobs,
                       std::ostream* log) {
  const auto cells = sweep_cells(config);
  fs::create_directories(out_dir);
  std::vector<std::string> rows(cells.size());
  std::vector<char> ok(cells.size(), 0);
  std::atomic<std::size_t> next{0};

  auto worker = [&] {
    for (std::size_t i = next++; i < cells.size(); i = next++) {
      const auto& cell = cells[i];
      const auto& obj = cell.config.train.objective;
      std::string prefix = std::string(variant_name(obj.variant)) + "," + format_double(obj.beta) + "," +
                           format_double(obj.sigma) + "," + std::to_string(cell.config.train.seed) + ",";
      const fs::path dir = out_dir / cell.name;
      try {
        const auto res = run_experiment(cell.config, data, dir, log);
        const json& r = res.report;
        std::string adj, hoy;
        if (r.contains("repr")) {
          adj = format_double(r["repr"]["adjR"].get<double>());
          hoy = format_double(r["repr"]["hoyer"].get<double>());
        }
        rows[i] = prefix + format_double(r["final_test_error"].get<double>()) + "," + adj + "," + hoy + ",ok";
        ok[i] = 1;
      } catch (const std::exception& e) {
        const int code = exit_code_for(e);
        const char* status = code == kExitNumerical ? "numerical_abort"
                             : code == kExitConfig  ? "config_error"
                             : code == kExitData    ? "data_error"
                                                    : "error";
        rows[i] = prefix + ",,," + status;
        fs::create_directories(dir);
        std::ofstream(dir / "error.txt") << e.what() << '\n';
        log_line(log, "[" + cell.name + "] failed: " + e.what());
      }
    }
  };

  jobs = std::clamp<std::size_t>(jobs, 1, cells.size());
  {
    std::vector<std::jthread> pool;
    for (std::size_t t = 1; t < jobs; ++t) pool.emplace_back(worker);
    worker();
  }

  SweepSummary summary;
  summary.csv = out_dir / kSummaryFile;
  std::ofstream csv(summary.csv, std::ios::binary | std::ios::trunc);
  if (!csv) throw DataError("cannot write " + summary.csv.string());
  csv << kSummaryHeader << '\n';
  for (std::size_t i = 0; i < rows.size(); ++i) {
    csv << rows[i] << '\n';
    (ok[i] ? summary.ok : summary.failed) += 1;
  }
  return summary;
}

EvalWhich parse_eval_which(const std::string& name) {
  if (name == "error") return EvalWhich::error;
  if (name == "repr") return EvalWhich::repr;
  if (name == "attack") return EvalWhich::attack;
  throw ConfigError({"--which: expected error, repr or attack, got \"" + name + "\""});
}

std::vector<fs::path> write_plot_data(const fs::path& reports_dir, const fs::path& out_dir) {
  if (!fs::is_directory(reports_dir)) throw DataError(reports_dir.string() + ": not a directory");
  std::vector<fs::path> reports;
  for (const auto& entry : fs::recursive_directory_iterator(reports_dir)) {
    if (entry.is_regular_file() && entry.path().filename() == kReportFile) reports.push_back(entry.path());
  }
  if (reports.empty()) throw DataError(reports_dir.string() + ": no " + kReportFile + " files found");
  std::sort(reports.begin(), reports.end());

  struct Row {
    double beta;
    std::uint64_t seed;
    double error;
    std::optional<double> adj, hoyer;
  };
  std::map<std::pair<std::string, double>, std::vector<Row>> series;
  for (const auto& path : reports) {
    const json r = read_json(path);
    try {
      const auto& obj = r.at("objective");
      Row row{obj.at("beta").get<double>(), r.at("seed").get<std::uint64_t>(),
              r.at("final_test_error").get<double>(), {}, {}};
      if (r.contains("repr")) {
        row.adj = r["repr"].at("adjR").get<double>();
        row.hoyer = r["repr"].at("hoyer").get<double>();
      }
      series[{obj.at("variant").get<std::string>(), obj.at("sigma").get<double>()}].push_back(row);
    } catch (const nlohmann::json::exception& e) {
      throw DataError(path.string() + ": not a report (" + e.what() + ")");
    }
  }

  fs::create_directories(out_dir);
  std::vector<fs::path> written;
  for (auto& [key, rows] : series) {
    std::stable_sort(rows.begin(), rows.end(),
                     [](const Row& a, const Row& b) { return std::tie(a.beta, a.seed) < std::tie(b.beta, b.seed); });
    const fs::path path = out_dir / ("series_" + key.first + "_sigma" + format_double(key.second) + ".tsv");
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw DataError("cannot write " + path.string());
    os << "log10_beta\tbeta\tseed\ttest_error\tadjR\thoyer\n";
    auto opt = [](const std::optional<double>& v) { return v ? format_double(*v) : std::string(); };
    for (const auto& row : rows) {
      os << format_double(std::log10(row.beta)) << '\t' << format_double(row.beta) << '\t' << row.seed << '\t'
         << format_double(row.error) << '\t' << opt(row.adj) << '\t' << opt(row.hoyer) << '\n';
    }
    written.push_back(path);
  }
  return written;
}

}  // namespace vimlab
