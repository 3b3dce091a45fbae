#pragma once

#include <exception>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "json.hpp"
#include "vimlab/checkpoint.hpp"
#include "vimlab/config.hpp"
#include "vimlab/data.hpp"

namespace vimlab {

enum ExitCode : int {
  kExitOk = 0,
  kExitFailure = 1,
  kExitConfig = 2,
  kExitData = 3,
  kExitNumerical = 4,
  kExitVersion = 5,
};

int exit_code_for(const std::exception& e);

struct DataBundle {
  Dataset train;
  Dataset test;
};

// MNIST directory precedence: flag, then dataset.dir, then $VIMLAB_DATA_DIR.
std::optional<std::filesystem::path> mnist_dir(const DatasetConfig& config,
                                               const std::optional<std::filesystem::path>& flag);
DataBundle load_data(const DatasetConfig& config, const std::optional<std::filesystem::path>& data_dir_flag = {});

inline constexpr const char* kReportFile = "report.json";
inline constexpr const char* kCheckpointFile = "model.ckpt";
inline constexpr const char* kTimingFile = "timing.json";
inline constexpr const char* kSummaryFile = "summary.csv";
inline constexpr const char* kSummaryHeader = "objective,beta,sigma,seed,test_error,adjR,hoyer,status";

struct RunResult {
  nlohmann::json report;
  std::filesystem::path report_path;
  std::filesystem::path checkpoint_path;
  double wall_seconds = 0.0;
};

// Train, evaluate and write report.json, model.ckpt and timing.json into
// out_dir. The report holds no timings, so equal inputs give equal bytes.
RunResult run_experiment(const RunConfig& config, const DataBundle& data, const std::filesystem::path& out_dir,
                         std::ostream* log = nullptr);

struct SweepCell {
  RunConfig config;  // single run: sweep grids cleared
  std::string name;
};

// beta x sigma x seeds; an empty seed list means {train.seed}.
std::vector<SweepCell> sweep_cells(const RunConfig& config);

struct SweepSummary {
  std::filesystem::path csv;
  std::size_t ok = 0;
  std::size_t failed = 0;
};

// Cells run on `jobs` threads; a failing cell is recorded and skipped.
SweepSummary run_sweep(const RunConfig& config, const DataBundle& data, const std::filesystem::path& out_dir,
                       std::size_t jobs, std::ostream* log = nullptr);

enum class EvalWhich { error, repr, attack };
EvalWhich parse_eval_which(const std::string& name);

// Report fragment for a frozen model. samples > 0 adds the sampled test error.
nlohmann::json evaluate(const StochasticClassifier& model, const RunConfig& config, const Dataset& test,
                        EvalWhich which, std::size_t samples = 0);

// One TSV per (objective, sigma) from every report.json under reports_dir.
std::vector<std::filesystem::path> write_plot_data(const std::filesystem::path& reports_dir,
                                                   const std::filesystem::path& out_dir);

}  // namespace vimlab
