#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "vimlab/adversarial.hpp"
#include "vimlab/data.hpp"
#include "vimlab/model.hpp"
#include "vimlab/optim.hpp"

namespace vimlab {

enum class DatasetKind { mnist, blobs };

struct DatasetConfig {
  DatasetKind kind = DatasetKind::mnist;
  std::optional<std::filesystem::path> dir;  // MNIST only; falls back to $VIMLAB_DATA_DIR
  std::size_t train_subsample = 0;           // first N training rows, 0 = all
  std::size_t test_subsample = 0;
  BlobSpec blobs;
  std::size_t blobs_test_per_class = 250;
  std::uint64_t blobs_test_seed = 2;
};

struct EvalConfig {
  bool repr = true;
  bool attack = false;
  std::size_t test_samples = 0;  // 0: predict at z = mu
  std::size_t kmeans_restarts = 5;
  std::size_t attack_count = 10;
  int attack_source = 0;
  int attack_target = 1;
};

struct SweepConfig {
  std::vector<double> beta;
  std::vector<double> sigma;
  std::vector<std::uint64_t> seeds;
};

struct RunConfig {
  DatasetConfig dataset;
  ModelShape model;
  TrainConfig train;
  EvalConfig eval;
  AttackConfig attack;
  SweepConfig sweep;
  std::filesystem::path output_dir = "runs";
};

// Parses a RunConfig document. A report.json is accepted too: its "config"
// echo is used. Unknown keys, wrong types and out-of-range values are all
// collected into one ConfigError.
RunConfig parse_run_config(const nlohmann::json& doc);
RunConfig load_run_config(const std::filesystem::path& path);
// Fully resolved echo; parse_run_config(run_config_to_json(c)) reproduces c.
nlohmann::json run_config_to_json(const RunConfig& config);

}  // namespace vimlab
