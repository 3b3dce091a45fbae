#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "vimlab/data.hpp"
#include "vimlab/model.hpp"
#include "vimlab/objectives.hpp"

namespace vimlab {

struct AdamState {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::uint64_t t = 0;
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;

  explicit AdamState(double learning_rate = 1e-4) : lr(learning_rate) {}
};

// Where in training a step happens; only used for abort diagnostics.
struct StepContext {
  std::size_t epoch = 0;
  std::size_t batch = 0;
};

// One bias-corrected Adam update using each parameter's accumulated grad.
// Throws NumericalAbort on a non-finite gradient, before touching anything.
void adam_step(AdamState& state, std::span<const NamedParameter> params, const StepContext& where = {});

struct TrainConfig {
  std::size_t epochs = 60;
  std::size_t batch_size = 100;
  std::uint64_t seed = 1;
  ObjectiveSpec objective;
  std::size_t eval_every = 1;
  double lr = 1e-4;
  std::size_t latent_samples = 1;

  void validate() const;
};

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  double train_nll = 0.0;
  double train_penalty = 0.0;
  std::optional<double> test_error;  // percent
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;
  double final_test_error = 0.0;
  std::size_t steps = 0;
};

// Independent, reproducible random streams derived from one run seed.
enum class Stream : std::uint64_t { init = 1, shuffle = 2, latent = 3, prior = 4, eval = 5 };
std::mt19937_64 make_stream(std::uint64_t seed, Stream which);

/// Minibatch optimiser for one model; owns the Adam state and RNG streams.
class Trainer {
 public:
  Trainer(StochasticClassifier& model, const TrainConfig& config);

  struct StepResult {
    double loss = 0.0;
    double nll = 0.0;
    double penalty = 0.0;
  };

  // zero grads -> loss -> backward -> adam. Throws NumericalAbort on NaN/Inf.
  StepResult step(const Tensor& x, std::span<const int> labels, const StepContext& where = {});

  const AdamState& adam() const noexcept { return adam_; }

 private:
  StochasticClassifier& model_;
  TrainConfig config_;
  AdamState adam_;
  ObjectiveStreams streams_;
};

using EpochObserver = std::function<void(const EpochRecord&)>;

// shuffle -> minibatches -> step, for config.epochs epochs; test error every
// eval_every epochs and after the last one. A trailing batch of one example
// is folded into the previous batch so every step sees at least two.
TrainHistory train(StochasticClassifier& model, const Dataset& train_set, const Dataset& test_set,
                   const TrainConfig& config, const EpochObserver& observer = {});

}  // namespace vimlab
