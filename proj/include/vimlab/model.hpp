#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "vimlab/graph.hpp"
#include "vimlab/tensor.hpp"

namespace vimlab {

inline constexpr double kLogvarFloor = -10.0;
inline constexpr double kLogvarCeil = 10.0;

struct ModelShape {
  std::size_t input_dim = 784;
  std::vector<std::size_t> hidden{1024, 1024};
  std::size_t latent_dim = 256;
  std::size_t classes = 10;

  bool operator==(const ModelShape&) const = default;
};

struct NamedParameter {
  std::string name;
  Tensor tensor;
};

struct Linear {
  Tensor weight;  // in x out
  Tensor bias;    // out
};

// Encoder heads for one minibatch. logvar is already clamped.
struct Encoding {
  Tensor mu;
  Tensor logvar;
};

// One reparameterized draw per row: z = mu + exp(logvar / 2) * eps.
struct LatentBatch {
  Tensor mu;
  Tensor logvar;
  Tensor eps;
  Tensor z;
};

struct Predictions {
  std::vector<int> classes;
  Tensor probabilities;  // n x C
};

/// Stochastic classifier X -> Z -> Y.
///
/// The encoder is an MLP (ReLU between hidden layers) whose last layer emits
/// 2K values per example: K means followed by K log-variances. The decoder is
/// a linear softmax head on z. Parameters are tensor handles, so the class is
/// move-only; clone() gives an independent copy.
class StochasticClassifier {
 public:
  // All parameters zero.
  explicit StochasticClassifier(ModelShape shape);
  // Weights uniform in +-sqrt(6 / (fan_in + fan_out)), biases zero.
  static StochasticClassifier initialized(ModelShape shape, std::mt19937_64& rng);

  StochasticClassifier(StochasticClassifier&&) = default;
  StochasticClassifier& operator=(StochasticClassifier&&) = default;
  StochasticClassifier(const StochasticClassifier&) = delete;
  StochasticClassifier& operator=(const StochasticClassifier&) = delete;

  StochasticClassifier clone() const;

  const ModelShape& shape() const noexcept { return shape_; }
  std::size_t latent_dim() const noexcept { return shape_.latent_dim; }
  std::size_t classes() const noexcept { return shape_.classes; }

  std::vector<Linear>& encoder() noexcept { return encoder_; }
  const std::vector<Linear>& encoder() const noexcept { return encoder_; }
  Linear& decoder() noexcept { return decoder_; }
  const Linear& decoder() const noexcept { return decoder_; }

  // Declaration order: encoder layers first to last, then decoder.
  std::vector<NamedParameter> parameters() const;
  void zero_grad();

  Encoding encode(Graph& g, const Tensor& x) const;
  LatentBatch sample_latent(Graph& g, const Tensor& mu, const Tensor& logvar, const Tensor& eps) const;
  Tensor decode(Graph& g, const Tensor& z) const;
  // Deterministic path: logits of decode(mu(x)).
  Tensor mean_logits(Graph& g, const Tensor& x) const;

  // z = mu, softmax, argmax with ties to the lowest index.
  Predictions predict(const Tensor& x) const;
  // Averages softmax over `samples` reparameterized draws per example.
  Predictions predict_sampled(const Tensor& x, std::size_t samples, std::mt19937_64& rng) const;
  // Latent means for every row of x (n x K).
  Tensor representations(const Tensor& x) const;

 private:
  ModelShape shape_;
  std::vector<Linear> encoder_;
  Linear decoder_;
};

std::size_t argmax_lowest(std::span<const double> values);
Tensor softmax_rows(const Tensor& logits);
Tensor standard_normal(Shape shape, std::mt19937_64& rng);

}  // namespace vimlab
