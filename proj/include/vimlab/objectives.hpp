#pragma once

#include <random>
#include <span>
#include <string>
#include <string_view>

#include "vimlab/graph.hpp"
#include "vimlab/model.hpp"

namespace vimlab {

enum class Variant { baseline, vib, vim };

std::string_view variant_name(Variant v);
// Accepts "baseline", "vib", "vim" (any case); throws ContractError otherwise.
Variant parse_variant(std::string_view name);

/// Which penalty to add to the cross-entropy, and how strongly.
///
/// beta is the Lagrange multiplier and sigma the prior standard deviation,
/// p(z) = N(0, sigma^2 I). Baseline ignores both. mmd_prior_samples == 0
/// draws as many prior samples as there are latent samples in the batch.
struct ObjectiveSpec {
  Variant variant = Variant::baseline;
  double beta = 0.0;
  double sigma = 1.0;
  std::size_t mmd_prior_samples = 0;

  void validate() const;
};

// Latent noise and prior draws come from separate streams so that changing
// the penalty never shifts the noise seen by the likelihood term.
struct ObjectiveStreams {
  std::mt19937_64 latent;
  std::mt19937_64 prior;
};

struct LossTerms {
  Tensor total;
  Tensor nll;
  Tensor penalty;  // undefined for Baseline
  LatentBatch latent;
};

Tensor nll(Graph& g, const Tensor& logits, std::span<const int> labels);

// Batch mean of KL(N(mu, exp(logvar)) || N(0, sigma^2 I)).
Tensor gauss_kl(Graph& g, const Tensor& mu, const Tensor& logvar, double sigma);

// k(a, b) = K / (K + |a - b|^2) with K the vector length.
double imq_kernel(std::span<const double> a, std::span<const double> b);

// Biased (V-statistic) squared MMD between the rows of z and of prior, with
// the kernel scale set to the latent dimension. prior is a constant.
Tensor mmd(Graph& g, const Tensor& z, const Tensor& prior);
double mmd_value(const Tensor& z, const Tensor& prior);

Tensor sample_prior(std::size_t rows, std::size_t dim, double sigma, std::mt19937_64& rng);

// Forward pass plus objective for one minibatch. Every variant samples z
// through the same reparameterized path; `latent_samples` draws per example.
LossTerms loss(const ObjectiveSpec& spec, const StochasticClassifier& model, Graph& g, const Tensor& x,
               std::span<const int> labels, ObjectiveStreams& streams, std::size_t latent_samples = 1);

}  // namespace vimlab
