#include "vimlab/objectives.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <string>

#include "vimlab/errors.hpp"

namespace vimlab {

std::string_view variant_name(Variant v) {
  switch (v) {
    case Variant::baseline: return "baseline";
    case Variant::vib: return "vib";
    case Variant::vim: return "vim";
  }
  throw ContractError("unknown objective variant");
}

Variant parse_variant(std::string_view name) {
  std::string lower(name);
  std::ranges::transform(lower, lower.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (lower == "baseline") return Variant::baseline;
  if (lower == "vib") return Variant::vib;
  if (lower == "vim") return Variant::vim;
  throw ContractError("unknown objective variant '" + std::string(name) + "'");
}

void ObjectiveSpec::validate() const {
  if (variant != Variant::baseline && variant != Variant::vib && variant != Variant::vim) {
    throw ContractError("unknown objective variant");
  }
  if (!(beta >= 0.0) || !std::isfinite(beta)) throw ContractError("beta must be finite and >= 0");
  if (!(sigma > 0.0) || !std::isfinite(sigma)) throw ContractError("sigma must be finite and > 0");
}

Tensor nll(Graph& g, const Tensor& logits, std::span<const int> labels) {
  return g.softmax_cross_entropy(logits, labels);
}

Tensor gauss_kl(Graph& g, const Tensor& mu, const Tensor& logvar, double sigma) {
  if (!(sigma > 0.0)) throw ContractError("gauss_kl: sigma must be positive");
  if (mu.shape() != logvar.shape() || mu.rank() != 2) {
    throw ShapeError("gauss_kl: mu " + shape_string(mu.shape()) + " and logvar " + shape_string(logvar.shape()) +
                     " must be equal-shaped matrices");
  }
  const double b = static_cast<double>(mu.rows());
  const double k = static_cast<double>(mu.cols());
  // sum_k 1/2 [ (e^lv + mu^2) / s^2 - 1 - lv + 2 ln s ], averaged over rows
  Tensor ratio = g.scale(g.add(g.exp(logvar), g.square(mu)), 1.0 / (sigma * sigma));
  Tensor total = g.sum(g.sub(ratio, logvar));
  return g.add_scalar(g.scale(total, 0.5 / b), 0.5 * k * (2.0 * std::log(sigma) - 1.0));
}

double imq_kernel(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size() || a.empty()) throw ShapeError("imq_kernel: vectors must share a nonzero length");
  double d2 = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    d2 += d * d;
  }
  const double c = static_cast<double>(a.size());
  return c / (c + d2);
}

namespace {

void check_mmd_inputs(const Tensor& z, const Tensor& prior) {
  if (z.rank() != 2 || prior.rank() != 2 || z.cols() != prior.cols()) {
    throw ShapeError("mmd: sample sets " + shape_string(z.shape()) + " and " + shape_string(prior.shape()) +
                     " must be matrices of equal width");
  }
  if (z.rows() < 2 || prior.rows() < 2) throw ContractError("mmd: both sample sets need at least 2 rows");
}

double mean_kernel(const Tensor& a, const Tensor& b) {
  Graph g(Graph::Mode::inference);
  const Tensor k = g.kernel_matrix(a, b, static_cast<double>(a.cols()));
  double acc = 0.0;
  for (double v : k.data()) acc += v;
  return acc / static_cast<double>(a.rows() * b.rows());
}

}  // namespace

Tensor mmd(Graph& g, const Tensor& z, const Tensor& prior) {
  check_mmd_inputs(z, prior);
  if (prior.requires_grad()) throw ContractError("mmd: prior samples must be constants");
  const double c = static_cast<double>(z.cols());
  Tensor zz = g.mean(g.kernel_matrix(z, z, c));
  Tensor zp = g.mean(g.kernel_matrix(z, prior, c));
  return g.add_scalar(g.sub(zz, g.scale(zp, 2.0)), mean_kernel(prior, prior));
}

double mmd_value(const Tensor& z, const Tensor& prior) {
  Graph g(Graph::Mode::inference);
  return mmd(g, z, prior).item();
}

Tensor sample_prior(std::size_t rows, std::size_t dim, double sigma, std::mt19937_64& rng) {
  Tensor out({rows, dim});
  std::normal_distribution<double> dist(0.0, sigma);
  for (double& v : out.data()) v = dist(rng);
  return out;
}

LossTerms loss(const ObjectiveSpec& spec, const StochasticClassifier& model, Graph& g, const Tensor& x,
               std::span<const int> labels, ObjectiveStreams& streams, std::size_t latent_samples) {
  spec.validate();
  if (x.rows() == 0) throw ContractError("loss: empty batch");
  if (labels.size() != x.rows()) throw ShapeError("loss: label count does not match batch rows");
  if (latent_samples == 0) throw ContractError("loss: latent_samples must be >= 1");

  Encoding enc = model.encode(g, x);
  Tensor mu = enc.mu, logvar = enc.logvar;
  std::vector<int> targets(labels.begin(), labels.end());
  if (latent_samples > 1) {
    mu = g.repeat_rows(mu, latent_samples);
    logvar = g.repeat_rows(logvar, latent_samples);
    targets.clear();
    for (int y : labels) targets.insert(targets.end(), latent_samples, y);
  }
  Tensor eps = standard_normal(mu.shape(), streams.latent);
  LossTerms out;
  out.latent = model.sample_latent(g, mu, logvar, eps);
  out.nll = nll(g, model.decode(g, out.latent.z), targets);

  switch (spec.variant) {
    case Variant::baseline:
      out.total = out.nll;
      break;
    case Variant::vib:
      out.penalty = gauss_kl(g, enc.mu, enc.logvar, spec.sigma);
      out.total = g.add(out.nll, g.scale(out.penalty, spec.beta));
      break;
    case Variant::vim: {
      const std::size_t m = spec.mmd_prior_samples ? spec.mmd_prior_samples : out.latent.z.rows();
      Tensor prior = sample_prior(m, model.latent_dim(), spec.sigma, streams.prior);
      out.penalty = mmd(g, out.latent.z, prior);
      out.total = g.add(out.nll, g.scale(out.penalty, spec.beta));
      break;
    }
  }
  return out;
}

}  // namespace vimlab
