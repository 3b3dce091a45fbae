#include "vimlab/model.hpp"

#include <algorithm>
#include <cmath>

#include "vimlab/errors.hpp"

namespace vimlab {

namespace {

constexpr std::size_t kInferenceChunk = 500;

Linear make_linear(std::size_t in, std::size_t out) {
  Linear l{Tensor({in, out}), Tensor({out})};
  l.weight.set_requires_grad(true);
  l.bias.set_requires_grad(true);
  return l;
}

void glorot_uniform(Tensor& w, std::mt19937_64& rng) {
  const double fan_in = static_cast<double>(w.shape()[0]);
  const double fan_out = static_cast<double>(w.shape()[1]);
  const double limit = std::sqrt(6.0 / (fan_in + fan_out));
  std::uniform_real_distribution<double> dist(-limit, limit);
  for (double& v : w.data()) v = dist(rng);
}

Tensor rows_slice(const Tensor& x, std::size_t begin, std::size_t end) {
  const std::size_t n = x.cols();
  auto d = x.data();
  return Tensor({end - begin, n}, std::vector<double>(d.begin() + static_cast<std::ptrdiff_t>(begin * n),
                                                      d.begin() + static_cast<std::ptrdiff_t>(end * n)));
}

}  // namespace

std::size_t argmax_lowest(std::span<const double> values) {
  std::size_t best = 0;
  for (std::size_t j = 1; j < values.size(); ++j) {
    if (values[j] > values[best]) best = j;
  }
  return best;
}

Tensor softmax_rows(const Tensor& logits) {
  Tensor out(logits.shape());
  const std::size_t m = logits.rows(), c = logits.cols();
  auto x = logits.data();
  auto o = out.data();
  for (std::size_t r = 0; r < m; ++r) {
    const double mx = *std::max_element(x.begin() + static_cast<std::ptrdiff_t>(r * c),
                                        x.begin() + static_cast<std::ptrdiff_t>((r + 1) * c));
    double z = 0.0;
    for (std::size_t j = 0; j < c; ++j) z += (o[r * c + j] = std::exp(x[r * c + j] - mx));
    for (std::size_t j = 0; j < c; ++j) o[r * c + j] /= z;
  }
  return out;
}

Tensor standard_normal(Shape shape, std::mt19937_64& rng) {
  Tensor out(std::move(shape));
  std::normal_distribution<double> dist(0.0, 1.0);
  for (double& v : out.data()) v = dist(rng);
  return out;
}

StochasticClassifier::StochasticClassifier(ModelShape shape) : shape_(std::move(shape)) {
  if (shape_.input_dim == 0 || shape_.latent_dim == 0 || shape_.classes < 2) {
    throw ContractError("model shape needs input_dim > 0, latent_dim > 0 and at least two classes");
  }
  std::size_t in = shape_.input_dim;
  for (std::size_t width : shape_.hidden) {
    if (width == 0) throw ContractError("hidden layer width must be positive");
    encoder_.push_back(make_linear(in, width));
    in = width;
  }
  encoder_.push_back(make_linear(in, 2 * shape_.latent_dim));
  decoder_ = make_linear(shape_.latent_dim, shape_.classes);
}

StochasticClassifier StochasticClassifier::initialized(ModelShape shape, std::mt19937_64& rng) {
  StochasticClassifier model(std::move(shape));
  for (auto& layer : model.encoder_) glorot_uniform(layer.weight, rng);
  glorot_uniform(model.decoder_.weight, rng);
  return model;
}

StochasticClassifier StochasticClassifier::clone() const {
  StochasticClassifier copy(shape_);
  auto src = parameters();
  auto dst = copy.parameters();
  for (std::size_t i = 0; i < src.size(); ++i) {
    std::ranges::copy(std::as_const(src[i].tensor).data(), dst[i].tensor.data().begin());
  }
  return copy;
}

std::vector<NamedParameter> StochasticClassifier::parameters() const {
  std::vector<NamedParameter> out;
  for (std::size_t i = 0; i < encoder_.size(); ++i) {
    const std::string prefix = "encoder." + std::to_string(i);
    out.push_back({prefix + ".weight", encoder_[i].weight});
    out.push_back({prefix + ".bias", encoder_[i].bias});
  }
  out.push_back({"decoder.weight", decoder_.weight});
  out.push_back({"decoder.bias", decoder_.bias});
  return out;
}

void StochasticClassifier::zero_grad() {
  for (auto& p : parameters()) p.tensor.zero_grad();
}

Encoding StochasticClassifier::encode(Graph& g, const Tensor& x) const {
  if (x.rank() != 2 || x.cols() != shape_.input_dim) {
    throw ShapeError("encode: expected input of width " + std::to_string(shape_.input_dim) + ", got shape " +
                     shape_string(x.shape()));
  }
  Tensor h = x;
  for (std::size_t i = 0; i < encoder_.size(); ++i) {
    h = g.add(g.matmul(h, encoder_[i].weight), encoder_[i].bias);
    if (i + 1 < encoder_.size()) h = g.relu(h);
  }
  const std::size_t k = shape_.latent_dim;
  Tensor mu = g.slice_cols(h, 0, k);
  Tensor logvar = g.clamp(g.slice_cols(h, k, 2 * k), kLogvarFloor, kLogvarCeil);
  return {mu, logvar};
}

LatentBatch StochasticClassifier::sample_latent(Graph& g, const Tensor& mu, const Tensor& logvar,
                                                const Tensor& eps) const {
  return {mu, logvar, eps, g.reparameterize(mu, logvar, eps)};
}

Tensor StochasticClassifier::decode(Graph& g, const Tensor& z) const {
  if (z.rank() != 2 || z.cols() != shape_.latent_dim) {
    throw ShapeError("decode: expected latent width " + std::to_string(shape_.latent_dim) + ", got shape " +
                     shape_string(z.shape()));
  }
  return g.add(g.matmul(z, decoder_.weight), decoder_.bias);
}

Tensor StochasticClassifier::mean_logits(Graph& g, const Tensor& x) const { return decode(g, encode(g, x).mu); }

Predictions StochasticClassifier::predict(const Tensor& x) const {
  const std::size_t n = x.rows(), c = shape_.classes;
  Predictions out{std::vector<int>(n), Tensor({n, c})};
  for (std::size_t begin = 0; begin < n; begin += kInferenceChunk) {
    const std::size_t end = std::min(n, begin + kInferenceChunk);
    Graph g(Graph::Mode::inference);
    Tensor probs = softmax_rows(mean_logits(g, rows_slice(x, begin, end)));
    for (std::size_t r = 0; r < end - begin; ++r) {
      auto row = probs.row(r);
      out.classes[begin + r] = static_cast<int>(argmax_lowest(row));
      std::ranges::copy(row, out.probabilities.data().begin() + static_cast<std::ptrdiff_t>((begin + r) * c));
    }
  }
  return out;
}

Predictions StochasticClassifier::predict_sampled(const Tensor& x, std::size_t samples,
                                                  std::mt19937_64& rng) const {
  if (samples == 0) return predict(x);
  const std::size_t n = x.rows(), c = shape_.classes, k = shape_.latent_dim;
  Predictions out{std::vector<int>(n), Tensor({n, c})};
  for (std::size_t begin = 0; begin < n; begin += kInferenceChunk) {
    const std::size_t end = std::min(n, begin + kInferenceChunk);
    Graph g(Graph::Mode::inference);
    Encoding enc = encode(g, rows_slice(x, begin, end));
    const std::size_t m = end - begin;
    Tensor avg({m, c});
    for (std::size_t s = 0; s < samples; ++s) {
      Tensor z = g.reparameterize(enc.mu, enc.logvar, standard_normal({m, k}, rng));
      Tensor probs = softmax_rows(decode(g, z));
      for (std::size_t i = 0; i < avg.size(); ++i) avg[i] += probs[i] / static_cast<double>(samples);
    }
    for (std::size_t r = 0; r < m; ++r) {
      auto row = avg.row(r);
      out.classes[begin + r] = static_cast<int>(argmax_lowest(row));
      std::ranges::copy(row, out.probabilities.data().begin() + static_cast<std::ptrdiff_t>((begin + r) * c));
    }
  }
  return out;
}

Tensor StochasticClassifier::representations(const Tensor& x) const {
  const std::size_t n = x.rows(), k = shape_.latent_dim;
  Tensor out({n, k});
  for (std::size_t begin = 0; begin < n; begin += kInferenceChunk) {
    const std::size_t end = std::min(n, begin + kInferenceChunk);
    Graph g(Graph::Mode::inference);
    Tensor mu = encode(g, rows_slice(x, begin, end)).mu;
    std::ranges::copy(std::as_const(mu).data(), out.data().begin() + static_cast<std::ptrdiff_t>(begin * k));
  }
  return out;
}

}  // namespace vimlab
