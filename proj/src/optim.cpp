#include "vimlab/optim.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "vimlab/errors.hpp"
#include "vimlab/metrics.hpp"

namespace vimlab {

void adam_step(AdamState& state, std::span<const NamedParameter> params, const StepContext& where) {
  if (state.m.empty()) {
    for (const auto& p : params) {
      state.m.emplace_back(p.tensor.size(), 0.0);
      state.v.emplace_back(p.tensor.size(), 0.0);
    }
  }
  if (state.m.size() != params.size()) throw ContractError("adam_step: parameter list changed between steps");

  for (const auto& p : params) {
    if (!p.tensor.has_grad()) throw ContractError("adam_step: parameter " + p.name + " has no gradient");
    double max_abs = 0.0;
    bool finite = true;
    for (double g : p.tensor.grad()) {
      if (!std::isfinite(g)) {
        finite = false;
        max_abs = std::abs(g);
        break;
      }
      max_abs = std::max(max_abs, std::abs(g));
    }
    if (!finite) {
      std::ostringstream os;
      os << "non-finite gradient at epoch " << where.epoch << ", batch " << where.batch << ", parameter " << p.name
         << " (max |grad| = " << max_abs << ")";
      throw NumericalAbort(os.str());
    }
  }

  state.t += 1;
  const double t = static_cast<double>(state.t);
  const double c1 = 1.0 - std::pow(state.beta1, t);
  const double c2 = 1.0 - std::pow(state.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor w = params[i].tensor;
    auto data = w.data();
    auto grad = std::as_const(w).grad();
    auto& m = state.m[i];
    auto& v = state.v[i];
    if (m.size() != data.size()) throw ContractError("adam_step: moment shape mismatch for " + params[i].name);
    for (std::size_t j = 0; j < data.size(); ++j) {
      m[j] = state.beta1 * m[j] + (1.0 - state.beta1) * grad[j];
      v[j] = state.beta2 * v[j] + (1.0 - state.beta2) * grad[j] * grad[j];
      const double m_hat = m[j] / c1;
      const double v_hat = v[j] / c2;
      data[j] -= state.lr * m_hat / (std::sqrt(v_hat) + state.eps);
    }
  }
}

void TrainConfig::validate() const {
  if (epochs < 1) throw ContractError("epochs must be >= 1");
  if (batch_size < 2) throw ContractError("batch_size must be >= 2");
  if (eval_every < 1) throw ContractError("eval_every must be >= 1");
  if (!(lr > 0.0)) throw ContractError("lr must be positive");
  if (latent_samples < 1) throw ContractError("latent_samples must be >= 1");
  objective.validate();
}

std::mt19937_64 make_stream(std::uint64_t seed, Stream which) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(which), 0x76696dU};
  return std::mt19937_64(seq);
}

Trainer::Trainer(StochasticClassifier& model, const TrainConfig& config)
    : model_(model),
      config_(config),
      adam_(config.lr),
      streams_{make_stream(config.seed, Stream::latent), make_stream(config.seed, Stream::prior)} {
  config_.validate();
}

Trainer::StepResult Trainer::step(const Tensor& x, std::span<const int> labels, const StepContext& where) {
  model_.zero_grad();
  Graph g;
  LossTerms terms = loss(config_.objective, model_, g, x, labels, streams_, config_.latent_samples);
  StepResult r{terms.total.item(), terms.nll.item(), terms.penalty.defined() ? terms.penalty.item() : 0.0};
  if (!std::isfinite(r.loss)) {
    std::ostringstream os;
    os << "non-finite loss at epoch " << where.epoch << ", batch " << where.batch << " (nll=" << r.nll
       << ", penalty=" << r.penalty << ")";
    throw NumericalAbort(os.str());
  }
  g.backward(terms.total);
  const auto params = model_.parameters();
  adam_step(adam_, params, where);
  return r;
}

namespace {

Tensor gather_rows(const Tensor& src, std::span<const std::size_t> idx, std::vector<int>& labels_out,
                   const std::vector<int>& labels) {
  const std::size_t d = src.cols();
  Tensor out({idx.size(), d});
  auto dst = out.data();
  labels_out.clear();
  for (std::size_t i = 0; i < idx.size(); ++i) {
    std::ranges::copy(src.row(idx[i]), dst.begin() + static_cast<std::ptrdiff_t>(i * d));
    labels_out.push_back(labels[idx[i]]);
  }
  return out;
}

}  // namespace

TrainHistory train(StochasticClassifier& model, const Dataset& train_set, const Dataset& test_set,
                   const TrainConfig& config, const EpochObserver& observer) {
  config.validate();
  if (train_set.size() < 2) throw ContractError("train: need at least two training examples");
  if (train_set.dim() != model.shape().input_dim) {
    throw ShapeError("train: dataset width " + std::to_string(train_set.dim()) + " differs from model input width " +
                     std::to_string(model.shape().input_dim));
  }
  Trainer trainer(model, config);
  auto shuffle_rng = make_stream(config.seed, Stream::shuffle);

  const std::size_t n = train_set.size();
  std::vector<std::size_t> order(n);
  std::vector<std::pair<std::size_t, std::size_t>> batches;
  for (std::size_t begin = 0; begin < n; begin += config.batch_size) {
    batches.emplace_back(begin, std::min(n, begin + config.batch_size));
  }
  if (batches.size() > 1 && batches.back().second - batches.back().first < 2) {
    batches[batches.size() - 2].second = n;
    batches.pop_back();
  }

  TrainHistory history;
  std::vector<int> labels;
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    EpochRecord rec;
    rec.epoch = epoch;
    double weight = 0.0;
    for (std::size_t b = 0; b < batches.size(); ++b) {
      const auto [begin, end] = batches[b];
      std::span<const std::size_t> idx(order.data() + begin, end - begin);
      Tensor x = gather_rows(train_set.images, idx, labels, train_set.labels);
      const auto r = trainer.step(x, labels, {epoch, b});
      const double w = static_cast<double>(idx.size());
      rec.train_loss += w * r.loss;
      rec.train_nll += w * r.nll;
      rec.train_penalty += w * r.penalty;
      weight += w;
      ++history.steps;
    }
    rec.train_loss /= weight;
    rec.train_nll /= weight;
    rec.train_penalty /= weight;
    if (test_set.size() > 0 && (epoch % config.eval_every == 0 || epoch == config.epochs)) {
      rec.test_error = test_error(model, test_set);
    }
    history.epochs.push_back(rec);
    if (observer) observer(rec);
  }
  if (test_set.size() > 0) history.final_test_error = *history.epochs.back().test_error;
  return history;
}

}  // namespace vimlab
