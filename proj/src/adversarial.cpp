#include "vimlab/adversarial.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "vimlab/errors.hpp"
#include "vimlab/optim.hpp"

namespace vimlab {

namespace {

constexpr double kUpperC = 1e10;
constexpr double kTanhShrink = 0.999999;

struct Distances {
  double l1 = 0.0, l2 = 0.0, linf = 0.0;
};

Distances distances(std::span<const double> a, std::span<const double> b) {
  Distances d;
  double sq = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double diff = std::abs(a[i] - b[i]);
    d.l1 += diff;
    sq += diff * diff;
    d.linf = std::max(d.linf, diff);
  }
  d.l2 = std::sqrt(sq);
  return d;
}

Tensor row_tensor(std::span<const double> row) { return Tensor({1, row.size()}, std::vector<double>(row.begin(), row.end())); }

StochasticClassifier frozen_copy(const StochasticClassifier& model) {
  StochasticClassifier copy = model.clone();
  for (auto& p : copy.parameters()) p.tensor.set_requires_grad(false);
  return copy;
}

}  // namespace

void AttackConfig::validate() const {
  if (binary_search_steps < 1 || iterations < 1) throw ContractError("attack: step counts must be >= 1");
  if (!(confidence >= 0.0)) throw ContractError("attack: confidence must be >= 0");
  if (!(step_size > 0.0) || !(initial_c > 0.0)) throw ContractError("attack: step size and initial c must be positive");
  if (!(box_min < box_max)) throw ContractError("attack: box bounds must be ordered");
}

std::vector<AdversaryResult> cw_l2_attack_batch(const StochasticClassifier& model, const Tensor& xs,
                                                std::span<const int> targets, const AttackConfig& config) {
  config.validate();
  if (xs.rank() != 2 || xs.rows() != targets.size()) throw ShapeError("attack: one target per input row required");
  const std::size_t rows = xs.rows(), dim = xs.cols();
  const StochasticClassifier net = frozen_copy(model);
  const auto initial = net.predict(xs);
  for (std::size_t r = 0; r < rows; ++r) {
    if (targets[r] < 0 || static_cast<std::size_t>(targets[r]) >= net.classes()) {
      throw IndexError("attack: target class out of range");
    }
    if (initial.classes[r] == targets[r]) {
      throw ContractError("attack: input row " + std::to_string(r) + " is already classified as target " +
                          std::to_string(targets[r]));
    }
  }

  const double half = 0.5 * (config.box_max - config.box_min);
  const double mid = 0.5 * (config.box_max + config.box_min);
  Tensor w0(xs.shape());
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double unit = std::clamp((xs[i] - mid) / half, -1.0, 1.0);
    w0[i] = std::atanh(unit * kTanhShrink);
  }

  std::vector<AdversaryResult> results(rows);
  std::vector<double> best_l2(rows, std::numeric_limits<double>::infinity());
  std::vector<double> c(rows, config.initial_c), lower(rows, 0.0), upper(rows, kUpperC);
  for (std::size_t r = 0; r < rows; ++r) {
    results[r].source_class = initial.classes[r];
    results[r].target = targets[r];
    results[r].original = row_tensor(xs.row(r));
    results[r].adversarial = results[r].original.clone();
  }

  const std::size_t check_every = std::max<std::size_t>(1, config.iterations / 10);
  for (std::size_t step = 0; step < config.binary_search_steps; ++step) {
    Tensor w = w0.clone();
    w.set_requires_grad(true);
    std::vector<NamedParameter> params{{"modifier", w}};
    AdamState adam(config.step_size);
    std::vector<double> step_best(rows, std::numeric_limits<double>::infinity());
    Tensor cvec({rows}, c);
    double previous = std::numeric_limits<double>::infinity();

    for (std::size_t it = 0; it < config.iterations; ++it) {
      Graph g;
      Tensor adv = g.add_scalar(g.scale(g.tanh(w), half), mid);
      Tensor logits = net.mean_logits(g, adv);
      Tensor margin = g.target_margin(logits, targets, config.confidence);
      Tensor loss = g.add(g.sum(g.square(g.sub(adv, xs))), g.sum(g.mul(margin, cvec)));
      const double loss_value = loss.item();
      if (!std::isfinite(loss_value)) break;

      // Rows whose current point hits the target and beats the best so far.
      std::vector<std::size_t> improving;
      for (std::size_t r = 0; r < rows; ++r) {
        auto lrow = logits.row(r);
        const auto t = static_cast<std::size_t>(targets[r]);
        bool hit = argmax_lowest(lrow) == t;
        if (hit && config.confidence > 0.0) hit = margin[r] <= -config.confidence;
        if (!hit) continue;
        const double l2 = distances(adv.row(r), xs.row(r)).l2;
        if (l2 < step_best[r]) improving.push_back(r);
      }
      if (!improving.empty()) {
        Tensor cand({improving.size(), dim});
        for (std::size_t i = 0; i < improving.size(); ++i) {
          std::ranges::copy(adv.row(improving[i]), cand.data().begin() + static_cast<std::ptrdiff_t>(i * dim));
        }
        // Success is decided by the same rule predict() uses.
        const auto verified = net.predict(cand);
        for (std::size_t i = 0; i < improving.size(); ++i) {
          const std::size_t r = improving[i];
          if (verified.classes[i] != targets[r]) continue;
          const double l2 = distances(cand.row(i), xs.row(r)).l2;
          step_best[r] = l2;
          if (l2 < best_l2[r]) {
            best_l2[r] = l2;
            results[r].adversarial = row_tensor(cand.row(i));
            results[r].success = true;
          }
        }
      }

      g.backward(loss);
      adam_step(adam, params);
      w.zero_grad();

      if (config.abort_early && (it + 1) % check_every == 0) {
        if (loss_value > previous * 0.9999) break;
        previous = loss_value;
      }
    }

    for (std::size_t r = 0; r < rows; ++r) {
      const bool ok = std::isfinite(step_best[r]);
      results[r].candidates.push_back({c[r], ok, ok ? step_best[r] : 0.0});
      if (ok) {
        upper[r] = std::min(upper[r], c[r]);
        if (upper[r] < kUpperC) c[r] = 0.5 * (lower[r] + upper[r]);
      } else {
        lower[r] = std::max(lower[r], c[r]);
        c[r] = upper[r] < kUpperC ? 0.5 * (lower[r] + upper[r]) : c[r] * 10.0;
      }
    }
  }

  for (auto& res : results) {
    const auto d = distances(res.adversarial.data(), res.original.data());
    res.l1 = d.l1;
    res.l2 = d.l2;
    res.linf = d.linf;
  }
  return results;
}

AdversaryResult cw_l2_attack(const StochasticClassifier& model, const Tensor& x, int target,
                             const AttackConfig& config) {
  Tensor xs = x.rank() == 2 ? x : Tensor({1, x.size()}, std::vector<double>(x.data().begin(), x.data().end()));
  if (xs.rows() != 1) throw ShapeError("cw_l2_attack: expected a single input row");
  const int targets[] = {target};
  return std::move(cw_l2_attack_batch(model, xs, targets, config).front());
}

RobustnessReport robustness_report(const StochasticClassifier& model, const Dataset& test_set,
                                   const AttackConfig& config, int source, int target, std::size_t count) {
  std::vector<std::size_t> picked;
  for (std::size_t i = 0; i < test_set.size() && picked.size() < count; ++i) {
    if (test_set.labels[i] == source) picked.push_back(i);
  }
  if (picked.size() < count) {
    throw ContractError("robustness_report: test set has only " + std::to_string(picked.size()) +
                        " examples of class " + std::to_string(source));
  }
  const Dataset chosen = test_set.subset(picked);
  const auto pred = model.predict(chosen.images);

  RobustnessReport rep;
  rep.source_class = source;
  rep.target_class = target;
  rep.attacks.resize(count);
  std::vector<std::size_t> to_attack;
  for (std::size_t i = 0; i < count; ++i) {
    if (pred.classes[i] == target) {
      auto& a = rep.attacks[i];
      a.source_class = pred.classes[i];
      a.target = target;
      a.success = true;
      a.original = row_tensor(chosen.images.row(i));
      a.adversarial = a.original.clone();
    } else {
      to_attack.push_back(i);
    }
  }
  if (!to_attack.empty()) {
    const Dataset batch = chosen.subset(to_attack);
    const std::vector<int> targets(to_attack.size(), target);
    auto results = cw_l2_attack_batch(model, batch.images, targets, config);
    for (std::size_t j = 0; j < to_attack.size(); ++j) rep.attacks[to_attack[j]] = std::move(results[j]);
  }
  for (const auto& a : rep.attacks) {
    if (!a.success) continue;
    ++rep.successes;
    rep.mean_l1 += a.l1;
    rep.mean_l2 += a.l2;
    rep.mean_linf += a.linf;
  }
  rep.valid = rep.successes > 0;
  if (rep.valid) {
    const double n = static_cast<double>(rep.successes);
    rep.mean_l1 /= n;
    rep.mean_l2 /= n;
    rep.mean_linf /= n;
  }
  return rep;
}

}  // namespace vimlab
