#pragma once

#include <optional>
#include <vector>

#include "vimlab/data.hpp"
#include "vimlab/model.hpp"

namespace vimlab {

struct AttackConfig {
  double confidence = 0.0;  // kappa
  std::size_t binary_search_steps = 9;
  std::size_t iterations = 1000;
  double step_size = 1e-2;
  double initial_c = 1e-3;
  double box_min = 0.0;
  double box_max = 1.0;
  // Stop an inner loop once the loss stalls over a tenth of the iterations.
  bool abort_early = true;

  void validate() const;
};

// Best result of one binary-search step.
struct AttackCandidate {
  double c = 0.0;
  bool success = false;
  double l2 = 0.0;  // of the best successful point in this step, if any
};

struct AdversaryResult {
  int source_class = -1;
  int target = -1;
  bool success = false;
  Tensor original;     // 1 x d
  Tensor adversarial;  // 1 x d; equals original when no success
  double l1 = 0.0;
  double l2 = 0.0;
  double linf = 0.0;
  std::vector<AttackCandidate> candidates;
};

/// Targeted L2 attack on the deterministic z = mu path.
///
/// Optimises |x' - x|^2 + c * max(max_{j != t} logit_j - logit_t, -kappa) in
/// tanh space (x' always inside the box) with Adam, binary-searching c. Each
/// row of `xs` is an independent attack; rows share forward/backward passes.
/// Throws ContractError if a row is already predicted as its target.
std::vector<AdversaryResult> cw_l2_attack_batch(const StochasticClassifier& model, const Tensor& xs,
                                                std::span<const int> targets, const AttackConfig& config);
AdversaryResult cw_l2_attack(const StochasticClassifier& model, const Tensor& x, int target,
                             const AttackConfig& config);

struct RobustnessReport {
  int source_class = 0;
  int target_class = 1;
  std::vector<AdversaryResult> attacks;
  std::size_t successes = 0;
  bool valid = false;  // at least one success
  double mean_l1 = 0.0;
  double mean_l2 = 0.0;
  double mean_linf = 0.0;
};

// Attacks the first `count` test rows labelled `source` (dataset order) with
// target class `target`; rows already predicted as the target succeed at
// distance 0. Means are over successful attacks.
RobustnessReport robustness_report(const StochasticClassifier& model, const Dataset& test_set,
                                   const AttackConfig& config, int source = 0, int target = 1,
                                   std::size_t count = 10);

}  // namespace vimlab
