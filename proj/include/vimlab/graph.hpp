#pragma once

#include <functional>
#include <span>
#include <string_view>
#include <vector>

#include "vimlab/tensor.hpp"

namespace vimlab {

enum class OpKind {
  matmul,
  add,
  add_row,
  sub,
  mul,
  exp,
  tanh,
  square,
  sum,
  mean,
  scale,
  add_scalar,
  relu,
  clamp,
  slice_cols,
  repeat_rows,
  softmax_cross_entropy,
  reparameterize,
  kernel_matrix,
  target_margin,
};

std::string_view op_name(OpKind kind);

struct OpRecord {
  OpKind kind;
  std::vector<NodeId> inputs;
  NodeId output;
};

/// Define-by-run tape of differentiable operations.
///
/// Every op computes its forward value eagerly. When at least one input
/// requires a gradient (and the graph is in training mode) the op is appended
/// to the tape together with the closure that propagates its gradient.
/// backward() replays the tape in exact reverse order, accumulating into
/// the .grad of every tensor that requires one.
class Graph {
 public:
  enum class Mode { training, inference };

  explicit Graph(Mode mode = Mode::training) : mode_(mode) {}
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;
  Graph(Graph&&) = default;
  Graph& operator=(Graph&&) = default;

  Mode mode() const noexcept { return mode_; }
  std::span<const OpRecord> records() const noexcept { return records_; }
  std::size_t size() const noexcept { return records_.size(); }

  // a: m x k, b: k x n.
  Tensor matmul(const Tensor& a, const Tensor& b);
  // Same-shape sum, or a (m x n) plus a bias row b (n or 1 x n) added to every row.
  Tensor add(const Tensor& a, const Tensor& b);
  Tensor sub(const Tensor& a, const Tensor& b);
  Tensor mul(const Tensor& a, const Tensor& b);
  Tensor exp(const Tensor& a);
  Tensor tanh(const Tensor& a);
  Tensor square(const Tensor& a);
  Tensor sum(const Tensor& a);
  Tensor mean(const Tensor& a);
  Tensor scale(const Tensor& a, double alpha);
  Tensor add_scalar(const Tensor& a, double c);
  // Subgradient at exactly 0 is 0.
  Tensor relu(const Tensor& a);
  // Gradient passes where lo <= a <= hi.
  Tensor clamp(const Tensor& a, double lo, double hi);
  // Columns [begin, end) of a matrix.
  Tensor slice_cols(const Tensor& a, std::size_t begin, std::size_t end);
  // Each row repeated `times` times consecutively.
  Tensor repeat_rows(const Tensor& a, std::size_t times);

  // Mean over rows of -log softmax(logits)[label], max-subtracted.
  Tensor softmax_cross_entropy(const Tensor& logits, std::span<const int> labels);

  // mu + exp(logvar / 2) * eps. eps is exogenous and receives no gradient.
  Tensor reparameterize(const Tensor& mu, const Tensor& logvar, const Tensor& eps);

  // out(i, j) = c / (c + |a_i - b_j|^2) for rows a_i, b_j.
  Tensor kernel_matrix(const Tensor& a, const Tensor& b, double c);

  // Per-row max(max_{j != t} logits_j - logits_t, -kappa), shape (rows).
  Tensor target_margin(const Tensor& logits, std::span<const int> targets, double kappa);

  // Populates grads of everything reachable from a scalar loss recorded on
  // this tape. Gradients accumulate; callers zero parameters between steps.
  void backward(const Tensor& loss);

 private:
  using Backward = std::function<void()>;

  bool tracking(std::initializer_list<const Tensor*> inputs) const;
  Tensor finish(OpKind kind, std::initializer_list<const Tensor*> inputs, Tensor out, Backward bw);

  Mode mode_;
  std::vector<OpRecord> records_;
  std::vector<Tensor> outputs_;
  std::vector<Backward> backwards_;
};

// Recomputes a reparameterized sample with the same arithmetic as the graph op.
double reparameterized_value(double mu, double logvar, double eps);

}  // namespace vimlab
