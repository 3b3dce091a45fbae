#include "vimlab/graph.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>

#include "vimlab/errors.hpp"

namespace vimlab {

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMatrix>;
using ConstMatMap = Eigen::Map<const RowMatrix>;

MatMap as_matrix(std::span<double> s, std::size_t r, std::size_t c) {
  return MatMap(s.data(), static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
}

ConstMatMap as_matrix(std::span<const double> s, std::size_t r, std::size_t c) {
  return ConstMatMap(s.data(), static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
}

// Eigen's GEMM routes leftover rows through scalar kernels that round
// differently, so a row's result would depend on its position in the batch.
// Padding to whole SIMD packets keeps every row on the same kernel.
constexpr Eigen::Index kRowPad = 8;

template <typename Rhs>
void row_stable_product(ConstMatMap lhs, const Rhs& rhs, MatMap out, bool accumulate) {
  const Eigen::Index m = lhs.rows();
  if (m % kRowPad == 0) {
    if (accumulate) {
      out.noalias() += lhs * rhs;
    } else {
      out.noalias() = lhs * rhs;
    }
    return;
  }
  RowMatrix padded = RowMatrix::Zero((m / kRowPad + 1) * kRowPad, lhs.cols());
  padded.topRows(m) = lhs;
  RowMatrix prod(padded.rows(), rhs.cols());
  prod.noalias() = padded * rhs;
  if (accumulate) {
    out += prod.topRows(m);
  } else {
    out = prod.topRows(m);
  }
}

void require_matrix(const Tensor& t, const char* op) {
  if (t.rank() != 2) {
    throw ShapeError(std::string(op) + ": expected a matrix, got shape " + shape_string(t.shape()));
  }
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": incompatible shapes " + shape_string(a.shape()) + " and " +
                     shape_string(b.shape()));
  }
}

bool is_bias_row(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2) return false;
  const auto& s = b.shape();
  if (s.size() == 1) return s[0] == a.cols();
  if (s.size() == 2) return s[0] == 1 && s[1] == a.cols() && a.rows() != 1;
  return false;
}

Tensor like(const Tensor& a) { return Tensor(a.shape()); }

template <typename F>
Tensor map_values(const Tensor& a, F f) {
  Tensor out = like(a);
  auto src = a.data();
  auto dst = out.data();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = f(src[i]);
  return out;
}

}  // namespace

std::string_view op_name(OpKind kind) {
  switch (kind) {
    case OpKind::matmul: return "matmul";
    case OpKind::add: return "add";
    case OpKind::add_row: return "add_row";
    case OpKind::sub: return "sub";
    case OpKind::mul: return "mul";
    case OpKind::exp: return "exp";
    case OpKind::tanh: return "tanh";
    case OpKind::square: return "square";
    case OpKind::sum: return "sum";
    case OpKind::mean: return "mean";
    case OpKind::scale: return "scale";
    case OpKind::add_scalar: return "add_scalar";
    case OpKind::relu: return "relu";
    case OpKind::clamp: return "clamp";
    case OpKind::slice_cols: return "slice_cols";
    case OpKind::repeat_rows: return "repeat_rows";
    case OpKind::softmax_cross_entropy: return "softmax_cross_entropy";
    case OpKind::reparameterize: return "reparameterize";
    case OpKind::kernel_matrix: return "kernel_matrix";
    case OpKind::target_margin: return "target_margin";
  }
  return "unknown";
}

double reparameterized_value(double mu, double logvar, double eps) {
  return mu + std::exp(0.5 * logvar) * eps;
}

bool Graph::tracking(std::initializer_list<const Tensor*> inputs) const {
  if (mode_ == Mode::inference) return false;
  return std::any_of(inputs.begin(), inputs.end(), [](const Tensor* t) { return t->requires_grad(); });
}

Tensor Graph::finish(OpKind kind, std::initializer_list<const Tensor*> inputs, Tensor out, Backward bw) {
  if (!tracking(inputs)) return out;
  out.set_requires_grad(true);
  OpRecord rec{kind, {}, out.id()};
  for (const Tensor* t : inputs) rec.inputs.push_back(t->id());
  records_.push_back(std::move(rec));
  outputs_.push_back(out);
  backwards_.push_back(std::move(bw));
  return out;
}

Tensor Graph::matmul(const Tensor& a, const Tensor& b) {
  require_matrix(a, "matmul");
  require_matrix(b, "matmul");
  if (a.cols() != b.rows()) {
    throw ShapeError("matmul: inner dimensions differ for " + shape_string(a.shape()) + " and " +
                     shape_string(b.shape()));
  }
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  Tensor out({m, n});
  row_stable_product(as_matrix(std::as_const(a).data(), m, k), as_matrix(std::as_const(b).data(), k, n),
                     as_matrix(out.data(), m, n), false);
  if (!tracking({&a, &b})) return out;
  return finish(OpKind::matmul, {&a, &b}, out, [a, b, out, m, k, n]() mutable {
    const auto g = as_matrix(std::as_const(out).grad(), m, n);
    if (a.requires_grad()) {
      row_stable_product(g, as_matrix(std::as_const(b).data(), k, n).transpose(), as_matrix(a.ensure_grad(), m, k),
                         true);
    }
    if (b.requires_grad()) {
      as_matrix(b.ensure_grad(), k, n).noalias() += as_matrix(std::as_const(a).data(), m, k).transpose() * g;
    }
  });
}

Tensor Graph::add(const Tensor& a, const Tensor& b) {
  if (a.shape() == b.shape()) {
    Tensor out = like(a);
    auto x = a.data(), y = b.data();
    auto o = out.data();
    for (std::size_t i = 0; i < o.size(); ++i) o[i] = x[i] + y[i];
    return finish(OpKind::add, {&a, &b}, out, [a, b, out]() mutable {
      auto g = std::as_const(out).grad();
      for (const Tensor* t : {&a, &b}) {
        if (!t->requires_grad()) continue;
        auto d = t->ensure_grad();
        for (std::size_t i = 0; i < d.size(); ++i) d[i] += g[i];
      }
    });
  }
  if (!is_bias_row(a, b)) {
    throw ShapeError("add: incompatible shapes " + shape_string(a.shape()) + " and " + shape_string(b.shape()));
  }
  const std::size_t m = a.rows(), n = a.cols();
  Tensor out = like(a);
  auto x = a.data(), y = b.data();
  auto o = out.data();
  for (std::size_t r = 0; r < m; ++r) {
    for (std::size_t c = 0; c < n; ++c) o[r * n + c] = x[r * n + c] + y[c];
  }
  return finish(OpKind::add_row, {&a, &b}, out, [a, b, out, m, n]() mutable {
    auto g = std::as_const(out).grad();
    if (a.requires_grad()) {
      auto d = a.ensure_grad();
      for (std::size_t i = 0; i < d.size(); ++i) d[i] += g[i];
    }
    if (b.requires_grad()) {
      auto d = b.ensure_grad();
      for (std::size_t r = 0; r < m; ++r) {
        for (std::size_t c = 0; c < n; ++c) d[c] += g[r * n + c];
      }
    }
  });
}

Tensor Graph::sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  Tensor out = like(a);
  auto x = a.data(), y = b.data();
  auto o = out.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = x[i] - y[i];
  return finish(OpKind::sub, {&a, &b}, out, [a, b, out]() mutable {
    auto g = std::as_const(out).grad();
    if (a.requires_grad()) {
      auto d = a.ensure_grad();
      for (std::size_t i = 0; i < d.size(); ++i) d[i] += g[i];
    }
    if (b.requires_grad()) {
      auto d = b.ensure_grad();
      for (std::size_t i = 0; i < d.size(); ++i) d[i] -= g[i];
    }
  });
}

Tensor Graph::mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  Tensor out = like(a);
  auto x = a.data(), y = b.data();
  auto o = out.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = x[i] * y[i];
  return finish(OpKind::mul, {&a, &b}, out, [a, b, out]() mutable {
    auto g = std::as_const(out).grad();
    auto x = std::as_const(a).data(), y = std::as_const(b).data();
    if (a.requires_grad()) {
      auto d = a.ensure_grad();
      for (std::size_t i = 0; i < d.size(); ++i) d[i] += g[i] * y[i];
    }
    if (b.requires_grad()) {
      auto d = b.ensure_grad();
      for (std::size_t i = 0; i < d.size(); ++i) d[i] += g[i] * x[i];
    }
  });
}

Tensor Graph::exp(const Tensor& a) {
  Tensor out = map_values(a, [](double v) { return std::exp(v); });
  return finish(OpKind::exp, {&a}, out, [a, out]() mutable {
    auto g = std::as_const(out).grad();
    auto y = std::as_const(out).data();
    auto d = a.ensure_grad();
    for (std::size_t i = 0; i < d.size(); ++i) d[i] += g[i] * y[i];
  });
}

Tensor Graph::tanh(const Tensor& a) {
  Tensor out = map_values(a, [](double v) { return std::tanh(v); });
  return finish(OpKind::tanh, {&a}, out, [a, out]() mutable {
    auto g = std::as_const(out).grad();
    auto y = std::as_const(out).data();
    auto d = a.ensure_grad();
    for (std::size_t i = 0; i < d.size(); ++i) d[i] += g[i] * (1.0 - y[i] * y[i]);
  });
}

Tensor Graph::square(const Tensor& a) {
  Tensor out = map_values(a, [](double v) { return v * v; });
  return finish(OpKind::square, {&a}, out, [a, out]() mutable {
    auto g = std::as_const(out).grad();
    auto x = std::as_const(a).data();
    auto d = a.ensure_grad();
    for (std::size_t i = 0; i < d.size(); ++i) d[i] += 2.0 * x[i] * g[i];
  });
}

Tensor Graph::sum(const Tensor& a) {
  double acc = 0.0;
  for (double v : a.data()) acc += v;
  Tensor out = Tensor::scalar(acc);
  return finish(OpKind::sum, {&a}, out, [a, out]() mutable {
    const double g = std::as_const(out).grad()[0];
    for (double& d : a.ensure_grad()) d += g;
  });
}

Tensor Graph::mean(const Tensor& a) {
  if (a.size() == 0) throw ShapeError("mean of an empty tensor");
  double acc = 0.0;
  for (double v : a.data()) acc += v;
  const double n = static_cast<double>(a.size());
  Tensor out = Tensor::scalar(acc / n);
  return finish(OpKind::mean, {&a}, out, [a, out, n]() mutable {
    const double g = std::as_const(out).grad()[0] / n;
    for (double& d : a.ensure_grad()) d += g;
  });
}

Tensor Graph::scale(const Tensor& a, double alpha) {
  Tensor out = map_values(a, [alpha](double v) { return alpha * v; });
  return finish(OpKind::scale, {&a}, out, [a, out, alpha]() mutable {
    auto g = std::as_const(out).grad();
    auto d = a.ensure_grad();
    for (std::size_t i = 0; i < d.size(); ++i) d[i] += alpha * g[i];
  });
}

Tensor Graph::add_scalar(const Tensor& a, double c) {
  Tensor out = map_values(a, [c](double v) { return v + c; });
  return finish(OpKind::add_scalar, {&a}, out, [a, out]() mutable {
    auto g = std::as_const(out).grad();
    auto d = a.ensure_grad();
    for (std::size_t i = 0; i < d.size(); ++i) d[i] += g[i];
  });
}

Tensor Graph::relu(const Tensor& a) {
  Tensor out = map_values(a, [](double v) { return v > 0.0 ? v : 0.0; });
  return finish(OpKind::relu, {&a}, out, [a, out]() mutable {
    auto g = std::as_const(out).grad();
    auto x = std::as_const(a).data();
    auto d = a.ensure_grad();
    for (std::size_t i = 0; i < d.size(); ++i) {
      if (x[i] > 0.0) d[i] += g[i];
    }
  });
}

Tensor Graph::clamp(const Tensor& a, double lo, double hi) {
  if (!(lo <= hi)) throw ContractError("clamp: lower bound exceeds upper bound");
  Tensor out = map_values(a, [lo, hi](double v) { return std::clamp(v, lo, hi); });
  return finish(OpKind::clamp, {&a}, out, [a, out, lo, hi]() mutable {
    auto g = std::as_const(out).grad();
    auto x = std::as_const(a).data();
    auto d = a.ensure_grad();
    for (std::size_t i = 0; i < d.size(); ++i) {
      if (x[i] >= lo && x[i] <= hi) d[i] += g[i];
    }
  });
}

Tensor Graph::slice_cols(const Tensor& a, std::size_t begin, std::size_t end) {
  require_matrix(a, "slice_cols");
  if (begin > end || end > a.cols()) {
    throw ShapeError("slice_cols: range [" + std::to_string(begin) + ", " + std::to_string(end) +
                     ") outside shape " + shape_string(a.shape()));
  }
  const std::size_t m = a.rows(), n = a.cols(), w = end - begin;
  Tensor out({m, w});
  auto x = a.data();
  auto o = out.data();
  for (std::size_t r = 0; r < m; ++r) {
    std::copy_n(x.begin() + static_cast<std::ptrdiff_t>(r * n + begin), w, o.begin() + static_cast<std::ptrdiff_t>(r * w));
  }
  return finish(OpKind::slice_cols, {&a}, out, [a, out, m, n, w, begin]() mutable {
    auto g = std::as_const(out).grad();
    auto d = a.ensure_grad();
    for (std::size_t r = 0; r < m; ++r) {
      for (std::size_t c = 0; c < w; ++c) d[r * n + begin + c] += g[r * w + c];
    }
  });
}

Tensor Graph::repeat_rows(const Tensor& a, std::size_t times) {
  require_matrix(a, "repeat_rows");
  if (times == 0) throw ContractError("repeat_rows: times must be positive");
  const std::size_t m = a.rows(), n = a.cols();
  Tensor out({m * times, n});
  auto x = a.data();
  auto o = out.data();
  for (std::size_t r = 0; r < m; ++r) {
    for (std::size_t t = 0; t < times; ++t) {
      std::copy_n(x.begin() + static_cast<std::ptrdiff_t>(r * n), n,
                  o.begin() + static_cast<std::ptrdiff_t>((r * times + t) * n));
    }
  }
  return finish(OpKind::repeat_rows, {&a}, out, [a, out, m, n, times]() mutable {
    auto g = std::as_const(out).grad();
    auto d = a.ensure_grad();
    for (std::size_t r = 0; r < m; ++r) {
      for (std::size_t t = 0; t < times; ++t) {
        for (std::size_t c = 0; c < n; ++c) d[r * n + c] += g[(r * times + t) * n + c];
      }
    }
  });
}

Tensor Graph::softmax_cross_entropy(const Tensor& logits, std::span<const int> labels) {
  require_matrix(logits, "softmax_cross_entropy");
  const std::size_t b = logits.rows(), classes = logits.cols();
  if (labels.size() != b) {
    throw ShapeError("softmax_cross_entropy: " + std::to_string(labels.size()) + " labels for logits " +
                     shape_string(logits.shape()));
  }
  if (b == 0) throw ShapeError("softmax_cross_entropy: empty batch");
  std::vector<int> label_copy(labels.begin(), labels.end());
  for (int y : label_copy) {
    if (y < 0 || static_cast<std::size_t>(y) >= classes) {
      throw IndexError("softmax_cross_entropy: label " + std::to_string(y) + " outside [0, " +
                       std::to_string(classes) + ")");
    }
  }
  Tensor probs({b, classes});
  auto x = logits.data();
  auto p = probs.data();
  double total = 0.0;
  for (std::size_t r = 0; r < b; ++r) {
    const double* row = x.data() + r * classes;
    const double mx = *std::max_element(row, row + classes);
    double z = 0.0;
    for (std::size_t c = 0; c < classes; ++c) {
      p[r * classes + c] = std::exp(row[c] - mx);
      z += p[r * classes + c];
    }
    for (std::size_t c = 0; c < classes; ++c) p[r * classes + c] /= z;
    total += std::log(z) - (row[label_copy[r]] - mx);
  }
  Tensor out = Tensor::scalar(total / static_cast<double>(b));
  return finish(OpKind::softmax_cross_entropy, {&logits}, out,
                [logits, out, probs, labels = std::move(label_copy), b, classes]() mutable {
                  const double g = std::as_const(out).grad()[0] / static_cast<double>(b);
                  auto p = std::as_const(probs).data();
                  auto d = logits.ensure_grad();
                  for (std::size_t r = 0; r < b; ++r) {
                    for (std::size_t c = 0; c < classes; ++c) {
                      const double onehot = static_cast<std::size_t>(labels[r]) == c ? 1.0 : 0.0;
                      d[r * classes + c] += g * (p[r * classes + c] - onehot);
                    }
                  }
                });
}

Tensor Graph::reparameterize(const Tensor& mu, const Tensor& logvar, const Tensor& eps) {
  require_same_shape(mu, logvar, "reparameterize");
  require_same_shape(mu, eps, "reparameterize");
  Tensor out = like(mu);
  auto m = mu.data(), lv = logvar.data(), e = eps.data();
  auto o = out.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = reparameterized_value(m[i], lv[i], e[i]);
  return finish(OpKind::reparameterize, {&mu, &logvar}, out, [mu, logvar, eps, out]() mutable {
    auto g = std::as_const(out).grad();
    if (mu.requires_grad()) {
      auto d = mu.ensure_grad();
      for (std::size_t i = 0; i < d.size(); ++i) d[i] += g[i];
    }
    if (logvar.requires_grad()) {
      auto lv = std::as_const(logvar).data();
      auto e = std::as_const(eps).data();
      auto d = logvar.ensure_grad();
      for (std::size_t i = 0; i < d.size(); ++i) d[i] += g[i] * 0.5 * std::exp(0.5 * lv[i]) * e[i];
    }
  });
}

Tensor Graph::kernel_matrix(const Tensor& a, const Tensor& b, double c) {
  require_matrix(a, "kernel_matrix");
  require_matrix(b, "kernel_matrix");
  if (a.cols() != b.cols()) {
    throw ShapeError("kernel_matrix: row widths differ for " + shape_string(a.shape()) + " and " +
                     shape_string(b.shape()));
  }
  if (!(c > 0.0)) throw ContractError("kernel_matrix: scale must be positive");
  const std::size_t m = a.rows(), n = b.rows(), k = a.cols();
  Tensor out({m, n});
  auto x = a.data(), y = b.data();
  auto o = out.data();
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double d2 = 0.0;
      for (std::size_t t = 0; t < k; ++t) {
        const double diff = x[i * k + t] - y[j * k + t];
        d2 += diff * diff;
      }
      o[i * n + j] = c / (c + d2);
    }
  }
  return finish(OpKind::kernel_matrix, {&a, &b}, out, [a, b, out, m, n, k, c]() mutable {
    auto g = std::as_const(out).grad();
    auto kv = std::as_const(out).data();
    auto x = std::as_const(a).data(), y = std::as_const(b).data();
    // dk/da_i = -2 k^2 / c * (a_i - b_j)
    const bool ga = a.requires_grad(), gb = b.requires_grad();
    std::span<double> da = ga ? a.ensure_grad() : std::span<double>{};
    std::span<double> db = gb ? b.ensure_grad() : std::span<double>{};
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        const double kij = kv[i * n + j];
        const double w = g[i * n + j] * (-2.0 * kij * kij / c);
        if (w == 0.0) continue;
        for (std::size_t t = 0; t < k; ++t) {
          const double diff = x[i * k + t] - y[j * k + t];
          if (ga) da[i * k + t] += w * diff;
          if (gb) db[j * k + t] -= w * diff;
        }
      }
    }
  });
}

Tensor Graph::target_margin(const Tensor& logits, std::span<const int> targets, double kappa) {
  require_matrix(logits, "target_margin");
  const std::size_t b = logits.rows(), classes = logits.cols();
  if (targets.size() != b) throw ShapeError("target_margin: one target per row required");
  if (classes < 2) throw ShapeError("target_margin: need at least two classes");
  std::vector<int> tgt(targets.begin(), targets.end());
  std::vector<std::size_t> rival(b);
  Tensor out({b});
  auto x = logits.data();
  auto o = out.data();
  for (std::size_t r = 0; r < b; ++r) {
    if (tgt[r] < 0 || static_cast<std::size_t>(tgt[r]) >= classes) {
      throw IndexError("target_margin: target " + std::to_string(tgt[r]) + " out of range");
    }
    const auto t = static_cast<std::size_t>(tgt[r]);
    std::size_t best = t == 0 ? 1 : 0;
    for (std::size_t j = 0; j < classes; ++j) {
      if (j != t && x[r * classes + j] > x[r * classes + best]) best = j;
    }
    rival[r] = best;
    o[r] = std::max(x[r * classes + best] - x[r * classes + t], -kappa);
  }
  return finish(OpKind::target_margin, {&logits}, out,
                [logits, out, tgt = std::move(tgt), rival = std::move(rival), b, classes, kappa]() mutable {
                  auto g = std::as_const(out).grad();
                  auto x = std::as_const(logits).data();
                  auto d = logits.ensure_grad();
                  for (std::size_t r = 0; r < b; ++r) {
                    const auto t = static_cast<std::size_t>(tgt[r]);
                    const double raw = x[r * classes + rival[r]] - x[r * classes + t];
                    if (raw < -kappa) continue;
                    d[r * classes + rival[r]] += g[r];
                    d[r * classes + t] -= g[r];
                  }
                });
}

void Graph::backward(const Tensor& loss) {
  if (!loss.defined() || loss.size() != 1) {
    throw ContractError("backward: loss must be a scalar, got shape " +
                        (loss.defined() ? shape_string(loss.shape()) : std::string("<undefined>")));
  }
  const NodeId target = loss.id();
  std::size_t end = outputs_.size();
  while (end > 0 && outputs_[end - 1].id() != target) --end;
  if (end == 0) throw ContractError("backward: loss was not produced by this graph");
  Tensor root = outputs_[end - 1];
  root.ensure_grad()[0] += 1.0;
  for (std::size_t i = end; i-- > 0;) {
    if (!outputs_[i].has_grad()) continue;
    backwards_[i]();
  }
}

}  // namespace vimlab
