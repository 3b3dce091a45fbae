#include "vimlab/tensor.hpp"

#include <algorithm>
#include <atomic>
#include <sstream>

#include <Eigen/Core>

#include "vimlab/errors.hpp"

namespace vimlab {

namespace {
std::atomic<NodeId> next_node_id{1};
}  // namespace

// Vectorized kernels pick their summation order from the buffer address, so buffers are
// aligned to the widest SIMD width to keep results independent of where malloc lands.
using Buffer = std::vector<double, Eigen::aligned_allocator<double>>;

struct Tensor::Storage {
  Shape shape;
  Buffer data;
  Buffer grad;
  bool requires_grad = false;
  NodeId id = next_node_id.fetch_add(1, std::memory_order_relaxed);
};

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

std::size_t shape_size(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

Tensor::Tensor(Shape shape, double fill) : impl_(std::make_shared<Storage>()) {
  impl_->data.assign(shape_size(shape), fill);
  impl_->shape = std::move(shape);
}

Tensor::Tensor(Shape shape, std::vector<double> values) : impl_(std::make_shared<Storage>()) {
  if (shape_size(shape) != values.size()) {
    throw ShapeError("tensor shape " + shape_string(shape) + " does not hold " +
                     std::to_string(values.size()) + " values");
  }
  impl_->shape = std::move(shape);
  impl_->data.assign(values.begin(), values.end());
}

Tensor Tensor::scalar(double value) { return Tensor(Shape{}, std::vector<double>{value}); }

Tensor Tensor::matrix(std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t m = rows.size();
  const std::size_t n = m ? rows.begin()->size() : 0;
  std::vector<double> values;
  values.reserve(m * n);
  for (const auto& r : rows) {
    if (r.size() != n) throw ShapeError("ragged matrix literal");
    values.insert(values.end(), r.begin(), r.end());
  }
  return Tensor({m, n}, std::move(values));
}

Tensor Tensor::vector(std::initializer_list<double> values) {
  return Tensor({values.size()}, std::vector<double>(values));
}

Tensor::Storage& Tensor::storage() const {
  if (!impl_) throw ContractError("use of an undefined tensor");
  return *impl_;
}

NodeId Tensor::id() const { return storage().id; }
const Shape& Tensor::shape() const { return storage().shape; }
std::size_t Tensor::size() const { return storage().data.size(); }

std::size_t Tensor::rows() const {
  const auto& s = shape();
  if (s.size() == 2) return s[0];
  if (s.size() <= 1) return 1;
  throw ShapeError("rows() on tensor of shape " + shape_string(s));
}

std::size_t Tensor::cols() const {
  const auto& s = shape();
  if (s.size() == 2) return s[1];
  if (s.size() == 1) return s[0];
  if (s.empty()) return 1;
  throw ShapeError("cols() on tensor of shape " + shape_string(s));
}

std::span<double> Tensor::data() { return storage().data; }
std::span<const double> Tensor::data() const { return storage().data; }

double Tensor::item() const {
  if (size() != 1) throw ShapeError("item() on tensor of shape " + shape_string(shape()));
  return storage().data[0];
}

double& Tensor::at(std::size_t r, std::size_t c) { return storage().data[r * cols() + c]; }
double Tensor::at(std::size_t r, std::size_t c) const { return storage().data[r * cols() + c]; }

std::span<const double> Tensor::row(std::size_t r) const {
  const std::size_t n = cols();
  return data().subspan(r * n, n);
}

bool Tensor::requires_grad() const { return storage().requires_grad; }

Tensor& Tensor::set_requires_grad(bool on) {
  storage().requires_grad = on;
  return *this;
}

bool Tensor::has_grad() const { return !storage().grad.empty() || storage().data.empty(); }

std::span<double> Tensor::grad() { return storage().grad; }
std::span<const double> Tensor::grad() const { return storage().grad; }

std::span<double> Tensor::ensure_grad() const {
  auto& s = storage();
  if (s.grad.size() != s.data.size()) s.grad.assign(s.data.size(), 0.0);
  return s.grad;
}

void Tensor::zero_grad() {
  auto& g = storage().grad;
  std::fill(g.begin(), g.end(), 0.0);
}

Tensor Tensor::clone() const {
  Tensor out(shape(), std::vector<double>(data().begin(), data().end()));
  out.set_requires_grad(requires_grad());
  return out;
}

}  // namespace vimlab
