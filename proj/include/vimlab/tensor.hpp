#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace vimlab {

using Shape = std::vector<std::size_t>;
using NodeId = std::uint64_t;

std::string shape_string(const Shape& shape);
std::size_t shape_size(const Shape& shape);

/// Dense row-major array of doubles with an optional gradient accumulator.
///
/// A Tensor is a handle: copies share storage, so a parameter captured by a
/// graph and the same parameter held by a model see the same gradient. Use
/// clone() for an independent copy.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> values);

  static Tensor scalar(double value);
  static Tensor matrix(std::initializer_list<std::initializer_list<double>> rows);
  static Tensor vector(std::initializer_list<double> values);

  bool defined() const noexcept { return static_cast<bool>(impl_); }
  NodeId id() const;

  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t size() const;
  // Matrix views: a rank-1 tensor reads as a single row.
  std::size_t rows() const;
  std::size_t cols() const;

  std::span<double> data();
  std::span<const double> data() const;
  double item() const;
  double& operator[](std::size_t i) { return data()[i]; }
  double operator[](std::size_t i) const { return data()[i]; }
  double& at(std::size_t r, std::size_t c);
  double at(std::size_t r, std::size_t c) const;
  std::span<const double> row(std::size_t r) const;

  bool requires_grad() const;
  Tensor& set_requires_grad(bool on);

  bool has_grad() const;
  std::span<double> grad();
  std::span<const double> grad() const;
  // Allocates a zero gradient if absent and returns it.
  // Handle semantics: callable on a const handle, like the shared storage it points to.
  std::span<double> ensure_grad() const;
  void zero_grad();

  Tensor clone() const;
  bool same_node(const Tensor& other) const noexcept { return impl_ == other.impl_; }

 private:
  struct Storage;
  Storage& storage() const;

  std::shared_ptr<Storage> impl_;
};

}  // namespace vimlab
