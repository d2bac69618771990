#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace seqmargin {

// Dense row-major double tensor. Rank 1 and 2 are the only ranks the models
// use, but the shape is kept general so checkpoints can describe themselves.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> shape, double fill = 0.0);
  Tensor(std::initializer_list<double> values);

  static Tensor vector(std::size_t n, double fill = 0.0) { return Tensor({n}, fill); }
  static Tensor matrix(std::size_t rows, std::size_t cols, double fill = 0.0) {
    return Tensor({rows, cols}, fill);
  }
  static Tensor from(std::vector<double> values);

  const std::vector<std::size_t>& shape() const noexcept { return shape_; }
  std::size_t size() const noexcept { return data_.size(); }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t rows() const noexcept { return shape_.empty() ? 0 : shape_[0]; }
  std::size_t cols() const noexcept { return shape_.size() < 2 ? 1 : shape_[1]; }

  double& operator[](std::size_t i) noexcept { return data_[i]; }
  double operator[](std::size_t i) const noexcept { return data_[i]; }
  double& at(std::size_t r, std::size_t c) noexcept { return data_[r * cols() + c]; }
  double at(std::size_t r, std::size_t c) const noexcept { return data_[r * cols() + c]; }

  std::span<double> span() noexcept { return data_; }
  std::span<const double> span() const noexcept { return data_; }
  std::span<double> row(std::size_t r) noexcept { return {data_.data() + r * cols(), cols()}; }
  std::span<const double> row(std::size_t r) const noexcept {
    return {data_.data() + r * cols(), cols()};
  }
  const std::vector<double>& values() const noexcept { return data_; }

  void fill(double v) noexcept;
  bool all_finite() const noexcept;
  bool same_shape(const Tensor& other) const noexcept { return shape_ == other.shape_; }
  std::string shape_string() const;

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  std::vector<std::size_t> shape_;
  std::vector<double> data_;
};

// Throws a shape error unless `actual` has `expected` elements.
void require_size(std::size_t actual, std::size_t expected, const char* what);

double dot(std::span<const double> a, std::span<const double> b);

// y += W x for W of shape rows x cols, starting at column `col0` of W.
void gemv_add(const Tensor& w, std::size_t col0, std::span<const double> x,
              std::span<double> y);
// dx += W^T dy restricted to the columns [col0, col0 + dx.size()).
void gemv_t_add(const Tensor& w, std::size_t col0, std::span<const double> dy,
                std::span<double> dx);
// G[:, col0:col0+x.size()] += dy x^T
void outer_add(Tensor& g, std::size_t col0, std::span<const double> dy,
               std::span<const double> x);

}  // namespace seqmargin
