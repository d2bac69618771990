#include "seqmargin/tensor.hpp"

#include <cmath>
#include <functional>
#include <numeric>
#include <sstream>

#include "seqmargin/error.hpp"

namespace seqmargin {

Tensor::Tensor(std::vector<std::size_t> shape, double fill) : shape_(std::move(shape)) {
  const std::size_t n = std::accumulate(shape_.begin(), shape_.end(), std::size_t{1},
                                        std::multiplies<>());
  data_.assign(n, fill);
}

Tensor::Tensor(std::initializer_list<double> values) : shape_{values.size()}, data_(values) {}

Tensor Tensor::from(std::vector<double> values) {
  Tensor t;
  t.shape_ = {values.size()};
  t.data_ = std::move(values);
  return t;
}

void Tensor::fill(double v) noexcept { std::fill(data_.begin(), data_.end(), v); }

bool Tensor::all_finite() const noexcept {
  for (double v : data_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

std::string Tensor::shape_string() const {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape_.size(); ++i) os << (i ? "x" : "") << shape_[i];
  os << ']';
  return os.str();
}

void require_size(std::size_t actual, std::size_t expected, const char* what) {
  if (actual != expected) {
    std::ostringstream os;
    os << what << ": expected " << expected << " elements, got " << actual;
    fail(ErrorCode::kShape, os.str());
  }
}

double dot(std::span<const double> a, std::span<const double> b) {
  require_size(b.size(), a.size(), "dot");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

void gemv_add(const Tensor& w, std::size_t col0, std::span<const double> x,
              std::span<double> y) {
  const std::size_t cols = w.cols();
  const double* base = w.span().data();
  for (std::size_t r = 0; r < y.size(); ++r) {
    const double* row = base + r * cols + col0;
    double s = 0.0;
    for (std::size_t c = 0; c < x.size(); ++c) s += row[c] * x[c];
    y[r] += s;
  }
}

void gemv_t_add(const Tensor& w, std::size_t col0, std::span<const double> dy,
                std::span<double> dx) {
  const std::size_t cols = w.cols();
  const double* base = w.span().data();
  for (std::size_t r = 0; r < dy.size(); ++r) {
    const double g = dy[r];
    if (g == 0.0) continue;
    const double* row = base + r * cols + col0;
    for (std::size_t c = 0; c < dx.size(); ++c) dx[c] += row[c] * g;
  }
}

void outer_add(Tensor& g, std::size_t col0, std::span<const double> dy,
               std::span<const double> x) {
  const std::size_t cols = g.cols();
  double* base = g.span().data();
  for (std::size_t r = 0; r < dy.size(); ++r) {
    const double d = dy[r];
    if (d == 0.0) continue;
    double* row = base + r * cols + col0;
    for (std::size_t c = 0; c < x.size(); ++c) row[c] += d * x[c];
  }
}

}  // namespace seqmargin
