#pragma once

#include <cstddef>
#include <numeric>
#include <span>
#include <vector>

namespace inmt {

using Vec = std::vector<double>;

// Dense row-major array. Matrices are rank 2, vectors rank 1.
struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<double> data;

  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> dims)
      : shape(std::move(dims)),
        data(std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                             std::multiplies<>()),
             0.0) {}

  static Tensor matrix(std::size_t rows, std::size_t cols) {
    return Tensor({rows, cols});
  }
  static Tensor vector(std::size_t n) { return Tensor({n}); }

  std::size_t size() const { return data.size(); }
  std::size_t rows() const { return shape.empty() ? 0 : shape[0]; }
  std::size_t cols() const { return shape.size() < 2 ? 1 : shape[1]; }

  double& at(std::size_t r, std::size_t c) { return data[r * cols() + c]; }
  double at(std::size_t r, std::size_t c) const { return data[r * cols() + c]; }

  std::span<double> row(std::size_t r) {
    return {data.data() + r * cols(), cols()};
  }
  std::span<const double> row(std::size_t r) const {
    return {data.data() + r * cols(), cols()};
  }

  // Rows [first, first + count) as a flat span.
  std::span<const double> row_block(std::size_t first, std::size_t count) const {
    return {data.data() + first * cols(), count * cols()};
  }
  std::span<double> row_block(std::size_t first, std::size_t count) {
    return {data.data() + first * cols(), count * cols()};
  }

  void fill(double v) { std::fill(data.begin(), data.end(), v); }

  bool operator==(const Tensor&) const = default;
};

}  // namespace inmt
