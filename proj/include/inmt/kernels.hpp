#pragma once

#include <cstddef>
#include <span>

// Dense kernels used by the model. The default namespace holds the
// OpenMP versions; kernels::serial holds the single-threaded reference.
// Both sum in the same order, so their results are bitwise identical.
namespace inmt::kernels {

// y = W x (y += W x when accumulate). W is rows x cols, row-major.
void gemv(std::span<const double> w, std::size_t rows, std::size_t cols,
          std::span<const double> x, std::span<double> y,
          bool accumulate = false);

// dx += W^T dy
void gemv_t_acc(std::span<const double> w, std::size_t rows, std::size_t cols,
                std::span<const double> dy, std::span<double> dx);

// dW += dy x^T
void outer_acc(std::span<double> dw, std::size_t rows, std::size_t cols,
               std::span<const double> dy, std::span<const double> x);

// Below this many multiply-adds the parallel kernels run inline.
inline constexpr std::size_t kParallelThreshold = 1u << 15;

namespace serial {

void gemv(std::span<const double> w, std::size_t rows, std::size_t cols,
          std::span<const double> x, std::span<double> y,
          bool accumulate = false);
void gemv_t_acc(std::span<const double> w, std::size_t rows, std::size_t cols,
                std::span<const double> dy, std::span<double> dx);
void outer_acc(std::span<double> dw, std::size_t rows, std::size_t cols,
               std::span<const double> dy, std::span<const double> x);

}  // namespace serial

// Number of threads OpenMP would use for a parallel region.
int max_threads();

}  // namespace inmt::kernels
