#include <omp.h>

#include <cstdint>

#include "inmt/kernels.hpp"

namespace inmt::kernels {

namespace {
bool worth_splitting(std::size_t rows, std::size_t cols) {
  return rows * cols >= kParallelThreshold && !omp_in_parallel();
}
}  // namespace

void gemv(std::span<const double> w, std::size_t rows, std::size_t cols,
          std::span<const double> x, std::span<double> y, bool accumulate) {
  if (!worth_splitting(rows, cols)) {
    serial::gemv(w, rows, cols, x, y, accumulate);
    return;
  }
  const auto n = static_cast<std::int64_t>(rows);
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < n; ++i) {
    const double* wr = w.data() + i * cols;
    double acc = 0.0;
    for (std::size_t j = 0; j < cols; ++j) acc += wr[j] * x[j];
    y[i] = accumulate ? y[i] + acc : acc;
  }
}

void gemv_t_acc(std::span<const double> w, std::size_t rows, std::size_t cols,
                std::span<const double> dy, std::span<double> dx) {
  if (!worth_splitting(rows, cols)) {
    serial::gemv_t_acc(w, rows, cols, dy, dx);
    return;
  }
  const auto n = static_cast<std::int64_t>(cols);
#pragma omp parallel for schedule(static)
  for (std::int64_t j = 0; j < n; ++j) {
    double acc = dx[j];
    for (std::size_t i = 0; i < rows; ++i) acc += w[i * cols + j] * dy[i];
    dx[j] = acc;
  }
}

void outer_acc(std::span<double> dw, std::size_t rows, std::size_t cols,
               std::span<const double> dy, std::span<const double> x) {
  if (!worth_splitting(rows, cols)) {
    serial::outer_acc(dw, rows, cols, dy, x);
    return;
  }
  const auto n = static_cast<std::int64_t>(rows);
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < n; ++i) {
    const double g = dy[i];
    if (g == 0.0) continue;
    double* wr = dw.data() + i * cols;
    for (std::size_t j = 0; j < cols; ++j) wr[j] += g * x[j];
  }
}

int max_threads() { return omp_get_max_threads(); }

}  // namespace inmt::kernels
