#include "inmt/kernels.hpp"

namespace inmt::kernels::serial {

void gemv(std::span<const double> w, std::size_t rows, std::size_t cols,
          std::span<const double> x, std::span<double> y, bool accumulate) {
  for (std::size_t i = 0; i < rows; ++i) {
    const double* wr = w.data() + i * cols;
    double acc = 0.0;
    for (std::size_t j = 0; j < cols; ++j) acc += wr[j] * x[j];
    y[i] = accumulate ? y[i] + acc : acc;
  }
}

void gemv_t_acc(std::span<const double> w, std::size_t rows, std::size_t cols,
                std::span<const double> dy, std::span<double> dx) {
  for (std::size_t j = 0; j < cols; ++j) {
    double acc = dx[j];
    for (std::size_t i = 0; i < rows; ++i) acc += w[i * cols + j] * dy[i];
    dx[j] = acc;
  }
}

void outer_acc(std::span<double> dw, std::size_t rows, std::size_t cols,
               std::span<const double> dy, std::span<const double> x) {
  for (std::size_t i = 0; i < rows; ++i) {
    const double g = dy[i];
    if (g == 0.0) continue;
    double* wr = dw.data() + i * cols;
    for (std::size_t j = 0; j < cols; ++j) wr[j] += g * x[j];
  }
}

}  // namespace inmt::kernels::serial
