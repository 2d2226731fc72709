#include <omp.h>

#include <random>

#include "doctest.h"
#include "inmt/kernels.hpp"

using namespace inmt;

namespace {

std::vector<double> random_vec(std::size_t n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1, 1);
  std::vector<double> v(n);
  for (auto& x : v) x = u(rng);
  return v;
}

struct Shape {
  std::size_t rows, cols;
};

// Small shapes run inline; the large ones cross the parallel threshold.
const Shape kShapes[] = {{1, 1}, {3, 7}, {17, 5}, {256, 128}, {300, 301}, {1024, 64}};

}  // namespace

TEST_CASE("parallel kernels are bitwise equal to the serial reference") {
  const int saved = omp_get_max_threads();
  for (int threads : {1, 3, 4}) {
    omp_set_num_threads(threads);
    std::mt19937_64 rng(static_cast<std::uint64_t>(threads));
    for (const auto [rows, cols] : kShapes) {
      const auto w = random_vec(rows * cols, rng);
      const auto x = random_vec(cols, rng);
      const auto dy = random_vec(rows, rng);
      const auto y0 = random_vec(rows, rng);

      for (bool acc : {false, true}) {
        auto a = y0, b = y0;
        kernels::gemv(w, rows, cols, x, a, acc);
        kernels::serial::gemv(w, rows, cols, x, b, acc);
        CHECK(a == b);
      }
      auto dx_a = x, dx_b = x;
      kernels::gemv_t_acc(w, rows, cols, dy, dx_a);
      kernels::serial::gemv_t_acc(w, rows, cols, dy, dx_b);
      CHECK(dx_a == dx_b);

      auto dw_a = w, dw_b = w;
      kernels::outer_acc(dw_a, rows, cols, dy, x);
      kernels::serial::outer_acc(dw_b, rows, cols, dy, x);
      CHECK(dw_a == dw_b);
    }
  }
  omp_set_num_threads(saved);
}

TEST_CASE("serial kernels match naive loops") {
  std::mt19937_64 rng(5);
  for (const auto [rows, cols] : kShapes) {
    const auto w = random_vec(rows * cols, rng);
    const auto x = random_vec(cols, rng);
    const auto dy = random_vec(rows, rng);

    std::vector<double> y(rows, 7.0);
    kernels::serial::gemv(w, rows, cols, x, y);
    for (std::size_t i = 0; i < rows; ++i) {
      long double s = 0;
      for (std::size_t j = 0; j < cols; ++j) s += static_cast<long double>(w[i * cols + j]) * x[j];
      CHECK(y[i] == doctest::Approx(static_cast<double>(s)).epsilon(1e-12));
    }
    std::vector<double> dx(cols, 0.5);
    kernels::serial::gemv_t_acc(w, rows, cols, dy, dx);
    for (std::size_t j = 0; j < cols; ++j) {
      long double s = 0.5;
      for (std::size_t i = 0; i < rows; ++i) s += static_cast<long double>(w[i * cols + j]) * dy[i];
      CHECK(dx[j] == doctest::Approx(static_cast<double>(s)).epsilon(1e-12));
    }
    auto dw = w;
    kernels::serial::outer_acc(dw, rows, cols, dy, x);
    for (std::size_t i = 0; i < rows; ++i)
      for (std::size_t j = 0; j < cols; ++j) REQUIRE(dw[i * cols + j] == w[i * cols + j] + dy[i] * x[j]);
  }
  CHECK(kernels::max_threads() >= 1);
}
