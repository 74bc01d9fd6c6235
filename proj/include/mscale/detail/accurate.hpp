#pragma once

// Error-free transformations and compensated dot products (Ogita, Rump and
// Oishi, "Accurate sum and dot product", 2005). Residuals of the form
// y - A x cancel almost completely near a minimizer, and the optimality
// certificates compare those residuals against 1/(2 lambda); plain summation
// loses the digits the certificate needs.

#include <cmath>
#include <cstddef>
#include <span>

namespace mscale::detail {

struct Pair {
  double hi;
  double lo;
};

inline Pair two_sum(double a, double b) {
  const double s = a + b;
  const double bb = s - a;
  return {s, (a - (s - bb)) + (b - bb)};
}

inline Pair two_prod(double a, double b) {
  const double p = a * b;
  return {p, std::fma(a, b, -p)};
}

/// Accumulator carrying a running compensation term.
class CompensatedSum {
 public:
  void add(double x) {
    const auto [s, e] = two_sum(hi_, x);
    hi_ = s;
    lo_ += e;
  }
  void add_product(double a, double b) {
    const auto [p, pe] = two_prod(a, b);
    const auto [s, se] = two_sum(hi_, p);
    hi_ = s;
    lo_ += pe + se;
  }
  double value() const { return hi_ + lo_; }

 private:
  double hi_ = 0.0;
  double lo_ = 0.0;
};

inline double dot2(std::span<const double> a, std::span<const double> b) {
  CompensatedSum acc;
  const std::size_t n = a.size() < b.size() ? a.size() : b.size();
  for (std::size_t i = 0; i < n; ++i) acc.add_product(a[i], b[i]);
  return acc.value();
}

inline double sum2(std::span<const double> a) {
  CompensatedSum acc;
  for (double x : a) acc.add(x);
  return acc.value();
}

}  // namespace mscale::detail
