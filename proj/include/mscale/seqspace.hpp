#pragma once

// Finite truncations of the sequence spaces used throughout the library:
//   X = l1, H = l2, F = weighted l1 with weights n, and G = dual of F
//   (sup-norm weighted by 1/n).
// Logical indices start at 1 as in the sequence-space notation; the backing
// storage is a plain contiguous vector.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "mscale/detail/accurate.hpp"

namespace mscale {

class SeqVector {
 public:
  SeqVector() = default;

  explicit SeqVector(std::size_t dim) : coeffs_(dim, 0.0) {}

  explicit SeqVector(std::vector<double> coeffs) : coeffs_(std::move(coeffs)) {
    require_finite();
  }

  SeqVector(std::initializer_list<double> coeffs) : coeffs_(coeffs) {
    require_finite();
  }

  /// Basis vector e_j of dimension `dim` (1-based j).
  static SeqVector basis(std::size_t j, std::size_t dim) {
    if (j < 1 || j > dim) throw std::out_of_range("basis index outside 1..dim");
    SeqVector e(dim);
    e.coeffs_[j - 1] = 1.0;
    return e;
  }

  std::size_t dim() const { return coeffs_.size(); }
  bool empty() const { return coeffs_.empty(); }

  // 1-based access.
  double operator()(std::size_t n) const { return coeffs_.at(n - 1); }
  double& operator()(std::size_t n) { return coeffs_.at(n - 1); }

  std::span<const double> data() const { return coeffs_; }
  std::span<double> data() { return coeffs_; }
  const std::vector<double>& values() const { return coeffs_; }

  /// Copy zero-padded (or truncated) to `dim`.
  SeqVector resized(std::size_t dim) const {
    std::vector<double> c(coeffs_);
    c.resize(dim, 0.0);
    return SeqVector(std::move(c));
  }

  bool all_finite() const {
    return std::all_of(coeffs_.begin(), coeffs_.end(),
                       [](double x) { return std::isfinite(x); });
  }

  SeqVector& operator+=(const SeqVector& o) {
    if (o.dim() > dim()) coeffs_.resize(o.dim(), 0.0);
    for (std::size_t i = 0; i < o.dim(); ++i) coeffs_[i] += o.coeffs_[i];
    return *this;
  }
  SeqVector& operator-=(const SeqVector& o) {
    if (o.dim() > dim()) coeffs_.resize(o.dim(), 0.0);
    for (std::size_t i = 0; i < o.dim(); ++i) coeffs_[i] -= o.coeffs_[i];
    return *this;
  }
  SeqVector& operator*=(double a) {
    for (double& x : coeffs_) x *= a;
    return *this;
  }

  friend SeqVector operator+(SeqVector a, const SeqVector& b) { return a += b; }
  friend SeqVector operator-(SeqVector a, const SeqVector& b) { return a -= b; }
  friend SeqVector operator*(double s, SeqVector a) { return a *= s; }
  friend SeqVector operator*(SeqVector a, double s) { return a *= s; }

  friend bool operator==(const SeqVector&, const SeqVector&) = default;

 private:
  void require_finite() const {
    if (!all_finite()) throw std::invalid_argument("SeqVector entries must be finite");
  }

  std::vector<double> coeffs_;
};

// ---------------------------------------------------------------------------
// Norms and pairing

inline double norm_l1(const SeqVector& v) {
  detail::CompensatedSum acc;
  for (double x : v.data()) acc.add(std::abs(x));
  return acc.value();
}

inline double norm_l2(const SeqVector& v) {
  // Scale by the largest entry so tiny tails do not underflow when squared.
  double scale = 0.0;
  for (double x : v.data()) scale = std::max(scale, std::abs(x));
  if (scale == 0.0) return 0.0;
  detail::CompensatedSum acc;
  for (double x : v.data()) {
    const double r = x / scale;
    acc.add_product(r, r);
  }
  return scale * std::sqrt(acc.value());
}

/// Weighted l1 norm sum_n n |v_n|.
inline double norm_F(const SeqVector& v) {
  detail::CompensatedSum acc;
  const auto d = v.data();
  for (std::size_t i = 0; i < d.size(); ++i)
    acc.add_product(static_cast<double>(i + 1), std::abs(d[i]));
  return acc.value();
}

/// Dual of norm_F: max_n |k_n| / n.
inline double dual_norm_G(const SeqVector& k) {
  double best = 0.0;
  const auto d = k.data();
  for (std::size_t i = 0; i < d.size(); ++i)
    best = std::max(best, std::abs(d[i]) / static_cast<double>(i + 1));
  return best;
}

/// Euclidean pairing; the shorter argument is implicitly zero-padded.
inline double inner(const SeqVector& u, const SeqVector& v) {
  return detail::dot2(u.data(), v.data());
}

// ---------------------------------------------------------------------------
// CSV row serialization (index 1 first, shortest round-trip decimal form)

inline std::string format_double(double x) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

inline std::string to_csv_row(const SeqVector& v) {
  std::string out;
  for (std::size_t i = 0; i < v.dim(); ++i) {
    if (i) out += ',';
    out += format_double(v.data()[i]);
  }
  return out;
}

inline double parse_double(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
    s.remove_suffix(1);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  double x = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), x);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(x))
    throw std::invalid_argument("not a finite real number: '" + std::string(s) + "'");
  return x;
}

inline SeqVector from_csv_row(std::string_view row) {
  std::vector<double> c;
  while (!row.empty() && (row.back() == '\n' || row.back() == '\r')) row.remove_suffix(1);
  if (row.empty()) throw std::invalid_argument("empty CSV row");
  std::size_t start = 0;
  for (;;) {
    const std::size_t comma = row.find(',', start);
    c.push_back(parse_double(row.substr(start, comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return SeqVector(std::move(c));
}

}  // namespace mscale
