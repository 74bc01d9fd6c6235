#pragma once

// Column-defined linear operators l1 -> l2 and the counterexample operator
// Lambda built from the geometric coefficients eta_j, mu_j.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdlib>
#include <limits>
#include <numbers>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mscale/detail/accurate.hpp"
#include "mscale/seqspace.hpp"

namespace mscale {

/// Constant pack of the counterexample: growth factor M, initial weight
/// alpha0 (lambda_0), delta, b and c0.
struct CexParams {
  double M = 6.0;
  double alpha0 = 1.0;
  double delta = 0.0;
  double b = 0.0;
  double c0 = 0.0;
};

struct DerivedConstants {
  CexParams params;
  /// (3 - 1/M)^2 >= 8, i.e. M >= 1/(3 - 2 sqrt 2); the inequality
  /// 2 delta^2 + (1/M - 3) delta + 1 <= 0 then holds for the derived delta.
  bool divergence_guaranteed = false;
};

/// Smallest M for which the multiscale iterates provably diverge.
inline constexpr double kDivergenceThreshold = 3.0 + 2.0 * std::numbers::sqrt2;

inline bool divergence_guaranteed(double M) {
  const double lhs = (3.0 - 1.0 / M) * (3.0 - 1.0 / M);
  // (3 - 1/M)^2 = 8 holds exactly at the threshold but not after rounding;
  // accept a few ulps below.
  return lhs >= 8.0 * (1.0 - 1e-14);
}

inline DerivedConstants derive_constants(double M, double alpha0) {
  if (!(M > 1.0) || !std::isfinite(M)) throw std::invalid_argument("M must be > 1");
  if (!(alpha0 > 0.0) || !std::isfinite(alpha0))
    throw std::invalid_argument("alpha0 must be > 0");
  CexParams p;
  p.M = M;
  p.alpha0 = alpha0;
  p.delta = (3.0 - 1.0 / M) / 4.0;
  p.b = p.delta * (1.0 - p.delta) * (M - 1.0) / (2.0 * M);
  p.c0 = p.b * M * M * M / (2.0 * alpha0 * p.delta * (1.0 - p.delta));
  return {p, divergence_guaranteed(M)};
}

/// eta_j = sqrt(c0 / M^j), evaluated in log space.
inline double eta(std::size_t j, const CexParams& p) {
  return std::exp(0.5 * (std::log(p.c0) - static_cast<double>(j) * std::log(p.M)));
}

inline double mu(std::size_t j, const CexParams& p) { return -p.delta * eta(j, p); }

/// sum_{m > D} eta_m^2 = c0 M^{-D} / (M - 1): what col(1) loses to truncation.
inline double counterexample_tail(const CexParams& p, std::size_t D) {
  return std::exp(std::log(p.c0) - static_cast<double>(D) * std::log(p.M)) / (p.M - 1.0);
}

// ---------------------------------------------------------------------------

/// Dense column-major matrix viewed as a map from R^{dim_in} to R^{dim_out}.
/// Indices passed to col()/entry() are 1-based.
class LinearOp {
 public:
  LinearOp() = default;
  LinearOp(std::size_t dim_out, std::size_t dim_in)
      : dim_out_(dim_out), dim_in_(dim_in), a_(dim_out * dim_in, 0.0) {}

  static LinearOp identity(std::size_t dim) {
    LinearOp A(dim, dim);
    for (std::size_t i = 1; i <= dim; ++i) A.set(i, i, 1.0);
    return A;
  }

  static LinearOp diagonal(std::span<const double> d) {
    LinearOp A(d.size(), d.size());
    for (std::size_t i = 0; i < d.size(); ++i) A.set(i + 1, i + 1, d[i]);
    return A;
  }

  /// Build from a row-major list of rows.
  static LinearOp from_rows(const std::vector<std::vector<double>>& rows) {
    if (rows.empty() || rows.front().empty()) throw std::invalid_argument("empty matrix");
    LinearOp A(rows.size(), rows.front().size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (rows[i].size() != A.dim_in_) throw std::invalid_argument("ragged rows");
      for (std::size_t j = 0; j < rows[i].size(); ++j) A.set(i + 1, j + 1, rows[i][j]);
    }
    return A;
  }

  std::size_t dim_in() const { return dim_in_; }
  std::size_t dim_out() const { return dim_out_; }

  double entry(std::size_t i, std::size_t j) const { return a_[(j - 1) * dim_out_ + (i - 1)]; }
  void set(std::size_t i, std::size_t j, double v) {
    if (i < 1 || i > dim_out_ || j < 1 || j > dim_in_)
      throw std::out_of_range("LinearOp::set index out of range");
    if (!std::isfinite(v)) throw std::invalid_argument("LinearOp entries must be finite");
    a_[(j - 1) * dim_out_ + (i - 1)] = v;
  }

  /// Image of e_j.
  std::span<const double> col(std::size_t j) const {
    return std::span<const double>(a_).subspan((j - 1) * dim_out_, dim_out_);
  }
  SeqVector column(std::size_t j) const {
    auto c = col(j);
    return SeqVector(std::vector<double>(c.begin(), c.end()));
  }

  /// sum_j x_j col(j), accumulated with compensation row by row.
  SeqVector apply(const SeqVector& x) const {
    std::vector<detail::CompensatedSum> rows(dim_out_);
    accumulate(rows, x, 1.0);
    return collect(rows);
  }

  /// y - A x with compensated accumulation; y is padded/truncated to dim_out.
  SeqVector residual(const SeqVector& y, const SeqVector& x) const {
    std::vector<detail::CompensatedSum> rows(dim_out_);
    for (std::size_t i = 0; i < dim_out_ && i < y.dim(); ++i) rows[i].add(y.data()[i]);
    accumulate(rows, x, -1.0);
    return collect(rows);
  }

  /// Entry j is <w, col(j)>.
  SeqVector adjoint_apply(const SeqVector& w) const {
    SeqVector out(dim_in_);
    for (std::size_t j = 1; j <= dim_in_; ++j) out(j) = detail::dot2(w.data(), col(j));
    return out;
  }

  double frobenius_norm() const {
    SeqVector flat(std::vector<double>(a_.begin(), a_.end()));
    return norm_l2(flat);
  }

  Eigen::MatrixXd to_eigen() const {
    return Eigen::Map<const Eigen::MatrixXd>(a_.data(), static_cast<Eigen::Index>(dim_out_),
                                             static_cast<Eigen::Index>(dim_in_));
  }

  /// For operators that truncate an infinite-dimensional map: a bound on the
  /// squared l2 mass dropped from the stored columns (0 when exact).
  double truncation_tail() const { return truncation_tail_; }
  void set_truncation_tail(double t) { truncation_tail_ = t; }

 private:
  void accumulate(std::vector<detail::CompensatedSum>& rows, const SeqVector& x,
                  double sign) const {
    const std::size_t n = std::min(dim_in_, x.dim());
    for (std::size_t j = 0; j < n; ++j) {
      const double xj = sign * x.data()[j];
      if (xj == 0.0) continue;
      const double* c = a_.data() + j * dim_out_;
      for (std::size_t i = 0; i < dim_out_; ++i)
        if (c[i] != 0.0) rows[i].add_product(c[i], xj);
    }
  }

  static SeqVector collect(const std::vector<detail::CompensatedSum>& rows) {
    std::vector<double> out(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) out[i] = rows[i].value();
    return SeqVector(std::move(out));
  }

  std::size_t dim_out_ = 0;
  std::size_t dim_in_ = 0;
  std::vector<double> a_;
  double truncation_tail_ = 0.0;
};

/// The counterexample operator truncated to D x D:
///   Lambda(e_1) = sum_{m>=2} eta_m e_m + mu_2 e_2,
///   Lambda(e_j) = (j/b) (eta_j e_j + mu_j e_j - mu_{j+1} e_{j+1}),  j >= 2.
inline LinearOp build_counterexample_operator(const CexParams& p, std::size_t D) {
  if (D < 3) throw std::invalid_argument("counterexample operator needs D >= 3");
  LinearOp A(D, D);
  A.set(2, 1, eta(2, p) + mu(2, p));
  for (std::size_t m = 3; m <= D; ++m) A.set(m, 1, eta(m, p));
  for (std::size_t j = 2; j <= D; ++j) {
    const double s = static_cast<double>(j) / p.b;
    A.set(j, j, s * (eta(j, p) + mu(j, p)));
    if (j + 1 <= D) A.set(j + 1, j, -s * mu(j + 1, p));
  }
  A.set_truncation_tail(counterexample_tail(p, D));
  return A;
}

inline SeqVector adjoint_apply(const LinearOp& A, const SeqVector& w) { return A.adjoint_apply(w); }

// ---------------------------------------------------------------------------
// Spectral estimates

inline constexpr std::uint64_t kDefaultSeed = 0x6d7363616c65ULL;

/// Seed for randomized start vectors; MSCALE_SEED overrides the default.
inline std::uint64_t default_seed() {
  if (const char* s = std::getenv("MSCALE_SEED"); s != nullptr && *s != '\0') {
    char* end = nullptr;
    const unsigned long long v = std::strtoull(s, &end, 10);
    if (end != nullptr && *end == '\0') return v;
  }
  return kDefaultSeed;
}

/// Upper estimate of the spectral norm: power iteration on A^T A, inflated by
/// 1.01 and capped by the Frobenius norm.
inline double operator_norm_upper(const LinearOp& A, int iters, std::uint64_t seed = default_seed()) {
  if (iters < 1) throw std::invalid_argument("operator_norm_upper: iters must be >= 1");
  const double frob = A.frobenius_norm();
  if (frob == 0.0) return 0.0;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  SeqVector x(A.dim_in());
  for (double& v : x.data()) v = gauss(rng);
  double est = 0.0;
  for (int k = 0; k < iters; ++k) {
    const double nx = norm_l2(x);
    if (nx == 0.0) break;
    x *= 1.0 / nx;
    const SeqVector Ax = A.apply(x);
    est = norm_l2(Ax);
    x = A.adjoint_apply(Ax);
  }
  return std::min(1.01 * est, frob);
}

struct SingularEstimate {
  double value = 0.0;
  bool converged = false;
  int iterations = 0;
};

/// Smallest singular value. Exact (Jacobi SVD with column-pivoting QR, which
/// keeps relative accuracy on column-graded matrices) up to 256 columns;
/// inverse power iteration on the normal matrix beyond.
inline SingularEstimate min_singular_estimate(const LinearOp& A, int max_iter = 1000,
                                              std::uint64_t seed = default_seed()) {
  if (A.dim_in() > A.dim_out())
    throw std::invalid_argument("min_singular_estimate requires dim_in <= dim_out");
  const Eigen::MatrixXd M = A.to_eigen();
  if (A.dim_in() <= 256) {
    Eigen::JacobiSVD<Eigen::MatrixXd, Eigen::ColPivHouseholderQRPreconditioner> svd(M);
    const auto& s = svd.singularValues();
    return {s.size() ? s.minCoeff() : 0.0, true, 0};
  }
  const Eigen::MatrixXd N = M.transpose() * M;
  Eigen::LDLT<Eigen::MatrixXd> ldlt(N);
  if (ldlt.info() != Eigen::Success || (ldlt.vectorD().array() <= 0.0).any())
    return {0.0, true, 0};
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::VectorXd x(N.cols());
  for (Eigen::Index i = 0; i < x.size(); ++i) x[i] = gauss(rng);
  x.normalize();
  double prev = 0.0;
  for (int k = 1; k <= max_iter; ++k) {
    Eigen::VectorXd z = ldlt.solve(x);
    const double nz = z.norm();
    if (!std::isfinite(nz) || nz == 0.0) return {0.0, false, k};
    x = z / nz;
    const double sigma = std::sqrt(1.0 / nz);
    if (k > 1 && std::abs(sigma - prev) <= 1e-12 * sigma) return {sigma, true, k};
    prev = sigma;
  }
  return {prev, false, max_iter};
}

// ---------------------------------------------------------------------------

struct KernelCheck {
  SeqVector gamma;
  double defect = 0.0;
};

/// gamma = gamma1 (1, -b/2, ..., -b/D): the direction annihilated by the
/// recursion gamma_j / b_j = -gamma_1. It lies in l2 but not in l1, so it is
/// a kernel direction of the l2 extension only. The defect is ||A gamma||_2
/// over rows 1..D-1 (row D sees the truncation boundary).
inline KernelCheck kernel_recursion_check(const CexParams& p, double gamma1, std::size_t D) {
  if (D < 3) throw std::invalid_argument("kernel_recursion_check needs D >= 3");
  const LinearOp A = build_counterexample_operator(p, D);
  SeqVector g(D);
  g(1) = gamma1;
  for (std::size_t j = 2; j <= D; ++j) g(j) = -gamma1 * p.b / static_cast<double>(j);
  const SeqVector image = A.apply(g).resized(D - 1);
  return {std::move(g), norm_l2(image)};
}

}  // namespace mscale
