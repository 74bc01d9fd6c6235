#pragma once

// Inner variational problem of one multiscale step,
//
//     min_u  lambda ||y - A(s + u)||^2 + R(u),
//
// solved by accelerated proximal gradient and certified with the dual-norm
// optimality condition: u is a minimizer iff, with v = y - A(s + u),
//
//     ||A^T v||_*  <= 1 / (2 lambda)   and   <v, A u> = R(u) / (2 lambda),
//
// where ||.||_* is the dual norm of R. The solver stops on the certificate,
// not on iterate movement.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "mscale/detail/accurate.hpp"
#include "mscale/operators.hpp"
#include "mscale/seqspace.hpp"
#include "mscale/tv1d.hpp"

namespace mscale {

// ---------------------------------------------------------------------------
// Proximal maps

/// Soft thresholding: sign(z_n) max(|z_n| - t w_n, 0).
inline SeqVector prox_weighted_l1(const SeqVector& z, double t, std::span<const double> weights) {
  if (t < 0.0) throw std::invalid_argument("prox_weighted_l1: t must be >= 0");
  if (weights.size() < z.dim()) throw std::invalid_argument("prox_weighted_l1: too few weights");
  SeqVector u(z.dim());
  for (std::size_t i = 0; i < z.dim(); ++i) {
    const double zi = z.data()[i];
    const double shrunk = std::abs(zi) - t * weights[i];
    u.data()[i] = shrunk > 0.0 ? std::copysign(shrunk, zi) : 0.0;
  }
  return u;
}

/// Block soft thresholding of the (non-squared) l2 norm.
inline SeqVector prox_hilbert_norm(const SeqVector& z, double t) {
  if (t < 0.0) throw std::invalid_argument("prox_hilbert_norm: t must be >= 0");
  const double nz = norm_l2(z);
  if (nz <= t) return SeqVector(z.dim());
  return (1.0 - t / nz) * z;
}

inline SeqVector prox_tv_1d(const SeqVector& z, double t) {
  if (t < 0.0) throw std::invalid_argument("prox_tv_1d: t must be >= 0");
  return SeqVector(tv1d_denoise(z.data(), t));
}

// ---------------------------------------------------------------------------

enum class RegularizerKind { WeightedL1, HilbertNorm, TV1D };

inline std::string_view to_string(RegularizerKind k) {
  switch (k) {
    case RegularizerKind::WeightedL1: return "weighted-l1";
    case RegularizerKind::HilbertNorm: return "hilbert-norm";
    case RegularizerKind::TV1D: return "tv-1d";
  }
  return "?";
}

inline RegularizerKind regularizer_kind_from_string(std::string_view s) {
  if (s == "weighted-l1" || s == "l1" || s == "F") return RegularizerKind::WeightedL1;
  if (s == "hilbert-norm" || s == "hilbert" || s == "l2") return RegularizerKind::HilbertNorm;
  if (s == "tv-1d" || s == "tv") return RegularizerKind::TV1D;
  throw std::invalid_argument("unknown regularizer '" + std::string(s) + "'");
}

/// A convex, nonnegative, 1-homogeneous penalty with its prox and dual norm.
class Regularizer {
 public:
  explicit Regularizer(RegularizerKind kind = RegularizerKind::WeightedL1) : kind_(kind) {}

  static Regularizer weighted_l1() { return Regularizer(RegularizerKind::WeightedL1); }
  static Regularizer weighted_l1(std::vector<double> weights) {
    for (double w : weights)
      if (!(w >= 0.0) || !std::isfinite(w)) throw std::invalid_argument("weights must be >= 0");
    Regularizer r(RegularizerKind::WeightedL1);
    r.weights_ = std::move(weights);
    return r;
  }
  static Regularizer hilbert_norm() { return Regularizer(RegularizerKind::HilbertNorm); }
  static Regularizer tv_1d() { return Regularizer(RegularizerKind::TV1D); }

  RegularizerKind kind() const { return kind_; }
  std::string_view name() const { return to_string(kind_); }

  /// Weight of coordinate n (1-based); n unless custom weights were given.
  double weight(std::size_t n) const {
    if (weights_.empty()) return static_cast<double>(n);
    return n <= weights_.size() ? weights_[n - 1] : static_cast<double>(n);
  }

  std::vector<double> weights(std::size_t dim) const {
    std::vector<double> w(dim);
    for (std::size_t n = 1; n <= dim; ++n) w[n - 1] = weight(n);
    return w;
  }

  double evaluate(const SeqVector& u) const {
    switch (kind_) {
      case RegularizerKind::WeightedL1: {
        detail::CompensatedSum acc;
        for (std::size_t n = 1; n <= u.dim(); ++n) acc.add_product(weight(n), std::abs(u(n)));
        return acc.value();
      }
      case RegularizerKind::HilbertNorm: return norm_l2(u);
      case RegularizerKind::TV1D: return total_variation(u.data());
    }
    return 0.0;
  }

  /// R(p) - R(x), evaluated termwise so that nearby arguments do not cancel.
  double difference(const SeqVector& p, const SeqVector& x) const {
    detail::CompensatedSum acc;
    switch (kind_) {
      case RegularizerKind::WeightedL1:
        for (std::size_t n = 1; n <= p.dim(); ++n) acc.add_product(weight(n), std::abs(p(n)) - std::abs(x(n)));
        return acc.value();
      case RegularizerKind::HilbertNorm: {
        const double np = norm_l2(p), nx = norm_l2(x);
        if (np + nx == 0.0) return 0.0;
        return inner(p - x, p + x) / (np + nx);
      }
      case RegularizerKind::TV1D:
        for (std::size_t i = 1; i < p.dim(); ++i)
          acc.add(std::abs(p.data()[i] - p.data()[i - 1]) - std::abs(x.data()[i] - x.data()[i - 1]));
        return acc.value();
    }
    return 0.0;
  }

  SeqVector prox(const SeqVector& z, double t) const {
    switch (kind_) {
      case RegularizerKind::WeightedL1: return prox_weighted_l1(z, t, weights(z.dim()));
      case RegularizerKind::HilbertNorm: return prox_hilbert_norm(z, t);
      case RegularizerKind::TV1D: return prox_tv_1d(z, t);
    }
    return z;
  }

  bool supports_diagonal_metric() const { return kind_ != RegularizerKind::TV1D; }

  /// argmin_u 1/2 sum_i m_i (u_i - z_i)^2 + R(u) for a positive diagonal metric m.
  SeqVector prox_metric(const SeqVector& z, std::span<const double> m) const {
    if (m.size() != z.dim()) throw std::invalid_argument("prox_metric: metric size mismatch");
    SeqVector u(z.dim());
    if (kind_ == RegularizerKind::WeightedL1) {
      for (std::size_t i = 0; i < z.dim(); ++i) {
        const double zi = z.data()[i];
        const double w = weight(i + 1);
        if (m[i] <= 0.0) {
          u.data()[i] = w > 0.0 ? 0.0 : zi;
          continue;
        }
        const double shrunk = std::abs(zi) - w / m[i];
        u.data()[i] = shrunk > 0.0 ? std::copysign(shrunk, zi) : 0.0;
      }
      return u;
    }
    if (kind_ == RegularizerKind::HilbertNorm) return hilbert_prox_metric(z, m);
    throw std::logic_error("tv-1d prox needs a scalar metric");
  }

  /// Dual norm of the functional g (the certificate's ||v* o A||_*).
  double dual_norm(const SeqVector& g) const {
    switch (kind_) {
      case RegularizerKind::WeightedL1: {
        double best = 0.0;
        for (std::size_t n = 1; n <= g.dim(); ++n) {
          const double w = weight(n);
          const double a = std::abs(g(n));
          if (a == 0.0) continue;
          best = std::max(best, w > 0.0 ? a / w : std::numeric_limits<double>::infinity());
        }
        return best;
      }
      case RegularizerKind::HilbertNorm: return norm_l2(g);
      case RegularizerKind::TV1D: {
        // g = D^T p with D the forward difference has p_k = -sum_{i<=k} g_i and
        // requires sum_i g_i = 0; the dual norm is max |p_k|. The total sum is
        // folded into the max, so a nonzero mean is charged against 1/(2 lambda).
        detail::CompensatedSum c;
        double best = 0.0;
        for (double x : g.data()) {
          c.add(x);
          best = std::max(best, std::abs(c.value()));
        }
        return best;
      }
    }
    return 0.0;
  }

  /// Index achieving the weighted-l1 dual norm (0 for other kinds or g = 0).
  std::size_t dual_argmax(const SeqVector& g) const {
    if (kind_ != RegularizerKind::WeightedL1) return 0;
    double best = 0.0;
    std::size_t arg = 0;
    for (std::size_t n = 1; n <= g.dim(); ++n) {
      const double w = weight(n);
      if (w <= 0.0) continue;
      const double a = std::abs(g(n)) / w;
      if (a > best) {
        best = a;
        arg = n;
      }
    }
    return arg;
  }

 private:
  // u_i = m_i z_i / (m_i + s) with s = 1/||u|| the root of
  // s ||m z / (m + s)|| = 1, increasing in s; zero iff ||m z|| <= 1.
  static SeqVector hilbert_prox_metric(const SeqVector& z, std::span<const double> m) {
    SeqVector mz(z.dim());
    for (std::size_t i = 0; i < z.dim(); ++i) mz.data()[i] = m[i] * z.data()[i];
    if (norm_l2(mz) <= 1.0) return SeqVector(z.dim());
    auto shrink = [&](double s) {
      SeqVector u(z.dim());
      for (std::size_t i = 0; i < z.dim(); ++i)
        u.data()[i] = m[i] > 0.0 ? mz.data()[i] / (m[i] + s) : 0.0;
      return u;
    };
    auto phi = [&](double s) { return s * norm_l2(shrink(s)) - 1.0; };
    double lo = 0.0, hi = 1.0;
    while (phi(hi) < 0.0) {
      lo = hi;
      hi *= 2.0;
    }
    for (int it = 0; it < 200 && hi - lo > 4.0 * std::numeric_limits<double>::epsilon() * hi; ++it) {
      const double mid = 0.5 * (lo + hi);
      (phi(mid) < 0.0 ? lo : hi) = mid;
    }
    return shrink(0.5 * (lo + hi));
  }

  RegularizerKind kind_;
  std::vector<double> weights_;
};

// ---------------------------------------------------------------------------
// Certificate

struct Certificate {
  double dual_norm_value = 0.0;  // ||A^T v||_*
  double target = 0.0;           // 1 / (2 lambda)
  double pairing_lhs = 0.0;      // <v, A u>
  double pairing_rhs = 0.0;      // R(u) / (2 lambda)
  bool feasible = false;
  /// |pairing_lhs - pairing_rhs| / pairing_rhs (0 when both vanish).
  double gap = 0.0;
  /// dual_norm_value / target - 1; <= tol when the dual condition holds.
  double dual_slack = 0.0;
  /// Whether the dual norm meets the target within tol (it must whenever u != 0).
  bool equality_attained = false;
  /// Weighted-l1 only: index achieving the dual norm.
  std::size_t dual_argmax = 0;
};

inline constexpr double kDefaultCertificateTol = 1e-8;

namespace detail {

inline Certificate certificate_from_residual(const LinearOp& A, const SeqVector& v, const SeqVector& u,
                                             double lambda, const Regularizer& R, double tol) {
  Certificate c;
  const SeqVector g = A.adjoint_apply(v);
  c.dual_norm_value = R.dual_norm(g);
  c.dual_argmax = R.dual_argmax(g);
  c.target = 1.0 / (2.0 * lambda);
  const double reg = R.evaluate(u);
  c.pairing_lhs = inner(v, A.apply(u));
  c.pairing_rhs = reg / (2.0 * lambda);
  // Both conditions are compared after scaling by 2 lambda, i.e. relative to
  // the target; the target itself shrinks like 1/lambda.
  c.dual_slack = 2.0 * lambda * c.dual_norm_value - 1.0;
  const double scaled_gap = std::abs(2.0 * lambda * c.pairing_lhs - reg);
  c.gap = reg > 0.0 ? scaled_gap / reg : (scaled_gap == 0.0 ? 0.0 : std::numeric_limits<double>::infinity());
  c.equality_attained = std::abs(c.dual_slack) <= tol;
  c.feasible = std::isfinite(c.dual_slack) && c.dual_slack <= tol && c.gap <= tol;
  return c;
}

}  // namespace detail

/// Optimality certificate of u for min lambda ||y - A(s+u)||^2 + R(u).
inline Certificate kkt_certificate(const LinearOp& A, const SeqVector& y, const SeqVector& s, double lambda,
                                   const SeqVector& u, const Regularizer& R = Regularizer::weighted_l1(),
                                   double tol = kDefaultCertificateTol) {
  if (!(lambda > 0.0)) throw std::invalid_argument("kkt_certificate: lambda must be > 0");
  const SeqVector v = A.residual(A.residual(y, s), u);
  return detail::certificate_from_residual(A, v, u, lambda, R, tol);
}

/// True iff u = 0 solves the step: ||A^T (y - A s)||_* <= 1/(2 lambda).
inline bool zero_step_predicate(const LinearOp& A, const SeqVector& y, const SeqVector& s, double lambda,
                                const Regularizer& R = Regularizer::weighted_l1()) {
  if (!(lambda > 0.0)) throw std::invalid_argument("zero_step_predicate: lambda must be > 0");
  const SeqVector g = A.adjoint_apply(A.residual(y, s));
  return R.dual_norm(g) <= 1.0 / (2.0 * lambda);
}

// ---------------------------------------------------------------------------
// Smooth part f(u) = lambda ||y - A(s+u)||^2

inline double smooth_value(const LinearOp& A, const SeqVector& y, const SeqVector& s, double lambda,
                           const SeqVector& u) {
  const SeqVector v = A.residual(A.residual(y, s), u);
  const double nv = norm_l2(v);
  return lambda * nv * nv;
}

/// 2 lambda A^T (A(s+u) - y)
inline SeqVector smooth_gradient(const LinearOp& A, const SeqVector& y, const SeqVector& s, double lambda,
                                 const SeqVector& u) {
  SeqVector g = A.adjoint_apply(A.residual(A.residual(y, s), u));
  g *= -2.0 * lambda;
  return g;
}

// ---------------------------------------------------------------------------
// Solver

enum class StepMetric {
  /// Per-coordinate Lipschitz bounds from the Gershgorin row sums of A^T A.
  Diagonal,
  /// Single step 1/L with L = 2 lambda operator_norm_upper(A)^2.
  Scalar,
};

struct SolverOptions {
  double tol = kDefaultCertificateTol;
  long max_iter = 200000;
  StepMetric metric = StepMetric::Diagonal;
  int power_iters = 200;
  std::optional<SeqVector> warm_start;
  /// Start hilbert-norm steps from the exact secular-equation solution.
  bool hilbert_exact_start = true;
  bool record_trace = false;
};

struct TraceRow {
  long iteration = 0;
  double objective = 0.0;
  double dual_norm_value = 0.0;
  double pairing_gap = 0.0;
};

struct SolveResult {
  SeqVector u;
  double objective = 0.0;
  long iterations = 0;
  bool converged = false;
  Certificate certificate;
  std::vector<TraceRow> trace;
};

/// Gershgorin row sums of |A^T A|; each bounds the curvature along its
/// coordinate and diag(G) - A^T A is positive semidefinite.
inline std::vector<double> gershgorin_metric(const LinearOp& A) {
  const Eigen::MatrixXd M = A.to_eigen();
  const Eigen::MatrixXd N = M.transpose() * M;
  std::vector<double> g(A.dim_in());
  for (Eigen::Index i = 0; i < N.rows(); ++i) g[i] = N.row(i).cwiseAbs().sum();
  return g;
}

/// Exact minimizer of lambda ||r - A u||^2 + ||u||_2. Away from zero it is
/// u = (A^T A + tau I)^{-1} A^T r with 2 lambda tau ||u(tau)|| = 1; the
/// left side increases in tau, so tau is bracketed and bisected in log
/// scale. Each u(tau) is a least-squares solve of [A; sqrt(tau) I] u ~ [r; 0]
/// by Householder QR, which avoids squaring the condition number.
inline SeqVector hilbert_exact_step(const LinearOp& A, const SeqVector& r, double lambda) {
  const Eigen::MatrixXd M = A.to_eigen();
  const auto rows = M.rows();
  const auto cols = M.cols();
  const SeqVector g = A.adjoint_apply(r);
  if (2.0 * lambda * norm_l2(g) <= 1.0) return SeqVector(A.dim_in());

  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(rows + cols);
  for (Eigen::Index i = 0; i < rows; ++i) rhs[i] = r.data()[i];
  auto solve = [&](double log_tau) {
    Eigen::MatrixXd K(rows + cols, cols);
    K.topRows(rows) = M;
    K.bottomRows(cols) = std::exp(0.5 * log_tau) * Eigen::MatrixXd::Identity(cols, cols);
    return Eigen::VectorXd(K.householderQr().solve(rhs));
  };
  auto phi = [&](double log_tau) { return std::log(2.0 * lambda) + log_tau + std::log(solve(log_tau).norm()); };

  double hi = 0.0;
  while (phi(hi) < 0.0) hi += 8.0;
  double lo = hi - 8.0;
  while (phi(lo) > 0.0 && lo > -1400.0) lo -= 8.0;
  for (int it = 0; it < 200 && hi - lo > 1e-15 * std::max(1.0, std::abs(hi)); ++it) {
    const double mid = 0.5 * (lo + hi);
    (phi(mid) < 0.0 ? lo : hi) = mid;
  }
  const Eigen::VectorXd u = solve(0.5 * (lo + hi));
  return SeqVector(std::vector<double>(u.data(), u.data() + u.size()));
}

/// One multiscale step: argmin_u lambda ||y - A(s+u)||^2 + R(u).
///
/// Accelerated proximal gradient (FISTA) with two restart rules: a candidate
/// that would raise the objective is rejected and momentum is dropped, and
/// momentum is also dropped when it points against the last prox step. The
/// objective of the accepted iterates is therefore non-increasing. The
/// objective change is evaluated as lambda <v_p - v_x, v_p + v_x> + R(p) -
/// R(x) with v_p - v_x = -A(p - x), which stays accurate when both
/// objectives agree to all printed digits.
inline SolveResult solve_step(const LinearOp& A, const SeqVector& y, const SeqVector& s, double lambda,
                              const Regularizer& R, const SolverOptions& opts = {}) {
  if (!(lambda > 0.0) || !std::isfinite(lambda)) throw std::invalid_argument("solve_step: lambda must be > 0");
  if (y.dim() != A.dim_out()) throw std::invalid_argument("solve_step: data dimension mismatch");
  if (s.dim() != A.dim_in()) throw std::invalid_argument("solve_step: shift dimension mismatch");
  if (R.kind() == RegularizerKind::TV1D && A.dim_in() != A.dim_out())
    throw std::invalid_argument("solve_step: tv-1d needs a square operator");

  const std::size_t n = A.dim_in();
  const SeqVector r0 = A.residual(y, s);

  // Step metric.
  std::vector<double> metric;
  bool diagonal = opts.metric == StepMetric::Diagonal && R.supports_diagonal_metric();
  if (opts.metric == StepMetric::Diagonal) {
    metric = gershgorin_metric(A);
    if (!diagonal) {
      const double mx = *std::max_element(metric.begin(), metric.end());
      std::fill(metric.begin(), metric.end(), mx);
    }
  } else {
    const double L = operator_norm_upper(A, opts.power_iters);
    metric.assign(n, L * L);
  }
  for (double& m : metric) m *= 2.0 * lambda;
  const double scalar_step = metric.empty() ? 0.0 : metric.front();

  auto prox_step = [&](const SeqVector& x) {
    if (diagonal) return R.prox_metric(x, metric);
    return R.prox(x, scalar_step > 0.0 ? 1.0 / scalar_step : 0.0);
  };

  SolveResult res;
  SeqVector x(n);
  if (opts.warm_start) {
    if (opts.warm_start->dim() != n) throw std::invalid_argument("solve_step: warm start dimension mismatch");
    x = *opts.warm_start;
  } else if (R.kind() == RegularizerKind::HilbertNorm && opts.hilbert_exact_start && n <= 512) {
    x = hilbert_exact_step(A, r0, lambda);
  }

  SeqVector vx = A.residual(r0, x);
  double Rx = R.evaluate(x);
  auto objective_of = [&](const SeqVector& v, double reg) {
    const double nv = norm_l2(v);
    return lambda * nv * nv + reg;
  };

  auto record = [&](long it, const Certificate& c) {
    if (opts.record_trace) res.trace.push_back({it, objective_of(vx, Rx), c.dual_norm_value, c.gap});
  };

  Certificate cert = detail::certificate_from_residual(A, vx, x, lambda, R, opts.tol);
  record(0, cert);
  const bool degenerate = std::all_of(metric.begin(), metric.end(), [](double m) { return m <= 0.0; });

  long it = 0;
  if (!cert.feasible && !degenerate) {
    SeqVector z = x;
    double t = 1.0;
    while (it < opts.max_iter) {
      ++it;
      // Forward step at z.
      SeqVector grad = A.adjoint_apply(A.residual(r0, z));
      SeqVector fwd = z;
      for (std::size_t i = 0; i < n; ++i)
        if (metric[i] > 0.0) fwd.data()[i] += 2.0 * lambda * grad.data()[i] / metric[i];
      SeqVector p = prox_step(fwd);
      if (p == x) {
        // Fixed point of the plain step: nothing left to gain at this precision.
        if (z == x) break;
        z = x;
        t = 1.0;
        continue;
      }

      const SeqVector vp = A.residual(r0, p);
      const double Rp = R.evaluate(p);
      const SeqVector dv = A.apply(p - x);  // v_x - v_p
      const double dF = -lambda * inner(dv, vp + vx) + R.difference(p, x);

      // Momentum steps must decrease F. A plain step from x descends in exact
      // arithmetic, so a positive dF there is rounding in the prox and the
      // step is kept.
      if (!(dF <= 0.0) && !(z == x)) {
        t = 1.0;
        z = x;
        continue;
      }

      // Gradient-based restart test on the new step.
      const double align = inner(z - p, p - x);
      SeqVector x_old = std::move(x);
      x = std::move(p);
      vx = vp;
      Rx = Rp;
      if (align > 0.0) {
        t = 1.0;
        z = x;
      } else {
        const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
        z = x + ((t - 1.0) / t_next) * (x - x_old);
        t = t_next;
      }

      cert = detail::certificate_from_residual(A, vx, x, lambda, R, opts.tol);
      record(it, cert);
      if (cert.feasible) break;
    }
  }

  res.u = std::move(x);
  res.iterations = it;
  res.certificate = cert;
  res.converged = cert.feasible;
  res.objective = objective_of(vx, Rx);
  return res;
}

}  // namespace mscale
