#pragma once

// Closed-form objects of the divergent multiscale example: the scale
// increments u_n = b/(n+2) e_{n+2}, their partial sums sigma_n, the residuals
// Lambda(e_1) - Lambda(sigma_n), and the pairings
//   A_{j,n1} = (1/j) <Lambda(e_1) - Lambda(sigma_n), Lambda(e_j)>,  n1 = n + 2,
// whose supremum over j is the dual norm tested by the optimality condition.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "mscale/operators.hpp"
#include "mscale/seqspace.hpp"

namespace mscale {

inline double lambda_n(int n, const CexParams& p) {
  if (n < 0) throw std::invalid_argument("lambda_n: n must be >= 0");
  return p.alpha0 * std::pow(p.M, n);
}

namespace detail {
// c0 / M^k
inline double geometric(const CexParams& p, double k) { return p.c0 * std::pow(p.M, -k); }
}  // namespace detail

inline SeqVector analytic_u(int n, const CexParams& p, std::size_t D) {
  if (n < 0) throw std::invalid_argument("analytic_u: n must be >= 0");
  const std::size_t k = static_cast<std::size_t>(n) + 2;
  if (k > D) throw std::out_of_range("analytic_u: n + 2 exceeds the truncation dimension");
  SeqVector u(D);
  u(k) = p.b / static_cast<double>(k);
  return u;
}

/// sigma_n = sum_{j<=n} u_j. n = -1 gives the empty sum.
inline SeqVector analytic_sigma(int n, const CexParams& p, std::size_t D) {
  if (n < -1) throw std::invalid_argument("analytic_sigma: n must be >= -1");
  if (static_cast<std::size_t>(n + 2) > D)
    throw std::out_of_range("analytic_sigma: n + 2 exceeds the truncation dimension");
  SeqVector s(D);
  for (std::size_t j = 2; j <= static_cast<std::size_t>(n + 2); ++j) s(j) = p.b / static_cast<double>(j);
  return s;
}

/// Lambda(e_1) - Lambda(sigma_n) = (eta + mu)_{n1+1} e_{n1+1} + sum_{m >= n1+2} eta_m e_m,
/// truncated to D rows.
inline SeqVector residual_closed_form(int n, const CexParams& p, std::size_t D) {
  if (n < 0) throw std::invalid_argument("residual_closed_form: n must be >= 0");
  const std::size_t n1 = static_cast<std::size_t>(n) + 2;
  if (n1 + 1 > D) throw std::out_of_range("residual_closed_form: needs n + 3 <= D");
  SeqVector r(D);
  r(n1 + 1) = eta(n1 + 1, p) + mu(n1 + 1, p);
  for (std::size_t m = n1 + 2; m <= D; ++m) r(m) = eta(m, p);
  return r;
}

/// Squared H-norm of the untruncated residual:
/// c0 [ (1-delta)^2 / M^{n1+1} + 1 / ((M-1) M^{n1+1}) ].
inline double residual_sq_closed_form(int n, const CexParams& p) {
  const double k = static_cast<double>(n + 3);
  const double one_minus = 1.0 - p.delta;
  return detail::geometric(p, k) * (one_minus * one_minus + 1.0 / (p.M - 1.0));
}

/// Exact closed form of A_{j,n1}.
inline double A_value(std::size_t j, int n, const CexParams& p) {
  if (j < 1) throw std::invalid_argument("A_value: j must be >= 1");
  if (n < 0) throw std::invalid_argument("A_value: n must be >= 0");
  const std::size_t n1 = static_cast<std::size_t>(n) + 2;
  const double d = p.delta;
  const double top = detail::geometric(p, static_cast<double>(n1 + 1));
  if (j == 1) return (1.0 - d) * top + top / (p.M - 1.0);
  if (j < n1) return 0.0;
  if (j == n1) return top * d * (1.0 - d) / p.b;
  if (j == n1 + 1) return top / p.b * ((1.0 - d) * (1.0 - d) + d / p.M);
  return detail::geometric(p, static_cast<double>(j)) / p.b * ((1.0 - d) + d / p.M);
}

/// Upper bound for A_{1,n1} obtained by bounding both terms by the geometric
/// series: c0 / M^{n1+1} * M / (M-1).
inline double A1_upper_bound(int n, const CexParams& p) {
  return detail::geometric(p, static_cast<double>(n + 3)) * p.M / (p.M - 1.0);
}

/// 2 delta^2 + (1/M - 3) delta + 1; non-positive exactly when A_{n1+1,n1} <= A_{n1,n1}.
inline double claim_quadratic(const CexParams& p) {
  return 2.0 * p.delta * p.delta + (1.0 / p.M - 3.0) * p.delta + 1.0;
}

struct ClaimReport {
  double M = 0.0;
  double alpha0 = 0.0;
  int n = 0;
  int n1 = 0;
  double lambda_n = 0.0;
  std::vector<double> A_values;  // A_values[j-1] = A_{j,n1}, j = 1..J_max
  std::size_t max_index = 0;
  double A_n1n1 = 0.0;
  double target = 0.0;
  double tail_bound = 0.0;
  double quadratic = 0.0;
  /// 1 - max_{j != n1} |A_{j,n1}| / A_{n1,n1}; zero at the threshold M.
  double margin = 0.0;
  bool strict = false;
  bool pass = false;
  std::string reason;
};

inline constexpr double kClaimIdentityTol = 1e-12;
inline constexpr double kArgmaxTieTol = 1e-12;

inline ClaimReport verify_claim(int n, const CexParams& p, std::size_t J_max = 200) {
  if (n < 0) throw std::invalid_argument("verify_claim: n must be >= 0");
  if (J_max < static_cast<std::size_t>(n) + 4)
    throw std::invalid_argument("verify_claim: J_max must be >= n + 4");
  ClaimReport r;
  r.M = p.M;
  r.alpha0 = p.alpha0;
  r.n = n;
  r.n1 = n + 2;
  r.lambda_n = lambda_n(n, p);
  r.target = 1.0 / (2.0 * r.lambda_n);
  r.A_values.resize(J_max);
  const std::size_t n1 = static_cast<std::size_t>(r.n1);

  double best = -1.0;
  double rival = 0.0;  // max over j != n1
  for (std::size_t j = 1; j <= J_max; ++j) {
    const double a = A_value(j, n, p);
    r.A_values[j - 1] = a;
    const double mag = std::abs(a);
    // Ties within kArgmaxTieTol keep the earlier index.
    if (mag > best * (1.0 + kArgmaxTieTol)) {
      best = mag;
      r.max_index = j;
    }
    if (j != n1) rival = std::max(rival, mag);
  }
  r.A_n1n1 = r.A_values[n1 - 1];
  // Beyond J_max every index is of the form n1 + s with s >= 2, where |A|
  // decreases geometrically; the supremum of the tail sits at J_max + 1.
  r.tail_bound = std::abs(A_value(J_max + 1, n, p));
  rival = std::max(rival, r.tail_bound);
  r.quadratic = claim_quadratic(p);
  r.margin = r.A_n1n1 > 0.0 ? 1.0 - rival / r.A_n1n1 : -1.0;
  r.strict = r.margin > kArgmaxTieTol;

  const double identity_err = std::abs(r.A_n1n1 * 2.0 * r.lambda_n - 1.0);
  const bool argmax_ok = r.max_index == n1;
  const bool tail_ok = r.tail_bound <= r.target;
  r.pass = argmax_ok && identity_err <= kClaimIdentityTol && tail_ok;
  if (!r.pass) {
    std::ostringstream why;
    if (!argmax_ok)
      why << "max |A_j| attained at j=" << r.max_index << " instead of n1=" << n1 << "; ";
    if (identity_err > kClaimIdentityTol)
      why << "A_{n1,n1} * 2 lambda_n deviates from 1 by " << identity_err << "; ";
    if (!tail_ok) why << "tail bound " << r.tail_bound << " exceeds 1/(2 lambda_n); ";
    if (r.quadratic > 0.0)
      why << "quadratic condition 2d^2+(1/M-3)d+1 = " << r.quadratic << " > 0";
    r.reason = why.str();
  }
  return r;
}

struct SigmaInfinity {
  SeqVector sigma;
  double defect = 0.0;
};

/// sigma_inf = sum_{j>=2} (b/j) e_j truncated to D, with
/// ||Lambda(sigma_inf) - Lambda(e_1)||_2 over rows 1..D-1.
inline SigmaInfinity sigma_infinity(const CexParams& p, std::size_t D) {
  if (D < 3) throw std::invalid_argument("sigma_infinity needs D >= 3");
  const LinearOp A = build_counterexample_operator(p, D);
  SeqVector s(D);
  for (std::size_t j = 2; j <= D; ++j) s(j) = p.b / static_cast<double>(j);
  const SeqVector diff = A.residual(A.column(1), s).resized(D - 1);
  return {std::move(s), norm_l2(diff)};
}

/// b * sum_{j=2}^{n+2} 1/j, the l1 norm of sigma_n.
inline double analytic_sigma_norm_X(int n, const CexParams& p) {
  detail::CompensatedSum h;
  for (int j = 2; j <= n + 2; ++j) h.add(1.0 / j);
  return p.b * h.value();
}

}  // namespace mscale
