#include <algorithm>
#include <cmath>

#include <gtest/gtest.h>

#include "mscale/counterexample.hpp"
#include "mscale/multiscale.hpp"

using namespace mscale;

namespace {

const CexParams kP = derive_constants(6.0, 1.0).params;

MultiscaleConfig counterexample_config(int N, Regularizer R = Regularizer::weighted_l1()) {
  MultiscaleConfig cfg;
  cfg.lambda0 = kP.alpha0;
  cfg.growth = kP.M;
  cfg.steps = N;
  cfg.regularizer = R;
  cfg.known_inf = 0.0;
  return cfg;
}

}  // namespace

TEST(Multiscale, CounterexampleReproduction) {
  const std::size_t D = 64;
  const LinearOp A = build_counterexample_operator(kP, D);
  const RunReport rep = run_multiscale(A, A.column(1), counterexample_config(8));
  ASSERT_TRUE(rep.all_certified()) << rep.early_stop_reason;
  ASSERT_EQ(rep.steps.size(), 9u);
  EXPECT_LE(norm_l1(rep.final_sigma - analytic_sigma(8, kP, D)), 1e-5);
  SeqVector sum(D);
  for (std::size_t k = 0; k < rep.steps.size(); ++k) {
    const StepRecord& s = rep.steps[k];
    sum += rep.increments[k];
    EXPECT_LE(norm_l1(rep.partial_sums[k] - analytic_sigma(s.n, kP, D)), 1e-5);
    EXPECT_NEAR(s.sigma_norm_X, analytic_sigma_norm_X(s.n, kP), 1e-5);
    const double closed = residual_sq_closed_form(s.n, kP);
    EXPECT_NEAR(s.residual_H * s.residual_H, closed, 1e-6 * closed);
    // independent re-check of the stored certificate
    const SeqVector prev = k ? rep.partial_sums[k - 1] : SeqVector(D);
    EXPECT_TRUE(kkt_certificate(A, A.column(1), prev, s.lambda_n, rep.increments[k]).feasible);
  }
  EXPECT_LE(norm_l1(sum - rep.final_sigma), 1e-12);
  EXPECT_TRUE(check_monotonicity(rep));
  EXPECT_NEAR(check_minimizing(rep, 0.0), std::sqrt(residual_sq_closed_form(8, kP)), 1e-6);
}

TEST(Multiscale, ResidualRatioApproachesInverseSqrtM) {
  const LinearOp A = build_counterexample_operator(kP, 64);
  const RunReport rep = run_multiscale(A, A.column(1), counterexample_config(10));
  ASSERT_TRUE(rep.all_certified());
  const double ratio = rep.steps[10].residual_H / rep.steps[9].residual_H;
  EXPECT_NEAR(ratio, 1.0 / std::sqrt(6.0), 1e-6);
}

TEST(Multiscale, ZeroData) {
  const LinearOp A = build_counterexample_operator(kP, 32);
  auto cfg = counterexample_config(4);
  const RunReport rep = run_multiscale(A, SeqVector(32), cfg);
  ASSERT_TRUE(rep.all_certified());
  for (const auto& u : rep.increments) EXPECT_EQ(u, SeqVector(32));
  for (const auto& s : rep.steps) EXPECT_EQ(s.residual_H, 0.0);
  EXPECT_EQ(check_minimizing(rep, 0.0), 0.0);
}

TEST(Multiscale, HilbertContrastStaysBounded) {
  const LinearOp A = build_counterexample_operator(kP, 64);
  const RunReport rep = run_multiscale(A, A.column(1), counterexample_config(20, Regularizer::hilbert_norm()));
  ASSERT_TRUE(rep.all_certified()) << rep.early_stop_reason;
  double sup = 0.0;
  for (const auto& s : rep.steps) sup = std::max(sup, s.sigma_norm_l2);
  EXPECT_LT(sup, 10.0 * rep.steps[3].sigma_norm_l2);
  EXPECT_TRUE(check_monotonicity(rep));
}

TEST(Multiscale, MonotonicityCheck) {
  RunReport rep;
  rep.steps.resize(1);
  EXPECT_TRUE(check_monotonicity(rep));
  rep.steps.resize(3);
  rep.steps[0].residual_H = 3.0;
  rep.steps[1].residual_H = 2.0;
  rep.steps[2].residual_H = 1.0;
  EXPECT_TRUE(check_monotonicity(rep));
  std::swap(rep.steps[0], rep.steps[2]);
  EXPECT_FALSE(check_monotonicity(rep));
}

TEST(Multiscale, Validation) {
  const auto p = derive_constants(6.0, 1.0).params;
  const LinearOp small = build_counterexample_operator(p, 10);
  EXPECT_THROW(run_multiscale(small, small.column(1), counterexample_config(4)), std::invalid_argument);
  const LinearOp A = build_counterexample_operator(p, 64);
  EXPECT_THROW(run_multiscale(A, A.column(1), counterexample_config(0)), std::invalid_argument);
  auto cfg = counterexample_config(3);
  cfg.dim = 32;
  EXPECT_THROW(run_multiscale(A, A.column(1), cfg), std::invalid_argument);
}

TEST(TvDenoise, ConstantSignalIsRecoveredAtOnce) {
  const SeqVector f(std::vector<double>(16, 1.5));
  const RunReport rep = tnv_denoise_1d(f, 1.0, 3);
  ASSERT_TRUE(rep.all_certified());
  EXPECT_LE(norm_l2(rep.partial_sums[0] - f), 1e-14);
  EXPECT_LE(rep.steps[0].residual_H, 1e-14);
}

TEST(TvDenoise, StepSignalConverges) {
  std::vector<double> v(64, 0.0);
  for (std::size_t i = 0; i < 32; ++i) v[i] = 1.0;
  const SeqVector f(v);
  const RunReport rep = tnv_denoise_1d(f, 1.0, 12);
  ASSERT_TRUE(rep.all_certified());
  for (std::size_t k = 1; k < rep.steps.size(); ++k) EXPECT_LT(rep.steps[k].residual_H, rep.steps[k - 1].residual_H);
  // a two-plateau step keeps its shape: residual 1 / (8 lambda_n)
  for (const auto& s : rep.steps) EXPECT_NEAR(s.residual_H, 1.0 / (8.0 * s.lambda_n), 1e-12);
  EXPECT_LT(rep.steps.back().residual_H, 1e-3 * norm_l2(f));
}

TEST(TvDenoise, HugeLambdaReproducesImmediately) {
  const SeqVector f{0.3, -1.0, 2.0, 0.5, 0.5, 4.0};
  // the n = 0 residual decays like 1/lambda0 (here about 1.73 / lambda0)
  const RunReport rep = tnv_denoise_1d(f, 4e6, 2);
  ASSERT_TRUE(rep.all_certified());
  EXPECT_LT(rep.steps[0].residual_H, 1e-6);
}

TEST(TvDenoise, RejectsBadInput) {
  EXPECT_THROW(tnv_denoise_1d(SeqVector(), 1.0, 3), std::invalid_argument);
  EXPECT_THROW(tnv_denoise_1d(SeqVector{1.0}, 0.0, 3), std::invalid_argument);
}
