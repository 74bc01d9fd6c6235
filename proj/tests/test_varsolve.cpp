#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "mscale/counterexample.hpp"
#include "mscale/varsolve.hpp"
#include "oracles.hpp"

using namespace mscale;

namespace {

const CexParams kP = derive_constants(6.0, 1.0).params;

LinearOp random_op(std::mt19937_64& rng, std::size_t m, std::size_t n) {
  LinearOp A(m, n);
  const auto v = oracle::random_vector(rng, m * n);
  for (std::size_t i = 1; i <= m; ++i)
    for (std::size_t j = 1; j <= n; ++j) A.set(i, j, v[(i - 1) * n + (j - 1)]);
  return A;
}

double objective(const LinearOp& A, const SeqVector& y, const SeqVector& s, double lambda, const Regularizer& R,
                 const SeqVector& u) {
  return smooth_value(A, y, s, lambda, u) + R.evaluate(u);
}

}  // namespace

TEST(Prox, WeightedL1Examples) {
  const std::vector<double> w{1.0, 2.0};
  EXPECT_EQ(prox_weighted_l1(SeqVector{3.0, 3.0}, 1.0, w), (SeqVector{2.0, 1.0}));
  EXPECT_EQ(prox_weighted_l1(SeqVector{3.0, -3.0}, 0.0, w), (SeqVector{3.0, -3.0}));
  EXPECT_EQ(prox_weighted_l1(SeqVector{0.5, -3.0}, 1.0, w), (SeqVector{0.0, -1.0}));
  EXPECT_THROW(prox_weighted_l1(SeqVector{1.0}, -1.0, w), std::invalid_argument);
}

TEST(Prox, HilbertExamples) {
  EXPECT_EQ(prox_hilbert_norm(SeqVector{3.0, 4.0}, 5.0), SeqVector(2));
  EXPECT_EQ(prox_hilbert_norm(SeqVector{3.0, 4.0}, 0.0), (SeqVector{3.0, 4.0}));
  const SeqVector u = prox_hilbert_norm(SeqVector{3.0, 4.0}, 2.5);
  EXPECT_DOUBLE_EQ(u(1), 1.5);
  EXPECT_DOUBLE_EQ(u(2), 2.0);
}

TEST(Prox, WeightedL1MatchesCoordinateBisection) {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> tdist(0.0, 2.0);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t n = 1 + trial % 8;
    const auto z = oracle::random_vector(rng, n, 2.0);
    const double t = tdist(rng);
    const Regularizer R = Regularizer::weighted_l1();
    const SeqVector u = R.prox(SeqVector(z), t);
    const auto ref = oracle::weighted_l1_prox(z, t, R.weights(n));
    for (std::size_t i = 0; i < n; ++i) EXPECT_NEAR(u.data()[i], ref[i], 1e-12);
  }
}

TEST(Prox, OptimalAgainstRandomCompetitors) {
  std::mt19937_64 rng(32);
  for (const Regularizer& R : {Regularizer::weighted_l1(), Regularizer::hilbert_norm(), Regularizer::tv_1d()}) {
    const SeqVector z(oracle::random_vector(rng, 7, 2.0));
    const double t = 0.6;
    const SeqVector u = R.prox(z, t);
    auto obj = [&](const SeqVector& v) {
      const double d = norm_l2(v - z);
      return 0.5 * d * d + t * R.evaluate(v);
    };
    const double best = obj(u);
    for (int k = 0; k < 100; ++k) {
      const SeqVector w = u + SeqVector(oracle::random_vector(rng, 7, 1e-3 * (1 + k % 10)));
      EXPECT_GE(obj(w), best - 1e-13) << R.name();
    }
  }
}

TEST(Prox, DiagonalMetricMatchesScalarWhenUniform) {
  std::mt19937_64 rng(33);
  for (const Regularizer& R : {Regularizer::weighted_l1(), Regularizer::hilbert_norm()}) {
    const SeqVector z(oracle::random_vector(rng, 6, 2.0));
    const double m = 2.5;
    const std::vector<double> metric(6, m);
    const SeqVector a = R.prox_metric(z, metric), b = R.prox(z, 1.0 / m);
    EXPECT_LE(norm_l2(a - b), 1e-13) << R.name();
  }
}

TEST(Regularizer, NamesAndParsing) {
  EXPECT_EQ(regularizer_kind_from_string("hilbert"), RegularizerKind::HilbertNorm);
  EXPECT_EQ(regularizer_kind_from_string("weighted-l1"), RegularizerKind::WeightedL1);
  EXPECT_EQ(regularizer_kind_from_string("tv-1d"), RegularizerKind::TV1D);
  EXPECT_THROW(regularizer_kind_from_string("l0"), std::invalid_argument);
  EXPECT_EQ(Regularizer::tv_1d().name(), "tv-1d");
  EXPECT_THROW(Regularizer::weighted_l1({1.0, -1.0}), std::invalid_argument);
}

TEST(Regularizer, DualNormIsSupremumOverUnitBall) {
  std::mt19937_64 rng(34);
  for (const Regularizer& R : {Regularizer::weighted_l1(), Regularizer::hilbert_norm(), Regularizer::tv_1d()}) {
    const SeqVector g(oracle::random_vector(rng, 6));
    const double dn = R.dual_norm(g);
    for (int k = 0; k < 500; ++k) {
      SeqVector u(oracle::random_vector(rng, 6));
      const double ru = R.evaluate(u);
      if (ru == 0.0) continue;
      EXPECT_LE(inner(g, u), dn * ru * (1 + 1e-12)) << R.name();
    }
  }
}

TEST(Regularizer, DifferenceMatchesEvaluate) {
  std::mt19937_64 rng(35);
  for (const Regularizer& R : {Regularizer::weighted_l1(), Regularizer::hilbert_norm(), Regularizer::tv_1d()}) {
    const SeqVector a(oracle::random_vector(rng, 5)), b(oracle::random_vector(rng, 5));
    EXPECT_NEAR(R.difference(a, b), R.evaluate(a) - R.evaluate(b), 1e-13) << R.name();
  }
}

TEST(SmoothPart, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(36);
  const LinearOp A = random_op(rng, 5, 4);
  const SeqVector y(oracle::random_vector(rng, 5)), s(oracle::random_vector(rng, 4)), u(oracle::random_vector(rng, 4));
  const double lambda = 1.7;
  const SeqVector g = smooth_gradient(A, y, s, lambda, u);
  for (std::size_t j = 1; j <= 4; ++j) {
    const double h = 1e-5;
    SeqVector up = u, um = u;
    up(j) += h;
    um(j) -= h;
    const double fd = (smooth_value(A, y, s, lambda, up) - smooth_value(A, y, s, lambda, um)) / (2 * h);
    EXPECT_NEAR(g(j), fd, 1e-7 * (1 + std::abs(fd)));
  }
}

TEST(Certificate, AnalyticPairIsFeasible) {
  const std::size_t D = 64;
  const LinearOp A = build_counterexample_operator(kP, D);
  const SeqVector y = A.column(1);
  for (int n = 0; n <= 10; ++n) {
    const double lam = lambda_n(n, kP);
    const Certificate c = kkt_certificate(A, y, analytic_sigma(n - 1, kP, D), lam, analytic_u(n, kP, D));
    EXPECT_TRUE(c.feasible) << "n=" << n << " slack " << c.dual_slack << " gap " << c.gap;
    EXPECT_NEAR(c.dual_norm_value, 1.0 / (2.0 * lam), 1e-10 / lam);
    EXPECT_EQ(c.dual_argmax, static_cast<std::size_t>(n + 2));
    EXPECT_TRUE(c.equality_attained);
  }
}

TEST(Certificate, PerturbedMinimizerIsRejected) {
  const std::size_t D = 64;
  const LinearOp A = build_counterexample_operator(kP, D);
  SeqVector u = analytic_u(0, kP, D) + 0.01 * SeqVector::basis(2, D);
  const Certificate c = kkt_certificate(A, A.column(1), SeqVector(D), 1.0, u);
  EXPECT_FALSE(c.feasible);
  EXPECT_GT(c.gap, 1e-3);
}

TEST(Certificate, ZeroStepWithSmallDualNorm) {
  const LinearOp A = LinearOp::identity(3);
  const SeqVector y{0.01, 0.0, 0.0};
  const Certificate c = kkt_certificate(A, y, SeqVector(3), 1.0, SeqVector(3));
  EXPECT_TRUE(c.feasible);
  EXPECT_EQ(c.pairing_lhs, 0.0);
  EXPECT_EQ(c.pairing_rhs, 0.0);
}

TEST(ZeroStep, Examples) {
  std::mt19937_64 rng(37);
  const LinearOp R = random_op(rng, 4, 4);
  const SeqVector s(oracle::random_vector(rng, 4));
  for (double lam : {1e-3, 1.0, 1e6}) EXPECT_TRUE(zero_step_predicate(R, R.apply(s), s, lam));
  const LinearOp A = build_counterexample_operator(kP, 64);
  EXPECT_FALSE(zero_step_predicate(A, A.column(1), SeqVector(64), 1.0));
  EXPECT_TRUE(zero_step_predicate(A, A.column(1), SeqVector(64), 1e-3));
}

TEST(SolveStep, ZeroData) {
  std::mt19937_64 rng(38);
  const LinearOp A = random_op(rng, 5, 5);
  const SeqVector s(oracle::random_vector(rng, 5));
  const SolveResult r = solve_step(A, A.apply(s), s, 3.0, Regularizer::weighted_l1());
  EXPECT_TRUE(r.converged);
  EXPECT_EQ(r.u, SeqVector(5));
  EXPECT_NEAR(r.objective, 0.0, 1e-20);
}

TEST(SolveStep, CounterexampleFirstStep) {
  const LinearOp A = build_counterexample_operator(kP, 64);
  const SolveResult r = solve_step(A, A.column(1), SeqVector(64), 1.0, Regularizer::weighted_l1());
  ASSERT_TRUE(r.converged);
  EXPECT_NEAR(r.u(2), kP.b / 2.0, 1e-6 * kP.b);
  EXPECT_LT(norm_l1(r.u - analytic_u(0, kP, 64)), 1e-8 * kP.b);
}

TEST(SolveStep, MatchesDenseReferenceOnRandomProblems) {
  // Hilbert-norm steps have an independent exact characterization:
  // u = (A^T A + tau I)^{-1} A^T r with 2 lambda tau ||u|| = 1.
  std::mt19937_64 rng(39);
  for (int trial = 0; trial < 20; ++trial) {
    const LinearOp A = random_op(rng, 6, 4);
    const SeqVector y(oracle::random_vector(rng, 6)), s(4);
    const double lam = 0.5 + trial;
    SolverOptions opts;
    opts.hilbert_exact_start = false;
    const SolveResult r = solve_step(A, y, s, lam, Regularizer::hilbert_norm(), opts);
    ASSERT_TRUE(r.converged);
    if (norm_l2(r.u) == 0.0) continue;
    const Eigen::MatrixXd M = A.to_eigen();
    Eigen::VectorXd yv = Eigen::Map<const Eigen::VectorXd>(y.data().data(), 6);
    const double tau = 1.0 / (2.0 * lam * norm_l2(r.u));
    const Eigen::VectorXd ref =
        (M.transpose() * M + tau * Eigen::MatrixXd::Identity(4, 4)).ldlt().solve(M.transpose() * yv);
    for (std::size_t j = 1; j <= 4; ++j) EXPECT_NEAR(r.u(j), ref(j - 1), 1e-6 * (1 + ref.norm()));
  }
}

TEST(SolveStep, TraceObjectiveIsNonIncreasing) {
  std::mt19937_64 rng(40);
  const LinearOp A = random_op(rng, 8, 8);
  const SeqVector y(oracle::random_vector(rng, 8));
  SolverOptions opts;
  opts.record_trace = true;
  for (const Regularizer& R : {Regularizer::weighted_l1(), Regularizer::tv_1d()}) {
    const SolveResult r = solve_step(A, y, SeqVector(8), 2.0, R, opts);
    ASSERT_TRUE(r.converged) << R.name();
    ASSERT_FALSE(r.trace.empty());
    for (std::size_t k = 1; k < r.trace.size(); ++k)
      EXPECT_LE(r.trace[k].objective, r.trace[k - 1].objective * (1 + 1e-12) + 1e-15) << R.name();
    EXPECT_NEAR(r.objective, objective(A, y, SeqVector(8), 2.0, R, r.u), 1e-12 * (1 + r.objective));
  }
}

TEST(SolveStep, ScalarMetricAlsoCertifies) {
  std::mt19937_64 rng(41);
  const LinearOp A = random_op(rng, 6, 6);
  SolverOptions opts;
  opts.metric = StepMetric::Scalar;
  const SolveResult r = solve_step(A, SeqVector(oracle::random_vector(rng, 6)), SeqVector(6), 1.5,
                                   Regularizer::weighted_l1(), opts);
  EXPECT_TRUE(r.converged);
}

TEST(SolveStep, ValidatesInputs) {
  const LinearOp A = LinearOp::identity(3);
  EXPECT_THROW(solve_step(A, SeqVector(3), SeqVector(3), 0.0, Regularizer::weighted_l1()), std::invalid_argument);
  EXPECT_THROW(solve_step(A, SeqVector(2), SeqVector(3), 1.0, Regularizer::weighted_l1()), std::invalid_argument);
  EXPECT_THROW(solve_step(LinearOp(4, 3), SeqVector(4), SeqVector(3), 1.0, Regularizer::tv_1d()),
               std::invalid_argument);
}
