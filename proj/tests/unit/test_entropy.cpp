#include <gtest/gtest.h>

#include "oneshot/entropy.hpp"
#include "support/fixtures.hpp"
#include "support/oracles.hpp"

using namespace oneshot;

TEST(HmaxSmooth, MatchesLinearProgram) {
  fixtures::Rng g(11);
  for (int t = 0; t < 40; ++t) {
    const auto p = fixtures::random_probs(g, 2 + t % 11);
    for (double eps : {0.0, 0.05, 0.1}) {
      const auto r = h_max_smooth(Distribution::from_probs(p), eps);
      EXPECT_NEAR(r.value, oracle::hmax_lp(p, eps), 1e-9);
    }
  }
}

TEST(HmaxSmooth, UniformAndPointMass) {
  EXPECT_NEAR(h_max_smooth(Distribution::from_probs({0.5, 0.5}), 0.0).value, 1.0, 1e-12);
  EXPECT_NEAR(h_max_smooth(Distribution::from_probs({1.0, 0.0}), 0.0).value, 0.0, 1e-12);
  EXPECT_NEAR(h_max_smooth(Distribution::from_probs({0.25, 0.25, 0.25, 0.25}), 0.0).value, 2.0, 1e-12);
}

TEST(HmaxSmooth, SubdistributionKeepsMass) {
  const auto r = h_max_smooth(Distribution::from_probs({0.5, 0.3, 0.15, 0.05}), 0.1);
  double kept = 0.0;
  for (double v : r.subdistribution.probs) kept += v;
  EXPECT_GE(kept, 0.9 - 1e-12);
}

TEST(Dhyp, MatchesLinearProgramOnDiagonals) {
  fixtures::Rng g(12);
  for (int t = 0; t < 30; ++t) {
    const std::size_t d = 2 + t % 9;
    const auto r = fixtures::random_probs(g, d), s = fixtures::random_probs(g, d, 0.01);
    for (double eps : {0.01, 0.1, 0.3}) {
      const double want = oracle::dhyp_lp(r, s, eps);
      EXPECT_NEAR(d_hyp(fixtures::diag(r), fixtures::diag(s), eps).value, want, 1e-8);
    }
  }
}

TEST(Dhyp, TestOperatorIsValid) {
  fixtures::Rng g(13);
  const Matrix r = fixtures::random_state(g, 3), s = fixtures::random_state(g, 3);
  const HypothesisResult h = d_hyp(r, s, 0.1);
  const Matrix Q = h.test.dense();
  EXPECT_GE(oracle::min_eig(Q), -1e-9);
  EXPECT_GE(oracle::min_eig(linalg::identity(3) - Q), -1e-9);
  EXPECT_GE((Q * r).trace().real(), 0.9 - 1e-9);
  EXPECT_NEAR(-std::log2((Q * s).trace().real()), h.value, 1e-9);
}

TEST(Dmax, ClosedFormOnDiagonals) {
  EXPECT_NEAR(d_max(linalg::diag({0.5, 0.5}), linalg::diag({0.25, 0.75})), 1.0, 1e-10);
  EXPECT_TRUE(std::isinf(d_max(linalg::diag({0.5, 0.5}), linalg::diag({1.0, 0.0}))));
}

TEST(DmaxSmooth, MatchesClassicalOracle) {
  fixtures::Rng g(14);
  for (int t = 0; t < 4; ++t) {
    const std::size_t d = 2 + t % 3;
    const auto p = fixtures::random_probs(g, d), q = fixtures::random_probs(g, d, 0.05);
    const double eps = t % 2 ? 0.05 : 0.1;
    EXPECT_NEAR(d_max_smooth(fixtures::diag(p), fixtures::diag(q), eps), oracle::dmax_smooth_classical(p, q, eps), 1e-3);
  }
}

TEST(ImaxSmooth, ProductStateIsZero) {
  fixtures::Rng g(15);
  const Matrix rho = linalg::tensor(fixtures::random_state(g, 2), fixtures::random_state(g, 2));
  const linalg::SystemLayout lay{{"A", 2}, {"B", 2}};
  EXPECT_NEAR(i_max_smooth(rho, lay, {"A"}, 0.05), 0.0, 1e-3);
}

TEST(ImaxTilde, BoundedByShiftedImax) {
  // I~^eps <= I_max^{eps - gamma} + log2(3 / gamma^2), and never above the unsmoothed value
  fixtures::Rng g(16);
  for (int t = 0; t < 3; ++t) {
    const CQState cq = fixtures::random_cq(g, 2, 2);
    const double tilde = i_max_tilde_cq(cq, {"X"}, 0.1).value;
    EXPECT_LE(tilde, i_max_smooth_cq(cq, {"X"}, 0.05).value + std::log2(3.0 / 0.0025));
    const auto grid = detail::cq_grid(cq, {"X"});
    EXPECT_LE(tilde, d_max_blocks(grid.rho, grid.sigma) + 1e-9);
  }
}

TEST(VonNeumann, ShannonOnDiagonals) {
  const std::vector<std::vector<double>> p{{0.3, 0.1}, {0.2, 0.4}};
  const Matrix r = fixtures::diag({0.3, 0.1, 0.2, 0.4});
  const linalg::SystemLayout lay{{"A", 2}, {"B", 2}};
  EXPECT_NEAR(mutual_information(r, lay, {"A"}, {"B"}), oracle::mutual_info(p), 1e-10);
  EXPECT_NEAR(entropy(r), oracle::shannon({0.3, 0.1, 0.2, 0.4}), 1e-10);
}

TEST(Entropy, RejectsBadEps) {
  EXPECT_THROW(h_max_smooth(Distribution::from_probs({0.5, 0.5}), 1.0), InvalidArgument);
  EXPECT_THROW(h_max_smooth(Distribution::from_probs({0.5, 0.5}), -0.1), InvalidArgument);
}
