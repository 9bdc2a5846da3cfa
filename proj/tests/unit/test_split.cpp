#include <gtest/gtest.h>

#include "oneshot/split.hpp"
#include "support/fixtures.hpp"

using namespace oneshot;

TEST(Split, MaxOfSplitReproducesLaw) {
  fixtures::Rng g(21);
  for (int t = 0; t < 20; ++t) {
    const auto p = fixtures::random_probs(g, 2 + t % 6);
    for (double th : {0.0, 0.2, 0.5, 0.9, 1.0}) {
      const SplitPair s = split(Distribution::from_probs(p), th);
      const auto law = max_law(s);
      for (std::size_t i = 0; i < p.size(); ++i) EXPECT_NEAR(law[i], p[i], 1e-12);
      s.pU.validate();
      s.pV.validate();
    }
  }
}

TEST(Split, EndpointsAreDegenerate) {
  const Distribution p = Distribution::from_probs({0.2, 0.3, 0.5});
  EXPECT_TRUE(is_point_mass(split(p, 0.0).pV));
  EXPECT_TRUE(is_point_mass(split(p, 1.0).pU));
  EXPECT_FALSE(is_point_mass(split(p, 0.5).pU));
  EXPECT_THROW(split(p, 1.5), InvalidArgument);
}

TEST(Split, EntropyInterpolates) {
  // H(U) + H(V) >= H(X) and the endpoints carry all of H(X) in one part
  const Distribution p = Distribution::from_probs({0.1, 0.4, 0.3, 0.2});
  EXPECT_NEAR(split(p, 0.0).pU.entropy(), p.entropy(), 1e-12);
  EXPECT_NEAR(split(p, 1.0).pV.entropy(), p.entropy(), 1e-12);
  for (double th : {0.25, 0.5, 0.75}) {
    const auto s = split(p, th);
    EXPECT_GE(s.pU.entropy() + s.pV.entropy(), p.entropy() - 1e-12);
  }
}

TEST(SplitPOVM, ElementsSumToIdentityAndMarginalize) {
  fixtures::Rng g(22);
  const JointPOVM povm = fixtures::random_joint_povm(g, 2, 3, 2);
  const Matrix rhoA = fixtures::random_state(g, 2);
  for (SplitAxis ax : {SplitAxis::X, SplitAxis::Y}) {
    const SplitPOVM sp = split_povm(povm, rhoA, 0.4, ax);
    Matrix sum = Matrix::Zero(2, 2);
    for (const auto& e : sp.elements) sum += e;
    EXPECT_LT((sum - linalg::identity(2)).norm(), 1e-10);
    // summing over (u, v) with max = x recovers Lambda_{x, w}
    const std::size_t n = sp.alphabetSplit.size(), m = sp.alphabetOther.size();
    for (std::size_t x = 0; x < n; ++x)
      for (std::size_t w = 0; w < m; ++w) {
        Matrix acc = Matrix::Zero(2, 2);
        for (std::size_t u = 0; u < n; ++u)
          for (std::size_t v = 0; v < n; ++v)
            if (std::max(u, v) == x) acc += sp.element(u, v, w);
        const Matrix& want = ax == SplitAxis::X ? povm.element(x, w) : povm.element(w, x);
        EXPECT_LT((acc - want).norm(), 1e-10);
      }
  }
}

TEST(SplitControlState, TraceAndMarginal) {
  fixtures::Rng g(23);
  const JointPOVM povm = fixtures::random_joint_povm(g, 2, 3, 2);
  const Matrix rho = fixtures::random_state(g, 4);
  const linalg::SystemLayout lay{{"A", 2}, {"B", 2}};
  const CQState c = split_control_state(povm, rho, lay, 0.3, {"B"});
  EXPECT_NEAR(c.total_trace(), 1.0, 1e-10);
  const auto pU = c.distribution({"U"});
  const auto want = split(split_axis_view(povm, linalg::partial_trace(rho, lay, {"A"}), SplitAxis::X).first, 0.3).pU;
  for (std::size_t i = 0; i < pU.size(); ++i) EXPECT_NEAR(pU.probs[i], want.probs[i], 1e-10);
}
