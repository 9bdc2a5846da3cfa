#include <gtest/gtest.h>

#include "oneshot/quantum.hpp"
#include "support/fixtures.hpp"
#include "support/oracles.hpp"

using namespace oneshot;

TEST(Distribution, EntropyAndValidation) {
  const Distribution d({"a", "b", "c", "d"}, {0.25, 0.25, 0.25, 0.25});
  EXPECT_NEAR(d.entropy(), 2.0, 1e-12);
  EXPECT_THROW(Distribution({"a"}, {0.5, 0.5}), InvalidArgument);
  EXPECT_THROW(Distribution({"a", "b"}, {0.7, 0.7}).validate(), Error);
  EXPECT_THROW(Distribution({"a", "b"}, {1.2, -0.2}).validate(), Error);
}

TEST(JointPOVM, ValidateCatchesIncompleteness) {
  fixtures::Rng g(7);
  auto el = fixtures::random_povm(g, 2, 4);
  EXPECT_NO_THROW(JointPOVM(fixtures::symbols(2), fixtures::symbols(2), el).validate());
  el[0] *= 0.5;
  EXPECT_THROW(JointPOVM(fixtures::symbols(2), fixtures::symbols(2), el).validate(), Error);
}

TEST(JointPOVM, InducedDistributionIsBornRule) {
  fixtures::Rng g(8);
  const JointPOVM p = fixtures::random_joint_povm(g, 3, 2, 3);
  const Matrix rho = fixtures::random_state(g, 3);
  const Distribution d = induced_distribution(p, rho);
  double tot = 0.0;
  for (std::size_t x = 0; x < 2; ++x)
    for (std::size_t y = 0; y < 3; ++y) {
      EXPECT_NEAR(d.probs[x * 3 + y], (p.element(x, y) * rho).trace().real(), 1e-12);
      tot += d.probs[x * 3 + y];
    }
  EXPECT_NEAR(tot, 1.0, 1e-12);
}

TEST(Instrument, KrausElementsGivePOVM) {
  Instrument inst;
  inst.alphabetX = {"0", "1"};
  inst.alphabetY = {"0"};
  inst.kraus.emplace(std::pair<std::size_t, std::size_t>{0, 0}, linalg::diag({0.8, 0.6}));
  inst.kraus.emplace(std::pair<std::size_t, std::size_t>{1, 0}, linalg::diag({0.6, 0.8}));
  const JointPOVM p = instrument_to_povm(inst);
  EXPECT_NEAR(p.element(0, 0)(0, 0).real(), 0.64, 1e-12);
  EXPECT_NEAR(p.element(1, 0)(1, 1).real(), 0.64, 1e-12);
  // trace-decreasing: the deficit becomes an abort outcome
  inst.kraus.at({1, 0}) = linalg::diag({0.1, 0.1});
  const JointPOVM q = instrument_to_povm(inst);
  EXPECT_EQ(q.alphabetX.back(), kBottom);
  EXPECT_NO_THROW(q.validate());
  inst.kraus.at({1, 0}) = linalg::diag({1.0, 1.0});
  EXPECT_THROW(instrument_to_povm(inst), Error);
}

TEST(CQState, PostMeasurementBlocksAndMarginals) {
  fixtures::Rng g(9);
  const JointPOVM p = fixtures::random_joint_povm(g, 2, 2, 2);
  const Matrix rho = fixtures::random_state(g, 4);
  const linalg::SystemLayout lay{{"A", 2}, {"B", 2}};
  const CQState c = post_measurement_cq(p, rho, lay, {"B"});
  EXPECT_NEAR(c.total_trace(), 1.0, 1e-12);
  // block (x, y) = Tr_A[(E_xy (x) I) rho]
  for (const auto& e : c.entries()) {
    const Matrix want = linalg::partial_trace(linalg::tensor(p.element(e.index[0], e.index[1]), linalg::identity(2)) * rho,
                                              {2, 2}, {false, true});
    EXPECT_LT((e.op - want).norm(), 1e-12);
  }
  const Distribution dx = c.distribution({"X"});
  const Distribution full = induced_distribution(p, rho, lay);
  EXPECT_NEAR(dx.probs[0], full.probs[0] + full.probs[1], 1e-12);
  const CQState mx = c.marginal({"X"});
  EXPECT_EQ(mx.axes().size(), 1u);
  EXPECT_NEAR(mx.total_trace(), 1.0, 1e-12);
}
