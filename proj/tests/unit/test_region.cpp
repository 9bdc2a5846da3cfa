#include <gtest/gtest.h>

#include "oneshot/region.hpp"
#include "oneshot/instance.hpp"
#include "support/fixtures.hpp"
#include "support/oracles.hpp"

using namespace oneshot;

TEST(IidRegion, ClassicalFixtureMatchesShannon) {
  const Instance in = load_instance(fixtures::instance("classical"));
  // hand computation from the fixture's tables: P(a,b,r) and P(x,y|a)
  const std::vector<double> pabr{.22, .08, .05, .15, .04, .11, .2, .15};
  const std::vector<std::vector<double>> pxy{{.5, .2, .2, .1}, {.1, .15, .25, .5}};
  std::vector<double> pa(2, 0.0);
  std::vector<std::vector<double>> ab(2, std::vector<double>(4, 0.0));  // a, (b r)
  for (int i = 0; i < 8; ++i) {
    pa[i / 4] += pabr[i];
    ab[i / 4][i % 4] += pabr[i];
  }
  // joint (x, y, b, r) = sum_a P(a,b,r) P(x,y|a)
  std::vector<std::vector<double>> x_br(2, std::vector<double>(4, 0.0)), x_b(2, std::vector<double>(2, 0.0)),
      y_b(2, std::vector<double>(2, 0.0)), x_y(2, std::vector<double>(2, 0.0)), xy_br(4, std::vector<double>(4, 0.0));
  std::vector<std::vector<double>> y_br(2, std::vector<double>(4, 0.0));
  std::vector<double> px(2, 0.0), py(2, 0.0);
  for (int a = 0; a < 2; ++a)
    for (int xy = 0; xy < 4; ++xy)
      for (int br = 0; br < 4; ++br) {
        const double w = ab[a][br] * pxy[a][xy];
        const int x = xy / 2, y = xy % 2, b = br / 2;
        x_br[x][br] += w;
        y_br[y][br] += w;
        xy_br[xy][br] += w;
        x_b[x][b] += w;
        y_b[y][b] += w;
        x_y[x][y] += w;
        px[x] += w;
        py[y] += w;
      }
  const auto q = iid_quantities(in.povm, in.state, in.layout());
  EXPECT_NEAR(q.hX, oracle::shannon(px), 1e-9);
  EXPECT_NEAR(q.hY, oracle::shannon(py), 1e-9);
  EXPECT_NEAR(q.iXBR, oracle::mutual_info(x_br), 1e-9);
  EXPECT_NEAR(q.iYBR, oracle::mutual_info(y_br), 1e-9);
  EXPECT_NEAR(q.iXB, oracle::mutual_info(x_b), 1e-9);
  EXPECT_NEAR(q.iYB, oracle::mutual_info(y_b), 1e-9);
  EXPECT_NEAR(q.iXY, oracle::mutual_info(x_y), 1e-9);
  EXPECT_NEAR(q.iXYBR, oracle::mutual_info(xy_br), 1e-9);

  const RateRegion r = iid_region(in.povm, in.state, in.layout());
  ASSERT_EQ(r.pieces.size(), 1u);
  ASSERT_EQ(r.pieces[0].halfSpaces.size(), 5u);
  EXPECT_NEAR(r.pieces[0].halfSpaces[0].rhs, q.iXBR - q.iXB, 1e-12);
  EXPECT_NEAR(r.pieces[0].halfSpaces[2].rhs, q.iXYBR + q.iXY - q.iXB - q.iYB, 1e-12);
}

TEST(FourierMotzkin, EliminationKeepsImpliedRows) {
  // x0 + x4 > 1, -x4 > -3  =>  x0 > -2
  using detail::FMRow;
  std::vector<FMRow> rows{{{1, 0, 0, 0, 1, 0}, 1.0, "a", false}, {{0, 0, 0, 0, -1, 0}, -3.0, "b", false}};
  const auto out = detail::fm_eliminate(rows, 4);
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(out[0].c[0], 1.0);
  EXPECT_EQ(out[0].c[4], 0.0);
  EXPECT_NEAR(out[0].rhs, -2.0, 1e-15);
}

TEST(StreamHalfSpaces, UnsplitFormAndDegenerateStreams) {
  StreamQuantities x{"X", 'X', false, 2.0, 3.0, 0.5, 1.0}, y{"Y", 'Y', true, 0.0, 0.0, 0.0, 1.0};
  const auto hs = detail::stream_half_spaces({x, y}, true);
  ASSERT_EQ(hs.size(), 2u);
  EXPECT_EQ(hs[0].coeffs, (std::array<double, 4>{1, 0, 0, 0}));
  EXPECT_NEAR(hs[0].rhs, 2.5, 1e-15);
  EXPECT_EQ(hs[1].coeffs, (std::array<double, 4>{1, 0, 1, 0}));
  EXPECT_NEAR(hs[1].rhs, 3.5, 1e-15);
}

TEST(Region, TrivialYGivesTwoHalfSpaces) {
  const Instance in = load_instance(fixtures::instance("trivial"));
  const RegionPiece p = unsplit_region(in.povm, in.state, in.layout(), 0.05, true, log_constant(0.05));
  ASSERT_EQ(p.halfSpaces.size(), 2u);
  EXPECT_EQ(p.halfSpaces[0].coeffs, (std::array<double, 4>{1, 0, 0, 0}));
  EXPECT_EQ(p.halfSpaces[1].coeffs, (std::array<double, 4>{1, 0, 1, 0}));
  // maximally entangled A R, basis measurement, no side information: I_max^eps(X:R) <= 1 = H_max^0
  EXPECT_LE(p.streams[0].iMax, 1.0 + 1e-3);
  EXPECT_EQ(p.streams[0].iHyp, 0.0);
  EXPECT_TRUE(p.streams[1].degenerate);
}

TEST(Region, ThetaEndpointsReproduceUnsplit) {
  const Instance in = load_instance(fixtures::instance("trivial"));
  const double c = log_constant(0.05);
  const RegionPiece u = unsplit_region(in.povm, in.state, in.layout(), 0.05, true, c);
  const RegionPiece s = split_region(in.povm, in.state, in.layout(), 0.05, 0.0, SplitAxis::X, c);
  ASSERT_EQ(u.halfSpaces.size(), s.halfSpaces.size());
  for (std::size_t i = 0; i < u.halfSpaces.size(); ++i) {
    bool found = false;
    for (const auto& h : s.halfSpaces)
      found |= h.coeffs == u.halfSpaces[i].coeffs && std::abs(h.rhs - u.halfSpaces[i].rhs) < 1e-6;
    EXPECT_TRUE(found) << i;
  }
}

TEST(Region, ContainsChecksStrictInequalities) {
  RateRegion r;
  RegionPiece p;
  p.halfSpaces.push_back({{1, 0, 0, 0}, 2.0, ""});
  r.pieces.push_back(p);
  EXPECT_TRUE(r.contains({2.5, 0, 0, 0}));
  EXPECT_FALSE(r.contains({2.0, 0, 0, 0}));
}

TEST(BlockQuantities, TensorPowerIsNormalized) {
  fixtures::Rng g(71);
  const CQState cq = fixtures::random_cq(g, 2, 2);
  const CQState c3 = cq_tensor_power(cq, 3);
  EXPECT_NEAR(c3.total_trace(), 1.0, 1e-12);
  EXPECT_EQ(c3.qdim(), 8u);
  EXPECT_EQ(c3.alphabets()[0].size(), 8u);
}

TEST(Region, OtherStreamMarginalsDoNotDependOnTheta) {
  // the split keeps the (max(U,V), Y) law, so H_max and I_H of Y are the same for every theta
  const Instance in = load_instance(fixtures::instance("entangled"));
  const double c = log_constant(0.05);
  const RegionPiece ref = split_region(in.povm, in.state, in.layout(), 0.05, 0.0, SplitAxis::X, c);
  for (double th : {0.25, 0.5, 1.0}) {
    const RegionPiece p = split_region(in.povm, in.state, in.layout(), 0.05, th, SplitAxis::X, c);
    EXPECT_NEAR(p.streams[1].hMax, ref.streams[1].hMax, 1e-9) << th;
    EXPECT_NEAR(p.streams[1].iHyp, ref.streams[1].iHyp, 1e-7) << th;
  }
}
