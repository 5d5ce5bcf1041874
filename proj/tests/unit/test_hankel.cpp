#include "deepc/errors.hpp"
#include "deepc/hankel.hpp"
#include "deepc/plant.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace deepc;

TEST(Hankel, ScalarPattern) {
  Matrix s(1, 4);
  s << 1, 2, 3, 4;
  Matrix expect(2, 3);
  expect << 1, 2, 3, 2, 3, 4;
  EXPECT_EQ(build_hankel(s, 2), expect);
  EXPECT_EQ(build_hankel(s, 4), s.transpose());
}

TEST(Hankel, TooShortReportsMinimum) {
  try {
    build_hankel(Matrix::Ones(1, 3), 5);
    FAIL();
  } catch (const DimensionError& e) {
    EXPECT_NE(std::string(e.what()).find("at least 5"), std::string::npos);
  }
}

TEST(Hankel, InterleavedChannelsMatchIndexOracle) {
  Matrix s(2, 3);
  s << 1, 2, 3, 10, 20, 30;
  const Matrix h = build_hankel(s, 2);
  ASSERT_EQ(h.rows(), 4);
  ASSERT_EQ(h.cols(), 2);
  for (Eigen::Index j = 0; j < 2; ++j) {
    for (Eigen::Index i = 0; i < 2; ++i) {
      for (Eigen::Index c = 0; c < 2; ++c) EXPECT_EQ(h(i * 2 + c, j), s(c, j + i));
    }
  }
}

TEST(Hankel, ShiftStructure) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n01;
  const Matrix s = Matrix::NullaryExpr(3, 40, [&]() { return n01(rng); });
  const Matrix h = build_hankel(s, 7);
  const auto rows = h.rows();
  for (Eigen::Index j = 0; j + 1 < h.cols(); ++j) {
    EXPECT_EQ(h.col(j + 1).head(rows - 3), h.col(j).tail(rows - 3));
  }
}

TEST(Hankel, SplitBlocks) {
  Matrix u(1, 3);
  u << 1, 2, 3;
  const HankelBlocks b = split_blocks(u, u, u, 1, 1);
  Matrix up(1, 2), uf(1, 2);
  up << 1, 2;
  uf << 2, 3;
  EXPECT_EQ(b.u_p, up);
  EXPECT_EQ(b.u_f, uf);

  std::mt19937_64 rng(1);
  std::normal_distribution<double> n01;
  const Matrix uu = Matrix::NullaryExpr(1, 30, [&]() { return n01(rng); });
  const Matrix ww = Matrix::NullaryExpr(2, 30, [&]() { return n01(rng); });
  const HankelBlocks c = split_blocks(uu, ww, uu, 3, 4);
  Matrix stacked(c.u_p.rows() + c.u_f.rows(), c.width);
  stacked << c.u_p, c.u_f;
  EXPECT_EQ(stacked, build_hankel(uu, 7));
  EXPECT_EQ(c.w_p.rows(), 6);
  EXPECT_EQ(c.w_f.rows(), 8);
  EXPECT_EQ(c.h_full().topRows(c.dims.h_hat_rows()), c.h_hat());
}

TEST(Hankel, DefaultDimensions) {
  const HankelDims d{1, 3, 1, 6, 48};
  EXPECT_EQ(576 - d.depth() + 1, 523);
  EXPECT_EQ(d.h_full_rows(), 270);
  EXPECT_EQ(d.exogenous_rows(), 216);
}

TEST(Hankel, PersistentExcitation) {
  const TimeSeries w = generate_weather(576, WeatherParams{}, 0);
  Matrix w_id = w.values().topRows(2);
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> jit(-1.0, 1.0);
  for (Eigen::Index k = 0; k < w_id.cols(); ++k) {
    w_id(0, k) += jit(rng);
    w_id(1, k) += 25.0 * (jit(rng) + 1.0);
  }
  const TimeSeries u = generate_excitation(576, 1, 0.0, 600.0);
  const Matrix y = Matrix::Zero(1, 576);
  const PeReport ok = check_persistent_excitation(split_blocks(u.values(), w_id, y, 6, 48));
  EXPECT_TRUE(ok.pass);
  EXPECT_EQ(ok.rank, ok.required_rank);

  const PeReport bad =
      check_persistent_excitation(split_blocks(Matrix::Zero(1, 576), w_id, y, 6, 48));
  EXPECT_FALSE(bad.pass);
}

TEST(Pinv, TrivialCases) {
  EXPECT_LE((pinv(Matrix::Identity(4, 4)) - Matrix::Identity(4, 4)).norm(), 1e-15);
  EXPECT_DOUBLE_EQ(pinv(Matrix::Constant(1, 1, 2.0))(0, 0), 0.5);
  EXPECT_LE((row_space_projector(Matrix::Identity(3, 3)) - Matrix::Identity(3, 3)).norm(), 1e-15);
  Matrix m(1, 2);
  m << 1, 0;
  Matrix expect = Matrix::Zero(2, 2);
  expect(0, 0) = 1;
  EXPECT_LE((row_space_projector(m) - expect).norm(), 1e-15);
}

class PenroseTest : public ::testing::TestWithParam<double> {};

TEST_P(PenroseTest, AllFourConditions) {
  const double cond = GetParam();
  std::mt19937_64 rng(11);
  std::normal_distribution<double> n01;
  const Matrix a = Matrix::NullaryExpr(12, 20, [&]() { return n01(rng); });
  Eigen::JacobiSVD<Matrix> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  Vector sv = Vector::LinSpaced(12, 0.0, 1.0).unaryExpr([&](double t) { return std::pow(cond, -t); });
  sv(11) = 0.0;  // rank deficient
  const Matrix m = svd.matrixU() * sv.asDiagonal() * svd.matrixV().transpose();
  const Matrix x = pinv(m);
  const double tol = 1e-8;
  EXPECT_LE((m * x * m - m).norm() / m.norm(), tol);
  EXPECT_LE((x * m * x - x).norm() / x.norm(), tol);
  EXPECT_LE(((m * x).transpose() - m * x).norm(), tol);
  EXPECT_LE(((x * m).transpose() - x * m).norm(), tol);
  EXPECT_EQ(numerical_rank(m), 11);
}

INSTANTIATE_TEST_SUITE_P(Conditioning, PenroseTest, ::testing::Values(1.0, 1e4, 1e8));

TEST(Projector, IdempotentAndSymmetric) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n01;
  const Matrix h = Matrix::NullaryExpr(30, 80, [&]() { return n01(rng); });
  const Matrix p = row_space_projector(h);
  EXPECT_LE((p * p - p).cwiseAbs().maxCoeff(), 1e-10);
  EXPECT_LE((p.transpose() - p).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LE((h * p - h).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(FundamentalLemma, WindowsLieInColumnSpace) {
  const auto model = BuildingModel::reference();
  const Eigen::Index t = 200;
  const TimeSeries u = generate_excitation(t, 4, 0.0, 600.0);
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  const Matrix w = Matrix::NullaryExpr(3, t, [&]() { return uni(rng); });
  const Vector y = rollout(model, Vector::Zero(3), u.channel(0), w);
  const HankelBlocks b = split_blocks(u.values(), w, y.transpose(), 3, 5);
  const Matrix h = b.h_full();

  // A fresh trajectory from a different initial state.
  const Eigen::Index l = 8;
  const TimeSeries u2 = generate_excitation(l, 99, 0.0, 600.0);
  const Matrix w2 = Matrix::NullaryExpr(3, l, [&]() { return uni(rng); });
  const Vector y2 = rollout(model, Vector::Constant(3, 4.0), u2.channel(0), w2);
  Vector v(h.rows());
  v << u2.channel(0).head(3), w2.leftCols(3).reshaped(), y2.head(3), u2.channel(0).tail(5),
      w2.rightCols(5).reshaped(), y2.tail(5);
  const Vector g = h.completeOrthogonalDecomposition().solve(v);
  EXPECT_LT((h * g - v).norm() / v.norm(), 1e-8);
}
