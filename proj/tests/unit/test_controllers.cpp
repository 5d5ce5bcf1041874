#include "deepc/controllers.hpp"
#include "deepc/errors.hpp"
#include "deepc/harness.hpp"

#include "../support/fixtures.hpp"
#include "../support/oracles.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace deepc;

namespace {

const Scenario& exact_scenario() {
  static const Scenario s = build_scenario(fixture::exact_config(12, 300));
  return s;
}

const Scenario& noisy_scenario() {
  static const Scenario s = build_scenario(fixture::small_config());
  return s;
}

std::unique_ptr<Controller> exact(ControllerKind kind) {
  return make_controller(kind, exact_scenario().dataset, fixture::exact_config(12, 300).controller);
}

std::unique_ptr<Controller> noisy(ControllerKind kind, ControllerConfig cc = fixture::small_config().controller) {
  return make_controller(kind, noisy_scenario().dataset, cc);
}

HankelBlocks noisy_blocks() {
  return split_blocks(noisy_scenario().dataset, 6, 12);
}

}  // namespace

class ExactPrediction : public ::testing::TestWithParam<ControllerKind> {};

TEST_P(ExactPrediction, MatchesPlantRollout) {
  const auto c = exact(GetParam());
  const double tol = GetParam() == ControllerKind::kBasic || GetParam() == ControllerKind::kProjection
                         ? 1e-4
                         : 1e-6;
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const auto probe = fixture::make_probe(exact_scenario(), fixture::exact_config(12, 300),
                                           c->normalization(), seed);
    const Vector y = c->predict(probe.ctx, probe.u_plan);
    EXPECT_LE((y - fixture::truth_for(*c, probe)).cwiseAbs().maxCoeff(), tol)
        << to_string(GetParam()) << " seed " << seed;
  }
}

INSTANTIATE_TEST_SUITE_P(AllControllers, ExactPrediction,
                         ::testing::Values(ControllerKind::kBasic, ControllerKind::kProjection,
                                           ControllerKind::kBilevel, ControllerKind::kInstrumental,
                                           ControllerKind::kArx),
                         [](const auto& info) { return to_string(info.param); });

class ReachableReference : public ::testing::TestWithParam<ControllerKind> {};

TEST_P(ReachableReference, TracksExactly) {
  const auto c = exact(GetParam());
  auto probe = fixture::make_probe(exact_scenario(), fixture::exact_config(12, 300),
                                   c->normalization(), 4);
  probe.ctx.y_ref = probe.y_true;
  const Plan plan = c->plan(probe.ctx);
  ASSERT_EQ(plan.status, QpStatus::kOptimal);
  const Vector err = plan.y_norm - fixture::truth_for(*c, probe);
  // The first DeePC output is fixed by the past and already matches.
  EXPECT_LE(err.squaredNorm(), 1e-4) << to_string(GetParam());
  EXPECT_LE(err.cwiseAbs().maxCoeff(), 1e-3) << to_string(GetParam());
}

INSTANTIATE_TEST_SUITE_P(AllControllers, ReachableReference,
                         ::testing::Values(ControllerKind::kBasic, ControllerKind::kBilevel,
                                           ControllerKind::kArx, ControllerKind::kInstrumental),
                         [](const auto& info) { return to_string(info.param); });

TEST(BasicDeepc, NeedsExplicitLambda) {
  ControllerConfig cc = fixture::small_config().controller;
  cc.lambda_basic.reset();
  EXPECT_THROW(noisy(ControllerKind::kBasic, cc), ConfigError);
}

TEST(BasicDeepc, HugeLambdaCrushesG) {
  ControllerConfig cc = fixture::small_config().controller;
  cc.lambda_basic = 1e12;
  cc.constrain_input = false;
  const auto c = noisy(ControllerKind::kBasic, cc);
  const auto* basic = dynamic_cast<const BasicDeepc*>(c.get());
  IniWindow zero{Vector::Zero(6), Vector::Zero(12), Vector::Zero(6)};
  const Plan plan = basic->plan(zero, Matrix::Zero(2, 12), Vector::Ones(12));
  ASSERT_EQ(plan.status, QpStatus::kOptimal);
  EXPECT_LT(plan.g.norm(), 1e-4);
  EXPECT_LT(plan.y_norm.cwiseAbs().maxCoeff(), 1e-4);
}

TEST(BasicDeepc, FreeResponseReferenceHasZeroCost) {
  const auto c = exact(ControllerKind::kBasic);
  const Scenario& s = exact_scenario();
  auto probe = fixture::make_probe(s, fixture::exact_config(12, 300), c->normalization(), 5, 20,
                                   250.0, 250.0);
  probe.ctx.y_ref = probe.y_true;
  const Plan plan = c->plan(probe.ctx);
  ASSERT_EQ(plan.status, QpStatus::kOptimal);
  EXPECT_LE((plan.y_norm - probe.y_true.head(12)).squaredNorm(), 1e-6);
}

TEST(ProjectionDeepc, GStaysInRowSpace) {
  const auto c = noisy(ControllerKind::kProjection);
  const auto* op = dynamic_cast<const ProjectionDeepc*>(c.get());
  auto probe = fixture::make_probe(noisy_scenario(), fixture::small_config(), c->normalization(), 6);
  probe.ctx.y_ref.setConstant(0.5);
  const Plan plan = op->plan(probe.ctx);
  ASSERT_EQ(plan.status, QpStatus::kOptimal);
  const Matrix eye = Matrix::Identity(plan.g.size(), plan.g.size());
  EXPECT_LE(((eye - op->projector()) * plan.g).norm(), 1e-3 * plan.g.norm());
}

TEST(ProjectionDeepc, MatchesInstrumentalPlan) {
  const auto op = noisy(ControllerKind::kProjection);
  const auto iv = noisy(ControllerKind::kInstrumental);
  for (std::uint64_t seed : {7u, 8u}) {
    auto probe = fixture::make_probe(noisy_scenario(), fixture::small_config(), op->normalization(), seed);
    probe.ctx.y_ref.setConstant(seed == 7 ? 0.8 : -0.5);
    const Plan a = op->plan(probe.ctx);
    const Plan b = iv->plan(probe.ctx);
    EXPECT_LE((a.u_norm - b.u_norm).cwiseAbs().maxCoeff(), 1e-3);
  }
}

TEST(ProjectionDeepc, ExactDataMatchesBasic) {
  const auto op = exact(ControllerKind::kProjection);
  const auto basic = exact(ControllerKind::kBasic);
  auto probe = fixture::make_probe(exact_scenario(), fixture::exact_config(12, 300), op->normalization(), 9);
  probe.ctx.y_ref = probe.y_true;
  probe.ctx.y_ref.tail(6).array() += 0.05;
  const Plan a = op->plan(probe.ctx);
  const Plan b = basic->plan(probe.ctx);
  EXPECT_LE((a.y_norm - b.y_norm).cwiseAbs().maxCoeff(), 1e-3);
}

TEST(Instrumental, GainIsMultiStepLeastSquares) {
  const HankelBlocks b = noisy_blocks();
  const auto iv = noisy(ControllerKind::kInstrumental);
  const Matrix& g = dynamic_cast<const IvDeepc*>(iv.get())->gain();
  const Matrix ref = oracle::normal_equation_gain(b.h_hat(), b.y_f);
  EXPECT_LE((g - ref).norm(), 1e-8 * std::max(1.0, ref.norm()));
}

TEST(Instrumental, ZeroWindowGivesZeroOffset) {
  const HankelBlocks b = noisy_blocks();
  IniWindow zero{Vector::Zero(6), Vector::Zero(12), Vector::Zero(6)};
  const AffinePredictor p = build_iv_predictor(b, zero, Matrix::Zero(2, 12));
  EXPECT_LE(p.p_0.cwiseAbs().maxCoeff(), 1e-14);
  EXPECT_EQ(p.p_u.rows(), 12);
  EXPECT_EQ(p.p_u.cols(), 12);
}

TEST(Instrumental, UnconstrainedSquareInverse) {
  ControllerConfig cc = fixture::small_config().controller;
  cc.constrain_input = false;
  const auto c = noisy(ControllerKind::kInstrumental, cc);
  const auto* iv = dynamic_cast<const IvDeepc*>(c.get());
  const auto probe = fixture::make_probe(noisy_scenario(), fixture::small_config(), c->normalization(), 10);
  const IniWindow ini = deepc_window(probe.ctx);
  const AffinePredictor pred = iv->predictor(ini, probe.ctx.w_future);
  const Vector r = Vector::Constant(12, 0.3);
  const Plan plan = iv->plan(ini, probe.ctx.w_future, r);
  const Vector expect = pred.p_u.fullPivLu().solve(r - pred.p_0);
  EXPECT_LE((plan.u_norm - expect).cwiseAbs().maxCoeff(), 1e-6 * std::max(1.0, expect.cwiseAbs().maxCoeff()));
}

TEST(Bilevel, StationarityAndCausalStructure) {
  const auto c = noisy(ControllerKind::kBilevel);
  const auto* bl = dynamic_cast<const BilevelDeepc*>(c.get());
  auto probe = fixture::make_probe(noisy_scenario(), fixture::small_config(), c->normalization(), 11);
  probe.ctx.y_ref.setConstant(0.4);
  const Plan plan = bl->plan(probe.ctx);
  ASSERT_EQ(plan.status, QpStatus::kOptimal);
  EXPECT_LE(plan.stationarity, 1e-8);
  const auto n_w = 2;
  ASSERT_EQ(plan.K.rows(), 12);
  ASSERT_EQ(plan.K.cols(), 12 * n_w);
  for (Eigen::Index i = 0; i < 12; ++i) {
    EXPECT_EQ(plan.K.row(i).tail((12 - i) * n_w).cwiseAbs().maxCoeff(), 0.0);
  }
  const Vector w_flat = flatten(probe.ctx.w_future);
  EXPECT_LE((plan.u_bar + plan.K * w_flat - plan.u_norm).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Bilevel, PredictorSuperposition) {
  const HankelBlocks b = noisy_blocks();
  const auto probe = fixture::make_probe(noisy_scenario(), fixture::small_config(),
                                         fixture::normalization_of(noisy_scenario().dataset), 12);
  const IniWindow ini = deepc_window(probe.ctx);
  const AffinePredictor p = build_bl_predictor(b, 0.03, ini, probe.ctx.w_future);
  std::mt19937_64 rng(1);
  std::normal_distribution<double> n01;
  const Vector u1 = Vector::NullaryExpr(12, [&]() { return n01(rng); });
  const Vector u2 = Vector::NullaryExpr(12, [&]() { return n01(rng); });
  const double a = 0.3, bb = 1.7;
  const Vector lhs = p(a * u1 + bb * u2);
  const Vector rhs = a * p(u1) + bb * p(u2) + (1.0 - a - bb) * p.p_0;
  EXPECT_LE((lhs - rhs).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(Bilevel, InnerSolutionSatisfiesStationarity) {
  const auto c = noisy(ControllerKind::kBilevel);
  const auto* bl = dynamic_cast<const BilevelDeepc*>(c.get());
  const auto probe = fixture::make_probe(noisy_scenario(), fixture::small_config(), c->normalization(), 13);
  const IniWindow ini = deepc_window(probe.ctx);
  const Vector gk = bl->inner_solution(ini, probe.ctx.w_future, probe.u_plan);
  const auto n_g = bl->h().cols();
  EXPECT_LE(bl->stationarity_residual(ini, gk.head(n_g), gk.tail(gk.size() - n_g)), 1e-8);
}

TEST(Bilevel, SingularKktThrows) {
  HankelBlocks b = noisy_blocks();
  b.w_p.row(0) = b.u_p.row(0);  // duplicated row in H
  ControllerConfig cc = fixture::small_config().controller;
  Normalization id{Scaler{Vector::Zero(1), Vector::Ones(1)}, Scaler{Vector::Zero(2), Vector::Ones(2)},
                   Scaler{Vector::Zero(1), Vector::Ones(1)}};
  try {
    BilevelDeepc bl(b, cc, id);
    FAIL() << "expected NumericalError";
  } catch (const NumericalError& e) {
    EXPECT_NE(std::string(e.what()).find("epsilon_g"), std::string::npos);
  }
}

TEST(Arx, RecoversKnownCoefficients) {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  const Eigen::Index n = 200;
  Vector u = Vector::NullaryExpr(n, [&]() { return uni(rng); });
  Matrix w = Matrix::NullaryExpr(1, n, [&]() { return uni(rng); });
  Vector y = Vector::Zero(n);
  for (Eigen::Index t = 1; t < n; ++t) y(t) = 0.5 * y(t - 1) + 0.1 * u(t - 1);
  const ArxModel m = fit_arx(u, w, y, 1);
  EXPECT_NEAR(m.a(0), 0.5, 1e-8);
  EXPECT_NEAR(m.b(0), 0.1, 1e-8);
  EXPECT_NEAR(m.c(0, 0), 0.0, 1e-8);
}

TEST(Arx, ResidualOrthogonalToRegressors) {
  const auto& d = noisy_scenario().dataset;
  const Vector u = d.u_normalized().row(0).transpose();
  const Vector y = d.y_normalized().row(0).transpose();
  const ArxModel m = fit_arx(u, d.w_normalized(), y, 6);
  const auto [phi, target] = arx_regression(u, d.w_normalized(), y, 6);
  const Vector resid = target - phi * m.theta();
  EXPECT_LE((phi.transpose() * resid).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(Arx, CollinearInputsNamed) {
  std::mt19937_64 rng(22);
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  const Vector u = Vector::NullaryExpr(100, [&]() { return uni(rng); });
  Matrix w(2, 100);
  w.row(0) = u.transpose();
  w.row(1) = Vector::NullaryExpr(100, [&]() { return uni(rng); }).transpose();
  const Vector y = Vector::NullaryExpr(100, [&]() { return uni(rng); });
  try {
    fit_arx(u, w, y, 2, {"ambient", "solar"});
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("ambient"), std::string::npos) << e.what();
  }
}

TEST(Arx, HoldOutRolloutBeatsNoise) {
  const auto c = noisy(ControllerKind::kArx);
  const auto& s = noisy_scenario();
  const auto probe = fixture::make_probe(s, fixture::small_config(), c->normalization(), 23);
  const Vector y = c->predict(probe.ctx, probe.u_plan);
  const double rmse = std::sqrt((y - fixture::truth_for(*c, probe)).squaredNorm() / y.size());
  const double noise_std = 0.05 / std::sqrt(3.0) / c->normalization().y.scale(0);
  EXPECT_LT(rmse, noise_std);
}

TEST(Arx, PredictorIsTheUnrolledRecursion) {
  const auto c = noisy(ControllerKind::kArx);
  const auto* arx = dynamic_cast<const ArxMpc*>(c.get());
  const auto probe = fixture::make_probe(noisy_scenario(), fixture::small_config(), c->normalization(), 24);
  const IniWindow win = arx_window(probe.ctx);
  const AffinePredictor p = arx->model().predictor(win, probe.ctx.w_future);
  // Step the recursion by hand.
  const ArxModel& m = arx->model();
  const auto lags = m.lags();
  std::vector<double> ys(win.y.data(), win.y.data() + win.y.size());
  std::vector<double> us(win.u.data(), win.u.data() + win.u.size());
  const Matrix w_win = win.w.reshaped(2, lags);
  Matrix w_all(2, lags - 1 + 12);
  w_all << w_win.leftCols(lags - 1), probe.ctx.w_future;
  for (Eigen::Index j = 0; j < 12; ++j) {
    us.push_back(probe.u_plan(j));
    const auto t = static_cast<Eigen::Index>(ys.size()) - 1;  // index of y[k+j]
    const auto tu = static_cast<Eigen::Index>(us.size()) - 1;
    const auto tw = lags - 1 + j;
    double next = 0.0;
    for (Eigen::Index i = 0; i < lags; ++i) {
      next += m.a(i) * ys[static_cast<std::size_t>(t - i)] + m.b(i) * us[static_cast<std::size_t>(tu - i)] +
              m.c.col(i).dot(w_all.col(tw - i));
    }
    ys.push_back(next);
  }
  const Vector by_hand = Eigen::Map<const Vector>(ys.data() + lags, 12);
  EXPECT_LE((p(probe.u_plan) - by_hand).cwiseAbs().maxCoeff(), 1e-10);

  std::mt19937_64 rng(2);
  std::normal_distribution<double> n01;
  const Vector u1 = Vector::NullaryExpr(12, [&]() { return n01(rng); });
  const Vector u2 = Vector::NullaryExpr(12, [&]() { return n01(rng); });
  EXPECT_LE((p(u1 + 2.0 * u2) - (p(u1) + 2.0 * p(u2) - 2.0 * p.p_0)).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(Arx, SingleStepPlanIsClosedForm) {
  ExperimentConfig cfg = fixture::small_config();
  cfg.controller.t_f = 1;
  const Scenario s = build_scenario(cfg);
  const auto c = make_controller(ControllerKind::kArx, s.dataset, cfg.controller);
  const auto* arx = dynamic_cast<const ArxMpc*>(c.get());
  auto probe = fixture::make_probe(s, cfg, c->normalization(), 25);
  for (double r : {-3.0, 0.1, 3.0}) {
    probe.ctx.y_ref.setConstant(r);
    const Plan plan = arx->plan(probe.ctx);
    const AffinePredictor p = arx->model().predictor(arx_window(probe.ctx), probe.ctx.w_future);
    const double u = std::clamp((r - p.p_0(0)) / p.p_u(0, 0), c->u_lower(), c->u_upper());
    EXPECT_NEAR(plan.u_norm(0), u, 1e-7);
  }
}

class InputBounds : public ::testing::TestWithParam<ControllerKind> {};

TEST_P(InputBounds, PlansStayInBox) {
  const auto c = noisy(GetParam());
  auto probe = fixture::make_probe(noisy_scenario(), fixture::small_config(), c->normalization(), 30);
  probe.ctx.y_ref.setConstant(10.0);  // unreachable: saturates at the upper bound
  const Plan hot = c->plan(probe.ctx);
  probe.ctx.y_ref.setConstant(-10.0);
  const Plan cold = c->plan(probe.ctx);
  for (const Plan* p : {&hot, &cold}) {
    EXPECT_GE(p->u.minCoeff(), 0.0);
    EXPECT_LE(p->u.maxCoeff(), 600.0);
    const Vector raw = p->u_norm.unaryExpr([&](double v) { return c->normalization().u.invert(0, v); });
    EXPECT_GE(raw.minCoeff(), -1e-6);
    EXPECT_LE(raw.maxCoeff(), 600.0 + 1e-6);
  }
  EXPECT_NEAR(hot.u(0), 600.0, 1e-6);
  EXPECT_NEAR(cold.u(0), 0.0, 1e-6);
}

INSTANTIATE_TEST_SUITE_P(AllControllers, InputBounds,
                         ::testing::Values(ControllerKind::kProjection, ControllerKind::kBilevel,
                                           ControllerKind::kInstrumental, ControllerKind::kArx),
                         [](const auto& info) { return to_string(info.param); });

TEST(Controllers, ContextSizeChecked) {
  const auto c = noisy(ControllerKind::kInstrumental);
  StepContext ctx;
  ctx.u_past = Vector::Zero(5);
  EXPECT_THROW(c->plan(ctx), DimensionError);
}

TEST(Controllers, KindNames) {
  for (auto k : {ControllerKind::kBasic, ControllerKind::kProjection, ControllerKind::kBilevel,
                 ControllerKind::kInstrumental, ControllerKind::kArx}) {
    EXPECT_EQ(controller_kind_from_string(to_string(k)), k);
  }
  EXPECT_THROW(controller_kind_from_string("pid"), ConfigError);
}
