#include "deepc/datamodel.hpp"
#include "deepc/errors.hpp"
#include "deepc/plant.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

using namespace deepc;

namespace {

TimeSeries row(std::initializer_list<double> v, const std::string& name = "x") {
  Vector s(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) s(i++) = x;
  return TimeSeries::scalar(s, name);
}

}  // namespace

TEST(Scaler, TwoPointMeanAndStd) {
  const Scaler s = fit_scaler(row({1.0, 3.0}));
  EXPECT_DOUBLE_EQ(s.offset(0), 2.0);
  EXPECT_DOUBLE_EQ(s.scale(0), std::sqrt(2.0));
}

TEST(Scaler, ConstantChannelNamesTheChannel) {
  try {
    fit_scaler(row({5.0, 5.0, 5.0}, "gains"));
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("gains"), std::string::npos);
  }
}

TEST(Scaler, UniformSampleMoments) {
  const TimeSeries u = generate_excitation(864, 7, 0.0, 600.0);
  const Scaler s = fit_scaler(u);
  EXPECT_LT(std::abs(s.offset(0) - 300.0), 30.0);
  EXPECT_LT(std::abs(s.scale(0) - 600.0 / std::sqrt(12.0)), 20.0);
}

TEST(Scaler, RoundTrip) {
  Matrix v(2, 5);
  v << 1.5, -2.0, 3.25, 1e3, 7.0, 0.1, 0.2, -0.3, 0.4, 9.0;
  const TimeSeries ts(v, {"a", "b"});
  const Scaler s = fit_scaler(ts);
  const Matrix back = invert_scaler(apply_scaler(ts, s), s).values();
  EXPECT_LE((back - v).cwiseAbs().maxCoeff(), 1e-12 * v.cwiseAbs().maxCoeff());
}

TEST(Scaler, IdentityAndArithmetic) {
  const Scaler id{Vector::Zero(1), Vector::Ones(1)};
  EXPECT_DOUBLE_EQ(apply_scaler(row({4.0, -1.0}), id).values()(0, 1), -1.0);
  const Scaler s{Vector::Constant(1, 20.0), Vector::Constant(1, 2.0)};
  EXPECT_DOUBLE_EQ(apply_scaler(row({22.0}), s).values()(0, 0), 1.0);
}

TEST(Scaler, ChannelCountMismatch) {
  const Scaler s{Vector::Zero(2), Vector::Ones(2)};
  EXPECT_THROW(apply_scaler(row({1.0, 2.0}), s), DimensionError);
}

TEST(Scaler, CenteringNoneKeepsZeroOffset) {
  const Scaler s = fit_scaler(row({1.0, 3.0}), Centering::kNone);
  EXPECT_EQ(s.offset(0), 0.0);
  EXPECT_GT(s.scale(0), 0.0);
}

TEST(IdDataset, NormalizedChannelsAreStandardized) {
  const TimeSeries u = generate_excitation(576, 1, 0.0, 600.0);
  const TimeSeries w = generate_weather(576, WeatherParams{}, 0).select({0, 1});
  Vector y = Vector::LinSpaced(576, 0.0, 1.0).array().sin();
  const IdDataset d(u, w, TimeSeries::scalar(y, "y"));
  for (const Matrix* m : {&d.u_normalized(), &d.w_normalized(), &d.y_normalized()}) {
    for (Eigen::Index c = 0; c < m->rows(); ++c) {
      const Vector x = m->row(c).transpose();
      const double mean = x.mean();
      const double sd = std::sqrt((x.array() - mean).square().sum() / (x.size() - 1.0));
      EXPECT_LT(std::abs(mean), 1e-9);
      EXPECT_LT(std::abs(sd - 1.0), 1e-9);
    }
  }
}

TEST(Excitation, DeterministicAndInBox) {
  const TimeSeries a = generate_excitation(10, 1, 0.0, 600.0);
  const TimeSeries b = generate_excitation(10, 1, 0.0, 600.0);
  EXPECT_EQ(a.values(), b.values());
  EXPECT_GE(a.values().minCoeff(), 0.0);
  EXPECT_LE(a.values().maxCoeff(), 600.0);
  EXPECT_NE(a.values(), generate_excitation(10, 2, 0.0, 600.0).values());
}

TEST(Weather, ChannelsAndShape) {
  WeatherParams p;
  const TimeSeries w = generate_weather(3 * kStepsPerDay, p, 0);
  ASSERT_EQ(w.channels(), 3);
  EXPECT_GE(w.values().row(1).minCoeff(), 0.0);
  for (Eigen::Index t = 0; t < w.steps(); t += kStepsPerDay) EXPECT_EQ(w.values()(1, t), 0.0);
  Eigen::Index peak = 0;
  w.values().row(0).head(kStepsPerDay).maxCoeff(&peak);
  EXPECT_EQ(peak, static_cast<Eigen::Index>(p.t_peak));
  EXPECT_NEAR(w.values().row(0).maxCoeff(), p.amb_mean + p.amb_amp, 1e-12);

  p.gains_level = 0.0;
  EXPECT_EQ(generate_weather(50, p, 0).values().row(2).cwiseAbs().maxCoeff(), 0.0);
}

TEST(Weather, PhaseContinuesAcrossWindows) {
  const WeatherParams p;
  const Matrix whole = generate_weather(300, p, 0).values();
  const Matrix tail = generate_weather(100, p, 200).values();
  EXPECT_LE((whole.rightCols(100) - tail).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Weather, OpenLoopZoneTemperatureIsPlausible) {
  const auto model = BuildingModel::reference();
  const TimeSeries w = generate_weather(10 * kStepsPerDay, WeatherParams{}, 0);
  const Vector y = rollout(model, model.steady_state(0.0, w.values().col(0)),
                           Vector::Zero(w.steps()), w.values());
  EXPECT_GT(y.minCoeff(), -10.0);
  EXPECT_LT(y.maxCoeff(), 40.0);
}

TEST(Reference, Expansion) {
  const TimeSeries a = generate_reference(5, ReferenceSchedule({{0, 21.0}}));
  EXPECT_EQ(a.values(), Matrix::Constant(1, 5, 21.0));
  const TimeSeries b = generate_reference(5, ReferenceSchedule({{0, 20.0}, {3, 22.0}}));
  Matrix expect(1, 5);
  expect << 20, 20, 20, 22, 22;
  EXPECT_EQ(b.values(), expect);
}

TEST(Reference, DefaultScheduleChangesTwicePerDay) {
  const auto s = ReferenceSchedule::alternating(20.0, 22.0, 36, kStepsPerDay);
  int changes = 0;
  for (long t = 1; t < kStepsPerDay; ++t) changes += s.at(t) != s.at(t - 1);
  EXPECT_GE(changes, 2);
  EXPECT_EQ(s.at(0), 20.0);
  EXPECT_EQ(s.at(36), 22.0);
}

TEST(Reference, InvalidSchedules) {
  EXPECT_THROW(ReferenceSchedule({{1, 20.0}}), ConfigError);
  EXPECT_THROW(ReferenceSchedule({{0, 20.0}, {0, 21.0}}), ConfigError);
}

TEST(Csv, RoundTripFullPrecision) {
  Matrix v(2, 3);
  v << 0.1, 1.0 / 3.0, -2e-17, 1e300, 5.0, std::nextafter(1.0, 2.0);
  const TimeSeries ts(v, {"a", "b"});
  std::stringstream ss;
  write_csv(ss, ts, 10);
  const std::string text = ss.str();
  EXPECT_EQ(text.substr(0, text.find('\n')), "t,a,b");
  const TimeSeries back = read_csv(ss);
  EXPECT_EQ(back.values(), v);
  EXPECT_EQ(back.names(), ts.names());
}
