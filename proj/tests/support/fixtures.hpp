#pragma once

#include "deepc/harness.hpp"

#include <ostream>
#include <random>

namespace deepc {
inline void PrintTo(ControllerKind k, std::ostream* os) { *os << to_string(k); }
}  // namespace deepc

namespace fixture {

using deepc::Matrix;
using deepc::Vector;

/// Noise-free, linear (gains off, no centering), unconstrained setup.
inline deepc::ExperimentConfig exact_config(Eigen::Index t_f = 48, Eigen::Index id_length = 576) {
  deepc::ExperimentConfig c;
  c.id_length = id_length;
  c.noise_free_identification = true;
  c.noise_amplitude = 0.0;
  c.gains_enabled = false;
  c.centering = deepc::Centering::kNone;
  c.controller.t_f = t_f;
  c.controller.constrain_input = false;
  c.controller.epsilon_g = 0.0;
  c.controller.lambda_basic = 1e-8;
  return c;
}

inline deepc::ExperimentConfig small_config() {
  deepc::ExperimentConfig c;
  c.id_length = 300;
  c.controller.t_f = 12;
  c.sim_steps = 40;
  return c;
}

inline Vector normalize(const Vector& x, const deepc::Scaler& s) {
  return (x.array() - s.offset(0)) / s.scale(0);
}

inline Matrix normalize(const Matrix& x, const deepc::Scaler& s) {
  return (x.colwise() - s.offset).array().colwise() / s.scale.array();
}

/// A random past/future around step k of the scenario's weather, with the
/// true plant response to a random input plan.
struct Probe {
  deepc::StepContext ctx;
  Vector u_plan;  // normalized, T_f
  Vector y_true;  // normalized, y[k .. k+T_f]
  Vector u_plan_w;
};

inline Probe make_probe(const deepc::Scenario& s, const deepc::ExperimentConfig& config,
                        const deepc::Normalization& norm, std::uint64_t seed,
                        Eigen::Index k = 20, double u_lo = 0.0, double u_hi = 600.0) {
  const auto t_ini = config.controller.t_ini;
  const auto t_f = config.controller.t_f;
  const Matrix& w = s.weather.values();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uni(u_lo, u_hi);
  const Eigen::Index len = k + t_f + 1;
  Vector u = Vector::NullaryExpr(len, [&]() { return uni(rng); });
  Vector x = s.plant.steady_state(0.5 * (u_lo + u_hi), w.col(0));
  Vector y(len);
  for (Eigen::Index i = 0; i < len; ++i) {
    y(i) = s.plant.C.dot(x);
    x = s.plant.A * x + s.plant.B * u(i) + s.plant.E * w.col(i);
  }
  const Matrix w_obs = normalize(Matrix(s.weather.select(config.observed_channels()).values()), norm.w);

  Probe p;
  p.ctx.u_past = normalize(Vector(u.segment(k - t_ini, t_ini)), norm.u);
  p.ctx.w_past = w_obs.middleCols(k - t_ini, t_ini);
  p.ctx.y_past = normalize(Vector(y.segment(k - t_ini, t_ini + 1)), norm.y);
  p.ctx.w_future = w_obs.middleCols(k, t_f);
  p.ctx.y_ref = Vector::Zero(t_f + 1);
  p.u_plan_w = u.segment(k, t_f);
  p.u_plan = normalize(p.u_plan_w, norm.u);
  p.y_true = normalize(Vector(y.segment(k, t_f + 1)), norm.y);
  return p;
}

/// Truth aligned with a controller's prediction window.
inline Vector truth_for(const deepc::Controller& c, const Probe& p) {
  const auto t_f = c.config().t_f;
  return c.output_lead() == 1 ? Vector(p.y_true.tail(t_f)) : Vector(p.y_true.head(t_f));
}

inline deepc::Normalization normalization_of(const deepc::IdDataset& d) {
  return {d.scaler_u(), d.scaler_w(), d.scaler_y()};
}

}  // namespace fixture
