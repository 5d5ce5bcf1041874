#include "deepc/errors.hpp"
#include "deepc/harness.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <sstream>

namespace deepc {

namespace {

WeatherParams effective_weather(const ExperimentConfig& c) {
  WeatherParams w = c.weather;
  if (!c.gains_enabled) w.gains_level = 0.0;
  return w;
}

BuildingModel load_plant(const ExperimentConfig& c) {
  if (c.plant_file.empty()) return BuildingModel::reference();
  std::ifstream in(c.plant_file);
  if (!in) throw ConfigError("cannot open plant file '" + c.plant_file + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return building_model_from_json(ss.str());
}

Vector normalized(const Vector& x, const Scaler& s) {
  return (x.array() - s.offset(0)) / s.scale(0);
}

Matrix normalized(const Matrix& x, const Scaler& s) {
  return (x.colwise() - s.offset).array().colwise() / s.scale.array();
}

}  // namespace

Scenario build_scenario(const ExperimentConfig& config) {
  config.validate();
  const auto t_ini = config.controller.t_ini;
  const auto t_f = config.controller.t_f;
  const WeatherParams wp = effective_weather(config);

  Scenario s;
  s.plant = load_plant(config);
  if (s.plant.n_w() != 3) throw DimensionError("plant must have 3 disturbance channels");

  TimeSeries id_w = generate_weather(config.id_length, wp, 0);
  {
    Matrix w = id_w.values();
    UniformStream jitter(config.id_weather_seed);
    for (Eigen::Index k = 0; k < w.cols(); ++k) {
      w(0, k) += jitter.next(-config.id_ambient_jitter, config.id_ambient_jitter);
      w(1, k) += jitter.next(0.0, config.id_solar_jitter);
      w(2, k) += jitter.next(-config.id_gains_jitter, config.id_gains_jitter);
    }
    id_w = TimeSeries(std::move(w), id_w.names());
  }
  s.id_w = id_w;
  s.id_u = generate_excitation(config.id_length, config.excitation_seed, config.excitation_lo,
                               config.excitation_hi);

  const Vector x0 = s.plant.steady_state(0.5 * (config.excitation_lo + config.excitation_hi),
                                         s.id_w.values().col(0));
  Vector y = rollout(s.plant, x0, s.id_u.channel(0), s.id_w.values());
  NoiseSource id_noise(config.id_noise_seed,
                       config.noise_free_identification ? 0.0 : config.noise_amplitude);
  for (Eigen::Index k = 0; k < y.size(); ++k) y(k) = measure(y(k), id_noise);
  s.id_y = TimeSeries::scalar(y, "y");

  s.dataset = IdDataset(s.id_u, s.id_w.select(config.observed_channels()), s.id_y,
                        config.centering);
  s.pe = check_persistent_excitation(split_blocks(s.dataset, t_ini, t_f));

  const Eigen::Index horizon = t_ini + config.sim_steps + t_f + 1;
  s.weather = generate_weather(horizon, wp, config.id_length);
  const auto schedule = ReferenceSchedule::alternating(config.ref_low, config.ref_high,
                                                       config.ref_period, horizon);
  s.reference.resize(horizon);
  for (Eigen::Index i = 0; i < horizon; ++i) s.reference(i) = schedule.at(i - t_ini);
  s.t0 = config.id_length + t_ini;
  return s;
}

SimResult run_closed_loop(const Scenario& scenario, const Controller& controller,
                          const ExperimentConfig& config, const Controller* shadow) {
  if (!scenario.pe.pass) {
    throw DataError("identification data is not persistently exciting: rank " +
                    std::to_string(scenario.pe.rank) + " < " +
                    std::to_string(scenario.pe.required_rank));
  }
  const auto& cc = controller.config();
  const auto t_ini = cc.t_ini;
  const auto t_f = cc.t_f;
  const auto& norm = controller.normalization();
  const auto& plant = scenario.plant;
  const Matrix& w_all = scenario.weather.values();
  if (w_all.cols() < t_ini + config.sim_steps + t_f + 1) {
    throw DimensionError("scenario is shorter than the configured simulation");
  }
  const Matrix w_obs =
      normalized(Matrix(scenario.weather.select(config.observed_channels()).values()), norm.w);
  const Vector r_norm = normalized(scenario.reference, norm.y);

  SimResult result;
  result.controller = controller.name();
  result.w_names = scenario.weather.names();
  result.records.reserve(static_cast<std::size_t>(config.sim_steps));

  NoiseSource noise(config.noise_seed, config.noise_amplitude);
  Vector x = plant.steady_state(0.0, w_all.col(0));
  const Eigen::Index total = t_ini + config.sim_steps;
  Vector u_hist = Vector::Zero(total);
  Vector y_hist = Vector::Zero(total);

  for (Eigen::Index i = 0; i < total; ++i) {
    const double y_true = plant.C.dot(x);
    const double y_meas = measure(y_true, noise);
    y_hist(i) = y_meas;
    double u = 0.0;

    if (i >= t_ini) {
      StepRecord rec;
      rec.t = scenario.t0 + (i - t_ini);
      rec.y_ref = scenario.reference(i);
      rec.y_true = y_true;
      rec.y_meas = y_meas;
      rec.w = w_all.col(i);

      StepContext ctx;
      ctx.u_past = normalized(Vector(u_hist.segment(i - t_ini, t_ini)), norm.u);
      ctx.w_past = w_obs.middleCols(i - t_ini, t_ini);
      ctx.y_past = normalized(Vector(y_hist.segment(i - t_ini, t_ini + 1)), norm.y);
      ctx.w_future = w_obs.middleCols(i, t_f);
      ctx.y_ref = r_norm.segment(i, t_f + 1);

      Plan plan;
      try {
        const auto start = std::chrono::steady_clock::now();
        plan = controller.plan(ctx);
        const auto stop = std::chrono::steady_clock::now();
        rec.solve_ms = std::chrono::duration<double, std::milli>(stop - start).count();
      } catch (const ControllerError& e) {
        result.failed = true;
        result.failure_step = rec.t;
        result.failure_message = e.what();
        result.problem_dump = e.problem_dump();
        break;
      } catch (const std::exception& e) {
        result.failed = true;
        result.failure_step = rec.t;
        result.failure_message = e.what();
        break;
      }
      u = plan.u(0);
      rec.u = u;
      rec.status = plan.status;
      rec.iterations = plan.iterations;
      rec.stationarity = plan.stationarity;
      if (shadow) {
        const Plan other = shadow->plan(ctx);
        rec.shadow_gap_first = std::abs(plan.u_norm(0) - other.u_norm(0));
        rec.shadow_gap_max = (plan.u_norm - other.u_norm).cwiseAbs().maxCoeff();
      }
      result.records.push_back(std::move(rec));
    }
    u_hist(i) = u;
    x = step_plant(plant, x, u, w_all.col(i)).x_next;
  }

  if (!result.failed) result.kpis = compute_kpis(result, config.settle_steps);
  return result;
}

SimResult run_closed_loop(const ExperimentConfig& config, ControllerKind kind) {
  const Scenario scenario = build_scenario(config);
  const auto controller = make_controller(kind, scenario.dataset, config.controller);
  return run_closed_loop(scenario, *controller, config);
}

std::vector<ComparisonRow> compare_controllers(const ExperimentConfig& config,
                                               std::vector<SimResult>* results) {
  const Scenario scenario = build_scenario(config);
  std::vector<ComparisonRow> rows;
  for (const auto kind : config.controllers) {
    ComparisonRow row;
    row.controller = to_string(kind);
    SimResult sim;
    sim.controller = row.controller;
    try {
      const auto controller = make_controller(kind, scenario.dataset, config.controller);
      sim = run_closed_loop(scenario, *controller, config);
      row.failed = sim.failed;
      row.failure_message = sim.failure_message;
      row.kpis = sim.kpis;
    } catch (const std::exception& e) {
      row.failed = true;
      row.failure_message = e.what();
      sim.failed = true;
      sim.failure_message = e.what();
    }
    rows.push_back(row);
    if (results) results->push_back(std::move(sim));
  }
  return rows;
}

}  // namespace deepc
