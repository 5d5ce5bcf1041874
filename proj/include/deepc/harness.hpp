#pragma once

#include "deepc/controllers.hpp"
#include "deepc/plant.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace deepc {

struct ExperimentConfig {
  // Identification experiment.
  Eigen::Index id_length = 576;
  std::uint64_t excitation_seed = 1;
  double excitation_lo = 0.0;  // W
  double excitation_hi = 600.0;
  std::uint64_t id_weather_seed = 2;
  double id_ambient_jitter = 1.0;  // K, uniform +/- on top of the diurnal profile
  double id_solar_jitter = 50.0;   // uniform [0, a] added to solar
  double id_gains_jitter = 0.0;    // uniform +/- on the gains channel
  std::uint64_t id_noise_seed = 3;
  bool noise_free_identification = false;
  Centering centering = Centering::kMean;

  // Closed loop.
  WeatherParams weather;
  bool gains_enabled = true;
  bool gains_observed = false;
  double noise_amplitude = 0.05;  // K
  std::uint64_t noise_seed = 4;
  Eigen::Index sim_steps = 432;
  Eigen::Index settle_steps = 18;
  double ref_low = 20.0;
  double ref_high = 22.0;
  long ref_period = 36;

  ControllerConfig controller;
  std::vector<ControllerKind> controllers{ControllerKind::kProjection, ControllerKind::kBilevel,
                                          ControllerKind::kInstrumental, ControllerKind::kArx};
  std::string plant_file;  // optional JSON with A, B, E, C; empty = built-in matrices
  std::string output_dir = ".";

  void validate() const;
  /// Channels of the plant disturbance vector that controllers see.
  std::vector<Eigen::Index> observed_channels() const;
};

/// Missing keys keep their defaults; unknown keys are rejected.
ExperimentConfig experiment_config_from_json(const std::string& text);
ExperimentConfig load_experiment_config(const std::string& path);
std::string experiment_config_to_json(const ExperimentConfig& config);

/// Everything a comparison shares: plant, identification data, weather,
/// reference. Closed-loop time starts at step id_length, directly after the
/// identification period, and begins with T_ini steps of u = 0.
struct Scenario {
  BuildingModel plant;
  TimeSeries id_u;
  TimeSeries id_w;  // all plant disturbance channels
  TimeSeries id_y;  // measured
  IdDataset dataset;
  PeReport pe;
  TimeSeries weather;  // all channels, from t0 - T_ini through the last forecast
  Vector reference;    // same time base as weather
  long t0 = 0;         // absolute step of the first controlled step
};

Scenario build_scenario(const ExperimentConfig& config);

struct StepRecord {
  long t = 0;
  double y_ref = 0.0;
  double y_true = 0.0;
  double y_meas = 0.0;
  double u = 0.0;
  Vector w;
  QpStatus status = QpStatus::kOptimal;
  int iterations = 0;
  double solve_ms = 0.0;
  double stationarity = std::numeric_limits<double>::quiet_NaN();
  // Distance to the shadow controller's plan on the same state, normalized.
  double shadow_gap_first = std::numeric_limits<double>::quiet_NaN();
  double shadow_gap_max = std::numeric_limits<double>::quiet_NaN();
};

struct KpiRecord {
  double rmse_k = 0.0;
  double smoothness = 1.0;
  bool smoothness_undefined = false;
  double mean_error_k = 0.0;      // y - r after settling
  double last_day_bias_k = 0.0;   // y - r over the final 144 steps
  double mean_solve_ms = 0.0;
  double max_solve_ms = 0.0;
  Eigen::Index samples = 0;
};

struct SimResult {
  std::string controller;
  std::vector<std::string> w_names;
  std::vector<StepRecord> records;
  bool failed = false;
  long failure_step = -1;
  std::string failure_message;
  std::string problem_dump;
  KpiRecord kpis;
};

/// One receding-horizon run. `shadow`, when given, plans on the same state
/// every step but is never applied.
SimResult run_closed_loop(const Scenario& scenario, const Controller& controller,
                          const ExperimentConfig& config, const Controller* shadow = nullptr);
SimResult run_closed_loop(const ExperimentConfig& config, ControllerKind kind);

KpiRecord compute_kpis(const std::vector<double>& y, const std::vector<double>& y_ref,
                       const std::vector<double>& u, const std::vector<double>& solve_ms,
                       Eigen::Index settle_steps = 18);
KpiRecord compute_kpis(const SimResult& result, Eigen::Index settle_steps = 18);

struct ComparisonRow {
  std::string controller;
  bool failed = false;
  std::string failure_message;
  KpiRecord kpis;
};

std::vector<ComparisonRow> compare_controllers(const ExperimentConfig& config,
                                               std::vector<SimResult>* results = nullptr);

/// Numeric CSV with header t,y_ref,y_true,y_meas,u,<w names>,status,iterations,
/// solve_ms,stationarity. status is 0 for optimal, see QpStatus for the rest.
void write_trajectory(std::ostream& out, const SimResult& result);
/// Reads y_true, y_ref, u and solve_ms back from a trajectory CSV.
SimResult read_trajectory(std::istream& in);

std::string kpis_to_json(const std::vector<ComparisonRow>& rows, const ExperimentConfig* config);
std::string comparison_markdown(const std::vector<ComparisonRow>& rows);

}  // namespace deepc
