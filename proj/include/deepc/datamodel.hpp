#pragma once

#include "deepc/timeseries.hpp"

#include <cstdint>
#include <random>
#include <utility>
#include <vector>

namespace deepc {

/// Steps per simulated day at the 10 minute sampling period.
inline constexpr int kStepsPerDay = 144;

/// Seeded stream of uniform samples. The mapping from raw 64-bit draws to
/// doubles is fixed here so sequences do not depend on the standard library.
class UniformStream {
 public:
  explicit UniformStream(std::uint64_t seed) : engine_(seed) {}

  /// Uniform on [0, 1).
  double next() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double next(double lo, double hi) { return lo + (hi - lo) * next(); }

 private:
  std::mt19937_64 engine_;
};

/// Identification data in physical units plus the scalers fitted on it.
/// Controllers only ever see the normalized copies.
class IdDataset {
 public:
  IdDataset() = default;
  IdDataset(TimeSeries u, TimeSeries w, TimeSeries y, Centering centering = Centering::kMean);

  Eigen::Index length() const { return u_.steps(); }
  Eigen::Index n_u() const { return u_.channels(); }
  Eigen::Index n_w() const { return w_.channels(); }
  Eigen::Index n_y() const { return y_.channels(); }

  const TimeSeries& u() const { return u_; }
  const TimeSeries& w() const { return w_; }
  const TimeSeries& y() const { return y_; }

  const Scaler& scaler_u() const { return scaler_u_; }
  const Scaler& scaler_w() const { return scaler_w_; }
  const Scaler& scaler_y() const { return scaler_y_; }

  const Matrix& u_normalized() const { return u_norm_; }
  const Matrix& w_normalized() const { return w_norm_; }
  const Matrix& y_normalized() const { return y_norm_; }

 private:
  TimeSeries u_, w_, y_;
  Scaler scaler_u_, scaler_w_, scaler_y_;
  Matrix u_norm_, w_norm_, y_norm_;
};

/// Piecewise-constant setpoint schedule: (start step, setpoint in degC).
class ReferenceSchedule {
 public:
  explicit ReferenceSchedule(std::vector<std::pair<long, double>> entries);

  /// Alternates `low` / `high` every `period_steps`, starting with `low`.
  static ReferenceSchedule alternating(double low, double high, long period_steps,
                                       long total_steps);

  const std::vector<std::pair<long, double>>& entries() const { return entries_; }
  double at(long step) const;

 private:
  std::vector<std::pair<long, double>> entries_;
};

/// Synthetic weather. Internal gains are a unitless constant.
struct WeatherParams {
  double amb_mean = -2.0;   // degC
  double amb_amp = 4.0;     // K
  double t_peak = 84.0;     // step of day with the warmest ambient (14:00)
  double sol_max = 300.0;   // peak of the daylight half-sine
  double gains_level = 1.0;
};

/// Uniform i.i.d. samples on [lo, hi]; one channel named "u".
TimeSeries generate_excitation(Eigen::Index steps, std::uint64_t seed, double lo, double hi);

/// Channels: ambient, solar, gains. `first_step` is the absolute step of
/// sample 0, so day phase is continuous across consecutive windows.
TimeSeries generate_weather(Eigen::Index steps, const WeatherParams& params, long first_step = 0);

TimeSeries generate_reference(Eigen::Index steps, const ReferenceSchedule& schedule,
                              long first_step = 0);

}  // namespace deepc
