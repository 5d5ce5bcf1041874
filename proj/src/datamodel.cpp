#include "deepc/datamodel.hpp"

#include "deepc/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace deepc {

IdDataset::IdDataset(TimeSeries u, TimeSeries w, TimeSeries y, Centering centering)
    : u_(std::move(u)), w_(std::move(w)), y_(std::move(y)) {
  if (u_.steps() != w_.steps() || u_.steps() != y_.steps()) {
    throw DimensionError("IdDataset: u, w, y lengths differ (" + std::to_string(u_.steps()) +
                         ", " + std::to_string(w_.steps()) + ", " +
                         std::to_string(y_.steps()) + ")");
  }
  scaler_u_ = fit_scaler(u_, centering);
  scaler_w_ = fit_scaler(w_, centering);
  scaler_y_ = fit_scaler(y_, centering);
  u_norm_ = apply_scaler(u_, scaler_u_).values();
  w_norm_ = apply_scaler(w_, scaler_w_).values();
  y_norm_ = apply_scaler(y_, scaler_y_).values();
}

ReferenceSchedule::ReferenceSchedule(std::vector<std::pair<long, double>> entries)
    : entries_(std::move(entries)) {
  if (entries_.empty() || entries_.front().first != 0) {
    throw ConfigError("ReferenceSchedule: first entry must start at step 0");
  }
  for (std::size_t i = 1; i < entries_.size(); ++i) {
    if (entries_[i].first <= entries_[i - 1].first) {
      throw ConfigError("ReferenceSchedule: start steps must be strictly increasing");
    }
  }
}

ReferenceSchedule ReferenceSchedule::alternating(double low, double high, long period_steps,
                                                 long total_steps) {
  if (period_steps < 1) throw ConfigError("ReferenceSchedule: period must be >= 1 step");
  std::vector<std::pair<long, double>> entries;
  bool is_low = true;
  for (long start = 0; start < std::max(total_steps, 1L); start += period_steps) {
    entries.emplace_back(start, is_low ? low : high);
    is_low = !is_low;
  }
  return ReferenceSchedule(std::move(entries));
}

double ReferenceSchedule::at(long step) const {
  auto it = std::upper_bound(entries_.begin(), entries_.end(), step,
                             [](long s, const auto& e) { return s < e.first; });
  if (it == entries_.begin()) return entries_.front().second;
  return std::prev(it)->second;
}

TimeSeries generate_excitation(Eigen::Index steps, std::uint64_t seed, double lo, double hi) {
  if (!(lo < hi)) throw ConfigError("generate_excitation: need lo < hi");
  if (steps < 1) throw ConfigError("generate_excitation: need at least one step");
  UniformStream stream(seed);
  Vector samples(steps);
  for (Eigen::Index k = 0; k < steps; ++k) samples(k) = stream.next(lo, hi);
  return TimeSeries::scalar(samples, "u");
}

TimeSeries generate_weather(Eigen::Index steps, const WeatherParams& p, long first_step) {
  if (steps < 1) throw ConfigError("generate_weather: need at least one step");
  constexpr double kPi = std::numbers::pi;
  Matrix w(3, steps);
  for (Eigen::Index k = 0; k < steps; ++k) {
    const long t = first_step + k;
    const long tod = ((t % kStepsPerDay) + kStepsPerDay) % kStepsPerDay;
    w(0, k) = p.amb_mean + p.amb_amp * std::cos(2.0 * kPi * (static_cast<double>(t) - p.t_peak) /
                                                kStepsPerDay);
    w(1, k) = std::max(0.0, p.sol_max * std::sin(kPi * static_cast<double>(tod - 36) / 72.0));
    w(2, k) = p.gains_level;
  }
  return TimeSeries(std::move(w), {"ambient", "solar", "gains"});
}

TimeSeries generate_reference(Eigen::Index steps, const ReferenceSchedule& schedule,
                              long first_step) {
  Vector r(steps);
  for (Eigen::Index k = 0; k < steps; ++k) r(k) = schedule.at(first_step + k);
  return TimeSeries::scalar(r, "y_ref");
}

}  // namespace deepc
