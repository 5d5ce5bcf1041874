#pragma once

#include <Eigen/Dense>

#include <iosfwd>
#include <string>
#include <vector>

namespace deepc {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Multichannel signal sampled on a uniform grid, stored channels x steps.
class TimeSeries {
 public:
  static constexpr int kDefaultStepSeconds = 600;

  TimeSeries() = default;
  TimeSeries(Matrix values, std::vector<std::string> names,
             int step_seconds = kDefaultStepSeconds);

  /// Single-channel convenience constructor.
  static TimeSeries scalar(const Vector& samples, std::string name,
                           int step_seconds = kDefaultStepSeconds);

  Eigen::Index channels() const { return values_.rows(); }
  Eigen::Index steps() const { return values_.cols(); }
  int step_seconds() const { return step_seconds_; }

  const Matrix& values() const { return values_; }
  const std::vector<std::string>& names() const { return names_; }

  Vector channel(Eigen::Index c) const { return values_.row(c).transpose(); }

  /// Steps [start, start + count).
  TimeSeries slice(Eigen::Index start, Eigen::Index count) const;

  /// Keeps only the listed channels, in the given order.
  TimeSeries select(const std::vector<Eigen::Index>& channels) const;

 private:
  Matrix values_;
  std::vector<std::string> names_;
  int step_seconds_ = kDefaultStepSeconds;
};

/// Per-channel affine normalization x -> (x - offset) / scale.
struct Scaler {
  Vector offset;
  Vector scale;

  Eigen::Index channels() const { return offset.size(); }

  double apply(Eigen::Index c, double x) const { return (x - offset(c)) / scale(c); }
  double invert(Eigen::Index c, double x) const { return x * scale(c) + offset(c); }
};

enum class Centering { kMean, kNone };

/// Fits offset = sample mean and scale = sample standard deviation (n - 1).
/// With Centering::kNone the offset is forced to zero and only the scale is fitted.
Scaler fit_scaler(const TimeSeries& series, Centering centering = Centering::kMean);

TimeSeries apply_scaler(const TimeSeries& series, const Scaler& scaler);
TimeSeries invert_scaler(const TimeSeries& series, const Scaler& scaler);

/// CSV with header `t,<names>` and one row per step; `t` is the step index
/// offset by `first_step`.
void write_csv(std::ostream& out, const TimeSeries& series, long first_step = 0);
TimeSeries read_csv(std::istream& in, int step_seconds = TimeSeries::kDefaultStepSeconds);

}  // namespace deepc
