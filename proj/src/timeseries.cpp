#include "deepc/timeseries.hpp"

#include "deepc/errors.hpp"

#include <cmath>
#include <iomanip>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

namespace deepc {

TimeSeries::TimeSeries(Matrix values, std::vector<std::string> names, int step_seconds)
    : values_(std::move(values)), names_(std::move(names)), step_seconds_(step_seconds) {
  if (step_seconds_ <= 0) {
    throw ConfigError("TimeSeries: step_seconds must be positive");
  }
  if (values_.rows() < 1 || values_.cols() < 1) {
    throw DimensionError("TimeSeries: need at least one channel and one step");
  }
  if (names_.empty()) {
    for (Eigen::Index c = 0; c < values_.rows(); ++c) {
      names_.push_back("ch" + std::to_string(c));
    }
  }
  if (static_cast<Eigen::Index>(names_.size()) != values_.rows()) {
    throw DimensionError("TimeSeries: " + std::to_string(names_.size()) +
                         " names for " + std::to_string(values_.rows()) + " channels");
  }
}

TimeSeries TimeSeries::scalar(const Vector& samples, std::string name, int step_seconds) {
  return TimeSeries(samples.transpose(), {std::move(name)}, step_seconds);
}

TimeSeries TimeSeries::slice(Eigen::Index start, Eigen::Index count) const {
  if (start < 0 || count < 1 || start + count > steps()) {
    throw DimensionError("TimeSeries::slice: range [" + std::to_string(start) + ", " +
                         std::to_string(start + count) + ") outside " +
                         std::to_string(steps()) + " steps");
  }
  return TimeSeries(values_.middleCols(start, count), names_, step_seconds_);
}

TimeSeries TimeSeries::select(const std::vector<Eigen::Index>& channels) const {
  Matrix out(static_cast<Eigen::Index>(channels.size()), steps());
  std::vector<std::string> names;
  for (std::size_t i = 0; i < channels.size(); ++i) {
    const auto c = channels[i];
    if (c < 0 || c >= this->channels()) {
      throw DimensionError("TimeSeries::select: no channel " + std::to_string(c));
    }
    out.row(static_cast<Eigen::Index>(i)) = values_.row(c);
    names.push_back(names_[static_cast<std::size_t>(c)]);
  }
  return TimeSeries(std::move(out), std::move(names), step_seconds_);
}

Scaler fit_scaler(const TimeSeries& series, Centering centering) {
  const auto n = series.steps();
  if (n < 2) {
    throw ConfigError("fit_scaler: need at least 2 samples per channel");
  }
  Scaler s;
  s.offset = Vector::Zero(series.channels());
  s.scale = Vector::Zero(series.channels());
  for (Eigen::Index c = 0; c < series.channels(); ++c) {
    const auto row = series.values().row(c);
    const double mean = row.mean();
    const double var = (row.array() - mean).square().sum() / static_cast<double>(n - 1);
    const double sd = std::sqrt(var);
    if (!(sd > 0.0) || sd <= 1e-12 * std::max(1.0, std::abs(mean))) {
      throw ConfigError("fit_scaler: channel '" + series.names()[static_cast<std::size_t>(c)] +
                        "' has zero variance");
    }
    s.offset(c) = centering == Centering::kMean ? mean : 0.0;
    s.scale(c) = sd;
  }
  return s;
}

namespace {

void check_channels(const TimeSeries& series, const Scaler& scaler, const char* who) {
  if (series.channels() != scaler.channels()) {
    throw DimensionError(std::string(who) + ": series has " +
                         std::to_string(series.channels()) + " channels, scaler " +
                         std::to_string(scaler.channels()));
  }
}

}  // namespace

TimeSeries apply_scaler(const TimeSeries& series, const Scaler& scaler) {
  check_channels(series, scaler, "apply_scaler");
  Matrix out = (series.values().colwise() - scaler.offset).array().colwise() /
               scaler.scale.array();
  return TimeSeries(std::move(out), series.names(), series.step_seconds());
}

TimeSeries invert_scaler(const TimeSeries& series, const Scaler& scaler) {
  check_channels(series, scaler, "invert_scaler");
  Matrix out = (series.values().array().colwise() * scaler.scale.array()).matrix().colwise() +
               scaler.offset;
  return TimeSeries(std::move(out), series.names(), series.step_seconds());
}

void write_csv(std::ostream& out, const TimeSeries& series, long first_step) {
  out << "t";
  for (const auto& name : series.names()) out << ',' << name;
  out << '\n';
  out << std::setprecision(std::numeric_limits<double>::max_digits10);
  for (Eigen::Index k = 0; k < series.steps(); ++k) {
    out << first_step + k;
    for (Eigen::Index c = 0; c < series.channels(); ++c) out << ',' << series.values()(c, k);
    out << '\n';
  }
}

TimeSeries read_csv(std::istream& in, int step_seconds) {
  std::string line;
  if (!std::getline(in, line)) throw ConfigError("read_csv: empty input");
  std::vector<std::string> names;
  {
    std::stringstream ss(line);
    std::string cell;
    std::getline(ss, cell, ',');
    if (cell != "t") throw ConfigError("read_csv: first column must be 't'");
    while (std::getline(ss, cell, ',')) names.push_back(cell);
  }
  if (names.empty()) throw ConfigError("read_csv: no channels");
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::getline(ss, cell, ',');
    std::vector<double> row;
    while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
    if (row.size() != names.size()) {
      throw ConfigError("read_csv: row " + std::to_string(rows.size() + 1) + " has " +
                        std::to_string(row.size()) + " values, expected " +
                        std::to_string(names.size()));
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw ConfigError("read_csv: no data rows");
  Matrix values(static_cast<Eigen::Index>(names.size()), static_cast<Eigen::Index>(rows.size()));
  for (std::size_t k = 0; k < rows.size(); ++k) {
    for (std::size_t c = 0; c < names.size(); ++c) {
      values(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(k)) = rows[k][c];
    }
  }
  return TimeSeries(std::move(values), std::move(names), step_seconds);
}

}  // namespace deepc
