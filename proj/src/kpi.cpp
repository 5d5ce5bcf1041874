#include "deepc/errors.hpp"
#include "deepc/harness.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>
#include <sstream>

namespace deepc {

KpiRecord compute_kpis(const std::vector<double>& y, const std::vector<double>& y_ref,
                       const std::vector<double>& u, const std::vector<double>& solve_ms,
                       Eigen::Index settle_steps) {
  const auto n = static_cast<Eigen::Index>(y.size());
  if (static_cast<Eigen::Index>(y_ref.size()) != n || static_cast<Eigen::Index>(u.size()) != n) {
    throw DimensionError("compute_kpis: y, y_ref and u lengths differ");
  }
  if (settle_steps < 0 || n <= settle_steps + 2) {
    throw ConfigError("compute_kpis: need more than settle_steps + 2 = " +
                      std::to_string(settle_steps + 2) + " samples, got " + std::to_string(n));
  }
  KpiRecord k;
  const auto s = static_cast<std::size_t>(settle_steps);
  const std::size_t m = y.size() - s;
  k.samples = static_cast<Eigen::Index>(m);

  double sq = 0.0, err = 0.0, u_mean = 0.0;
  for (std::size_t t = s; t < y.size(); ++t) {
    const double e = y[t] - y_ref[t];
    sq += e * e;
    err += e;
    u_mean += u[t];
  }
  k.rmse_k = std::sqrt(sq / static_cast<double>(m));
  k.mean_error_k = err / static_cast<double>(m);
  u_mean /= static_cast<double>(m);

  double num = 0.0, den = 0.0;
  for (std::size_t t = s; t < y.size(); ++t) {
    const double d = u[t] - u_mean;
    den += d * d;
    if (t + 1 < y.size()) num += d * (u[t + 1] - u_mean);
  }
  if (den <= 1e-300) {
    k.smoothness = 1.0;
    k.smoothness_undefined = true;
  } else {
    k.smoothness = num / den;
  }

  const std::size_t day = std::min<std::size_t>(kStepsPerDay, m);
  double bias = 0.0;
  for (std::size_t t = y.size() - day; t < y.size(); ++t) bias += y[t] - y_ref[t];
  k.last_day_bias_k = bias / static_cast<double>(day);

  if (!solve_ms.empty()) {
    double total = 0.0;
    for (double v : solve_ms) total += v;
    k.mean_solve_ms = total / static_cast<double>(solve_ms.size());
    k.max_solve_ms = *std::max_element(solve_ms.begin(), solve_ms.end());
  }
  return k;
}

KpiRecord compute_kpis(const SimResult& result, Eigen::Index settle_steps) {
  std::vector<double> y, r, u, ms;
  for (const auto& rec : result.records) {
    y.push_back(rec.y_true);
    r.push_back(rec.y_ref);
    u.push_back(rec.u);
    ms.push_back(rec.solve_ms);
  }
  return compute_kpis(y, r, u, ms, settle_steps);
}

void write_trajectory(std::ostream& out, const SimResult& result) {
  out << "t,y_ref,y_true,y_meas,u";
  for (const auto& n : result.w_names) out << ',' << n;
  out << ",status,iterations,solve_ms,stationarity\n";
  out << std::setprecision(std::numeric_limits<double>::max_digits10);
  for (const auto& r : result.records) {
    out << r.t << ',' << r.y_ref << ',' << r.y_true << ',' << r.y_meas << ',' << r.u;
    for (Eigen::Index c = 0; c < r.w.size(); ++c) out << ',' << r.w(c);
    out << ',' << static_cast<int>(r.status) << ',' << r.iterations << ',' << r.solve_ms << ','
        << r.stationarity << '\n';
  }
}

SimResult read_trajectory(std::istream& in) {
  TimeSeries ts;
  try {
    ts = read_csv(in);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("trajectory CSV: ") + e.what());
  }
  const auto& names = ts.names();
  auto col = [&](const std::string& name, bool required) -> Eigen::Index {
    const auto it = std::find(names.begin(), names.end(), name);
    if (it == names.end()) {
      if (required) throw ConfigError("trajectory CSV: missing column '" + name + "'");
      return -1;
    }
    return it - names.begin();
  };
  const auto c_y = col("y_true", true);
  const auto c_r = col("y_ref", true);
  const auto c_u = col("u", true);
  const auto c_ms = col("solve_ms", false);
  const auto c_ym = col("y_meas", false);

  SimResult result;
  const Matrix& v = ts.values();
  for (Eigen::Index k = 0; k < ts.steps(); ++k) {
    StepRecord r;
    r.t = k;
    r.y_true = v(c_y, k);
    r.y_ref = v(c_r, k);
    r.u = v(c_u, k);
    r.y_meas = c_ym >= 0 ? v(c_ym, k) : r.y_true;
    r.solve_ms = c_ms >= 0 ? v(c_ms, k) : 0.0;
    result.records.push_back(std::move(r));
  }
  return result;
}

namespace {

nlohmann::json kpi_json(const KpiRecord& k) {
  return {
      {"rmse_K", k.rmse_k},
      {"smoothness", k.smoothness},
      {"smoothness_undefined", k.smoothness_undefined},
      {"mean_error_K", k.mean_error_k},
      {"last_day_bias_K", k.last_day_bias_k},
      {"mean_solve_ms", k.mean_solve_ms},
      {"max_solve_ms", k.max_solve_ms},
      {"samples", k.samples},
  };
}

}  // namespace

std::string kpis_to_json(const std::vector<ComparisonRow>& rows, const ExperimentConfig* config) {
  nlohmann::json j;
  nlohmann::json list = nlohmann::json::array();
  for (const auto& r : rows) {
    nlohmann::json e = {{"controller", r.controller}, {"failed", r.failed}};
    if (r.failed) {
      e["failure"] = r.failure_message;
    } else {
      e["kpis"] = kpi_json(r.kpis);
    }
    list.push_back(e);
  }
  j["controllers"] = list;
  if (config) j["config"] = nlohmann::json::parse(experiment_config_to_json(*config));
  return j.dump(2);
}

std::string comparison_markdown(const std::vector<ComparisonRow>& rows) {
  std::ostringstream out;
  out << "| controller | RMSE [K] | smoothness | mean error [K] | last-day bias [K] | mean solve "
         "[ms] | max solve [ms] |\n";
  out << "|---|---|---|---|---|---|---|\n";
  out << std::fixed;
  for (const auto& r : rows) {
    if (r.failed) {
      out << "| " << r.controller << " | failed: " << r.failure_message << " | | | | | |\n";
      continue;
    }
    const auto& k = r.kpis;
    out << "| " << r.controller << " | " << std::setprecision(4) << k.rmse_k << " | "
        << k.smoothness << (k.smoothness_undefined ? "*" : "") << " | " << k.mean_error_k
        << " | " << k.last_day_bias_k << " | " << std::setprecision(3) << k.mean_solve_ms << " | "
        << k.max_solve_ms << " |\n";
  }
  return out.str();
}

}  // namespace deepc
