#include "deepc/errors.hpp"
#include "deepc/harness.hpp"

#include <json.hpp>

#include <fstream>
#include <set>
#include <sstream>

namespace deepc {

using nlohmann::json;

void ExperimentConfig::validate() const {
  controller.validate();
  if (id_length < controller.t_ini + controller.t_f) {
    throw ConfigError("identification length " + std::to_string(id_length) +
                      " is shorter than T_ini + T_f = " +
                      std::to_string(controller.t_ini + controller.t_f));
  }
  if (!(excitation_lo < excitation_hi)) throw ConfigError("excitation: need lo < hi");
  if (id_ambient_jitter < 0 || id_solar_jitter < 0 || id_gains_jitter < 0) {
    throw ConfigError("identification jitter amplitudes must be >= 0");
  }
  if (noise_amplitude < 0) throw ConfigError("noise_amplitude must be >= 0");
  if (sim_steps < 1) throw ConfigError("simulation steps must be >= 1");
  if (settle_steps < 0 || sim_steps <= settle_steps + 2) {
    throw ConfigError("simulation must be longer than settle_steps + 2");
  }
  if (ref_period < 1) throw ConfigError("reference period must be >= 1 step");
  if (controllers.empty()) throw ConfigError("no controllers selected");
  if (gains_observed && gains_enabled && id_gains_jitter == 0.0) {
    throw ConfigError(
        "gains_observed with constant gains leaves a zero-variance channel; set "
        "identification.gains_jitter > 0");
  }
}

std::vector<Eigen::Index> ExperimentConfig::observed_channels() const {
  if (gains_observed) return {0, 1, 2};
  return {0, 1};
}

namespace {

// Copies j[key] into out when present and marks the key as consumed.
template <typename T>
void read(const json& j, const char* key, T& out, std::set<std::string>& seen) {
  seen.insert(key);
  if (!j.contains(key) || j.at(key).is_null()) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config key '") + key + "': " + e.what());
  }
}

void reject_unknown(const json& j, const std::set<std::string>& seen, const std::string& where) {
  for (const auto& [key, value] : j.items()) {
    if (!seen.count(key)) throw ConfigError("unknown config key '" + where + key + "'");
  }
}

const json& section(const json& root, const char* name) {
  static const json empty = json::object();
  if (!root.contains(name)) return empty;
  const auto& s = root.at(name);
  if (!s.is_object()) throw ConfigError(std::string("config section '") + name + "' must be an object");
  return s;
}

}  // namespace

ExperimentConfig experiment_config_from_json(const std::string& text) {
  json root;
  try {
    root = json::parse(text, nullptr, true, true);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  if (!root.is_object()) throw ConfigError("config: top level must be an object");

  ExperimentConfig c;
  std::set<std::string> top{"identification", "weather", "simulation", "controller", "qp",
                            "controllers", "plant_file", "output_dir"};
  reject_unknown(root, top, "");

  {
    const auto& j = section(root, "identification");
    std::set<std::string> seen;
    std::string centering = c.centering == Centering::kMean ? "mean" : "none";
    read(j, "length", c.id_length, seen);
    read(j, "excitation_seed", c.excitation_seed, seen);
    read(j, "excitation_lo", c.excitation_lo, seen);
    read(j, "excitation_hi", c.excitation_hi, seen);
    read(j, "weather_seed", c.id_weather_seed, seen);
    read(j, "ambient_jitter", c.id_ambient_jitter, seen);
    read(j, "solar_jitter", c.id_solar_jitter, seen);
    read(j, "gains_jitter", c.id_gains_jitter, seen);
    read(j, "noise_seed", c.id_noise_seed, seen);
    read(j, "noise_free", c.noise_free_identification, seen);
    read(j, "centering", centering, seen);
    reject_unknown(j, seen, "identification.");
    if (centering == "mean") {
      c.centering = Centering::kMean;
    } else if (centering == "none") {
      c.centering = Centering::kNone;
    } else {
      throw ConfigError("identification.centering must be 'mean' or 'none'");
    }
  }
  {
    const auto& j = section(root, "weather");
    std::set<std::string> seen;
    read(j, "amb_mean", c.weather.amb_mean, seen);
    read(j, "amb_amp", c.weather.amb_amp, seen);
    read(j, "t_peak", c.weather.t_peak, seen);
    read(j, "sol_max", c.weather.sol_max, seen);
    read(j, "gains_level", c.weather.gains_level, seen);
    reject_unknown(j, seen, "weather.");
  }
  {
    const auto& j = section(root, "simulation");
    std::set<std::string> seen;
    read(j, "gains_enabled", c.gains_enabled, seen);
    read(j, "gains_observed", c.gains_observed, seen);
    read(j, "noise_amplitude", c.noise_amplitude, seen);
    read(j, "noise_seed", c.noise_seed, seen);
    read(j, "steps", c.sim_steps, seen);
    read(j, "settle_steps", c.settle_steps, seen);
    read(j, "ref_low", c.ref_low, seen);
    read(j, "ref_high", c.ref_high, seen);
    read(j, "ref_period", c.ref_period, seen);
    reject_unknown(j, seen, "simulation.");
  }
  {
    const auto& j = section(root, "controller");
    std::set<std::string> seen;
    auto& cc = c.controller;
    read(j, "t_ini", cc.t_ini, seen);
    read(j, "t_f", cc.t_f, seen);
    seen.insert("lambda");
    if (j.contains("lambda") && !j.at("lambda").is_null()) {
      double lambda = 0.0;
      std::set<std::string> tmp;
      read(j, "lambda", lambda, tmp);
      cc.lambda_basic = lambda;
    }
    read(j, "lambda_g", cc.lambda_g, seen);
    read(j, "epsilon_g", cc.epsilon_g, seen);
    read(j, "tiny_reg", cc.tiny_reg, seen);
    read(j, "u_min", cc.u_min, seen);
    read(j, "u_max", cc.u_max, seen);
    read(j, "constrain_input", cc.constrain_input, seen);
    reject_unknown(j, seen, "controller.");
  }
  {
    const auto& j = section(root, "qp");
    std::set<std::string> seen;
    auto& q = c.controller.qp;
    read(j, "eps_abs", q.eps_abs, seen);
    read(j, "eps_rel", q.eps_rel, seen);
    read(j, "max_iter", q.max_iter, seen);
    read(j, "rho", q.rho, seen);
    read(j, "sigma", q.sigma, seen);
    read(j, "alpha", q.alpha, seen);
    read(j, "scaling_iters", q.scaling_iters, seen);
    read(j, "polish", q.polish, seen);
    reject_unknown(j, seen, "qp.");
  }
  if (root.contains("controllers")) {
    std::vector<std::string> names;
    std::set<std::string> seen;
    read(root, "controllers", names, seen);
    c.controllers.clear();
    for (const auto& n : names) c.controllers.push_back(controller_kind_from_string(n));
  }
  if (root.contains("plant_file")) c.plant_file = root.at("plant_file").get<std::string>();
  if (root.contains("output_dir")) c.output_dir = root.at("output_dir").get<std::string>();

  c.validate();
  return c;
}

ExperimentConfig load_experiment_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return experiment_config_from_json(ss.str());
}

std::string experiment_config_to_json(const ExperimentConfig& c) {
  json j;
  j["identification"] = {
      {"length", c.id_length},
      {"excitation_seed", c.excitation_seed},
      {"excitation_lo", c.excitation_lo},
      {"excitation_hi", c.excitation_hi},
      {"weather_seed", c.id_weather_seed},
      {"ambient_jitter", c.id_ambient_jitter},
      {"solar_jitter", c.id_solar_jitter},
      {"gains_jitter", c.id_gains_jitter},
      {"noise_seed", c.id_noise_seed},
      {"noise_free", c.noise_free_identification},
      {"centering", c.centering == Centering::kMean ? "mean" : "none"},
  };
  j["weather"] = {
      {"amb_mean", c.weather.amb_mean},   {"amb_amp", c.weather.amb_amp},
      {"t_peak", c.weather.t_peak},       {"sol_max", c.weather.sol_max},
      {"gains_level", c.weather.gains_level},
  };
  j["simulation"] = {
      {"gains_enabled", c.gains_enabled}, {"gains_observed", c.gains_observed},
      {"noise_amplitude", c.noise_amplitude}, {"noise_seed", c.noise_seed},
      {"steps", c.sim_steps},             {"settle_steps", c.settle_steps},
      {"ref_low", c.ref_low},             {"ref_high", c.ref_high},
      {"ref_period", c.ref_period},
  };
  const auto& cc = c.controller;
  j["controller"] = {
      {"t_ini", cc.t_ini},         {"t_f", cc.t_f},
      {"lambda", cc.lambda_basic ? json(*cc.lambda_basic) : json(nullptr)},
      {"lambda_g", cc.lambda_g},   {"epsilon_g", cc.epsilon_g},
      {"tiny_reg", cc.tiny_reg},   {"u_min", cc.u_min},
      {"u_max", cc.u_max},         {"constrain_input", cc.constrain_input},
  };
  j["qp"] = {
      {"eps_abs", cc.qp.eps_abs}, {"eps_rel", cc.qp.eps_rel},
      {"max_iter", cc.qp.max_iter}, {"rho", cc.qp.rho},
      {"sigma", cc.qp.sigma},     {"alpha", cc.qp.alpha},
      {"scaling_iters", cc.qp.scaling_iters}, {"polish", cc.qp.polish},
  };
  json names = json::array();
  for (auto k : c.controllers) names.push_back(to_string(k));
  j["controllers"] = names;
  j["plant_file"] = c.plant_file;
  j["output_dir"] = c.output_dir;
  return j.dump(2);
}

}  // namespace deepc
