#include "deepc/controllers.hpp"
#include "deepc/errors.hpp"

#include <algorithm>
#include <cmath>

namespace deepc {

void ControllerConfig::validate() const {
  if (t_ini < 1) throw ConfigError("controller: T_ini must be >= 1");
  if (t_f < 1) throw ConfigError("controller: T_f must be >= 1");
  if (!(lambda_g > 0.0)) throw ConfigError("controller: lambda_g must be > 0");
  if (!(epsilon_g >= 0.0)) throw ConfigError("controller: epsilon_g must be >= 0");
  if (!(tiny_reg >= 0.0)) throw ConfigError("controller: tiny_reg must be >= 0");
  if (lambda_basic && !(*lambda_basic > 0.0)) throw ConfigError("controller: lambda must be > 0");
  if (constrain_input && !(u_min < u_max)) throw ConfigError("controller: need u_min < u_max");
}

double bilevel_epsilon(Eigen::Index t_ini, double noise_variance) {
  return static_cast<double>(t_ini * t_ini) * noise_variance;
}

Vector flatten(const Matrix& m) { return m.reshaped(); }

IniWindow deepc_window(const StepContext& ctx) {
  const auto t_ini = ctx.u_past.size();
  IniWindow ini;
  ini.u = ctx.u_past;
  ini.w = flatten(ctx.w_past);
  ini.y = ctx.y_past.head(t_ini);
  return ini;
}

IniWindow arx_window(const StepContext& ctx) {
  const auto t_ini = ctx.u_past.size();
  IniWindow win;
  win.u = ctx.u_past.tail(t_ini - 1);
  Matrix w(ctx.w_past.rows(), t_ini);
  w << ctx.w_past.rightCols(t_ini - 1), ctx.w_future.col(0);
  win.w = flatten(w);
  win.y = ctx.y_past.tail(t_ini);
  return win;
}

Controller::Controller(std::string name, const ControllerConfig& config, Normalization norm)
    : name_(std::move(name)), config_(config), norm_(std::move(norm)) {
  config_.validate();
  if (norm_.u.channels() != 1 || norm_.y.channels() != 1) {
    throw DimensionError("controller: only a single input and a single output are supported");
  }
  if (config_.constrain_input) {
    u_lower_ = norm_.u.apply(0, config_.u_min);
    u_upper_ = norm_.u.apply(0, config_.u_max);
  }
}

void Controller::check_context(const StepContext& ctx) const {
  const auto t_ini = config_.t_ini;
  const auto t_f = config_.t_f;
  const auto n_w = norm_.w.channels();
  if (ctx.u_past.size() != t_ini || ctx.y_past.size() != t_ini + 1 ||
      ctx.w_past.rows() != n_w || ctx.w_past.cols() != t_ini || ctx.w_future.rows() != n_w ||
      ctx.w_future.cols() != t_f || ctx.y_ref.size() != t_f + 1) {
    throw DimensionError("controller " + name_ + ": step context does not match T_ini = " +
                         std::to_string(t_ini) + ", T_f = " + std::to_string(t_f) +
                         ", n_w = " + std::to_string(n_w));
  }
}

QpSolution Controller::solve_or_throw(const QpSolver& solver, const Vector& q,
                                      const Vector& b_eq, const Vector& lb, const Vector& ub,
                                      const Vector& diag_delta) const {
  QpSolution sol = solver.solve(q, b_eq, lb, ub, diag_delta);
  if (sol.status != QpStatus::kOptimal) {
    throw ControllerError("controller " + name_ + ": QP " + to_string(sol.status) + " after " +
                              std::to_string(sol.iterations) + " iterations",
                          problem_to_string(solver.instance(q, b_eq, lb, ub, diag_delta)));
  }
  return sol;
}

Plan Controller::finish_plan(const QpSolution& sol, Vector u_norm, Vector y_norm) const {
  Plan plan;
  plan.u_norm = std::move(u_norm);
  plan.y_norm = std::move(y_norm);
  plan.u = plan.u_norm.unaryExpr([&](double v) { return norm_.u.invert(0, v); });
  if (config_.constrain_input) {
    plan.u = plan.u.cwiseMax(config_.u_min).cwiseMin(config_.u_max);
  }
  plan.y = plan.y_norm.unaryExpr([&](double v) { return norm_.y.invert(0, v); });
  plan.status = sol.status;
  plan.iterations = sol.iterations;
  plan.residuals = sol.residuals;
  return plan;
}

std::string to_string(ControllerKind kind) {
  switch (kind) {
    case ControllerKind::kBasic: return "basic";
    case ControllerKind::kProjection: return "op";
    case ControllerKind::kBilevel: return "bl";
    case ControllerKind::kInstrumental: return "iv";
    case ControllerKind::kArx: return "arx";
  }
  return "unknown";
}

ControllerKind controller_kind_from_string(const std::string& s) {
  if (s == "basic") return ControllerKind::kBasic;
  if (s == "op") return ControllerKind::kProjection;
  if (s == "bl") return ControllerKind::kBilevel;
  if (s == "iv") return ControllerKind::kInstrumental;
  if (s == "arx") return ControllerKind::kArx;
  throw ConfigError("unknown controller '" + s + "' (expected basic, op, bl, iv or arx)");
}

std::unique_ptr<Controller> make_controller(ControllerKind kind, const IdDataset& dataset,
                                            const ControllerConfig& config) {
  config.validate();
  Normalization norm{dataset.scaler_u(), dataset.scaler_w(), dataset.scaler_y()};
  if (kind == ControllerKind::kArx) {
    return std::make_unique<ArxMpc>(identify_arx(dataset, config.t_ini), config, norm);
  }
  HankelBlocks blocks = split_blocks(dataset, config.t_ini, config.t_f);
  switch (kind) {
    case ControllerKind::kBasic:
      return std::make_unique<BasicDeepc>(std::move(blocks), config, norm);
    case ControllerKind::kProjection:
      return std::make_unique<ProjectionDeepc>(std::move(blocks), config, norm);
    case ControllerKind::kBilevel:
      return std::make_unique<BilevelDeepc>(std::move(blocks), config, norm);
    case ControllerKind::kInstrumental:
      return std::make_unique<IvDeepc>(std::move(blocks), config, norm);
    case ControllerKind::kArx:
      break;
  }
  throw ConfigError("make_controller: unsupported controller kind");
}

}  // namespace deepc
