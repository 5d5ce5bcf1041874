#include "deepc/controllers.hpp"
#include "deepc/errors.hpp"

namespace deepc {

namespace {

// Decision vector [g; u; y].
QpProblem build_hankel_qp(const HankelBlocks& b, const Matrix& g_weight) {
  const auto n_g = b.width;
  const auto t_f = b.dims.t_f;
  const auto n = n_g + 2 * t_f;
  const auto r_ini = b.u_p.rows() + b.w_p.rows() + b.y_p.rows();
  const auto m = r_ini + b.u_f.rows() + b.w_f.rows() + b.y_f.rows();

  QpProblem p(n);
  p.P.topLeftCorner(n_g, n_g) = 2.0 * g_weight;
  p.P.bottomRightCorner(t_f, t_f).diagonal().setConstant(2.0);

  p.a_eq = Matrix::Zero(m, n);
  p.b_eq = Vector::Zero(m);
  Eigen::Index row = 0;
  p.a_eq.block(row, 0, b.u_p.rows(), n_g) = b.u_p;
  row += b.u_p.rows();
  p.a_eq.block(row, 0, b.w_p.rows(), n_g) = b.w_p;
  row += b.w_p.rows();
  p.a_eq.block(row, 0, b.y_p.rows(), n_g) = b.y_p;
  row += b.y_p.rows();
  p.a_eq.block(row, 0, t_f, n_g) = b.u_f;
  p.a_eq.block(row, n_g, t_f, t_f) = -Matrix::Identity(t_f, t_f);
  row += t_f;
  p.a_eq.block(row, 0, b.w_f.rows(), n_g) = b.w_f;
  row += b.w_f.rows();
  p.a_eq.block(row, 0, t_f, n_g) = b.y_f;
  p.a_eq.block(row, n_g + t_f, t_f, t_f) = -Matrix::Identity(t_f, t_f);
  return p;
}

}  // namespace

BasicDeepc::BasicDeepc(HankelBlocks blocks, const ControllerConfig& config, Normalization norm)
    : BasicDeepc("basic", std::move(blocks), config, std::move(norm), Matrix()) {}

BasicDeepc::BasicDeepc(std::string name, HankelBlocks blocks, const ControllerConfig& config,
                       Normalization norm, Matrix g_weight)
    : Controller(std::move(name), config, std::move(norm)), blocks_(std::move(blocks)) {
  if (blocks_.dims.t_ini != config_.t_ini || blocks_.dims.t_f != config_.t_f) {
    throw DimensionError("controller " + name_ + ": Hankel depth does not match the config");
  }
  if (g_weight.size() == 0) {
    if (!config_.lambda_basic) {
      throw ConfigError("basic DeePC needs an explicit regularization weight lambda");
    }
    g_weight = *config_.lambda_basic * Matrix::Identity(blocks_.width, blocks_.width);
  }
  base_ = build_hankel_qp(blocks_, g_weight);
  const auto n_g = blocks_.width;
  base_.lb.segment(n_g, config_.t_f).setConstant(u_lower_);
  base_.ub.segment(n_g, config_.t_f).setConstant(u_upper_);
  solver_ = QpSolver(base_, config_.qp);
}

Plan BasicDeepc::plan(const StepContext& ctx) const {
  check_context(ctx);
  return plan(deepc_window(ctx), ctx.w_future, ctx.y_ref.head(config_.t_f));
}

Plan BasicDeepc::plan(const IniWindow& ini, const Matrix& w_f, const Vector& y_ref) const {
  return solve(ini, w_f, y_ref, nullptr);
}

Vector BasicDeepc::predict(const StepContext& ctx, const Vector& u_norm) const {
  check_context(ctx);
  return solve(deepc_window(ctx), ctx.w_future, ctx.y_ref.head(config_.t_f), &u_norm).y_norm;
}

Plan BasicDeepc::solve(const IniWindow& ini, const Matrix& w_f, const Vector& y_ref,
                       const Vector* pinned_u) const {
  const auto n_g = blocks_.width;
  const auto t_f = config_.t_f;
  if (y_ref.size() != t_f || w_f.cols() != t_f) {
    throw DimensionError("controller " + name_ + ": forecast/reference length != T_f");
  }
  Vector q = base_.q;
  Vector b = base_.b_eq;
  Vector lb = base_.lb;
  Vector ub = base_.ub;
  const Vector w_flat = flatten(w_f);
  Eigen::Index row = 0;
  b.segment(row, ini.u.size()) = ini.u;
  row += ini.u.size();
  b.segment(row, ini.w.size()) = ini.w;
  row += ini.w.size();
  b.segment(row, ini.y.size()) = ini.y;
  row += ini.y.size() + t_f;
  b.segment(row, w_flat.size()) = w_flat;
  if (row + w_flat.size() + t_f != b.size()) {
    throw DimensionError("controller " + name_ + ": initialization window has wrong size");
  }
  q.tail(t_f) = -2.0 * y_ref;
  if (pinned_u) {
    if (pinned_u->size() != t_f) throw DimensionError("predict: input plan length != T_f");
    lb.segment(n_g, t_f) = *pinned_u;
    ub.segment(n_g, t_f) = *pinned_u;
  }

  const QpSolution sol = solve_or_throw(solver_, q, b, lb, ub);
  Plan plan = finish_plan(sol, sol.x.segment(n_g, t_f), sol.x.tail(t_f));
  plan.g = sol.x.head(n_g);
  return plan;
}

ProjectionDeepc::ProjectionDeepc(HankelBlocks blocks, const ControllerConfig& config,
                                 Normalization norm)
    : ProjectionDeepc(blocks, config, std::move(norm), row_space_projector(blocks.h_hat())) {}

ProjectionDeepc::ProjectionDeepc(HankelBlocks blocks, const ControllerConfig& config,
                                 Normalization norm, Matrix projector)
    : BasicDeepc("op", std::move(blocks), config, std::move(norm),
                 config.lambda_g *
                     (Matrix::Identity(projector.rows(), projector.cols()) - projector)),
      projector_(std::move(projector)) {}

}  // namespace deepc
