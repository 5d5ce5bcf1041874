#include "deepc/controllers.hpp"
#include "deepc/errors.hpp"

#include <iostream>

namespace deepc {

namespace {

Matrix iv_gain(const HankelBlocks& b, bool& rank_deficient) {
  const Matrix h_hat = b.h_hat();
  const auto rank = numerical_rank(h_hat);
  rank_deficient = rank < h_hat.rows();
  if (rank_deficient) {
    std::cerr << "warning: IV DeePC: H_hat has rank " << rank << " < " << h_hat.rows()
              << " rows; using the pseudo-inverse\n";
  }
  return b.y_f * pinv(h_hat);
}

// Column offsets of v_hat = [u_ini; w_ini; y_ini; u; w_f].
struct VhatLayout {
  Eigen::Index u_f;
  Eigen::Index size;
};

VhatLayout layout_of(const HankelBlocks& b) {
  return {b.u_p.rows() + b.w_p.rows() + b.y_p.rows(), b.dims.h_hat_rows()};
}

AffinePredictor split_gain(const HankelBlocks& b, const Matrix& gain, const IniWindow& ini,
                           const Matrix& w_f) {
  const auto lay = layout_of(b);
  const auto t_f = b.u_f.rows();
  const Vector w_flat = flatten(w_f);
  if (ini.u.size() != b.u_p.rows() || ini.w.size() != b.w_p.rows() ||
      ini.y.size() != b.y_p.rows() || w_flat.size() != b.w_f.rows()) {
    throw DimensionError("IV predictor: initialization window or forecast has wrong size");
  }
  Vector v(lay.size);
  v << ini.u, ini.w, ini.y, Vector::Zero(t_f), w_flat;
  AffinePredictor pred;
  pred.p_u = gain.middleCols(lay.u_f, t_f);
  pred.p_0 = gain * v;
  return pred;
}

}  // namespace

IvDeepc::IvDeepc(HankelBlocks blocks, const ControllerConfig& config, Normalization norm)
    : Controller("iv", config, std::move(norm)), blocks_(std::move(blocks)) {
  if (blocks_.dims.t_ini != config_.t_ini || blocks_.dims.t_f != config_.t_f) {
    throw DimensionError("controller iv: Hankel depth does not match the config");
  }
  gain_ = iv_gain(blocks_, rank_deficient_);
  const auto t_f = config_.t_f;
  IniWindow zero{Vector::Zero(blocks_.u_p.rows()), Vector::Zero(blocks_.w_p.rows()),
                 Vector::Zero(blocks_.y_p.rows())};
  p_u_ = predictor(zero, Matrix::Zero(blocks_.dims.n_w, t_f)).p_u;
  QpProblem p(t_f);
  p.P = 2.0 * p_u_.transpose() * p_u_;
  p.lb.setConstant(u_lower_);
  p.ub.setConstant(u_upper_);
  solver_ = QpSolver(std::move(p), config_.qp);
}

AffinePredictor IvDeepc::predictor(const IniWindow& ini, const Matrix& w_f) const {
  return split_gain(blocks_, gain_, ini, w_f);
}

Plan IvDeepc::plan(const StepContext& ctx) const {
  check_context(ctx);
  return plan(deepc_window(ctx), ctx.w_future, ctx.y_ref.head(config_.t_f));
}

Vector IvDeepc::predict(const StepContext& ctx, const Vector& u_norm) const {
  check_context(ctx);
  return predictor(deepc_window(ctx), ctx.w_future)(u_norm);
}

Plan IvDeepc::plan(const IniWindow& ini, const Matrix& w_f, const Vector& y_ref) const {
  const auto t_f = config_.t_f;
  if (y_ref.size() != t_f) throw DimensionError("controller iv: reference length != T_f");
  const AffinePredictor pred = predictor(ini, w_f);

  const auto& base = solver_.problem();
  const Vector q = 2.0 * pred.p_u.transpose() * (pred.p_0 - y_ref);
  const QpSolution sol = solve_or_throw(solver_, q, base.b_eq, base.lb, base.ub);
  return finish_plan(sol, sol.x, pred(sol.x));
}

AffinePredictor build_iv_predictor(const HankelBlocks& blocks, const IniWindow& ini,
                                   const Matrix& w_f) {
  bool deficient = false;
  return split_gain(blocks, iv_gain(blocks, deficient), ini, w_f);
}

}  // namespace deepc
