#include "deepc/controllers.hpp"
#include "deepc/errors.hpp"

#include <Eigen/QR>

namespace deepc {

namespace {

Matrix kkt_of(const HankelBlocks& b, const Matrix& h, double eps) {
  const auto n = b.width;
  const auto r = h.rows();
  Matrix m = Matrix::Zero(n + r, n + r);
  m.topLeftCorner(n, n) = b.y_p.transpose() * b.y_p;
  m.topLeftCorner(n, n).diagonal().array() += eps;
  m.topRightCorner(n, r) = h.transpose();
  m.bottomLeftCorner(r, n) = h;
  return m;
}

// Returns M^-1, or pinv(M) when eps = 0 and M is singular by construction.
Matrix invert_kkt(const Matrix& m, double eps, bool& singular) {
  const Matrix eye = Matrix::Identity(m.rows(), m.cols());
  if (eps > 0.0) {
    Eigen::FullPivLU<Matrix> lu(m);
    lu.setThreshold(1e-13);
    singular = !lu.isInvertible();
    if (singular) {
      throw NumericalError("bi-level DeePC: KKT matrix M is singular (rank " +
                           std::to_string(lu.rank()) + " of " + std::to_string(m.rows()) +
                           "); increase epsilon_g or collect more identification data");
    }
    return lu.solve(eye);
  }
  Eigen::CompleteOrthogonalDecomposition<Matrix> cod(m);
  cod.setThreshold(1e-12);
  singular = cod.rank() < m.rows();
  return cod.pseudoInverse();
}

}  // namespace

BilevelDeepc::BilevelDeepc(HankelBlocks blocks, const ControllerConfig& config, Normalization norm)
    : Controller("bl", config, std::move(norm)), blocks_(std::move(blocks)) {
  if (blocks_.dims.t_ini != config_.t_ini || blocks_.dims.t_f != config_.t_f) {
    throw DimensionError("controller bl: Hankel depth does not match the config");
  }
  h_ = blocks_.exogenous();
  m_ = kkt_of(blocks_, h_, config_.epsilon_g);
  minv_ = invert_kkt(m_, config_.epsilon_g, singular_);

  // Decision vector [g; kappa; u; y].
  const auto n_g = blocks_.width;
  const auto r = h_.rows();
  const auto t_f = config_.t_f;
  const auto t_ini = config_.t_ini;
  const auto n = n_g + r + 2 * t_f;
  base_ = QpProblem(n);
  base_.P.diagonal().head(n_g + r).setConstant(2.0 * config_.tiny_reg);
  base_.P.diagonal().tail(t_f).setConstant(2.0);
  base_.a_eq = Matrix::Zero(n_g + r + t_f, n);
  base_.b_eq = Vector::Zero(n_g + r + t_f);
  base_.a_eq.topLeftCorner(n_g + r, n_g + r) = m_;
  const auto u_row = n_g + (1 + blocks_.dims.n_w) * t_ini;
  base_.a_eq.block(u_row, n_g + r, t_f, t_f) = -Matrix::Identity(t_f, t_f);
  base_.a_eq.block(n_g + r, 0, t_f, n_g) = blocks_.y_f;
  base_.a_eq.block(n_g + r, n_g + r + t_f, t_f, t_f) = -Matrix::Identity(t_f, t_f);
  base_.lb.segment(n_g + r, t_f).setConstant(u_lower_);
  base_.ub.segment(n_g + r, t_f).setConstant(u_upper_);
  std::vector<Eigen::Index> u_idx(static_cast<std::size_t>(t_f));
  for (Eigen::Index i = 0; i < t_f; ++i) u_idx[static_cast<std::size_t>(i)] = n_g + r + i;
  solver_ = QpSolver(base_, config_.qp, std::move(u_idx));
}

Vector BilevelDeepc::inner_rhs(const IniWindow& ini, const Matrix& w_f, const Vector& u) const {
  const auto n_g = blocks_.width;
  const auto t_f = config_.t_f;
  const Vector w_flat = flatten(w_f);
  if (ini.y.size() != blocks_.y_p.rows() || ini.u.size() != blocks_.u_p.rows() ||
      ini.w.size() != blocks_.w_p.rows() || u.size() != t_f || w_flat.size() != blocks_.w_f.rows()) {
    throw DimensionError("controller bl: initialization window or forecast has wrong size");
  }
  Vector rhs(n_g + h_.rows());
  rhs << blocks_.y_p.transpose() * ini.y, ini.u, ini.w, u, w_flat;
  return rhs;
}

Vector BilevelDeepc::inner_solution(const IniWindow& ini, const Matrix& w_f,
                                    const Vector& u) const {
  return minv_ * inner_rhs(ini, w_f, u);
}

AffinePredictor BilevelDeepc::predictor(const IniWindow& ini, const Matrix& w_f) const {
  const auto n_g = blocks_.width;
  const auto t_f = config_.t_f;
  const auto u_col = n_g + (1 + blocks_.dims.n_w) * config_.t_ini;
  AffinePredictor pred;
  pred.p_u = blocks_.y_f * minv_.block(0, u_col, n_g, t_f);
  pred.p_0 = blocks_.y_f * (minv_.topRows(n_g) * inner_rhs(ini, w_f, Vector::Zero(t_f)));
  return pred;
}

double BilevelDeepc::stationarity_residual(const IniWindow& ini, const Vector& g,
                                           const Vector& kappa) const {
  const auto n_g = blocks_.width;
  const Vector r = m_.topLeftCorner(n_g, n_g) * g + h_.transpose() * kappa -
                   blocks_.y_p.transpose() * ini.y;
  return r.cwiseAbs().maxCoeff();
}

Plan BilevelDeepc::plan(const StepContext& ctx) const {
  check_context(ctx);
  return plan(deepc_window(ctx), ctx.w_future, ctx.y_ref.head(config_.t_f));
}

Vector BilevelDeepc::predict(const StepContext& ctx, const Vector& u_norm) const {
  check_context(ctx);
  return predictor(deepc_window(ctx), ctx.w_future)(u_norm);
}

Plan BilevelDeepc::plan(const IniWindow& ini, const Matrix& w_f, const Vector& y_ref) const {
  const auto n_g = blocks_.width;
  const auto r = h_.rows();
  const auto t_f = config_.t_f;
  const auto n_w = blocks_.dims.n_w;
  if (y_ref.size() != t_f) throw DimensionError("controller bl: reference length != T_f");

  Vector b = base_.b_eq;
  b.head(n_g + r) = inner_rhs(ini, w_f, Vector::Zero(t_f));
  Vector q = base_.q;
  q.tail(t_f) = -2.0 * y_ref;

  // u = u_bar + K w_f with K strictly block-lower-triangular. Minimizing the
  // tiny regularizer over the split gives u_i^2 / (1 + |w_{<i}|^2) per step.
  const Vector w_flat = flatten(w_f);
  Vector s(t_f);
  for (Eigen::Index i = 0; i < t_f; ++i) s(i) = w_flat.head(i * n_w).squaredNorm();
  const Vector delta = (2.0 * config_.tiny_reg) * (1.0 + s.array()).inverse().matrix();

  const QpSolution sol = solve_or_throw(solver_, q, b, base_.lb, base_.ub, delta);
  Plan plan = finish_plan(sol, sol.x.segment(n_g + r, t_f), sol.x.tail(t_f));
  plan.g = sol.x.head(n_g);
  plan.kappa = sol.x.segment(n_g, r);
  plan.u_bar.resize(t_f);
  plan.K = Matrix::Zero(t_f, n_w * t_f);
  for (Eigen::Index i = 0; i < t_f; ++i) {
    const double c = plan.u_norm(i) / (1.0 + s(i));
    plan.u_bar(i) = c;
    plan.K.row(i).head(i * n_w) = c * w_flat.head(i * n_w).transpose();
  }
  plan.stationarity = stationarity_residual(ini, plan.g, plan.kappa);
  return plan;
}

AffinePredictor build_bl_predictor(const HankelBlocks& blocks, double epsilon_g,
                                   const IniWindow& ini, const Matrix& w_f) {
  ControllerConfig cfg;
  cfg.t_ini = blocks.dims.t_ini;
  cfg.t_f = blocks.dims.t_f;
  cfg.epsilon_g = epsilon_g;
  cfg.constrain_input = false;
  Normalization norm;
  norm.u = Scaler{Vector::Zero(blocks.dims.n_u), Vector::Ones(blocks.dims.n_u)};
  norm.w = Scaler{Vector::Zero(blocks.dims.n_w), Vector::Ones(blocks.dims.n_w)};
  norm.y = Scaler{Vector::Zero(blocks.dims.n_y), Vector::Ones(blocks.dims.n_y)};
  return BilevelDeepc(blocks, cfg, norm).predictor(ini, w_f);
}

}  // namespace deepc
