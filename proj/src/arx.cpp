#include "deepc/controllers.hpp"
#include "deepc/errors.hpp"

#include <iostream>

namespace deepc {

Eigen::RowVectorXd ArxModel::regressor(const Vector& u, const Matrix& w, const Vector& y,
                                       Eigen::Index t) const {
  const auto lags = this->lags();
  const auto n_w = this->n_w();
  if (t < lags - 1 || t >= y.size()) throw DimensionError("ArxModel::regressor: t out of range");
  Eigen::RowVectorXd row((2 + n_w) * lags);
  for (Eigen::Index i = 0; i < lags; ++i) {
    row(i) = y(t - i);
    row(lags + i) = u(t - i);
    row.segment(2 * lags + i * n_w, n_w) = w.col(t - i).transpose();
  }
  return row;
}

Vector ArxModel::theta() const {
  Vector th((2 + n_w()) * lags());
  th << a, b, c.reshaped();
  return th;
}

std::pair<Matrix, Vector> arx_regression(const Vector& u, const Matrix& w, const Vector& y,
                                         Eigen::Index lags) {
  const auto steps = y.size();
  const auto n_w = w.rows();
  if (u.size() != steps || w.cols() != steps) {
    throw DimensionError("arx_regression: u, w, y lengths differ");
  }
  if (lags < 1) throw ConfigError("arx_regression: lags must be >= 1");
  const auto rows = steps - lags;
  if (rows < 1) throw DimensionError("arx_regression: need more than " + std::to_string(lags) + " samples");
  ArxModel shape;
  shape.a = Vector::Zero(lags);
  shape.b = Vector::Zero(lags);
  shape.c = Matrix::Zero(n_w, lags);
  Matrix phi(rows, (2 + n_w) * lags);
  Vector target(rows);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const auto t = r + lags - 1;
    phi.row(r) = shape.regressor(u, w, y, t);
    target(r) = y(t + 1);
  }
  return {std::move(phi), std::move(target)};
}

namespace {

std::string regressor_name(Eigen::Index col, Eigen::Index lags, Eigen::Index n_w,
                           const std::vector<std::string>& w_names) {
  // col indexes the exogenous block [u lags, w lags].
  if (col < lags) return "u[t-" + std::to_string(col) + "]";
  col -= lags;
  const auto lag = col / n_w;
  const auto ch = col % n_w;
  const std::string name = ch < static_cast<Eigen::Index>(w_names.size())
                               ? w_names[static_cast<std::size_t>(ch)]
                               : "w" + std::to_string(ch);
  return name + "[t-" + std::to_string(lag) + "]";
}

}  // namespace

ArxModel fit_arx(const Vector& u, const Matrix& w, const Vector& y, Eigen::Index lags,
                 const std::vector<std::string>& w_names) {
  const auto n_w = w.rows();
  auto [phi, target] = arx_regression(u, w, y, lags);
  if (phi.rows() < 10 * phi.cols()) {
    std::cerr << "warning: ARX fit with " << phi.rows() << " rows for " << phi.cols()
              << " regressors\n";
  }

  const Matrix exo = phi.rightCols((1 + n_w) * lags);
  if (numerical_rank(exo) < exo.cols()) {
    // Greedy scan: a column that does not raise the rank is collinear with earlier ones.
    std::string names;
    Matrix kept(exo.rows(), 0);
    for (Eigen::Index j = 0; j < exo.cols(); ++j) {
      Matrix trial(exo.rows(), kept.cols() + 1);
      trial << kept, exo.col(j);
      if (numerical_rank(trial) < trial.cols()) {
        if (!names.empty()) names += ", ";
        names += regressor_name(j, lags, n_w, w_names);
      } else {
        kept = std::move(trial);
      }
    }
    throw ConfigError("ARX identification: collinear regressors: " + names);
  }

  const Vector th = pinv(phi) * target;
  ArxModel m;
  m.a = th.head(lags);
  m.b = th.segment(lags, lags);
  m.c = th.tail(n_w * lags).reshaped(n_w, lags);
  m.residual_ss = (phi * th - target).squaredNorm();
  return m;
}

ArxModel identify_arx(const IdDataset& dataset, Eigen::Index t_ini) {
  if (dataset.n_u() != 1 || dataset.n_y() != 1) {
    throw DimensionError("identify_arx: only a single input and output are supported");
  }
  return fit_arx(dataset.u_normalized().row(0).transpose(), dataset.w_normalized(),
                 dataset.y_normalized().row(0).transpose(), t_ini, dataset.w().names());
}

AffinePredictor ArxModel::predictor(const IniWindow& window, const Matrix& w_f) const {
  const auto lags = this->lags();
  const auto n_w = this->n_w();
  const auto t_f = w_f.cols();
  if (window.u.size() != lags - 1 || window.y.size() != lags || window.w.size() != n_w * lags ||
      w_f.rows() != n_w) {
    throw DimensionError("ArxModel::predictor: lag window or forecast has wrong size");
  }
  const Matrix w_win = window.w.reshaped(n_w, lags);

  // Sample at time k + m as an affine form in u[k .. k+T_f-1].
  AffinePredictor pred;
  pred.p_u = Matrix::Zero(t_f, t_f);
  pred.p_0 = Vector::Zero(t_f);
  for (Eigen::Index j = 0; j < t_f; ++j) {
    for (Eigen::Index i = 0; i < lags; ++i) {
      const auto m = j - i;  // y[k+1+j] uses samples at k + m
      if (m >= 1) {
        pred.p_u.row(j) += a(i) * pred.p_u.row(m - 1);
        pred.p_0(j) += a(i) * pred.p_0(m - 1);
      } else {
        pred.p_0(j) += a(i) * window.y(lags - 1 + m);
      }
      if (m >= 0) {
        pred.p_u(j, m) += b(i);
        pred.p_0(j) += c.col(i).dot(w_f.col(m));
      } else {
        pred.p_0(j) += b(i) * window.u(lags - 1 + m) + c.col(i).dot(w_win.col(lags - 1 + m));
      }
    }
  }
  return pred;
}

ArxMpc::ArxMpc(ArxModel model, const ControllerConfig& config, Normalization norm)
    : Controller("arx", config, std::move(norm)), model_(std::move(model)) {
  const auto lags = model_.lags();
  const auto t_f = config_.t_f;
  if (lags != config_.t_ini) throw DimensionError("controller arx: model lags != T_ini");
  if (model_.n_w() != norm_.w.channels()) {
    throw DimensionError("controller arx: model and normalization disagree on n_w");
  }

  // Decision vector [u; y] with y = y[k+1 .. k+T_f]; one recursion row per step.
  base_ = QpProblem(2 * t_f);
  base_.P.bottomRightCorner(t_f, t_f).diagonal().setConstant(2.0);
  base_.a_eq = Matrix::Zero(t_f, 2 * t_f);
  base_.b_eq = Vector::Zero(t_f);
  for (Eigen::Index j = 0; j < t_f; ++j) {
    base_.a_eq(j, t_f + j) = 1.0;
    for (Eigen::Index i = 0; i < lags; ++i) {
      const auto m = j - i;
      if (m >= 1) base_.a_eq(j, t_f + m - 1) -= model_.a(i);
      if (m >= 0) base_.a_eq(j, m) -= model_.b(i);
    }
  }
  base_.lb.head(t_f).setConstant(u_lower_);
  base_.ub.head(t_f).setConstant(u_upper_);
  solver_ = QpSolver(base_, config_.qp);
}

Plan ArxMpc::plan(const StepContext& ctx) const {
  check_context(ctx);
  return plan(arx_window(ctx), ctx.w_future, ctx.y_ref.tail(config_.t_f));
}

Vector ArxMpc::predict(const StepContext& ctx, const Vector& u_norm) const {
  check_context(ctx);
  return model_.predictor(arx_window(ctx), ctx.w_future)(u_norm);
}

Plan ArxMpc::plan(const IniWindow& window, const Matrix& w_f, const Vector& y_ref) const {
  const auto t_f = config_.t_f;
  if (y_ref.size() != t_f || w_f.cols() != t_f) {
    throw DimensionError("controller arx: forecast/reference length != T_f");
  }
  const auto lags = model_.lags();
  const auto n_w = model_.n_w();
  if (window.u.size() != lags - 1 || window.y.size() != lags || window.w.size() != n_w * lags) {
    throw DimensionError("controller arx: lag window has wrong size");
  }
  Vector b(t_f);
  // Right-hand side: the terms of each recursion row that involve no decision variable.
  const Matrix w_win = window.w.reshaped(n_w, lags);
  for (Eigen::Index j = 0; j < t_f; ++j) {
    double known = 0.0;
    for (Eigen::Index i = 0; i < lags; ++i) {
      const auto m = j - i;
      if (m < 1) known += model_.a(i) * window.y(lags - 1 + m);
      if (m >= 0) {
        known += model_.c.col(i).dot(w_f.col(m));
      } else {
        known += model_.b(i) * window.u(lags - 1 + m) +
                 model_.c.col(i).dot(w_win.col(lags - 1 + m));
      }
    }
    b(j) = known;
  }
  Vector q = base_.q;
  q.tail(t_f) = -2.0 * y_ref;

  const QpSolution sol = solve_or_throw(solver_, q, b, base_.lb, base_.ub);
  return finish_plan(sol, sol.x.head(t_f), sol.x.tail(t_f));
}

}  // namespace deepc
