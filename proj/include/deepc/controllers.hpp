#pragma once

#include "deepc/datamodel.hpp"
#include "deepc/hankel.hpp"
#include "deepc/qp.hpp"

#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace deepc {

struct ControllerConfig {
  Eigen::Index t_ini = 6;
  Eigen::Index t_f = 48;
  std::optional<double> lambda_basic;  // no default: it is the tuning knob being removed
  double lambda_g = 1e5;
  double epsilon_g = 0.03;
  double tiny_reg = 1e-10;
  double u_min = 0.0;  // W
  double u_max = 600.0;
  bool constrain_input = true;
  QpSettings qp;

  void validate() const;
};

/// Bi-level relaxation from the measurement noise variance: T_ini^2 * var.
double bilevel_epsilon(Eigen::Index t_ini, double noise_variance);

/// Normalized signals around the decision step k. Inputs and outputs are
/// scalar channels; disturbances are n_w x steps.
struct StepContext {
  Vector u_past;    // u[k-T_ini .. k-1]
  Matrix w_past;    // w[k-T_ini .. k-1]
  Vector y_past;    // y[k-T_ini .. k], includes the measurement at k
  Matrix w_future;  // w[k .. k+T_f-1], the forecast
  Vector y_ref;     // r[k .. k+T_f]
};

/// Initialization data in the stacking order of the Hankel rows.
struct IniWindow {
  Vector u;
  Vector w;  // time-major, channels adjacent
  Vector y;
};

/// u, w, y over k-T_ini .. k-1: the Hankel "past" window.
IniWindow deepc_window(const StepContext& ctx);
/// u over k-T_ini+1 .. k-1, w and y over k-T_ini+1 .. k: the ARX lag window.
IniWindow arx_window(const StepContext& ctx);

/// Column-major flatten of a channels x steps block (time-major vector).
Vector flatten(const Matrix& m);

/// y = P_u u + p_0 over the prediction window.
struct AffinePredictor {
  Matrix p_u;
  Vector p_0;

  Vector operator()(const Vector& u) const { return p_u * u + p_0; }
};

/// Output of one planning call.
struct Plan {
  Vector u;  // W
  Vector y;  // degC, predicted
  Vector u_norm;
  Vector y_norm;
  QpStatus status = QpStatus::kMaxIter;
  int iterations = 0;
  KktResiduals residuals;

  // Bi-level extras.
  Vector g;
  Vector kappa;
  Vector u_bar;
  Matrix K;
  double stationarity = std::numeric_limits<double>::quiet_NaN();
};

struct Normalization {
  Scaler u, w, y;
};

class Controller {
 public:
  Controller(std::string name, const ControllerConfig& config, Normalization norm);
  virtual ~Controller() = default;

  const std::string& name() const { return name_; }
  const ControllerConfig& config() const { return config_; }
  const Normalization& normalization() const { return norm_; }

  virtual Plan plan(const StepContext& ctx) const = 0;

  /// Normalized output trajectory the controller associates with the given
  /// normalized input plan. DeePC variants predict y[k .. k+T_f-1]; ARX
  /// predicts y[k+1 .. k+T_f] (see output_lead()).
  virtual Vector predict(const StepContext& ctx, const Vector& u_norm) const = 0;

  /// Index of the first predicted output relative to k.
  virtual int output_lead() const { return 0; }

  double u_lower() const { return u_lower_; }
  double u_upper() const { return u_upper_; }

 protected:
  Plan finish_plan(const QpSolution& sol, Vector u_norm, Vector y_norm) const;
  QpSolution solve_or_throw(const QpSolver& solver, const Vector& q, const Vector& b_eq,
                            const Vector& lb, const Vector& ub,
                            const Vector& diag_delta = Vector()) const;
  void check_context(const StepContext& ctx) const;

  std::string name_;
  ControllerConfig config_;
  Normalization norm_;
  double u_lower_ = -kInf;
  double u_upper_ = kInf;
};

/// Regularized DeePC: ||y - r||^2 + lambda ||g||^2 s.t. H g = v.
class BasicDeepc : public Controller {
 public:
  BasicDeepc(HankelBlocks blocks, const ControllerConfig& config, Normalization norm);

  Plan plan(const StepContext& ctx) const override;
  Plan plan(const IniWindow& ini, const Matrix& w_f, const Vector& y_ref) const;
  Vector predict(const StepContext& ctx, const Vector& u_norm) const override;

  const HankelBlocks& blocks() const { return blocks_; }

 protected:
  BasicDeepc(std::string name, HankelBlocks blocks, const ControllerConfig& config,
             Normalization norm, Matrix g_weight);

  Plan solve(const IniWindow& ini, const Matrix& w_f, const Vector& y_ref,
             const Vector* pinned_u) const;

  HankelBlocks blocks_;
  QpProblem base_;  // constant matrices; per-step right-hand sides are filled in
  QpSolver solver_;
};

/// Orthogonal-projection DeePC: the regularizer only punishes the part of g
/// outside the row space of [U_p; W_p; Y_p; U_f; W_f].
class ProjectionDeepc : public BasicDeepc {
 public:
  ProjectionDeepc(HankelBlocks blocks, const ControllerConfig& config, Normalization norm);

  const Matrix& projector() const { return projector_; }

 private:
  ProjectionDeepc(HankelBlocks blocks, const ControllerConfig& config, Normalization norm,
                  Matrix projector);
  Matrix projector_;
};

/// Bi-level DeePC in its single-level form: the inner regularized least
/// squares is replaced by its KKT system M [g; kappa] = rhs(u).
class BilevelDeepc : public Controller {
 public:
  BilevelDeepc(HankelBlocks blocks, const ControllerConfig& config, Normalization norm);

  Plan plan(const StepContext& ctx) const override;
  Plan plan(const IniWindow& ini, const Matrix& w_f, const Vector& y_ref) const;
  Vector predict(const StepContext& ctx, const Vector& u_norm) const override;

  /// Affine map u -> Y_f g(u) from the factored KKT matrix.
  AffinePredictor predictor(const IniWindow& ini, const Matrix& w_f) const;
  /// [g; kappa] for a given input plan.
  Vector inner_solution(const IniWindow& ini, const Matrix& w_f, const Vector& u) const;
  /// |(Y_p'Y_p + eps I) g + H' kappa - Y_p' y_ini|_inf
  double stationarity_residual(const IniWindow& ini, const Vector& g, const Vector& kappa) const;

  const Matrix& kkt_matrix() const { return m_; }
  /// H = [U_p; W_p; U_f; W_f]
  const Matrix& h() const { return h_; }
  bool kkt_singular() const { return singular_; }

 private:
  Vector inner_rhs(const IniWindow& ini, const Matrix& w_f, const Vector& u) const;

  HankelBlocks blocks_;
  Matrix h_;
  Matrix m_;
  Matrix minv_;  // M^-1, or the pseudo-inverse when eps = 0
  bool singular_ = false;
  QpProblem base_;
  QpSolver solver_;
};

/// Builds the bi-level predictor without keeping a controller around.
AffinePredictor build_bl_predictor(const HankelBlocks& blocks, double epsilon_g,
                                   const IniWindow& ini, const Matrix& w_f);

/// Instrumental-variable DeePC: y = Y_f pinv(H_hat) v_hat, g eliminated.
class IvDeepc : public Controller {
 public:
  IvDeepc(HankelBlocks blocks, const ControllerConfig& config, Normalization norm);

  Plan plan(const StepContext& ctx) const override;
  Plan plan(const IniWindow& ini, const Matrix& w_f, const Vector& y_ref) const;
  Vector predict(const StepContext& ctx, const Vector& u_norm) const override;

  AffinePredictor predictor(const IniWindow& ini, const Matrix& w_f) const;
  /// Y_f pinv(H_hat)
  const Matrix& gain() const { return gain_; }
  bool rank_deficient() const { return rank_deficient_; }

 private:
  HankelBlocks blocks_;
  Matrix gain_;
  bool rank_deficient_ = false;
  Matrix p_u_;
  QpSolver solver_;
};

AffinePredictor build_iv_predictor(const HankelBlocks& blocks, const IniWindow& ini,
                                   const Matrix& w_f);

/// y[t+1] = sum_i a_i y[t-i] + b_i u[t-i] + c_i . w[t-i],  i = 0 .. lags-1.
struct ArxModel {
  Vector a;  // lags
  Vector b;  // lags
  Matrix c;  // n_w x lags
  double residual_ss = 0.0;

  Eigen::Index lags() const { return a.size(); }
  Eigen::Index n_w() const { return c.rows(); }

  /// Regressor row for predicting y[t+1] from samples at t, t-1, ...
  Eigen::RowVectorXd regressor(const Vector& u, const Matrix& w, const Vector& y,
                               Eigen::Index t) const;
  Vector theta() const;

  /// Unrolls the recursion over T_f steps. `window` is the ARX lag window
  /// (arx_window) and w_f holds w[k .. k+T_f-1].
  AffinePredictor predictor(const IniWindow& window, const Matrix& w_f) const;
};

/// Ordinary least squares without intercept, theta = pinv(Phi) Y. Throws
/// ConfigError naming the exogenous regressors when the input/disturbance
/// lag columns are collinear; dependence among the output lags is resolved
/// by the minimum-norm solution.
ArxModel fit_arx(const Vector& u, const Matrix& w, const Vector& y, Eigen::Index lags,
                 const std::vector<std::string>& w_names = {});
ArxModel identify_arx(const IdDataset& dataset, Eigen::Index t_ini);

/// Regressor matrix Phi and targets Y as used by fit_arx.
std::pair<Matrix, Vector> arx_regression(const Vector& u, const Matrix& w, const Vector& y,
                                         Eigen::Index lags);

class ArxMpc : public Controller {
 public:
  ArxMpc(ArxModel model, const ControllerConfig& config, Normalization norm);

  Plan plan(const StepContext& ctx) const override;
  Plan plan(const IniWindow& window, const Matrix& w_f, const Vector& y_ref) const;
  Vector predict(const StepContext& ctx, const Vector& u_norm) const override;
  int output_lead() const override { return 1; }

  const ArxModel& model() const { return model_; }

 private:
  ArxModel model_;
  QpProblem base_;
  QpSolver solver_;
};

enum class ControllerKind { kBasic, kProjection, kBilevel, kInstrumental, kArx };

std::string to_string(ControllerKind kind);
ControllerKind controller_kind_from_string(const std::string& s);

/// Builds a controller from normalized identification data.
std::unique_ptr<Controller> make_controller(ControllerKind kind, const IdDataset& dataset,
                                            const ControllerConfig& config);

}  // namespace deepc
