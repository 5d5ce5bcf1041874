#pragma once

#include "deepc/timeseries.hpp"

#include <iosfwd>
#include <limits>
#include <memory>
#include <string>
#include <vector>

namespace deepc {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// min 1/2 x'Px + q'x  s.t.  A_eq x = b_eq,  lb <= x <= ub.
struct QpProblem {
  Matrix P;
  Vector q;
  Matrix a_eq;
  Vector b_eq;
  Vector lb;
  Vector ub;

  QpProblem() = default;
  /// Unconstrained problem with n free variables and zero cost.
  explicit QpProblem(Eigen::Index n);

  Eigen::Index n() const { return q.size(); }
  Eigen::Index m_eq() const { return a_eq.rows(); }

  double objective(const Vector& x) const { return 0.5 * x.dot(P * x) + q.dot(x); }

  /// Throws DimensionError / ConfigError on broken invariants. The eigenvalue
  /// check costs O(n^3) and is opt-in.
  void validate(bool check_psd = false) const;
};

enum class QpStatus { kOptimal, kMaxIter, kInfeasible, kUnbounded };

std::string to_string(QpStatus status);

struct KktResiduals {
  double eq_residual = 0.0;      // |A_eq x - b_eq|_inf
  double bound_violation = 0.0;  // max(0, lb - x, x - ub)
  double stationarity = 0.0;     // projected gradient, see kkt_residuals()
};

/// Residuals of a candidate point. Stationarity is the inf-norm of the
/// gradient Px + q after removing the best least-squares equality multiplier
/// on the free coordinates; on coordinates sitting at a bound only the part
/// pointing out of the box counts.
KktResiduals kkt_residuals(const QpProblem& problem, const Vector& x, double active_tol = 1e-9);

struct QpSettings {
  double eps_abs = 1e-8;
  double eps_rel = 1e-8;
  int max_iter = 200000;

  double rho = 0.1;
  double sigma = 1e-6;
  double alpha = 1.6;
  int scaling_iters = 15;
  int check_every = 25;
  double eps_infeasible = 1e-6;
  bool polish = true;
  int max_polish_steps = 30;
};

struct QpSolution {
  Vector x;
  Vector y_eq;  // multipliers of A_eq x = b_eq
  Vector mu;    // bound multipliers: >= 0 at an upper bound, <= 0 at a lower bound
  QpStatus status = QpStatus::kMaxIter;
  int iterations = 0;
  int polish_attempts = 0;
  bool polished = false;
  double objective = 0.0;
  KktResiduals residuals;
};

QpSolution solve_qp(const QpProblem& problem, const QpSettings& settings = {});

/// Solver for a family of QPs sharing P, A_eq and the pattern of finite
/// bounds. Equilibration and factorizations are computed once; between solves
/// only q, b_eq, the bound values and an optional diagonal update of P on the
/// `varying_diagonal` variables change. Copies share the caches; solve() is
/// serialized internally.
class QpSolver {
 public:
  QpSolver() = default;
  explicit QpSolver(QpProblem problem, QpSettings settings = {},
                    std::vector<Eigen::Index> varying_diagonal = {});

  QpSolution solve() const;
  /// `diag_delta` has one entry per varying_diagonal variable (or is empty).
  QpSolution solve(const Vector& q, const Vector& b_eq, const Vector& lb, const Vector& ub,
                   const Vector& diag_delta = Vector()) const;

  /// The template with the given data substituted.
  QpProblem instance(const Vector& q, const Vector& b_eq, const Vector& lb, const Vector& ub,
                     const Vector& diag_delta = Vector()) const;

  const QpProblem& problem() const;
  const QpSettings& settings() const;

  struct Impl;  // defined in qp_solver.cpp

 private:
  std::shared_ptr<Impl> impl_;
};

/// Residuals using known multipliers: stationarity is |Px + q + A'y + mu|_inf.
KktResiduals kkt_residuals(const QpProblem& problem, const Vector& x, const Vector& y_eq,
                           const Vector& mu);

/// Plain-text dump: sizes, then each matrix/vector row by row.
void write_problem(std::ostream& out, const QpProblem& problem);
std::string problem_to_string(const QpProblem& problem);

}  // namespace deepc
