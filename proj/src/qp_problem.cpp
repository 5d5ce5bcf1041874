#include "deepc/errors.hpp"
#include "deepc/qp.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <iomanip>
#include <ostream>
#include <sstream>

namespace deepc {

QpProblem::QpProblem(Eigen::Index n)
    : P(Matrix::Zero(n, n)),
      q(Vector::Zero(n)),
      a_eq(0, n),
      b_eq(0),
      lb(Vector::Constant(n, -kInf)),
      ub(Vector::Constant(n, kInf)) {}

void QpProblem::validate(bool check_psd) const {
  const auto nv = n();
  if (P.rows() != nv || P.cols() != nv) throw DimensionError("QpProblem: P must be n x n");
  if (a_eq.cols() != nv) throw DimensionError("QpProblem: A_eq column count must equal n");
  if (a_eq.rows() != b_eq.size()) throw DimensionError("QpProblem: A_eq rows != b_eq size");
  if (lb.size() != nv || ub.size() != nv) throw DimensionError("QpProblem: bound sizes != n");
  const double pscale = std::max(1.0, P.cwiseAbs().maxCoeff());
  if ((P - P.transpose()).cwiseAbs().maxCoeff() > 1e-10 * pscale) {
    throw ConfigError("QpProblem: P is not symmetric");
  }
  for (Eigen::Index i = 0; i < nv; ++i) {
    if (lb(i) > ub(i)) {
      throw ConfigError("QpProblem: lb > ub at variable " + std::to_string(i));
    }
  }
  if (!q.allFinite() || !P.allFinite() || !a_eq.allFinite() || !b_eq.allFinite()) {
    throw ConfigError("QpProblem: non-finite cost or constraint data");
  }
  if (check_psd && nv > 0) {
    Eigen::SelfAdjointEigenSolver<Matrix> eig(P, Eigen::EigenvaluesOnly);
    if (eig.eigenvalues().minCoeff() < -1e-8) {
      throw ConfigError("QpProblem: P has a negative eigenvalue");
    }
  }
}

std::string to_string(QpStatus status) {
  switch (status) {
    case QpStatus::kOptimal: return "optimal";
    case QpStatus::kMaxIter: return "max_iter";
    case QpStatus::kInfeasible: return "infeasible";
    case QpStatus::kUnbounded: return "unbounded";
  }
  return "unknown";
}

KktResiduals kkt_residuals(const QpProblem& p, const Vector& x, double active_tol) {
  if (x.size() != p.n()) throw DimensionError("kkt_residuals: x has wrong length");
  KktResiduals r;
  if (p.m_eq() > 0) r.eq_residual = (p.a_eq * x - p.b_eq).cwiseAbs().maxCoeff();
  const auto n = p.n();
  std::vector<int> state(static_cast<std::size_t>(n), 0);  // 0 free, -1 lower, +1 upper, 2 fixed
  std::vector<Eigen::Index> free_idx;
  for (Eigen::Index i = 0; i < n; ++i) {
    r.bound_violation = std::max({r.bound_violation, p.lb(i) - x(i), x(i) - p.ub(i)});
    const bool at_lower =
        std::isfinite(p.lb(i)) && x(i) <= p.lb(i) + active_tol * std::max(1.0, std::abs(p.lb(i)));
    const bool at_upper =
        std::isfinite(p.ub(i)) && x(i) >= p.ub(i) - active_tol * std::max(1.0, std::abs(p.ub(i)));
    auto& s = state[static_cast<std::size_t>(i)];
    s = at_lower && at_upper ? 2 : at_lower ? -1 : at_upper ? 1 : 0;
    if (s == 0) free_idx.push_back(i);
  }

  const Vector grad = p.P * x + p.q;
  Vector corrected = grad;
  if (p.m_eq() > 0 && !free_idx.empty()) {
    Matrix at_free(static_cast<Eigen::Index>(free_idx.size()), p.m_eq());
    Vector g_free(at_free.rows());
    for (std::size_t k = 0; k < free_idx.size(); ++k) {
      at_free.row(static_cast<Eigen::Index>(k)) = p.a_eq.col(free_idx[k]).transpose();
      g_free(static_cast<Eigen::Index>(k)) = grad(free_idx[k]);
    }
    Eigen::CompleteOrthogonalDecomposition<Matrix> cod(at_free);
    const Vector lambda = cod.solve(-g_free);
    corrected += p.a_eq.transpose() * lambda;
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    double v = 0.0;
    switch (state[static_cast<std::size_t>(i)]) {
      case 0: v = std::abs(corrected(i)); break;
      case -1: v = std::max(0.0, -corrected(i)); break;
      case 1: v = std::max(0.0, corrected(i)); break;
      default: break;
    }
    r.stationarity = std::max(r.stationarity, v);
  }
  return r;
}

KktResiduals kkt_residuals(const QpProblem& p, const Vector& x, const Vector& y_eq,
                           const Vector& mu) {
  if (x.size() != p.n() || y_eq.size() != p.m_eq() || mu.size() != p.n()) {
    throw DimensionError("kkt_residuals: x, y_eq or mu has wrong length");
  }
  KktResiduals r;
  if (p.m_eq() > 0) r.eq_residual = (p.a_eq * x - p.b_eq).cwiseAbs().maxCoeff();
  for (Eigen::Index i = 0; i < p.n(); ++i) {
    r.bound_violation = std::max({r.bound_violation, p.lb(i) - x(i), x(i) - p.ub(i)});
  }
  Vector g = p.P * x + p.q + mu;
  if (p.m_eq() > 0) g += p.a_eq.transpose() * y_eq;
  r.stationarity = p.n() ? g.cwiseAbs().maxCoeff() : 0.0;
  return r;
}

namespace {

void write_block(std::ostream& out, const char* name, const Matrix& m) {
  out << name << ' ' << m.rows() << ' ' << m.cols() << '\n';
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (j) out << ' ';
      out << m(i, j);
    }
    out << '\n';
  }
}

}  // namespace

void write_problem(std::ostream& out, const QpProblem& p) {
  out << "# min 1/2 x'Px + q'x  s.t.  A_eq x = b_eq, lb <= x <= ub\n";
  out << std::setprecision(17);
  out << "n " << p.n() << "\nm_eq " << p.m_eq() << '\n';
  write_block(out, "P", p.P);
  write_block(out, "q", p.q.transpose());
  write_block(out, "A_eq", p.a_eq);
  write_block(out, "b_eq", p.b_eq.transpose());
  write_block(out, "lb", p.lb.transpose());
  write_block(out, "ub", p.ub.transpose());
}

std::string problem_to_string(const QpProblem& p) {
  std::ostringstream ss;
  write_problem(ss, p);
  return ss.str();
}

}  // namespace deepc
