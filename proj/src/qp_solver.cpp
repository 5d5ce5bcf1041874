// Dense convex QP solver: operator splitting on an equilibrated problem,
// finished by an active-set polish that solves the KKT system exactly.

#include "deepc/errors.hpp"
#include "deepc/qp.hpp"

#include <Eigen/LU>
#include <Eigen/QR>

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <vector>

namespace deepc {
namespace {

double inf_norm(const Vector& v) { return v.size() ? v.cwiseAbs().maxCoeff() : 0.0; }

double scale_factor(double norm) {
  if (norm < 1e-4) return 1.0;
  return 1.0 / std::sqrt(std::min(norm, 1e4));
}

// rho snaps to a half-decade grid so factorizations can be reused.
double snap_rho(double rho) {
  const double k = std::round(2.0 * std::log10(std::clamp(rho, 1e-6, 1e6)));
  return std::pow(10.0, k / 2.0);
}

constexpr double kEqualityRhoScale = 1e3;
constexpr double kPolishDelta = 1e-9;

/// 0 free, -1 at lower, +1 at upper. Indexed by variable.
using ActiveSet = std::vector<int>;

}  // namespace

struct QpSolver::Impl {
  QpProblem tmpl;
  QpSettings settings;
  std::vector<Eigen::Index> varying;

  // Equilibrated template. Bound constraints are kept as single coefficient
  // rows coef(r) * x(var(r)) so they never enter a dense product.
  Matrix P, A, ata;
  Vector D, e_eq, e_b, coef;
  std::vector<Eigen::Index> var;
  double c = 1.0;

  std::mutex mutex;
  std::map<double, Eigen::LLT<Matrix>> admm_factors;

  // Polish: K = [[P + dI, A'], [A, -dI]] factored once; W = K^-1 on the unit
  // columns of the variables in `upd` (bounded or with a varying diagonal).
  bool polish_ready = false;
  Eigen::PartialPivLU<Matrix> lu;
  std::vector<Eigen::Index> upd;
  std::vector<Eigen::Index> upd_pos;
  Matrix W, G;

  Eigen::Index n() const { return tmpl.n(); }
  Eigen::Index m() const { return tmpl.m_eq(); }
  Eigen::Index mb() const { return static_cast<Eigen::Index>(var.size()); }

  void equilibrate();
  const Eigen::LLT<Matrix>& admm_factor(double rho);
  void prepare_polish();
};

namespace {

/// Per-solve data in scaled coordinates.
struct Data {
  Vector q, b, lo, hi;  // lo/hi are bound-row limits
  Vector dp;            // scaled diagonal update of P, length n
  Vector lbx, ubx;      // scaled variable bounds
  // Original-unit data for acceptance tests.
  const Vector* q0;
  const Vector* b0;
  const Vector* lb0;
  const Vector* ub0;
  Vector dp0;
};

struct AdmmState {
  Vector x, z_b, y_eq, y_b;
};

struct Residuals {
  double prim = 0, dual = 0, prim_norm = 0, dual_norm = 0;
  double prim_scaled = 0, dual_scaled = 0;
};

Vector bound_rows(const QpSolver::Impl& s, const Vector& x) {
  Vector out(s.mb());
  for (Eigen::Index r = 0; r < s.mb(); ++r) out(r) = s.coef(r) * x(s.var[static_cast<std::size_t>(r)]);
  return out;
}

void add_bound_transpose(const QpSolver::Impl& s, const Vector& y_b, Vector& out) {
  for (Eigen::Index r = 0; r < s.mb(); ++r) out(s.var[static_cast<std::size_t>(r)]) += s.coef(r) * y_b(r);
}

Residuals residuals(const QpSolver::Impl& s, const Data& d, const AdmmState& st) {
  Residuals r;
  const Vector ax_eq = s.m() ? Vector(s.A * st.x) : Vector(0);
  const Vector ax_b = bound_rows(s, st.x);

  const Vector rp_eq = ax_eq - d.b;
  const Vector rp_b = ax_b - st.z_b;
  r.prim = std::max(inf_norm(rp_eq.cwiseQuotient(s.e_eq)), inf_norm(rp_b.cwiseQuotient(s.e_b)));
  r.prim_norm = std::max({inf_norm(ax_eq.cwiseQuotient(s.e_eq)), inf_norm(ax_b.cwiseQuotient(s.e_b)),
                          inf_norm(d.b.cwiseQuotient(s.e_eq)), inf_norm(st.z_b.cwiseQuotient(s.e_b))});
  const double prim_scale = std::max({inf_norm(ax_eq), inf_norm(ax_b), inf_norm(d.b),
                                      inf_norm(st.z_b), 1e-30});
  r.prim_scaled = std::max(inf_norm(rp_eq), inf_norm(rp_b)) / prim_scale;

  const Vector px = s.P * st.x + d.dp.cwiseProduct(st.x);
  Vector aty = s.m() ? Vector(s.A.transpose() * st.y_eq) : Vector(Vector::Zero(s.n()));
  add_bound_transpose(s, st.y_b, aty);
  const Vector rd = px + d.q + aty;
  r.dual = inf_norm(rd.cwiseQuotient(s.D)) / s.c;
  r.dual_norm = std::max({inf_norm(px.cwiseQuotient(s.D)), inf_norm(aty.cwiseQuotient(s.D)),
                          inf_norm(d.q.cwiseQuotient(s.D))}) / s.c;
  const double dual_scale = std::max({inf_norm(px), inf_norm(aty), inf_norm(d.q), 1e-30});
  r.dual_scaled = inf_norm(rd) / dual_scale;
  return r;
}

bool primal_infeasible(const QpSolver::Impl& s, const Data& d, const Vector& dy_eq,
                       const Vector& dy_b, double eps) {
  const double norm = std::max(inf_norm(dy_eq.cwiseProduct(s.e_eq)), inf_norm(dy_b.cwiseProduct(s.e_b)));
  if (norm < 1e-30) return false;
  double support = d.b.dot(dy_eq);
  for (Eigen::Index r = 0; r < s.mb(); ++r) {
    const double v = dy_b(r);
    if (v > 0) {
      if (!std::isfinite(d.hi(r))) {
        if (v * s.e_b(r) > eps * norm) return false;
        continue;
      }
      support += d.hi(r) * v;
    } else if (v < 0) {
      if (!std::isfinite(d.lo(r))) {
        if (-v * s.e_b(r) > eps * norm) return false;
        continue;
      }
      support += d.lo(r) * v;
    }
  }
  if (!(support < -eps * norm)) return false;
  Vector aty = s.m() ? Vector(s.A.transpose() * dy_eq) : Vector(Vector::Zero(s.n()));
  add_bound_transpose(s, dy_b, aty);
  return inf_norm(aty.cwiseQuotient(s.D)) <= eps * norm;
}

bool dual_infeasible(const QpSolver::Impl& s, const Data& d, const Vector& dx, double eps) {
  const double norm = inf_norm(dx.cwiseProduct(s.D));
  if (norm < 1e-30) return false;
  if (!(d.q.dot(dx) < -s.c * eps * norm)) return false;
  if (inf_norm((s.P * dx + d.dp.cwiseProduct(dx)).cwiseQuotient(s.D)) > s.c * eps * norm) return false;
  if (s.m() > 0 && inf_norm((s.A * dx).cwiseQuotient(s.e_eq)) > eps * norm) return false;
  for (Eigen::Index r = 0; r < s.mb(); ++r) {
    const double v = s.coef(r) * dx(s.var[static_cast<std::size_t>(r)]) / s.e_b(r);
    const bool lo = std::isfinite(d.lo(r));
    const bool hi = std::isfinite(d.hi(r));
    if (lo && hi && std::abs(v) > eps * norm) return false;
    if (lo && !hi && v < -eps * norm) return false;
    if (!lo && hi && v > eps * norm) return false;
  }
  return true;
}

struct PolishResult {
  bool ok = false;
  Vector x, y_eq, mu;  // unscaled
};

/// [[K + Q dU Q', E_F'], [E_F, 0]] for one active set, solved through the
/// cached factorization of K and a small system on the update variables.
class AugmentedSystem {
 public:
  AugmentedSystem(const QpSolver::Impl& s, const Vector& dp_u, const std::vector<Eigen::Index>& fpos)
      : s_(s), dp_u_(dp_u), fpos_(fpos) {
    const auto nu_n = static_cast<Eigen::Index>(s.upd.size());
    const auto nf = static_cast<Eigen::Index>(fpos.size());
    if (nu_n == 0) return;
    Matrix sys = Matrix::Zero(nu_n + nf, nu_n + nf);
    sys.topLeftCorner(nu_n, nu_n) = s.G * dp_u.asDiagonal();
    sys.topLeftCorner(nu_n, nu_n).diagonal().array() += 1.0;
    for (Eigen::Index k = 0; k < nf; ++k) {
      sys.block(0, nu_n + k, nu_n, 1) = s.G.col(fpos[static_cast<std::size_t>(k)]);
      sys(nu_n + k, fpos[static_cast<std::size_t>(k)]) = 1.0;
    }
    lu_.compute(sys);
    if (!lu_.isInvertible()) cod_.compute(sys);
  }

  void solve(const Vector& top, const Vector& fixed, Vector& z, Vector& nu) const {
    const Vector z0 = s_.lu.solve(top);
    const auto nu_n = static_cast<Eigen::Index>(s_.upd.size());
    const auto nf = static_cast<Eigen::Index>(fpos_.size());
    if (nu_n == 0) {
      z = z0;
      nu.resize(0);
      return;
    }
    Vector rhs(nu_n + nf);
    for (Eigen::Index k = 0; k < nu_n; ++k) rhs(k) = z0(s_.upd[static_cast<std::size_t>(k)]);
    rhs.tail(nf) = fixed;
    const Vector sol = lu_.isInvertible() ? Vector(lu_.solve(rhs)) : Vector(cod_.solve(rhs));
    const Vector t = sol.head(nu_n);
    nu = sol.tail(nf);
    z = z0 - s_.W * dp_u_.cwiseProduct(t);
    for (Eigen::Index k = 0; k < nf; ++k) z -= s_.W.col(fpos_[static_cast<std::size_t>(k)]) * nu(k);
  }

 private:
  const QpSolver::Impl& s_;
  const Vector& dp_u_;
  const std::vector<Eigen::Index>& fpos_;
  Eigen::FullPivLU<Matrix> lu_;
  Eigen::CompleteOrthogonalDecomposition<Matrix> cod_;
};

/// Primal-dual active-set iteration on the exact KKT system.
PolishResult polish(const QpSolver::Impl& s, const Data& d, ActiveSet active) {
  PolishResult out;
  const auto n = s.n();
  const auto m = s.m();
  const auto& settings = s.settings;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (d.lbx(i) == d.ubx(i)) active[static_cast<std::size_t>(i)] = -1;
  }

  const auto nu_n = static_cast<Eigen::Index>(s.upd.size());
  Vector dp_u(nu_n);
  for (Eigen::Index k = 0; k < nu_n; ++k) dp_u(k) = d.dp(s.upd[static_cast<std::size_t>(k)]);
  Vector top(n + m);
  top << -d.q, d.b;

  Vector x(n), lambda(m), mu(n);
  bool consistent = false;
  for (int step = 0; step < settings.max_polish_steps && !consistent; ++step) {
    std::vector<Eigen::Index> fixed_idx, fpos;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (active[static_cast<std::size_t>(i)] != 0) {
        fixed_idx.push_back(i);
        fpos.push_back(s.upd_pos[static_cast<std::size_t>(i)]);
      }
    }
    const auto nf = static_cast<Eigen::Index>(fixed_idx.size());
    Vector xf(nf);
    for (Eigen::Index k = 0; k < nf; ++k) {
      const auto i = fixed_idx[static_cast<std::size_t>(k)];
      xf(k) = active[static_cast<std::size_t>(i)] < 0 ? d.lbx(i) : d.ubx(i);
    }

    const AugmentedSystem aug(s, dp_u, fpos);
    Vector z, nu;
    aug.solve(top, xf, z, nu);
    double last = kInf;
    for (int refine = 0; refine < 20; ++refine) {
      Vector res_top = top;
      res_top.head(n) -= s.P * z.head(n) + d.dp.cwiseProduct(z.head(n));
      if (m > 0) {
        res_top.head(n) -= s.A.transpose() * z.tail(m);
        res_top.tail(m) -= s.A * z.head(n);
      }
      Vector res_f(nf);
      for (Eigen::Index k = 0; k < nf; ++k) {
        const auto i = fixed_idx[static_cast<std::size_t>(k)];
        res_top(i) -= nu(k);
        res_f(k) = xf(k) - z(i);
      }
      const double rn = std::max(inf_norm(res_top), inf_norm(res_f));
      if (!std::isfinite(rn)) return out;
      if (rn <= 1e-15 * (1.0 + inf_norm(top)) || rn >= 0.9 * last) break;
      last = rn;
      Vector dz, dnu;
      aug.solve(res_top, res_f, dz, dnu);
      z += dz;
      nu += dnu;
    }
    x = z.head(n);
    lambda = z.tail(m);
    mu.setZero();
    for (Eigen::Index k = 0; k < nf; ++k) {
      const auto i = fixed_idx[static_cast<std::size_t>(k)];
      x(i) = xf(k);
      mu(i) = nu(k);
    }

    consistent = true;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (!std::isfinite(d.lbx(i)) && !std::isfinite(d.ubx(i))) continue;
      if (d.lbx(i) == d.ubx(i)) continue;
      int next = 0;
      if (std::isfinite(d.ubx(i)) && mu(i) + (x(i) - d.ubx(i)) > 0.0) next = 1;
      if (std::isfinite(d.lbx(i)) && mu(i) + (x(i) - d.lbx(i)) < 0.0) next = -1;
      if (next != active[static_cast<std::size_t>(i)]) {
        consistent = false;
        active[static_cast<std::size_t>(i)] = next;
      }
    }
  }
  if (!consistent) return out;

  out.x = x.cwiseProduct(s.D);
  out.y_eq = lambda.cwiseProduct(s.e_eq) / s.c;
  out.mu = mu.cwiseQuotient(s.D) / s.c;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (active[static_cast<std::size_t>(i)] < 0) out.x(i) = (*d.lb0)(i);
    if (active[static_cast<std::size_t>(i)] > 0) out.x(i) = (*d.ub0)(i);
  }

  // Acceptance in original units.
  const double tol_abs = settings.eps_abs;
  const double tol_rel = settings.eps_rel;
  const auto& p = s.tmpl;
  if (m > 0) {
    const Vector ax = p.a_eq * out.x;
    const double eq_res = inf_norm(ax - *d.b0);
    if (eq_res > tol_abs + tol_rel * std::max(inf_norm(ax), inf_norm(*d.b0))) return out;
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    const double slack = tol_abs + tol_rel * std::abs(out.x(i));
    if (out.x(i) < (*d.lb0)(i) - slack || out.x(i) > (*d.ub0)(i) + slack) return out;
  }
  const Vector px = p.P * out.x + d.dp0.cwiseProduct(out.x);
  const Vector aty = m ? Vector(p.a_eq.transpose() * out.y_eq) : Vector(Vector::Zero(n));
  const double dual = inf_norm(px + *d.q0 + aty + out.mu);
  const double dual_norm = std::max({inf_norm(px), inf_norm(*d.q0), inf_norm(aty)});
  if (dual > tol_abs + tol_rel * dual_norm) return out;
  out.ok = true;
  return out;
}

ActiveSet guess_active(const QpSolver::Impl& s, const Data& d, const AdmmState& st) {
  ActiveSet active(static_cast<std::size_t>(s.n()), 0);
  for (Eigen::Index r = 0; r < s.mb(); ++r) {
    const auto i = static_cast<std::size_t>(s.var[static_cast<std::size_t>(r)]);
    if (std::isfinite(d.lo(r)) && st.z_b(r) - d.lo(r) < -st.y_b(r)) active[i] = -1;
    else if (std::isfinite(d.hi(r)) && d.hi(r) - st.z_b(r) < st.y_b(r)) active[i] = 1;
  }
  return active;
}

void admm_step(const QpSolver::Impl& s, const Data& d, const Eigen::LLT<Matrix>& llt, double rho,
               AdmmState& st) {
  const double rho_eq = kEqualityRhoScale * rho;
  const double alpha = s.settings.alpha;
  // The diagonal update is lagged so the cached factorization stays valid.
  Vector rhs = s.settings.sigma * st.x - d.q - d.dp.cwiseProduct(st.x);
  if (s.m() > 0) rhs += s.A.transpose() * (rho_eq * d.b - st.y_eq);
  add_bound_transpose(s, rho * st.z_b - st.y_b, rhs);
  const Vector xt = llt.solve(rhs);

  if (s.m() > 0) {
    const Vector zr_eq = alpha * (s.A * xt) + (1.0 - alpha) * d.b;
    st.y_eq += rho_eq * (zr_eq - d.b);
  }
  const Vector zr_b = alpha * bound_rows(s, xt) + (1.0 - alpha) * st.z_b;
  Vector z_new = zr_b + st.y_b / rho;
  z_new = z_new.cwiseMax(d.lo).cwiseMin(d.hi);
  st.y_b += rho * (zr_b - z_new);
  st.z_b = z_new;
  st.x = alpha * xt + (1.0 - alpha) * st.x;
}

}  // namespace

void QpSolver::Impl::equilibrate() {
  const auto nv = n();
  P = tmpl.P;
  A = tmpl.a_eq;
  var.clear();
  for (Eigen::Index i = 0; i < nv; ++i) {
    if (std::isfinite(tmpl.lb(i)) || std::isfinite(tmpl.ub(i))) var.push_back(i);
  }
  coef = Vector::Ones(mb());
  D = Vector::Ones(nv);
  e_eq = Vector::Ones(m());
  e_b = Vector::Ones(mb());

  std::vector<Eigen::Index> bound_row_of(static_cast<std::size_t>(nv), -1);
  for (Eigen::Index r = 0; r < mb(); ++r) bound_row_of[static_cast<std::size_t>(var[static_cast<std::size_t>(r)])] = r;

  for (int it = 0; it < settings.scaling_iters; ++it) {
    Vector delta(nv);
    for (Eigen::Index j = 0; j < nv; ++j) {
      double norm = P.col(j).cwiseAbs().maxCoeff();
      if (m() > 0) norm = std::max(norm, A.col(j).cwiseAbs().maxCoeff());
      const auto r = bound_row_of[static_cast<std::size_t>(j)];
      if (r >= 0) norm = std::max(norm, std::abs(coef(r)));
      delta(j) = scale_factor(norm);
    }
    Vector eps_eq(m());
    for (Eigen::Index i = 0; i < m(); ++i) eps_eq(i) = scale_factor(A.row(i).cwiseAbs().maxCoeff());
    Vector eps_b(mb());
    for (Eigen::Index r = 0; r < mb(); ++r) eps_b(r) = scale_factor(std::abs(coef(r)));

    P = delta.asDiagonal() * P * delta.asDiagonal();
    A = eps_eq.asDiagonal() * A * delta.asDiagonal();
    for (Eigen::Index r = 0; r < mb(); ++r) coef(r) *= eps_b(r) * delta(var[static_cast<std::size_t>(r)]);
    D = D.cwiseProduct(delta);
    e_eq = e_eq.cwiseProduct(eps_eq);
    e_b = e_b.cwiseProduct(eps_b);
  }

  double mean_col = 0.0;
  for (Eigen::Index j = 0; j < nv; ++j) mean_col += P.col(j).cwiseAbs().maxCoeff();
  mean_col = nv ? mean_col / static_cast<double>(nv) : 0.0;
  const double cost_norm = std::max(mean_col, inf_norm(tmpl.q.cwiseProduct(D)));
  c = cost_norm < 1e-4 ? 1.0 : 1.0 / std::min(cost_norm, 1e4);
  P *= c;
  if (m() > 0) ata = A.transpose() * A;
}

const Eigen::LLT<Matrix>& QpSolver::Impl::admm_factor(double rho) {
  auto it = admm_factors.find(rho);
  if (it != admm_factors.end()) return it->second;
  Matrix k = P;
  k.diagonal().array() += settings.sigma;
  if (m() > 0) k += (kEqualityRhoScale * rho) * ata;
  for (Eigen::Index r = 0; r < mb(); ++r) {
    const auto i = var[static_cast<std::size_t>(r)];
    k(i, i) += rho * coef(r) * coef(r);
  }
  Eigen::LLT<Matrix> llt(k);
  if (llt.info() != Eigen::Success) {
    throw NumericalError("solve_qp: ADMM system is not positive definite (n = " +
                         std::to_string(n()) + ")");
  }
  return admm_factors.emplace(rho, std::move(llt)).first->second;
}

void QpSolver::Impl::prepare_polish() {
  if (polish_ready) return;
  const auto nv = n();
  const auto mv = m();
  Matrix k = Matrix::Zero(nv + mv, nv + mv);
  k.topLeftCorner(nv, nv) = P;
  k.topLeftCorner(nv, nv).diagonal().array() += kPolishDelta;
  if (mv > 0) {
    k.topRightCorner(nv, mv) = A.transpose();
    k.bottomLeftCorner(mv, nv) = A;
    k.bottomRightCorner(mv, mv).diagonal().array() -= kPolishDelta;
  }
  lu.compute(k);

  upd.clear();
  upd_pos.assign(static_cast<std::size_t>(nv), -1);
  std::vector<bool> mark(static_cast<std::size_t>(nv), false);
  for (auto i : var) mark[static_cast<std::size_t>(i)] = true;
  for (auto i : varying) mark[static_cast<std::size_t>(i)] = true;
  for (Eigen::Index i = 0; i < nv; ++i) {
    if (mark[static_cast<std::size_t>(i)]) {
      upd_pos[static_cast<std::size_t>(i)] = static_cast<Eigen::Index>(upd.size());
      upd.push_back(i);
    }
  }
  const auto nu_n = static_cast<Eigen::Index>(upd.size());
  Matrix unit = Matrix::Zero(nv + mv, nu_n);
  for (Eigen::Index k2 = 0; k2 < nu_n; ++k2) unit(upd[static_cast<std::size_t>(k2)], k2) = 1.0;
  W = nu_n ? Matrix(lu.solve(unit)) : Matrix(nv + mv, 0);
  G.resize(nu_n, nu_n);
  for (Eigen::Index k2 = 0; k2 < nu_n; ++k2) G.row(k2) = W.row(upd[static_cast<std::size_t>(k2)]);
  polish_ready = true;
}

QpSolver::QpSolver(QpProblem problem, QpSettings settings,
                   std::vector<Eigen::Index> varying_diagonal)
    : impl_(std::make_shared<Impl>()) {
  problem.validate();
  for (auto i : varying_diagonal) {
    if (i < 0 || i >= problem.n()) throw DimensionError("QpSolver: varying diagonal index out of range");
  }
  impl_->tmpl = std::move(problem);
  impl_->settings = settings;
  impl_->varying = std::move(varying_diagonal);
  impl_->equilibrate();
}

const QpProblem& QpSolver::problem() const { return impl_->tmpl; }
const QpSettings& QpSolver::settings() const { return impl_->settings; }

QpProblem QpSolver::instance(const Vector& q, const Vector& b_eq, const Vector& lb,
                             const Vector& ub, const Vector& diag_delta) const {
  QpProblem p = impl_->tmpl;
  p.q = q;
  p.b_eq = b_eq;
  p.lb = lb;
  p.ub = ub;
  for (Eigen::Index k = 0; k < diag_delta.size(); ++k) {
    const auto i = impl_->varying[static_cast<std::size_t>(k)];
    p.P(i, i) += diag_delta(k);
  }
  return p;
}

QpSolution QpSolver::solve() const {
  const auto& t = impl_->tmpl;
  return solve(t.q, t.b_eq, t.lb, t.ub);
}

QpSolution QpSolver::solve(const Vector& q, const Vector& b_eq, const Vector& lb, const Vector& ub,
                           const Vector& diag_delta) const {
  if (!impl_) throw ConfigError("QpSolver: not initialized");
  auto& s = *impl_;
  const auto n = s.n();
  const auto m = s.m();
  if (q.size() != n || b_eq.size() != m || lb.size() != n || ub.size() != n) {
    throw DimensionError("QpSolver::solve: data does not match the template");
  }
  if (diag_delta.size() != 0 && diag_delta.size() != static_cast<Eigen::Index>(s.varying.size())) {
    throw DimensionError("QpSolver::solve: diag_delta length != number of varying variables");
  }
  if (!q.allFinite() || !b_eq.allFinite()) throw ConfigError("QpSolver::solve: non-finite data");
  for (Eigen::Index i = 0; i < n; ++i) {
    if (lb(i) > ub(i)) throw ConfigError("QpProblem: lb > ub at variable " + std::to_string(i));
    const bool bounded = std::isfinite(lb(i)) || std::isfinite(ub(i));
    const bool tmpl_bounded = std::isfinite(s.tmpl.lb(i)) || std::isfinite(s.tmpl.ub(i));
    if (bounded != tmpl_bounded) {
      return QpSolver(instance(q, b_eq, lb, ub, diag_delta), s.settings).solve();
    }
  }

  std::lock_guard<std::mutex> lock(s.mutex);
  const auto& settings = s.settings;

  Data d;
  d.q = s.c * q.cwiseProduct(s.D);
  d.b = b_eq.cwiseProduct(s.e_eq);
  d.lo.resize(s.mb());
  d.hi.resize(s.mb());
  for (Eigen::Index r = 0; r < s.mb(); ++r) {
    const auto i = s.var[static_cast<std::size_t>(r)];
    d.lo(r) = std::isfinite(lb(i)) ? s.e_b(r) * lb(i) : -kInf;
    d.hi(r) = std::isfinite(ub(i)) ? s.e_b(r) * ub(i) : kInf;
  }
  d.dp0 = Vector::Zero(n);
  for (Eigen::Index k = 0; k < diag_delta.size(); ++k) d.dp0(s.varying[static_cast<std::size_t>(k)]) += diag_delta(k);
  d.dp = s.c * d.dp0.cwiseProduct(s.D).cwiseProduct(s.D);
  d.lbx = lb.cwiseQuotient(s.D);
  d.ubx = ub.cwiseQuotient(s.D);
  d.q0 = &q;
  d.b0 = &b_eq;
  d.lb0 = &lb;
  d.ub0 = &ub;

  QpProblem view;  // original-unit problem for the final residuals
  auto finish = [&](QpSolution sol) {
    const Vector px = s.tmpl.P * sol.x + d.dp0.cwiseProduct(sol.x);
    sol.objective = 0.5 * sol.x.dot(px) + q.dot(sol.x);
    KktResiduals r;
    if (m > 0) r.eq_residual = inf_norm(s.tmpl.a_eq * sol.x - b_eq);
    for (Eigen::Index i = 0; i < n; ++i) {
      r.bound_violation = std::max({r.bound_violation, lb(i) - sol.x(i), sol.x(i) - ub(i)});
    }
    Vector g = px + q + sol.mu;
    if (m > 0) g += s.tmpl.a_eq.transpose() * sol.y_eq;
    r.stationarity = inf_norm(g);
    sol.residuals = r;
    return sol;
  };

  QpSolution sol;
  ActiveSet last_attempt;
  int polish_attempts = 0;
  AdmmState st;
  st.x = Vector::Zero(n);
  st.y_eq = Vector::Zero(m);
  st.z_b = bound_rows(s, st.x).cwiseMax(d.lo).cwiseMin(d.hi);
  st.y_b = Vector::Zero(s.mb());

  auto try_polish = [&](ActiveSet guess, int iters) -> bool {
    if (!settings.polish) return false;
    if (polish_attempts > 0 && guess == last_attempt) return false;
    s.prepare_polish();
    last_attempt = guess;
    ++polish_attempts;
    PolishResult pr = polish(s, d, std::move(guess));
    if (!pr.ok) return false;
    sol.x = std::move(pr.x);
    sol.y_eq = std::move(pr.y_eq);
    sol.mu = std::move(pr.mu);
    sol.status = QpStatus::kOptimal;
    sol.iterations = iters;
    sol.polished = true;
    sol.polish_attempts = polish_attempts;
    return true;
  };

  auto unscaled_admm = [&](QpStatus status, int iters) {
    QpSolution out;
    out.x = st.x.cwiseProduct(s.D);
    out.y_eq = st.y_eq.cwiseProduct(s.e_eq) / s.c;
    out.mu = Vector::Zero(n);
    for (Eigen::Index r = 0; r < s.mb(); ++r) {
      out.mu(s.var[static_cast<std::size_t>(r)]) = st.y_b(r) * s.e_b(r) / s.c;
    }
    out.status = status;
    out.iterations = iters;
    out.polish_attempts = polish_attempts;
    return finish(std::move(out));
  };

  // Active-set start from "everything free"; ADMM only runs if that fails.
  if (try_polish(ActiveSet(static_cast<std::size_t>(n), 0), 0)) return finish(std::move(sol));

  double rho = snap_rho(settings.rho);
  const Eigen::LLT<Matrix>* llt = &s.admm_factor(rho);
  int pinf_streak = 0, dinf_streak = 0;

  for (int iter = 1; iter <= settings.max_iter; ++iter) {
    const AdmmState prev = st;
    admm_step(s, d, *llt, rho, st);
    if (iter % settings.check_every != 0 && iter != settings.max_iter) continue;

    const Residuals r = residuals(s, d, st);
    if (try_polish(guess_active(s, d, st), iter)) return finish(std::move(sol));
    const bool converged = r.prim <= settings.eps_abs + settings.eps_rel * r.prim_norm &&
                           r.dual <= settings.eps_abs + settings.eps_rel * r.dual_norm;
    if (converged) return unscaled_admm(QpStatus::kOptimal, iter);

    pinf_streak = primal_infeasible(s, d, st.y_eq - prev.y_eq, st.y_b - prev.y_b,
                                    settings.eps_infeasible) ? pinf_streak + 1 : 0;
    dinf_streak = dual_infeasible(s, d, st.x - prev.x, settings.eps_infeasible) ? dinf_streak + 1 : 0;
    if (pinf_streak >= 2) return unscaled_admm(QpStatus::kInfeasible, iter);
    if (dinf_streak >= 2) return unscaled_admm(QpStatus::kUnbounded, iter);

    const double ratio = std::sqrt(r.prim_scaled / std::max(r.dual_scaled, 1e-30));
    const double proposed = rho * ratio;
    if (proposed > 5.0 * rho || proposed < 0.2 * rho) {
      const double snapped = snap_rho(proposed);
      if (snapped != rho) {
        rho = snapped;
        llt = &s.admm_factor(rho);
      }
    }
  }
  return unscaled_admm(QpStatus::kMaxIter, settings.max_iter);
}

QpSolution solve_qp(const QpProblem& problem, const QpSettings& settings) {
  return QpSolver(problem, settings).solve();
}

}  // namespace deepc
