#include "deepc/hankel.hpp"

#include "deepc/errors.hpp"

#include <algorithm>

namespace deepc {

Matrix build_hankel(const Matrix& series, Eigen::Index depth) {
  const auto channels = series.rows();
  const auto steps = series.cols();
  if (depth < 1) throw DimensionError("build_hankel: depth must be >= 1");
  if (steps < depth) {
    throw DimensionError("build_hankel: series has " + std::to_string(steps) +
                         " steps, depth " + std::to_string(depth) + " needs at least " +
                         std::to_string(depth));
  }
  const auto width = steps - depth + 1;
  Matrix h(channels * depth, width);
  for (Eigen::Index j = 0; j < width; ++j) {
    for (Eigen::Index i = 0; i < depth; ++i) {
      h.block(i * channels, j, channels, 1) = series.col(j + i);
    }
  }
  return h;
}

Matrix HankelBlocks::h_hat() const {
  Matrix h(dims.h_hat_rows(), width);
  h << u_p, w_p, y_p, u_f, w_f;
  return h;
}

Matrix HankelBlocks::h_full() const {
  Matrix h(dims.h_full_rows(), width);
  h << u_p, w_p, y_p, u_f, w_f, y_f;
  return h;
}

Matrix HankelBlocks::exogenous() const {
  Matrix h(dims.exogenous_rows(), width);
  h << u_p, w_p, u_f, w_f;
  return h;
}

HankelBlocks split_blocks(const Matrix& u, const Matrix& w, const Matrix& y, Eigen::Index t_ini,
                          Eigen::Index t_f) {
  if (t_ini < 1 || t_f < 1) throw DimensionError("split_blocks: T_ini and T_f must be >= 1");
  if (u.cols() != w.cols() || u.cols() != y.cols()) {
    throw DimensionError("split_blocks: u, w, y lengths differ");
  }
  const auto depth = t_ini + t_f;
  const Matrix hu = build_hankel(u, depth);
  const Matrix hw = build_hankel(w, depth);
  const Matrix hy = build_hankel(y, depth);

  HankelBlocks b;
  b.dims = HankelDims{u.rows(), w.rows(), y.rows(), t_ini, t_f};
  b.width = hu.cols();
  b.u_p = hu.topRows(u.rows() * t_ini);
  b.u_f = hu.bottomRows(u.rows() * t_f);
  b.w_p = hw.topRows(w.rows() * t_ini);
  b.w_f = hw.bottomRows(w.rows() * t_f);
  b.y_p = hy.topRows(y.rows() * t_ini);
  b.y_f = hy.bottomRows(y.rows() * t_f);
  return b;
}

HankelBlocks split_blocks(const IdDataset& dataset, Eigen::Index t_ini, Eigen::Index t_f) {
  return split_blocks(dataset.u_normalized(), dataset.w_normalized(), dataset.y_normalized(),
                      t_ini, t_f);
}

double default_rank_tolerance(const Matrix& m) {
  return 1e-10 * static_cast<double>(std::max(m.rows(), m.cols()));
}

namespace {

Eigen::BDCSVD<Matrix> svd_of(const Matrix& m, unsigned options) {
  if (m.size() == 0) throw DimensionError("SVD of an empty matrix");
  Eigen::BDCSVD<Matrix> svd(m, options);
  if (svd.info() != Eigen::Success) throw NumericalError("SVD did not converge");
  return svd;
}

Eigen::Index rank_from(const Vector& sv, double rel_tol) {
  if (sv.size() == 0 || sv(0) == 0.0) return 0;
  const double cut = rel_tol * sv(0);
  Eigen::Index r = 0;
  while (r < sv.size() && sv(r) > cut) ++r;
  return r;
}

}  // namespace

Eigen::Index numerical_rank(const Matrix& m, double rel_tol) {
  if (rel_tol < 0.0) rel_tol = default_rank_tolerance(m);
  const auto svd = svd_of(m, 0);
  return rank_from(svd.singularValues(), rel_tol);
}

PeReport check_persistent_excitation(const HankelBlocks& blocks, double rel_tol) {
  PeReport report;
  const Matrix stack = blocks.exogenous();
  report.required_rank = blocks.dims.exogenous_rows();
  report.rank = numerical_rank(stack, rel_tol);
  report.pass = report.rank == report.required_rank;
  return report;
}

Matrix pinv(const Matrix& m, double rel_tol) {
  if (rel_tol < 0.0) rel_tol = default_rank_tolerance(m);
  const auto svd = svd_of(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vector& sv = svd.singularValues();
  const auto r = rank_from(sv, rel_tol);
  if (r == 0) return Matrix::Zero(m.cols(), m.rows());
  const Vector inv = sv.head(r).cwiseInverse();
  return svd.matrixV().leftCols(r) * inv.asDiagonal() * svd.matrixU().leftCols(r).transpose();
}

Matrix row_space_projector(const Matrix& m, double rel_tol) {
  if (rel_tol < 0.0) rel_tol = default_rank_tolerance(m);
  const auto svd = svd_of(m, Eigen::ComputeThinV);
  const auto r = rank_from(svd.singularValues(), rel_tol);
  const auto v = svd.matrixV().leftCols(r);
  return v * v.transpose();
}

}  // namespace deepc
