#pragma once

#include "deepc/datamodel.hpp"
#include "deepc/timeseries.hpp"

namespace deepc {

/// Block-Hankel layout. Inside each block-row the channels of one time step
/// are adjacent, so a column reads (x_j[0..n), x_{j+1}[0..n), ...).
Matrix build_hankel(const Matrix& series, Eigen::Index depth);

struct HankelDims {
  Eigen::Index n_u = 1;
  Eigen::Index n_w = 3;
  Eigen::Index n_y = 1;
  Eigen::Index t_ini = 6;
  Eigen::Index t_f = 48;

  Eigen::Index depth() const { return t_ini + t_f; }
  /// Rows of [U_p; W_p; Y_p; U_f; W_f].
  Eigen::Index h_hat_rows() const { return (n_u + n_w) * depth() + n_y * t_ini; }
  Eigen::Index h_full_rows() const { return (n_u + n_w + n_y) * depth(); }
  /// Rows of the exogenous stack [U_p; W_p; U_f; W_f].
  Eigen::Index exogenous_rows() const { return (n_u + n_w) * depth(); }
};

/// Past/future blocks of the normalized identification data.
struct HankelBlocks {
  Matrix u_p, w_p, y_p, u_f, w_f, y_f;
  HankelDims dims;
  Eigen::Index width = 0;

  /// [U_p; W_p; Y_p; U_f; W_f]
  Matrix h_hat() const;
  /// [h_hat; Y_f]
  Matrix h_full() const;
  /// [U_p; W_p; U_f; W_f]
  Matrix exogenous() const;
};

HankelBlocks split_blocks(const Matrix& u, const Matrix& w, const Matrix& y, Eigen::Index t_ini,
                          Eigen::Index t_f);
HankelBlocks split_blocks(const IdDataset& dataset, Eigen::Index t_ini, Eigen::Index t_f);

/// Default relative tolerance for rank and pseudo-inverse decisions.
double default_rank_tolerance(const Matrix& m);

struct PeReport {
  Eigen::Index rank = 0;
  Eigen::Index required_rank = 0;
  bool pass = false;
};

/// Persistency of excitation of order T_ini + T_f for the exogenous stack.
PeReport check_persistent_excitation(const HankelBlocks& blocks, double rel_tol = -1.0);

/// SVD-based numerical rank; singular values below rel_tol * sigma_max are
/// dropped. A negative rel_tol selects default_rank_tolerance().
Eigen::Index numerical_rank(const Matrix& m, double rel_tol = -1.0);

/// Moore-Penrose inverse via SVD with the same truncation rule.
Matrix pinv(const Matrix& m, double rel_tol = -1.0);

/// Orthogonal projector onto the row space of m, i.e. pinv(m) * m.
Matrix row_space_projector(const Matrix& m, double rel_tol = -1.0);

}  // namespace deepc
