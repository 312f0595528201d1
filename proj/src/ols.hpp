#pragma once

#include <Eigen/Dense>

namespace specbench::detail {

struct OlsFit {
    Eigen::VectorXd beta;
    double ssr = 0.0;
    Eigen::Index nobs = 0;
    Eigen::Index ncols = 0;

    double log_likelihood() const;
    double aic() const { return -2.0 * log_likelihood() + 2.0 * static_cast<double>(ncols); }
};

/// Ordinary least squares by Householder QR. `xtx_inv_jj` receives
/// [(X'X)^{-1}]_{jj} for `variance_col` when non-null.
OlsFit ols(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, Eigen::Index variance_col = -1,
           double* xtx_inv_jj = nullptr);

/// Minimum-norm least squares; tolerates rank deficiency.
Eigen::VectorXd min_norm_lstsq(const Eigen::MatrixXd& x, const Eigen::VectorXd& y);

}  // namespace specbench::detail
