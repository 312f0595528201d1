#include "ols.hpp"

#include <cmath>
#include <numbers>

namespace specbench::detail {

double OlsFit::log_likelihood() const {
    const double n = static_cast<double>(nobs);
    return -0.5 * n * (std::log(2.0 * std::numbers::pi) + std::log(ssr / n) + 1.0);
}

OlsFit ols(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, Eigen::Index variance_col, double* xtx_inv_jj) {
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(x);
    OlsFit fit;
    fit.beta = qr.solve(y);
    fit.ssr = (y - x * fit.beta).squaredNorm();
    fit.nobs = x.rows();
    fit.ncols = x.cols();
    if (variance_col >= 0 && xtx_inv_jj != nullptr) {
        // (X'X)^{-1} = R^{-1} R^{-T}; the jj entry is |R^{-T} e_j|^2.
        const auto k = x.cols();
        Eigen::MatrixXd r = qr.matrixQR().topLeftCorner(k, k).triangularView<Eigen::Upper>();
        Eigen::VectorXd e = Eigen::VectorXd::Zero(k);
        e(variance_col) = 1.0;
        Eigen::VectorXd z = r.transpose().triangularView<Eigen::Lower>().solve(e);
        *xtx_inv_jj = z.squaredNorm();
    }
    return fit;
}

Eigen::VectorXd min_norm_lstsq(const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
    Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(x);
    cod.setThreshold(1e-10);
    return cod.solve(y);
}

}  // namespace specbench::detail
