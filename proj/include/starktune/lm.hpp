#pragma once

#include <functional>

#include <Eigen/Dense>

namespace starktune {

// Residual callback: fills r (weighted residuals) and, when `jac` is not
// null, the Jacobian d r / d p.
using ResidualFn = std::function<void(const Eigen::VectorXd& p, Eigen::VectorXd& r, Eigen::MatrixXd* jac)>;

struct LmOptions {
    int max_iter = 200;
    double ftol = 1e-10;   // relative chi2 decrease
    double xtol = 1e-9;    // relative step length
    double gtol = 1e-14;   // max |gradient| on the free set
    double lambda0 = 1e-3;
};

struct LmResult {
    Eigen::VectorXd params;
    Eigen::MatrixXd jtj; // at params; rows/columns of fixed parameters are zero
    double chi2 = 0.0;   // sum of squared residuals
    int iterations = 0;
    bool converged = false;
};

// Box-constrained Levenberg-Marquardt with Marquardt diagonal scaling.
// Parameters with lower == upper are held fixed. Steps are projected onto
// the box and parameters pinned at an active bound drop out of the solve.
LmResult levenberg_marquardt(const ResidualFn& fn, const Eigen::VectorXd& start,
                             const Eigen::VectorXd& lower, const Eigen::VectorXd& upper,
                             const LmOptions& opts = {});

// Inverse of the free block of `jtj`, embedded in a full-size matrix with
// zeros for fixed parameters. Throws FitError(rank_deficient) when the free
// block is singular.
Eigen::MatrixXd invert_normal_matrix(const Eigen::MatrixXd& jtj, const Eigen::VectorXd& lower,
                                     const Eigen::VectorXd& upper);

} // namespace starktune
