#include "starktune/lm.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "starktune/error.hpp"

namespace starktune {

namespace {

Eigen::VectorXd clamp(const Eigen::VectorXd& p, const Eigen::VectorXd& lo, const Eigen::VectorXd& hi) {
    return p.cwiseMax(lo).cwiseMin(hi);
}

double sumsq(const Eigen::VectorXd& r) { return r.squaredNorm(); }

} // namespace

LmResult levenberg_marquardt(const ResidualFn& fn, const Eigen::VectorXd& start,
                             const Eigen::VectorXd& lower, const Eigen::VectorXd& upper,
                             const LmOptions& opts) {
    const Eigen::Index n = start.size();
    if (lower.size() != n || upper.size() != n) throw std::invalid_argument("levenberg_marquardt: bound size mismatch");
    for (Eigen::Index i = 0; i < n; ++i) {
        if (!(lower[i] <= upper[i])) throw std::invalid_argument("levenberg_marquardt: lower > upper");
    }

    LmResult res;
    Eigen::VectorXd p = clamp(start, lower, upper);
    Eigen::VectorXd r;
    Eigen::MatrixXd jac;
    fn(p, r, &jac);
    double chi2 = sumsq(r);
    if (!std::isfinite(chi2)) throw FitError(FitError::Reason::bad_input, "levenberg_marquardt: non-finite residuals at start");

    Eigen::VectorXd scale = Eigen::VectorXd::Zero(n);
    double lambda = opts.lambda0;
    double nu = 2.0;
    bool converged = false;
    int it = 0;

    for (; it < opts.max_iter && !converged; ++it) {
        const Eigen::MatrixXd a = jac.transpose() * jac;
        const Eigen::VectorXd g = jac.transpose() * r;

        std::vector<Eigen::Index> act;
        for (Eigen::Index i = 0; i < n; ++i) {
            if (lower[i] == upper[i]) continue;
            if (p[i] <= lower[i] && g[i] > 0.0) continue;
            if (p[i] >= upper[i] && g[i] < 0.0) continue;
            act.push_back(i);
        }
        if (act.empty()) {
            converged = true;
            break;
        }
        const auto k = static_cast<Eigen::Index>(act.size());
        Eigen::MatrixXd as(k, k);
        Eigen::VectorXd gs(k);
        double gmax = 0.0;
        for (Eigen::Index i = 0; i < k; ++i) {
            gs[i] = g[act[i]];
            gmax = std::max(gmax, std::abs(gs[i]));
            scale[act[i]] = std::max(scale[act[i]], a(act[i], act[i]));
            for (Eigen::Index j = 0; j < k; ++j) as(i, j) = a(act[i], act[j]);
        }
        if (gmax <= opts.gtol * std::max(1.0, chi2)) {
            converged = true;
            break;
        }

        bool accepted = false;
        while (!accepted) {
            Eigen::MatrixXd m = as;
            for (Eigen::Index i = 0; i < k; ++i) m(i, i) += lambda * std::max(scale[act[i]], 1e-300);
            const Eigen::VectorXd step = m.ldlt().solve(-gs);
            Eigen::VectorXd trial = p;
            for (Eigen::Index i = 0; i < k; ++i) trial[act[i]] += step[i];
            trial = clamp(trial, lower, upper);
            Eigen::VectorXd taken(k);
            for (Eigen::Index i = 0; i < k; ++i) taken[i] = trial[act[i]] - p[act[i]];
            const double predicted = -(2.0 * gs.dot(taken) + taken.dot(as * taken));

            Eigen::VectorXd rt;
            fn(trial, rt, nullptr);
            const double chi2t = sumsq(rt);
            if (std::isfinite(chi2t) && chi2t < chi2) {
                const double dx = taken.norm();
                const double rel = (chi2 - chi2t) / std::max(chi2, 1e-300);
                // Nielsen's gain-ratio update of the damping.
                const double rho = predicted > 0.0 ? (chi2 - chi2t) / predicted : 0.0;
                lambda *= std::max(1.0 / 3.0, 1.0 - std::pow(2.0 * rho - 1.0, 3));
                lambda = std::max(lambda, 1e-15);
                nu = 2.0;
                p = trial;
                chi2 = chi2t;
                fn(p, r, &jac);
                accepted = true;
                if (rel < opts.ftol || dx <= opts.xtol * (p.norm() + opts.xtol)) converged = true;
            } else {
                lambda *= nu;
                nu *= 2.0;
                if (lambda > 1e16) {
                    // No descent left at working precision.
                    converged = true;
                    break;
                }
            }
        }
    }

    res.params = p;
    res.chi2 = chi2;
    res.iterations = it;
    res.converged = converged;
    res.jtj = jac.transpose() * jac;
    for (Eigen::Index i = 0; i < n; ++i) {
        if (lower[i] == upper[i]) {
            res.jtj.row(i).setZero();
            res.jtj.col(i).setZero();
        }
    }
    return res;
}

Eigen::MatrixXd invert_normal_matrix(const Eigen::MatrixXd& jtj, const Eigen::VectorXd& lower,
                                     const Eigen::VectorXd& upper) {
    const Eigen::Index n = jtj.rows();
    std::vector<Eigen::Index> idx;
    for (Eigen::Index i = 0; i < n; ++i) {
        if (lower[i] != upper[i]) idx.push_back(i);
    }
    const auto k = static_cast<Eigen::Index>(idx.size());
    Eigen::MatrixXd sub(k, k);
    for (Eigen::Index i = 0; i < k; ++i)
        for (Eigen::Index j = 0; j < k; ++j) sub(i, j) = jtj(idx[i], idx[j]);

    // Rank test on the unit-diagonal (correlation) form.
    Eigen::VectorXd d = sub.diagonal().cwiseMax(0.0).cwiseSqrt();
    for (Eigen::Index i = 0; i < k; ++i) {
        if (!(d[i] > 0.0)) throw FitError(FitError::Reason::rank_deficient, "covariance: parameter without influence on the model");
    }
    const Eigen::MatrixXd eq = d.asDiagonal().inverse() * sub * d.asDiagonal().inverse();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(eq);
    const double emax = es.eigenvalues().maxCoeff();
    if (!(es.eigenvalues().minCoeff() > 1e-13 * emax)) {
        throw FitError(FitError::Reason::rank_deficient, "covariance: singular normal matrix");
    }
    const Eigen::MatrixXd inv_eq = es.eigenvectors() * es.eigenvalues().cwiseInverse().asDiagonal() * es.eigenvectors().transpose();
    const Eigen::MatrixXd inv = d.asDiagonal().inverse() * inv_eq * d.asDiagonal().inverse();

    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(n, n);
    for (Eigen::Index i = 0; i < k; ++i)
        for (Eigen::Index j = 0; j < k; ++j) out(idx[i], idx[j]) = inv(i, j);
    return out;
}

} // namespace starktune
