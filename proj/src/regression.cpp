#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <stdexcept>

#include <fmt/format.h>

#include "starktune/error.hpp"
#include "starktune/fitkit.hpp"
#include "starktune/lm.hpp"

namespace starktune {

namespace {

struct LinearFit {
    Eigen::VectorXd coef;
    Eigen::MatrixXd cov;
    double chi2 = 0.0;
    int dof = 0;
};

// Weighted linear least squares; covariance scaled by the reduced chi2 when
// dof > 0.
LinearFit weighted_lsq(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const Eigen::VectorXd& w) {
    const Eigen::MatrixXd xtw = x.transpose() * w.asDiagonal();
    const Eigen::MatrixXd a = xtw * x;
    const Eigen::VectorXd inf = Eigen::VectorXd::Constant(x.cols(), std::numeric_limits<double>::infinity());
    const Eigen::MatrixXd inv = invert_normal_matrix(a, -inf, inf);
    LinearFit f;
    f.coef = inv * (xtw * y);
    // One step of iterative refinement.
    f.coef += inv * (xtw * (y - x * f.coef));
    const Eigen::VectorXd r = y - x * f.coef;
    f.chi2 = r.dot(w.asDiagonal() * r);
    f.dof = static_cast<int>(x.rows() - x.cols());
    f.cov = inv;
    if (f.dof > 0) f.cov *= f.chi2 / f.dof;
    return f;
}

} // namespace

ParabolaFit fit_parabola(const std::vector<ParabolaPoint>& points, const ElectrodeGeometry& geom,
                         double g_uncertainty) {
    std::set<double> distinct;
    for (const auto& p : points) {
        if (!(std::isfinite(p.voltage) && std::isfinite(p.center))) throw DataError("fit_parabola: non-finite point");
        distinct.insert(p.voltage);
    }
    if (distinct.size() < 4) {
        throw DataError(fmt::format("fit_parabola: need at least 4 distinct voltages, got {}", distinct.size()));
    }
    if (!(geom.g > 0.0)) throw ConfigError("fit_parabola: geometry factor must be > 0");
    if (!(g_uncertainty >= 0.0)) throw std::invalid_argument("fit_parabola: g uncertainty must be >= 0");

    const bool weighted = std::all_of(points.begin(), points.end(), [](const auto& p) { return p.center_err > 0.0; });
    const auto n = static_cast<Eigen::Index>(points.size());
    double mid = 0.0;
    for (const auto& p : points) mid += p.voltage;
    mid /= static_cast<double>(n);
    double half = 0.0;
    for (const auto& p : points) half = std::max(half, std::abs(p.voltage - mid));

    Eigen::MatrixXd x(n, 3);
    Eigen::VectorXd y(n), w(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& p = points[static_cast<std::size_t>(i)];
        const double t = (p.voltage - mid) / half;
        x(i, 0) = 1.0;
        x(i, 1) = t;
        x(i, 2) = t * t;
        y[i] = p.center;
        w[i] = weighted ? 1.0 / (p.center_err * p.center_err) : 1.0;
    }
    const LinearFit lf = weighted_lsq(x, y, w);

    // Back to center = c0 + c1 V + c2 V^2.
    Eigen::Matrix3d tm;
    tm << 1.0, -mid / half, mid * mid / (half * half),
          0.0, 1.0 / half, -2.0 * mid / (half * half),
          0.0, 0.0, 1.0 / (half * half);
    ParabolaFit f;
    f.coeffs = tm * lf.coef;
    f.cov = tm * lf.cov * tm.transpose();
    f.chi2 = lf.chi2;
    f.dof = lf.dof;

    const double c0 = f.coeffs[0], c1 = f.coeffs[1], c2 = f.coeffs[2];
    f.curvature = -c2;
    f.curvature_err = std::sqrt(std::max(f.cov(2, 2), 0.0));
    const double q2 = lf.coef[2];
    if (q2 == 0.0 || std::abs(q2) < 1e-12 * std::max(std::abs(lf.coef[0]), std::abs(lf.coef[1]))) {
        f.vertex_voltage = std::numeric_limits<double>::quiet_NaN();
        f.vertex_frequency = std::numeric_limits<double>::quiet_NaN();
        f.vertex_voltage_err = f.vertex_frequency_err = std::numeric_limits<double>::quiet_NaN();
    } else {
        f.vertex_voltage = -c1 / (2.0 * c2);
        f.vertex_frequency = c0 - c1 * c1 / (4.0 * c2);
        const Eigen::Vector3d gv(0.0, -1.0 / (2.0 * c2), c1 / (2.0 * c2 * c2));
        const Eigen::Vector3d gf(1.0, -c1 / (2.0 * c2), c1 * c1 / (4.0 * c2 * c2));
        f.vertex_voltage_err = std::sqrt(std::max(gv.dot(f.cov * gv), 0.0));
        f.vertex_frequency_err = std::sqrt(std::max(gf.dot(f.cov * gf), 0.0));
    }

    const double g2 = geom.g * geom.g;
    f.kappa = f.curvature / g2;
    const double rel_g = g_uncertainty / geom.g;
    f.kappa_err = std::hypot(f.curvature_err / g2, 2.0 * f.kappa * rel_g);
    return f;
}

SqrtLawFit fit_sqrt_law(const std::vector<SqrtLawPoint>& points) {
    if (points.size() < 3) throw DataError(fmt::format("fit_sqrt_law: need at least 3 points, got {}", points.size()));
    std::set<double> distinct;
    for (const auto& p : points) {
        if (!(std::isfinite(p.shift) && p.shift >= 0.0)) throw DataError("fit_sqrt_law: shifts must be finite and >= 0");
        if (!(std::isfinite(p.sigma) && p.sigma >= 0.0)) throw DataError("fit_sqrt_law: sigmas must be finite and >= 0");
        distinct.insert(p.shift);
    }
    if (distinct.size() < 2) throw FitError(FitError::Reason::rank_deficient, "fit_sqrt_law: all shifts are equal");

    const bool weighted = std::all_of(points.begin(), points.end(), [](const auto& p) { return p.sigma_err > 0.0; });
    const auto n = static_cast<Eigen::Index>(points.size());
    Eigen::MatrixXd x(n, 2);
    Eigen::VectorXd y(n), w(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& p = points[static_cast<std::size_t>(i)];
        x(i, 0) = 4.0 * p.shift;
        x(i, 1) = 1.0;
        y[i] = p.sigma * p.sigma;
        if (weighted) {
            const double e = p.sigma_err;
            w[i] = 1.0 / std::max(4.0 * p.sigma * p.sigma * e * e, e * e * e * e);
        } else {
            w[i] = 1.0;
        }
    }
    const LinearFit lf = weighted_lsq(x, y, w);

    SqrtLawFit f;
    f.a = lf.coef[0];
    f.offset = lf.coef[1];
    f.cov = lf.cov;
    f.chi2 = lf.chi2;
    f.dof = lf.dof;
    f.a_err = std::sqrt(std::max(f.cov(0, 0), 0.0));
    const double off_err = std::sqrt(std::max(f.cov(1, 1), 0.0));
    f.sigma0 = std::sqrt(std::max(f.offset, 0.0));
    f.sigma0_err = f.sigma0 > 0.0 ? off_err / (2.0 * f.sigma0) : std::sqrt(off_err);
    f.unphysical = f.a < 0.0;
    return f;
}

FieldSpread extract_field_variance(double a, double kappa, double a_err, double kappa_err) {
    if (!(kappa > 0.0)) throw std::invalid_argument("extract_field_variance: kappa must be > 0");
    if (!(a >= 0.0)) throw std::invalid_argument("extract_field_variance: a must be >= 0");
    FieldSpread s;
    s.sigma_e = std::sqrt(a / kappa);
    if (a > 0.0) {
        s.sigma_e_err = 0.5 * s.sigma_e * std::hypot(a_err / a, kappa_err / kappa);
    } else {
        s.sigma_e_err = std::sqrt(std::max(a_err, 0.0) / kappa);
    }
    return s;
}

} // namespace starktune
