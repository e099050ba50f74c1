#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <numeric>
#include <string>

#include <fmt/format.h>

#include "starktune/error.hpp"
#include "starktune/fitkit.hpp"
#include "starktune/lm.hpp"
#include "starktune/voigt.hpp"

namespace starktune {

void Spectrum::validate() const {
    if (detunings.size() != counts.size()) throw DataError("spectrum: detunings and counts differ in length");
    for (std::size_t i = 1; i < detunings.size(); ++i) {
        if (!(detunings[i] > detunings[i - 1])) throw DataError("spectrum: detunings must be strictly increasing");
    }
    for (double c : counts) {
        if (!(std::isfinite(c) && c >= 0.0)) throw DataError("spectrum: counts must be finite and non-negative");
    }
}

Spectrum spectrum_from_trace(const ScanTrace& trace) {
    trace.validate();
    Spectrum s;
    s.detunings = trace.detunings;
    s.counts.assign(trace.counts.begin(), trace.counts.end());
    s.n_traces = 1;
    s.observation_span_s = trace.duration();
    return s;
}

Spectrum integrate_traces(const std::vector<ScanTrace>& traces) {
    if (traces.empty()) throw DataError("integrate_traces: no traces");
    const auto& ref = traces.front().detunings;
    Spectrum s;
    s.detunings = ref;
    s.counts.assign(ref.size(), 0.0);
    double t0 = traces.front().start_time;
    double t1 = t0;
    for (const auto& tr : traces) {
        tr.validate();
        if (tr.detunings.size() != ref.size()) throw DataError("integrate_traces: detuning grids differ in length");
        for (std::size_t i = 0; i < ref.size(); ++i) {
            if (std::abs(tr.detunings[i] - ref[i]) > 1e-9 * std::max(1.0, std::abs(ref[i]))) {
                throw DataError(fmt::format("integrate_traces: detuning grids differ at bin {}", i));
            }
            s.counts[i] += static_cast<double>(tr.counts[i]);
        }
        t0 = std::min(t0, tr.start_time);
        t1 = std::max(t1, tr.start_time + tr.duration());
    }
    s.n_traces = static_cast<int>(traces.size());
    s.observation_span_s = t1 - t0;
    return s;
}

double VoigtFit::fwhm() const { return voigt_fwhm_numeric(gamma, sigma); }

double voigt_model(const VoigtFit& fit, double delta) {
    return fit.baseline + fit.area * voigt_value(delta - fit.center, fit.gamma, fit.sigma);
}

namespace {

struct Window {
    std::vector<double> x;
    std::vector<double> y;
};

Window select(const Spectrum& s, const VoigtFitOptions& opts) {
    Window w;
    for (std::size_t i = 0; i < s.detunings.size(); ++i) {
        const double d = s.detunings[i];
        if (opts.window && (d < opts.window->first || d > opts.window->second)) continue;
        w.x.push_back(d);
        w.y.push_back(s.counts[i]);
    }
    return w;
}

std::vector<double> boxcar(const std::vector<double>& y, int width) {
    const auto n = static_cast<std::ptrdiff_t>(y.size());
    const std::ptrdiff_t h = std::max(width, 1) / 2;
    std::vector<double> out(y.size());
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        const std::ptrdiff_t lo = std::max<std::ptrdiff_t>(0, i - h);
        const std::ptrdiff_t hi = std::min<std::ptrdiff_t>(n - 1, i + h);
        double acc = 0.0;
        for (std::ptrdiff_t k = lo; k <= hi; ++k) acc += y[static_cast<std::size_t>(k)];
        out[static_cast<std::size_t>(i)] = acc / static_cast<double>(hi - lo + 1);
    }
    return out;
}

double percentile(std::vector<double> v, double q) {
    const auto k = static_cast<std::size_t>(q * static_cast<double>(v.size() - 1));
    std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(k), v.end());
    return v[k];
}

// Gaussian std that gives total width `fwhm` next to a Lorentzian of FWHM
// `gamma`, by inverting the Olivero-Longbothum approximation.
double sigma_for_width(double fwhm, double gamma) {
    const double a = fwhm - 0.5346 * gamma;
    const double fg2 = a * a - 0.2166 * gamma * gamma;
    return fg2 > 0.0 && a > 0.0 ? std::sqrt(fg2) / (2.0 * std::sqrt(2.0 * std::log(2.0))) : 0.0;
}

struct Guess {
    double center, gamma, sigma, area, baseline, fwhm;
};

Guess initial_guess(const Window& w, const VoigtFitOptions& opts) {
    const std::size_t n = w.x.size();
    const double bin = (w.x.back() - w.x.front()) / static_cast<double>(n - 1);
    const int width = static_cast<int>(std::clamp<std::size_t>(n / 40, 3, 9)) | 1;
    const auto ys = boxcar(w.y, width);
    const double base = percentile(w.y, 0.1);
    const auto im = static_cast<std::size_t>(std::max_element(ys.begin(), ys.end()) - ys.begin());
    const double height = ys[im] - base;
    const double median = percentile(w.y, 0.5);
    const double noise = std::sqrt(std::max(median, 1.0) / width);
    if (!(ys[im] - median > 6.0 * noise)) {
        throw FitError(FitError::Reason::no_peak,
                       fmt::format("fit_voigt: no peak above background (height {:.3g}, noise {:.3g})", ys[im] - median, noise));
    }

    const double half = base + 0.5 * height;
    auto crossing = [&](std::ptrdiff_t step) {
        auto i = static_cast<std::ptrdiff_t>(im);
        while (i + step >= 0 && i + step < static_cast<std::ptrdiff_t>(n) && ys[static_cast<std::size_t>(i + step)] > half) i += step;
        const auto j = i + step;
        if (j < 0 || j >= static_cast<std::ptrdiff_t>(n)) return w.x[static_cast<std::size_t>(i)];
        const double yi = ys[static_cast<std::size_t>(i)];
        const double yj = ys[static_cast<std::size_t>(j)];
        const double f = (yi - half) / (yi - yj);
        return w.x[static_cast<std::size_t>(i)] + f * (w.x[static_cast<std::size_t>(j)] - w.x[static_cast<std::size_t>(i)]);
    };
    const double fwhm = std::max(crossing(1) - crossing(-1), 2.0 * bin);

    Guess g{};
    g.center = w.x[im];
    g.baseline = base;
    g.fwhm = fwhm;
    const double floor = 1e-3 * fwhm;
    if (opts.fix_gamma) {
        g.gamma = *opts.fix_gamma;
        g.sigma = std::max(sigma_for_width(fwhm, g.gamma), 0.05 * fwhm);
    } else {
        g.gamma = 0.5 * fwhm;
        g.sigma = std::max(sigma_for_width(fwhm, g.gamma), 10.0 * floor);
    }
    g.area = height / voigt_value(0.0, g.gamma, g.sigma);
    return g;
}

} // namespace

VoigtFit fit_voigt(const Spectrum& spectrum, const VoigtFitOptions& opts) {
    spectrum.validate();
    if (opts.fix_gamma && !(*opts.fix_gamma > 0.0)) throw std::invalid_argument("fit_voigt: fixed gamma must be > 0");
    const Window w = select(spectrum, opts);
    const std::size_t n = w.x.size();
    if (n < 10) throw DataError(fmt::format("fit_voigt: need at least 10 bins, got {}", n));

    const Guess g = initial_guess(w, opts);
    const double bin = (w.x.back() - w.x.front()) / static_cast<double>(n - 1);
    const double span = w.x.back() - w.x.front() + bin;
    if (!(span > 3.0 * g.fwhm)) {
        throw DataError(fmt::format("fit_voigt: span {:.1f} MHz does not exceed three times the line width {:.1f} MHz", span, g.fwhm));
    }

    const double floor = 1e-3 * g.fwhm;
    const double inf = std::numeric_limits<double>::infinity();
    Eigen::VectorXd lo(vp_count), hi(vp_count), p(vp_count);
    lo << w.x.front(), floor, floor, 0.0, -inf;
    hi << w.x.back(), 20.0 * span, 20.0 * span, inf, inf;
    p << g.center, g.gamma, g.sigma, g.area, g.baseline;
    if (opts.fix_gamma) lo[vp_gamma] = hi[vp_gamma] = p[vp_gamma] = *opts.fix_gamma;

    std::vector<double> sw(n);
    for (std::size_t i = 0; i < n; ++i) sw[i] = 1.0 / std::sqrt(std::max(w.y[i], 1.0));

    const ResidualFn fn = [&](const Eigen::VectorXd& q, Eigen::VectorXd& r, Eigen::MatrixXd* jac) {
        r.resize(static_cast<Eigen::Index>(n));
        if (jac) jac->resize(static_cast<Eigen::Index>(n), vp_count);
        for (std::size_t i = 0; i < n; ++i) {
            const auto k = static_cast<Eigen::Index>(i);
            const VoigtJet v = voigt_jet(w.x[i] - q[vp_center], q[vp_gamma], q[vp_sigma]);
            r[k] = sw[i] * (q[vp_baseline] + q[vp_area] * v.value - w.y[i]);
            if (jac) {
                (*jac)(k, vp_center) = -sw[i] * q[vp_area] * v.d_delta;
                (*jac)(k, vp_gamma) = sw[i] * q[vp_area] * v.d_gamma;
                (*jac)(k, vp_sigma) = sw[i] * q[vp_area] * v.d_sigma;
                (*jac)(k, vp_area) = sw[i] * v.value;
                (*jac)(k, vp_baseline) = sw[i];
            }
        }
    };

    LmOptions lm_opts;
    lm_opts.max_iter = opts.max_iter;
    LmResult res;
    int total_iter = 0;
    for (int round = 0; round < std::max(opts.max_reweight, 1); ++round) {
        res = levenberg_marquardt(fn, p, lo, hi, lm_opts);
        total_iter += res.iterations;
        if (!res.converged) {
            throw FitError(FitError::Reason::non_convergence,
                           fmt::format("fit_voigt: no convergence after {} iterations (chi2 {:.6g}, center {:.3f}, gamma {:.3f}, sigma {:.3f})",
                                       res.iterations, res.chi2, res.params[vp_center], res.params[vp_gamma], res.params[vp_sigma]));
        }
        double change = 0.0;
        for (int k = 0; k < vp_count; ++k) {
            change = std::max(change, std::abs(res.params[k] - p[k]) / (std::abs(res.params[k]) + floor));
        }
        p = res.params;
        for (std::size_t i = 0; i < n; ++i) {
            const double m = p[vp_baseline] + p[vp_area] * voigt_value(w.x[i] - p[vp_center], p[vp_gamma], p[vp_sigma]);
            sw[i] = 1.0 / std::sqrt(std::max(m, 1.0));
        }
        if (round > 0 && change < 1e-7) break;
    }
    // Residuals and normal matrix under the weights of the final model.
    Eigen::VectorXd r;
    Eigen::MatrixXd jac;
    fn(p, r, &jac);

    VoigtFit fit;
    fit.center = p[vp_center];
    fit.gamma = p[vp_gamma];
    fit.sigma = p[vp_sigma];
    fit.area = p[vp_area];
    fit.baseline = p[vp_baseline];
    fit.gamma_fixed = opts.fix_gamma.has_value();
    fit.iterations = total_iter;
    fit.n_bins = n;
    fit.chi2 = r.squaredNorm();
    const int n_free = vp_count - (fit.gamma_fixed ? 1 : 0);
    fit.dof = static_cast<int>(n) - n_free;
    fit.reduced_chi2 = fit.chi2 / fit.dof;

    Eigen::MatrixXd jtj = jac.transpose() * jac;
    fit.cov = invert_normal_matrix(jtj, lo, hi) * fit.reduced_chi2;
    fit.cov = 0.5 * (fit.cov + fit.cov.transpose()).eval();

    const VoigtJet peak = voigt_jet(0.0, fit.gamma, fit.sigma);
    fit.amplitude = fit.area * peak.value;
    Eigen::VectorXd grad = Eigen::VectorXd::Zero(vp_count);
    grad[vp_gamma] = fit.area * peak.d_gamma;
    grad[vp_sigma] = fit.area * peak.d_sigma;
    grad[vp_area] = peak.value;
    fit.amplitude_err = std::sqrt(std::max(grad.dot(fit.cov * grad), 0.0));
    auto err = [&](int k) { return std::sqrt(std::max(fit.cov(k, k), 0.0)); };
    fit.center_err = err(vp_center);
    fit.gamma_err = err(vp_gamma);
    fit.sigma_err = err(vp_sigma);
    fit.baseline_err = err(vp_baseline);
    return fit;
}

VoigtFit fit_voigt(const ScanTrace& trace, const VoigtFitOptions& opts) {
    return fit_voigt(spectrum_from_trace(trace), opts);
}

std::vector<VoigtFit> fit_voigt_batch(const std::vector<Spectrum>& spectra, const VoigtFitOptions& opts,
                                      Execution exec) {
    std::vector<VoigtFit> out(spectra.size());
    std::vector<std::exception_ptr> errors(spectra.size());
    const auto n = static_cast<std::int64_t>(spectra.size());
    auto one = [&](std::int64_t i) {
        const auto k = static_cast<std::size_t>(i);
        try {
            out[k] = fit_voigt(spectra[k], opts);
        } catch (...) {
            errors[k] = std::current_exception();
        }
    };
    if (exec == Execution::serial) {
        for (std::int64_t i = 0; i < n; ++i) one(i);
    } else {
#pragma omp parallel for schedule(dynamic)
        for (std::int64_t i = 0; i < n; ++i) one(i);
    }
    for (const auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
    return out;
}

} // namespace starktune
