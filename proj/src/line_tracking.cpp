#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <optional>

#include "starktune/error.hpp"
#include "starktune/fitkit.hpp"

namespace starktune {

std::vector<Peak> find_peaks(const Spectrum& spectrum, const PeakOptions& opts) {
    spectrum.validate();
    const std::size_t n = spectrum.counts.size();
    if (n < 3) return {};
    const int width = std::max(opts.smooth, 1);
    const std::ptrdiff_t h = width / 2;
    std::vector<double> ys(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto lo = static_cast<std::size_t>(std::max<std::ptrdiff_t>(0, static_cast<std::ptrdiff_t>(i) - h));
        const std::size_t hi = std::min(n - 1, i + static_cast<std::size_t>(h));
        double acc = 0.0;
        for (std::size_t k = lo; k <= hi; ++k) acc += spectrum.counts[k];
        ys[i] = acc / static_cast<double>(hi - lo + 1);
    }
    std::vector<double> sorted = ys;
    std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(n / 2), sorted.end());
    const double background = sorted[n / 2];
    const double noise = std::sqrt(std::max(background, 1.0) / width);

    std::vector<Peak> cand;
    for (std::size_t i = 1; i + 1 < n; ++i) {
        if (ys[i] >= ys[i - 1] && ys[i] > ys[i + 1] && ys[i] - background > opts.threshold * noise) {
            cand.push_back({spectrum.detunings[i], ys[i] - background});
        }
    }
    std::sort(cand.begin(), cand.end(), [](const Peak& a, const Peak& b) { return a.height > b.height; });
    std::vector<Peak> out;
    for (const auto& c : cand) {
        const bool clear = std::none_of(out.begin(), out.end(), [&](const Peak& p) {
            return std::abs(p.detuning - c.detuning) < opts.min_separation;
        });
        if (clear) out.push_back(c);
    }
    return out;
}

std::vector<ParabolaPoint> LineTrack::parabola_points() const {
    std::vector<ParabolaPoint> out;
    out.reserve(points.size());
    for (const auto& p : points) out.push_back({p.voltage, p.fit.center, p.fit.center_err});
    return out;
}

namespace {

// Polynomial extrapolation through the last (up to three) accepted points.
double predict(const std::vector<std::pair<double, double>>& hist, double v) {
    const std::size_t k = std::min<std::size_t>(hist.size(), 3);
    double out = 0.0;
    for (std::size_t i = hist.size() - k; i < hist.size(); ++i) {
        double l = 1.0;
        for (std::size_t j = hist.size() - k; j < hist.size(); ++j) {
            if (j != i) l *= (v - hist[j].first) / (hist[i].first - hist[j].first);
        }
        out += l * hist[i].second;
    }
    return out;
}

} // namespace

LineTrack track_line(const SweepMap& map, const TrackOptions& opts) {
    map.validate();
    std::vector<std::size_t> keep;
    for (std::size_t i = 0; i < map.voltages.size(); ++i) {
        const double v = map.voltages[i];
        if (opts.voltage_mask && (v < opts.voltage_mask->first || v > opts.voltage_mask->second)) continue;
        keep.push_back(i);
    }
    if (keep.empty()) throw DataError("track_line: no voltages left after masking");
    std::sort(keep.begin(), keep.end(), [&](std::size_t a, std::size_t b) { return map.voltages[a] < map.voltages[b]; });

    std::vector<Spectrum> spectra(keep.size());
    std::vector<std::vector<Peak>> peaks(keep.size());
    for (std::size_t k = 0; k < keep.size(); ++k) {
        spectra[k] = integrate_traces(map.sweeps[keep[k]]);
        peaks[k] = find_peaks(spectra[k], opts.peaks);
    }

    std::size_t seed = keep.size() / 2;
    if (opts.seed_voltage) {
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t k = 0; k < keep.size(); ++k) {
            const double d = std::abs(map.voltages[keep[k]] - *opts.seed_voltage);
            if (d < best) best = d, seed = k;
        }
    }
    if (peaks[seed].empty()) throw FitError(FitError::Reason::no_peak, "track_line: no line at the seed voltage");
    double seed_center = peaks[seed].front().detuning;
    if (opts.seed_center) {
        double best = std::numeric_limits<double>::infinity();
        for (const auto& p : peaks[seed]) {
            const double d = std::abs(p.detuning - *opts.seed_center);
            if (d < best) best = d, seed_center = p.detuning;
        }
        if (best > opts.max_jump) throw FitError(FitError::Reason::no_peak, "track_line: no line near the seed center");
    }

    std::vector<std::optional<double>> assoc(keep.size());
    assoc[seed] = seed_center;
    for (int dir : {-1, 1}) {
        std::vector<std::pair<double, double>> hist{{map.voltages[keep[seed]], seed_center}};
        for (auto k = static_cast<std::ptrdiff_t>(seed) + dir; k >= 0 && k < static_cast<std::ptrdiff_t>(keep.size()); k += dir) {
            const auto ku = static_cast<std::size_t>(k);
            const double v = map.voltages[keep[ku]];
            const double guess = predict(hist, v);
            const double last = hist.back().second;
            std::optional<double> pick;
            double best = std::numeric_limits<double>::infinity();
            for (const auto& p : peaks[ku]) {
                const double d = std::abs(p.detuning - guess);
                if (d < best) best = d, pick = p.detuning;
            }
            if (pick && (best <= opts.max_jump || std::abs(*pick - last) <= opts.max_jump)) {
                assoc[ku] = pick;
                hist.emplace_back(v, *pick);
            }
        }
    }

    std::vector<std::size_t> idx;
    for (std::size_t k = 0; k < keep.size(); ++k) {
        if (assoc[k]) idx.push_back(k);
    }
    std::vector<std::optional<VoigtFit>> fits(idx.size());
    auto one = [&](std::int64_t i) {
        const std::size_t k = idx[static_cast<std::size_t>(i)];
        VoigtFitOptions fo = opts.fit;
        fo.window = std::make_pair(*assoc[k] - opts.window_half, *assoc[k] + opts.window_half);
        try {
            fits[static_cast<std::size_t>(i)] = fit_voigt(spectra[k], fo);
        } catch (const Error&) {
            // The voltage is dropped from the track.
        }
    };
    const auto n = static_cast<std::int64_t>(idx.size());
    if (opts.exec == Execution::serial) {
        for (std::int64_t i = 0; i < n; ++i) one(i);
    } else {
#pragma omp parallel for schedule(dynamic)
        for (std::int64_t i = 0; i < n; ++i) one(i);
    }

    LineTrack track;
    for (std::size_t i = 0; i < idx.size(); ++i) {
        if (fits[i]) track.points.push_back({map.voltages[keep[idx[i]]], *fits[i]});
    }
    return track;
}

} // namespace starktune
