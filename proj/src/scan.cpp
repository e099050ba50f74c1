#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "starktune/error.hpp"
#include "starktune/simkit.hpp"

namespace starktune {

void ScanConfig::validate() const {
    if (!(span_ghz > 0.0)) throw ConfigError("scan: span_ghz must be > 0");
    if (!(scan_speed > 0.0)) throw ConfigError("scan: scan_speed must be > 0");
    if (!(bin_time > 0.0)) throw ConfigError("scan: bin_time must be > 0");
    if (n_sweeps < 1) throw ConfigError("scan: n_sweeps must be >= 1");
    if (!(inter_sweep_wait >= 0.0)) throw ConfigError("scan: inter_sweep_wait must be >= 0");
    if (!(background_fraction >= 0.0)) throw ConfigError("scan: background_fraction must be >= 0");
    if (!std::isfinite(center_mhz)) throw ConfigError("scan: center_mhz must be finite");
    if (n_bins() < 2) throw ConfigError("scan: span must cover at least two bins");
}

int ScanConfig::n_bins() const {
    return static_cast<int>(std::llround(span_ghz / (scan_speed * bin_time)));
}

std::vector<double> ScanConfig::detuning_grid() const {
    const int n = n_bins();
    const double width = bin_width_mhz();
    const double start = center_mhz - 0.5 * n * width;
    std::vector<double> grid(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) grid[static_cast<std::size_t>(i)] = start + (i + 0.5) * width;
    return grid;
}

void ScanTrace::validate() const {
    if (detunings.size() != counts.size()) throw DataError("trace: detunings and counts differ in length");
    if (detunings.size() < 2) throw DataError("trace: need at least two bins");
    for (std::size_t i = 1; i < detunings.size(); ++i) {
        if (!(detunings[i] > detunings[i - 1])) throw DataError("trace: detunings must be strictly increasing");
    }
    for (auto c : counts) {
        if (c < 0) throw DataError("trace: counts must be non-negative");
    }
    if (!(bin_time > 0.0)) throw DataError("trace: bin_time must be > 0");
}

void SweepMap::validate() const {
    if (voltages.size() != sweeps.size()) throw DataError("sweep map: one trace set per voltage required");
    for (const auto& set : sweeps) {
        if (set.empty()) throw DataError("sweep map: voltage without traces");
        for (const auto& t : set) t.validate();
    }
}

std::vector<double> linspace(double from, double to, int count) {
    if (count < 1) throw std::invalid_argument("linspace: count must be >= 1");
    std::vector<double> out(static_cast<std::size_t>(count));
    if (count == 1) {
        out[0] = from;
        return out;
    }
    for (int i = 0; i < count; ++i) {
        out[static_cast<std::size_t>(i)] = from + (to - from) * i / (count - 1);
    }
    return out;
}

namespace {

struct NoiseSchedule {
    // starts[m][j]: noise of molecule m at the start of job j; starts[m][J]
    // is the state at the end of the last sweep.
    std::vector<std::vector<NoiseState>> starts;
    std::vector<double> end_times; // end of the bridge interval of each job
};

NoiseSchedule build_noise_schedule(const SimulationSetup& setup, const std::vector<SweepJob>& jobs,
                                   const std::vector<NoiseState>& initial, double initial_time) {
    const std::size_t nm = setup.molecules.size();
    const std::size_t nj = jobs.size();
    const double duration = setup.scan.sweep_duration();

    NoiseSchedule sched;
    sched.end_times.resize(nj);
    for (std::size_t j = 0; j < nj; ++j) {
        sched.end_times[j] = j + 1 < nj ? jobs[j + 1].start_time : jobs[j].start_time + duration;
    }

    sched.starts.assign(nm, std::vector<NoiseState>(nj + 1));
    for (std::size_t m = 0; m < nm; ++m) {
        Rng chain = make_stream(setup.scan.seed, {tag(StreamTag::noise_chain), setup.step_key, m});
        NoiseState cur;
        double t = jobs.front().start_time;
        if (initial.empty()) {
            cur = stationary_noise(setup.noise, chain);
        } else {
            cur = initial.at(m);
            t = initial_time;
        }
        for (std::size_t j = 0; j <= nj; ++j) {
            const double target = j < nj ? jobs[j].start_time : sched.end_times[nj - 1];
            if (target > t) cur = evolve_noise(setup.noise, target - t, cur, chain);
            t = std::max(t, target);
            sched.starts[m][j] = cur;
        }
    }
    return sched;
}

ScanTrace run_sweep(const SimulationSetup& setup, const SweepJob& job, std::size_t j,
                    const NoiseSchedule& sched) {
    const auto& cfg = setup.scan;
    ScanTrace trace;
    trace.detunings = cfg.detuning_grid();
    trace.start_time = job.start_time;
    trace.sweep_index = job.sweep_index;
    trace.bin_time = cfg.bin_time;

    const std::size_t n = trace.detunings.size();
    std::vector<double> rate(n, 0.0);
    const FieldVector applied = local_field(job.state, setup.geometry);
    const double nu_ref = setup.molecules.front().nu_zpl;
    const bool silent = setup.noise.is_silent();

    double peak_max = 0.0;
    for (std::size_t m = 0; m < setup.molecules.size(); ++m) {
        const auto& mol = setup.molecules[m];
        peak_max = std::max(peak_max, mol.peak_rate);
        Rng rng = make_stream(cfg.seed, {tag(StreamTag::sweep_noise), setup.step_key, j, m});

        const double offset = (mol.nu_zpl - nu_ref) * 1e6;
        const double amp = mol.peak_rate * mol.dw_qy;
        const double inv_hw = 2.0 / mol.gamma0;
        const NoiseState& end = sched.starts[m][j + 1];
        NoiseState cur = sched.starts[m][j];
        double t = job.start_time;
        const double t_end = sched.end_times[j];

        for (std::size_t i = 0; i < n; ++i) {
            const double ti = trace.time_of_bin(i);
            if (!silent) cur = bridge_noise(setup.noise, ti - t, t_end - t, cur, end, rng);
            t = ti;
            const double center = offset + stark_shift(mol, applied + cur.field()) + cur.frequency();
            const double x = (trace.detunings[i] - center) * inv_hw;
            rate[i] += amp / (1.0 + x * x);
        }
    }

    const double background = cfg.background_fraction * peak_max;
    Rng rng = make_stream(cfg.seed, {tag(StreamTag::sweep_counts), setup.step_key, j});
    trace.counts.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double mu = cfg.bin_time * (rate[i] + background);
        if (mu > 0.0) {
            std::poisson_distribution<std::int64_t> poisson(mu);
            trace.counts[i] = poisson(rng);
        } else {
            trace.counts[i] = 0;
        }
    }
    return trace;
}

} // namespace

JobBatchResult simulate_jobs(const SimulationSetup& setup, const std::vector<SweepJob>& jobs,
                             const std::vector<NoiseState>& initial_noise, double initial_time,
                             Execution exec) {
    if (setup.molecules.empty()) throw std::invalid_argument("simulate_jobs: need at least one molecule");
    if (jobs.empty()) throw std::invalid_argument("simulate_jobs: no jobs");
    if (!initial_noise.empty() && initial_noise.size() != setup.molecules.size()) {
        throw std::invalid_argument("simulate_jobs: one initial noise state per molecule required");
    }
    const double duration = setup.scan.sweep_duration();
    for (std::size_t j = 1; j < jobs.size(); ++j) {
        if (jobs[j].start_time < jobs[j - 1].start_time + duration * (1.0 - 1e-12)) {
            throw std::invalid_argument("simulate_jobs: jobs overlap or are out of order");
        }
    }
    if (!initial_noise.empty() && jobs.front().start_time < initial_time) {
        throw std::invalid_argument("simulate_jobs: first job starts before the initial noise time");
    }

    const NoiseSchedule sched = build_noise_schedule(setup, jobs, initial_noise, initial_time);

    JobBatchResult result;
    result.traces.resize(jobs.size());
    const auto nj = static_cast<std::int64_t>(jobs.size());
    if (exec == Execution::serial) {
        for (std::int64_t j = 0; j < nj; ++j) {
            result.traces[static_cast<std::size_t>(j)] = run_sweep(setup, jobs[static_cast<std::size_t>(j)], static_cast<std::size_t>(j), sched);
        }
    } else {
#pragma omp parallel for schedule(dynamic)
        for (std::int64_t j = 0; j < nj; ++j) {
            result.traces[static_cast<std::size_t>(j)] = run_sweep(setup, jobs[static_cast<std::size_t>(j)], static_cast<std::size_t>(j), sched);
        }
    }

    result.final_noise.reserve(setup.molecules.size());
    for (const auto& per_mol : sched.starts) result.final_noise.push_back(per_mol.back());
    result.end_time = sched.end_times.back();
    return result;
}

Session::Session(std::vector<MoleculeModel> mols, NoiseModel noise, ElectrodeGeometry geom,
                 ChargeDynamics dyn, ScanConfig scan, std::uint64_t seed)
    : dyn_(dyn), seed_(seed) {
    if (mols.empty()) throw ConfigError("session: at least one molecule is required");
    for (const auto& m : mols) m.validate();
    noise.validate();
    geom.validate();
    dyn.validate();
    scan.validate();
    setup_.molecules = std::move(mols);
    setup_.noise = noise;
    setup_.geometry = geom;
    setup_.scan = scan;
    setup_.scan.seed = seed;
}

void Session::set_state(const FieldState& state) { state_ = state; }

void Session::set_voltage(double v) {
    if (!setup_.geometry.in_range(v)) throw std::invalid_argument("set_voltage: voltage outside the electrode range");
    state_.v_applied = v;
}

JobBatchResult Session::run(const std::vector<SweepJob>& jobs, Execution exec) {
    setup_.step_key = step_++;
    auto result = simulate_jobs(setup_, jobs, noise_, noise_time_, exec);
    noise_ = result.final_noise;
    noise_time_ = result.end_time;
    clock_ = result.end_time + setup_.scan.inter_sweep_wait;
    return result;
}

std::vector<ScanTrace> Session::scan(std::optional<int> n_sweeps, Execution exec) {
    const int n = n_sweeps.value_or(setup_.scan.n_sweeps);
    if (n < 1) throw std::invalid_argument("scan: n_sweeps must be >= 1");
    const double period = setup_.scan.sweep_duration() + setup_.scan.inter_sweep_wait;
    std::vector<SweepJob> jobs;
    for (int k = 0; k < n; ++k) jobs.push_back({clock_ + k * period, state_, k});
    return run(jobs, exec).traces;
}

SweepMap Session::sweep(const std::vector<double>& voltages, Execution exec) {
    if (voltages.empty()) throw std::invalid_argument("sweep: no voltages");
    const double period = setup_.scan.sweep_duration() + setup_.scan.inter_sweep_wait;
    const int per = setup_.scan.n_sweeps;
    std::vector<SweepJob> jobs;
    double t = clock_;
    for (double v : voltages) {
        if (!setup_.geometry.in_range(v)) throw std::invalid_argument("sweep: voltage outside the electrode range");
        FieldState s = state_;
        s.v_applied = v;
        for (int k = 0; k < per; ++k) {
            jobs.push_back({t, s, k});
            t += period;
        }
    }
    auto result = run(jobs, exec);

    SweepMap map;
    map.voltages = voltages;
    map.sweeps.resize(voltages.size());
    for (std::size_t i = 0; i < result.traces.size(); ++i) {
        map.sweeps[i / static_cast<std::size_t>(per)].push_back(std::move(result.traces[i]));
    }
    for (std::size_t m = 0; m < setup_.molecules.size(); ++m) map.molecule_ids.push_back("mol" + std::to_string(m));
    return map;
}

double Session::offset_x() const { return setup_.molecules.front().e0_x; }

void Session::oss(double intensity, double duration) {
    state_ = apply_oss(state_, dyn_, intensity, duration, setup_.geometry, offset_x());
    clock_ += duration;
}

void Session::egoss(double v_bias, double intensity, double duration) {
    state_ = apply_egoss(state_, dyn_, intensity, v_bias, duration, setup_.geometry, offset_x());
    clock_ += duration;
}

void Session::wait(double duration) {
    state_ = apply_wait(state_, dyn_, duration);
    clock_ += duration;
}

std::vector<ScanTrace> simulate_scan(const MoleculeModel& mol, const FieldState& state,
                                     const NoiseModel& noise, const ElectrodeGeometry& geom,
                                     const ScanConfig& cfg, Execution exec) {
    Session session({mol}, noise, geom, ChargeDynamics{}, cfg, cfg.seed);
    session.set_state(state);
    return session.scan(std::nullopt, exec);
}

SweepMap simulate_sweep_map(const std::vector<MoleculeModel>& mols, const FieldState& state,
                            const NoiseModel& noise, const ElectrodeGeometry& geom,
                            const std::vector<double>& voltages, const ScanConfig& cfg,
                            Execution exec) {
    Session session(mols, noise, geom, ChargeDynamics{}, cfg, cfg.seed);
    session.set_state(state);
    return session.sweep(voltages, exec);
}

} // namespace starktune
