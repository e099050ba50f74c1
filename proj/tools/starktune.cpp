#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <omp.h>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <fmt/ostream.h>

#include "starktune/config.hpp"
#include "starktune/error.hpp"
#include "starktune/fitkit.hpp"
#include "starktune/planner.hpp"
#include "starktune/report.hpp"
#include "starktune/trace_io.hpp"

namespace fs = std::filesystem;
using namespace starktune;
using nlohmann::json;

namespace {

enum Exit { ok = 0, other = 1, config_error = 2, data_error = 3, fit_error = 4, infeasible = 5 };

struct Globals {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out;
    bool strict = false;
    int jobs = 0;
};

struct Run {
    RunManifest manifest;
    fs::path out_dir;
    std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();

    std::string output(const std::string& name) {
        const auto p = (out_dir / name).string();
        manifest.outputs.push_back(p);
        return p;
    }

    void finish(const std::string& name) {
        manifest.wall_clock_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        write_json((out_dir / (name + ".manifest.json")).string(), manifest.to_json());
    }
};

fs::path output_dir(const Globals& g) {
    fs::path dir = ".";
    if (const char* env = std::getenv("STARKTUNE_OUT_DIR"); env && *env) dir = env;
    if (!g.out.empty()) dir = g.out;
    fs::create_directories(dir);
    return dir;
}

Run begin(const Globals& g, const std::string& command, const std::vector<std::string>& argv) {
    Run r;
    r.out_dir = output_dir(g);
    r.manifest.command = command;
    r.manifest.argv = argv;
    return r;
}

void print_warnings(const std::string& path, const std::vector<Diagnostic>& diags) {
    for (const auto& d : diags) std::cerr << d.format(path) << '\n';
}

Scenario scenario_for(const Globals& g, Run& run) {
    if (g.config.empty()) throw ConfigError("--config is required");
    std::vector<Diagnostic> warnings;
    Scenario s = load_scenario(g.config, g.strict, &warnings);
    print_warnings(g.config, warnings);
    if (g.seed) s.seed = *g.seed;
    run.manifest.scenario_path = g.config;
    run.manifest.inputs.push_back(g.config);
    run.manifest.seed = s.seed;
    run.manifest.has_seed = true;
    return s;
}

void write_file(const std::string& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw DataError(fmt::format("cannot write '{}'", path));
    f << text;
}

std::string traces_csv(const std::vector<ScanTrace>& traces) {
    std::ostringstream ss;
    write_traces(ss, traces);
    return ss.str();
}

std::string map_csv(const SweepMap& map) {
    std::ostringstream ss;
    write_sweep_map(ss, map);
    return ss.str();
}

int simulate_scan(const Globals& g, const std::vector<std::string>& argv) {
    Run run = begin(g, "simulate scan", argv);
    const Scenario s = scenario_for(g, run);
    Session session = make_session(s);
    const auto traces = session.scan();
    write_file(run.output("scan.csv"), traces_csv(traces));
    run.finish("simulate_scan");
    return ok;
}

int simulate_sweep(const Globals& g, const std::vector<std::string>& argv) {
    Run run = begin(g, "simulate sweep", argv);
    const Scenario s = scenario_for(g, run);
    Session session = make_session(s);
    const auto voltages = s.sweep_voltages.empty() ? linspace(s.geometry.v_min, s.geometry.v_max, 21) : s.sweep_voltages;
    SweepMap map = session.sweep(voltages);
    map.molecule_ids = s.molecule_ids;
    write_file(run.output("sweep.csv"), map_csv(map));
    run.finish("simulate_sweep");
    return ok;
}

int simulate_scenario(const Globals& g, const std::vector<std::string>& argv) {
    Run run = begin(g, "simulate scenario", argv);
    const Scenario s = scenario_for(g, run);
    const auto steps = run_scenario(s);
    json log = json::array();
    for (const auto& st : steps) {
        json entry{{"step", st.index}, {"action", action_name(st.kind)}, {"state", to_json(st.state)}, {"clock_s", st.clock}};
        const auto stem = fmt::format("step{:02d}_{}", st.index, action_name(st.kind));
        if (st.kind == ActionKind::scan) {
            const auto path = run.output(stem + ".csv");
            write_file(path, traces_csv(st.traces));
            entry["output"] = path;
        } else if (st.kind == ActionKind::sweep) {
            const auto path = run.output(stem + ".csv");
            write_file(path, map_csv(*st.map));
            entry["output"] = path;
        }
        log.push_back(entry);
    }
    write_json(run.output("scenario_log.json"), json{{"type", "scenario_log"}, {"seed", s.seed}, {"steps", log}});
    run.finish("simulate_scenario");
    return ok;
}

struct VoigtArgs {
    std::string input;
    bool integrate = false;
    bool free_gamma = false;
    double fix_gamma = kDefaultFixedGamma;
    std::vector<double> window;
};

VoigtFitOptions voigt_options(const VoigtArgs& a) {
    VoigtFitOptions o;
    if (!a.free_gamma) o.fix_gamma = a.fix_gamma;
    if (a.window.size() == 2) o.window = std::make_pair(a.window[0], a.window[1]);
    return o;
}

json voigt_config(const VoigtArgs& a) {
    return json{{"input", a.input}, {"integrate", a.integrate}, {"fix_gamma_MHz", a.free_gamma ? json(nullptr) : json(a.fix_gamma)},
                {"window_MHz", a.window.size() == 2 ? json(a.window) : json(nullptr)}};
}

int fit_voigt_cmd(const Globals& g, const VoigtArgs& a, const std::vector<std::string>& argv) {
    Run run = begin(g, "fit voigt", argv);
    run.manifest.inputs.push_back(a.input);
    const auto traces = load_traces(a.input);
    const auto opts = voigt_options(a);
    json fits = json::array();
    if (a.integrate) {
        const Spectrum s = integrate_traces(traces);
        json doc = to_json(fit_voigt(s, opts));
        doc["n_traces"] = s.n_traces;
        doc["observation_span_s"] = s.observation_span_s;
        doc["config"] = voigt_config(a);
        fits.push_back(doc);
    } else {
        std::vector<Spectrum> spectra;
        for (const auto& t : traces) spectra.push_back(spectrum_from_trace(t));
        const auto results = fit_voigt_batch(spectra, opts);
        for (std::size_t i = 0; i < results.size(); ++i) {
            json doc = to_json(results[i]);
            doc["sweep_index"] = traces[i].sweep_index;
            doc["config"] = voigt_config(a);
            fits.push_back(doc);
        }
    }
    write_json(run.output("voigt_fit.json"), json{{"fits", fits}});
    run.finish("fit_voigt");
    return ok;
}

struct ParabolaArgs {
    std::string input;
    std::vector<double> mask;
    double g_uncertainty = 0.0;
    std::optional<double> geometry_factor;
    std::optional<double> seed_center;
    double max_jump = 3000.0;
};

ElectrodeGeometry geometry_for(const Globals& g, Run& run, std::optional<double> factor) {
    ElectrodeGeometry geom;
    if (!g.config.empty()) {
        std::vector<Diagnostic> warnings;
        geom = load_scenario(g.config, g.strict, &warnings).geometry;
        print_warnings(g.config, warnings);
        run.manifest.inputs.push_back(g.config);
        run.manifest.scenario_path = g.config;
    }
    if (factor) geom.g = *factor;
    geom.validate();
    return geom;
}

LineTrack track(const ParabolaArgs& a) {
    const SweepMap map = load_sweep_map(a.input);
    TrackOptions opts;
    opts.max_jump = a.max_jump;
    opts.seed_center = a.seed_center;
    if (a.mask.size() == 2) opts.voltage_mask = std::make_pair(a.mask[0], a.mask[1]);
    return track_line(map, opts);
}

int fit_parabola_cmd(const Globals& g, const ParabolaArgs& a, const std::vector<std::string>& argv) {
    Run run = begin(g, "fit parabola", argv);
    const ElectrodeGeometry geom = geometry_for(g, run, a.geometry_factor);
    run.manifest.inputs.push_back(a.input);
    const LineTrack line = track(a);
    const ParabolaFit fit = fit_parabola(line.parabola_points(), geom, a.g_uncertainty);
    json doc = to_json(fit);
    json points = json::array();
    for (const auto& p : line.points) {
        points.push_back({{"voltage_V", p.voltage}, {"center_MHz", p.fit.center}, {"center_err_MHz", p.fit.center_err},
                          {"sigma_MHz", p.fit.sigma}, {"sigma_err_MHz", p.fit.sigma_err}});
    }
    doc["points"] = points;
    doc["config"] = {{"input", a.input}, {"geometry_factor", geom.g}, {"g_uncertainty", a.g_uncertainty},
                     {"voltage_mask_V", a.mask.size() == 2 ? json(a.mask) : json(nullptr)}, {"max_jump_MHz", a.max_jump}};
    write_json(run.output("parabola_fit.json"), doc);
    run.finish("fit_parabola");
    return ok;
}

struct SdlawArgs {
    std::string input;
    std::optional<double> kappa;
    double kappa_err = 0.0;
};

std::vector<SqrtLawPoint> load_points(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw DataError(fmt::format("cannot open '{}'", path));
    return read_sqrt_law_points(f);
}

int fit_sdlaw_cmd(const Globals& g, const SdlawArgs& a, const std::vector<std::string>& argv) {
    Run run = begin(g, "fit sdlaw", argv);
    run.manifest.inputs.push_back(a.input);
    const SqrtLawFit fit = fit_sqrt_law(load_points(a.input));
    if (fit.unphysical) std::cerr << "warning: fitted a is negative (unphysical)\n";
    json doc = to_json(fit);
    if (a.kappa) {
        doc["field_spread"] = to_json(extract_field_variance(std::max(fit.a, 0.0), *a.kappa, fit.a_err, a.kappa_err));
    }
    doc["config"] = {{"input", a.input}, {"kappa", a.kappa ? json(*a.kappa) : json(nullptr)}, {"kappa_err", a.kappa_err}};
    write_json(run.output("sdlaw_fit.json"), doc);
    run.finish("fit_sdlaw");
    return ok;
}

struct CalibrateArgs {
    std::vector<double> values; // sigma_base sigma_x shift_x sigma_z shift_z
};

int calibrate_cmd(const Globals& g, const CalibrateArgs& a, const std::vector<std::string>& argv) {
    Run run = begin(g, "calibrate", argv);
    AnisotropyCalibration cal;
    if (a.values.size() == 5) {
        try {
            cal = calibrate_anisotropy(a.values[0], a.values[1], a.values[2], a.values[3], a.values[4]);
        } catch (const std::invalid_argument& e) {
            throw ConfigError(e.what());
        }
    } else {
        if (g.config.empty()) throw ConfigError("calibrate needs --config or --triple");
        std::vector<Diagnostic> warnings;
        const PlanRequest req = load_plan_request(g.config, g.strict, &warnings);
        print_warnings(g.config, warnings);
        run.manifest.inputs.push_back(g.config);
        if (!req.calibration) throw ConfigError(fmt::format("{}: no calibration block", g.config));
        cal = *req.calibration;
    }
    write_json(run.output("calibration.json"), to_json(cal));
    run.finish("calibrate");
    return ok;
}

struct PlanArgs {
    std::optional<double> target;
    std::optional<double> operating_voltage;
};

int plan_cmd(const Globals& g, const PlanArgs& a, const std::vector<std::string>& argv) {
    Run run = begin(g, "plan", argv);
    if (g.config.empty()) throw ConfigError("plan needs --config");
    std::vector<Diagnostic> warnings;
    PlanRequest req = load_plan_request(g.config, g.strict, &warnings);
    print_warnings(g.config, warnings);
    run.manifest.inputs.push_back(g.config);
    const auto target = a.target ? a.target : req.target_shift;
    if (!target) throw ConfigError("plan needs --target or target_shift in the plan file");
    if (a.operating_voltage) req.constraints.operating_voltage = *a.operating_voltage;

    TuningPlan plan;
    json provenance;
    if (req.molecule && req.noise && !req.calibration && !req.sensitivity) {
        plan = plan_min_sd(*req.molecule, *req.noise, *target, req.constraints);
        provenance = {{"source", "molecule+noise"}};
        if (req.constraints.operating_voltage) {
            plan.schedule = synthesize_schedule(plan, *req.molecule, req.state, req.dynamics, req.geometry,
                                                *req.constraints.operating_voltage, 1.0, req.constraints.shift_tolerance);
        }
    } else {
        const SdSensitivity sens = req.calibration ? req.calibration->sensitivity() : *req.sensitivity;
        const double inf = std::numeric_limits<double>::infinity();
        double sx_max = inf, sz_max = inf;
        if (req.molecule) {
            sx_max = req.molecule->kappa_xx * req.constraints.e_x_max * req.constraints.e_x_max;
            sz_max = req.molecule->kappa_zz * req.constraints.e_z_max * req.constraints.e_z_max;
        }
        plan = plan_shift_split(sens, *target, 0.0, sx_max, 0.0, sz_max);
        provenance = req.calibration ? json{{"source", "calibration"}, {"calibration", to_json(*req.calibration)}}
                                     : json{{"source", "sensitivity"}, {"a_x_MHz", sens.a_x}, {"a_z_MHz", sens.a_z}, {"sigma0_MHz", sens.sigma0}};
    }
    json doc = to_json(plan);
    doc["provenance"] = provenance;
    doc["constraints"] = {{"e_x_max_kV_per_cm", req.constraints.e_x_max}, {"e_z_max_kV_per_cm", req.constraints.e_z_max},
                          {"operating_voltage_V", req.constraints.operating_voltage ? json(*req.constraints.operating_voltage) : json(nullptr)},
                          {"shift_tolerance_MHz", req.constraints.shift_tolerance}};
    write_json(run.output("plan.json"), doc);
    run.finish("plan");
    return ok;
}

struct ReportArgs {
    std::string kind;
    std::string input;
    VoigtArgs voigt;
    ParabolaArgs parabola;
};

int report_cmd(const Globals& g, ReportArgs& a, const std::vector<std::string>& argv) {
    Run run = begin(g, "report", argv);
    run.manifest.inputs.push_back(a.input);
    std::ostringstream ss;
    if (a.kind == "spectrum") {
        const Spectrum s = integrate_traces(load_traces(a.input));
        std::optional<VoigtFit> fit;
        try {
            fit = fit_voigt(s, voigt_options(a.voigt));
        } catch (const FitError& e) {
            std::cerr << "warning: " << e.what() << '\n';
        }
        ss << "detuning_MHz,counts,model_counts\n";
        for (std::size_t i = 0; i < s.detunings.size(); ++i) {
            if (fit) fmt::print(ss, "{},{},{}\n", s.detunings[i], s.counts[i], voigt_model(*fit, s.detunings[i]));
            else fmt::print(ss, "{},{},\n", s.detunings[i], s.counts[i]);
        }
    } else if (a.kind == "sdlaw") {
        const auto points = load_points(a.input);
        const SqrtLawFit fit = fit_sqrt_law(points);
        ss << "shift_MHz,sigma_MHz,sigma_err_MHz,model_sigma_MHz\n";
        for (const auto& p : points) {
            const double model = std::sqrt(std::max(4.0 * fit.a * p.shift + fit.offset, 0.0));
            fmt::print(ss, "{},{},{},{}\n", p.shift, p.sigma, p.sigma_err, model);
        }
    } else if (a.kind == "parabola") {
        a.parabola.input = a.input;
        const ElectrodeGeometry geom = geometry_for(g, run, a.parabola.geometry_factor);
        const LineTrack line = track(a.parabola);
        const ParabolaFit fit = fit_parabola(line.parabola_points(), geom, a.parabola.g_uncertainty);
        ss << "voltage_V,center_MHz,center_err_MHz,model_MHz\n";
        for (const auto& p : line.parabola_points()) {
            const double model = fit.coeffs[0] + fit.coeffs[1] * p.voltage + fit.coeffs[2] * p.voltage * p.voltage;
            fmt::print(ss, "{},{},{},{}\n", p.voltage, p.center, p.center_err, model);
        }
    } else {
        throw ConfigError(fmt::format("unknown report kind '{}'", a.kind));
    }
    write_file(run.output(fmt::format("report_{}.csv", a.kind)), ss.str());
    run.finish("report_" + a.kind);
    return ok;
}

int validate_cmd(const Globals& g) {
    if (g.config.empty()) throw ConfigError("validate needs --config");
    const std::string text = read_file(g.config);
    bool plan_file = false;
    try {
        const YAML::Node root = YAML::Load(text);
        plan_file = root.IsMap() && (root["calibration"] || root["sensitivity"]) && !root["molecules"];
    } catch (const YAML::Exception&) {
    }
    std::vector<Diagnostic> diags;
    bool good = false;
    if (plan_file) {
        auto p = parse_plan_request(text, g.strict);
        diags = p.diagnostics;
        good = p.ok;
    } else {
        auto p = parse_scenario(text, g.strict);
        diags = p.diagnostics;
        good = p.ok;
    }
    print_warnings(g.config, diags);
    if (!good) return config_error;
    std::cout << g.config << ": ok\n";
    return ok;
}

template <class F>
int guarded(F&& f) {
    try {
        return f();
    } catch (const InfeasibleError& e) {
        std::cerr << "infeasible (" << e.binding() << "): " << e.what() << '\n';
        return infeasible;
    } catch (const FitError& e) {
        std::cerr << "fit error: " << e.what() << '\n';
        return fit_error;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return data_error;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return config_error;
    } catch (const DegenerateError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return data_error;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return other;
    }
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Stark-tuning simulator, fitting toolkit and planner"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(version()));
    Globals g;
    auto add_globals = [&](CLI::App* c) {
        c->add_option("--config", g.config, "Scenario or plan file (YAML)");
        c->add_option("--seed", g.seed, "Override the scenario seed");
        c->add_option("--out", g.out, "Output directory (overrides STARKTUNE_OUT_DIR)");
        c->add_flag("--strict", g.strict, "Reject unknown configuration keys");
        c->add_option("--jobs", g.jobs, "Worker threads (0 = runtime default)")->check(CLI::NonNegativeNumber);
    };

    std::vector<std::string> args(argv, argv + argc);

    auto* sim = app.add_subcommand("simulate", "Run the virtual laboratory");
    sim->require_subcommand(1);
    auto* sim_scan = sim->add_subcommand("scan", "Repeated scans at the initial state");
    auto* sim_sweep = sim->add_subcommand("sweep", "Voltage sweep map");
    auto* sim_scenario = sim->add_subcommand("scenario", "Ordered action list");
    for (auto* c : {sim_scan, sim_sweep, sim_scenario}) add_globals(c);

    auto* fit = app.add_subcommand("fit", "Fit traces, sweep maps or SD points");
    fit->require_subcommand(1);
    VoigtArgs va;
    auto* fit_voigt_sc = fit->add_subcommand("voigt", "Voigt fit of each trace or of their sum");
    fit_voigt_sc->add_option("--input", va.input, "Trace file")->required();
    fit_voigt_sc->add_flag("--integrate", va.integrate, "Fit the bin-wise sum of all traces");
    fit_voigt_sc->add_flag("--free-gamma", va.free_gamma, "Fit the Lorentzian width");
    fit_voigt_sc->add_option("--fix-gamma", va.fix_gamma, "Fixed Lorentzian FWHM, MHz");
    fit_voigt_sc->add_option("--window", va.window, "Detuning window LO HI, MHz")->expected(2);
    ParabolaArgs pa;
    auto* fit_parabola_sc = fit->add_subcommand("parabola", "Track a line through a sweep map and fit its parabola");
    fit_parabola_sc->add_option("--input", pa.input, "Sweep-map file")->required();
    fit_parabola_sc->add_option("--mask", pa.mask, "Keep voltages LO HI")->expected(2);
    fit_parabola_sc->add_option("--g-uncertainty", pa.g_uncertainty, "Uncertainty of the geometry factor");
    fit_parabola_sc->add_option("--geometry-factor", pa.geometry_factor, "Geometry factor, (kV/cm)/V");
    fit_parabola_sc->add_option("--seed-center", pa.seed_center, "Line center near the middle voltage, MHz");
    fit_parabola_sc->add_option("--max-jump", pa.max_jump, "Maximum center jump per voltage step, MHz");
    SdlawArgs sa;
    auto* fit_sdlaw_sc = fit->add_subcommand("sdlaw", "Square-root law of SD width against shift");
    fit_sdlaw_sc->add_option("--input", sa.input, "Points file")->required();
    fit_sdlaw_sc->add_option("--kappa", sa.kappa, "kappa for the field spread, MHz/(kV/cm)^2");
    fit_sdlaw_sc->add_option("--kappa-err", sa.kappa_err, "Uncertainty of kappa");
    for (auto* c : {fit_voigt_sc, fit_parabola_sc, fit_sdlaw_sc}) add_globals(c);

    CalibrateArgs ca;
    auto* cal = app.add_subcommand("calibrate", "Anisotropy calibration from an SD triple");
    cal->add_option("--triple", ca.values, "SIGMA_BASE SIGMA_X SHIFT_X SIGMA_Z SHIFT_Z")->expected(5);
    add_globals(cal);

    PlanArgs pla;
    auto* plan = app.add_subcommand("plan", "Minimum-SD tuning plan");
    plan->add_option("--target", pla.target, "Target shift, MHz (<= 0)");
    plan->add_option("--operating-voltage", pla.operating_voltage, "Electrode voltage during operation, V");
    add_globals(plan);

    ReportArgs ra;
    auto* rep = app.add_subcommand("report", "Plot-ready comma-separated tables");
    rep->add_option("--kind", ra.kind, "spectrum | sdlaw | parabola")->required()->check(CLI::IsMember({"spectrum", "sdlaw", "parabola"}));
    rep->add_option("--input", ra.input, "Input file")->required();
    rep->add_flag("--free-gamma", ra.voigt.free_gamma, "Fit the Lorentzian width (spectrum)");
    rep->add_option("--mask", ra.parabola.mask, "Keep voltages LO HI (parabola)")->expected(2);
    add_globals(rep);

    auto* val = app.add_subcommand("validate", "Check a scenario or plan file");
    add_globals(val);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? ok : other;
    }
    if (g.jobs > 0) omp_set_num_threads(g.jobs);

    return guarded([&]() -> int {
        if (*sim_scan) return simulate_scan(g, args);
        if (*sim_sweep) return simulate_sweep(g, args);
        if (*sim_scenario) return simulate_scenario(g, args);
        if (*fit_voigt_sc) return fit_voigt_cmd(g, va, args);
        if (*fit_parabola_sc) return fit_parabola_cmd(g, pa, args);
        if (*fit_sdlaw_sc) return fit_sdlaw_cmd(g, sa, args);
        if (*cal) return calibrate_cmd(g, ca, args);
        if (*plan) return plan_cmd(g, pla, args);
        if (*rep) return report_cmd(g, ra, args);
        if (*val) return validate_cmd(g);
        return other;
    });
}
