#include "starktune/config.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "starktune/error.hpp"

namespace starktune {

std::string Diagnostic::format(const std::string& path) const {
    const char* kind = error ? "error" : "warning";
    if (line > 0) return fmt::format("{}:{}:{}: {}: {}", path, line, column, kind, message);
    return fmt::format("{}: {}: {}", path, kind, message);
}

namespace {

Diagnostic at_node(const YAML::Node& node, std::string message, bool error) {
    Diagnostic d;
    d.message = std::move(message);
    d.error = error;
    if (node.IsDefined()) {
        const auto m = node.Mark();
        if (m.line >= 0) {
            d.line = m.line + 1;
            d.column = m.column + 1;
        }
    }
    return d;
}

bool finite(double v) { return std::isfinite(v); }
bool positive(double v) { return finite(v) && v > 0.0; }
bool non_negative(double v) { return finite(v) && v >= 0.0; }

} // namespace

void ConfigReader::error(const YAML::Node& at, const std::string& message) {
    diags_.push_back(at_node(at, message, true));
}

void ConfigReader::warning(const YAML::Node& at, const std::string& message) {
    diags_.push_back(at_node(at, message, false));
}

bool ConfigReader::failed() const {
    for (const auto& d : diags_) {
        if (d.error) return true;
    }
    return false;
}

void ConfigReader::allow(const YAML::Node& node, const std::string& where, std::initializer_list<const char*> keys) {
    if (!node.IsMap()) {
        error(node, where + " must be a mapping");
        return;
    }
    const std::set<std::string> known(keys.begin(), keys.end());
    for (const auto& kv : node) {
        const auto key = kv.first.as<std::string>();
        if (known.count(key)) continue;
        const auto msg = fmt::format("unknown key '{}' in {}", key, where);
        if (strict_) error(kv.first, msg);
        else warning(kv.first, msg);
    }
}

std::optional<double> ConfigReader::number(const YAML::Node& node, const std::string& where, const char* key) {
    if (!node.IsMap()) return std::nullopt;
    const YAML::Node v = node[key];
    if (!v) return std::nullopt;
    try {
        if (!v.IsScalar()) throw YAML::BadConversion(v.Mark());
        const auto s = v.as<std::string>();
        if (s == "inf" || s == ".inf") return std::numeric_limits<double>::infinity();
        return v.as<double>();
    } catch (const YAML::Exception&) {
        error(v, fmt::format("{}.{} must be a number", where, key));
        return std::nullopt;
    }
}

std::optional<std::int64_t> ConfigReader::integer(const YAML::Node& node, const std::string& where, const char* key) {
    if (!node.IsMap()) return std::nullopt;
    const YAML::Node v = node[key];
    if (!v) return std::nullopt;
    try {
        return v.as<std::int64_t>();
    } catch (const YAML::Exception&) {
        error(v, fmt::format("{}.{} must be an integer", where, key));
        return std::nullopt;
    }
}

std::optional<std::string> ConfigReader::text(const YAML::Node& node, const std::string& where, const char* key) {
    if (!node.IsMap()) return std::nullopt;
    const YAML::Node v = node[key];
    if (!v) return std::nullopt;
    if (!v.IsScalar()) {
        error(v, fmt::format("{}.{} must be a string", where, key));
        return std::nullopt;
    }
    return v.as<std::string>();
}

std::optional<std::vector<double>> ConfigReader::numbers(const YAML::Node& node, const std::string& where, const char* key) {
    if (!node.IsMap()) return std::nullopt;
    const YAML::Node v = node[key];
    if (!v) return std::nullopt;
    if (!v.IsSequence()) {
        error(v, fmt::format("{}.{} must be a list of numbers", where, key));
        return std::nullopt;
    }
    std::vector<double> out;
    for (const auto& item : v) {
        try {
            out.push_back(item.as<double>());
        } catch (const YAML::Exception&) {
            error(item, fmt::format("{}.{} must contain only numbers", where, key));
            return std::nullopt;
        }
    }
    return out;
}

const char* action_name(ActionKind kind) {
    switch (kind) {
    case ActionKind::set_voltage: return "set_voltage";
    case ActionKind::scan: return "scan";
    case ActionKind::sweep: return "sweep";
    case ActionKind::oss: return "oss";
    case ActionKind::egoss: return "egoss";
    case ActionKind::wait: return "wait";
    }
    return "?";
}

namespace {

void read_geometry(ConfigReader& rd, const YAML::Node& n, ElectrodeGeometry& g) {
    if (!n) return;
    rd.allow(n, "geometry", {"geometry_factor", "v_min", "v_max"});
    rd.field(n, "geometry", "geometry_factor", g.g, positive, "> 0");
    rd.field(n, "geometry", "v_min", g.v_min, finite, "finite");
    rd.field(n, "geometry", "v_max", g.v_max, finite, "finite");
    if (!(g.v_min < g.v_max)) rd.error(n, "geometry: v_min must be < v_max");
}

void read_noise(ConfigReader& rd, const YAML::Node& n, NoiseModel& s) {
    if (!n) return;
    rd.allow(n, "noise", {"sigma_ex", "sigma_ez", "sigma0", "tau_fast", "tau_slow", "w_fast"});
    rd.field(n, "noise", "sigma_ex", s.sigma_ex, non_negative, ">= 0");
    rd.field(n, "noise", "sigma_ez", s.sigma_ez, non_negative, ">= 0");
    rd.field(n, "noise", "sigma0", s.sigma0, non_negative, ">= 0");
    rd.field(n, "noise", "tau_fast", s.tau_fast, positive, "> 0");
    rd.field(n, "noise", "tau_slow", s.tau_slow, positive, "> 0");
    rd.field(n, "noise", "w_fast", s.w_fast, [](double v) { return v >= 0.0 && v <= 1.0; }, "in [0, 1]");
    if (s.tau_slow < s.tau_fast) rd.error(n, "noise: tau_slow must be >= tau_fast");
}

void read_dynamics(ConfigReader& rd, const YAML::Node& n, ChargeDynamics& d) {
    if (!n) return;
    rd.allow(n, "dynamics", {"k_screen", "r_z", "e_z_sat", "decay_time"});
    rd.field(n, "dynamics", "k_screen", d.k_screen, positive, "> 0");
    rd.field(n, "dynamics", "r_z", d.r_z, positive, "> 0");
    rd.field(n, "dynamics", "e_z_sat", d.e_z_sat, positive, "> 0");
    rd.field(n, "dynamics", "decay_time", d.decay_time, [](double v) { return v > 0.0; }, "> 0");
}

void read_state(ConfigReader& rd, const YAML::Node& n, FieldState& s) {
    if (!n) return;
    rd.allow(n, "state", {"v_applied", "e_screen_x", "e_z_charge"});
    rd.field(n, "state", "v_applied", s.v_applied, finite, "finite");
    rd.field(n, "state", "e_screen_x", s.e_screen_x, finite, "finite");
    rd.field(n, "state", "e_z_charge", s.e_z_charge, non_negative, ">= 0");
}

void read_molecule(ConfigReader& rd, const YAML::Node& n, const std::string& where, MoleculeModel& m) {
    rd.allow(n, where, {"id", "nu_zpl_thz", "kappa_xx", "kappa_zz", "d_x", "d_z", "e0_x", "e0_z", "gamma0",
                        "peak_rate", "dw_qy"});
    rd.field(n, where, "nu_zpl_thz", m.nu_zpl, positive, "> 0");
    rd.field(n, where, "kappa_xx", m.kappa_xx, non_negative, ">= 0");
    rd.field(n, where, "kappa_zz", m.kappa_zz, non_negative, ">= 0");
    rd.field(n, where, "d_x", m.d_x, finite, "finite");
    rd.field(n, where, "d_z", m.d_z, finite, "finite");
    rd.field(n, where, "e0_x", m.e0_x, finite, "finite");
    rd.field(n, where, "e0_z", m.e0_z, finite, "finite");
    rd.field(n, where, "gamma0", m.gamma0, positive, "> 0");
    rd.field(n, where, "peak_rate", m.peak_rate, non_negative, ">= 0");
    rd.field(n, where, "dw_qy", m.dw_qy, [](double v) { return v > 0.0 && v <= 1.0; }, "in (0, 1]");
}

void read_scan(ConfigReader& rd, const YAML::Node& n, ScanConfig& c) {
    if (!n) return;
    rd.allow(n, "scan", {"span_ghz", "scan_speed_ghz_s", "bin_time_s", "n_sweeps", "inter_sweep_wait_s", "center_mhz",
                         "background_fraction"});
    rd.field(n, "scan", "span_ghz", c.span_ghz, positive, "> 0");
    rd.field(n, "scan", "scan_speed_ghz_s", c.scan_speed, positive, "> 0");
    rd.field(n, "scan", "bin_time_s", c.bin_time, positive, "> 0");
    rd.field(n, "scan", "inter_sweep_wait_s", c.inter_sweep_wait, non_negative, ">= 0");
    rd.field(n, "scan", "center_mhz", c.center_mhz, finite, "finite");
    rd.field(n, "scan", "background_fraction", c.background_fraction, non_negative, ">= 0");
    if (auto v = rd.integer(n, "scan", "n_sweeps")) {
        if (*v < 1) rd.error(n["n_sweeps"], "scan.n_sweeps must be >= 1");
        else c.n_sweeps = static_cast<int>(*v);
    }
    if (c.span_ghz > 0.0 && c.scan_speed > 0.0 && c.bin_time > 0.0 && c.n_bins() < 2) {
        rd.error(n, "scan: span must cover at least two bins");
    }
}

// `voltages: [...]` or `from`/`to`/`count`.
std::vector<double> read_voltage_list(ConfigReader& rd, const YAML::Node& n, const std::string& where) {
    if (auto list = rd.numbers(n, where, "voltages")) {
        if (list->empty()) rd.error(n["voltages"], where + ".voltages must not be empty");
        return *list;
    }
    auto from = rd.number(n, where, "from");
    auto to = rd.number(n, where, "to");
    auto count = rd.integer(n, where, "count");
    if (!from || !to || !count) {
        rd.error(n, where + " needs either voltages or from/to/count");
        return {};
    }
    if (*count < 1) {
        rd.error(n["count"], where + ".count must be >= 1");
        return {};
    }
    return linspace(*from, *to, static_cast<int>(*count));
}

void check_voltages(ConfigReader& rd, const YAML::Node& n, const std::string& where, const std::vector<double>& vs,
                    const ElectrodeGeometry& g) {
    for (double v : vs) {
        if (!g.in_range(v)) {
            rd.error(n, fmt::format("{}: voltage {} outside [{}, {}]", where, v, g.v_min, g.v_max));
            return;
        }
    }
}

void read_action(ConfigReader& rd, const YAML::Node& n, std::size_t index, const ElectrodeGeometry& g,
                 std::vector<Action>& out) {
    const std::string where = fmt::format("actions[{}]", index);
    if (!n.IsMap()) {
        rd.error(n, where + " must be a mapping");
        return;
    }
    const auto kind = rd.text(n, where, "action");
    if (!kind) {
        rd.error(n, where + ".action is required");
        return;
    }
    Action a;
    a.line = n.Mark().line + 1;
    if (*kind == "set_voltage") {
        a.kind = ActionKind::set_voltage;
        rd.allow(n, where, {"action", "voltage"});
        if (auto v = rd.number(n, where, "voltage")) {
            a.voltage = *v;
            check_voltages(rd, n["voltage"], where, {a.voltage}, g);
        } else {
            rd.error(n, where + ".voltage is required");
        }
    } else if (*kind == "scan") {
        a.kind = ActionKind::scan;
        rd.allow(n, where, {"action", "n_sweeps"});
        if (auto v = rd.integer(n, where, "n_sweeps")) {
            if (*v < 1) rd.error(n["n_sweeps"], where + ".n_sweeps must be >= 1");
            else a.n_sweeps = static_cast<int>(*v);
        }
    } else if (*kind == "sweep") {
        a.kind = ActionKind::sweep;
        rd.allow(n, where, {"action", "voltages", "from", "to", "count"});
        a.voltages = read_voltage_list(rd, n, where);
        check_voltages(rd, n, where, a.voltages, g);
    } else if (*kind == "oss" || *kind == "egoss" || *kind == "wait") {
        a.kind = *kind == "oss" ? ActionKind::oss : *kind == "egoss" ? ActionKind::egoss : ActionKind::wait;
        if (a.kind == ActionKind::egoss) rd.allow(n, where, {"action", "v_bias", "intensity", "duration_s"});
        else if (a.kind == ActionKind::oss) rd.allow(n, where, {"action", "intensity", "duration_s"});
        else rd.allow(n, where, {"action", "duration_s"});
        if (auto v = rd.number(n, where, "duration_s")) {
            if (!non_negative(*v)) rd.error(n["duration_s"], where + ".duration_s must be >= 0");
            else a.duration = *v;
        } else {
            rd.error(n, where + ".duration_s is required");
        }
        if (a.kind != ActionKind::wait) rd.field(n, where, "intensity", a.intensity, non_negative, ">= 0");
        if (a.kind == ActionKind::egoss) {
            if (auto v = rd.number(n, where, "v_bias")) {
                a.v_bias = *v;
                check_voltages(rd, n["v_bias"], where, {a.v_bias}, g);
            } else {
                rd.error(n, where + ".v_bias is required");
            }
        }
    } else {
        rd.error(n["action"], fmt::format("{}.action '{}' is not one of set_voltage, scan, sweep, oss, egoss, wait", where, *kind));
        return;
    }
    out.push_back(std::move(a));
}

YAML::Node parse_yaml(const std::string& text, ConfigReader& rd) {
    try {
        return YAML::Load(text);
    } catch (const YAML::ParserException& e) {
        Diagnostic d;
        d.line = e.mark.line + 1;
        d.column = e.mark.column + 1;
        d.message = e.msg;
        rd.add(std::move(d));
        return {};
    }
}

} // namespace

ParsedScenario parse_scenario(const std::string& text, bool strict) {
    ConfigReader rd(strict);
    ParsedScenario out;
    const YAML::Node root = parse_yaml(text, rd);
    if (rd.failed()) {
        out.diagnostics = rd.diagnostics();
        return out;
    }
    if (!root.IsMap()) {
        rd.error(root, "scenario must be a mapping");
        out.diagnostics = rd.diagnostics();
        return out;
    }
    Scenario& s = out.scenario;
    rd.allow(root, "scenario", {"seed", "geometry", "molecules", "noise", "dynamics", "scan", "state", "sweep", "actions"});
    if (auto v = rd.integer(root, "scenario", "seed")) {
        if (*v < 0) rd.error(root["seed"], "seed must be >= 0");
        else s.seed = static_cast<std::uint64_t>(*v);
    }
    read_geometry(rd, root["geometry"], s.geometry);
    read_noise(rd, root["noise"], s.noise);
    read_dynamics(rd, root["dynamics"], s.dynamics);
    read_scan(rd, root["scan"], s.scan);
    read_state(rd, root["state"], s.initial_state);

    const YAML::Node mols = root["molecules"];
    if (!mols) {
        rd.error(root, "molecules is required");
    } else if (!mols.IsSequence() || mols.size() == 0) {
        rd.error(mols, "molecules must be a non-empty list");
    } else {
        std::set<std::string> ids;
        for (std::size_t i = 0; i < mols.size(); ++i) {
            const std::string where = fmt::format("molecules[{}]", i);
            MoleculeModel m;
            if (!mols[i].IsMap()) {
                rd.error(mols[i], where + " must be a mapping");
                continue;
            }
            read_molecule(rd, mols[i], where, m);
            std::string id = rd.text(mols[i], where, "id").value_or(fmt::format("mol{}", i));
            if (!ids.insert(id).second) rd.error(mols[i]["id"], fmt::format("{}.id '{}' is not unique", where, id));
            s.molecules.push_back(m);
            s.molecule_ids.push_back(id);
        }
    }

    if (const YAML::Node sw = root["sweep"]) {
        rd.allow(sw, "sweep", {"voltages", "from", "to", "count"});
        s.sweep_voltages = read_voltage_list(rd, sw, "sweep");
        check_voltages(rd, sw, "sweep", s.sweep_voltages, s.geometry);
    }
    if (const YAML::Node acts = root["actions"]) {
        if (!acts.IsSequence()) {
            rd.error(acts, "actions must be a list");
        } else {
            for (std::size_t i = 0; i < acts.size(); ++i) read_action(rd, acts[i], i, s.geometry, s.actions);
        }
    }
    if (!s.geometry.in_range(s.initial_state.v_applied)) rd.error(root["state"], "state.v_applied outside the voltage range");

    out.diagnostics = rd.diagnostics();
    out.ok = !rd.failed();
    return out;
}

std::string read_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw ConfigError(fmt::format("cannot read '{}'", path));
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

namespace {

[[noreturn]] void fail(const std::string& path, const std::vector<Diagnostic>& diags) {
    std::string msg;
    for (const auto& d : diags) {
        if (!d.error) continue;
        if (!msg.empty()) msg += '\n';
        msg += d.format(path);
    }
    throw ConfigError(msg);
}

void keep_warnings(const std::vector<Diagnostic>& diags, std::vector<Diagnostic>* warnings) {
    if (!warnings) return;
    for (const auto& d : diags) {
        if (!d.error) warnings->push_back(d);
    }
}

} // namespace

Scenario load_scenario(const std::string& path, bool strict, std::vector<Diagnostic>* warnings) {
    auto parsed = parse_scenario(read_file(path), strict);
    if (!parsed.ok) fail(path, parsed.diagnostics);
    keep_warnings(parsed.diagnostics, warnings);
    return parsed.scenario;
}

ParsedPlanRequest parse_plan_request(const std::string& text, bool strict) {
    ConfigReader rd(strict);
    ParsedPlanRequest out;
    const YAML::Node root = parse_yaml(text, rd);
    if (rd.failed()) {
        out.diagnostics = rd.diagnostics();
        return out;
    }
    if (!root.IsMap()) {
        rd.error(root, "plan file must be a mapping");
        out.diagnostics = rd.diagnostics();
        return out;
    }
    PlanRequest& p = out.request;
    rd.allow(root, "plan file", {"calibration", "sensitivity", "molecule", "noise", "constraints", "geometry",
                                 "dynamics", "state", "target_shift"});
    if (const YAML::Node c = root["calibration"]) {
        rd.allow(c, "calibration", {"sigma_base", "sigma_x", "shift_x", "sigma_z", "shift_z"});
        double v[5] = {};
        const char* keys[5] = {"sigma_base", "sigma_x", "shift_x", "sigma_z", "shift_z"};
        bool complete = true;
        for (int i = 0; i < 5; ++i) {
            if (auto x = rd.number(c, "calibration", keys[i])) {
                if (!non_negative(*x)) rd.error(c[keys[i]], fmt::format("calibration.{} must be >= 0", keys[i]));
                v[i] = *x;
            } else {
                rd.error(c, fmt::format("calibration.{} is required", keys[i]));
                complete = false;
            }
        }
        if (complete && !rd.failed()) {
            try {
                p.calibration = calibrate_anisotropy(v[0], v[1], v[2], v[3], v[4]);
            } catch (const std::invalid_argument& e) {
                rd.error(c, e.what());
            }
        }
    }
    if (const YAML::Node s = root["sensitivity"]) {
        rd.allow(s, "sensitivity", {"a_x", "a_z", "sigma0"});
        SdSensitivity sens;
        rd.field(s, "sensitivity", "a_x", sens.a_x, non_negative, ">= 0");
        rd.field(s, "sensitivity", "a_z", sens.a_z, non_negative, ">= 0");
        rd.field(s, "sensitivity", "sigma0", sens.sigma0, non_negative, ">= 0");
        p.sensitivity = sens;
    }
    if (const YAML::Node m = root["molecule"]) {
        MoleculeModel mol;
        read_molecule(rd, m, "molecule", mol);
        p.molecule = mol;
    }
    if (const YAML::Node n = root["noise"]) {
        NoiseModel noise;
        read_noise(rd, n, noise);
        p.noise = noise;
    }
    if (const YAML::Node c = root["constraints"]) {
        rd.allow(c, "constraints", {"e_x_max", "e_z_max", "operating_voltage", "shift_tolerance"});
        rd.field(c, "constraints", "e_x_max", p.constraints.e_x_max, positive, "> 0");
        rd.field(c, "constraints", "e_z_max", p.constraints.e_z_max, positive, "> 0");
        rd.field(c, "constraints", "shift_tolerance", p.constraints.shift_tolerance, positive, "> 0");
        if (auto v = rd.number(c, "constraints", "operating_voltage")) p.constraints.operating_voltage = *v;
    }
    read_geometry(rd, root["geometry"], p.geometry);
    read_dynamics(rd, root["dynamics"], p.dynamics);
    read_state(rd, root["state"], p.state);
    if (auto t = rd.number(root, "plan file", "target_shift")) p.target_shift = *t;

    if (!p.calibration && !p.sensitivity && !(p.molecule && p.noise)) {
        rd.error(root, "plan file needs a calibration block, a sensitivity block, or molecule plus noise");
    }
    if (p.calibration && p.sensitivity) rd.error(root["sensitivity"], "give either calibration or sensitivity, not both");
    if (p.constraints.operating_voltage && !p.geometry.in_range(*p.constraints.operating_voltage)) {
        rd.error(root["constraints"]["operating_voltage"], "constraints.operating_voltage outside the voltage range");
    }
    out.diagnostics = rd.diagnostics();
    out.ok = !rd.failed();
    return out;
}

PlanRequest load_plan_request(const std::string& path, bool strict, std::vector<Diagnostic>* warnings) {
    auto parsed = parse_plan_request(read_file(path), strict);
    if (!parsed.ok) fail(path, parsed.diagnostics);
    keep_warnings(parsed.diagnostics, warnings);
    return parsed.request;
}

} // namespace starktune
