#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <yaml-cpp/yaml.h>

#include "starktune/physics.hpp"
#include "starktune/planner.hpp"
#include "starktune/simkit.hpp"

namespace starktune {

struct Diagnostic {
    int line = 0; // 1-based, 0 when unknown
    int column = 0;
    std::string message;
    bool error = true;

    std::string format(const std::string& path) const;
};

// Collects diagnostics while reading a YAML document. Unknown keys are
// warnings, or errors in strict mode.
class ConfigReader {
public:
    explicit ConfigReader(bool strict) : strict_(strict) {}

    // Marks `keys` as the allowed keys of mapping `node` at `where`.
    void allow(const YAML::Node& node, const std::string& where, std::initializer_list<const char*> keys);

    std::optional<double> number(const YAML::Node& node, const std::string& where, const char* key);
    std::optional<std::int64_t> integer(const YAML::Node& node, const std::string& where, const char* key);
    std::optional<std::string> text(const YAML::Node& node, const std::string& where, const char* key);
    std::optional<std::vector<double>> numbers(const YAML::Node& node, const std::string& where, const char* key);

    // Reads `key` into `out` if present, then checks `ok` and reports
    // "<where>.<key> must be <rule>" otherwise.
    template <class Pred>
    void field(const YAML::Node& node, const std::string& where, const char* key, double& out, Pred ok, const char* rule) {
        if (auto v = number(node, where, key)) {
            if (!ok(*v)) error(node[key], where + "." + key + " must be " + rule);
            else out = *v;
        }
    }

    void error(const YAML::Node& at, const std::string& message);
    void warning(const YAML::Node& at, const std::string& message);
    void add(Diagnostic d) { diags_.push_back(std::move(d)); }

    const std::vector<Diagnostic>& diagnostics() const { return diags_; }
    bool failed() const;

private:
    bool strict_;
    std::vector<Diagnostic> diags_;
};

enum class ActionKind { set_voltage, scan, sweep, oss, egoss, wait };

const char* action_name(ActionKind kind);

struct Action {
    ActionKind kind = ActionKind::scan;
    double voltage = 0.0;   // set_voltage
    std::optional<int> n_sweeps; // scan
    std::vector<double> voltages; // sweep
    double v_bias = 0.0;    // egoss
    double intensity = 1.0; // oss, egoss
    double duration = 0.0;  // oss, egoss, wait
    int line = 0;
};

struct Scenario {
    std::uint64_t seed = 0;
    std::vector<std::string> molecule_ids;
    std::vector<MoleculeModel> molecules;
    NoiseModel noise;
    ElectrodeGeometry geometry;
    ChargeDynamics dynamics;
    ScanConfig scan;
    FieldState initial_state;
    std::vector<double> sweep_voltages; // for `simulate sweep`
    std::vector<Action> actions;
};

struct ParsedScenario {
    Scenario scenario;
    std::vector<Diagnostic> diagnostics;
    bool ok = false;
};

ParsedScenario parse_scenario(const std::string& text, bool strict);

// Throws ConfigError carrying every error diagnostic; warnings are returned.
Scenario load_scenario(const std::string& path, bool strict, std::vector<Diagnostic>* warnings = nullptr);

struct StepResult {
    std::size_t index = 0;
    ActionKind kind = ActionKind::scan;
    std::vector<ScanTrace> traces; // scan
    std::optional<SweepMap> map;   // sweep
    FieldState state;              // after the step
    double clock = 0.0;            // s, after the step
};

// Runs the actions in order on one Session seeded by the scenario seed.
std::vector<StepResult> run_scenario(const Scenario& scenario, Execution exec = Execution::parallel);

// Scenario session prepared with the initial state.
Session make_session(const Scenario& scenario);

struct PlanRequest {
    std::optional<AnisotropyCalibration> calibration;
    std::optional<SdSensitivity> sensitivity;
    std::optional<MoleculeModel> molecule;
    std::optional<NoiseModel> noise;
    TuningConstraints constraints;
    ElectrodeGeometry geometry;
    ChargeDynamics dynamics;
    FieldState state;
    std::optional<double> target_shift;
};

struct ParsedPlanRequest {
    PlanRequest request;
    std::vector<Diagnostic> diagnostics;
    bool ok = false;
};

// Calibration/plan file: a `calibration` block (sigma_base, sigma_x,
// shift_x, sigma_z, shift_z) or a `sensitivity` block (a_x, a_z, sigma0),
// optionally with molecule, noise, constraints, geometry, dynamics, state
// and target_shift.
ParsedPlanRequest parse_plan_request(const std::string& text, bool strict);
PlanRequest load_plan_request(const std::string& path, bool strict, std::vector<Diagnostic>* warnings = nullptr);

std::string read_file(const std::string& path); // throws ConfigError

} // namespace starktune
