#pragma once

#include <string>
#include <vector>

#include "json.hpp"

#include "starktune/fitkit.hpp"
#include "starktune/planner.hpp"

namespace starktune {

const char* version();

nlohmann::json to_json(const VoigtFit& fit);
nlohmann::json to_json(const ParabolaFit& fit);
nlohmann::json to_json(const SqrtLawFit& fit);
nlohmann::json to_json(const FieldSpread& spread);
nlohmann::json to_json(const AnisotropyCalibration& cal);
nlohmann::json to_json(const TuningPlan& plan);
nlohmann::json to_json(const FieldState& state);

// Hex SHA-256 of a file's bytes; throws DataError when unreadable.
std::string sha256_file(const std::string& path);
std::string sha256_hex(const std::string& bytes);

struct RunManifest {
    std::string command;
    std::vector<std::string> argv;
    std::string scenario_path;
    std::uint64_t seed = 0;
    bool has_seed = false;
    std::vector<std::string> inputs;
    std::vector<std::string> outputs;
    double wall_clock_s = 0.0;

    nlohmann::json to_json() const; // digests computed here
};

// Writes `doc` with two-space indentation and a trailing newline.
void write_json(const std::string& path, const nlohmann::json& doc);

} // namespace starktune
