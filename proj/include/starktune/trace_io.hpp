#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "starktune/fitkit.hpp"
#include "starktune/simkit.hpp"

namespace starktune {

// Trace file: comma-separated with header
//   sweep_index,time_s,detuning_MHz,counts
// time_s is the bin center on the session clock. Sweep-map files prepend a
// voltage_V column. Numbers are written in shortest round-trip form.
void write_traces(std::ostream& os, const std::vector<ScanTrace>& traces);
void write_sweep_map(std::ostream& os, const SweepMap& map);

// Rows are grouped into traces by sweep index (and voltage) in order of
// first appearance. Throws DataError with the offending line number.
std::vector<ScanTrace> read_traces(std::istream& is);
SweepMap read_sweep_map(std::istream& is);

// Square-root-law points: header shift_MHz,sigma_MHz[,sigma_err_MHz].
std::vector<SqrtLawPoint> read_sqrt_law_points(std::istream& is);
void write_sqrt_law_points(std::ostream& os, const std::vector<SqrtLawPoint>& points);

std::vector<ScanTrace> load_traces(const std::string& path);
SweepMap load_sweep_map(const std::string& path);

} // namespace starktune
