#include "starktune/trace_io.hpp"

#include <charconv>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

#include <fmt/format.h>
#include <fmt/ostream.h>

#include "starktune/error.hpp"

namespace starktune {

namespace {

constexpr const char* kTraceHeader = "sweep_index,time_s,detuning_MHz,counts";
constexpr const char* kMapHeader = "voltage_V,sweep_index,time_s,detuning_MHz,counts";

void write_rows(std::ostream& os, const ScanTrace& t, const std::string& prefix) {
    for (std::size_t i = 0; i < t.counts.size(); ++i) {
        fmt::print(os, "{}{},{},{},{}\n", prefix, t.sweep_index, t.time_of_bin(i), t.detunings[i], t.counts[i]);
    }
}

std::vector<std::string> split(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream ss(line);
    while (std::getline(ss, cell, ',')) out.push_back(cell);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

template <class T>
T parse(const std::string& cell, std::size_t line, const char* column) {
    std::size_t a = cell.find_first_not_of(" \t\r");
    std::size_t b = cell.find_last_not_of(" \t\r");
    T value{};
    if (a != std::string::npos) {
        const char* first = cell.data() + a;
        const char* last = cell.data() + b + 1;
        auto [ptr, ec] = std::from_chars(first, last, value);
        if (ec == std::errc() && ptr == last) return value;
    }
    throw DataError(fmt::format("line {}: cannot parse {} from '{}'", line, column, cell));
}

struct Row {
    double voltage = 0.0;
    int sweep = 0;
    double time = 0.0;
    double detuning = 0.0;
    std::int64_t counts = 0;
};

std::vector<Row> read_rows(std::istream& is, bool with_voltage) {
    const std::string header = with_voltage ? kMapHeader : kTraceHeader;
    std::string line;
    std::size_t lineno = 0;
    std::vector<Row> rows;
    bool seen_header = false;
    while (std::getline(is, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        if (!seen_header) {
            if (line != header) throw DataError(fmt::format("line {}: expected header '{}'", lineno, header));
            seen_header = true;
            continue;
        }
        const auto cells = split(line);
        const std::size_t want = with_voltage ? 5 : 4;
        if (cells.size() != want) {
            throw DataError(fmt::format("line {}: expected {} columns, got {}", lineno, want, cells.size()));
        }
        std::size_t c = 0;
        Row r;
        if (with_voltage) r.voltage = parse<double>(cells[c++], lineno, "voltage_V");
        r.sweep = parse<int>(cells[c++], lineno, "sweep_index");
        r.time = parse<double>(cells[c++], lineno, "time_s");
        r.detuning = parse<double>(cells[c++], lineno, "detuning_MHz");
        r.counts = parse<std::int64_t>(cells[c++], lineno, "counts");
        if (r.counts < 0) throw DataError(fmt::format("line {}: counts must be non-negative", lineno));
        rows.push_back(r);
    }
    if (!seen_header) throw DataError("empty trace file");
    return rows;
}

ScanTrace finish(ScanTrace t, const std::vector<double>& times) {
    if (times.size() < 2) throw DataError(fmt::format("sweep {}: need at least two bins", t.sweep_index));
    t.bin_time = (times.back() - times.front()) / static_cast<double>(times.size() - 1);
    if (!(t.bin_time > 0.0)) throw DataError(fmt::format("sweep {}: bin times must increase", t.sweep_index));
    t.start_time = times.front() - 0.5 * t.bin_time;
    t.validate();
    return t;
}

} // namespace

void write_traces(std::ostream& os, const std::vector<ScanTrace>& traces) {
    os << kTraceHeader << '\n';
    for (const auto& t : traces) write_rows(os, t, "");
}

void write_sweep_map(std::ostream& os, const SweepMap& map) {
    map.validate();
    os << kMapHeader << '\n';
    for (std::size_t i = 0; i < map.voltages.size(); ++i) {
        const std::string prefix = fmt::format("{},", map.voltages[i]);
        for (const auto& t : map.sweeps[i]) write_rows(os, t, prefix);
    }
}

std::vector<ScanTrace> read_traces(std::istream& is) {
    const auto rows = read_rows(is, false);
    std::vector<ScanTrace> traces;
    std::vector<std::vector<double>> times;
    std::map<int, std::size_t> slot;
    for (const auto& r : rows) {
        auto [it, fresh] = slot.try_emplace(r.sweep, traces.size());
        if (fresh) {
            traces.emplace_back();
            traces.back().sweep_index = r.sweep;
            times.emplace_back();
        }
        auto& t = traces[it->second];
        t.detunings.push_back(r.detuning);
        t.counts.push_back(r.counts);
        times[it->second].push_back(r.time);
    }
    for (std::size_t i = 0; i < traces.size(); ++i) traces[i] = finish(std::move(traces[i]), times[i]);
    return traces;
}

SweepMap read_sweep_map(std::istream& is) {
    const auto rows = read_rows(is, true);
    SweepMap map;
    std::vector<std::vector<std::vector<double>>> times;
    std::map<double, std::size_t> vslot;
    std::vector<std::map<int, std::size_t>> sslot;
    for (const auto& r : rows) {
        auto [vit, vfresh] = vslot.try_emplace(r.voltage, map.voltages.size());
        if (vfresh) {
            map.voltages.push_back(r.voltage);
            map.sweeps.emplace_back();
            times.emplace_back();
            sslot.emplace_back();
        }
        const std::size_t vi = vit->second;
        auto [sit, sfresh] = sslot[vi].try_emplace(r.sweep, map.sweeps[vi].size());
        if (sfresh) {
            map.sweeps[vi].emplace_back();
            map.sweeps[vi].back().sweep_index = r.sweep;
            times[vi].emplace_back();
        }
        auto& t = map.sweeps[vi][sit->second];
        t.detunings.push_back(r.detuning);
        t.counts.push_back(r.counts);
        times[vi][sit->second].push_back(r.time);
    }
    for (std::size_t v = 0; v < map.sweeps.size(); ++v) {
        for (std::size_t s = 0; s < map.sweeps[v].size(); ++s) {
            map.sweeps[v][s] = finish(std::move(map.sweeps[v][s]), times[v][s]);
        }
    }
    return map;
}

std::vector<SqrtLawPoint> read_sqrt_law_points(std::istream& is) {
    std::string line;
    std::size_t lineno = 0;
    bool with_err = false;
    bool seen_header = false;
    std::vector<SqrtLawPoint> out;
    while (std::getline(is, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        if (!seen_header) {
            if (line == "shift_MHz,sigma_MHz") with_err = false;
            else if (line == "shift_MHz,sigma_MHz,sigma_err_MHz") with_err = true;
            else throw DataError(fmt::format("line {}: expected header 'shift_MHz,sigma_MHz[,sigma_err_MHz]'", lineno));
            seen_header = true;
            continue;
        }
        const auto cells = split(line);
        if (cells.size() != (with_err ? 3u : 2u)) throw DataError(fmt::format("line {}: wrong number of columns", lineno));
        SqrtLawPoint p;
        p.shift = parse<double>(cells[0], lineno, "shift_MHz");
        p.sigma = parse<double>(cells[1], lineno, "sigma_MHz");
        if (with_err) p.sigma_err = parse<double>(cells[2], lineno, "sigma_err_MHz");
        out.push_back(p);
    }
    if (!seen_header) throw DataError("empty points file");
    return out;
}

void write_sqrt_law_points(std::ostream& os, const std::vector<SqrtLawPoint>& points) {
    os << "shift_MHz,sigma_MHz,sigma_err_MHz\n";
    for (const auto& p : points) fmt::print(os, "{},{},{}\n", p.shift, p.sigma, p.sigma_err);
}

std::vector<ScanTrace> load_traces(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw DataError(fmt::format("cannot open '{}'", path));
    return read_traces(f);
}

SweepMap load_sweep_map(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw DataError(fmt::format("cannot open '{}'", path));
    return read_sweep_map(f);
}

} // namespace starktune
