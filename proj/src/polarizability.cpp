#include "starktune/polarizability.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "starktune/constants.hpp"
#include "starktune/error.hpp"

namespace starktune {

namespace {

// (Debye^2 / eV) -> MHz/(kV/cm)^2 via kappa = alpha / h.
double debye2_per_ev_to_kappa() {
    using namespace constants;
    return debye * debye / electron_volt * kv_per_cm * kv_per_cm / planck * 1e-6;
}

} // namespace

void LevelData::validate() const {
    const std::size_t n = energies.size();
    if (n < 2) throw ConfigError("levels: at least two levels are required");
    for (std::size_t i = 1; i < n; ++i) {
        if (!(energies[i] > energies[i - 1])) {
            throw ConfigError("levels: energies must be strictly increasing");
        }
    }
    if (dipoles.size() != n) throw ConfigError("levels: dipole matrix size mismatch");
    for (std::size_t i = 0; i < n; ++i) {
        if (dipoles[i].size() != n) throw ConfigError("levels: dipole matrix must be square");
        if (dipoles[i][i] != 0.0) throw ConfigError("levels: dipole diagonal must be zero");
        for (std::size_t j = 0; j < n; ++j) {
            if (!(dipoles[i][j] >= 0.0)) throw ConfigError("levels: dipoles must be >= 0");
            if (dipoles[i][j] != dipoles[j][i]) throw ConfigError("levels: dipole matrix must be symmetric");
        }
    }
}

double alpha_sum_over_states(const LevelData& levels) {
    const auto& E = levels.energies;
    const auto& d = levels.dipoles;
    const std::size_t n = E.size();
    if (n < 2) throw std::invalid_argument("alpha_sum_over_states: need >= 2 levels");
    if (d.size() != n) throw std::invalid_argument("alpha_sum_over_states: dipole matrix size mismatch");

    double excited = 0.0;
    double ground = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        if (k != 1) {
            const double gap = E[k] - E[1];
            if (gap == 0.0) throw DegenerateError("alpha_sum_over_states: degenerate level energies");
            excited += d[1][k] * d[1][k] / gap;
        }
        if (k != 0) {
            const double gap = E[k] - E[0];
            if (gap == 0.0) throw DegenerateError("alpha_sum_over_states: degenerate level energies");
            ground += d[0][k] * d[0][k] / gap;
        }
    }
    return 0.5 * (excited - ground) * debye2_per_ev_to_kappa();
}

double alpha_three_level(double d01, double d12, double e10, double e21) {
    if (!(e10 > 0.0) || !(e21 > 0.0)) {
        throw std::invalid_argument("alpha_three_level: level gaps must be > 0");
    }
    return 0.5 * (d12 * d12 / e21 - 2.0 * d01 * d01 / e10) * debye2_per_ev_to_kappa();
}

PolarizabilityEstimate classify_kappa(double kappa) {
    return {kappa, kappa >= kKappaBandLow && kappa <= kKappaBandHigh};
}

LevelData parse_level_table(std::istream& in) {
    LevelData out;
    struct Pair { std::size_t i, j; double d; int line; };
    std::vector<Pair> pairs;
    std::string raw;
    int line_no = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        if (auto hash = raw.find('#'); hash != std::string::npos) raw.erase(hash);
        std::istringstream ls(raw);
        std::string head;
        if (!(ls >> head)) continue;
        if (head == "energies:") {
            double e;
            while (ls >> e) out.energies.push_back(e);
            if (!ls.eof()) throw DataError("level table line " + std::to_string(line_no) + ": bad energy value");
            continue;
        }
        std::istringstream row(raw);
        long i = -1, j = -1;
        double dip = 0.0;
        if (!(row >> i >> j >> dip) || i < 0 || j < 0) {
            throw DataError("level table line " + std::to_string(line_no) + ": expected 'i j dipole_D'");
        }
        pairs.push_back({static_cast<std::size_t>(i), static_cast<std::size_t>(j), dip, line_no});
    }
    const std::size_t n = out.energies.size();
    out.dipoles.assign(n, std::vector<double>(n, 0.0));
    for (const auto& p : pairs) {
        if (p.i >= n || p.j >= n || p.i == p.j) {
            throw DataError("level table line " + std::to_string(p.line) + ": level index out of range");
        }
        out.dipoles[p.i][p.j] = p.d;
        out.dipoles[p.j][p.i] = p.d;
    }
    out.validate();
    return out;
}

LevelData load_level_table(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open level table: " + path);
    return parse_level_table(in);
}

} // namespace starktune
