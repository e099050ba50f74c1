#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace starktune {

// Electronic level data for a sum-over-states estimate along one axis.
// energies[0] is the ground state, energies[1] the emitting excited state.
struct LevelData {
    std::vector<double> energies;            // eV, strictly increasing
    std::vector<std::vector<double>> dipoles; // |<n|e r_i|m>| in Debye, symmetric, zero diagonal

    void validate() const;
};

// kappa = alpha / h in MHz/(kV/cm)^2 for
//   alpha = (1/2) [ sum_{n!=1} mu_1n^2 / (E_n - E_1) - sum_{n!=0} mu_0n^2 / (E_n - E_0) ].
// The result may be negative. Throws DegenerateError on coinciding energies.
double alpha_sum_over_states(const LevelData& levels);

// Three-level truncation (1/2) [ d12^2 / e21 - 2 d01^2 / e10 ] in the same
// units. Throws std::invalid_argument for non-positive gaps.
double alpha_three_level(double d01, double d12, double e10, double e21);

// Reported band of plausible DBT values; outside it the estimate is flagged,
// not rescaled.
inline constexpr double kKappaBandLow = 0.2;
inline constexpr double kKappaBandHigh = 2.0;

struct PolarizabilityEstimate {
    double kappa = 0.0;
    bool in_band = false;
};

PolarizabilityEstimate classify_kappa(double kappa);

// Plain-text level table:
//
//   # comment
//   energies: 0.0 1.6 3.6
//   0 1 12.0
//   1 2 25.0
//
// Each pair row gives (i, j, dipole in Debye); missing pairs are zero.
LevelData parse_level_table(std::istream& in);
LevelData load_level_table(const std::string& path);

} // namespace starktune
