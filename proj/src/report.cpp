#include "starktune/report.hpp"

#include <array>
#include <fstream>
#include <iomanip>
#include <memory>
#include <sstream>

#include <fmt/format.h>
#include <openssl/evp.h>

#include "starktune/error.hpp"

#ifndef STARKTUNE_VERSION
#define STARKTUNE_VERSION "0.0.0"
#endif

namespace starktune {

using nlohmann::json;

const char* version() { return STARKTUNE_VERSION; }

namespace {

json matrix(const Eigen::MatrixXd& m) {
    json rows = json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        json row = json::array();
        for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
        rows.push_back(row);
    }
    return rows;
}

json value(double v, double err) { return json{{"value", v}, {"error", err}}; }

} // namespace

json to_json(const VoigtFit& f) {
    return json{
        {"type", "voigt_fit"},
        {"center_MHz", value(f.center, f.center_err)},
        {"gamma_MHz", value(f.gamma, f.gamma_err)},
        {"gamma_fixed", f.gamma_fixed},
        {"sigma_MHz", value(f.sigma, f.sigma_err)},
        {"amplitude_counts", value(f.amplitude, f.amplitude_err)},
        {"baseline_counts", value(f.baseline, f.baseline_err)},
        {"area_counts_MHz", f.area},
        {"fwhm_MHz", f.fwhm()},
        {"covariance", {{"order", {"center", "gamma", "sigma", "area", "baseline"}}, {"matrix", matrix(f.cov)}}},
        {"chi2", f.chi2},
        {"dof", f.dof},
        {"reduced_chi2", f.reduced_chi2},
        {"n_bins", f.n_bins},
        {"iterations", f.iterations},
    };
}

json to_json(const ParabolaFit& f) {
    return json{
        {"type", "parabola_fit"},
        {"curvature_MHz_per_V2", value(f.curvature, f.curvature_err)},
        {"vertex_voltage_V", value(f.vertex_voltage, f.vertex_voltage_err)},
        {"vertex_frequency_MHz", value(f.vertex_frequency, f.vertex_frequency_err)},
        {"kappa_xx", value(f.kappa, f.kappa_err)},
        {"coefficients", {f.coeffs[0], f.coeffs[1], f.coeffs[2]}},
        {"covariance", {{"order", {"c0", "c1", "c2"}}, {"matrix", matrix(f.cov)}}},
        {"chi2", f.chi2},
        {"dof", f.dof},
    };
}

json to_json(const SqrtLawFit& f) {
    return json{
        {"type", "sqrt_law_fit"},
        {"a_MHz", value(f.a, f.a_err)},
        {"sigma0_MHz", value(f.sigma0, f.sigma0_err)},
        {"offset_MHz2", f.offset},
        {"covariance", {{"order", {"a", "offset"}}, {"matrix", matrix(f.cov)}}},
        {"chi2", f.chi2},
        {"dof", f.dof},
        {"unphysical", f.unphysical},
    };
}

json to_json(const FieldSpread& s) {
    return json{{"sigma_E_kV_per_cm", value(s.sigma_e, s.sigma_e_err)}};
}

json to_json(const AnisotropyCalibration& c) {
    return json{
        {"type", "anisotropy_calibration"},
        {"a_x_MHz", c.a_x},
        {"a_z_MHz", c.a_z},
        {"sigma0_MHz", c.sigma0},
        {"post_shift_ratio", c.post_shift_ratio},
        {"increase_ratio", c.increase_ratio},
    };
}

json to_json(const FieldState& s) {
    return json{{"v_applied_V", s.v_applied}, {"e_screen_x_kV_per_cm", s.e_screen_x}, {"e_z_charge_kV_per_cm", s.e_z_charge}};
}

json to_json(const TuningPlan& p) {
    json doc{
        {"type", "tuning_plan"},
        {"target_shift_MHz", p.target_shift},
        {"shift_x_MHz", p.shift_x},
        {"shift_z_MHz", p.shift_z},
        {"predicted_sigma_MHz", p.predicted_sigma},
        {"feasible", p.feasible},
    };
    if (p.field) {
        doc["field_kV_per_cm"] = {{"e_x", p.field->e_x}, {"e_z", p.field->e_z}};
    } else {
        doc["field_kV_per_cm"] = nullptr;
    }
    json steps = json::array();
    for (const auto& s : p.schedule.steps) {
        steps.push_back({{"v_bias_V", s.v_bias}, {"intensity", s.intensity}, {"duration_s", s.duration}});
    }
    doc["schedule"] = {{"steps", steps},
                       {"expected_state", to_json(p.schedule.expected_state)},
                       {"shift_error_MHz", p.schedule.shift_error},
                       {"within_tolerance", p.schedule.within_tolerance}};
    return doc;
}

std::string sha256_hex(const std::string& bytes) {
    std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
    std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
    unsigned int len = 0;
    if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1 ||
        EVP_DigestUpdate(ctx.get(), bytes.data(), bytes.size()) != 1 ||
        EVP_DigestFinal_ex(ctx.get(), md.data(), &len) != 1) {
        throw Error("sha256: digest failed");
    }
    std::string hex;
    for (unsigned int i = 0; i < len; ++i) hex += fmt::format("{:02x}", md[i]);
    return hex;
}

std::string sha256_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw DataError(fmt::format("cannot read '{}'", path));
    std::ostringstream ss;
    ss << f.rdbuf();
    return sha256_hex(ss.str());
}

json RunManifest::to_json() const {
    auto files = [](const std::vector<std::string>& paths) {
        json out = json::array();
        for (const auto& p : paths) out.push_back({{"path", p}, {"sha256", sha256_file(p)}});
        return out;
    };
    json doc{
        {"type", "run_manifest"},
        {"command", command},
        {"argv", argv},
        {"scenario", scenario_path.empty() ? json(nullptr) : json(scenario_path)},
        {"seed", has_seed ? json(seed) : json(nullptr)},
        {"tool_version", version()},
        {"inputs", files(inputs)},
        {"outputs", files(outputs)},
        {"wall_clock_s", wall_clock_s},
    };
    return doc;
}

void write_json(const std::string& path, const json& doc) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw DataError(fmt::format("cannot write '{}'", path));
    f << doc.dump(2) << '\n';
}

} // namespace starktune
