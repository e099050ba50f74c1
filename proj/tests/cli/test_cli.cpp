#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <sys/wait.h>

#include "json.hpp"

#include "starktune/report.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const std::string kTool = STARKTUNE_TOOL;
const std::string kData = STARKTUNE_DATA_DIR;

fs::path scratch(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / ("starktune_cli_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

int run(const std::string& args, const std::string& env = "") {
    const std::string cmd = env + (env.empty() ? "" : " ") + kTool + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

json load(const fs::path& p) { return json::parse(slurp(p)); }

void write(const fs::path& p, const std::string& text) { std::ofstream(p) << text; }

} // namespace

TEST_CASE("simulate scan is byte-identical across runs") {
    const auto a = scratch("det_a"), b = scratch("det_b");
    REQUIRE(run("simulate scan --config " + kData + "/example_scenario.yaml --out " + a.string()) == 0);
    REQUIRE(run("simulate scan --config " + kData + "/example_scenario.yaml --jobs 1 --out " + b.string()) == 0);
    CHECK(slurp(a / "scan.csv") == slurp(b / "scan.csv"));

    const auto c = scratch("det_c");
    REQUIRE(run("simulate scan --config " + kData + "/example_scenario.yaml --seed 5 --out " + c.string()) == 0);
    CHECK(slurp(a / "scan.csv") != slurp(c / "scan.csv"));
    CHECK(load(c / "simulate_scan.manifest.json")["seed"] == 5);
}

TEST_CASE("manifest digests match the files") {
    const auto dir = scratch("manifest");
    REQUIRE(run("simulate scan --config " + kData + "/example_scenario.yaml --out " + dir.string()) == 0);
    const json m = load(dir / "simulate_scan.manifest.json");
    CHECK(m["command"] == "simulate scan");
    CHECK(m["tool_version"] == starktune::version());
    REQUIRE(m["outputs"].size() == 1);
    const std::string out = m["outputs"][0]["path"];
    CHECK(m["outputs"][0]["sha256"] == starktune::sha256_file(out));
    CHECK(m["inputs"][0]["sha256"] == starktune::sha256_file(kData + "/example_scenario.yaml"));
    CHECK(m["wall_clock_s"].get<double>() >= 0.0);
}

TEST_CASE("output directory from the environment") {
    const auto dir = scratch("env");
    REQUIRE(run("plan --target -14000 --config " + kData + "/sd_calibration.yaml", "STARKTUNE_OUT_DIR=" + dir.string()) == 0);
    CHECK(fs::exists(dir / "plan.json"));
    const auto flag = scratch("env_flag");
    REQUIRE(run("plan --config " + kData + "/sd_calibration.yaml --out " + flag.string(), "STARKTUNE_OUT_DIR=" + dir.string()) == 0);
    CHECK(fs::exists(flag / "plan.json"));
}

TEST_CASE("plan with the calibration file") {
    const auto dir = scratch("plan");
    REQUIRE(run("plan --target -14000 --config " + kData + "/sd_calibration.yaml --out " + dir.string()) == 0);
    const json p = load(dir / "plan.json");
    CHECK(p["predicted_sigma_MHz"].get<double>() == doctest::Approx(86.0).epsilon(1e-9));
    CHECK(p["shift_x_MHz"].get<double>() == 0.0);
    CHECK(p["provenance"]["source"] == "calibration");
}

TEST_CASE("fit sdlaw on the shipped dataset") {
    const auto dir = scratch("sdlaw");
    REQUIRE(run("fit sdlaw --input " + kData + "/sdlaw_points.csv --kappa 1.82 --out " + dir.string()) == 0);
    const json f = load(dir / "sdlaw_fit.json");
    const double a = f["a_MHz"]["value"], err = f["a_MHz"]["error"];
    CHECK(err > 0.0);
    CHECK(std::abs(a - 0.410) <= 3.0 * err);
    CHECK(f["field_spread"]["sigma_E_kV_per_cm"]["value"].get<double>() == doctest::Approx(0.47).epsilon(0.03));
}

TEST_CASE("calibrate") {
    const auto dir = scratch("calibrate");
    REQUIRE(run("calibrate --triple 70 269 13000 86 14000 --out " + dir.string()) == 0);
    const json c = load(dir / "calibration.json");
    CHECK(c["increase_ratio"].get<double>() == doctest::Approx(12.4375));
    CHECK(c["post_shift_ratio"].get<double>() == doctest::Approx(3.1279).epsilon(1e-4));
    CHECK(run("calibrate --triple 70 50 13000 86 14000 --out " + dir.string()) == 2);
}

TEST_CASE("scenario, fits and reports chain together") {
    const auto dir = scratch("chain");
    const std::string out = " --out " + dir.string();
    REQUIRE(run("simulate scenario --config " + kData + "/example_scenario.yaml" + out) == 0);
    const json log = load(dir / "scenario_log.json");
    CHECK(log["steps"].size() == 7);
    CHECK(fs::exists(dir / "step00_scan.csv"));
    CHECK(fs::exists(dir / "step01_sweep.csv"));

    REQUIRE(run("fit voigt --input " + (dir / "step00_scan.csv").string() + " --integrate" + out) == 0);
    CHECK(load(dir / "voigt_fit.json")["fits"].size() == 1);
    REQUIRE(run("fit voigt --input " + (dir / "step00_scan.csv").string() + out) == 0);
    CHECK(load(dir / "voigt_fit.json")["fits"].size() == 5);

    REQUIRE(run("fit parabola --input " + (dir / "step01_sweep.csv").string() + " --config " + kData + "/example_scenario.yaml" + out) == 0);
    const json para = load(dir / "parabola_fit.json");
    CHECK(para["points"].size() == 11);
    CHECK(std::abs(para["vertex_voltage_V"]["value"].get<double>()) < 2.0);

    REQUIRE(run("report --kind spectrum --input " + (dir / "step00_scan.csv").string() + out) == 0);
    const std::string csv = slurp(dir / "report_spectrum.csv");
    CHECK(csv.rfind("detuning_MHz,counts,model_counts\n", 0) == 0);
    REQUIRE(run("report --kind parabola --input " + (dir / "step01_sweep.csv").string() + out) == 0);
    REQUIRE(run("report --kind sdlaw --input " + kData + "/sdlaw_points.csv" + out) == 0);
    std::istringstream rows(slurp(dir / "report_sdlaw.csv"));
    std::string line;
    int n = 0;
    while (std::getline(rows, line)) {
        CHECK(std::count(line.begin(), line.end(), ',') == 3);
        ++n;
    }
    CHECK(n == 19);
}

TEST_CASE("validate") {
    const auto dir = scratch("validate");
    CHECK(run("validate --config " + kData + "/example_scenario.yaml --strict") == 0);
    CHECK(run("validate --config " + kData + "/sd_calibration.yaml") == 0);

    std::string text = slurp(kData + "/example_scenario.yaml");
    std::string neg = text;
    neg.replace(neg.find("gamma0: 80"), 10, "gamma0: -80");
    write(dir / "neg.yaml", neg);
    CHECK(run("validate --config " + (dir / "neg.yaml").string()) == 2);

    write(dir / "extra.yaml", text + "extra_key: 1\n");
    CHECK(run("validate --config " + (dir / "extra.yaml").string()) == 0);
    CHECK(run("validate --config " + (dir / "extra.yaml").string() + " --strict") == 2);
    CHECK(run("validate --config " + (dir / "missing.yaml").string()) == 2);
}

TEST_CASE("exit status by failure kind") {
    const auto dir = scratch("exit");
    const std::string out = " --out " + dir.string();
    write(dir / "far.yaml", "calibration:\n  sigma_base: 70\n  sigma_x: 269\n  shift_x: 13000\n  sigma_z: 86\n  shift_z: 14000\n"
                            "molecule:\n  kappa_xx: 1.82\n  kappa_zz: 0.1\n");
    CHECK(run("plan --target -1e7 --config " + (dir / "far.yaml").string() + out) == 5);
    CHECK(run("plan --target 500 --config " + kData + "/sd_calibration.yaml" + out) == 5);

    write(dir / "bad.csv", "sweep_index,time_s,detuning_MHz,counts\n0,0.1,zz,1\n");
    CHECK(run("fit voigt --input " + (dir / "bad.csv").string() + out) == 3);

    std::string flat = "sweep_index,time_s,detuning_MHz,counts\n";
    for (int i = 0; i < 100; ++i) flat += "0," + std::to_string(0.005 + 0.01 * i) + "," + std::to_string(-500 + 10 * i) + ",10\n";
    write(dir / "flat.csv", flat);
    CHECK(run("fit voigt --input " + (dir / "flat.csv").string() + out) == 4);

    CHECK(run("simulate scan" + out) == 2);
    CHECK(run("nonsense") != 0);
}
