#pragma once

#include "rfrr/simulator.hpp"
#include "rfrr/theory.hpp"

#include <json.hpp>

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace rfrr {

using json = nlohmann::json;

extern const char* const kVersion;

// {"gegenbauer": [[k, c], ...]} | {"monomial": [c0, c1, ...]} | {"named": "relu" | "shifted_relu(c)"}
FunctionSpec function_from_json(const json& j);
json function_to_json(const FunctionSpec& f);

struct RegimeSpec {
    double kappa1 = 2.0, kappa2 = 2.0;
    bool auto_kappa1 = false;  // pick the level of p point by point (multi-level sweeps)
    int d = 0;                 // 0: asymptotic, theory only
    std::optional<double> theta1, theta2, psi1, psi2, n, p;
};

struct SweepSpec {
    // p | n | lambda | psi1 | psi2 | theta1 | theta2 | snr
    std::string variable;
    bool log = true;
    double min = 0.0, max = 0.0;
    int count = 16;
};

struct SpectraSpec {
    int bins = 64;
    int trials = 1;
    double eta = 1e-3;
    int grid = 2000;
    std::optional<double> range_max;
};

struct ExperimentConfig {
    std::string label = "experiment";
    RegimeSpec regime;
    FunctionSpec activation = FunctionSpec::monomials({0.0, 1.0});
    FunctionSpec target = FunctionSpec::monomials({0.0, 1.0});
    double noise_var = 0.0;
    double lambda = 1.0;
    std::optional<SweepSpec> sweep;
    int trials = 0;
    std::uint64_t base_seed = 0;
    std::optional<Convention> convention;  // default: finite_d for Gegenbauer series, else hermite_limit
    Model model = Model::rf;
    GaussianOptions gaussian;
    int threads = 1;
    SpectraSpec spectra;
    json source;  // document as given
};

ExperimentConfig parse_config(const json& j);
ExperimentConfig load_config(const std::string& path);
// Fully resolved configuration (defaults filled in).
json config_to_json(const ExperimentConfig& c);

Convention effective_convention(const ExperimentConfig& c);

struct CurveRow {
    std::string sweep_var;
    double sweep_value = 0.0;
    int d = 0;
    double n = 0.0, p = 0.0;  // counts; 0 in asymptotic runs, infinity for kernel p
    double lambda = 0.0;
    int ell = 0;
    RegimeTag regime = RegimeTag::critical_at_level;
    RiskPrediction theory;
    double stair_km1 = 0.0, stair_k = 0.0;
    bool has_empirical = false;
    Summary test, train, norm, gcv;
    int trials = 0;
    std::uint64_t base_seed = 0;
    std::string warning;
};

struct RunResult {
    ExperimentConfig config;
    std::vector<CurveRow> rows;
};

// Theory only; never touches a random generator.
RunResult cmd_predict(const ExperimentConfig& c);
// Theory plus Monte Carlo trials at every grid point.
RunResult cmd_simulate(const ExperimentConfig& c);

const std::vector<std::string>& csv_columns();
void write_csv(std::ostream& os, const std::vector<CurveRow>& rows);
json sidecar(const RunResult& r, const std::string& command);
// Writes PATH (CSV) and PATH.json (sidecar).
void write_outputs(const RunResult& r, const std::string& path, const std::string& command);

struct SpectraResult {
    std::vector<double> edges;  // bins + 1 edges; samples beyond the last edge are overflow
    std::vector<double> rf_mass, gauss_mass, theory_mass;
    double rf_overflow = 0.0, gauss_overflow = 0.0, theory_overflow = 0.0;
    std::vector<double> grid, density;
    std::vector<double> rf_values, gauss_values;
    double ks_rf_gauss = 0.0, ks_rf_theory = 0.0, ks_gauss_theory = 0.0;
    Summary rf_test, gauss_test;  // test errors of the same trials
    ExperimentConfig config;
};

SpectraResult cmd_spectra(const ExperimentConfig& c);
void write_spectra(const SpectraResult& r, const std::string& path);

// Two-sample Kolmogorov-Smirnov distance.
double ks_two_sample(std::vector<double> a, std::vector<double> b);
// Sup distance between a sample's empirical CDF and a piecewise-linear CDF on a grid.
double ks_against_cdf(std::vector<double> sample, const std::vector<double>& grid, const std::vector<double>& cdf);

struct CheckResult {
    std::string name;
    bool passed = false;
    double observed = 0.0;
    double tolerance = 0.0;
    std::string detail;
};

struct VerifyOptions {
    bool flip_zeta_sign = false;  // fault injection into the Newton path
    std::uint64_t seed = 7;
};

std::vector<CheckResult> cmd_verify(const VerifyOptions& opt = {});
json verify_report(const std::vector<CheckResult>& checks);

struct Preset {
    std::string name;  // output stem
    ExperimentConfig config;
    bool spectra = false;
};

const std::vector<std::string>& figure_ids();
// Configurations for a figure; scale multiplies the dimension.
std::vector<Preset> figure_preset(const std::string& id, double scale = 1.0);

}  // namespace rfrr
