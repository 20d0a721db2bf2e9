#include "rfrr/errors.hpp"
#include "rfrr/experiments.hpp"

#include <cmath>
#include <cstdio>

namespace rfrr {

namespace {

int scaled(int d, double scale) { return std::max(4, static_cast<int>(std::lround(d * scale))); }

SweepSpec sweep(const char* var, double lo, double hi, int count) {
    SweepSpec s;
    s.variable = var;
    s.min = lo;
    s.max = hi;
    s.count = count;
    return s;
}

Preset preset(std::string name, ExperimentConfig c) {
    c.label = name;
    return Preset{std::move(name), std::move(c), false};
}

std::vector<Preset> critical(double scale) {
    ExperimentConfig c;
    c.regime.d = scaled(50, scale);
    c.activation = FunctionSpec::monomials({0.0, 1.5, 3.0, 2.0});
    c.target = FunctionSpec::monomials({0.0, 0.5, 1.5, 1.0});
    c.lambda = 1.0;
    c.noise_var = 0.25;
    c.trials = 50;
    c.base_seed = 1;
    c.convention = Convention::finite_d;
    std::vector<Preset> out;
    ExperimentConfig left = c;
    left.regime.psi2 = 1.0;
    left.sweep = sweep("psi1", 0.1, 10.0, 10);
    out.push_back(preset("fig_critical_vary_psi1", left));
    ExperimentConfig mid = c;
    mid.regime.psi1 = 1.0;
    mid.sweep = sweep("psi2", 0.1, 10.0, 10);
    out.push_back(preset("fig_critical_vary_psi2", mid));
    ExperimentConfig right = c;
    right.regime.kappa1 = right.regime.kappa2 = 1.5;
    right.regime.theta1 = 1.0;
    right.sweep = sweep("theta2", 0.1, 10.0, 10);
    out.push_back(preset("fig_critical_below_level", right));
    return out;
}

std::vector<Preset> overunder(double scale) {
    ExperimentConfig c;
    c.regime.d = scaled(50, scale);
    c.activation = FunctionSpec::monomials({0.0, 1.0, 0.1});
    c.target = FunctionSpec::monomials({0.0, 1.0, 1.0});
    c.lambda = 1.0;
    c.noise_var = 0.25;
    c.trials = 50;
    c.base_seed = 1;
    c.convention = Convention::finite_d;
    std::vector<Preset> out;
    ExperimentConfig over = c;
    over.regime.kappa1 = 2.0;
    over.regime.kappa2 = 1.0;
    over.regime.psi1 = 2.0;
    over.sweep = sweep("psi2", 0.1, 10.0, 10);
    out.push_back(preset("fig_overunder_overparametrized", over));
    ExperimentConfig under = c;
    under.regime.kappa1 = 1.0;
    under.regime.kappa2 = 2.0;
    under.regime.psi2 = 2.0;
    under.sweep = sweep("psi1", 0.1, 10.0, 10);
    out.push_back(preset("fig_overunder_underparametrized", under));
    return out;
}

std::vector<Preset> norm(double scale) {
    ExperimentConfig c;
    c.regime.d = scaled(40, scale);
    c.regime.psi2 = 2.5;  // n = 1.25 d^2
    c.activation = FunctionSpec::gegenbauer_series({{2, 0.5}, {3, 0.3}});
    c.target = FunctionSpec::gegenbauer_series({{2, 1.5}, {3, 0.5}});
    c.lambda = 2.5e-3;
    c.noise_var = 0.04;
    c.trials = 10;
    c.base_seed = 1;
    std::vector<Preset> out;
    ExperimentConfig rf = c;
    // odd count puts p = n on the grid
    rf.sweep = sweep("psi1", 0.25, 25.0, 17);
    out.push_back(preset("fig_norm_rf", rf));
    ExperimentConfig krr = c;
    krr.model = Model::krr;
    out.push_back(preset("fig_norm_krr", krr));
    return out;
}

std::vector<Preset> optlambda() {
    ExperimentConfig c;
    c.activation = FunctionSpec::gegenbauer_series({{2, 0.5}, {3, 0.5}});
    c.target = FunctionSpec::gegenbauer_series({{2, 2.0}});
    c.noise_var = 4.0 / 5.0;  // SNR 5
    c.trials = 0;
    std::vector<Preset> out;
    for (double lambda : {1e-4, 1e-3, 1e-2, 1e-1, 1.0}) {
        char tag[32];
        std::snprintf(tag, sizeof tag, "lambda_%.0e", lambda);
        c.lambda = lambda;
        ExperimentConfig left = c;
        left.regime.theta2 = 10.0;
        left.sweep = sweep("theta1", 0.1, 100.0, 31);
        out.push_back(preset(std::string("fig_optlambda_vary_p_") + tag, left));
        ExperimentConfig mid = c;
        mid.regime.theta1 = 10.0;
        mid.sweep = sweep("theta2", 0.1, 100.0, 31);
        out.push_back(preset(std::string("fig_optlambda_vary_n_") + tag, mid));
        ExperimentConfig right = c;
        right.regime.theta1 = 10.0;
        right.regime.theta2 = 1.0;
        right.sweep = sweep("snr", 0.1, 100.0, 31);
        out.push_back(preset(std::string("fig_optlambda_vary_snr_") + tag, right));
    }
    return out;
}

std::vector<Preset> spectra(double scale) {
    ExperimentConfig c;
    c.regime.d = scaled(50, scale);
    c.activation = FunctionSpec::monomials({0.0, 0.0, 2.0, 1.0});
    c.target = FunctionSpec::monomials({0.0, 0.5, 1.5, 1.0});
    c.lambda = 1.0;
    c.noise_var = 0.25;
    c.trials = 20;
    c.base_seed = 1;
    c.convention = Convention::finite_d;
    std::vector<Preset> out;
    ExperimentConfig curve = c;
    curve.regime.psi1 = 1.0;
    curve.sweep = sweep("psi2", 0.1, 10.0, 10);
    out.push_back(preset("fig_spectra_risk_rf", curve));
    curve.model = Model::gaussian;
    out.push_back(preset("fig_spectra_risk_gaussian", curve));
    ExperimentConfig hist = c;
    hist.regime.psi1 = 1.0;
    hist.regime.psi2 = 2.0;
    hist.spectra.trials = 4;
    Preset p = preset("fig_spectra_density", hist);
    p.spectra = true;
    out.push_back(p);
    return out;
}

std::vector<Preset> biasvar(double scale) {
    ExperimentConfig c;
    c.regime.d = scaled(100, scale);
    c.regime.auto_kappa1 = true;
    c.activation = FunctionSpec::monomials({0.0, 1.0, 1.0, 1.0, 1.0});
    c.target = FunctionSpec::monomials({0.0, 0.5, 0.5, 0.5});
    c.lambda = 1.0;
    c.noise_var = 1.0;
    c.trials = 0;
    const double d = c.regime.d;
    std::vector<Preset> out;
    for (double psi2 : {0.1, 1.0, 10.0}) {
        ExperimentConfig e = c;
        e.regime.psi2 = psi2;
        e.sweep = sweep("p", std::sqrt(d), std::pow(d, 3.5), 61);
        char tag[32];
        std::snprintf(tag, sizeof tag, "psi2_%g", psi2);
        out.push_back(preset(std::string("fig_biasvar_") + tag, e));
    }
    return out;
}

}  // namespace

std::vector<Preset> figure_preset(const std::string& id, double scale) {
    if (!(scale > 0.0)) throw ValidationError("scale must be positive");
    if (id == "fig_critical") return critical(scale);
    if (id == "fig_overunder") return overunder(scale);
    if (id == "fig_norm") return norm(scale);
    if (id == "fig_optlambda") return optlambda();
    if (id == "fig_spectra") return spectra(scale);
    if (id == "fig_biasvar") return biasvar(scale);
    throw ValidationError("unknown figure '" + id + "'");
}

}  // namespace rfrr
