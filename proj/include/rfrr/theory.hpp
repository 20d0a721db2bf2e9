#pragma once

#include "rfrr/fixed_point.hpp"
#include "rfrr/spectral_decomposition.hpp"

#include <optional>
#include <vector>

namespace rfrr {

enum class RegimeTag {
    critical_at_level,
    critical_below_level,
    overparam_at_level,
    overparam_below_level,
    underparam_at_level,
    underparam_below_level,
};

const char* to_string(RegimeTag t);

struct ScalingRegime {
    double kappa1 = 0.0, kappa2 = 0.0;
    double theta1 = 0.0, theta2 = 0.0;
    int ell = 0;
    // finite only where the regime assigns them; infinity marks an unbounded ratio
    double psi1 = 0.0, psi2 = 0.0;
    RegimeTag tag = RegimeTag::critical_at_level;
    int d = 0;  // 0 when built from asymptotic ratios

    bool critical() const { return tag == RegimeTag::critical_at_level || tag == RegimeTag::critical_below_level; }
    bool overparam() const { return tag == RegimeTag::overparam_at_level || tag == RegimeTag::overparam_below_level; }
    bool underparam() const {
        return tag == RegimeTag::underparam_at_level || tag == RegimeTag::underparam_below_level;
    }
    bool at_level() const {
        return tag == RegimeTag::critical_at_level || tag == RegimeTag::overparam_at_level ||
               tag == RegimeTag::underparam_at_level;
    }
};

// Regime from scaling exponents and constants (p ~ theta1 d^kappa1, n ~ theta2 d^kappa2).
ScalingRegime classify(double kappa1, double kappa2, double theta1, double theta2);

// Regime from explicit sizes; psi_i = count / (d^ell / ell!) at level.
ScalingRegime classify_sizes(double kappa1, double kappa2, int d, double n, double p);

enum class NormConvention { per_n, per_p };

const char* to_string(NormConvention c);

struct RiskPrediction {
    double B_test = 0.0, V_test = 0.0, alpha_c = 0.0, B_norm = 0.0, V_norm = 0.0;
    double R_test = 0.0, R_train = 0.0, L_norm = 0.0;
    double bias = 0.0, variance = 0.0;
    NormConvention norm_convention = NormConvention::per_n;
    std::optional<FixedPointSolution> fixed_point;
    std::vector<double> staircase;  // ||P_{>k} f||^2, k = 0..K
};

// Fills R_test, R_train, L_norm, bias and variance from the factors.
void assemble(RiskPrediction& r, double F_ell, double F_tail2, double noise_var);

// Above this value a psi is treated as infinite and routed to the closed form.
constexpr double kPsiInfinity = 1e10;

RiskPrediction predict_critical(const ScalingRegime& reg, double zeta, double lambda_bar, double F_ell,
                                double F_tail2, double noise_var, double mu_tail2);
RiskPrediction predict_overparam(const ScalingRegime& reg, double zeta, double lambda_bar, double F_ell,
                                 double F_tail2, double noise_var, double mu_tail2);
RiskPrediction predict_underparam(const ScalingRegime& reg, double zeta, double F_ell, double F_tail2,
                                  double noise_var, double mu_tail2);

// Dispatch on the regime, including infinite-psi routing.
RiskPrediction predict(const ScalingRegime& reg, const ActivationScalars& act, const TargetFrequencies& target,
                       double noise_var);

double gcv_alpha(const ScalingRegime& reg, double zeta, double lambda_bar);

// Overparametrized auxiliary root.
double overparam_theta(double psi2, double eta, bool at_level);
// Underparametrized auxiliary root used by the norm.
double underparam_theta(double psi1, double zeta);

}  // namespace rfrr
