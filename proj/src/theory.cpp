#include "rfrr/theory.hpp"

#include "rfrr/errors.hpp"

#include <cmath>
#include <limits>

namespace rfrr {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

bool is_integer(double x) { return std::abs(x - std::round(x)) < 1e-12; }

double factorial(int l) {
    double f = 1.0;
    for (int i = 2; i <= l; ++i) f *= i;
    return f;
}

void check_positive(double v, const char* name) {
    if (!(v > 0.0) || !std::isfinite(v)) throw ValidationError(std::string(name) + " must be positive and finite");
}

RegimeTag tag_for(double k1, double k2, int ell) {
    const double kmin = std::min(k1, k2);
    const bool at = is_integer(kmin) && static_cast<int>(std::round(kmin)) == ell;
    if (std::abs(k1 - k2) < 1e-12) return at ? RegimeTag::critical_at_level : RegimeTag::critical_below_level;
    if (k1 > k2) return at ? RegimeTag::overparam_at_level : RegimeTag::overparam_below_level;
    return at ? RegimeTag::underparam_at_level : RegimeTag::underparam_below_level;
}

int level_of(double k1, double k2) {
    const double kmin = std::min(k1, k2);
    return is_integer(kmin) ? static_cast<int>(std::round(kmin)) : static_cast<int>(std::ceil(kmin));
}

}  // namespace

const char* to_string(RegimeTag t) {
    switch (t) {
        case RegimeTag::critical_at_level:
            return "critical_at_level";
        case RegimeTag::critical_below_level:
            return "critical_below_level";
        case RegimeTag::overparam_at_level:
            return "overparam_at_level";
        case RegimeTag::overparam_below_level:
            return "overparam_below_level";
        case RegimeTag::underparam_at_level:
            return "underparam_at_level";
        default:
            return "underparam_below_level";
    }
}

const char* to_string(NormConvention c) { return c == NormConvention::per_n ? "per_n" : "per_p"; }

ScalingRegime classify(double kappa1, double kappa2, double theta1, double theta2) {
    check_positive(kappa1, "kappa1");
    check_positive(kappa2, "kappa2");
    check_positive(theta1, "theta1");
    check_positive(theta2, "theta2");
    ScalingRegime r;
    r.kappa1 = kappa1;
    r.kappa2 = kappa2;
    r.theta1 = theta1;
    r.theta2 = theta2;
    r.ell = level_of(kappa1, kappa2);
    r.tag = tag_for(kappa1, kappa2, r.ell);
    const double lf = factorial(r.ell);
    auto psi_of = [&](double kappa, double theta) {
        if (is_integer(kappa) && static_cast<int>(std::round(kappa)) == r.ell) return theta * lf;
        return kappa > r.ell ? kInf : 0.0;
    };
    r.psi1 = psi_of(kappa1, theta1);
    r.psi2 = psi_of(kappa2, theta2);
    return r;
}

ScalingRegime classify_sizes(double kappa1, double kappa2, int d, double n, double p) {
    if (d < 2) throw ValidationError("dimension d must be >= 2");
    check_positive(n, "n");
    check_positive(p, "p");
    const double dd = d;
    ScalingRegime r = classify(kappa1, kappa2, p / std::pow(dd, kappa1), n / std::pow(dd, kappa2));
    r.d = d;
    const double level_dim = std::pow(dd, r.ell) / factorial(r.ell);
    if (std::isfinite(r.psi1) && r.psi1 > 0.0) r.psi1 = p / level_dim;
    if (std::isfinite(r.psi2) && r.psi2 > 0.0) r.psi2 = n / level_dim;
    return r;
}

void assemble(RiskPrediction& r, double F_ell, double F_tail2, double noise_var) {
    const double F2 = F_ell * F_ell;
    r.R_test = (F2 * r.B_test + F_tail2) + (F_tail2 + noise_var) * r.V_test;
    r.R_train = r.alpha_c * (r.R_test + noise_var);
    r.L_norm = F2 * r.B_norm + (F_tail2 + noise_var) * r.V_norm;
    r.bias = F2 * r.B_test + F_tail2 * (1.0 + r.V_test);
    r.variance = noise_var * r.V_test;
}

double overparam_theta(double psi2, double eta, bool at_level) {
    if (!at_level) return 1.0 / (1.0 + eta);
    const double b = psi2 + eta + 1.0;
    const double disc = std::sqrt(b * b - 4.0 * psi2);
    const double c = psi2 - 1.0 - eta;
    if (c > 0.0) return (disc + c) / (2.0 * eta * psi2);
    return 2.0 / (disc - c);  // rationalized to avoid cancellation
}

double underparam_theta(double psi1, double zeta) {
    const double z2 = zeta * zeta;
    const double b = 1.0 + z2 - z2 * psi1;
    const double disc = std::sqrt(b * b + 4.0 * z2 * psi1);
    if (b > 0.0) return 2.0 / (b + disc);  // rationalized to avoid cancellation
    return (-b + disc) / (2.0 * z2 * psi1);
}

RiskPrediction predict_critical(const ScalingRegime& reg, double zeta, double lambda_bar, double F_ell,
                                double F_tail2, double noise_var, double mu_tail2) {
    if (!reg.critical()) throw ValidationError("critical predictor needs kappa1 = kappa2");
    FixedPointSolution s;
    if (reg.tag == RegimeTag::critical_below_level)
        s = tau_closed_form(reg.theta1 / reg.theta2, zeta, lambda_bar);
    else
        s = solve_tau(reg.psi1, reg.psi2, zeta, lambda_bar);
    RiskPrediction r;
    const double t1 = s.tau1, t12 = s.tau1 * s.tau1;
    r.B_test = -s.dtau2 / t12;
    r.V_test = -s.dtau1 / t12 - 1.0;
    r.alpha_c = lambda_bar * lambda_bar * t12;
    r.B_norm = (s.tau2 + lambda_bar * s.dtau2) / mu_tail2;
    r.V_norm = (t1 + lambda_bar * s.dtau1) / mu_tail2;
    r.norm_convention = NormConvention::per_n;
    r.fixed_point = s;
    assemble(r, F_ell, F_tail2, noise_var);
    return r;
}

RiskPrediction predict_overparam(const ScalingRegime& reg, double zeta, double lambda_bar, double F_ell,
                                 double F_tail2, double noise_var, double mu_tail2) {
    const bool at = reg.tag == RegimeTag::overparam_at_level || reg.tag == RegimeTag::critical_at_level;
    const double z2 = zeta * zeta;
    const double eta = (lambda_bar + 1.0) / z2;
    const double psi2 = reg.psi2;
    const double th = overparam_theta(psi2, eta, at);
    RiskPrediction r;
    if (at) {
        const double den = eta * psi2 * th * th + 1.0;
        r.B_test = (psi2 * psi2 * eta * eta * th * th * th +
                    (psi2 * eta * eta + psi2 * eta - psi2 * psi2 * eta) * th * th + 1.0 - psi2) /
                   den;
        r.V_test = (psi2 * th - psi2 * eta * th * th) / den;
    } else {
        r.B_test = 1.0;
        r.V_test = 0.0;
    }
    r.alpha_c = lambda_bar * lambda_bar * th * th / (z2 * z2);
    r.B_norm = ((1.0 - eta * th) / z2 - lambda_bar * r.B_test * th * th / (z2 * z2)) / mu_tail2;
    r.V_norm = (th / z2 - lambda_bar * (r.V_test + 1.0) * th * th / (z2 * z2)) / mu_tail2;
    r.norm_convention = NormConvention::per_n;
    assemble(r, F_ell, F_tail2, noise_var);
    return r;
}

RiskPrediction predict_underparam(const ScalingRegime& reg, double zeta, double F_ell, double F_tail2,
                                  double noise_var, double mu_tail2) {
    const bool at = reg.tag == RegimeTag::underparam_at_level || reg.tag == RegimeTag::critical_at_level;
    const double psi1 = at ? reg.psi1 : 0.0;
    const double z2 = zeta * zeta;
    RiskPrediction r;
    if (at && psi1 > 0.0) {
        const double iz2 = 1.0 / z2;
        const double b = 1.0 + psi1 + iz2;
        r.B_test = 0.5 * (1.0 - psi1 - iz2 + std::sqrt(b * b - 4.0 * psi1));
        const double th = underparam_theta(psi1, zeta);
        r.B_norm = (th * z2 * (1.0 - psi1) * psi1 + th * th * z2 * psi1 * psi1) /
                   (1.0 + z2 * (1.0 - psi1 + 2.0 * psi1 * th)) / mu_tail2;
    } else {
        r.B_test = 1.0;
        r.B_norm = 0.0;
    }
    r.V_test = 0.0;
    r.alpha_c = 1.0;
    r.V_norm = 0.0;
    r.norm_convention = NormConvention::per_p;
    assemble(r, F_ell, F_tail2, noise_var);
    return r;
}

RiskPrediction predict(const ScalingRegime& reg, const ActivationScalars& act, const TargetFrequencies& target,
                       double noise_var) {
    if (!(noise_var >= 0.0)) throw ValidationError("noise variance must be non-negative");
    RiskPrediction r;
    const bool psi1_inf = !(reg.psi1 <= kPsiInfinity);
    const bool psi2_inf = !(reg.psi2 <= kPsiInfinity);
    if (reg.critical() && reg.tag == RegimeTag::critical_at_level && psi1_inf && !psi2_inf)
        r = predict_overparam(reg, act.zeta, act.lambda_bar, target.F_ell, target.F_tail2, noise_var, act.mu_tail2);
    else if (reg.critical() && reg.tag == RegimeTag::critical_at_level && psi2_inf && !psi1_inf)
        r = predict_underparam(reg, act.zeta, target.F_ell, target.F_tail2, noise_var, act.mu_tail2);
    else if (reg.critical())
        r = predict_critical(reg, act.zeta, act.lambda_bar, target.F_ell, target.F_tail2, noise_var, act.mu_tail2);
    else if (reg.overparam())
        r = predict_overparam(reg, act.zeta, act.lambda_bar, target.F_ell, target.F_tail2, noise_var, act.mu_tail2);
    else
        r = predict_underparam(reg, act.zeta, target.F_ell, target.F_tail2, noise_var, act.mu_tail2);
    r.staircase = target.above;
    return r;
}

double gcv_alpha(const ScalingRegime& reg, double zeta, double lambda_bar) {
    if (reg.underparam()) return 1.0;
    if (reg.overparam()) {
        const double z2 = zeta * zeta;
        const double th = overparam_theta(reg.psi2, (lambda_bar + 1.0) / z2, reg.tag == RegimeTag::overparam_at_level);
        return lambda_bar * lambda_bar * th * th / (z2 * z2);
    }
    return predict_critical(reg, zeta, lambda_bar, 0.0, 0.0, 0.0, 1.0).alpha_c;
}

}  // namespace rfrr
