#include "rfrr/theory.hpp"

#include <doctest.h>

#include <cmath>

using namespace rfrr;
using doctest::Approx;

namespace {

ActivationScalars scalars(double zeta, double lambda_bar) {
    ActivationScalars s;
    s.mu_tail2 = 1.0;
    s.mu_ell = zeta;
    s.zeta = zeta;
    s.lambda_bar = lambda_bar;
    return s;
}

TargetFrequencies frequencies(double F_ell, double F_tail2) {
    TargetFrequencies f;
    f.F_ell = F_ell;
    f.F_tail2 = F_tail2;
    f.norm2 = F_ell * F_ell + F_tail2;
    return f;
}

}  // namespace

TEST_CASE("regime classification") {
    const ScalingRegime a = classify(2, 2, 1, 1);
    CHECK(a.tag == RegimeTag::critical_at_level);
    CHECK(a.ell == 2);
    CHECK(a.psi1 == Approx(2.0));  // count / (d^2 / 2)
    CHECK(a.psi2 == Approx(2.0));
    const ScalingRegime b = classify(1.5, 1.5, 1, 1);
    CHECK(b.tag == RegimeTag::critical_below_level);
    CHECK(b.ell == 2);
    CHECK(b.psi1 == 0.0);
    CHECK(b.psi2 == 0.0);
    const ScalingRegime c = classify(2, 1, 2, 1);
    CHECK(c.tag == RegimeTag::overparam_at_level);
    CHECK(c.ell == 1);
    CHECK(c.psi2 == Approx(1.0));
    CHECK(classify(2.5, 3.5, 1, 1).tag == RegimeTag::underparam_below_level);
    CHECK(classify(1, 2, 1, 1).tag == RegimeTag::underparam_at_level);

    const ScalingRegime s = classify_sizes(2, 2, 50, 1250, 2500);
    CHECK(s.psi2 == Approx(1.0));
    CHECK(s.psi1 == Approx(2.0));
}

TEST_CASE("critical factors against finite differences of an independent solver") {
    ScalingRegime reg = classify(2, 2, 0.5, 0.5);  // psi1 = psi2 = 1
    const RiskPrediction r = predict(reg, scalars(1.0, 1.0), frequencies(1.0, 0.0), 0.0);
    CHECK(r.B_test == Approx(0.9224639483826413).epsilon(1e-6));
    CHECK(r.V_test == Approx(0.32316608046490636).epsilon(1e-6));
    CHECK(r.alpha_c == Approx(0.26914313016882774).epsilon(1e-8));
}

TEST_CASE("overparametrized closed form") {
    const ScalingRegime reg = classify(3, 2, 1, 1.25);  // psi2 = 2.5
    const RiskPrediction r = predict(reg, scalars(1.2, 0.3), frequencies(1.0, 0.0), 0.0);
    CHECK(r.B_test == Approx(0.13295893873499837).epsilon(1e-12));
    CHECK(r.V_test == Approx(0.21860843024132082).epsilon(1e-12));
    CHECK(r.alpha_c == Approx(0.028544791973780487).epsilon(1e-12));
    CHECK(overparam_theta(2.5, 1.3 / 1.44, true) == Approx(0.8109697941821893).epsilon(1e-12));

    const ScalingRegime below = classify(2.5, 1.5, 1, 1);
    const RiskPrediction b = predict(below, scalars(1.2, 0.3), frequencies(1.0, 0.0), 0.0);
    CHECK(b.B_test == Approx(1.0));
    CHECK(b.V_test == Approx(0.0).scale(1.0));
    const double eta = 1.3 / 1.44, th = 1.0 / (1.0 + eta);
    CHECK(b.alpha_c == Approx(0.09 * th * th / (1.2 * 1.2 * 1.2 * 1.2)).epsilon(1e-12));

    const RiskPrediction heavy = predict(reg, scalars(1.2, 1e6), frequencies(1.0, 0.0), 0.0);
    CHECK(heavy.B_test == Approx(1.0).epsilon(0.01));
    CHECK(std::abs(heavy.V_test) < 0.01);
}

TEST_CASE("underparametrized closed form") {
    const ScalingRegime reg = classify(2, 3, 0.35, 1);  // psi1 = 0.7
    const RiskPrediction r = predict(reg, scalars(1.2, 0.3), frequencies(1.0, 0.0), 0.0);
    CHECK(r.B_test == Approx(0.6591311215458253).epsilon(1e-12));
    CHECK(r.V_test == 0.0);
    CHECK(r.alpha_c == 1.0);
    CHECK(r.norm_convention == NormConvention::per_p);

    auto bias = [](double psi1, double zeta) {
        ScalingRegime g = classify(2, 3, psi1 / 2, 1);
        return predict(g, scalars(zeta, 0.3), frequencies(1.0, 0.0), 0.0).B_test;
    };
    CHECK(bias(0.5, 1e3) == Approx(0.5).epsilon(1e-3));
    CHECK(bias(1e6, 1.0) < 1e-3);
    CHECK(bias(1e-12, 1.0) == Approx(1.0).epsilon(1e-9));
}

TEST_CASE("critical heavy ridge and below level values") {
    const ScalingRegime reg = classify(2, 2, 0.5, 1.5);
    const RiskPrediction r = predict(reg, scalars(0.8, 1e6), frequencies(1.0, 0.0), 0.0);
    CHECK(r.B_test == Approx(1.0).epsilon(0.01));
    CHECK(std::abs(r.V_test) < 0.01);
    CHECK(r.alpha_c == Approx(1.0).epsilon(0.01));
    CHECK(gcv_alpha(reg, 0.8, 1e6) == Approx(1.0).epsilon(0.01));

    const ScalingRegime below = classify(1.5, 1.5, 1, 1);
    CHECK(predict(below, scalars(1.0, 1.0), frequencies(1.0, 0.0), 0.0).alpha_c == Approx(0.25).epsilon(1e-12));
}

TEST_CASE("assembly identities") {
    const ScalingRegime reg = classify(2, 2, 0.7, 1.1);
    const double noise = 0.3;
    const RiskPrediction r = predict(reg, scalars(1.3, 0.4), frequencies(1.5, 0.6), noise);
    const double F2 = 2.25, T = 0.6;
    CHECK(r.R_test == Approx(F2 * r.B_test + T + (T + noise) * r.V_test).epsilon(1e-14));
    CHECK(r.R_train == Approx(r.alpha_c * (r.R_test + noise)).epsilon(1e-14));
    CHECK(r.R_train / r.alpha_c - r.R_test == Approx(noise).epsilon(1e-12));
    CHECK(r.L_norm == Approx(F2 * r.B_norm + (T + noise) * r.V_norm).epsilon(1e-14));
    CHECK(r.bias + r.variance == Approx(r.R_test).epsilon(1e-14));
    CHECK(r.variance == Approx(noise * r.V_test).epsilon(1e-14));
    CHECK(r.norm_convention == NormConvention::per_n);

    const RiskPrediction inf_ridge = predict(reg, scalars(1.3, 1e8), frequencies(1.5, 0.0), 0.0);
    CHECK(inf_ridge.R_test == Approx(2.25).epsilon(1e-6));
}

TEST_CASE("regime bounds hold across grids") {
    for (double psi : {0.1, 0.5, 1.0, 3.0, 10.0})
        for (double zeta : {0.5, 1.0, 2.0})
            for (double lb : {1e-3, 0.1, 10.0}) {
                for (const ScalingRegime& reg : {classify(2, 2, psi / 2, 1.0), classify(3, 2, 1.0, psi / 2),
                                                 classify(2, 3, psi / 2, 1.0)}) {
                    const RiskPrediction r = predict(reg, scalars(zeta, lb), frequencies(1.0, 0.5), 0.2);
                    CHECK(r.alpha_c >= 0.0);
                    CHECK(r.alpha_c <= 1.0 + 1e-10);
                    CHECK(r.V_test >= -1e-10);
                    if (!reg.critical()) {
                        CHECK(r.B_test >= -1e-10);
                        CHECK(r.B_test <= 1.0 + 1e-10);
                    }
                }
            }
}

TEST_CASE("regime limits") {
    const auto s = scalars(1.2, 0.3);
    const auto f = frequencies(1.0, 0.5);
    const RiskPrediction over = predict(classify(3, 2, 1, 0.7), s, f, 0.3);
    double prev = 1e9;
    for (double psi1 : {1e4, 1e6, 1e8}) {
        ScalingRegime crit = classify(2, 2, 1, 0.7);
        crit.psi1 = psi1;
        const double gap = std::abs(predict(crit, s, f, 0.3).R_test / over.R_test - 1.0);
        CHECK(gap <= prev);
        prev = gap;
    }
    CHECK(prev < 1e-3);
    const RiskPrediction under = predict(classify(2, 3, 0.7, 1), s, f, 0.3);
    prev = 1e9;
    for (double psi2 : {1e4, 1e6, 1e8}) {
        ScalingRegime crit = classify(2, 2, 0.7, 1);
        crit.psi2 = psi2;
        const double gap = std::abs(predict(crit, s, f, 0.3).B_test / under.B_test - 1.0);
        CHECK(gap <= prev);
        prev = gap;
    }
    CHECK(prev < 1e-3);
    ScalingRegime huge = classify(2, 2, 1, 0.7);
    huge.psi1 = 1e12;
    CHECK(predict(huge, s, f, 0.3).R_test == Approx(over.R_test).epsilon(1e-9));
}

TEST_CASE("bias decreases with the dominant count outside the critical regime") {
    double prev_under = 2.0, prev_over = 2.0;
    for (int i = 0; i < 20; ++i) {
        const double psi = 0.01 * std::pow(1e4, i / 19.0);
        const double bu = predict(classify(2, 3, psi / 2, 1), scalars(1.1, 0.2), frequencies(1, 0), 0).B_test;
        const double bo = predict(classify(3, 2, 1, psi / 2), scalars(1.1, 0.2), frequencies(1, 0), 0).B_test;
        CHECK(bu <= prev_under + 1e-12);
        CHECK(bo <= prev_over + 1e-12);
        prev_under = bu;
        prev_over = bo;
    }
}

TEST_CASE("staircase at vanishing ridge") {
    // kappa1 = 2.5, kappa2 = 3.5: level 3 below both exponents, learns degrees <= 2
    const ScalingRegime reg = classify(2.5, 3.5, 1, 1);
    TargetFrequencies f;
    f.F_ell = 0.8;
    f.F_tail2 = 0.3;
    f.above = {2.0, 1.5, 0.94, 0.3};
    f.norm2 = 2.5;
    const RiskPrediction r = predict(reg, scalars(1.0, 1e-6), f, 0.0);
    CHECK(r.R_test == Approx(0.94).epsilon(1e-3));
}
