#include "rfrr/errors.hpp"
#include "rfrr/fixed_point.hpp"

#include <doctest.h>

#include <cmath>

using namespace rfrr;
using doctest::Approx;

TEST_CASE("resolvent pair reference values") {
    // independent damped iteration with continuation
    const NuSolution a = solve_nu(1.0, 2.0, 1.3, 0.0, cplx(0.0, 0.7));
    CHECK(a.nu1.imag() == Approx(0.1411967684236483).epsilon(1e-10));
    CHECK(a.nu2.imag() == Approx(0.617387244614122).epsilon(1e-10));
    const NuSolution b = solve_nu(1.0, 2.0, 1.3, 1.5, cplx(0.0, 0.7));
    CHECK(b.nu1.imag() == Approx(0.15265380936078565).epsilon(1e-10));
    CHECK(b.nu2.imag() == Approx(0.6288442855512596).epsilon(1e-10));
    CHECK(std::abs(b.nu1.real()) < 1e-10);
    CHECK(std::abs(b.nu2.real()) < 1e-10);
}

TEST_CASE("resolvent pair closed form") {
    const NuSolution it = solve_nu(1.0, 2.0, 1.3, 0.0, cplx(0.0, 0.7));
    const NuSolution cf = nu_closed_form(1.0, 2.0, 1.3, cplx(0.0, 0.7));
    CHECK(std::abs(it.nu1 - cf.nu1) < 1e-10);
    CHECK(std::abs(it.nu2 - cf.nu2) < 1e-10);
}

TEST_CASE("resolvent pair at large argument") {
    const cplx z(0.0, 1e6);
    const NuSolution s = solve_nu(1.0, 3.0, 1.0, 1.0, z);
    const cplx expect = (1.0 / 4.0) * (-1.0 / z);
    CHECK(std::abs(s.nu1 / expect - 1.0) < 0.01);
}

TEST_CASE("fixed point reference values") {
    struct Case {
        double psi1, psi2, zeta, lb, tau1, tau2;
    };
    const Case cases[] = {{1, 1, 1, 1, 0.518790063675884, 0.4087719118070409},
                          {0.25, 4, 0.5, 1e-3, 937.5033654885939, 892.4502373383871},
                          {4, 0.25, 2, 10, 0.06823627907079116, 0.0639586221531405}};
    for (const Case& c : cases) {
        const FixedPointSolution s = solve_tau(c.psi1, c.psi2, c.zeta, c.lb);
        CHECK(s.tau1 == Approx(c.tau1).epsilon(1e-9));
        CHECK(s.tau2 == Approx(c.tau2).epsilon(1e-9));
    }
}

TEST_CASE("fixed point derivatives match finite differences") {
    const FixedPointSolution s = solve_tau(1.0, 1.0, 1.0, 1.0);
    const double h = 1e-5;
    const FixedPointSolution up = solve_tau(1.0, 1.0, 1.0, 1.0 + h), dn = solve_tau(1.0, 1.0, 1.0, 1.0 - h);
    CHECK(s.dtau1 == Approx((up.tau1 - dn.tau1) / (2 * h)).epsilon(1e-6));
    CHECK(s.dtau2 == Approx((up.tau2 - dn.tau2) / (2 * h)).epsilon(1e-6));
}

TEST_CASE("certified residuals and path agreement over a grid") {
    for (double psi1 : {0.1, 0.3, 1.0, 3.0, 10.0})
        for (double psi2 : {0.1, 0.3, 1.0, 3.0, 10.0})
            for (double zeta : {0.5, 1.0, 2.0})
                for (double lb : {1e-3, 0.1, 1.0, 10.0}) {
                    const TauPaths t = solve_tau_paths(psi1, psi2, zeta, lb);
                    CHECK(t.relative_gap < 1e-9);
                    double r1 = 0.0, r2 = 0.0;
                    tau_residuals(psi1, psi2, zeta, lb, t.nu_path.tau1, t.nu_path.tau2, r1, r2);
                    CHECK(std::abs(r1) < 1e-10);
                    CHECK(std::abs(r2) < 1e-10);
                    CHECK(t.nu_path.tau1 > 0.0);
                    CHECK(t.nu_path.tau2 > 0.0);
                }
}

TEST_CASE("heavy ridge limit") {
    for (double psi1 : {0.1, 10.0})
        for (double zeta : {0.5, 2.0}) {
            const FixedPointSolution s = solve_tau(psi1, 1.0, zeta, 1e6);
            CHECK(s.tau1 * 1e6 == Approx(1.0).epsilon(0.01));
            CHECK(s.tau2 * 1e6 == Approx(1.0).epsilon(0.01));
            CHECK(s.dtau1 * 1e12 == Approx(-1.0).epsilon(0.02));
        }
}

TEST_CASE("below level closed form") {
    CHECK(tau_closed_form(1.0, 1.0, 1.0).tau1 == Approx(0.5).epsilon(1e-14));
    CHECK(tau_closed_form(1e-8, 1.0, 1.0).tau1 == Approx(1.0).epsilon(1e-6));
    CHECK(tau_closed_form(2.0, 1.0, 1e6).tau1 * 1e6 == Approx(1.0).epsilon(0.01));
    const double h = 1e-6;
    const FixedPointSolution s = tau_closed_form(0.7, 1.4, 0.3);
    const double fd = (tau_closed_form(0.7, 1.4, 0.3 + h).tau1 - tau_closed_form(0.7, 1.4, 0.3 - h).tau1) / (2 * h);
    CHECK(s.dtau1 == Approx(fd).epsilon(1e-7));
    for (double gamma : {0.5, 2.0}) {
        const FixedPointSolution at = solve_tau(gamma * 1e-6, 1e-6, 1.3, 0.2);
        const FixedPointSolution cf = tau_closed_form(gamma, 1.3, 0.2);
        CHECK(at.tau1 == Approx(cf.tau1).epsilon(1e-6));
        CHECK(at.tau2 == Approx(cf.tau2).epsilon(1e-6));
    }
}

TEST_CASE("wide parameter limit reproduces the overparametrized root") {
    const double psi2 = 2.5, zeta = 1.2, lb = 0.3;
    const double eta = (lb + 1) / (zeta * zeta);
    const double root = (std::sqrt((psi2 + eta + 1) * (psi2 + eta + 1) - 4 * psi2) + psi2 - 1 - eta) / (2 * eta * psi2);
    const FixedPointSolution s = solve_tau(1e8, psi2, zeta, lb);
    CHECK(zeta * zeta * s.tau1 == Approx(root).epsilon(1e-3));
}

TEST_CASE("invalid ridge is refused") {
    CHECK_THROWS_AS(solve_tau(1.0, 1.0, 1.0, 1e-9), ValidationError);
    CHECK_THROWS_AS(tau_closed_form(1.0, 1.0, 0.0), ValidationError);
}

TEST_CASE("corrupted newton path is detected") {
    bool detected = false;
    try {
        detected = solve_tau_paths(1.0, 1.0, 1.0, 1.0, -1.0).relative_gap > 1e-8;
    } catch (const NumericalError&) {
        detected = true;
    }
    CHECK(detected);
}

TEST_CASE("partial stieltjes transforms") {
    for (int i = 0; i < 50; ++i) {
        const cplx z(-3.0 + 0.15 * i, 0.05);
        const StieltjesPoint s = solve_stieltjes(1.0, 2.0, 1.0, 1.2, 3.0, z);
        CHECK(s.m1.imag() >= 0.0);
        CHECK(s.m2.imag() >= 0.0);
        CHECK(std::abs(s.m1 + s.m2) <= 1.0 / z.imag() + 1e-12);
    }
    const cplx big(0.0, 1e6);
    const StieltjesPoint s = solve_stieltjes(1.0, 2.0, 1.0, 1.2, 3.0, big);
    CHECK(std::abs((s.m1 + s.m2) / (-1.0 / big) - 1.0) < 0.01);
}

TEST_CASE("singular value density") {
    DensityParams p;
    p.theta1 = 1.0;
    p.theta2 = 2.0;
    p.mu_ell = 1.0;
    p.mu_tail = 0.8;
    p.psi = 3.0;
    std::vector<double> grid(3000);
    for (size_t i = 0; i < grid.size(); ++i) grid[i] = 8.0 * i / (grid.size() - 1);
    const auto rho = singular_value_density(p, grid, 1e-3);
    double mass = 0.0;
    for (size_t i = 1; i < grid.size(); ++i) {
        CHECK(rho[i] >= -1e-8);
        CHECK(std::isfinite(rho[i]));
        mass += 0.5 * (rho[i] + rho[i - 1]) * (grid[i] - grid[i - 1]);
    }
    CHECK(mass == Approx(1.0).epsilon(0.02));
}
