#include "rfrr/fixed_point.hpp"

#include "rfrr/errors.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>

namespace rfrr {

namespace {

const cplx I(0.0, 1.0);

struct PairResult {
    cplx m1, m2;
    long iterations = 0;
    double residual = 0.0;
};

// m1 = w1 / (-z - a m2 - b m2 / (1 - psi b m1 m2)), and symmetrically for m2.
void pair_map(double w1, double w2, double a, double b, double psi, cplx z, cplx m1, cplx m2, cplx& f1,
              cplx& f2) {
    const cplx D = 1.0 - psi * b * m1 * m2;
    f1 = w1 / (-z - a * m2 - b * m2 / D);
    f2 = w2 / (-z - a * m1 - b * m1 / D);
}

PairResult solve_pair(double w1, double w2, double a, double b, double psi, cplx z,
                      const IterationOptions& opt) {
    if (!(z.imag() > 0.0)) throw ValidationError("fixed point requires Im z > 0");
    if (!(opt.damping > 0.0 && opt.damping <= 1.0)) throw ValidationError("damping must lie in (0, 1]");
    const double im_target = z.imag();
    const double im_start = opt.start_scale * std::max({1.0, std::abs(z), im_target});
    const int steps = std::max(
        1, static_cast<int>(std::ceil(std::log10(im_start / im_target) * opt.steps_per_decade)));
    PairResult r;
    cplx zs(z.real(), im_start);
    r.m1 = -w1 / zs;
    r.m2 = -w2 / zs;
    for (int s = 0; s <= steps; ++s) {
        const double frac = static_cast<double>(s) / steps;
        zs = cplx(z.real(), im_start * std::pow(im_target / im_start, frac));
        if (s == steps) zs = z;
        bool converged = false;
        long it = 0;
        for (; it < opt.max_iterations; ++it) {
            cplx f1, f2;
            pair_map(w1, w2, a, b, psi, zs, r.m1, r.m2, f1, f2);
            const cplx n1 = (1.0 - opt.damping) * r.m1 + opt.damping * f1;
            const cplx n2 = (1.0 - opt.damping) * r.m2 + opt.damping * f2;
            // relative per component: one of the pair can be orders of magnitude smaller
            const double delta = std::max(std::abs(n1 - r.m1) / std::abs(n1), std::abs(n2 - r.m2) / std::abs(n2));
            r.m1 = n1;
            r.m2 = n2;
            if (!std::isfinite(delta)) break;
            if (delta < opt.tolerance) {
                converged = true;
                ++it;
                break;
            }
        }
        r.iterations += it;
        if (!converged) {
            cplx f1, f2;
            pair_map(w1, w2, a, b, psi, zs, r.m1, r.m2, f1, f2);
            std::ostringstream os;
            os << "fixed-point iteration did not converge at z = " << zs << " after " << it
               << " iterations; last residual " << std::max(std::abs(f1 - r.m1), std::abs(f2 - r.m2));
            throw NumericalError(os.str());
        }
        if (r.m1.imag() < -1e-12 || r.m2.imag() < -1e-12) {
            std::ostringstream os;
            os << "fixed point left the upper half-plane at z = " << zs << " (wrong branch)";
            throw NumericalError(os.str());
        }
    }
    cplx f1, f2;
    pair_map(w1, w2, a, b, psi, z, r.m1, r.m2, f1, f2);
    r.residual = std::max(std::abs(f1 - r.m1) / std::abs(r.m1), std::abs(f2 - r.m2) / std::abs(r.m2));
    return r;
}

double rel_gap(double a, double b) { return std::abs(a - b) / std::max(std::abs(a), 1e-300); }

void tau_jacobian(double psi1, double psi2, double zeta2, double z, double t1, double t2, double J[2][2],
                  double F[2]) {
    const double r = psi1 / psi2;
    const double A = zeta2 * t1 * t2 * (z * t1 - 1.0);
    const double A1 = zeta2 * (2.0 * z * t1 * t2 - t2);
    const double A2 = zeta2 * (z * t1 * t1 - t1);
    F[0] = A + r * (zeta2 * t1 * t2 + (t2 - t1) / psi2);
    F[1] = A + (t1 - t2) * (t1 + zeta2 * t2) / psi2;
    J[0][0] = A1 + r * (zeta2 * t2 - 1.0 / psi2);
    J[0][1] = A2 + r * (zeta2 * t1 + 1.0 / psi2);
    J[1][0] = A1 + ((t1 + zeta2 * t2) + (t1 - t2)) / psi2;
    J[1][1] = A2 + (-(t1 + zeta2 * t2) + zeta2 * (t1 - t2)) / psi2;
}

bool solve2(const double J[2][2], const double b[2], double x[2], double& cond) {
    const double det = J[0][0] * J[1][1] - J[0][1] * J[1][0];
    const double nJ = std::sqrt(J[0][0] * J[0][0] + J[0][1] * J[0][1] + J[1][0] * J[1][0] + J[1][1] * J[1][1]);
    cond = det == 0.0 ? INFINITY : nJ * nJ / std::abs(det);
    if (!(cond < 1e14)) return false;
    x[0] = (J[1][1] * b[0] - J[0][1] * b[1]) / det;
    x[1] = (J[0][0] * b[1] - J[1][0] * b[0]) / det;
    return true;
}

void check_tau_inputs(double psi1, double psi2, double zeta, double lambda_bar) {
    if (!(psi1 > 0.0 && psi2 > 0.0 && std::isfinite(psi1) && std::isfinite(psi2)))
        throw ValidationError("psi1 and psi2 must be positive and finite");
    if (!(zeta > 0.0 && std::isfinite(zeta))) throw ValidationError("zeta must be positive");
    if (!(lambda_bar >= 1e-8 && std::isfinite(lambda_bar)))
        throw ValidationError("normalized ridge must be >= 1e-8 (the lambda -> 0 limit is not evaluated)");
}

}  // namespace

const char* to_string(FixedPointSolution::Method m) {
    switch (m) {
        case FixedPointSolution::Method::nu_iteration:
            return "nu_iteration";
        case FixedPointSolution::Method::newton:
            return "newton";
        default:
            return "closed_form";
    }
}

NuSolution solve_nu(double theta1, double theta2, double zeta, double psi, cplx z, const IterationOptions& opt) {
    if (!(theta1 > 0.0 && theta2 > 0.0)) throw ValidationError("theta1 and theta2 must be positive");
    if (!(zeta > 0.0)) throw ValidationError("zeta must be positive");
    if (!(psi >= 0.0)) throw ValidationError("psi must be non-negative");
    const double th = theta1 + theta2;
    const PairResult r = solve_pair(theta1 / th, theta2 / th, 1.0, zeta * zeta, psi, z, opt);
    return {r.m1, r.m2, r.residual, r.iterations};
}

NuSolution nu_closed_form(double theta1, double theta2, double zeta, cplx z) {
    const double th = theta1 + theta2;
    const double s = 1.0 + zeta * zeta;
    auto branch = [&](double ta, double tb) {
        const cplx q = (ta - tb) / th + z * z / s;
        const cplx root = std::sqrt(q * q - (4.0 * ta / th) * z * z / s);
        const cplx c1 = (-q - root) / (2.0 * z);
        const cplx c2 = (-q + root) / (2.0 * z);
        return c1.imag() >= c2.imag() ? c1 : c2;
    };
    NuSolution out;
    out.nu1 = branch(theta1, theta2);
    out.nu2 = branch(theta2, theta1);
    return out;
}

void tau_residuals(double psi1, double psi2, double zeta, double z, double t1, double t2, double& r1,
                   double& r2) {
    const double z2 = zeta * zeta;
    const double r = psi1 / psi2;
    const double a = z2 * t1 * t2 * z * t1, b = z2 * t1 * t2;
    const double e1 = a - b + r * (b + (t2 - t1) / psi2);
    const double s1 = std::abs(a) + std::abs(b) + r * (std::abs(b) + (std::abs(t1) + std::abs(t2)) / psi2);
    const double c = (t1 - t2) * (t1 + z2 * t2) / psi2;
    const double e2 = a - b + c;
    const double s2 = std::abs(a) + std::abs(b) +
                      (t1 * t1 + z2 * std::abs(t1 * t2) + std::abs(t1 * t2) + z2 * t2 * t2) / psi2;
    r1 = std::abs(e1) / std::max(s1, 1e-300);
    r2 = std::abs(e2) / std::max(s2, 1e-300);
}

void tau_derivatives(FixedPointSolution& sol, double psi1, double psi2, double zeta, double lambda_bar) {
    double J[2][2], F[2];
    const double z2 = zeta * zeta;
    tau_jacobian(psi1, psi2, z2, lambda_bar, sol.tau1, sol.tau2, J, F);
    const double dz = z2 * sol.tau1 * sol.tau1 * sol.tau2;
    const double rhs[2] = {-dz, -dz};
    double x[2], cond;
    if (!solve2(J, rhs, x, cond)) {
        std::ostringstream os;
        os << "derivative system is singular (condition estimate " << cond << ")";
        throw NumericalError(os.str());
    }
    sol.dtau1 = x[0];
    sol.dtau2 = x[1];
}

FixedPointSolution solve_tau_newton(double psi1, double psi2, double zeta, double lambda_bar, double tau1_seed,
                                    double tau2_seed, double zeta2_sign) {
    check_tau_inputs(psi1, psi2, zeta, lambda_bar);
    const double z2 = zeta2_sign * zeta * zeta;
    FixedPointSolution s;
    s.method = FixedPointSolution::Method::newton;
    double t[2] = {tau1_seed, tau2_seed};
    for (int it = 0; it < 100; ++it) {
        double J[2][2], F[2], step[2], cond;
        tau_jacobian(psi1, psi2, z2, lambda_bar, t[0], t[1], J, F);
        const double rhs[2] = {-F[0], -F[1]};
        if (!solve2(J, rhs, step, cond)) {
            std::ostringstream os;
            os << "Newton Jacobian is singular (condition estimate " << cond << ")";
            throw NumericalError(os.str());
        }
        t[0] += step[0];
        t[1] += step[1];
        s.iterations = it + 1;
        if (std::abs(step[0]) <= 1e-15 * std::abs(t[0]) && std::abs(step[1]) <= 1e-15 * std::abs(t[1])) break;
    }
    s.tau1 = t[0];
    s.tau2 = t[1];
    tau_residuals(psi1, psi2, zeta, lambda_bar, t[0], t[1], s.residual1, s.residual2);
    if (zeta2_sign > 0) tau_derivatives(s, psi1, psi2, zeta, lambda_bar);
    return s;
}

TauPaths solve_tau_paths(double psi1, double psi2, double zeta, double lambda_bar, double zeta2_newton_sign) {
    check_tau_inputs(psi1, psi2, zeta, lambda_bar);
    const double psi = psi1 + psi2;
    const double u = lambda_bar;
    const cplx z0 = I * std::sqrt(psi1 * u / psi);
    const NuSolution nu = solve_nu(psi1, psi2, zeta, psi, z0);
    const cplx c = -I * std::sqrt(psi1 * psi / (psi2 * psi2 * u));
    const cplx t1 = c * nu.nu2;
    const cplx t2 = c * nu.nu2 / (1.0 - zeta * zeta * psi * nu.nu1 * nu.nu2);
    TauPaths out;
    FixedPointSolution& a = out.nu_path;
    a.method = FixedPointSolution::Method::nu_iteration;
    a.tau1 = t1.real();
    a.tau2 = t2.real();
    a.iterations = nu.iterations;
    if (std::abs(t1.imag()) > 1e-8 * std::abs(t1) || std::abs(t2.imag()) > 1e-8 * std::abs(t2))
        throw NumericalError("resolvent correspondence produced non-real fixed points");
    if (!(a.tau1 > 0.0 && a.tau2 > 0.0)) throw NumericalError("fixed point is not positive");
    tau_residuals(psi1, psi2, zeta, lambda_bar, a.tau1, a.tau2, a.residual1, a.residual2);
    tau_derivatives(a, psi1, psi2, zeta, lambda_bar);
    out.newton_path = solve_tau_newton(psi1, psi2, zeta, lambda_bar, a.tau1, a.tau2, zeta2_newton_sign);
    out.relative_gap = std::max(rel_gap(a.tau1, out.newton_path.tau1), rel_gap(a.tau2, out.newton_path.tau2));
    return out;
}

FixedPointSolution solve_tau(double psi1, double psi2, double zeta, double lambda_bar) {
    const TauPaths p = solve_tau_paths(psi1, psi2, zeta, lambda_bar);
    if (!(p.relative_gap <= 1e-8)) {
        std::ostringstream os;
        os << "fixed-point paths disagree: relative gap " << p.relative_gap << " at psi1=" << psi1
           << ", psi2=" << psi2 << ", zeta=" << zeta << ", lambda_bar=" << lambda_bar;
        throw NumericalError(os.str());
    }
    // the Newton-polished values carry the smaller residual
    const FixedPointSolution& best =
        std::max(p.newton_path.residual1, p.newton_path.residual2) <= std::max(p.nu_path.residual1, p.nu_path.residual2)
            ? p.newton_path
            : p.nu_path;
    if (std::max(best.residual1, best.residual2) > 1e-10) {
        std::ostringstream os;
        os << "fixed-point residual " << std::max(best.residual1, best.residual2) << " exceeds 1e-10";
        throw NumericalError(os.str());
    }
    FixedPointSolution out = best;
    out.iterations = p.nu_path.iterations + p.newton_path.iterations;
    return out;
}

FixedPointSolution tau_closed_form(double gamma, double zeta, double lambda_bar) {
    if (!(gamma > 0.0)) throw ValidationError("gamma must be positive");
    if (!(zeta > 0.0)) throw ValidationError("zeta must be positive");
    if (!(lambda_bar >= 1e-8)) throw ValidationError("normalized ridge must be >= 1e-8");
    const double z = lambda_bar;
    const double c = 1.0 + zeta * zeta;
    const double A = 1.0 - gamma - gamma * z / c;
    const double dA = -gamma / c;
    const double S = std::sqrt(A * A + 4.0 * gamma * z / c);
    const double dS = (A * dA + 2.0 * gamma / c) / S;
    FixedPointSolution s;
    s.method = FixedPointSolution::Method::closed_form;
    if (A > 0.0) {
        s.tau1 = (A + S) / (2.0 * z);
        s.dtau1 = (dA + dS) / (2.0 * z) - s.tau1 / z;
    } else {
        // rationalized form avoids cancellation in A + S
        const double g = 2.0 * gamma / c;
        s.tau1 = g / (S - A);
        s.dtau1 = -g * (dS - dA) / ((S - A) * (S - A));
    }
    s.tau2 = s.tau1;
    s.dtau2 = s.dtau1;
    return s;
}

StieltjesPoint solve_stieltjes(double theta1, double theta2, double mu_ell, double mu_tail, double psi, cplx z,
                               const IterationOptions& opt) {
    if (!(theta1 > 0.0 && theta2 > 0.0)) throw ValidationError("theta1 and theta2 must be positive");
    if (!(mu_tail > 0.0)) throw ValidationError("activation tail must be positive");
    const double th = theta1 + theta2;
    const PairResult r =
        solve_pair(theta1 / th, theta2 / th, mu_tail * mu_tail, mu_ell * mu_ell, psi, z, opt);
    StieltjesPoint p;
    p.z = z;
    p.m1 = r.m1;
    p.m2 = r.m2;
    p.iterations = r.iterations;
    p.residual = r.residual;
    return p;
}

std::vector<double> singular_value_density(const DensityParams& prm, const std::vector<double>& grid, double eta) {
    if (!(eta >= 1e-4 && eta <= 1e-2)) throw ValidationError("smoothing eta must lie in [1e-4, 1e-2]");
    if (!std::is_sorted(grid.begin(), grid.end())) throw ValidationError("density grid must be sorted");
    const double th = prm.theta1 + prm.theta2;
    const double scale = std::sqrt(th / prm.theta1);
    const double half_mass = std::min(prm.theta1, prm.theta2) / th;
    // the |n - p| zero eigenvalues form an atom w0 / (0 - z) that is removed exactly
    const double atom = std::abs(prm.theta1 - prm.theta2) / th;
    std::vector<double> out(grid.size());
    for (size_t i = 0; i < grid.size(); ++i) {
        const cplx z(grid[i] / scale, eta);
        const StieltjesPoint p = solve_stieltjes(prm.theta1, prm.theta2, prm.mu_ell, prm.mu_tail, prm.psi, z);
        const double rho = (p.m1 + p.m2 + atom / z).imag() / M_PI;
        out[i] = rho / half_mass / scale;
    }
    return out;
}

}  // namespace rfrr
