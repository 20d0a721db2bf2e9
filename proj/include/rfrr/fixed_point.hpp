#pragma once

#include <complex>
#include <vector>

namespace rfrr {

using cplx = std::complex<double>;

struct FixedPointSolution {
    enum class Method { nu_iteration, newton, closed_form };

    double tau1 = 0.0;
    double tau2 = 0.0;
    double dtau1 = 0.0;  // derivatives in the normalized ridge
    double dtau2 = 0.0;
    double residual1 = 0.0;  // scaled by the magnitude of the equation's terms
    double residual2 = 0.0;
    long iterations = 0;
    Method method = Method::nu_iteration;
};

const char* to_string(FixedPointSolution::Method m);

struct IterationOptions {
    double damping = 0.5;
    long max_iterations = 100000;
    double tolerance = 1e-13;
    double start_scale = 1e3;   // continuation starts at this multiple of the target
    int steps_per_decade = 4;
};

struct NuSolution {
    cplx nu1, nu2;
    double residual = 0.0;
    long iterations = 0;
};

// Pair (nu1, nu2) of the resolvent fixed point, continued from large Im z.
NuSolution solve_nu(double theta1, double theta2, double zeta, double psi, cplx z,
                    const IterationOptions& opt = {});

// Closed form of the nu pair when psi = 0.
NuSolution nu_closed_form(double theta1, double theta2, double zeta, cplx z);

// Residuals of the two cubic equations at real z, scaled by their term magnitudes.
void tau_residuals(double psi1, double psi2, double zeta, double z, double tau1, double tau2,
                   double& r1, double& r2);

struct TauPaths {
    FixedPointSolution nu_path;
    FixedPointSolution newton_path;
    double relative_gap = 0.0;
};

// Both solution paths of the at-level critical fixed point with derivatives.
// zeta2_newton_sign is a test hook that corrupts the Newton path.
TauPaths solve_tau_paths(double psi1, double psi2, double zeta, double lambda_bar,
                         double zeta2_newton_sign = 1.0);

// Certified solution: throws NumericalError when the paths disagree by more than 1e-8.
FixedPointSolution solve_tau(double psi1, double psi2, double zeta, double lambda_bar);

// Newton iteration on the cubic system from a seed.
FixedPointSolution solve_tau_newton(double psi1, double psi2, double zeta, double lambda_bar,
                                    double tau1_seed, double tau2_seed, double zeta2_sign = 1.0);

// Below-level closed form (tau1 = tau2) with its analytic derivative.
FixedPointSolution tau_closed_form(double gamma, double zeta, double lambda_bar);

// Implicit derivatives of a solved pair; fills dtau1, dtau2.
void tau_derivatives(FixedPointSolution& sol, double psi1, double psi2, double zeta, double lambda_bar);

struct StieltjesPoint {
    cplx z;
    cplx m1, m2;
    long iterations = 0;
    double residual = 0.0;
};

// Partial Stieltjes transforms of the symmetric block feature matrix.
StieltjesPoint solve_stieltjes(double theta1, double theta2, double mu_ell, double mu_tail, double psi,
                               cplx z, const IterationOptions& opt = {});

struct DensityParams {
    double theta1 = 1.0;    // feature proportion weight
    double theta2 = 1.0;    // sample proportion weight
    double mu_ell = 1.0;
    double mu_tail = 1.0;   // square root of the squared tail
    double psi = 0.0;       // psi1 + psi2
};

// Density of the singular values of Z = sqrt(theta/theta1) * Ztilde on the grid,
// normalized to unit mass over the nonzero singular values.
std::vector<double> singular_value_density(const DensityParams& params, const std::vector<double>& grid,
                                           double eta);

}  // namespace rfrr
