#pragma once

#include "rfrr/special_functions.hpp"

#include <functional>
#include <string>
#include <utility>
#include <vector>

namespace rfrr {

// A scalar function of the projection <x, w> (activation) or <x, beta> (target).
struct FunctionSpec {
    enum class Kind { gegenbauer, monomial, named, callable };

    Kind kind = Kind::monomial;
    std::vector<std::pair<int, double>> terms;  // (k, coefficient of q_k^{(d)})
    std::vector<double> monomial;               // c0 + c1 x + c2 x^2 + ...
    std::string name;                           // named kind: "relu" or "shifted_relu"
    double shift = 0.0;
    std::function<double(double)> fn;
    std::vector<double> breakpoints;  // kinks, used by adaptive quadrature

    static FunctionSpec gegenbauer_series(std::vector<std::pair<int, double>> terms);
    static FunctionSpec monomials(std::vector<double> coeffs);
    static FunctionSpec relu(double shift = 0.0);
    static FunctionSpec function(std::function<double(double)> f,
                                 std::vector<double> breakpoints = {});

    bool is_polynomial() const { return kind == Kind::gegenbauer || kind == Kind::monomial; }
    // Highest degree for polynomial kinds, -1 otherwise.
    int degree() const;
    // Gegenbauer kinds need the basis of the dimension they are defined at.
    double eval(double x, const GegenbauerBasis* basis = nullptr) const;
    std::string describe() const;
};

enum class Convention { finite_d, hermite_limit };

const char* to_string(Convention c);

// Coefficients of a function in both orthonormal systems.
struct Decomposition {
    FunctionSpec spec;
    int d = 0;
    int max_degree = 0;
    std::vector<double> gegenbauer;  // coefficients at dimension d, 0..max_degree
    std::vector<double> hermite;     // Gaussian coefficients, 0..max_degree
    double norm2_sphere = 0.0;       // ||f||^2 under the sphere marginal
    double norm2_gauss = 0.0;        // ||f||^2 under N(0,1)

    const std::vector<double>& coeffs(Convention c) const {
        return c == Convention::finite_d ? gegenbauer : hermite;
    }
    double coeff(int k, Convention c) const;
    double norm2(Convention c) const { return c == Convention::finite_d ? norm2_sphere : norm2_gauss; }
    // ||P_{>k} f||^2, clamped at zero.
    double tail_above(int k, Convention c) const;
};

using ActivationModel = Decomposition;
using TargetModel = Decomposition;

// Gaussian coefficients mu_0..mu_K; tail receives E[f(G)^2] - sum mu_k^2.
std::vector<double> hermite_coeffs(const FunctionSpec& f, int K, double* tail = nullptr);

// Sphere-marginal coefficients at dimension d.
std::vector<double> gegenbauer_coeffs(const FunctionSpec& f, int d, int K);

// Expansion up to at least min_degree. Polynomials are expanded exactly; other
// functions are extended until the tail falls under 1e-8 of the norm (cap 16).
Decomposition decompose(const FunctionSpec& f, int d, int min_degree = 0);

struct ActivationScalars {
    double mu_ell;         // level coefficient
    double mu_tail2;       // squared tail above the level
    double zeta;           // mu_ell / sqrt(mu_tail2)
    double lambda_bar;     // lambda / mu_tail2
};

ActivationScalars derive_scalars(const ActivationModel& act, int ell, double lambda, Convention c);

struct TargetFrequencies {
    double F_ell = 0.0;                // |b_ell|
    double F_tail2 = 0.0;              // sum_{k > ell} b_k^2
    std::vector<double> above;         // above[k] = ||P_{>k} f||^2, k = 0..max_degree
    double norm2 = 0.0;
};

TargetFrequencies target_frequencies(const TargetModel& t, int ell, Convention c);

}  // namespace rfrr
