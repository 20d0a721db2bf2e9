#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <random>
#include <vector>

namespace rfrr {

constexpr int kMaxDegree = 16;

using Rng = std::mt19937_64;

// Dimension of degree-k spherical harmonics on S^{d-1}. Throws OverflowError
// when the value does not fit in 64 bits.
std::uint64_t subspace_dim(int d, int k);

// Same quantity in floating point; finite wherever a double can hold it.
double subspace_dim_real(int d, int k);

// Moments of the one-dimensional marginal of Unif(S^{d-1}(sqrt d)).
double tau_d1_moment(int d, int m);

// Density of that marginal on [-sqrt d, sqrt d].
double tau_d1_density(int d, double x);

// Orthonormal (probabilists') Hermite polynomial.
double hermite_eval(int k, double x);
void hermite_all(int max_degree, double x, double* out);

// Gegenbauer polynomials orthonormal under the sphere marginal at dimension d.
class GegenbauerBasis {
public:
    GegenbauerBasis(int d, int max_degree);

    int dim() const { return d_; }
    int max_degree() const { return K_; }

    double eval(int k, double x) const;
    // out[0..max_degree]
    void eval_all(double x, double* out) const;
    // sum_k c[k] q_k(x) for k < c.size()
    double series(const std::vector<double>& c, double x) const;
    // sum_k w[k] P_k(t) with P_k = q_k(sqrt(d) t) / sqrt(N_k), so P_k(1) = 1
    double normalized_series(const std::vector<double>& w, double t) const;

    double sqrt_dim(int k) const { return sqrtN_[k]; }
    double dim_k(int k) const { return sqrtN_[k] * sqrtN_[k]; }

private:
    int d_;
    int K_;
    double inv_sqrt_d_;
    // normalized recurrence P_k(t) = A_k t P_{k-1} - B_k P_{k-2}, P_k(1) = 1
    std::vector<double> A_, B_;
    std::vector<double> sqrtN_;
};

struct Quadrature {
    std::vector<double> nodes;
    std::vector<double> weights;  // sum to one
};

// Gauss rule for the sphere marginal at dimension d.
Quadrature gauss_sphere_marginal(int d, int nodes = 256);
// Gauss rule for the standard Gaussian.
Quadrature gauss_hermite(int nodes = 256);

// Rows i.i.d. uniform on S^{d-1}(radius).
Eigen::MatrixXd sample_sphere(int d, double radius, Eigen::Index count, std::uint64_t seed);
Eigen::MatrixXd sample_sphere(int d, double radius, Eigen::Index count, Rng& rng);

struct AdditionCheck {
    double lhs;
    double lhs_stderr;
    double rhs;
};

AdditionCheck addition_theorem_check(int d, int k, const Eigen::VectorXd& w,
                                     const Eigen::VectorXd& w2, long samples,
                                     std::uint64_t seed);

}  // namespace rfrr
