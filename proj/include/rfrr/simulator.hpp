#pragma once

#include "rfrr/spectral_decomposition.hpp"
#include "rfrr/theory.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace rfrr {

// One finite-size ridge problem; coefficients are those at dimension d.
struct SimProblem {
    int d = 0;
    long n = 0;
    long p = 0;
    double lambda = 1.0;
    double noise_var = 0.0;
    ActivationModel activation;
    TargetModel target;
    NormConvention norm_convention = NormConvention::per_n;
};

struct Dataset {
    Eigen::MatrixXd X;     // n x d, rows on the sphere of radius sqrt(d)
    Eigen::MatrixXd W;     // p x d, unit rows
    Eigen::VectorXd beta;  // unit target direction
    Eigen::VectorXd eps;
    Eigen::VectorXd y;
    std::uint64_t seed = 0;
};

Dataset draw_dataset(const SimProblem& prob, std::uint64_t seed);

// Z_ij = sigma(<x_i, w_j>) / sqrt(p)
Eigen::MatrixXd build_features(const Eigen::MatrixXd& X, const Eigen::MatrixXd& W, const ActivationModel& act);

struct RidgeFit {
    Eigen::VectorXd a;
    bool dual = false;
    double trace_inv_n = 0.0;  // Tr (Z Z^T + lambda I_n)^{-1}
    double rcond = 0.0;
    Eigen::VectorXd gram_eigenvalues;  // filled on request: eigenvalues of the smaller Gram matrix
};

// Ridge solution by pivoted LDL^T with one refinement step; dual form when n < p.
RidgeFit fit_rfrr(const Eigen::MatrixXd& Z, const Eigen::VectorXd& y, double lambda, bool want_spectrum = false);

// Population test error of the fitted model computed through the addition theorem.
double exact_test_error(const Eigen::VectorXd& a, const Eigen::MatrixXd& W, const Eigen::VectorXd& beta,
                        const ActivationModel& act, const TargetModel& target);

struct EmpiricalResult {
    double test_error = 0.0;
    double train_error = 0.0;
    double norm_stat = 0.0;
    double gcv_stat = 0.0;  // ((lambda/n) Tr(ZZ^T + lambda I)^{-1})^2
    double rcond = 0.0;
    std::string warning;
    Eigen::VectorXd singular_values;
};

EmpiricalResult empirical_stats(const Eigen::MatrixXd& Z, const Eigen::VectorXd& y, const RidgeFit& fit,
                                double lambda, NormConvention c);

// Tr(ZZ^T + lambda I)^{-1} - Tr(Z^T Z + lambda I)^{-1} - (n - p)/lambda, relative to the traces.
double trace_identity_gap(const Eigen::MatrixXd& Z, double lambda);

// Random-feature trial on a drawn dataset.
EmpiricalResult rf_trial(const SimProblem& prob, std::uint64_t seed, bool want_spectrum = false);

// Kernel ridge regression with the limiting kernel; norm statistic u^T K u / n.
EmpiricalResult krr_trial(const SimProblem& prob, std::uint64_t seed);

enum class GaussianSampler { dense, compressed };

struct GaussianOptions {
    int truncation = -1;                 // K; -1 picks max degree + 2 (polynomials)
    GaussianSampler sampler = GaussianSampler::compressed;
    double memory_budget_bytes = 2e9;    // dense sampler only
};

// Gaussian covariate model with matched second moments.
EmpiricalResult gaussian_equiv_trial(const SimProblem& prob, std::uint64_t seed, const GaussianOptions& opt = {},
                                     bool want_spectrum = false);

enum class Model { rf, krr, gaussian };

const char* to_string(Model m);

struct Summary {
    double mean = 0.0;
    double stderr_ = 0.0;  // zero when trials == 1
    double std = 0.0;
};

struct TrialAggregate {
    int trials = 0;
    std::uint64_t base_seed = 0;
    Summary test, train, norm, gcv;
    std::vector<EmpiricalResult> records;
};

Summary summarize(const std::vector<double>& v);

// Trial t uses seed base_seed + t; results are reduced in trial order.
TrialAggregate run_trials(const SimProblem& prob, Model model, int trials, std::uint64_t base_seed,
                          int threads = 1, const GaussianOptions& gopt = {}, bool want_spectrum = false);

}  // namespace rfrr
