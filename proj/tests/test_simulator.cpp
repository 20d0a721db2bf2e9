#include "rfrr/errors.hpp"
#include "rfrr/simulator.hpp"

#include <doctest.h>

#include <cmath>

using namespace rfrr;
using doctest::Approx;

namespace {

SimProblem problem(int d, long n, long p, FunctionSpec act, FunctionSpec target, double lambda = 0.1,
                   double noise = 0.1) {
    SimProblem prob;
    prob.d = d;
    prob.n = n;
    prob.p = p;
    prob.lambda = lambda;
    prob.noise_var = noise;
    const int K = std::max(act.degree(), target.degree());
    prob.activation = decompose(act, d, std::max(K, 0));
    prob.target = decompose(target, d, std::max(K, 0));
    return prob;
}

// Fresh-sample estimate of E (f(x) - fhat(x))^2 with its standard error.
std::pair<double, double> monte_carlo_error(const SimProblem& prob, const Dataset& ds, const Eigen::VectorXd& a,
                                            long M, std::uint64_t seed) {
    const GegenbauerBasis basis(prob.d, std::max(prob.target.max_degree, 1));
    double s1 = 0.0, s2 = 0.0;
    const long block = 50000;
    for (long start = 0; start < M; start += block) {
        const long m = std::min(block, M - start);
        const Eigen::MatrixXd X = sample_sphere(prob.d, std::sqrt(static_cast<double>(prob.d)), m, seed + start);
        const Eigen::VectorXd pred = build_features(X, ds.W, prob.activation) * a;
        const Eigen::VectorXd proj = X * ds.beta;
        for (long i = 0; i < m; ++i) {
            const double e = prob.target.spec.eval(proj(i), &basis) - pred(i);
            s1 += e * e;
            s2 += e * e * e * e;
        }
    }
    const double mean = s1 / M;
    return {mean, std::sqrt(std::max(0.0, s2 / M - mean * mean) / M)};
}

}  // namespace

TEST_CASE("datasets are deterministic and normalized") {
    const SimProblem prob = problem(9, 30, 20, FunctionSpec::monomials({0, 1, 1}), FunctionSpec::monomials({0, 1}));
    const Dataset a = draw_dataset(prob, 42), b = draw_dataset(prob, 42), c = draw_dataset(prob, 43);
    CHECK((a.X - b.X).cwiseAbs().maxCoeff() == 0.0);
    CHECK((a.y - b.y).cwiseAbs().maxCoeff() == 0.0);
    CHECK((a.X - c.X).cwiseAbs().maxCoeff() > 0.0);
    CHECK(a.beta.norm() == Approx(1.0).epsilon(1e-12));
    CHECK(a.X.rowwise().norm().maxCoeff() == Approx(3.0).epsilon(1e-12));
    CHECK(a.W.rowwise().norm().minCoeff() == Approx(1.0).epsilon(1e-12));
}

TEST_CASE("ridge solution in primal and dual form") {
    for (auto [n, p] : {std::pair<long, long>{40, 70}, std::pair<long, long>{70, 40}}) {
        const SimProblem prob = problem(7, n, p, FunctionSpec::monomials({0.1, 1, 0.5}), FunctionSpec::monomials({0, 1, 1}));
        const Dataset ds = draw_dataset(prob, 3);
        const Eigen::MatrixXd Z = build_features(ds.X, ds.W, prob.activation);
        const RidgeFit fit = fit_rfrr(Z, ds.y, 0.05);
        CHECK(fit.dual == (n < p));
        Eigen::MatrixXd A = Z.transpose() * Z;
        A.diagonal().array() += 0.05;
        const Eigen::VectorXd direct = A.ldlt().solve(Z.transpose() * ds.y);
        CHECK((fit.a - direct).norm() / direct.norm() < 1e-10);
        Eigen::MatrixXd B = Z * Z.transpose();
        B.diagonal().array() += 0.05;
        CHECK(fit.trace_inv_n == Approx(B.inverse().trace()).epsilon(1e-10));
    }
}

TEST_CASE("feature scaling") {
    const SimProblem prob = problem(5, 4, 6, FunctionSpec::monomials({0, 0, 1}), FunctionSpec::monomials({0, 1}));
    const Dataset ds = draw_dataset(prob, 1);
    const Eigen::MatrixXd Z = build_features(ds.X, ds.W, prob.activation);
    const double t = ds.X.row(2).dot(ds.W.row(3));
    CHECK(Z(2, 3) == Approx(t * t / std::sqrt(6.0)).epsilon(1e-13));
}

TEST_CASE("trace identity") {
    const SimProblem prob = problem(6, 50, 80, FunctionSpec::monomials({0, 1, 1}), FunctionSpec::monomials({0, 1}));
    const Dataset ds = draw_dataset(prob, 8);
    const Eigen::MatrixXd Z = build_features(ds.X, ds.W, prob.activation);
    CHECK(trace_identity_gap(Z, 0.3) < 1e-8);
    CHECK(trace_identity_gap(Z.transpose(), 0.3) < 1e-8);
}

TEST_CASE("closed form test error matches fresh samples") {
    struct Case {
        int d;
        long n, p;
        FunctionSpec act, target;
    };
    const Case cases[] = {
        {6, 40, 30, FunctionSpec::monomials({0.2, 1.0, 0.5}), FunctionSpec::monomials({0, 1.0, 0, 0.3})},
        {10, 60, 90, FunctionSpec::gegenbauer_series({{1, 0.5}, {2, 1.0}, {3, 0.4}}),
         FunctionSpec::gegenbauer_series({{0, 0.3}, {2, 1.0}})},
        {20, 100, 50, FunctionSpec::monomials({0, 1.5, 3, 2}), FunctionSpec::monomials({0, 0.5, 1.5, 1})},
    };
    std::uint64_t seed = 100;
    for (const Case& c : cases) {
        const SimProblem prob = problem(c.d, c.n, c.p, c.act, c.target, 0.05, 0.2);
        const Dataset ds = draw_dataset(prob, seed);
        const Eigen::MatrixXd Z = build_features(ds.X, ds.W, prob.activation);
        const RidgeFit fit = fit_rfrr(Z, ds.y, prob.lambda);
        const double closed = exact_test_error(fit.a, ds.W, ds.beta, prob.activation, prob.target);
        const auto [mc, se] = monte_carlo_error(prob, ds, fit.a, 200000, seed + 1000);
        CHECK(std::abs(closed - mc) < 3.0 * se);
        seed += 7;
    }
}

TEST_CASE("empirical statistics") {
    const SimProblem prob = problem(8, 30, 50, FunctionSpec::monomials({0, 1, 1}), FunctionSpec::monomials({0, 1}));
    const Dataset ds = draw_dataset(prob, 4);
    const Eigen::MatrixXd Z = build_features(ds.X, ds.W, prob.activation);
    const RidgeFit fit = fit_rfrr(Z, ds.y, 0.2, true);
    const EmpiricalResult r = empirical_stats(Z, ds.y, fit, 0.2, NormConvention::per_n);
    CHECK(r.train_error == Approx((ds.y - Z * fit.a).squaredNorm() / 30).epsilon(1e-14));
    CHECK(r.norm_stat == Approx(fit.a.squaredNorm() / 30).epsilon(1e-14));
    // GCV factor equals the squared mean of lambda / (eigenvalue + lambda)
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Z * Z.transpose());
    const double g = (0.2 / (es.eigenvalues().array() + 0.2)).mean();
    CHECK(r.gcv_stat == Approx(g * g).epsilon(1e-10));
    CHECK(r.singular_values.size() == 30);
    CHECK(r.singular_values.maxCoeff() == Approx(std::sqrt(es.eigenvalues().maxCoeff())).epsilon(1e-10));
}

TEST_CASE("trials are reproducible and independent of the thread count") {
    const SimProblem prob = problem(8, 40, 30, FunctionSpec::monomials({0, 1, 1}), FunctionSpec::monomials({0, 1, 1}));
    const TrialAggregate a = run_trials(prob, Model::rf, 5, 11, 1);
    const TrialAggregate b = run_trials(prob, Model::rf, 5, 11, 3);
    CHECK(a.test.mean == b.test.mean);
    CHECK(a.train.mean == b.train.mean);
    CHECK(a.gcv.stderr_ == b.gcv.stderr_);
    const EmpiricalResult single = rf_trial(prob, 13);
    CHECK(single.test_error == a.records[2].test_error);
}

TEST_CASE("summary statistics") {
    const Summary s = summarize({1.0, 2.0, 3.0, 4.0});
    CHECK(s.mean == Approx(2.5));
    CHECK(s.std == Approx(std::sqrt(5.0 / 3.0)));
    CHECK(s.stderr_ == Approx(std::sqrt(5.0 / 3.0) / 2.0));
    CHECK(summarize({2.0}).stderr_ == 0.0);
}

TEST_CASE("kernel ridge trial") {
    const SimProblem prob = problem(10, 80, 1, FunctionSpec::gegenbauer_series({{1, 0.5}, {2, 0.7}, {3, 0.3}}),
                                    FunctionSpec::gegenbauer_series({{1, 1.0}}), 0.01, 0.0);
    const EmpiricalResult r = krr_trial(prob, 5);
    CHECK(std::isfinite(r.test_error));
    CHECK(r.test_error >= 0.0);
    CHECK(r.norm_stat > 0.0);
    // with many features the random feature fit approaches the kernel fit
    SimProblem wide = prob;
    wide.p = 20000;
    const EmpiricalResult rf = rf_trial(wide, 5);
    CHECK(rf.test_error == Approx(r.test_error).epsilon(0.1));
    CHECK(rf.train_error == Approx(r.train_error).epsilon(0.1));
}

TEST_CASE("gaussian samplers agree in distribution") {
    const SimProblem prob = problem(10, 60, 40, FunctionSpec::gegenbauer_series({{1, 0.6}, {2, 0.8}, {3, 0.4}}),
                                    FunctionSpec::gegenbauer_series({{1, 0.5}, {2, 1.0}}), 0.05, 0.1);
    GaussianOptions dense, compressed;
    dense.sampler = GaussianSampler::dense;
    compressed.sampler = GaussianSampler::compressed;
    const TrialAggregate a = run_trials(prob, Model::gaussian, 60, 1, 1, dense);
    const TrialAggregate b = run_trials(prob, Model::gaussian, 60, 500, 1, compressed);
    const double se = std::hypot(a.test.stderr_, b.test.stderr_);
    CHECK(std::abs(a.test.mean - b.test.mean) < 4.0 * se);
    const double se_tr = std::hypot(a.train.stderr_, b.train.stderr_);
    CHECK(std::abs(a.train.mean - b.train.mean) < 4.0 * se_tr);
}

TEST_CASE("dense gaussian sampler refuses oversized problems") {
    SimProblem prob = problem(60, 200000, 200000, FunctionSpec::monomials({0, 1, 1}), FunctionSpec::monomials({0, 1}));
    GaussianOptions dense;
    dense.sampler = GaussianSampler::dense;
    CHECK_THROWS_AS(gaussian_equiv_trial(prob, 1, dense), ValidationError);
}

TEST_CASE("invalid problems are rejected") {
    SimProblem prob = problem(8, 10, 10, FunctionSpec::monomials({0, 1, 1}), FunctionSpec::monomials({0, 1}));
    prob.p = 0;
    CHECK_THROWS_AS(run_trials(prob, Model::rf, 2, 0), ValidationError);
    prob.p = 10;
    prob.d = 9;
    CHECK_THROWS_AS(rf_trial(prob, 0), ValidationError);
}
