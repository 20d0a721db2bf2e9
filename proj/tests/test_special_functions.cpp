#include "rfrr/errors.hpp"
#include "rfrr/special_functions.hpp"

#include <doctest.h>

#include <cmath>

using namespace rfrr;
using doctest::Approx;

TEST_CASE("harmonic subspace dimensions") {
    CHECK(subspace_dim(100, 0) == 1);
    CHECK(subspace_dim(100, 1) == 100);
    CHECK(subspace_dim(6, 2) == 20);
    // reference values from binomial identities
    CHECK(subspace_dim(10, 3) == 210);
    CHECK(subspace_dim(50, 2) == 1274);
    CHECK(subspace_dim(100, 4) == 4416225);
    CHECK(subspace_dim(3, 5) == 11);
    CHECK(subspace_dim_real(100, 4) == Approx(4416225.0));
    CHECK_THROWS_AS(subspace_dim(100000, 16), OverflowError);
}

TEST_CASE("harmonic dimension approaches d^k / k! at rate 1/d") {
    for (int k = 1; k <= 4; ++k) {
        double prev = 1e300;
        for (int d : {1000, 2000, 4000, 8000}) {
            double binom = 1.0;
            for (int i = 0; i < k; ++i) binom *= static_cast<double>(d - i) / (i + 1);
            const double gap = std::abs(subspace_dim_real(d, k) / binom - 1.0);
            CHECK(gap <= prev);
            CHECK(gap * d < 2.0 * k * k + 1.0);
            prev = gap;
        }
    }
}

TEST_CASE("marginal moments") {
    CHECK(tau_d1_moment(100, 2) == Approx(1.0).epsilon(1e-14));
    CHECK(tau_d1_moment(100, 3) == 0.0);
    CHECK(tau_d1_moment(10, 4) == Approx(2.5).epsilon(1e-14));
    CHECK(tau_d1_moment(7, 0) == Approx(1.0));
}

TEST_CASE("marginal density integrates to one") {
    const int d = 9;
    const double r = std::sqrt(d);
    double s = 0.0;
    const int M = 20000;
    for (int i = 0; i < M; ++i) {
        const double x = -r + (i + 0.5) * 2 * r / M;
        s += tau_d1_density(d, x) * 2 * r / M;
    }
    CHECK(s == Approx(1.0).epsilon(1e-6));
}

TEST_CASE("hermite values") {
    CHECK(hermite_eval(0, 1.7) == 1.0);
    CHECK(hermite_eval(1, 2.0) == Approx(2.0));
    CHECK(hermite_eval(2, 1.0) == Approx(0.0).scale(1.0));
    CHECK(hermite_eval(3, 0.0) == Approx(0.0).scale(1.0));
    CHECK(hermite_eval(3, 1.3) == Approx((1.3 * 1.3 * 1.3 - 3 * 1.3) / std::sqrt(6.0)));
    CHECK(hermite_eval(2, 0.4) == Approx((0.16 - 1.0) / std::sqrt(2.0)));
}

TEST_CASE("hermite orthonormality under the gaussian rule") {
    const Quadrature q = gauss_hermite(64);
    double worst = 0.0;
    std::vector<double> v(9);
    for (int a = 0; a <= 8; ++a)
        for (int b = 0; b <= 8; ++b) {
            double s = 0.0;
            for (size_t i = 0; i < q.nodes.size(); ++i) {
                hermite_all(8, q.nodes[i], v.data());
                s += q.weights[i] * v[a] * v[b];
            }
            worst = std::max(worst, std::abs(s - (a == b ? 1.0 : 0.0)));
        }
    CHECK(worst < 1e-11);
}

TEST_CASE("gegenbauer reference values") {
    // independent evaluation through classical ultraspherical polynomials
    CHECK(GegenbauerBasis(7, 5).eval(3, 0.8) == Approx(-0.9627687962860246).epsilon(1e-12));
    CHECK(GegenbauerBasis(50, 5).eval(2, 1.3) == Approx(0.5026176377684317).epsilon(1e-12));
    CHECK(GegenbauerBasis(20, 5).eval(5, -2.1) == Approx(1.8057474666435314).epsilon(1e-12));
}

TEST_CASE("low degree gegenbauer polynomials") {
    for (int d : {3, 10, 57}) {
        const GegenbauerBasis b(d, 4);
        CHECK(b.eval(0, 0.3) == 1.0);
        CHECK(b.eval(1, 0.7) == Approx(0.7).epsilon(1e-15));
        CHECK(b.eval(2, 0.0) == Approx(-std::sqrt((d + 2.0) / (d - 1.0)) / std::sqrt(2.0)).epsilon(1e-13));
    }
    CHECK_THROWS_AS(GegenbauerBasis(10, 3).eval(4, 0.1), ValidationError);
}

TEST_CASE("gegenbauer orthonormality and endpoint identity") {
    for (int d : {6, 10, 30, 100}) {
        const GegenbauerBasis b(d, 8);
        const Quadrature q = gauss_sphere_marginal(d, 64);
        std::vector<double> v(9);
        double worst = 0.0;
        for (int j = 0; j <= 8; ++j)
            for (int k = 0; k <= 8; ++k) {
                double s = 0.0;
                for (size_t i = 0; i < q.nodes.size(); ++i) {
                    b.eval_all(q.nodes[i], v.data());
                    s += q.weights[i] * v[j] * v[k];
                }
                worst = std::max(worst, std::abs(s - (j == k ? 1.0 : 0.0)));
            }
        CHECK(worst < 1e-10);
        for (int k = 0; k <= 8; ++k) {
            const double end = b.eval(k, std::sqrt(static_cast<double>(d)));
            CHECK(std::abs(end / std::sqrt(subspace_dim_real(d, k)) - 1.0) < 1e-10);
            std::vector<double> w(k + 1, 0.0);
            w[k] = 1.0;
            CHECK(b.normalized_series(w, 1.0) == Approx(1.0).epsilon(1e-12));
        }
    }
}

TEST_CASE("gegenbauer polynomials approach hermite polynomials") {
    const GegenbauerBasis b(10000, 4);
    double worst = 0.0;
    for (int k = 0; k <= 4; ++k)
        for (double x = -3.0; x <= 3.0; x += 0.05) worst = std::max(worst, std::abs(b.eval(k, x) - hermite_eval(k, x)));
    CHECK(worst < 0.05);
}

TEST_CASE("sphere sampling") {
    const auto one = sample_sphere(3, 1.0, 1, 11);
    CHECK(one.row(0).norm() == Approx(1.0).epsilon(1e-14));
    const auto a = sample_sphere(12, std::sqrt(12.0), 100000, 5);
    const auto b = sample_sphere(12, std::sqrt(12.0), 100000, 5);
    CHECK((a - b).cwiseAbs().maxCoeff() == 0.0);
    const Eigen::ArrayXd x2 = a.col(0).array().square();
    const double mean = x2.mean();
    const double se = std::sqrt((x2 - mean).square().sum() / (x2.size() - 1) / x2.size());
    CHECK(std::abs(mean - 1.0) < 3.0 * se);
}

TEST_CASE("addition theorem") {
    Eigen::VectorXd w = Eigen::VectorXd::Zero(8), w2 = Eigen::VectorXd::Zero(8);
    w(0) = 1.0;
    w2(0) = 0.6;
    w2(1) = 0.8;
    const AdditionCheck same = addition_theorem_check(8, 2, w, w, 1000, 3);
    CHECK(same.rhs == Approx(1.0).epsilon(1e-12));
    const AdditionCheck zero = addition_theorem_check(8, 0, w, w2, 1000, 3);
    CHECK(zero.lhs == Approx(1.0));
    CHECK(zero.rhs == Approx(1.0));
    const AdditionCheck c = addition_theorem_check(8, 2, w, w2, 200000, 9);
    CHECK(std::abs(c.lhs - c.rhs) < 3.0 * c.lhs_stderr);
}
