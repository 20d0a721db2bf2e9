#include "rfrr/special_functions.hpp"

#include "rfrr/errors.hpp"

#include <cmath>
#include <limits>
#include <string>

namespace rfrr {

namespace {

using u128 = unsigned __int128;

bool binomial_checked(u128 n, u128 r, u128& out) {
    if (r > n) {
        out = 0;
        return true;
    }
    if (r > n - r) r = n - r;
    u128 c = 1;
    for (u128 i = 1; i <= r; ++i) {
        u128 t;
        if (__builtin_mul_overflow(c, n - r + i, &t)) return false;
        c = t / i;
    }
    out = c;
    return true;
}

void check_dim(int d) {
    if (d < 2) throw ValidationError("dimension d must be >= 2, got " + std::to_string(d));
}

Quadrature golub_welsch(const Eigen::VectorXd& offdiag, int n) {
    Eigen::VectorXd diag = Eigen::VectorXd::Zero(n);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es;
    es.computeFromTridiagonal(diag, offdiag, Eigen::ComputeEigenvectors);
    if (es.info() != Eigen::Success) throw NumericalError("Golub-Welsch eigensolver failed");
    Quadrature q;
    q.nodes.resize(n);
    q.weights.resize(n);
    double total = 0.0;
    for (int i = 0; i < n; ++i) {
        q.nodes[i] = es.eigenvalues()(i);
        const double v = es.eigenvectors()(0, i);
        q.weights[i] = v * v;
        total += q.weights[i];
    }
    for (double& w : q.weights) w /= total;
    return q;
}

}  // namespace

std::uint64_t subspace_dim(int d, int k) {
    check_dim(d);
    if (k < 0) throw ValidationError("degree must be >= 0");
    if (k == 0) return 1;
    if (k == 1) return static_cast<std::uint64_t>(d);
    // N_k = C(d+k-1, k) - C(d+k-3, k-2)
    u128 a, b;
    if (!binomial_checked(static_cast<u128>(d + k - 1), static_cast<u128>(k), a) ||
        !binomial_checked(static_cast<u128>(d + k - 3), static_cast<u128>(k - 2), b))
        throw OverflowError("N_k overflows 128-bit arithmetic at d=" + std::to_string(d) +
                            ", k=" + std::to_string(k));
    const u128 n = a - b;
    if (n > static_cast<u128>(std::numeric_limits<std::uint64_t>::max()))
        throw OverflowError("N_k exceeds 64-bit range at d=" + std::to_string(d) +
                            ", k=" + std::to_string(k));
    return static_cast<std::uint64_t>(n);
}

double subspace_dim_real(int d, int k) {
    check_dim(d);
    if (k < 0) throw ValidationError("degree must be >= 0");
    if (k == 0) return 1.0;
    if (k == 1) return d;
    double c = 1.0;
    for (int i = 1; i <= k - 1; ++i) c *= static_cast<double>(d - 2 + i) / i;
    return c * static_cast<double>(d + 2 * k - 2) / k;
}

double tau_d1_moment(int d, int m) {
    check_dim(d);
    if (m < 0) throw ValidationError("moment order must be >= 0");
    if (m % 2 == 1) return 0.0;
    double r = 1.0;
    for (int i = 0; i < m / 2; ++i) r *= (2.0 * i + 1.0) / (1.0 + 2.0 * i / d);
    return r;
}

double tau_d1_density(int d, double x) {
    check_dim(d);
    const double s = 1.0 - x * x / d;
    if (s <= 0.0) return 0.0;
    const double a = 0.5 * (d - 3);
    // normalizer sqrt(d) * B(1/2, (d-1)/2)
    const double log_norm = 0.5 * std::log(static_cast<double>(d)) + std::lgamma(0.5) +
                            std::lgamma(0.5 * (d - 1)) - std::lgamma(0.5 * d);
    return std::exp(a * std::log(s) - log_norm);
}

double hermite_eval(int k, double x) {
    if (k < 0) throw ValidationError("degree must be >= 0");
    if (k == 0) return 1.0;
    double h0 = 1.0, h1 = x;
    for (int j = 2; j <= k; ++j) {
        const double h2 = (x * h1 - std::sqrt(j - 1.0) * h0) / std::sqrt(static_cast<double>(j));
        h0 = h1;
        h1 = h2;
    }
    return h1;
}

void hermite_all(int max_degree, double x, double* out) {
    out[0] = 1.0;
    if (max_degree >= 1) out[1] = x;
    for (int j = 2; j <= max_degree; ++j)
        out[j] = (x * out[j - 1] - std::sqrt(j - 1.0) * out[j - 2]) / std::sqrt(static_cast<double>(j));
}

GegenbauerBasis::GegenbauerBasis(int d, int max_degree)
    : d_(d), K_(max_degree), inv_sqrt_d_(1.0 / std::sqrt(static_cast<double>(d))) {
    check_dim(d);
    if (max_degree < 0 || max_degree > kMaxDegree)
        throw ValidationError("Gegenbauer degree must lie in [0, " + std::to_string(kMaxDegree) +
                              "], got " + std::to_string(max_degree));
    A_.assign(K_ + 1, 0.0);
    B_.assign(K_ + 1, 0.0);
    sqrtN_.resize(K_ + 1);
    for (int k = 2; k <= K_; ++k) {
        const double den = k + d - 3.0;
        A_[k] = (2.0 * k + d - 4.0) / den;
        B_[k] = (k - 1.0) / den;
    }
    for (int k = 0; k <= K_; ++k) sqrtN_[k] = std::sqrt(subspace_dim_real(d, k));
}

double GegenbauerBasis::eval(int k, double x) const {
    if (k < 0 || k > K_)
        throw ValidationError("degree out of range: " + std::to_string(k) + " > " + std::to_string(K_));
    if (k == 0) return 1.0;
    const double t = x * inv_sqrt_d_;
    double p0 = 1.0, p1 = t;
    for (int j = 2; j <= k; ++j) {
        const double p2 = A_[j] * t * p1 - B_[j] * p0;
        p0 = p1;
        p1 = p2;
    }
    return sqrtN_[k] * p1;
}

void GegenbauerBasis::eval_all(double x, double* out) const {
    const double t = x * inv_sqrt_d_;
    double p0 = 1.0, p1 = t;
    out[0] = 1.0;
    if (K_ >= 1) out[1] = x;
    for (int j = 2; j <= K_; ++j) {
        const double p2 = A_[j] * t * p1 - B_[j] * p0;
        p0 = p1;
        p1 = p2;
        out[j] = sqrtN_[j] * p2;
    }
}

double GegenbauerBasis::series(const std::vector<double>& c, double x) const {
    const int top = static_cast<int>(c.size()) - 1;
    if (top > K_) throw ValidationError("series degree exceeds basis degree");
    if (top < 0) return 0.0;
    const double t = x * inv_sqrt_d_;
    double p0 = 1.0, p1 = t;
    double s = c[0];
    if (top >= 1) s += c[1] * x;
    for (int j = 2; j <= top; ++j) {
        const double p2 = A_[j] * t * p1 - B_[j] * p0;
        p0 = p1;
        p1 = p2;
        s += c[j] * sqrtN_[j] * p2;
    }
    return s;
}

double GegenbauerBasis::normalized_series(const std::vector<double>& w, double t) const {
    const int top = static_cast<int>(w.size()) - 1;
    if (top > K_) throw ValidationError("series degree exceeds basis degree");
    if (top < 0) return 0.0;
    double p0 = 1.0, p1 = t;
    double s = w[0];
    if (top >= 1) s += w[1] * t;
    for (int j = 2; j <= top; ++j) {
        const double p2 = A_[j] * t * p1 - B_[j] * p0;
        p0 = p1;
        p1 = p2;
        s += w[j] * p2;
    }
    return s;
}

Quadrature gauss_sphere_marginal(int d, int nodes) {
    check_dim(d);
    if (nodes < 1) throw ValidationError("quadrature needs at least one node");
    // three-term recurrence of the orthonormal family, argument scaled by sqrt(d)
    const double lam = 0.5 * (d - 2);
    Eigen::VectorXd off(std::max(nodes - 1, 0));
    for (int k = 1; k < nodes; ++k) {
        double b2;
        if (d == 2)
            b2 = (k == 1) ? 0.5 : 0.25;
        else
            b2 = k * (k + 2.0 * lam - 1.0) / (4.0 * (k + lam) * (k + lam - 1.0));
        off(k - 1) = std::sqrt(d * b2);
    }
    return golub_welsch(off, nodes);
}

Quadrature gauss_hermite(int nodes) {
    if (nodes < 1) throw ValidationError("quadrature needs at least one node");
    Eigen::VectorXd off(std::max(nodes - 1, 0));
    for (int k = 1; k < nodes; ++k) off(k - 1) = std::sqrt(static_cast<double>(k));
    return golub_welsch(off, nodes);
}

Eigen::MatrixXd sample_sphere(int d, double radius, Eigen::Index count, Rng& rng) {
    check_dim(d);
    if (!(radius > 0.0)) throw ValidationError("sphere radius must be positive");
    std::normal_distribution<double> normal;
    Eigen::MatrixXd X(count, d);
    for (Eigen::Index i = 0; i < count; ++i)
        for (int j = 0; j < d; ++j) X(i, j) = normal(rng);
    for (Eigen::Index i = 0; i < count; ++i) X.row(i) *= radius / X.row(i).norm();
    return X;
}

Eigen::MatrixXd sample_sphere(int d, double radius, Eigen::Index count, std::uint64_t seed) {
    Rng rng(seed);
    return sample_sphere(d, radius, count, rng);
}

AdditionCheck addition_theorem_check(int d, int k, const Eigen::VectorXd& w,
                                     const Eigen::VectorXd& w2, long samples,
                                     std::uint64_t seed) {
    if (w.size() != d || w2.size() != d) throw ValidationError("direction length must equal d");
    if (std::abs(w.norm() - 1.0) > 1e-10 || std::abs(w2.norm() - 1.0) > 1e-10)
        throw ValidationError("directions must be unit vectors");
    if (samples < 2) throw ValidationError("need at least two samples");
    GegenbauerBasis basis(d, k);
    AdditionCheck out;
    out.rhs = basis.eval(k, std::sqrt(static_cast<double>(d)) * w.dot(w2)) / basis.sqrt_dim(k);
    if (k == 0) {
        out.lhs = 1.0;
        out.lhs_stderr = 0.0;
        return out;
    }
    Rng rng(seed);
    const long chunk = 4096;
    double sum = 0.0, sum2 = 0.0;
    for (long done = 0; done < samples; done += chunk) {
        const long m = std::min(chunk, samples - done);
        const Eigen::MatrixXd X = sample_sphere(d, std::sqrt(static_cast<double>(d)), m, rng);
        const Eigen::VectorXd a = X * w, b = X * w2;
        for (long i = 0; i < m; ++i) {
            const double v = basis.eval(k, a(i)) * basis.eval(k, b(i));
            sum += v;
            sum2 += v * v;
        }
    }
    const double n = static_cast<double>(samples);
    out.lhs = sum / n;
    const double var = std::max(sum2 / n - out.lhs * out.lhs, 0.0) * n / (n - 1.0);
    out.lhs_stderr = std::sqrt(var / n);
    return out;
}

}  // namespace rfrr
