#include "rfrr/simulator.hpp"

#include "rfrr/errors.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <sstream>
#include <thread>

namespace rfrr {

namespace {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

void fill_normal(MatrixXd& M, Rng& rng) {
    std::normal_distribution<double> normal;
    for (Index j = 0; j < M.cols(); ++j)
        for (Index i = 0; i < M.rows(); ++i) M(i, j) = normal(rng);
}

VectorXd normal_vector(Index n, Rng& rng, double scale = 1.0) {
    std::normal_distribution<double> normal;
    VectorXd v(n);
    for (Index i = 0; i < n; ++i) v(i) = scale * normal(rng);
    return v;
}

// Applies f elementwise in place.
void apply_function(const Decomposition& f, MatrixXd& M) {
    const FunctionSpec& s = f.spec;
    if (s.kind == FunctionSpec::Kind::gegenbauer) {
        GegenbauerBasis basis(f.d, f.max_degree);
        const std::vector<double>& c = f.gegenbauer;
        M = M.unaryExpr([&](double x) { return basis.series(c, x); });
    } else {
        M = M.unaryExpr([&](double x) { return s.eval(x); });
    }
}

double eval_function(const Decomposition& f, double x) {
    if (f.spec.kind == FunctionSpec::Kind::gegenbauer) {
        GegenbauerBasis basis(f.d, f.max_degree);
        return basis.series(f.gegenbauer, x);
    }
    return f.spec.eval(x);
}

std::vector<double> padded(const std::vector<double>& v, int K) {
    std::vector<double> out(K + 1, 0.0);
    for (int k = 0; k <= K && k < static_cast<int>(v.size()); ++k) out[k] = v[k];
    return out;
}

double sum_sq(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return s;
}

struct SpdSolver {
    MatrixXd A;
    Eigen::LDLT<MatrixXd> ldlt;

    explicit SpdSolver(MatrixXd M) : A(std::move(M)) {
        ldlt.compute(A);
        if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) {
            std::ostringstream os;
            os << "ridge factorization failed (reciprocal condition estimate " << ldlt.rcond() << ")";
            throw NumericalError(os.str());
        }
    }

    VectorXd solve(const VectorXd& b) const {
        VectorXd x = ldlt.solve(b);
        const VectorXd r = b - A.selfadjointView<Eigen::Lower>() * x;
        x += ldlt.solve(r);
        return x;
    }

    // Tr A^{-1} = sum_k (1/D_k) ||row k of L^{-1}||^2 with A = P^T L D L^T P
    double trace_inverse() const {
        const Index n = A.rows();
        MatrixXd Linv = MatrixXd::Identity(n, n);
        ldlt.matrixL().solveInPlace(Linv);
        const VectorXd D = ldlt.vectorD();
        double t = 0.0;
        for (Index k = 0; k < n; ++k) t += Linv.row(k).squaredNorm() / D(k);
        return t;
    }
};

MatrixXd gram(const MatrixXd& Z, bool dual) {
    const Index m = dual ? Z.rows() : Z.cols();
    MatrixXd G = MatrixXd::Zero(m, m);
    if (dual)
        G.selfadjointView<Eigen::Lower>().rankUpdate(Z);
    else
        G.selfadjointView<Eigen::Lower>().rankUpdate(Z.transpose());
    return G;
}

VectorXd lower_eigenvalues(const MatrixXd& G) {
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(G, Eigen::EigenvaluesOnly);
    if (es.info() != Eigen::Success) throw NumericalError("eigenvalue computation failed");
    return es.eigenvalues();
}

void check_problem(const SimProblem& prob) {
    if (prob.d < 2) throw ValidationError("simulation needs d >= 2");
    if (prob.n < 1 || prob.p < 1) throw ValidationError("simulation needs n >= 1 and p >= 1");
    if (!(prob.lambda > 0.0)) throw ValidationError("lambda must be positive");
    if (!(prob.noise_var >= 0.0)) throw ValidationError("noise variance must be non-negative");
    if (prob.activation.d != prob.d || prob.target.d != prob.d)
        throw ValidationError("activation and target must be expanded at the simulation dimension");
}

}  // namespace

const char* to_string(Model m) {
    switch (m) {
        case Model::rf:
            return "rf";
        case Model::krr:
            return "krr";
        default:
            return "gaussian";
    }
}

Dataset draw_dataset(const SimProblem& prob, std::uint64_t seed) {
    check_problem(prob);
    Rng rng(seed);
    Dataset ds;
    ds.seed = seed;
    ds.beta = sample_sphere(prob.d, 1.0, 1, rng).row(0).transpose();
    ds.W = sample_sphere(prob.d, 1.0, prob.p, rng);
    ds.X = sample_sphere(prob.d, std::sqrt(static_cast<double>(prob.d)), prob.n, rng);
    ds.eps = normal_vector(prob.n, rng, std::sqrt(prob.noise_var));
    const VectorXd proj = ds.X * ds.beta;
    ds.y.resize(prob.n);
    for (Index i = 0; i < prob.n; ++i) ds.y(i) = eval_function(prob.target, proj(i)) + ds.eps(i);
    return ds;
}

MatrixXd build_features(const MatrixXd& X, const MatrixXd& W, const ActivationModel& act) {
    if (X.cols() != W.cols()) throw ValidationError("feature and covariate dimensions differ");
    MatrixXd Z = X * W.transpose();
    apply_function(act, Z);
    Z /= std::sqrt(static_cast<double>(W.rows()));
    return Z;
}

RidgeFit fit_rfrr(const MatrixXd& Z, const VectorXd& y, double lambda, bool want_spectrum) {
    if (!(lambda > 0.0)) throw ValidationError("lambda must be positive");
    if (Z.rows() != y.size()) throw ValidationError("response length must equal the number of rows");
    const Index n = Z.rows(), p = Z.cols();
    RidgeFit fit;
    fit.dual = n < p;
    MatrixXd G = gram(Z, fit.dual);
    if (want_spectrum) fit.gram_eigenvalues = lower_eigenvalues(G);
    G.diagonal().array() += lambda;
    SpdSolver solver(std::move(G));
    fit.rcond = solver.ldlt.rcond();
    if (fit.dual) {
        fit.a = Z.transpose() * solver.solve(y);
        fit.trace_inv_n = solver.trace_inverse();
    } else {
        fit.a = solver.solve(Z.transpose() * y);
        fit.trace_inv_n = solver.trace_inverse() + static_cast<double>(n - p) / lambda;
    }
    return fit;
}

double exact_test_error(const VectorXd& a, const MatrixXd& W, const VectorXd& beta, const ActivationModel& act,
                        const TargetModel& target) {
    const int d = static_cast<int>(W.cols());
    const Index p = W.rows();
    if (a.size() != p) throw ValidationError("coefficient length must equal the number of features");
    const int K = std::max(act.max_degree, target.max_degree);
    GegenbauerBasis basis(d, K);
    const std::vector<double> s = padded(act.gegenbauer, K);
    const std::vector<double> b = padded(target.gegenbauer, K);
    std::vector<double> wv(K + 1), wu(K + 1);
    for (int k = 0; k <= K; ++k) {
        wv[k] = b[k] * s[k];
        wu[k] = s[k] * s[k];
    }
    const double sp = std::sqrt(static_cast<double>(p));
    // cross term a^T V
    const VectorXd proj = W * beta;
    double aV = 0.0;
    for (Index j = 0; j < p; ++j) aV += a(j) * basis.normalized_series(wv, proj(j));
    aV /= sp;
    // quadratic term a^T U a, blocked over row panels of the Gram matrix
    const double diag_tail = std::max(act.norm2_sphere - sum_sq(s), 0.0);
    const Index bs = 256;
    double aUa = 0.0;
    for (Index i0 = 0; i0 < p; i0 += bs) {
        const Index b0 = std::min(bs, p - i0);
        MatrixXd G = W.middleRows(i0, b0) * W.bottomRows(p - i0).transpose();
        G = G.unaryExpr([&](double t) { return basis.normalized_series(wu, std::clamp(t, -1.0, 1.0)); });
        for (Index i = 0; i < b0; ++i) G(i, i) += diag_tail;
        const VectorXd ai = a.segment(i0, b0);
        aUa += ai.dot(G.leftCols(b0) * ai);
        if (p - i0 > b0) aUa += 2.0 * ai.dot(G.rightCols(p - i0 - b0) * a.tail(p - i0 - b0));
    }
    aUa /= static_cast<double>(p);
    return target.norm2_sphere - 2.0 * aV + aUa;
}

EmpiricalResult empirical_stats(const MatrixXd& Z, const VectorXd& y, const RidgeFit& fit, double lambda,
                                NormConvention c) {
    const double n = static_cast<double>(Z.rows()), p = static_cast<double>(Z.cols());
    EmpiricalResult r;
    r.train_error = (y - Z * fit.a).squaredNorm() / n;
    r.norm_stat = fit.a.squaredNorm() / (c == NormConvention::per_n ? n : p);
    const double g = lambda / n * fit.trace_inv_n;
    r.gcv_stat = g * g;
    r.rcond = fit.rcond;
    if (fit.gram_eigenvalues.size() > 0)
        r.singular_values = fit.gram_eigenvalues.cwiseMax(0.0).cwiseSqrt();
    return r;
}

double trace_identity_gap(const MatrixXd& Z, double lambda) {
    const Index n = Z.rows(), p = Z.cols();
    MatrixXd A = gram(Z, true);
    A.diagonal().array() += lambda;
    MatrixXd B = gram(Z, false);
    B.diagonal().array() += lambda;
    const double ta = SpdSolver(std::move(A)).trace_inverse();
    const double tb = SpdSolver(std::move(B)).trace_inverse();
    return std::abs(ta - tb - static_cast<double>(n - p) / lambda) / std::max(std::abs(ta) + std::abs(tb), 1e-300);
}

EmpiricalResult rf_trial(const SimProblem& prob, std::uint64_t seed, bool want_spectrum) {
    const Dataset ds = draw_dataset(prob, seed);
    const MatrixXd Z = build_features(ds.X, ds.W, prob.activation);
    const RidgeFit fit = fit_rfrr(Z, ds.y, prob.lambda, want_spectrum);
    EmpiricalResult r = empirical_stats(Z, ds.y, fit, prob.lambda, prob.norm_convention);
    r.test_error = exact_test_error(fit.a, ds.W, ds.beta, prob.activation, prob.target);
    if (!prob.activation.spec.is_polynomial() || !prob.target.spec.is_polynomial())
        r.warning = "series truncated at the spectral tail policy; off-diagonal tails neglected";
    return r;
}

EmpiricalResult krr_trial(const SimProblem& prob, std::uint64_t seed) {
    const Dataset ds = draw_dataset(prob, seed);
    const int d = prob.d;
    const Index n = prob.n;
    const int K = std::max(prob.activation.max_degree, prob.target.max_degree);
    GegenbauerBasis basis(d, K);
    const std::vector<double> s = padded(prob.activation.gegenbauer, K);
    const std::vector<double> b = padded(prob.target.gegenbauer, K);
    std::vector<double> wk(K + 1), wm(K + 1), wv(K + 1);
    for (int k = 0; k <= K; ++k) {
        const double N = basis.dim_k(k);
        wk[k] = s[k] * s[k];
        wm[k] = s[k] * s[k] * s[k] * s[k] / N;
        wv[k] = b[k] * s[k] * s[k] / basis.sqrt_dim(k);
    }
    const MatrixXd T = (ds.X * ds.X.transpose()) / static_cast<double>(d);
    const double diag_tail = std::max(prob.activation.norm2_sphere - sum_sq(s), 0.0);
    MatrixXd Kmat = T.unaryExpr([&](double t) { return basis.normalized_series(wk, std::clamp(t, -1.0, 1.0)); });
    Kmat.diagonal().array() += diag_tail;
    const MatrixXd M = T.unaryExpr([&](double t) { return basis.normalized_series(wm, std::clamp(t, -1.0, 1.0)); });
    MatrixXd A = Kmat;
    A.diagonal().array() += prob.lambda;
    SpdSolver solver(std::move(A));
    const VectorXd u = solver.solve(ds.y);
    const VectorXd proj = ds.X * ds.beta / std::sqrt(static_cast<double>(d));
    VectorXd v(n);
    for (Index i = 0; i < n; ++i) v(i) = basis.normalized_series(wv, proj(i));
    EmpiricalResult r;
    r.test_error = prob.target.norm2_sphere - 2.0 * u.dot(v) + u.dot(M * u);
    const VectorXd Ku = Kmat * u;
    r.train_error = (ds.y - Ku).squaredNorm() / n;
    r.norm_stat = u.dot(Ku) / n;
    const double g = prob.lambda / n * solver.trace_inverse();
    r.gcv_stat = g * g;
    r.rcond = solver.ldlt.rcond();
    return r;
}

EmpiricalResult gaussian_equiv_trial(const SimProblem& prob, std::uint64_t seed, const GaussianOptions& opt,
                                     bool want_spectrum) {
    check_problem(prob);
    const bool poly = prob.activation.spec.is_polynomial() && prob.target.spec.is_polynomial();
    int K = opt.truncation;
    if (K < 0)
        K = poly ? std::max(prob.activation.spec.degree(), prob.target.spec.degree()) + 2
                 : std::max(prob.activation.max_degree, prob.target.max_degree);
    K = std::min(K, kMaxDegree);
    const int d = prob.d;
    const Index n = prob.n, p = prob.p;
    const double sp = std::sqrt(static_cast<double>(p));
    GegenbauerBasis basis(d, K);
    const std::vector<double> s = padded(prob.activation.gegenbauer, K);
    const std::vector<double> b = padded(prob.target.gegenbauer, K);
    std::vector<double> xi(K + 1);
    for (int k = 0; k <= K; ++k) xi[k] = s[k] / basis.sqrt_dim(k);
    auto active = [&](int k) { return xi[k] != 0.0 || b[k] != 0.0; };

    if (opt.sampler == GaussianSampler::dense) {
        double M = 0.0;
        for (int k = 0; k <= K; ++k)
            if (active(k)) M += basis.dim_k(k);
        const double bytes = (static_cast<double>(n) + p) * M * sizeof(double);
        if (bytes > opt.memory_budget_bytes) {
            std::ostringstream os;
            os << "Gaussian-equivalent dense sampler needs feature dimension M = " << static_cast<long long>(M)
               << " (" << bytes / 1e9 << " GB), above the memory budget of " << opt.memory_budget_bytes / 1e9
               << " GB";
            throw ValidationError(os.str());
        }
    }

    Rng rng(seed);
    MatrixXd Z = MatrixXd::Constant(n, p, xi[0] / sp);
    VectorXd y = VectorXd::Constant(n, b[0]);
    struct Block {
        int k;
        VectorXd c1;
        MatrixXd F;  // remaining feature columns (p x m) or the triangular factor (p x p)
        bool triangular;
    };
    std::vector<Block> blocks;
    for (int k = 1; k <= K; ++k) {
        if (!active(k)) continue;
        const std::uint64_t N = subspace_dim(d, k);
        const Index m = static_cast<Index>(N - 1);
        const VectorXd g1 = normal_vector(n, rng);
        y += b[k] * g1;
        if (xi[k] == 0.0) continue;
        Block blk{k, normal_vector(p, rng), MatrixXd(), false};
        Z.noalias() += (xi[k] / sp) * g1 * blk.c1.transpose();
        if (opt.sampler == GaussianSampler::dense || m <= p) {
            MatrixXd Gr(n, m), Fr(p, m);
            fill_normal(Gr, rng);
            fill_normal(Fr, rng);
            Z.noalias() += (xi[k] / sp) * Gr * Fr.transpose();
            blk.F = std::move(Fr);
        } else {
            // G' F'^T = (G' Q) R with F'^T = Q R; G' Q is Gaussian and R is the Bartlett factor
            MatrixXd H(n, p);
            fill_normal(H, rng);
            MatrixXd R = MatrixXd::Zero(p, p);
            std::normal_distribution<double> normal;
            for (Index i = 0; i < p; ++i) {
                std::chi_squared_distribution<double> chi2(static_cast<double>(m - i));
                R(i, i) = std::sqrt(chi2(rng));
                for (Index j = i + 1; j < p; ++j) R(i, j) = normal(rng);
            }
            Z.noalias() += (xi[k] / sp) * (H * R.triangularView<Eigen::Upper>());
            blk.F = std::move(R);
            blk.triangular = true;
        }
        blocks.push_back(std::move(blk));
    }
    y += normal_vector(n, rng, std::sqrt(prob.noise_var));

    const RidgeFit fit = fit_rfrr(Z, y, prob.lambda, want_spectrum);
    EmpiricalResult r = empirical_stats(Z, y, fit, prob.lambda, prob.norm_convention);
    const VectorXd& a = fit.a;
    const double r0 = b[0] - xi[0] * a.sum() / sp;
    double err = r0 * r0;
    for (int k = 1; k <= K; ++k) {
        if (!active(k)) continue;
        err += b[k] * b[k];
    }
    for (const Block& blk : blocks) {
        const double ca = blk.c1.dot(a);
        const double rest = blk.triangular ? (blk.F.triangularView<Eigen::Upper>() * a).squaredNorm()
                                           : (blk.F.transpose() * a).squaredNorm();
        const double x = xi[blk.k];
        err += -2.0 * b[blk.k] * x * ca / sp + x * x * (ca * ca + rest) / static_cast<double>(p);
    }
    err += std::max(prob.target.norm2_sphere - sum_sq(b), 0.0);
    r.test_error = err;
    return r;
}

Summary summarize(const std::vector<double>& v) {
    Summary s;
    if (v.empty()) return s;
    double sum = 0.0;
    for (double x : v) sum += x;
    s.mean = sum / v.size();
    if (v.size() > 1) {
        double ss = 0.0;
        for (double x : v) ss += (x - s.mean) * (x - s.mean);
        s.std = std::sqrt(ss / (v.size() - 1));
        s.stderr_ = s.std / std::sqrt(static_cast<double>(v.size()));
    }
    return s;
}

TrialAggregate run_trials(const SimProblem& prob, Model model, int trials, std::uint64_t base_seed, int threads,
                          const GaussianOptions& gopt, bool want_spectrum) {
    if (trials < 1) throw ValidationError("trials must be >= 1");
    check_problem(prob);
    TrialAggregate agg;
    agg.trials = trials;
    agg.base_seed = base_seed;
    agg.records.resize(trials);
    if (threads <= 0) threads = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
    threads = std::min(threads, trials);
    std::atomic<int> next{0};
    std::mutex mu;
    int failed_trial = -1;
    std::exception_ptr failure;
    auto worker = [&] {
        for (;;) {
            const int t = next.fetch_add(1);
            if (t >= trials) return;
            {
                std::lock_guard<std::mutex> lock(mu);
                if (failure) return;
            }
            try {
                const std::uint64_t seed = base_seed + static_cast<std::uint64_t>(t);
                switch (model) {
                    case Model::rf:
                        agg.records[t] = rf_trial(prob, seed, want_spectrum);
                        break;
                    case Model::krr:
                        agg.records[t] = krr_trial(prob, seed);
                        break;
                    case Model::gaussian:
                        agg.records[t] = gaussian_equiv_trial(prob, seed, gopt, want_spectrum);
                        break;
                }
            } catch (...) {
                std::lock_guard<std::mutex> lock(mu);
                if (!failure || t < failed_trial) {
                    failure = std::current_exception();
                    failed_trial = t;
                }
            }
        }
    };
    if (threads == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int i = 0; i < threads; ++i) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }
    if (failure) {
        try {
            std::rethrow_exception(failure);
        } catch (const ValidationError& e) {
            throw ValidationError("trial " + std::to_string(failed_trial) + ": " + e.what());
        } catch (const std::exception& e) {
            throw NumericalError("trial " + std::to_string(failed_trial) + ": " + e.what());
        }
    }
    std::vector<double> te(trials), tr(trials), nm(trials), gc(trials);
    for (int t = 0; t < trials; ++t) {
        te[t] = agg.records[t].test_error;
        tr[t] = agg.records[t].train_error;
        nm[t] = agg.records[t].norm_stat;
        gc[t] = agg.records[t].gcv_stat;
    }
    agg.test = summarize(te);
    agg.train = summarize(tr);
    agg.norm = summarize(nm);
    agg.gcv = summarize(gc);
    return agg;
}

}  // namespace rfrr
