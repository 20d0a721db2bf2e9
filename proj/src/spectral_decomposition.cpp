#include "rfrr/spectral_decomposition.hpp"

#include "rfrr/errors.hpp"

#include <gsl/gsl_errno.h>
#include <gsl/gsl_integration.h>

#include <algorithm>
#include <cmath>
#include <memory>
#include <sstream>

namespace rfrr {

namespace {

constexpr int kQuadNodes = 256;
constexpr double kTailTol = 1e-8;

struct GslWorkspace {
    gsl_integration_workspace* w;
    explicit GslWorkspace(size_t n) : w(gsl_integration_workspace_alloc(n)) {
        static const bool handler_off = [] {
            gsl_set_error_handler_off();
            return true;
        }();
        (void)handler_off;
    }
    ~GslWorkspace() { gsl_integration_workspace_free(w); }
};

using Integrand = std::function<double(double)>;

double call_integrand(double x, void* params) { return (*static_cast<Integrand*>(params))(x); }

void check_status(int status, const char* what) {
    if (status != GSL_SUCCESS)
        throw NumericalError(std::string("adaptive quadrature did not converge for ") + what + ": " +
                             gsl_strerror(status));
}

// integral of g over [a, b] with interior kinks
double integrate_finite(Integrand g, double a, double b, const std::vector<double>& kinks) {
    std::vector<double> pts{a};
    for (double k : kinks)
        if (k > a && k < b) pts.push_back(k);
    pts.push_back(b);
    std::sort(pts.begin(), pts.end());
    GslWorkspace ws(2000);
    gsl_function F{&call_integrand, &g};
    double result = 0.0, err = 0.0;
    const int status =
        gsl_integration_qagp(&F, pts.data(), pts.size(), 1e-13, 1e-11, 2000, ws.w, &result, &err);
    check_status(status, "sphere-marginal coefficient");
    return result;
}

double integrate_line(Integrand g, const std::vector<double>& kinks) {
    std::vector<double> pts(kinks);
    std::sort(pts.begin(), pts.end());
    GslWorkspace ws(2000);
    gsl_function F{&call_integrand, &g};
    double total = 0.0, r = 0.0, err = 0.0;
    if (pts.empty()) {
        check_status(gsl_integration_qagi(&F, 1e-13, 1e-11, 2000, ws.w, &r, &err), "Gaussian coefficient");
        return r;
    }
    check_status(gsl_integration_qagil(&F, pts.front(), 1e-13, 1e-11, 2000, ws.w, &r, &err),
                 "Gaussian coefficient");
    total += r;
    for (size_t i = 0; i + 1 < pts.size(); ++i) {
        check_status(gsl_integration_qags(&F, pts[i], pts[i + 1], 1e-13, 1e-11, 2000, ws.w, &r, &err),
                     "Gaussian coefficient");
        total += r;
    }
    check_status(gsl_integration_qagiu(&F, pts.back(), 1e-13, 1e-11, 2000, ws.w, &r, &err),
                 "Gaussian coefficient");
    return total + r;
}

const double kInvSqrt2Pi = 0.3989422804014327;

void require_dim(const FunctionSpec& f, const GegenbauerBasis* basis) {
    if (f.kind == FunctionSpec::Kind::gegenbauer && basis == nullptr)
        throw ValidationError("a Gegenbauer-series function needs its dimension to be evaluated");
}

}  // namespace

FunctionSpec FunctionSpec::gegenbauer_series(std::vector<std::pair<int, double>> terms) {
    FunctionSpec f;
    f.kind = Kind::gegenbauer;
    for (const auto& t : terms) {
        if (t.first < 0 || t.first > kMaxDegree)
            throw ValidationError("Gegenbauer term degree out of range [0, 16]: " + std::to_string(t.first));
        if (!std::isfinite(t.second)) throw ValidationError("non-finite Gegenbauer coefficient");
    }
    f.terms = std::move(terms);
    return f;
}

FunctionSpec FunctionSpec::monomials(std::vector<double> coeffs) {
    FunctionSpec f;
    f.kind = Kind::monomial;
    if (coeffs.size() > static_cast<size_t>(kMaxDegree) + 1)
        throw ValidationError("monomial degree exceeds the cap of 16");
    for (double c : coeffs)
        if (!std::isfinite(c)) throw ValidationError("non-finite monomial coefficient");
    f.monomial = std::move(coeffs);
    return f;
}

FunctionSpec FunctionSpec::relu(double shift) {
    if (!std::isfinite(shift)) throw ValidationError("non-finite ReLU shift");
    FunctionSpec f;
    f.kind = Kind::named;
    f.name = shift == 0.0 ? "relu" : "shifted_relu";
    f.shift = shift;
    f.fn = [shift](double x) { return x > shift ? x - shift : 0.0; };
    f.breakpoints = {shift};
    return f;
}

FunctionSpec FunctionSpec::function(std::function<double(double)> fn, std::vector<double> breakpoints) {
    FunctionSpec f;
    f.kind = Kind::callable;
    f.fn = std::move(fn);
    f.breakpoints = std::move(breakpoints);
    return f;
}

int FunctionSpec::degree() const {
    switch (kind) {
        case Kind::gegenbauer: {
            int deg = 0;
            for (const auto& t : terms)
                if (t.second != 0.0) deg = std::max(deg, t.first);
            return deg;
        }
        case Kind::monomial: {
            int deg = 0;
            for (size_t i = 0; i < monomial.size(); ++i)
                if (monomial[i] != 0.0) deg = static_cast<int>(i);
            return deg;
        }
        default:
            return -1;
    }
}

double FunctionSpec::eval(double x, const GegenbauerBasis* basis) const {
    switch (kind) {
        case Kind::gegenbauer: {
            require_dim(*this, basis);
            double s = 0.0;
            for (const auto& t : terms) s += t.second * basis->eval(t.first, x);
            return s;
        }
        case Kind::monomial: {
            double s = 0.0;
            for (size_t i = monomial.size(); i-- > 0;) s = s * x + monomial[i];
            return s;
        }
        default:
            return fn(x);
    }
}

std::string FunctionSpec::describe() const {
    std::ostringstream os;
    switch (kind) {
        case Kind::gegenbauer:
            os << "gegenbauer";
            for (const auto& t : terms) os << " " << t.second << "*q" << t.first;
            break;
        case Kind::monomial:
            os << "monomial";
            for (size_t i = 0; i < monomial.size(); ++i) os << " " << monomial[i] << "*x^" << i;
            break;
        case Kind::named:
            os << name;
            if (shift != 0.0) os << "(" << shift << ")";
            break;
        case Kind::callable:
            os << "callable";
            break;
    }
    return os.str();
}

const char* to_string(Convention c) { return c == Convention::finite_d ? "finite_d" : "hermite_limit"; }

double Decomposition::coeff(int k, Convention c) const {
    const auto& v = coeffs(c);
    return (k >= 0 && k < static_cast<int>(v.size())) ? v[k] : 0.0;
}

double Decomposition::tail_above(int k, Convention c) const {
    const auto& v = coeffs(c);
    if (spec.is_polynomial()) {
        double s = 0.0;
        for (int j = std::max(k + 1, 0); j < static_cast<int>(v.size()); ++j) s += v[j] * v[j];
        return s;
    }
    double s = norm2(c);
    for (int j = 0; j <= k && j < static_cast<int>(v.size()); ++j) s -= v[j] * v[j];
    if (s < -1e-12 * std::max(1.0, norm2(c)))
        throw NumericalError("negative spectral tail: coefficients exceed the function norm");
    return std::max(s, 0.0);
}

std::vector<double> hermite_coeffs(const FunctionSpec& f, int K, double* tail) {
    if (K < 0 || K > kMaxDegree) throw ValidationError("Hermite degree out of range [0, 16]");
    std::vector<double> mu(K + 1, 0.0);
    double norm2 = 0.0;
    if (f.kind == FunctionSpec::Kind::gegenbauer) {
        // q_k^{(d)} tends to He_k, so the series coefficients carry over
        std::vector<double> merged(kMaxDegree + 1, 0.0);
        for (const auto& t : f.terms) merged[t.first] += t.second;
        for (int k = 0; k <= kMaxDegree; ++k) {
            norm2 += merged[k] * merged[k];
            if (k <= K) mu[k] = merged[k];
        }
    } else if (f.kind == FunctionSpec::Kind::monomial) {
        const Quadrature q = gauss_hermite(kQuadNodes);
        std::vector<double> he(K + 1);
        for (size_t i = 0; i < q.nodes.size(); ++i) {
            const double v = f.eval(q.nodes[i]);
            hermite_all(K, q.nodes[i], he.data());
            for (int k = 0; k <= K; ++k) mu[k] += q.weights[i] * v * he[k];
            norm2 += q.weights[i] * v * v;
        }
    } else {
        for (int k = 0; k <= K; ++k)
            mu[k] = integrate_line(
                [&](double x) { return f.eval(x) * hermite_eval(k, x) * kInvSqrt2Pi * std::exp(-0.5 * x * x); },
                f.breakpoints);
        norm2 = integrate_line(
            [&](double x) {
                const double v = f.eval(x);
                return v * v * kInvSqrt2Pi * std::exp(-0.5 * x * x);
            },
            f.breakpoints);
    }
    if (tail) {
        double s = norm2;
        for (double m : mu) s -= m * m;
        if (s < -1e-12 * std::max(1.0, norm2)) throw NumericalError("negative Hermite tail");
        *tail = std::max(s, 0.0);
    }
    return mu;
}

std::vector<double> gegenbauer_coeffs(const FunctionSpec& f, int d, int K) {
    GegenbauerBasis basis(d, K);
    std::vector<double> c(K + 1, 0.0);
    if (f.kind == FunctionSpec::Kind::gegenbauer) {
        for (const auto& t : f.terms)
            if (t.first <= K) c[t.first] += t.second;
        return c;
    }
    if (f.kind == FunctionSpec::Kind::monomial) {
        const Quadrature q = gauss_sphere_marginal(d, kQuadNodes);
        std::vector<double> qk(K + 1);
        for (size_t i = 0; i < q.nodes.size(); ++i) {
            const double v = f.eval(q.nodes[i]);
            basis.eval_all(q.nodes[i], qk.data());
            for (int k = 0; k <= K; ++k) c[k] += q.weights[i] * v * qk[k];
        }
        return c;
    }
    const double r = std::sqrt(static_cast<double>(d));
    for (int k = 0; k <= K; ++k)
        c[k] = integrate_finite(
            [&](double x) { return f.eval(x) * basis.eval(k, x) * tau_d1_density(d, x); }, -r, r,
            f.breakpoints);
    return c;
}

Decomposition decompose(const FunctionSpec& f, int d, int min_degree) {
    if (min_degree < 0 || min_degree > kMaxDegree) throw ValidationError("expansion degree out of range [0, 16]");
    Decomposition out;
    out.spec = f;
    out.d = d;
    if (f.is_polynomial()) {
        const int K = std::max(f.degree(), min_degree);
        out.max_degree = K;
        out.gegenbauer = gegenbauer_coeffs(f, d, K);
        out.hermite = hermite_coeffs(f, K);
        if (f.kind == FunctionSpec::Kind::gegenbauer) {
            for (double c : out.gegenbauer) out.norm2_sphere += c * c;
        } else {
            // exact because the rule integrates degree < 512 exactly
            const Quadrature q = gauss_sphere_marginal(d, kQuadNodes);
            for (size_t i = 0; i < q.nodes.size(); ++i) {
                const double v = f.eval(q.nodes[i]);
                out.norm2_sphere += q.weights[i] * v * v;
            }
        }
        for (double c : out.hermite) out.norm2_gauss += c * c;
        return out;
    }
    const double r = std::sqrt(static_cast<double>(d));
    out.norm2_sphere = integrate_finite(
        [&](double x) {
            const double v = f.eval(x);
            return v * v * tau_d1_density(d, x);
        },
        -r, r, f.breakpoints);
    double gtail = 0.0;
    const std::vector<double> g = gegenbauer_coeffs(f, d, kMaxDegree);
    const std::vector<double> h = hermite_coeffs(f, kMaxDegree, &gtail);
    out.norm2_gauss = gtail;
    for (double m : h) out.norm2_gauss += m * m;
    int K = kMaxDegree;
    double acc_g = 0.0, acc_h = 0.0;
    for (int k = 0; k <= kMaxDegree; ++k) {
        acc_g += g[k] * g[k];
        acc_h += h[k] * h[k];
        const bool small_g = out.norm2_sphere - acc_g < kTailTol * out.norm2_sphere;
        const bool small_h = out.norm2_gauss - acc_h < kTailTol * out.norm2_gauss;
        if (k >= min_degree && small_g && small_h) {
            K = k;
            break;
        }
    }
    out.max_degree = K;
    out.gegenbauer.assign(g.begin(), g.begin() + K + 1);
    out.hermite.assign(h.begin(), h.begin() + K + 1);
    return out;
}

ActivationScalars derive_scalars(const ActivationModel& act, int ell, double lambda, Convention c) {
    if (!(lambda > 0.0)) throw ValidationError("ridge parameter lambda must be positive");
    if (ell < 0) throw ValidationError("level must be non-negative");
    const double scale = std::max(act.norm2(c), 1e-300);
    ActivationScalars s;
    s.mu_ell = act.coeff(ell, c);
    s.mu_tail2 = act.tail_above(ell, c);
    if (std::abs(s.mu_ell) <= 1e-14 * std::sqrt(scale))
        throw AssumptionError("activation has no component at level " + std::to_string(ell) +
                              " (coefficient is zero)");
    if (s.mu_tail2 <= 1e-14 * scale)
        throw AssumptionError("activation tail above level " + std::to_string(ell) +
                              " vanishes: a degree-" + std::to_string(ell) +
                              " polynomial activation has no self-induced regularization");
    s.zeta = s.mu_ell / std::sqrt(s.mu_tail2);
    s.lambda_bar = lambda / s.mu_tail2;
    return s;
}

TargetFrequencies target_frequencies(const TargetModel& t, int ell, Convention c) {
    TargetFrequencies out;
    out.norm2 = t.norm2(c);
    out.F_ell = std::abs(t.coeff(ell, c));
    out.F_tail2 = t.tail_above(ell, c);
    out.above.resize(t.max_degree + 1);
    for (int k = 0; k <= t.max_degree; ++k) out.above[k] = t.tail_above(k, c);
    return out;
}

}  // namespace rfrr
