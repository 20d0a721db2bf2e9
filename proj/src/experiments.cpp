#include "rfrr/experiments.hpp"

#include "rfrr/errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <sstream>

namespace rfrr {

const char* const kVersion = "1.0.0";

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr int kAsymptoticDim = 1000;  // placeholder dimension for coefficient bookkeeping without d

double factorial(int k) {
    double f = 1.0;
    for (int i = 2; i <= k; ++i) f *= i;
    return f;
}

bool is_integer(double x) { return std::abs(x - std::round(x)) < 1e-12; }

void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
    if (!j.is_object()) throw ValidationError(where + " must be a JSON object");
    for (const auto& [k, v] : j.items())
        if (!allowed.count(k)) throw ValidationError("unknown key '" + k + "' in " + where);
}

double number(const json& j, const std::string& key, const std::string& where) {
    if (!j.is_number()) throw ValidationError(where + "." + key + " must be a number");
    const double v = j.get<double>();
    if (!std::isfinite(v)) throw ValidationError(where + "." + key + " must be finite");
    return v;
}

std::optional<double> opt_number(const json& j, const char* key, const std::string& where) {
    if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
    return number(j.at(key), key, where);
}

Model parse_model(const std::string& s) {
    if (s == "rf") return Model::rf;
    if (s == "krr") return Model::krr;
    if (s == "gaussian") return Model::gaussian;
    throw ValidationError("model must be rf, krr or gaussian (got '" + s + "')");
}

Convention parse_convention(const std::string& s) {
    if (s == "finite_d") return Convention::finite_d;
    if (s == "hermite_limit") return Convention::hermite_limit;
    throw ValidationError("convention must be finite_d or hermite_limit (got '" + s + "')");
}

const std::set<std::string> kSweepVars = {"p", "n", "lambda", "psi1", "psi2", "theta1", "theta2", "snr"};

std::string fmt_num(double v) {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

std::vector<double> grid_values(const SweepSpec& s) {
    std::vector<double> v(s.count);
    for (int i = 0; i < s.count; ++i) {
        const double f = s.count == 1 ? 0.0 : static_cast<double>(i) / (s.count - 1);
        v[i] = s.log ? s.min * std::pow(s.max / s.min, f) : s.min + (s.max - s.min) * f;
    }
    return v;
}

// Everything needed to evaluate one grid point.
struct Point {
    double value = 0.0;
    int d = 0;
    double n = 0.0, p = 0.0;
    double lambda = 0.0;
    double noise_var = 0.0;
    ScalingRegime reg;
    bool kernel = false;
};

struct Models {
    Decomposition act, target;
    Convention conv;
};

Models build_models(const ExperimentConfig& c, int min_degree) {
    const int d = c.regime.d > 0 ? c.regime.d : kAsymptoticDim;
    Models m{decompose(c.activation, d, min_degree), decompose(c.target, d, min_degree), effective_convention(c)};
    if (c.regime.d == 0 && m.conv == Convention::finite_d &&
        (c.activation.kind != FunctionSpec::Kind::gegenbauer || c.target.kind != FunctionSpec::Kind::gegenbauer))
        throw ValidationError("finite_d convention needs an explicit dimension d unless both functions are Gegenbauer series");
    return m;
}

double target_norm2(const ExperimentConfig& c) {
    const Models m = build_models(c, 0);
    return m.target.norm2(m.conv);
}

int nearest_level(double p, int d) {
    int best = 1;
    double best_gap = kInf;
    for (int j = 1; j <= 8; ++j) {
        const double gap = std::abs(std::log(p / (std::pow(d, j) / factorial(j))));
        if (gap < best_gap) {
            best_gap = gap;
            best = j;
        }
    }
    return best;
}

double count_for(double kappa, int d, const std::optional<double>& count, const std::optional<double>& psi,
                 const std::optional<double>& theta, const char* which) {
    if (count) return *count;
    if (psi) {
        if (!is_integer(kappa))
            throw ValidationError(std::string("psi") + which + " needs an integer exponent kappa" + which);
        const int k = static_cast<int>(std::round(kappa));
        return *psi * std::pow(d, k) / factorial(k);
    }
    return theta.value_or(1.0) * std::pow(d, kappa);
}

double theta_for(double kappa, const std::optional<double>& psi, const std::optional<double>& theta,
                 const char* which) {
    if (psi) {
        if (!is_integer(kappa))
            throw ValidationError(std::string("psi") + which + " needs an integer exponent kappa" + which);
        return *psi / factorial(static_cast<int>(std::round(kappa)));
    }
    return theta.value_or(1.0);
}

Point resolve_point(const ExperimentConfig& base, const std::optional<double>& sweep_value, double norm2) {
    ExperimentConfig c = base;
    RegimeSpec& r = c.regime;
    Point pt;
    if (sweep_value && c.sweep) {
        const double v = *sweep_value;
        pt.value = v;
        const std::string& var = c.sweep->variable;
        if (var == "p" || var == "n") {
            if (r.d == 0) throw ValidationError("sweeping " + var + " needs an explicit dimension d");
            if (var == "p") {
                r.p = v;
                r.psi1.reset();
                r.theta1.reset();
            } else {
                r.n = v;
                r.psi2.reset();
                r.theta2.reset();
            }
        } else if (var == "psi1" || var == "theta1") {
            r.p.reset();
            (var == "psi1" ? r.psi1 : r.theta1) = v;
            (var == "psi1" ? r.theta1 : r.psi1).reset();
        } else if (var == "psi2" || var == "theta2") {
            r.n.reset();
            (var == "psi2" ? r.psi2 : r.theta2) = v;
            (var == "psi2" ? r.theta2 : r.psi2).reset();
        } else if (var == "lambda") {
            c.lambda = v;
        } else if (var == "snr") {
            c.noise_var = norm2 / v;
        }
    }
    if (!(c.lambda >= 1e-8)) throw ValidationError("lambda must be >= 1e-8");
    pt.lambda = c.lambda;
    pt.noise_var = c.noise_var;
    pt.d = r.d;
    pt.kernel = c.model == Model::krr;
    if (r.d > 0) {
        pt.n = std::max(1.0, std::round(count_for(r.kappa2, r.d, r.n, r.psi2, r.theta2, "2")));
        double kappa1 = r.kappa1;
        if (pt.kernel) {
            pt.p = kInf;
            pt.reg = classify_sizes(r.kappa2 + 1.0, r.kappa2, r.d, pt.n, 1.0);
            return pt;
        }
        if (r.auto_kappa1) {
            if (!r.p) throw ValidationError("automatic kappa1 needs p (sweep p or set regime.p)");
            kappa1 = nearest_level(*r.p, r.d);
        }
        pt.p = std::max(1.0, std::round(count_for(kappa1, r.d, r.p, r.psi1, r.theta1, "1")));
        pt.reg = classify_sizes(kappa1, r.kappa2, r.d, pt.n, pt.p);
        return pt;
    }
    if (r.n || r.p) throw ValidationError("explicit n or p needs the dimension d");
    if (r.auto_kappa1) throw ValidationError("automatic kappa1 needs the dimension d");
    const double t2 = theta_for(r.kappa2, r.psi2, r.theta2, "2");
    if (pt.kernel) {
        pt.reg = classify(r.kappa2 + 1.0, r.kappa2, 1.0, t2);
        pt.reg.theta1 = kInf;
        pt.p = kInf;
        return pt;
    }
    pt.reg = classify(r.kappa1, r.kappa2, theta_for(r.kappa1, r.psi1, r.theta1, "1"), t2);
    return pt;
}

CurveRow theory_row(const ExperimentConfig& c, const Point& pt, const Models& m) {
    CurveRow row;
    row.sweep_var = c.sweep ? c.sweep->variable : "";
    row.sweep_value = pt.value;
    row.d = pt.d;
    row.n = pt.n;
    row.p = pt.p;
    row.lambda = pt.lambda;
    row.ell = pt.reg.ell;
    row.regime = pt.reg.tag;
    const ActivationScalars s = derive_scalars(m.act, pt.reg.ell, pt.lambda, m.conv);
    const TargetFrequencies f = target_frequencies(m.target, pt.reg.ell, m.conv);
    row.theory = predict(pt.reg, s, f, pt.noise_var);
    auto level = [&](int k) {
        if (k < 0) return f.norm2;
        return k < static_cast<int>(f.above.size()) ? f.above[k] : 0.0;
    };
    row.stair_km1 = level(pt.reg.ell - 1);
    row.stair_k = level(pt.reg.ell);
    row.base_seed = c.base_seed;
    return row;
}

int level_bound(const ExperimentConfig& c, const std::vector<Point>& pts) {
    (void)c;
    int ell = 0;
    for (const Point& p : pts) ell = std::max(ell, p.reg.ell);
    return ell + 1;
}

std::vector<Point> resolve_all(const ExperimentConfig& c) {
    double norm2 = 0.0;
    if (c.sweep && c.sweep->variable == "snr") norm2 = target_norm2(c);
    std::vector<Point> pts;
    if (c.sweep) {
        for (double v : grid_values(*c.sweep)) pts.push_back(resolve_point(c, v, norm2));
    } else {
        pts.push_back(resolve_point(c, std::nullopt, norm2));
    }
    return pts;
}

RunResult run(const ExperimentConfig& c, bool simulate) {
    if (simulate && c.trials > 0 && c.regime.d == 0)
        throw ValidationError("simulation needs an explicit dimension d");
    const std::vector<Point> pts = resolve_all(c);
    const Models m = build_models(c, level_bound(c, pts));
    RunResult res;
    res.config = c;
    for (const Point& pt : pts) {
        CurveRow row = theory_row(c, pt, m);
        if (simulate && c.trials > 0) {
            SimProblem prob;
            prob.d = pt.d;
            prob.n = static_cast<long>(pt.n);
            prob.p = pt.kernel ? 1 : static_cast<long>(pt.p);
            prob.lambda = pt.lambda;
            prob.noise_var = pt.noise_var;
            prob.activation = m.act;
            prob.target = m.target;
            prob.norm_convention = row.theory.norm_convention;
            const TrialAggregate agg = run_trials(prob, c.model, c.trials, c.base_seed, c.threads, c.gaussian);
            row.has_empirical = true;
            row.test = agg.test;
            row.train = agg.train;
            row.norm = agg.norm;
            row.gcv = agg.gcv;
            row.trials = c.trials;
            for (const auto& rec : agg.records)
                if (!rec.warning.empty()) {
                    row.warning = rec.warning;
                    break;
                }
        }
        res.rows.push_back(std::move(row));
    }
    return res;
}

}  // namespace

FunctionSpec function_from_json(const json& j) {
    if (!j.is_object() || j.size() != 1)
        throw ValidationError("function spec must be an object with one of the keys gegenbauer, monomial, named");
    const auto& [key, v] = *j.items().begin();
    if (key == "gegenbauer") {
        if (!v.is_array() || v.empty()) throw ValidationError("gegenbauer spec must be a non-empty array of [k, c]");
        std::vector<std::pair<int, double>> terms;
        for (const auto& t : v) {
            if (!t.is_array() || t.size() != 2 || !t[0].is_number_integer() || !t[1].is_number())
                throw ValidationError("gegenbauer terms must be [integer k, number c]");
            const int k = t[0].get<int>();
            if (k < 0 || k > kMaxDegree) throw ValidationError("gegenbauer degree out of range [0, 16]");
            terms.emplace_back(k, t[1].get<double>());
        }
        return FunctionSpec::gegenbauer_series(terms);
    }
    if (key == "monomial") {
        if (!v.is_array() || v.empty()) throw ValidationError("monomial spec must be a non-empty array");
        std::vector<double> c;
        for (const auto& x : v) {
            if (!x.is_number()) throw ValidationError("monomial coefficients must be numbers");
            c.push_back(x.get<double>());
        }
        if (static_cast<int>(c.size()) - 1 > kMaxDegree) throw ValidationError("monomial degree above 16");
        return FunctionSpec::monomials(c);
    }
    if (key == "named") {
        if (!v.is_string()) throw ValidationError("named spec must be a string");
        const std::string s = v.get<std::string>();
        if (s == "relu") return FunctionSpec::relu();
        const std::string prefix = "shifted_relu(";
        if (s.rfind(prefix, 0) == 0 && s.back() == ')') {
            const std::string arg = s.substr(prefix.size(), s.size() - prefix.size() - 1);
            std::size_t used = 0;
            double shift = 0.0;
            try {
                shift = std::stod(arg, &used);
            } catch (const std::exception&) {
                used = 0;
            }
            if (used == 0 || used != arg.size() || !std::isfinite(shift))
                throw ValidationError("cannot parse shift in '" + s + "'");
            return FunctionSpec::relu(shift);
        }
        throw ValidationError("unknown named function '" + s + "'");
    }
    throw ValidationError("unknown function spec kind '" + key + "'");
}

json function_to_json(const FunctionSpec& f) {
    switch (f.kind) {
        case FunctionSpec::Kind::gegenbauer: {
            json a = json::array();
            for (const auto& [k, c] : f.terms) a.push_back({k, c});
            return {{"gegenbauer", a}};
        }
        case FunctionSpec::Kind::monomial:
            return {{"monomial", f.monomial}};
        case FunctionSpec::Kind::named: {
            if (f.shift == 0.0) return {{"named", "relu"}};
            return {{"named", "shifted_relu(" + fmt_num(f.shift) + ")"}};
        }
        default:
            throw ValidationError("callable functions cannot be serialized");
    }
}

ExperimentConfig parse_config(const json& j) {
    check_keys(j, {"label", "regime", "activation", "target", "noise_var", "lambda", "sweep", "trials", "base_seed",
                   "convention", "model", "gaussian", "threads", "spectra"},
               "config");
    ExperimentConfig c;
    c.source = j;
    if (j.contains("label")) c.label = j.at("label").get<std::string>();
    if (!j.contains("regime")) throw ValidationError("config needs a regime");
    const json& r = j.at("regime");
    check_keys(r, {"kappa1", "kappa2", "d", "theta1", "theta2", "psi1", "psi2", "n", "p"}, "regime");
    if (r.contains("kappa1") && r.at("kappa1").is_string()) {
        if (r.at("kappa1").get<std::string>() != "auto") throw ValidationError("regime.kappa1 must be a number or \"auto\"");
        c.regime.auto_kappa1 = true;
    } else if (r.contains("kappa1")) {
        c.regime.kappa1 = number(r.at("kappa1"), "kappa1", "regime");
    }
    if (r.contains("kappa2")) c.regime.kappa2 = number(r.at("kappa2"), "kappa2", "regime");
    if (r.contains("d")) {
        if (!r.at("d").is_number_integer()) throw ValidationError("regime.d must be an integer");
        c.regime.d = r.at("d").get<int>();
        if (c.regime.d != 0 && c.regime.d < 2) throw ValidationError("regime.d must be >= 2");
    }
    c.regime.theta1 = opt_number(r, "theta1", "regime");
    c.regime.theta2 = opt_number(r, "theta2", "regime");
    c.regime.psi1 = opt_number(r, "psi1", "regime");
    c.regime.psi2 = opt_number(r, "psi2", "regime");
    c.regime.n = opt_number(r, "n", "regime");
    c.regime.p = opt_number(r, "p", "regime");
    for (const auto& v : {c.regime.theta1, c.regime.theta2, c.regime.psi1, c.regime.psi2, c.regime.n, c.regime.p})
        if (v && !(*v > 0.0)) throw ValidationError("regime sizes and ratios must be positive");
    if (!(c.regime.kappa1 > 0.0 && c.regime.kappa2 > 0.0)) throw ValidationError("exponents must be positive");
    if (!j.contains("activation") || !j.contains("target")) throw ValidationError("config needs activation and target");
    c.activation = function_from_json(j.at("activation"));
    c.target = function_from_json(j.at("target"));
    if (j.contains("noise_var")) c.noise_var = number(j.at("noise_var"), "noise_var", "config");
    if (!(c.noise_var >= 0.0)) throw ValidationError("noise_var must be non-negative");
    if (j.contains("lambda")) c.lambda = number(j.at("lambda"), "lambda", "config");
    if (!(c.lambda >= 1e-8)) throw ValidationError("lambda must be >= 1e-8");
    if (j.contains("sweep") && !j.at("sweep").is_null()) {
        const json& s = j.at("sweep");
        check_keys(s, {"variable", "grid", "min", "max", "count"}, "sweep");
        SweepSpec sw;
        sw.variable = s.value("variable", "");
        if (!kSweepVars.count(sw.variable))
            throw ValidationError("sweep.variable must be one of p, n, lambda, psi1, psi2, theta1, theta2, snr");
        const std::string grid = s.value("grid", "log");
        if (grid != "log" && grid != "linear") throw ValidationError("sweep.grid must be log or linear");
        sw.log = grid == "log";
        if (!s.contains("min") || !s.contains("max")) throw ValidationError("sweep needs min and max");
        sw.min = number(s.at("min"), "min", "sweep");
        sw.max = number(s.at("max"), "max", "sweep");
        if (s.contains("count")) {
            if (!s.at("count").is_number_integer()) throw ValidationError("sweep.count must be an integer");
            sw.count = s.at("count").get<int>();
        }
        if (!(sw.min > 0.0 && sw.max > 0.0)) throw ValidationError("sweep bounds must be positive");
        if (sw.max < sw.min) throw ValidationError("sweep.max must be >= sweep.min");
        if (sw.count < 1) throw ValidationError("sweep.count must be >= 1");
        if (sw.variable == "lambda" && sw.min < 1e-8) throw ValidationError("lambda sweep must stay >= 1e-8");
        c.sweep = sw;
    }
    if (j.contains("trials")) {
        if (!j.at("trials").is_number_integer() || j.at("trials").get<long>() < 0)
            throw ValidationError("trials must be a non-negative integer");
        c.trials = j.at("trials").get<int>();
    }
    if (j.contains("base_seed")) {
        if (!j.at("base_seed").is_number_unsigned() && !(j.at("base_seed").is_number_integer() && j.at("base_seed").get<long long>() >= 0))
            throw ValidationError("base_seed must be a non-negative integer");
        c.base_seed = j.at("base_seed").get<std::uint64_t>();
    }
    if (j.contains("convention") && !j.at("convention").is_null())
        c.convention = parse_convention(j.at("convention").get<std::string>());
    if (j.contains("model")) c.model = parse_model(j.at("model").get<std::string>());
    if (j.contains("gaussian")) {
        const json& g = j.at("gaussian");
        check_keys(g, {"truncation", "sampler", "memory_budget_gb"}, "gaussian");
        if (g.contains("truncation")) c.gaussian.truncation = g.at("truncation").get<int>();
        if (g.contains("sampler")) {
            const std::string s = g.at("sampler").get<std::string>();
            if (s == "dense")
                c.gaussian.sampler = GaussianSampler::dense;
            else if (s == "compressed")
                c.gaussian.sampler = GaussianSampler::compressed;
            else
                throw ValidationError("gaussian.sampler must be dense or compressed");
        }
        if (g.contains("memory_budget_gb"))
            c.gaussian.memory_budget_bytes = number(g.at("memory_budget_gb"), "memory_budget_gb", "gaussian") * 1e9;
    }
    if (j.contains("threads")) {
        if (!j.at("threads").is_number_integer() || j.at("threads").get<int>() < 0)
            throw ValidationError("threads must be a non-negative integer");
        c.threads = j.at("threads").get<int>();
    }
    if (j.contains("spectra")) {
        const json& s = j.at("spectra");
        check_keys(s, {"bins", "trials", "eta", "grid", "range_max"}, "spectra");
        if (s.contains("bins")) c.spectra.bins = s.at("bins").get<int>();
        if (s.contains("trials")) c.spectra.trials = s.at("trials").get<int>();
        if (s.contains("eta")) c.spectra.eta = number(s.at("eta"), "eta", "spectra");
        if (s.contains("grid")) c.spectra.grid = s.at("grid").get<int>();
        c.spectra.range_max = opt_number(s, "range_max", "spectra");
        if (c.spectra.bins < 1 || c.spectra.trials < 1 || c.spectra.grid < 16)
            throw ValidationError("spectra needs bins >= 1, trials >= 1 and grid >= 16");
    }
    return c;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open config file '" + path + "'");
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ValidationError("config file '" + path + "' is not valid JSON: " + e.what());
    }
    try {
        return parse_config(j);
    } catch (const json::exception& e) {
        throw ValidationError(std::string("config has a wrongly typed field: ") + e.what());
    }
}

Convention effective_convention(const ExperimentConfig& c) {
    if (c.convention) return *c.convention;
    const bool series = c.activation.kind == FunctionSpec::Kind::gegenbauer &&
                        c.target.kind == FunctionSpec::Kind::gegenbauer;
    return series ? Convention::finite_d : Convention::hermite_limit;
}

json config_to_json(const ExperimentConfig& c) {
    json r;
    if (c.regime.auto_kappa1)
        r["kappa1"] = "auto";
    else
        r["kappa1"] = c.regime.kappa1;
    r["kappa2"] = c.regime.kappa2;
    r["d"] = c.regime.d;
    auto put = [&](const char* k, const std::optional<double>& v) {
        if (v) r[k] = *v;
    };
    put("theta1", c.regime.theta1);
    put("theta2", c.regime.theta2);
    put("psi1", c.regime.psi1);
    put("psi2", c.regime.psi2);
    put("n", c.regime.n);
    put("p", c.regime.p);
    json j;
    j["label"] = c.label;
    j["regime"] = r;
    j["activation"] = function_to_json(c.activation);
    j["target"] = function_to_json(c.target);
    j["noise_var"] = c.noise_var;
    j["lambda"] = c.lambda;
    if (c.sweep)
        j["sweep"] = {{"variable", c.sweep->variable},
                      {"grid", c.sweep->log ? "log" : "linear"},
                      {"min", c.sweep->min},
                      {"max", c.sweep->max},
                      {"count", c.sweep->count}};
    j["trials"] = c.trials;
    j["base_seed"] = c.base_seed;
    j["convention"] = to_string(effective_convention(c));
    j["model"] = to_string(c.model);
    j["gaussian"] = {{"truncation", c.gaussian.truncation},
                     {"sampler", c.gaussian.sampler == GaussianSampler::dense ? "dense" : "compressed"},
                     {"memory_budget_gb", c.gaussian.memory_budget_bytes / 1e9}};
    j["threads"] = c.threads;
    j["spectra"] = {{"bins", c.spectra.bins}, {"trials", c.spectra.trials}, {"eta", c.spectra.eta},
                    {"grid", c.spectra.grid}};
    if (c.spectra.range_max) j["spectra"]["range_max"] = *c.spectra.range_max;
    return j;
}

RunResult cmd_predict(const ExperimentConfig& c) { return run(c, false); }

RunResult cmd_simulate(const ExperimentConfig& c) { return run(c, true); }

const std::vector<std::string>& csv_columns() {
    static const std::vector<std::string> cols = {
        "sweep_var",     "sweep_value",   "d",            "n",            "p",            "lambda",
        "ell",           "regime",        "theory_Rtest", "theory_Rtrain", "theory_Lnorm", "theory_Btest",
        "theory_Vtest",  "theory_alpha_c", "stair_gt_km1", "stair_gt_k",  "emp_Rtest_mean", "emp_Rtest_se",
        "emp_Rtrain_mean", "emp_Rtrain_se", "emp_Lnorm_mean", "emp_Lnorm_se", "emp_gcv_mean", "emp_gcv_se",
        "trials",        "base_seed"};
    return cols;
}

void write_csv(std::ostream& os, const std::vector<CurveRow>& rows) {
    const auto& cols = csv_columns();
    for (size_t i = 0; i < cols.size(); ++i) os << (i ? "," : "") << cols[i];
    os << "\n";
    for (const CurveRow& r : rows) {
        std::vector<std::string> f;
        f.push_back(r.sweep_var);
        f.push_back(r.sweep_var.empty() ? "" : fmt_num(r.sweep_value));
        f.push_back(r.d > 0 ? std::to_string(r.d) : "");
        f.push_back(r.d > 0 ? fmt_num(r.n) : "");
        f.push_back(r.d > 0 ? fmt_num(r.p) : "");
        f.push_back(fmt_num(r.lambda));
        f.push_back(std::to_string(r.ell));
        f.push_back(to_string(r.regime));
        for (double v : {r.theory.R_test, r.theory.R_train, r.theory.L_norm, r.theory.B_test, r.theory.V_test,
                         r.theory.alpha_c, r.stair_km1, r.stair_k})
            f.push_back(fmt_num(v));
        if (r.has_empirical) {
            for (const Summary* s : {&r.test, &r.train, &r.norm, &r.gcv}) {
                f.push_back(fmt_num(s->mean));
                f.push_back(fmt_num(s->stderr_));
            }
        } else {
            for (int i = 0; i < 8; ++i) f.push_back("");
        }
        f.push_back(std::to_string(r.trials));
        f.push_back(std::to_string(r.base_seed));
        for (size_t i = 0; i < f.size(); ++i) os << (i ? "," : "") << f[i];
        os << "\n";
    }
}

json sidecar(const RunResult& r, const std::string& command) {
    json j;
    j["command"] = command;
    j["version"] = kVersion;
    j["config"] = config_to_json(r.config);
    json conv;
    conv["coefficients"] = to_string(effective_convention(r.config));
    conv["psi"] = "count / (d^ell / ell!)";
    conv["noise_distribution"] = "gaussian";
    conv["test_error"] = "closed form through the addition theorem";
    conv["error_bars"] = "se = sample std / sqrt(trials); std listed per row";
    conv["gaussian_sampler"] = r.config.gaussian.sampler == GaussianSampler::dense ? "dense" : "compressed";
    j["conventions"] = conv;
    json rows = json::array();
    for (const CurveRow& row : r.rows) {
        json o;
        o["sweep_value"] = row.sweep_value;
        o["regime"] = to_string(row.regime);
        o["norm_convention"] = to_string(row.theory.norm_convention);
        o["bias"] = row.theory.bias;
        o["variance"] = row.theory.variance;
        o["B_norm"] = row.theory.B_norm;
        o["V_norm"] = row.theory.V_norm;
        o["staircase"] = row.theory.staircase;
        if (row.theory.fixed_point) {
            const auto& fp = *row.theory.fixed_point;
            o["fixed_point"] = {{"tau1", fp.tau1},           {"tau2", fp.tau2},
                                {"dtau1", fp.dtau1},         {"dtau2", fp.dtau2},
                                {"residual1", fp.residual1}, {"residual2", fp.residual2},
                                {"method", to_string(fp.method)}};
        }
        if (row.has_empirical) {
            o["emp_Rtest_std"] = row.test.std;
            o["emp_Rtrain_std"] = row.train.std;
            o["emp_Lnorm_std"] = row.norm.std;
            o["emp_gcv_std"] = row.gcv.std;
        }
        if (!row.warning.empty()) o["warning"] = row.warning;
        rows.push_back(o);
    }
    j["rows"] = rows;
    return j;
}

void write_outputs(const RunResult& r, const std::string& path, const std::string& command) {
    std::ofstream csv(path);
    if (!csv) throw ValidationError("cannot write '" + path + "'");
    write_csv(csv, r.rows);
    std::ofstream side(path + ".json");
    if (!side) throw ValidationError("cannot write '" + path + ".json'");
    side << sidecar(r, command).dump(2) << "\n";
}

double ks_two_sample(std::vector<double> a, std::vector<double> b) {
    if (a.empty() || b.empty()) throw ValidationError("KS distance needs two non-empty samples");
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    size_t i = 0, j = 0;
    double best = 0.0;
    while (i < a.size() && j < b.size()) {
        const double x = std::min(a[i], b[j]);
        while (i < a.size() && a[i] <= x) ++i;
        while (j < b.size() && b[j] <= x) ++j;
        best = std::max(best, std::abs(static_cast<double>(i) / a.size() - static_cast<double>(j) / b.size()));
    }
    return best;
}

double ks_against_cdf(std::vector<double> sample, const std::vector<double>& grid, const std::vector<double>& cdf) {
    if (sample.empty() || grid.size() != cdf.size() || grid.size() < 2)
        throw ValidationError("KS distance needs a sample and a CDF grid");
    std::sort(sample.begin(), sample.end());
    auto F = [&](double x) {
        if (x <= grid.front()) return cdf.front();
        if (x >= grid.back()) return cdf.back();
        const size_t k = std::upper_bound(grid.begin(), grid.end(), x) - grid.begin();
        const double t = (x - grid[k - 1]) / (grid[k] - grid[k - 1]);
        return cdf[k - 1] + t * (cdf[k] - cdf[k - 1]);
    };
    const double m = sample.size();
    double best = 0.0;
    for (size_t i = 0; i < sample.size(); ++i) {
        const double f = F(sample[i]);
        best = std::max({best, std::abs(f - i / m), std::abs(f - (i + 1) / m)});
    }
    return best;
}

SpectraResult cmd_spectra(const ExperimentConfig& c) {
    if (c.regime.d == 0) throw ValidationError("spectra need an explicit dimension d");
    if (c.model == Model::krr) throw ValidationError("spectra are defined for the random feature matrix");
    ExperimentConfig single = c;
    single.sweep.reset();
    const Point pt = resolve_point(single, std::nullopt, 0.0);
    if (!pt.reg.critical()) throw ValidationError("the spectral density is available for kappa1 = kappa2 only");
    const Models m = build_models(c, pt.reg.ell + 1);
    SimProblem prob;
    prob.d = pt.d;
    prob.n = static_cast<long>(pt.n);
    prob.p = static_cast<long>(pt.p);
    prob.lambda = pt.lambda;
    prob.noise_var = pt.noise_var;
    prob.activation = m.act;
    prob.target = m.target;
    const TrialAggregate rf = run_trials(prob, Model::rf, c.spectra.trials, c.base_seed, c.threads, c.gaussian, true);
    const TrialAggregate ga =
        run_trials(prob, Model::gaussian, c.spectra.trials, c.base_seed, c.threads, c.gaussian, true);
    SpectraResult res;
    res.config = c;
    res.rf_test = rf.test;
    res.gauss_test = ga.test;
    for (const auto& rec : rf.records)
        res.rf_values.insert(res.rf_values.end(), rec.singular_values.data(),
                             rec.singular_values.data() + rec.singular_values.size());
    for (const auto& rec : ga.records)
        res.gauss_values.insert(res.gauss_values.end(), rec.singular_values.data(),
                                rec.singular_values.data() + rec.singular_values.size());
    std::sort(res.rf_values.begin(), res.rf_values.end());
    std::sort(res.gauss_values.begin(), res.gauss_values.end());

    DensityParams dp;
    dp.theta1 = pt.p;
    dp.theta2 = pt.n;
    dp.mu_ell = m.act.coeff(pt.reg.ell, m.conv);
    dp.mu_tail = std::sqrt(m.act.tail_above(pt.reg.ell, m.conv));
    dp.psi = pt.reg.at_level() ? pt.reg.psi1 + pt.reg.psi2 : 0.0;
    const double top = std::max(res.rf_values.back(), res.gauss_values.back()) * 1.05;
    const int G = c.spectra.grid;
    res.grid.resize(G);
    for (int i = 0; i < G; ++i) res.grid[i] = top * i / (G - 1);
    res.density = singular_value_density(dp, res.grid, c.spectra.eta);
    std::vector<double> cdf(G, 0.0);
    for (int i = 1; i < G; ++i)
        cdf[i] = cdf[i - 1] + 0.5 * (res.density[i] + res.density[i - 1]) * (res.grid[i] - res.grid[i - 1]);

    double range = 0.0;
    if (c.spectra.range_max) {
        range = *c.spectra.range_max;
    } else {
        const double peak = *std::max_element(res.density.begin(), res.density.end());
        double edge = res.grid.back();
        for (int i = G - 1; i >= 0; --i)
            if (res.density[i] > 1e-4 * peak) {
                edge = res.grid[i];
                break;
            }
        range = 1.1 * edge;
    }
    const int B = c.spectra.bins;
    res.edges.resize(B + 1);
    for (int b = 0; b <= B; ++b) res.edges[b] = range * b / B;
    auto histogram = [&](const std::vector<double>& v, std::vector<double>& mass, double& overflow) {
        mass.assign(B, 0.0);
        double over = 0.0;
        for (double x : v) {
            if (x >= range) {
                over += 1.0;
                continue;
            }
            const int b = std::min(B - 1, static_cast<int>(x / range * B));
            mass[b] += 1.0;
        }
        for (double& x : mass) x /= v.size();
        overflow = over / v.size();
    };
    histogram(res.rf_values, res.rf_mass, res.rf_overflow);
    histogram(res.gauss_values, res.gauss_mass, res.gauss_overflow);
    auto cdf_at = [&](double x) {
        if (x >= res.grid.back()) return cdf.back();
        const size_t k = std::upper_bound(res.grid.begin(), res.grid.end(), x) - res.grid.begin();
        const double t = (x - res.grid[k - 1]) / (res.grid[k] - res.grid[k - 1]);
        return cdf[k - 1] + t * (cdf[k] - cdf[k - 1]);
    };
    res.theory_mass.resize(B);
    for (int b = 0; b < B; ++b) res.theory_mass[b] = cdf_at(res.edges[b + 1]) - cdf_at(res.edges[b]);
    res.theory_overflow = std::max(0.0, cdf.back() - cdf_at(range));
    res.ks_rf_gauss = ks_two_sample(res.rf_values, res.gauss_values);
    res.ks_rf_theory = ks_against_cdf(res.rf_values, res.grid, cdf);
    res.ks_gauss_theory = ks_against_cdf(res.gauss_values, res.grid, cdf);
    return res;
}

void write_spectra(const SpectraResult& r, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw ValidationError("cannot write '" + path + "'");
    os << "bin_lo,bin_hi,rf_mass,gauss_mass,theory_mass,rf_density,gauss_density,theory_density\n";
    const size_t B = r.rf_mass.size();
    for (size_t b = 0; b < B; ++b) {
        const double w = r.edges[b + 1] - r.edges[b];
        os << fmt_num(r.edges[b]) << "," << fmt_num(r.edges[b + 1]) << "," << fmt_num(r.rf_mass[b]) << ","
           << fmt_num(r.gauss_mass[b]) << "," << fmt_num(r.theory_mass[b]) << "," << fmt_num(r.rf_mass[b] / w) << ","
           << fmt_num(r.gauss_mass[b] / w) << "," << fmt_num(r.theory_mass[b] / w) << "\n";
    }
    os << fmt_num(r.edges.back()) << ",inf," << fmt_num(r.rf_overflow) << "," << fmt_num(r.gauss_overflow) << ","
       << fmt_num(r.theory_overflow) << ",,,\n";
    const std::string dpath = path + ".density.csv";
    std::ofstream ds(dpath);
    if (!ds) throw ValidationError("cannot write '" + dpath + "'");
    ds << "singular_value,density\n";
    for (size_t i = 0; i < r.grid.size(); ++i) ds << fmt_num(r.grid[i]) << "," << fmt_num(r.density[i]) << "\n";
    json j;
    j["command"] = "spectra";
    j["version"] = kVersion;
    j["config"] = config_to_json(r.config);
    j["samples"] = {{"rf", r.rf_values.size()}, {"gaussian", r.gauss_values.size()}};
    j["test_error"] = {{"rf_mean", r.rf_test.mean},
                       {"rf_se", r.rf_test.stderr_},
                       {"gaussian_mean", r.gauss_test.mean},
                       {"gaussian_se", r.gauss_test.stderr_}};
    j["ks"] = {{"rf_vs_gaussian", r.ks_rf_gauss}, {"rf_vs_theory", r.ks_rf_theory},
               {"gaussian_vs_theory", r.ks_gauss_theory}};
    j["conventions"] = {{"coefficients", to_string(effective_convention(r.config))},
                        {"histogram", "mass per bin; the last row collects values beyond the range"},
                        {"density", "nonzero singular values, unit mass"}};
    std::ofstream side(path + ".json");
    side << j.dump(2) << "\n";
}

json verify_report(const std::vector<CheckResult>& checks) {
    json j;
    j["version"] = kVersion;
    bool all = true;
    json a = json::array();
    for (const auto& c : checks) {
        all = all && c.passed;
        a.push_back({{"name", c.name},
                     {"passed", c.passed},
                     {"observed", c.observed},
                     {"tolerance", c.tolerance},
                     {"detail", c.detail}});
    }
    j["checks"] = a;
    j["passed"] = all;
    return j;
}

const std::vector<std::string>& figure_ids() {
    static const std::vector<std::string> ids = {"fig_critical", "fig_overunder", "fig_norm",
                                                 "fig_optlambda", "fig_spectra", "fig_biasvar"};
    return ids;
}

}  // namespace rfrr
