#include "rfrr/errors.hpp"
#include "rfrr/experiments.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <thread>

using namespace rfrr;

namespace {

struct Overrides {
    std::optional<int> trials;
    std::optional<std::uint64_t> seed;
    std::optional<int> threads;
};

int resolve_threads(int t) {
    if (t > 0) return t;
    return std::max(1u, std::thread::hardware_concurrency());
}

void apply(ExperimentConfig& c, const Overrides& o) {
    if (o.trials) {
        if (*o.trials < 0) throw ValidationError("--trials must be non-negative");
        c.trials = *o.trials;
    }
    if (o.seed) c.base_seed = *o.seed;
    if (o.threads) c.threads = resolve_threads(*o.threads);
    if (c.threads == 0) c.threads = resolve_threads(0);
}

void print_rows(const RunResult& r) {
    for (const auto& row : r.rows)
        if (!row.warning.empty()) {
            std::cerr << "warning: " << row.warning << "\n";
            break;
        }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Random feature ridge regression: asymptotic predictions and simulations"};
    app.require_subcommand(1);

    std::string config_path, out_path, figure = "all", out_dir = "results", fault;
    double scale = 1.0;
    Overrides ov;

    auto add_common = [&](CLI::App* sub, bool sim) {
        sub->add_option("--config", config_path, "JSON configuration")->required()->check(CLI::ExistingFile);
        sub->add_option("--out", out_path, "output CSV (a .json sidecar is written next to it)")->required();
        if (sim) {
            sub->add_option("--trials", ov.trials, "number of Monte Carlo trials");
            sub->add_option("--seed", ov.seed, "base seed; trial t uses seed + t");
            sub->add_option("--threads", ov.threads, "worker threads (0 = auto)");
        }
    };
    auto* predict = app.add_subcommand("predict", "theory curves only");
    add_common(predict, false);
    auto* simulate = app.add_subcommand("simulate", "theory plus Monte Carlo trials");
    add_common(simulate, true);
    auto* spectra = app.add_subcommand("spectra", "singular value histograms against the limiting density");
    add_common(spectra, true);
    auto* verify = app.add_subcommand("verify", "run the consistency checks");
    verify->add_option("--out", out_path, "write the JSON report here");
    verify->add_option("--seed", ov.seed, "seed for the randomized checks");
    verify->add_option("--inject-fault", fault, "corrupt a component to confirm the checks notice")
        ->check(CLI::IsMember({"zeta-sign"}));
    auto* reproduce = app.add_subcommand("reproduce", "regenerate the CSV bundle of a figure");
    reproduce->add_option("--figure", figure, "figure id or 'all'");
    reproduce->add_option("--out", out_dir, "output directory");
    reproduce->add_option("--scale", scale, "multiplier on the dimension d");
    reproduce->add_option("--trials", ov.trials, "override the preset trial count");
    reproduce->add_option("--seed", ov.seed, "override the preset base seed");
    reproduce->add_option("--threads", ov.threads, "worker threads (0 = auto)");
    auto* list = app.add_subcommand("list", "print the figure ids");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 1;
    }

    try {
        if (*predict || *simulate) {
            ExperimentConfig c = load_config(config_path);
            apply(c, ov);
            const bool sim = simulate->parsed();
            const RunResult r = sim ? cmd_simulate(c) : cmd_predict(c);
            write_outputs(r, out_path, sim ? "simulate" : "predict");
            print_rows(r);
            std::cout << "wrote " << r.rows.size() << " rows to " << out_path << "\n";
        } else if (*spectra) {
            ExperimentConfig c = load_config(config_path);
            apply(c, ov);
            const SpectraResult r = cmd_spectra(c);
            write_spectra(r, out_path);
            std::cout << "KS rf/gaussian " << r.ks_rf_gauss << ", rf/theory " << r.ks_rf_theory
                      << ", gaussian/theory " << r.ks_gauss_theory << "\n";
        } else if (*verify) {
            VerifyOptions opt;
            opt.flip_zeta_sign = fault == "zeta-sign";
            if (ov.seed) opt.seed = *ov.seed;
            const auto checks = cmd_verify(opt);
            bool ok = true;
            for (const auto& c : checks) {
                std::cout << (c.passed ? "PASS " : "FAIL ") << c.name << ": " << c.detail << "\n";
                ok = ok && c.passed;
            }
            if (!out_path.empty()) std::ofstream(out_path) << verify_report(checks).dump(2) << "\n";
            return ok ? 0 : 2;
        } else if (*reproduce) {
            std::vector<std::string> ids;
            if (figure == "all")
                ids = figure_ids();
            else
                ids = {figure};
            std::filesystem::create_directories(out_dir);
            for (const auto& id : ids) {
                for (Preset& p : figure_preset(id, scale)) {
                    if (ov.trials && p.config.trials > 0) p.config.trials = *ov.trials;
                    if (ov.seed) p.config.base_seed = *ov.seed;
                    p.config.threads = resolve_threads(ov.threads.value_or(0));
                    const std::string path = (std::filesystem::path(out_dir) / (p.name + ".csv")).string();
                    std::cout << "running " << p.name << " ..." << std::flush;
                    if (p.spectra) {
                        write_spectra(cmd_spectra(p.config), path);
                    } else {
                        const RunResult r = p.config.trials > 0 ? cmd_simulate(p.config) : cmd_predict(p.config);
                        write_outputs(r, path, "reproduce " + id);
                    }
                    std::cout << " " << path << "\n";
                }
            }
        } else if (*list) {
            for (const auto& id : figure_ids()) std::cout << id << "\n";
        }
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
