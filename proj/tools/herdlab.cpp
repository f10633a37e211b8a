// herdlab: command-line front end.
//
//   herdlab <dist|path|herdprob|oracle|simulate|tau|sweep> [flags]
//
// Exit status: 0 on success, 1 on a runtime failure or any failed sweep
// cell, 2 on a usage or configuration error.

#include <chrono>
#include <fstream>
#include <iostream>
#include <sstream>
#include <utility>

#include <CLI11.hpp>

#include "herdlab/herdlab.hpp"

namespace {

using herdlab::json;

struct Flags {
    std::string config_file;
    std::optional<double> alpha, alpha_tilde, prior;
    std::optional<long long> horizon, trials, depth, grid, herd_n, workers;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> state, herd, out, raw_out;
    std::optional<std::vector<double>> alpha_list, alpha_tilde_list, priors;
};

json flags_to_json(const std::string& mode, const Flags& f) {
    json j;
    j["mode"] = mode;
    auto put = [&](const char* key, const auto& v) {
        if (v) j[key] = *v;
    };
    put("alpha", f.alpha);
    put("alpha_tilde", f.alpha_tilde);
    put("prior", f.prior);
    put("horizon", f.horizon);
    put("trials", f.trials);
    put("depth", f.depth);
    put("grid", f.grid);
    put("herd_n", f.herd_n);
    put("workers", f.workers);
    put("seed", f.seed);
    put("state", f.state);
    put("herd", f.herd);
    put("out", f.out);
    put("raw_out", f.raw_out);
    put("alpha_list", f.alpha_list);
    put("alpha_tilde_list", f.alpha_tilde_list);
    put("priors", f.priors);
    return j;
}

json load_config_file(const std::string& path) {
    if (path.empty()) return json::object();
    std::ifstream in(path);
    if (!in) throw herdlab::ConfigError("config: cannot open " + path);
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw herdlab::ConfigError("config: " + path + ": " + e.what());
    }
}

void write_text(const std::string& path, const std::string& body) {
    if (path.empty()) {
        std::cout << body;
        std::cout.flush();
        return;
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open output file " + path);
    out << body;
    if (!out) throw std::runtime_error("write failed: " + path);
}

void add_common(CLI::App* sub, Flags& f) {
    sub->add_option("--config", f.config_file, "JSON config file; flags override its keys");
    sub->add_option("--alpha", f.alpha, "true tail exponent");
    sub->add_option("--alpha-tilde", f.alpha_tilde, "perceived tail exponent");
    sub->add_option("--prior", f.prior, "prior probability of the high state");
    sub->add_option("--horizon", f.horizon, "number of agents");
    sub->add_option("--trials", f.trials, "Monte Carlo trials");
    sub->add_option("--seed", f.seed, "master seed");
    sub->add_option("--depth", f.depth, "oracle tree depth");
    sub->add_option("--grid", f.grid, "dist grid points");
    sub->add_option("--herd-n", f.herd_n, "truncation for sweep herd bounds");
    sub->add_option("--state", f.state, "high, low, or prior");
    sub->add_option("--herd", f.herd, "herd action for herdprob: high or low");
    sub->add_option("--out", f.out, "output path (stdout if omitted)");
    sub->add_option("--raw", f.raw_out, "per-trial CSV path (simulate)");
    sub->add_option("--workers", f.workers, "worker threads (default: HERDLAB_WORKERS or hardware)");
    sub->add_option("--alpha-list", f.alpha_list, "sweep grid over alpha")->delimiter(',');
    sub->add_option("--alpha-tilde-list", f.alpha_tilde_list, "sweep grid over alpha tilde")->delimiter(',');
    sub->add_option("--priors", f.priors, "tau experiment priors")->delimiter(',');
}

int run(const herdlab::ExperimentConfig& cfg) {
    using herdlab::Mode;
    int status = 0;
    std::string body;
    switch (cfg.mode) {
        case Mode::Dist: body = herdlab::dist_csv(cfg); break;
        case Mode::Path: body = herdlab::path_csv(cfg); break;
        case Mode::HerdProb: body = herdlab::herdprob_csv(cfg); break;
        case Mode::Oracle: body = herdlab::oracle_json(cfg).dump(2) + "\n"; break;
        case Mode::Tau: body = herdlab::tau_csv(cfg); break;
        case Mode::Simulate: {
            const auto batch = herdlab::run_batch(herdlab::trial_template(cfg), cfg.n_trials, cfg.workers);
            body = herdlab::to_json(batch.summary).dump(2) + "\n";
            if (!cfg.raw_output_path.empty())
                write_text(cfg.raw_output_path, herdlab::trials_csv(batch.results));
            break;
        }
        case Mode::Sweep: {
            const auto cells = herdlab::run_sweep(cfg);
            body = herdlab::sweep_csv(cells);
            for (const auto& c : cells) {
                if (c.error.empty()) continue;
                std::cerr << "herdlab: cell (" << c.alpha << ", " << c.alpha_tilde << ") failed: " << c.error << "\n";
                status = 1;
            }
            break;
        }
    }
    write_text(cfg.output_path, body);
    return status;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"herdlab: numerical laboratory for misspecified sequential social learning"};
    app.set_version_flag("--version", HERDLAB_VERSION);
    app.require_subcommand(1);
    Flags flags;
    const std::pair<const char*, const char*> commands[] = {
        {"dist", "tabulate F, F_low and F_high on a grid"},
        {"path", "log-odds along the all-High path"},
        {"herdprob", "immediate herd probability bounds by decade"},
        {"oracle", "exact action-tree summary to a fixed depth"},
        {"simulate", "Monte Carlo batch of trials"},
        {"tau", "first-correct time against the prior"},
        {"sweep", "Monte Carlo over an (alpha, alpha~) grid"},
    };
    for (const auto& [name, desc] : commands) add_common(app.add_subcommand(name, desc), flags);
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }
    const std::string mode = app.get_subcommands().front()->get_name();

    herdlab::ExperimentConfig cfg;
    try {
        cfg = herdlab::parse_config(load_config_file(flags.config_file), flags_to_json(mode, flags));
    } catch (const std::exception& e) {
        std::cerr << "herdlab: " << e.what() << "\n";
        return 2;
    }

    const auto start = std::chrono::steady_clock::now();
    int status = 0;
    try {
        status = run(cfg);
    } catch (const std::exception& e) {
        std::cerr << "herdlab: " << e.what() << "\n";
        return 1;
    }
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (!cfg.output_path.empty()) {
        try {
            write_text(cfg.output_path + ".meta.json", herdlab::run_metadata(cfg, wall).dump(2) + "\n");
        } catch (const std::exception& e) {
            std::cerr << "herdlab: " << e.what() << "\n";
            return 1;
        }
    }
    return status;
}
