// Command-line front end: every subcommand parses options, calls the
// library and serialises the result.

#include <cstdint>
#include <exception>
#include <iostream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "mmlearn/mmlearn.hpp"

namespace {

using namespace mmlearn;
using io::json;

struct SignificanceFlags {
    double alpha = 0.05;
    double unclustered_partial_alpha = kDefaultUnclusteredPartialAlpha;
    std::string test = "wishart";
    bool population = false;
    std::size_t comparisons = 1;

    void attach(CLI::App* app) {
        app->add_option("--alpha", alpha, "level for tetrad and correlation tests")->capture_default_str();
        app->add_option("--unclustered-partial-alpha", unclustered_partial_alpha,
                        "level for the partial correlation clause of Unclustered")->capture_default_str();
        app->add_option("--test", test, "tetrad test")->check(CLI::IsMember({"wishart", "bollen"}))->capture_default_str();
        app->add_flag("--population", population, "treat the covariance as exact (threshold 1e-9)");
        app->add_option("--comparisons", comparisons, "Bonferroni divisor for alpha")->capture_default_str();
    }
    SignificanceConfig config() const {
        SignificanceConfig c{alpha, parse_test_kind(test), population, comparisons, unclustered_partial_alpha};
        c.validate();
        return c;
    }
};

struct MomentInput {
    std::string data, cov;
    std::size_t n = 0;

    void attach(CLI::App* app) {
        auto* d = app->add_option("--data", data, "dataset CSV with a header row");
        auto* c = app->add_option("--cov", cov, "covariance CSV with a header row");
        d->excludes(c);
        app->add_option("--n", n, "sample size behind --cov");
    }
    MomentCache load(bool with_fourth) const {
        if (!data.empty()) return build_moments(io::read_dataset_csv(data), with_fourth);
        if (cov.empty()) throw std::invalid_argument("one of --data or --cov is required");
        if (with_fourth) throw std::invalid_argument("the Bollen test needs --data (fourth moments)");
        if (n == 0) throw std::invalid_argument("--cov requires --n");
        return io::read_covariance_csv(cov, n);
    }
};

void emit(const std::string& path, const json& j) {
    if (path.empty() || path == "-")
        std::cout << j.dump(2) << "\n";
    else
        io::write_json(path, j);
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    for (std::string item; std::getline(ss, item, ',');) out.push_back(item);
    return out;
}

ImpuritySpec parse_impurities(const std::string& s) {
    auto parts = split_list(s);
    if (parts.size() != 3) throw std::invalid_argument("--impurities expects three counts: correlated,direct,cross");
    std::vector<std::size_t> v;
    for (const auto& p : parts) {
        std::size_t used = 0;
        long long x = -1;
        try {
            x = std::stoll(p, &used);
        } catch (const std::exception&) {
        }
        if (x < 0 || used != p.size()) throw std::invalid_argument("bad impurity count '" + p + "'");
        v.push_back(static_cast<std::size_t>(x));
    }
    return {v[0], v[1], v[2]};
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Learn pure measurement models from vanishing tetrad constraints"};
    app.require_subcommand(1);

    // discover
    auto* discover = app.add_subcommand("discover", "build a measurement pattern from data or a covariance matrix");
    MomentInput disc_in;
    SignificanceFlags disc_sig;
    bool disc_link = true;
    std::string disc_out;
    disc_in.attach(discover);
    disc_sig.attach(discover);
    discover->add_option("--link-on-uncorrelated", disc_link,
                         "also link latents whose indicator triples are mutually uncorrelated")
        ->capture_default_str();
    discover->add_option("--out", disc_out, "pattern JSON (stdout if omitted)");

    // purify
    auto* purify = app.add_subcommand("purify", "enumerate pure measurement models of a pattern");
    std::string pur_pattern, pur_out;
    std::size_t pur_min = 3;
    purify->add_option("--pattern", pur_pattern, "pattern JSON")->required();
    purify->add_option("--min-children", pur_min, "indicators required per latent")->capture_default_str();
    purify->add_option("--out", pur_out, "models JSON (stdout if omitted)");

    // simulate
    auto* simulate = app.add_subcommand("simulate", "generate a ground-truth graph and a dataset");
    int sim_study = 1;
    std::size_t sim_m = 5, sim_n = 4, sim_samples = 1000;
    std::string sim_impurities, sim_prefix;
    std::uint64_t sim_seed = 1;
    simulate->add_option("--study", sim_study, "study preset")->check(CLI::IsMember({1, 2, 3}))->capture_default_str();
    simulate->add_option("--m", sim_m, "latents")->capture_default_str();
    simulate->add_option("--n", sim_n, "indicators per latent")->capture_default_str();
    simulate->add_option("--samples", sim_samples, "rows")->capture_default_str();
    simulate->add_option("--impurities", sim_impurities, "counts correlated,direct,cross (overrides the preset)");
    simulate->add_option("--seed", sim_seed, "random seed")->capture_default_str();
    simulate->add_option("--out-prefix", sim_prefix, "writes PREFIX.csv, PREFIX_truth.json, PREFIX_params.json")
        ->required();

    // evaluate
    auto* evaluate = app.add_subcommand("evaluate", "score an estimated model against a ground truth");
    std::string ev_est, ev_truth, ev_out;
    evaluate->add_option("--est", ev_est, "models JSON; the largest model is scored")->required();
    evaluate->add_option("--truth", ev_truth, "ground-truth or graph JSON")->required();
    evaluate->add_option("--out", ev_out, "report JSON (stdout if omitted)");

    // replicate
    auto* replicate = app.add_subcommand("replicate", "simulate, discover, purify and score over many trials");
    int rep_study = 1;
    std::size_t rep_m = 5, rep_n = 4, rep_samples = 0, rep_trials = 10, rep_min = 3, rep_jobs = 1;
    std::uint64_t rep_seed = 1;
    std::string rep_out, rep_impurities;
    SignificanceFlags rep_sig;
    bool rep_link = true;
    replicate->add_option("--study", rep_study, "study preset")->check(CLI::IsMember({1, 2, 3}))->capture_default_str();
    replicate->add_option("--m", rep_m, "latents")->capture_default_str();
    replicate->add_option("--n", rep_n, "indicators per latent")->capture_default_str();
    replicate->add_option("--samples", rep_samples, "rows per trial (default 1000, 5000 for study 3)");
    replicate->add_option("--impurities", rep_impurities, "counts correlated,direct,cross (overrides the preset)");
    replicate->add_option("--trials", rep_trials, "trials")->capture_default_str();
    replicate->add_option("--seed", rep_seed, "master seed")->capture_default_str();
    replicate->add_option("--min-children", rep_min, "indicators required per latent")->capture_default_str();
    replicate->add_option("--jobs", rep_jobs, "worker threads")->capture_default_str();
    replicate->add_option("--link-on-uncorrelated", rep_link, "see discover")->capture_default_str();
    rep_sig.attach(replicate);
    replicate->add_option("--out", rep_out, "table JSON");

    // test-tetrad
    auto* tt = app.add_subcommand("test-tetrad", "test the three tetrad constraints of four variables");
    MomentInput tt_in;
    SignificanceFlags tt_sig;
    std::string tt_vars;
    tt_in.attach(tt);
    tt_sig.attach(tt);
    tt->add_option("--vars", tt_vars, "A,B,C,D")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    try {
        if (*discover) {
            const auto sig = disc_sig.config();
            const auto moments = disc_in.load(sig.test_kind == TestKind::bollen && !sig.population_mode);
            MomentOracle oracle(moments, sig);
            const auto p = find_measurement_pattern(oracle, PatternOptions{disc_link});
            emit(disc_out, io::to_json(p));
        } else if (*purify) {
            const auto p = io::pattern_from_json(io::read_json(pur_pattern));
            const auto r = purify_pattern(p, PurifyOptions{pur_min});
            if (r.solutions.empty()) std::cerr << "purify: " << r.diagnostic << "\n";
            emit(pur_out, io::to_json(r));
        } else if (*simulate) {
            auto cfg = study_preset(sim_study, sim_m, sim_n, sim_samples);
            if (!sim_impurities.empty()) cfg.impurities = parse_impurities(sim_impurities);
            cfg.seed = sim_seed;
            cfg.trials = 1;
            cfg.validate();
            const auto input = simulate_trial(cfg, 0);
            {
                auto f = io::detail::open_out(sim_prefix + ".csv");
                io::write_dataset_csv(f, input.data);
            }
            auto truth = io::to_json(input.truth);
            io::write_json(sim_prefix + "_params.json", truth["params"]);
            truth.erase("params");
            io::write_json(sim_prefix + "_truth.json", truth);
        } else if (*evaluate) {
            const auto models = io::models_from_json(io::read_json(ev_est));
            const auto truth = io::truth_from_json(io::read_json(ev_truth));
            const auto* best = select_largest(models);
            emit(ev_out, io::to_json(score_output(best ? *best : PureMeasurementModel{}, truth)));
        } else if (*replicate) {
            auto cfg = study_preset(rep_study, rep_m, rep_n, rep_samples ? rep_samples : (rep_study == 3 ? 5000 : 1000));
            if (!rep_impurities.empty()) cfg.impurities = parse_impurities(rep_impurities);
            cfg.trials = rep_trials;
            cfg.seed = rep_seed;
            RunConfig run{rep_sig.config(), rep_link, rep_min, rep_jobs};
            const auto table = run_replication(cfg, run);
            std::cout << format_table(table);
            if (!rep_out.empty()) io::write_json(rep_out, io::to_json(table));
            if (table.failed) return 2;
        } else if (*tt) {
            const auto sig = tt_sig.config();
            const auto moments = tt_in.load(sig.test_kind == TestKind::bollen && !sig.population_mode);
            const auto vars = split_list(tt_vars);
            if (vars.size() != 4) throw std::invalid_argument("--vars expects exactly four labels");
            json out = json::array();
            for (auto k : kAllTetradKinds) {
                const auto t = make_tetrad(moments, {vars[0], vars[1], vars[2], vars[3]}, k);
                json row{{"constraint", to_string(k)}, {"difference", tetrad_difference(moments, t)}};
                if (!sig.population_mode)
                    row["statistic"] = sig.test_kind == TestKind::wishart ? wishart_statistic(moments, t)
                                                                           : bollen_statistic(moments, t);
                row["holds"] = test_tetrad(moments, t, sig) == TetradDecision::holds;
                out.push_back(row);
            }
            std::cout << out.dump(2) << "\n";
        }
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
