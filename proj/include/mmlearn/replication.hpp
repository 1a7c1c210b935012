#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <iomanip>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "mmlearn/evaluation.hpp"
#include "mmlearn/oracle.hpp"
#include "mmlearn/pattern.hpp"
#include "mmlearn/purification.hpp"
#include "mmlearn/simulation.hpp"
#include "mmlearn/stats.hpp"

namespace mmlearn {

/// Level of the Unclustered partial correlation clause used by the
/// command-line tool and the study harness.
inline constexpr double kDefaultUnclusteredPartialAlpha = 0.9;

inline SignificanceConfig default_run_significance() {
    SignificanceConfig s;
    s.unclustered_partial_alpha = kDefaultUnclusteredPartialAlpha;
    return s;
}

/// Settings shared by every step of a run; randomness comes from the study seed.
struct RunConfig {
    SignificanceConfig significance = default_run_significance();
    bool link_on_uncorrelated = true;
    std::size_t min_children = 3;
    std::size_t jobs = 1;
    /// Aborted-trial fraction above which the run fails.
    double max_abort_fraction = 0.2;

    void validate() const {
        significance.validate();
        if (min_children < 1) throw std::invalid_argument("min_children must be positive");
        if (jobs < 1) throw std::invalid_argument("jobs must be positive");
    }
};

/// Configurations of the three simulation studies. Study 3 always uses the
/// diamond fixture, so m and n are ignored there.
inline StudyConfig study_preset(int study, std::size_t m = 5, std::size_t n = 4, std::size_t samples = 1000) {
    StudyConfig cfg;
    cfg.n_latents = m;
    cfg.indicators_per_latent = n;
    cfg.sample_size = samples;
    cfg.avg_latent_degree = m <= 5 ? 2.0 : 4.0;
    switch (study) {
        case 1: break;
        case 2: cfg.impurities = ImpuritySpec{1, 1, 1}; break;
        case 3:
            cfg.n_latents = 4;
            cfg.indicators_per_latent = 4;
            cfg.nonlinear = true;
            break;
        default: throw std::invalid_argument("study must be 1, 2 or 3");
    }
    return cfg;
}

struct TrialInput {
    GroundTruth truth;
    Dataset data;
};

/// Ground truth and data for one trial; trial seeds are mixed from cfg.seed.
inline TrialInput simulate_trial(const StudyConfig& cfg, std::size_t trial) {
    const auto base = mix_seed(cfg.seed, trial);
    if (cfg.nonlinear) {
        auto s = sample_study3(cfg.sample_size, base);
        return {std::move(s.truth), std::move(s.data)};
    }
    StudyConfig c = cfg;
    c.seed = mix_seed(base, 0);
    auto gt = random_purifiable_graph(c);
    auto data = sample_linear(gt, cfg.sample_size, mix_seed(base, 1));
    return {std::move(gt), std::move(data)};
}

struct PipelineOutput {
    MeasurementPattern pattern;
    PurificationResult purification;
    std::optional<PureMeasurementModel> selected;
};

/// discover -> purify -> select on one dataset.
inline PipelineOutput run_pipeline(const Dataset& data, const RunConfig& run) {
    const auto moments = build_moments(data, run.significance.test_kind == TestKind::bollen);
    MomentOracle oracle(moments, run.significance);
    PipelineOutput out;
    out.pattern = find_measurement_pattern(oracle, PatternOptions{run.link_on_uncorrelated});
    out.purification = purify_pattern(out.pattern, PurifyOptions{run.min_children});
    const auto models = out.purification.models();
    if (const auto* best = select_largest(models)) out.selected = *best;
    return out;
}

struct TrialResult {
    std::size_t trial = 0;
    std::optional<EvaluationReport> report;
    std::string error;  // non-empty when aborted
};

struct MetricSummary {
    double mean = 0;
    double sd = 0;
};

struct StudyTable {
    StudyConfig config;
    RunConfig run;
    std::vector<TrialResult> trials;
    std::map<std::string, MetricSummary> metrics;
    std::vector<std::string> metric_order;
    std::size_t aborted = 0;
    std::size_t ties = 0;
    bool failed = false;
};

inline const std::vector<std::string>& metric_names() {
    static const std::vector<std::string> names{"missing_latents", "missing_indicators", "misplaced_indicators",
                                                "impurities"};
    return names;
}

inline double metric_value(const EvaluationReport& r, const std::string& name) {
    if (name == "missing_latents") return r.missing_latents;
    if (name == "missing_indicators") return r.missing_indicators;
    if (name == "misplaced_indicators") return r.misplaced_indicators;
    if (name == "impurities") return r.impurities;
    throw std::invalid_argument("unknown metric '" + name + "'");
}

inline TrialResult run_trial(const StudyConfig& cfg, const RunConfig& run, std::size_t trial) {
    TrialResult res;
    res.trial = trial;
    try {
        const auto input = simulate_trial(cfg, trial);
        const auto out = run_pipeline(input.data, run);
        res.report = score_output(out.selected.value_or(PureMeasurementModel{}), input.truth);
    } catch (const std::exception& e) {
        res.error = e.what();
    }
    return res;
}

/// All trials of a study; rows are metrics, mean and sample SD over the
/// completed trials.
inline StudyTable run_replication(const StudyConfig& cfg, const RunConfig& run) {
    cfg.validate();
    run.validate();
    StudyTable t;
    t.config = cfg;
    t.run = run;
    t.trials.resize(cfg.trials);

    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (auto i = next++; i < cfg.trials; i = next++) t.trials[i] = run_trial(cfg, run, i);
    };
    const auto workers = std::min(run.jobs, cfg.trials);
    if (workers <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }

    const bool with_impurities = cfg.nonlinear || cfg.impurities.total() > 0;
    for (const auto& m : metric_names())
        if (m != "impurities" || with_impurities) t.metric_order.push_back(m);

    std::vector<const EvaluationReport*> done;
    for (const auto& tr : t.trials) {
        if (tr.report) {
            done.push_back(&*tr.report);
            t.ties += tr.report->match.ties;
        } else {
            ++t.aborted;
        }
    }
    for (const auto& m : t.metric_order) {
        MetricSummary s;
        if (!done.empty()) {
            for (auto* r : done) s.mean += metric_value(*r, m);
            s.mean /= static_cast<double>(done.size());
            if (done.size() > 1) {
                for (auto* r : done) s.sd += std::pow(metric_value(*r, m) - s.mean, 2);
                s.sd = std::sqrt(s.sd / static_cast<double>(done.size() - 1));
            }
        }
        t.metrics[m] = s;
    }
    t.failed = done.empty() ||
               static_cast<double>(t.aborted) > run.max_abort_fraction * static_cast<double>(cfg.trials);
    return t;
}

inline std::string format_table(const StudyTable& t) {
    std::ostringstream os;
    const auto& c = t.config;
    os << (c.nonlinear ? "non-linear diamond model" : std::to_string(c.n_latents) + " latents, " +
                                                          std::to_string(c.indicators_per_latent) + " indicators")
       << (c.impurities.total() > 0 ? " + impurities" : "") << ", N=" << c.sample_size << ", " << c.trials
       << " trials, " << to_string(t.run.significance.test_kind) << " test, alpha=" << t.run.significance.alpha
       << "\n";
    os << std::fixed << std::setprecision(2);
    for (const auto& m : t.metric_order) {
        std::string label = m;
        std::replace(label.begin(), label.end(), '_', ' ');
        const auto& s = t.metrics.at(m);
        os << "  " << std::left << std::setw(22) << label << std::right << s.mean << " +/- " << s.sd << "\n";
    }
    os << "  completed " << (t.trials.size() - t.aborted) << "/" << t.trials.size() << " trials";
    if (t.ties) os << ", " << t.ties << " matching ties";
    os << "\n";
    for (const auto& tr : t.trials)
        if (!tr.error.empty()) os << "  trial " << tr.trial << " aborted: " << tr.error << "\n";
    if (t.failed) os << "  RUN FAILED: too many aborted trials\n";
    return os.str();
}

}  // namespace mmlearn
