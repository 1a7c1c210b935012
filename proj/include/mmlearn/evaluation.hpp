#pragma once

#include <algorithm>
#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "mmlearn/graph.hpp"
#include "mmlearn/simulation.hpp"

namespace mmlearn {

struct LatentMatch {
    /// Estimated latent -> true latent; nullopt when the cluster has no
    /// indicator with a latent ancestor.
    std::map<std::string, std::optional<std::string>> latent_map;
    std::size_t ties = 0;
};

/// Each estimated latent goes to the true latent that is an immediate latent
/// ancestor of the most of its indicators. Ties go to the first true latent
/// in graph order and are counted.
inline LatentMatch match_latents(const PureMeasurementModel& est, const LatentVariableGraph& truth) {
    LatentMatch out;
    const auto true_latents = truth.latent_indices();
    for (const auto& [latent, children] : est.clusters) {
        std::map<std::size_t, std::size_t> votes;
        for (const auto& o : children) {
            auto idx = truth.find(o);
            if (!idx || truth.kind(*idx) != NodeKind::observed)
                throw std::invalid_argument("estimated indicator '" + o + "' is not an observed variable of the truth");
            for (auto l : immediate_latent_ancestors(truth, *idx)) ++votes[l];
        }
        std::size_t best = 0, count = 0, tied = 0;
        for (auto l : true_latents) {
            auto it = votes.find(l);
            if (it == votes.end()) continue;
            if (it->second > count) {
                best = l;
                count = it->second;
                tied = 1;
            } else if (it->second == count) {
                ++tied;
            }
        }
        if (count == 0) {
            out.latent_map[latent] = std::nullopt;
            continue;
        }
        if (tied > 1) ++out.ties;
        out.latent_map[latent] = truth.label(best);
    }
    return out;
}

/// A localized impurity: one indicator with several latent ancestors (or
/// otherwise unusable), or a pair of usable indicators that cannot coexist.
using ImpurityUnit = std::vector<std::string>;

inline std::vector<ImpurityUnit> impurity_units(const LatentVariableGraph& g) {
    const auto a = analyze_purity(g);
    std::vector<ImpurityUnit> out;
    const auto n = a.observed.size();
    for (std::size_t i = 0; i < n; ++i)
        if (!a.eligible[i]) out.push_back({g.label(a.observed[i])});
    for (std::size_t i = 0; i < n; ++i) {
        if (!a.eligible[i]) continue;
        for (std::size_t j = i + 1; j < n; ++j)
            if (a.eligible[j] && !a.compatible[i][j])
                out.push_back({g.label(a.observed[i]), g.label(a.observed[j])});
    }
    return out;
}

struct EvaluationReport {
    double missing_latents = 0;
    double missing_indicators = 0;
    double misplaced_indicators = 0;
    double impurities = 0;
    LatentMatch match;
    std::size_t reference_index = 0;      // chosen true purification
    std::size_t reference_candidates = 0;
    std::vector<std::string> flags;       // zero-denominator notes
};

namespace detail {
inline double ratio(std::size_t num, std::size_t den, const char* what, std::vector<std::string>& flags) {
    if (den == 0) {
        flags.push_back(std::string(what) + ": zero denominator");
        return 0.0;
    }
    return static_cast<double>(num) / static_cast<double>(den);
}
}  // namespace detail

/// Score `est` against the true graph. `references` are the true maximal
/// purifications; the one sharing the most indicators with `est` is used
/// (first in the given order on ties).
inline EvaluationReport score_output(const PureMeasurementModel& est, const LatentVariableGraph& truth,
                                     const std::vector<PureMeasurementModel>& references) {
    if (references.empty()) throw std::invalid_argument("score_output needs at least one true purification");
    EvaluationReport r;
    r.match = match_latents(est, truth);
    const auto est_obs = est.observed();

    std::size_t best_overlap = 0;
    for (std::size_t i = 0; i < references.size(); ++i) {
        std::size_t overlap = 0;
        for (const auto& o : references[i].observed()) overlap += est_obs.count(o);
        if (i == 0 || overlap > best_overlap) {
            best_overlap = overlap;
            r.reference_index = i;
        }
    }
    r.reference_candidates = references.size();
    const auto& ref = references[r.reference_index];

    std::set<std::string> mapped;
    for (const auto& [_, t] : r.match.latent_map)
        if (t) mapped.insert(*t);
    std::size_t missing = 0;
    for (const auto& l : truth.latents()) missing += !mapped.count(l);
    r.missing_latents = detail::ratio(missing, truth.latents().size(), "missing_latents", r.flags);

    const auto ref_obs = ref.observed();
    std::size_t absent = 0;
    for (const auto& o : ref_obs) absent += !est_obs.count(o);
    r.missing_indicators = detail::ratio(absent, ref_obs.size(), "missing_indicators", r.flags);

    std::size_t misplaced = 0;
    for (const auto& [latent, children] : est.clusters) {
        const auto& target = r.match.latent_map.at(latent);
        for (const auto& o : children) {
            auto ila = immediate_latent_ancestors(truth, truth.index_of(o));
            const bool ok = target && std::any_of(ila.begin(), ila.end(),
                                                  [&](auto l) { return truth.label(l) == *target; });
            misplaced += !ok;
        }
    }
    r.misplaced_indicators = detail::ratio(misplaced, est.indicator_count(), "misplaced_indicators", r.flags);

    const auto units = impurity_units(truth);
    std::size_t present = 0;
    for (const auto& u : units)
        present += std::all_of(u.begin(), u.end(), [&](const auto& o) { return est_obs.count(o) > 0; });
    r.impurities = detail::ratio(present, units.size(), "impurities", r.flags);
    return r;
}

inline EvaluationReport score_output(const PureMeasurementModel& est, const GroundTruth& truth) {
    if (!truth.true_pure_models.empty()) return score_output(est, truth.graph, truth.true_pure_models);
    return score_output(est, truth.graph, reference_purifications(truth.graph));
}

}  // namespace mmlearn
