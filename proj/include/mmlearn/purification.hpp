#pragma once

#include <algorithm>
#include <cstddef>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "mmlearn/cliques.hpp"
#include "mmlearn/graph.hpp"
#include "mmlearn/pattern.hpp"

namespace mmlearn {

// ---------------------------------------------------------------------------
// Measurement-model equivalence

/// Child sets of a model, sorted: equal forms mean equal up to latent names.
inline std::vector<std::set<std::string>> mm_canonical_form(const PureMeasurementModel& m) {
    std::vector<std::set<std::string>> out;
    for (const auto& [_, c] : m.clusters) out.push_back(c);
    std::sort(out.begin(), out.end());
    return out;
}

/// Same observed set and a unique latent bijection with identical children.
inline bool mm_equal(const PureMeasurementModel& a, const PureMeasurementModel& b) {
    if (a.observed() != b.observed() || a.clusters.size() != b.clusters.size()) return false;
    for (const auto& [la, ca] : a.clusters) {
        std::size_t partners = 0;
        for (const auto& [lb, cb] : b.clusters) partners += (ca == cb);
        if (partners != 1) return false;
    }
    for (const auto& [lb, cb] : b.clusters) {
        std::size_t partners = 0;
        for (const auto& [la, ca] : a.clusters) partners += (ca == cb);
        if (partners != 1) return false;
    }
    return true;
}

inline bool mm_set_equal(const std::vector<PureMeasurementModel>& a, const std::vector<PureMeasurementModel>& b) {
    if (a.size() != b.size()) return false;
    auto unique_partner = [](const auto& x, const auto& ys) {
        return std::count_if(ys.begin(), ys.end(), [&](const auto& y) { return mm_equal(x, y); }) == 1;
    };
    return std::all_of(a.begin(), a.end(), [&](const auto& x) { return unique_partner(x, b); }) &&
           std::all_of(b.begin(), b.end(), [&](const auto& y) { return unique_partner(y, a); });
}

// ---------------------------------------------------------------------------
// Purification of a measurement pattern

struct PurifyOptions {
    std::size_t min_children = 3;
    /// Largest number of indicators touching an impurity edge that the exact
    /// enumeration will accept.
    std::size_t conflict_guard = 25;
};

struct Purification {
    PureMeasurementModel model;
    std::vector<std::string> latent_clique;  // maximum latent clique it came from
};

struct PurificationResult {
    std::vector<Purification> solutions;
    std::string diagnostic;

    std::vector<PureMeasurementModel> models() const {
        std::vector<PureMeasurementModel> out;
        for (const auto& s : solutions) out.push_back(s.model);
        return out;
    }
};

namespace detail {

template <class F>
void for_each_combination(std::size_t n, std::size_t k, F&& f) {
    if (k > n) return;
    std::vector<std::size_t> idx(k);
    for (std::size_t i = 0; i < k; ++i) idx[i] = i;
    while (true) {
        f(idx);
        std::size_t i = k;
        while (i > 0 && idx[i - 1] == n - k + i - 1) --i;
        if (i == 0) return;
        ++idx[i - 1];
        for (std::size_t j = i; j < k; ++j) idx[j] = idx[j - 1] + 1;
    }
}

/// Maximal conflict-free indicator sets for a fixed set of surviving
/// latents. Each indicator must be claimed by exactly one of them.
inline std::vector<PureMeasurementModel> purify_latent_subset(const MeasurementPattern& p,
                                                              const std::vector<std::string>& latents,
                                                              const PurifyOptions& opts) {
    std::map<std::string, std::vector<std::string>> owners;
    for (const auto& l : latents)
        for (const auto& o : p.cluster(l)) owners[o].push_back(l);

    std::vector<std::string> candidates;
    for (const auto& o : p.retained) {
        auto it = owners.find(o);
        if (it != owners.end() && it->second.size() == 1) candidates.push_back(o);
    }
    auto pos_of = [&](const std::string& o) -> std::ptrdiff_t {
        auto it = std::find(candidates.begin(), candidates.end(), o);
        return it == candidates.end() ? -1 : it - candidates.begin();
    };

    std::vector<char> in_conflict(candidates.size(), 0);
    std::vector<std::pair<std::size_t, std::size_t>> conflicts;
    for (const auto& [a, b] : p.impurity_edges) {
        auto ia = pos_of(a), ib = pos_of(b);
        if (ia < 0 || ib < 0) continue;
        conflicts.emplace_back(ia, ib);
        in_conflict[ia] = in_conflict[ib] = 1;
    }
    std::vector<std::size_t> conflict_vertices, free_vertices;
    for (std::size_t i = 0; i < candidates.size(); ++i)
        (in_conflict[i] ? conflict_vertices : free_vertices).push_back(i);
    if (conflict_vertices.size() > opts.conflict_guard)
        throw std::length_error("purification: " + std::to_string(conflict_vertices.size()) +
                                " impure indicators exceed the conflict guard of " +
                                std::to_string(opts.conflict_guard));

    // Maximal independent sets of the conflict graph = maximal cliques of its
    // complement restricted to the conflicting indicators.
    UndirectedGraph complement = UndirectedGraph::complete(conflict_vertices.size());
    for (auto [a, b] : conflicts) {
        auto ia = std::find(conflict_vertices.begin(), conflict_vertices.end(), a) - conflict_vertices.begin();
        auto ib = std::find(conflict_vertices.begin(), conflict_vertices.end(), b) - conflict_vertices.begin();
        complement.remove_edge(ia, ib);
    }
    auto independent_sets = maximal_cliques(complement);
    if (independent_sets.empty()) independent_sets.push_back({});

    std::vector<PureMeasurementModel> out;
    for (const auto& mis : independent_sets) {
        PureMeasurementModel m;
        for (const auto& l : latents) m.clusters[l];
        auto add = [&](std::size_t c) { m.clusters[owners[candidates[c]].front()].insert(candidates[c]); };
        for (auto c : free_vertices) add(c);
        for (auto v : mis) add(conflict_vertices[v]);
        bool ok = std::all_of(m.clusters.begin(), m.clusters.end(),
                              [&](const auto& kv) { return kv.second.size() >= opts.min_children; });
        if (ok) out.push_back(std::move(m));
    }
    return out;
}

}  // namespace detail

/// All purifications of a measurement pattern: restricted to each maximum
/// clique of linked latents (latents with fewer than min_children
/// indicators are never eligible), keep the largest surviving latent subset
/// admitting a solution, and enumerate maximal indicator sets with no
/// impurity edge, no indicator claimed by two surviving latents and at
/// least min_children indicators per latent.
inline PurificationResult purify_pattern(const MeasurementPattern& p, const PurifyOptions& opts = {}) {
    if (opts.min_children < 1) throw std::invalid_argument("min_children must be positive");
    PurificationResult result;

    std::vector<std::string> eligible;
    for (const auto& l : p.latents)
        if (p.cluster(l).size() >= opts.min_children) eligible.push_back(l);
    if (eligible.empty()) {
        result.diagnostic = "no pattern latent has at least " + std::to_string(opts.min_children) + " indicators";
        return result;
    }

    UndirectedGraph links(eligible.size());
    for (std::size_t a = 0; a < eligible.size(); ++a)
        for (std::size_t b = a + 1; b < eligible.size(); ++b)
            if (p.linked(eligible[a], eligible[b])) links.add_edge(a, b);

    struct Candidate {
        PureMeasurementModel model;
        std::vector<std::string> clique;
    };
    std::vector<Candidate> found;
    std::size_t best_latents = 0;
    for (const auto& clique_idx : maximum_cliques(links)) {
        std::vector<std::string> clique;
        for (auto i : clique_idx) clique.push_back(eligible[i]);
        for (std::size_t k = clique.size(); k >= 1 && k >= best_latents; --k) {
            bool any = false;
            detail::for_each_combination(clique.size(), k, [&](const std::vector<std::size_t>& pick) {
                std::vector<std::string> subset;
                for (auto i : pick) subset.push_back(clique[i]);
                for (auto& m : detail::purify_latent_subset(p, subset, opts)) {
                    found.push_back({std::move(m), clique});
                    any = true;
                }
            });
            if (any) {
                best_latents = std::max(best_latents, k);
                break;
            }
        }
    }
    std::erase_if(found, [&](const Candidate& c) { return c.model.clusters.size() != best_latents; });

    // Keep maximal indicator sets and one representative per equivalence class.
    std::vector<std::set<std::string>> observed;
    for (const auto& c : found) observed.push_back(c.model.observed());
    std::vector<char> keep(found.size(), 1);
    for (std::size_t i = 0; i < found.size(); ++i) {
        for (std::size_t j = 0; j < found.size() && keep[i]; ++j) {
            if (i == j) continue;
            const bool strict_subset = observed[i].size() < observed[j].size() &&
                                       std::includes(observed[j].begin(), observed[j].end(),
                                                     observed[i].begin(), observed[i].end());
            const bool duplicate = j < i && keep[j] && mm_equal(found[i].model, found[j].model);
            if (strict_subset || duplicate) keep[i] = 0;
        }
    }
    for (std::size_t i = 0; i < found.size(); ++i)
        if (keep[i]) result.solutions.push_back({std::move(found[i].model), std::move(found[i].clique)});

    if (result.solutions.empty())
        result.diagnostic = "no indicator subset keeps " + std::to_string(opts.min_children) +
                            " indicators for every latent of a maximum latent clique";
    return result;
}

/// Among purifications, the one retaining the most indicators; ties go to
/// the first in canonical order.
inline const PureMeasurementModel* select_largest(const std::vector<PureMeasurementModel>& models) {
    const PureMeasurementModel* best = nullptr;
    for (const auto& m : models)
        if (!best || m.indicator_count() > best->indicator_count() ||
            (m.indicator_count() == best->indicator_count() && m < *best))
            best = &m;
    return best;
}

}  // namespace mmlearn
