#pragma once

#include <algorithm>
#include <cstddef>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "mmlearn/cliques.hpp"
#include "mmlearn/constraints.hpp"
#include "mmlearn/oracle.hpp"

namespace mmlearn {

using LabelPair = std::pair<std::string, std::string>;

/// Pairwise compatibility of observed variables after the three pruning
/// steps. Vertices are positions into `labels`; solid and dotted edges are
/// disjoint.
struct CompatibilityGraph {
    std::vector<std::string> labels;
    UndirectedGraph solid;
    UndirectedGraph dotted;
};

/// Equivalence class of measurement models returned by the search.
struct MeasurementPattern {
    std::vector<std::string> latents;                             // T1, T2, ... in canonical order
    std::map<std::string, std::vector<std::string>> clusters;     // latent -> indicators (input order)
    std::vector<LabelPair> impurity_edges;                         // observed-observed, undirected
    std::vector<LabelPair> latent_links;                           // latent-latent, undirected
    std::vector<std::string> retained;                             // O' in input order
    std::vector<std::string> dropped;                              // inputs not in any cluster

    const std::vector<std::string>& cluster(const std::string& latent) const {
        auto it = clusters.find(latent);
        if (it == clusters.end()) throw std::invalid_argument("unknown pattern latent '" + latent + "'");
        return it->second;
    }
    bool linked(const std::string& a, const std::string& b) const {
        for (const auto& [x, y] : latent_links)
            if ((x == a && y == b) || (x == b && y == a)) return true;
        return false;
    }
};

struct PatternOptions {
    /// Link two latents when their indicator triples are mutually
    /// uncorrelated, not only when the tetrad branch separates them.
    bool link_on_uncorrelated = true;
};

namespace detail {

inline std::vector<std::size_t> resolve_labels(const std::vector<std::string>& labels,
                                               const ConstraintOracle& o) {
    std::vector<std::size_t> idx;
    idx.reserve(labels.size());
    for (const auto& l : labels) idx.push_back(o.index_of(l));
    std::vector<std::size_t> sorted = idx;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
        throw std::invalid_argument("duplicate variable in pattern input");
    return idx;
}

template <class F>
bool any_triple(const std::vector<std::size_t>& items, F&& f) {
    const auto n = items.size();
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j)
            for (std::size_t k = j + 1; k < n; ++k)
                if (f(Triple{items[i], items[j], items[k]})) return true;
    return false;
}

}  // namespace detail

/// Steps 1-3 of the clustering: drop uncorrelated pairs, mark pairs that
/// cannot join any one-factor quad as dotted, and drop pairs (solid or
/// dotted) that an Unclustered witness separates.
inline CompatibilityGraph build_compatibility_graph(const std::vector<std::string>& labels,
                                                    const ConstraintOracle& o) {
    if (labels.size() < 4) throw std::invalid_argument("pattern search needs at least 4 variables");
    const auto var = detail::resolve_labels(labels, o);
    const auto n = var.size();

    CompatibilityGraph cg{labels, UndirectedGraph::complete(n), UndirectedGraph(n)};
    for (std::size_t x = 0; x < n; ++x)
        for (std::size_t y = x + 1; y < n; ++y)
            if (o.vanishing_correlation(var[x], var[y])) cg.solid.remove_edge(x, y);

    for (auto [x, y] : cg.solid.edges()) {
        bool witness = false;
        for (std::size_t a = 0; a < n && !witness; ++a) {
            if (a == x || a == y) continue;
            for (std::size_t b = a + 1; b < n; ++b) {
                if (b == x || b == y) continue;
                if (tetrad_score(Quad{var[x], var[y], var[a], var[b]}, o) == 3) {
                    witness = true;
                    break;
                }
            }
        }
        if (!witness) {
            cg.solid.remove_edge(x, y);
            cg.dotted.add_edge(x, y);
        }
    }

    std::vector<std::pair<std::size_t, std::size_t>> separated;
    auto pairs = cg.solid.edges();
    for (auto e : cg.dotted.edges()) pairs.push_back(e);
    for (auto [x, y] : pairs) {
        // Only the tetrad branch can fire for a correlated pair, and it needs
        // every variable of both triples to be correlated with x and y.
        std::vector<std::size_t> cand;
        for (std::size_t v = 0; v < n; ++v)
            if (v != x && v != y && o.correlated(var[v], var[x]) && o.correlated(var[v], var[y]))
                cand.push_back(v);
        bool found = false;
        for (std::size_t ia = 0; ia < cand.size() && !found; ++ia)
            for (std::size_t ib = ia + 1; ib < cand.size() && !found; ++ib) {
                const auto a = cand[ia], b = cand[ib];
                if (!o.correlated(var[a], var[b])) continue;
                for (std::size_t ic = 0; ic < cand.size() && !found; ++ic) {
                    const auto c = cand[ic];
                    if (c == a || c == b) continue;
                    for (std::size_t id = ic + 1; id < cand.size(); ++id) {
                        const auto d = cand[id];
                        if (d == a || d == b) continue;
                        if (unclustered(Triple{var[x], var[a], var[b]}, Triple{var[y], var[c], var[d]}, o)) {
                            found = true;
                            break;
                        }
                    }
                }
            }
        if (found) separated.emplace_back(x, y);
    }
    for (auto [x, y] : separated) {
        cg.solid.remove_edge(x, y);
        cg.dotted.remove_edge(x, y);
    }
    return cg;
}

/// Step 4 and latent linking on top of a compatibility graph.
inline MeasurementPattern assemble_pattern(const CompatibilityGraph& cg, const ConstraintOracle& o,
                                           const PatternOptions& opts = {}) {
    const auto& labels = cg.labels;
    const auto var = detail::resolve_labels(labels, o);
    MeasurementPattern p;

    std::vector<std::vector<std::size_t>> clusters;
    for (auto& clique : maximal_cliques(cg.solid))
        if (clique.size() >= 2) clusters.push_back(std::move(clique));

    std::vector<char> retained(labels.size(), 0);
    for (std::size_t c = 0; c < clusters.size(); ++c) {
        auto name = "T" + std::to_string(c + 1);
        p.latents.push_back(name);
        auto& members = p.clusters[name];
        for (auto v : clusters[c]) {
            members.push_back(labels[v]);
            retained[v] = 1;
        }
    }
    for (std::size_t v = 0; v < labels.size(); ++v)
        (retained[v] ? p.retained : p.dropped).push_back(labels[v]);
    for (auto [x, y] : cg.dotted.edges())
        if (retained[x] && retained[y]) p.impurity_edges.emplace_back(labels[x], labels[y]);

    for (std::size_t a = 0; a < clusters.size(); ++a) {
        std::vector<std::size_t> va;
        for (auto v : clusters[a]) va.push_back(var[v]);
        for (std::size_t b = a + 1; b < clusters.size(); ++b) {
            std::vector<std::size_t> vb;
            for (auto v : clusters[b]) vb.push_back(var[v]);
            const bool link = detail::any_triple(va, [&](const Triple& ta) {
                return detail::any_triple(vb, [&](const Triple& tb) {
                    for (auto x : ta)
                        if (std::find(tb.begin(), tb.end(), x) != tb.end()) return false;
                    const auto out = unclustered_outcome(ta, tb, o);
                    return out == UnclusteredOutcome::separated ||
                           (opts.link_on_uncorrelated && out == UnclusteredOutcome::uncorrelated);
                });
            });
            if (link) p.latent_links.emplace_back(p.latents[a], p.latents[b]);
        }
    }
    return p;
}

/// Measurement pattern of the variables in `labels` (an ordered subset of
/// the oracle's variables).
inline MeasurementPattern find_measurement_pattern(const std::vector<std::string>& labels,
                                                   const ConstraintOracle& o,
                                                   const PatternOptions& opts = {}) {
    return assemble_pattern(build_compatibility_graph(labels, o), o, opts);
}

inline MeasurementPattern find_measurement_pattern(const ConstraintOracle& o, const PatternOptions& opts = {}) {
    return find_measurement_pattern(o.labels(), o, opts);
}

}  // namespace mmlearn
