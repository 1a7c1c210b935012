#pragma once

// Latent variable graphs: latents, observed indicators and correlated-error
// nodes in a single DAG, with the measurement-model checks used throughout
// the library (validity, d-separation, purity and brute-force purification).

#include <algorithm>
#include <array>
#include <bit>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "mmlearn/cliques.hpp"

namespace mmlearn {

enum class NodeKind { latent, observed, error };

inline const char* to_string(NodeKind k) {
    switch (k) {
        case NodeKind::latent: return "latent";
        case NodeKind::observed: return "observed";
        case NodeKind::error: return "error";
    }
    return "?";
}

struct NodeId {
    NodeKind kind;
    std::string label;
};

using Edge = std::pair<std::string, std::string>;

class LatentVariableGraph {
public:
    LatentVariableGraph() = default;

    /// Throws std::invalid_argument on duplicate labels or edges naming
    /// unknown nodes. Structural clauses are checked by validate_graph.
    LatentVariableGraph(std::vector<std::string> latents, std::vector<std::string> observed,
                        std::vector<std::string> errors, std::vector<Edge> latent_edges,
                        std::vector<Edge> measurement_edges, std::vector<Edge> error_edges)
        : latents_(std::move(latents)),
          observed_(std::move(observed)),
          errors_(std::move(errors)),
          latent_edges_(std::move(latent_edges)),
          measurement_edges_(std::move(measurement_edges)),
          error_edges_(std::move(error_edges)) {
        auto add_nodes = [&](const std::vector<std::string>& labels, NodeKind kind) {
            for (const auto& l : labels) {
                if (l.empty()) throw std::invalid_argument("empty node label");
                if (!index_.emplace(l, nodes_.size()).second)
                    throw std::invalid_argument("duplicate node label '" + l + "'");
                nodes_.push_back({kind, l});
            }
        };
        add_nodes(latents_, NodeKind::latent);
        add_nodes(observed_, NodeKind::observed);
        add_nodes(errors_, NodeKind::error);
        parents_.resize(nodes_.size());
        children_.resize(nodes_.size());
        for (const auto* list : {&latent_edges_, &measurement_edges_, &error_edges_}) {
            for (const auto& [from, to] : *list) {
                auto a = index_of(from);
                auto b = index_of(to);
                if (std::find(children_[a].begin(), children_[a].end(), b) != children_[a].end())
                    throw std::invalid_argument("duplicate edge " + from + " -> " + to);
                children_[a].push_back(b);
                parents_[b].push_back(a);
            }
        }
    }

    const std::vector<std::string>& latents() const { return latents_; }
    const std::vector<std::string>& observed() const { return observed_; }
    const std::vector<std::string>& errors() const { return errors_; }
    const std::vector<Edge>& latent_edges() const { return latent_edges_; }
    const std::vector<Edge>& measurement_edges() const { return measurement_edges_; }
    const std::vector<Edge>& error_edges() const { return error_edges_; }

    std::size_t node_count() const { return nodes_.size(); }
    const NodeId& node(std::size_t i) const { return nodes_.at(i); }
    NodeKind kind(std::size_t i) const { return nodes_.at(i).kind; }
    const std::string& label(std::size_t i) const { return nodes_.at(i).label; }
    const std::vector<std::size_t>& parents(std::size_t i) const { return parents_.at(i); }
    const std::vector<std::size_t>& children(std::size_t i) const { return children_.at(i); }

    std::optional<std::size_t> find(const std::string& label) const {
        auto it = index_.find(label);
        if (it == index_.end()) return std::nullopt;
        return it->second;
    }
    std::size_t index_of(const std::string& label) const {
        auto it = index_.find(label);
        if (it == index_.end()) throw std::invalid_argument("unknown node '" + label + "'");
        return it->second;
    }

    /// Graph indices of the observed nodes, in declaration order.
    std::vector<std::size_t> observed_indices() const {
        std::vector<std::size_t> out;
        for (std::size_t i = 0; i < nodes_.size(); ++i)
            if (nodes_[i].kind == NodeKind::observed) out.push_back(i);
        return out;
    }
    std::vector<std::size_t> latent_indices() const {
        std::vector<std::size_t> out;
        for (std::size_t i = 0; i < nodes_.size(); ++i)
            if (nodes_[i].kind == NodeKind::latent) out.push_back(i);
        return out;
    }

    /// Topological order of all nodes, or nullopt if the edge set has a cycle.
    std::optional<std::vector<std::size_t>> topological_order() const {
        std::vector<std::size_t> indeg(nodes_.size()), order, ready;
        for (std::size_t i = 0; i < nodes_.size(); ++i) {
            indeg[i] = parents_[i].size();
            if (indeg[i] == 0) ready.push_back(i);
        }
        std::reverse(ready.begin(), ready.end());
        while (!ready.empty()) {
            auto v = ready.back();
            ready.pop_back();
            order.push_back(v);
            for (auto c : children_[v])
                if (--indeg[c] == 0) ready.push_back(c);
        }
        if (order.size() != nodes_.size()) return std::nullopt;
        return order;
    }

private:
    std::vector<std::string> latents_, observed_, errors_;
    std::vector<Edge> latent_edges_, measurement_edges_, error_edges_;
    std::vector<NodeId> nodes_;
    std::unordered_map<std::string, std::size_t> index_;
    std::vector<std::vector<std::size_t>> parents_, children_;
};

// ---------------------------------------------------------------------------
// d-separation

/// Reachability form of d-separation (active trails from x given cond).
inline bool d_separated(const LatentVariableGraph& g, std::size_t x, std::size_t y,
                        const std::vector<std::size_t>& cond) {
    const auto n = g.node_count();
    if (x >= n || y >= n) throw std::invalid_argument("node index out of range");
    if (x == y) throw std::invalid_argument("d_separated requires distinct nodes");
    std::vector<char> in_cond(n, 0), anc(n, 0);
    for (auto c : cond) {
        if (c >= n) throw std::invalid_argument("node index out of range");
        in_cond[c] = 1;
    }
    if (in_cond[x] || in_cond[y])
        throw std::invalid_argument("d_separated endpoints must not be conditioned on");

    // Ancestors of the conditioning set (inclusive).
    std::vector<std::size_t> stack(cond.begin(), cond.end());
    while (!stack.empty()) {
        auto v = stack.back();
        stack.pop_back();
        if (anc[v]) continue;
        anc[v] = 1;
        for (auto p : g.parents(v)) stack.push_back(p);
    }

    // visited[v][0]: arrived from a child (moving up), [1]: from a parent.
    std::vector<std::array<char, 2>> visited(n, {0, 0});
    std::vector<std::pair<std::size_t, int>> frontier{{x, 0}};
    while (!frontier.empty()) {
        auto [v, dir] = frontier.back();
        frontier.pop_back();
        if (visited[v][dir]) continue;
        visited[v][dir] = 1;
        if (v == y && !in_cond[v]) return false;
        if (dir == 0 && !in_cond[v]) {
            for (auto p : g.parents(v)) frontier.emplace_back(p, 0);
            for (auto c : g.children(v)) frontier.emplace_back(c, 1);
        } else if (dir == 1) {
            if (!in_cond[v])
                for (auto c : g.children(v)) frontier.emplace_back(c, 1);
            if (anc[v])
                for (auto p : g.parents(v)) frontier.emplace_back(p, 0);
        }
    }
    return true;
}

inline bool d_separated(const LatentVariableGraph& g, const std::string& x, const std::string& y,
                        const std::vector<std::string>& cond) {
    std::vector<std::size_t> c;
    c.reserve(cond.size());
    for (const auto& l : cond) c.push_back(g.index_of(l));
    return d_separated(g, g.index_of(x), g.index_of(y), c);
}

// ---------------------------------------------------------------------------
// Validation

struct Violation {
    std::string clause;
    std::string subject;
};

namespace clause {
inline constexpr const char* acyclic = "forms a directed acyclic graph";
inline constexpr const char* latent_edge = "all edges in E_L have both endpoints in L";
inline constexpr const char* measurement_edge = "all edges in E_O are directed into O";
inline constexpr const char* error_edge = "all edges in E_eps are directed from eps into O";
inline constexpr const char* latent_child = "each latent in L is a parent of at least one variable in O";
inline constexpr const char* observed_parent = "children of some node in L";
inline constexpr const char* observed_not_parent = "none of the observed variables is a parent of any variable in L u eps";
inline constexpr const char* error_children = "common parent of at least two nodes in O";
inline constexpr const char* error_separated = "error node d-separated from every element of L given the empty set";
}  // namespace clause

inline std::vector<Violation> validate_graph(const LatentVariableGraph& g) {
    std::vector<Violation> out;
    auto edge_name = [](const Edge& e) { return e.first + " -> " + e.second; };
    auto kind_of = [&](const std::string& l) { return g.kind(g.index_of(l)); };

    const bool acyclic = g.topological_order().has_value();
    if (!acyclic) out.push_back({clause::acyclic, "edge set contains a directed cycle"});

    for (const auto& e : g.latent_edges())
        if (kind_of(e.first) != NodeKind::latent || kind_of(e.second) != NodeKind::latent)
            out.push_back({clause::latent_edge, edge_name(e)});
    for (const auto& e : g.measurement_edges())
        if (kind_of(e.second) != NodeKind::observed || kind_of(e.first) == NodeKind::error)
            out.push_back({clause::measurement_edge, edge_name(e)});
    for (const auto& e : g.error_edges())
        if (kind_of(e.first) != NodeKind::error || kind_of(e.second) != NodeKind::observed)
            out.push_back({clause::error_edge, edge_name(e)});

    for (std::size_t i = 0; i < g.node_count(); ++i) {
        const auto& ch = g.children(i);
        const auto& pa = g.parents(i);
        auto count_kind = [&](const std::vector<std::size_t>& v, NodeKind k) {
            return std::count_if(v.begin(), v.end(), [&](auto j) { return g.kind(j) == k; });
        };
        switch (g.kind(i)) {
            case NodeKind::latent:
                if (count_kind(ch, NodeKind::observed) == 0)
                    out.push_back({clause::latent_child, g.label(i)});
                break;
            case NodeKind::observed:
                if (count_kind(pa, NodeKind::latent) == 0)
                    out.push_back({clause::observed_parent, g.label(i)});
                if (count_kind(ch, NodeKind::latent) + count_kind(ch, NodeKind::error) > 0)
                    out.push_back({clause::observed_not_parent, g.label(i)});
                break;
            case NodeKind::error:
                if (count_kind(ch, NodeKind::observed) < 2)
                    out.push_back({clause::error_children, g.label(i)});
                if (acyclic) {
                    for (auto l : g.latent_indices()) {
                        if (!d_separated(g, i, l, {})) {
                            out.push_back({clause::error_separated, g.label(i) + " / " + g.label(l)});
                            break;
                        }
                    }
                }
                break;
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Pure measurement models

/// Latent label -> observed children. Clusters are pairwise disjoint.
struct PureMeasurementModel {
    std::map<std::string, std::set<std::string>> clusters;

    std::set<std::string> observed() const {
        std::set<std::string> out;
        for (const auto& [_, c] : clusters) out.insert(c.begin(), c.end());
        return out;
    }
    std::size_t indicator_count() const {
        std::size_t n = 0;
        for (const auto& [_, c] : clusters) n += c.size();
        return n;
    }
    bool operator==(const PureMeasurementModel&) const = default;
    bool operator<(const PureMeasurementModel& o) const { return clusters < o.clusters; }
};

/// One latent per cluster, unit structure, no latent-latent edges.
inline LatentVariableGraph to_graph(const PureMeasurementModel& m) {
    std::vector<std::string> latents, observed;
    std::vector<Edge> edges;
    for (const auto& [l, c] : m.clusters) {
        latents.push_back(l);
        for (const auto& o : c) {
            observed.push_back(o);
            edges.emplace_back(l, o);
        }
    }
    return LatentVariableGraph(latents, observed, {}, {}, edges, {});
}

inline bool is_pure(const LatentVariableGraph& g) {
    auto violations = validate_graph(g);
    if (!violations.empty())
        throw std::invalid_argument("is_pure: invalid graph (" + violations.front().clause + ": " +
                                    violations.front().subject + ")");
    if (!g.errors().empty()) return false;
    for (auto o : g.observed_indices()) {
        std::optional<std::size_t> parent;
        for (auto p : g.parents(o)) {
            if (g.kind(p) != NodeKind::latent) continue;
            if (parent) return false;
            parent = p;
        }
        if (!parent) return false;
        for (std::size_t v = 0; v < g.node_count(); ++v) {
            if (v == o || v == *parent || g.kind(v) == NodeKind::error) continue;
            if (!d_separated(g, o, v, {*parent})) return false;
        }
    }
    return true;
}

/// Latents with a directed path to `node` whose interior avoids other latents.
inline std::vector<std::size_t> immediate_latent_ancestors(const LatentVariableGraph& g,
                                                           std::size_t node) {
    std::vector<char> seen(g.node_count(), 0);
    std::vector<std::size_t> stack{node}, out;
    seen[node] = 1;
    while (!stack.empty()) {
        auto v = stack.back();
        stack.pop_back();
        for (auto p : g.parents(v)) {
            if (seen[p]) continue;
            seen[p] = 1;
            if (g.kind(p) == NodeKind::latent)
                out.push_back(p);
            else
                stack.push_back(p);
        }
    }
    std::sort(out.begin(), out.end());
    return out;
}

/// Per-indicator facts that decide whether a subset of the observed nodes
/// induces a pure measurement model.
///
/// An indicator is eligible when it has exactly one immediate latent ancestor
/// and that latent d-separates it from every other latent. Two eligible
/// indicators are compatible when each one's latent d-separates it from the
/// other. A subset is pure iff it consists of eligible, pairwise compatible
/// indicators.
struct PurityAnalysis {
    std::vector<std::size_t> observed;                      // graph indices
    std::vector<std::vector<std::size_t>> latent_ancestors;  // per observed position
    std::vector<char> eligible;
    std::vector<std::vector<char>> compatible;

    std::size_t latent_of(std::size_t pos) const { return latent_ancestors[pos].front(); }
};

inline PurityAnalysis analyze_purity(const LatentVariableGraph& g) {
    PurityAnalysis a;
    a.observed = g.observed_indices();
    const auto n = a.observed.size();
    a.latent_ancestors.resize(n);
    a.eligible.assign(n, 0);
    a.compatible.assign(n, std::vector<char>(n, 0));
    const auto latents = g.latent_indices();
    for (std::size_t i = 0; i < n; ++i) {
        a.latent_ancestors[i] = immediate_latent_ancestors(g, a.observed[i]);
        if (a.latent_ancestors[i].size() != 1) continue;
        const auto l = a.latent_ancestors[i].front();
        bool ok = true;
        for (auto other : latents) {
            if (other != l && !d_separated(g, a.observed[i], other, {l})) {
                ok = false;
                break;
            }
        }
        a.eligible[i] = ok;
    }
    for (std::size_t i = 0; i < n; ++i) {
        if (!a.eligible[i]) continue;
        for (std::size_t j = i + 1; j < n; ++j) {
            if (!a.eligible[j]) continue;
            bool ok = d_separated(g, a.observed[i], a.observed[j], {a.latent_of(i)}) &&
                      d_separated(g, a.observed[j], a.observed[i], {a.latent_of(j)});
            a.compatible[i][j] = a.compatible[j][i] = ok;
        }
    }
    return a;
}

/// The latent variable graph over `kept` observed nodes with every removed
/// indicator marginalised out: kept indicators are re-attached to their
/// immediate latent ancestors, error nodes keep only surviving children and
/// latents without surviving children are dropped.
inline LatentVariableGraph induced_subgraph(const LatentVariableGraph& g,
                                            const std::set<std::string>& kept) {
    std::set<std::string> latents_used;
    std::vector<Edge> measurement, error_edges, latent_edges;
    std::vector<std::string> observed, errors, latents;
    for (const auto& o : g.observed()) {
        if (!kept.count(o)) continue;
        observed.push_back(o);
        auto idx = g.index_of(o);
        for (auto l : immediate_latent_ancestors(g, idx)) {
            measurement.emplace_back(g.label(l), o);
            latents_used.insert(g.label(l));
        }
        for (auto p : g.parents(idx))
            if (g.kind(p) == NodeKind::observed && kept.count(g.label(p)))
                measurement.emplace_back(g.label(p), o);
    }
    for (const auto& l : g.latents())
        if (latents_used.count(l)) latents.push_back(l);
    for (const auto& [a, b] : g.latent_edges())
        if (latents_used.count(a) && latents_used.count(b)) latent_edges.emplace_back(a, b);
    for (const auto& e : g.errors()) {
        std::vector<std::string> ch;
        for (auto c : g.children(g.index_of(e)))
            if (kept.count(g.label(c))) ch.push_back(g.label(c));
        if (ch.size() < 2) continue;
        errors.push_back(e);
        for (const auto& c : ch) error_edges.emplace_back(e, c);
    }
    return LatentVariableGraph(latents, observed, errors, latent_edges, measurement, error_edges);
}

namespace detail {

inline PureMeasurementModel model_from_positions(const LatentVariableGraph& g,
                                                 const PurityAnalysis& a,
                                                 const std::vector<std::size_t>& positions) {
    PureMeasurementModel m;
    for (auto p : positions) m.clusters[g.label(a.latent_of(p))].insert(g.label(a.observed[p]));
    return m;
}

/// Drop latents with fewer than min_children members; returns the survivors.
inline std::vector<std::size_t> enforce_min_children(const PurityAnalysis& a,
                                                     const std::vector<std::size_t>& positions,
                                                     std::size_t min_children) {
    std::map<std::size_t, std::size_t> count;
    for (auto p : positions) ++count[a.latent_of(p)];
    std::vector<std::size_t> out;
    for (auto p : positions)
        if (count[a.latent_of(p)] >= min_children) out.push_back(p);
    return out;
}

inline void remove_non_maximal(std::vector<std::vector<std::size_t>>& sets) {
    for (auto& s : sets) std::sort(s.begin(), s.end());
    std::sort(sets.begin(), sets.end(), [](const auto& x, const auto& y) {
        return x.size() != y.size() ? x.size() > y.size() : x < y;
    });
    sets.erase(std::unique(sets.begin(), sets.end()), sets.end());
    std::vector<std::vector<std::size_t>> kept;
    for (auto& s : sets) {
        bool dominated = false;
        for (const auto& k : kept) {
            if (k.size() > s.size() && std::includes(k.begin(), k.end(), s.begin(), s.end())) {
                dominated = true;
                break;
            }
        }
        if (!dominated) kept.push_back(std::move(s));
    }
    sets = std::move(kept);
}

inline std::vector<PureMeasurementModel> sorted_models(std::vector<PureMeasurementModel> v) {
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
    return v;
}

}  // namespace detail

inline constexpr std::size_t kOracleObservedLimit = 20;

/// Every maximal subset of observed variables that induces a pure
/// measurement model in which each surviving latent keeps at least
/// min_children indicators. Exhaustive subset enumeration; a test oracle.
inline std::vector<PureMeasurementModel> purifications_oracle(const LatentVariableGraph& g,
                                                              std::size_t min_children = 3) {
    auto violations = validate_graph(g);
    if (!violations.empty())
        throw std::invalid_argument("purifications_oracle: invalid graph (" +
                                    violations.front().clause + ")");
    const auto n = g.observed().size();
    if (n > kOracleObservedLimit)
        throw std::length_error("purifications_oracle: " + std::to_string(n) +
                                " observed variables exceed the enumeration guard of " +
                                std::to_string(kOracleObservedLimit) +
                                "; use purify_pattern or maximal_purifications");
    const auto a = analyze_purity(g);

    std::uint32_t eligible = 0;
    std::vector<std::uint32_t> compat(n, 0);
    for (std::size_t i = 0; i < n; ++i) {
        if (a.eligible[i]) eligible |= 1u << i;
        for (std::size_t j = 0; j < n; ++j)
            if (a.compatible[i][j]) compat[i] |= 1u << j;
    }
    std::map<std::size_t, std::uint32_t> by_latent;
    for (std::size_t i = 0; i < n; ++i)
        if (a.eligible[i]) by_latent[a.latent_of(i)] |= 1u << i;

    std::vector<std::uint32_t> valid;
    const std::uint32_t total = n == 32 ? 0xffffffffu : ((1u << n) - 1u);
    for (std::uint32_t mask = 1; mask <= total && mask != 0; ++mask) {
        if (mask & ~eligible) continue;
        bool ok = true;
        for (std::uint32_t rest = mask; rest && ok; rest &= rest - 1) {
            auto i = static_cast<std::size_t>(std::countr_zero(rest));
            if (mask & ~compat[i] & ~(1u << i)) ok = false;
        }
        for (auto it = by_latent.begin(); ok && it != by_latent.end(); ++it) {
            auto c = static_cast<std::size_t>(std::popcount(mask & it->second));
            if (c != 0 && c < min_children) ok = false;
        }
        if (ok) valid.push_back(mask);
        if (mask == total) break;
    }
    std::sort(valid.begin(), valid.end(), [](auto x, auto y) {
        auto px = std::popcount(x), py = std::popcount(y);
        return px != py ? px > py : x < y;
    });
    std::vector<std::uint32_t> maximal;
    for (auto s : valid) {
        bool dominated = std::any_of(maximal.begin(), maximal.end(),
                                     [&](auto t) { return (s & t) == s; });
        if (!dominated) maximal.push_back(s);
    }
    std::vector<PureMeasurementModel> out;
    for (auto s : maximal) {
        std::vector<std::size_t> pos;
        for (std::size_t i = 0; i < n; ++i)
            if (s & (1u << i)) pos.push_back(i);
        out.push_back(detail::model_from_positions(g, a, pos));
    }
    return detail::sorted_models(std::move(out));
}

/// Same result as purifications_oracle, computed from maximal cliques of the
/// indicator compatibility graph so it scales past the enumeration guard.
inline std::vector<PureMeasurementModel> maximal_purifications(const LatentVariableGraph& g,
                                                               std::size_t min_children = 3) {
    const auto a = analyze_purity(g);
    const auto n = a.observed.size();
    std::vector<std::size_t> elig;
    for (std::size_t i = 0; i < n; ++i)
        if (a.eligible[i]) elig.push_back(i);
    UndirectedGraph cg(elig.size());
    for (std::size_t i = 0; i < elig.size(); ++i)
        for (std::size_t j = i + 1; j < elig.size(); ++j)
            if (a.compatible[elig[i]][elig[j]]) cg.add_edge(i, j);
    std::vector<std::vector<std::size_t>> sets;
    for (const auto& clique : maximal_cliques(cg)) {
        std::vector<std::size_t> pos;
        for (auto v : clique) pos.push_back(elig[v]);
        auto trimmed = detail::enforce_min_children(a, pos, min_children);
        if (!trimmed.empty()) sets.push_back(std::move(trimmed));
    }
    detail::remove_non_maximal(sets);
    std::vector<PureMeasurementModel> out;
    for (const auto& s : sets) out.push_back(detail::model_from_positions(g, a, s));
    return detail::sorted_models(std::move(out));
}

/// Keep only the models with the largest number of latents.
inline std::vector<PureMeasurementModel> keep_max_latent_count(
    std::vector<PureMeasurementModel> models) {
    std::size_t best = 0;
    for (const auto& m : models) best = std::max(best, m.clusters.size());
    std::erase_if(models, [&](const auto& m) { return m.clusters.size() != best; });
    return models;
}

}  // namespace mmlearn
