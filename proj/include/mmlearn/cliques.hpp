#pragma once

#include <algorithm>
#include <cstddef>
#include <utility>
#include <vector>

namespace mmlearn {

/// Simple undirected graph over vertices 0..n-1 backed by an adjacency matrix.
class UndirectedGraph {
public:
    UndirectedGraph() = default;
    explicit UndirectedGraph(std::size_t n) : n_(n), adj_(n * n, 0) {}

    static UndirectedGraph complete(std::size_t n) {
        UndirectedGraph g(n);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j) g.add_edge(i, j);
        return g;
    }

    std::size_t size() const { return n_; }

    void add_edge(std::size_t a, std::size_t b) {
        if (a == b) return;
        adj_[a * n_ + b] = 1;
        adj_[b * n_ + a] = 1;
    }
    void remove_edge(std::size_t a, std::size_t b) {
        adj_[a * n_ + b] = 0;
        adj_[b * n_ + a] = 0;
    }
    bool has_edge(std::size_t a, std::size_t b) const { return adj_[a * n_ + b] != 0; }

    std::vector<std::size_t> neighbors(std::size_t v) const {
        std::vector<std::size_t> out;
        for (std::size_t u = 0; u < n_; ++u)
            if (has_edge(v, u)) out.push_back(u);
        return out;
    }

    std::vector<std::pair<std::size_t, std::size_t>> edges() const {
        std::vector<std::pair<std::size_t, std::size_t>> out;
        for (std::size_t i = 0; i < n_; ++i)
            for (std::size_t j = i + 1; j < n_; ++j)
                if (has_edge(i, j)) out.emplace_back(i, j);
        return out;
    }

    /// Connected components, each sorted, ordered by smallest member.
    std::vector<std::vector<std::size_t>> components() const {
        std::vector<int> seen(n_, 0);
        std::vector<std::vector<std::size_t>> out;
        for (std::size_t s = 0; s < n_; ++s) {
            if (seen[s]) continue;
            std::vector<std::size_t> comp{s}, stack{s};
            seen[s] = 1;
            while (!stack.empty()) {
                auto v = stack.back();
                stack.pop_back();
                for (std::size_t u = 0; u < n_; ++u) {
                    if (!seen[u] && has_edge(v, u)) {
                        seen[u] = 1;
                        comp.push_back(u);
                        stack.push_back(u);
                    }
                }
            }
            std::sort(comp.begin(), comp.end());
            out.push_back(std::move(comp));
        }
        return out;
    }

private:
    std::size_t n_ = 0;
    std::vector<unsigned char> adj_;
};

namespace detail {

inline void bron_kerbosch(const UndirectedGraph& g, std::vector<std::size_t>& r,
                          std::vector<std::size_t> p, std::vector<std::size_t> x,
                          std::vector<std::vector<std::size_t>>& out) {
    if (p.empty()) {
        if (x.empty()) {
            auto clique = r;
            std::sort(clique.begin(), clique.end());
            out.push_back(std::move(clique));
        }
        return;
    }
    // Tomita pivot: the vertex of P u X with the most neighbours in P.
    std::size_t pivot = p.front();
    std::size_t best = 0;
    for (auto* set : {&p, &x}) {
        for (auto u : *set) {
            std::size_t cnt = 0;
            for (auto v : p) cnt += g.has_edge(u, v);
            if (cnt > best || (cnt == best && u < pivot)) {
                best = cnt;
                pivot = u;
            }
        }
    }
    std::vector<std::size_t> candidates;
    for (auto v : p)
        if (!g.has_edge(pivot, v)) candidates.push_back(v);

    for (auto v : candidates) {
        std::vector<std::size_t> np, nx;
        for (auto u : p)
            if (g.has_edge(v, u)) np.push_back(u);
        for (auto u : x)
            if (g.has_edge(v, u)) nx.push_back(u);
        r.push_back(v);
        bron_kerbosch(g, r, std::move(np), std::move(nx), out);
        r.pop_back();
        p.erase(std::find(p.begin(), p.end(), v));
        x.push_back(v);
    }
}

}  // namespace detail

/// All maximal cliques of g. Isolated vertices are reported as singleton
/// cliques. Each clique is sorted and the list is in lexicographic order.
inline std::vector<std::vector<std::size_t>> maximal_cliques(const UndirectedGraph& g) {
    std::vector<std::vector<std::size_t>> out;
    if (g.size() == 0) return out;
    std::vector<std::size_t> r, p(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) p[i] = i;
    detail::bron_kerbosch(g, r, std::move(p), {}, out);
    std::sort(out.begin(), out.end());
    return out;
}

/// Maximal cliques of largest cardinality.
inline std::vector<std::vector<std::size_t>> maximum_cliques(const UndirectedGraph& g) {
    auto all = maximal_cliques(g);
    std::size_t best = 0;
    for (const auto& c : all) best = std::max(best, c.size());
    std::vector<std::vector<std::size_t>> out;
    for (auto& c : all)
        if (c.size() == best) out.push_back(std::move(c));
    return out;
}

}  // namespace mmlearn
