#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "mmlearn/graph.hpp"
#include "mmlearn/stats.hpp"

namespace mmlearn {

using Rng = std::mt19937_64;

/// splitmix64 finaliser; used to derive independent per-trial seeds.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

struct LinearParameters {
    std::map<Edge, double> coefficients;
    /// Variance of each exogenous term: latent sources, latent and indicator
    /// noise, and error nodes.
    std::map<std::string, double> variances;
};

struct ImpuritySpec {
    std::size_t correlated_errors = 0;  // pairs of added indicators sharing an error node
    std::size_t observed_edges = 0;     // added indicator pairs W1 -> W2 under one latent
    std::size_t cross_loadings = 0;     // added indicators with two latent parents

    std::size_t total() const { return correlated_errors + observed_edges + cross_loadings; }
};

struct StudyConfig {
    std::size_t n_latents = 5;
    std::size_t indicators_per_latent = 4;
    std::size_t sample_size = 1000;
    double avg_latent_degree = 2.0;
    ImpuritySpec impurities;
    bool nonlinear = false;
    std::size_t trials = 10;
    std::uint64_t seed = 1;

    void validate() const {
        if (n_latents < 1) throw std::invalid_argument("study needs at least one latent");
        if (indicators_per_latent < 3) throw std::invalid_argument("study needs at least 3 indicators per latent");
        if (sample_size < 10) throw std::invalid_argument("sample size must be at least 10");
        if (trials < 1) throw std::invalid_argument("trials must be at least 1");
        if (avg_latent_degree < 0) throw std::invalid_argument("average latent degree must be non-negative");
        if (impurities.cross_loadings > 0 && n_latents < 2)
            throw std::invalid_argument("cross-loading impurities need at least two latents");
    }
};

struct GroundTruth {
    LatentVariableGraph graph;
    LinearParameters params;
    std::vector<PureMeasurementModel> true_pure_models;
};

/// Uniform on [-1.5, -0.5] u [0.5, 1.5].
inline double draw_coefficient(Rng& rng) {
    std::uniform_real_distribution<double> mag(0.5, 1.5);
    std::bernoulli_distribution sign(0.5);
    const double v = mag(rng);
    return sign(rng) ? v : -v;
}

inline double draw_variance(Rng& rng) { return std::uniform_real_distribution<double>(1.0, 3.0)(rng); }

/// Maximal purifications of g with three indicators per latent, keeping only
/// those with the most latents.
inline std::vector<PureMeasurementModel> reference_purifications(const LatentVariableGraph& g) {
    return keep_max_latent_count(maximal_purifications(g, 3));
}

inline GroundTruth random_purifiable_graph(const StudyConfig& cfg) {
    cfg.validate();
    Rng rng(cfg.seed);
    const auto m = cfg.n_latents;

    std::vector<std::string> latents;
    for (std::size_t i = 0; i < m; ++i) latents.push_back("L" + std::to_string(i + 1));

    std::vector<std::size_t> order(m);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<std::size_t> rank(m);
    for (std::size_t i = 0; i < m; ++i) rank[order[i]] = i;

    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    for (std::size_t a = 0; a < m; ++a)
        for (std::size_t b = a + 1; b < m; ++b) pairs.emplace_back(a, b);
    std::shuffle(pairs.begin(), pairs.end(), rng);
    const auto target = std::min<std::size_t>(
        pairs.size(), static_cast<std::size_t>(std::llround(cfg.avg_latent_degree * static_cast<double>(m) / 2.0)));
    std::vector<Edge> latent_edges;
    for (std::size_t e = 0; e < target; ++e) {
        auto [a, b] = pairs[e];
        if (rank[a] > rank[b]) std::swap(a, b);
        latent_edges.emplace_back(latents[a], latents[b]);
    }
    std::sort(latent_edges.begin(), latent_edges.end());

    std::vector<std::string> observed, errors;
    std::vector<Edge> measurement, error_edges;
    auto new_indicator = [&]() {
        observed.push_back("X" + std::to_string(observed.size() + 1));
        return observed.back();
    };
    for (std::size_t l = 0; l < m; ++l)
        for (std::size_t k = 0; k < cfg.indicators_per_latent; ++k)
            measurement.emplace_back(latents[l], new_indicator());

    std::uniform_int_distribution<std::size_t> pick_latent(0, m - 1);
    for (std::size_t i = 0; i < cfg.impurities.correlated_errors; ++i) {
        auto e = "E" + std::to_string(errors.size() + 1);
        errors.push_back(e);
        for (int side = 0; side < 2; ++side) {
            auto w = new_indicator();
            measurement.emplace_back(latents[pick_latent(rng)], w);
            error_edges.emplace_back(e, w);
        }
    }
    for (std::size_t i = 0; i < cfg.impurities.observed_edges; ++i) {
        const auto& l = latents[pick_latent(rng)];
        auto w1 = new_indicator();
        auto w2 = new_indicator();
        measurement.emplace_back(l, w1);
        measurement.emplace_back(l, w2);
        measurement.emplace_back(w1, w2);
    }
    for (std::size_t i = 0; i < cfg.impurities.cross_loadings; ++i) {
        auto a = pick_latent(rng);
        auto b = pick_latent(rng);
        while (b == a) b = pick_latent(rng);
        auto w = new_indicator();
        measurement.emplace_back(latents[std::min(a, b)], w);
        measurement.emplace_back(latents[std::max(a, b)], w);
    }

    GroundTruth gt{LatentVariableGraph(latents, observed, errors, latent_edges, measurement, error_edges), {}, {}};
    for (const auto* list : {&latent_edges, &measurement, &error_edges})
        for (const auto& e : *list) gt.params.coefficients[e] = draw_coefficient(rng);
    for (const auto* list : {&latents, &observed, &errors})
        for (const auto& v : *list) gt.params.variances[v] = draw_variance(rng);

    gt.true_pure_models = reference_purifications(gt.graph);
    if (gt.true_pure_models.empty() || gt.true_pure_models.front().clusters.size() != m)
        throw std::logic_error("generated graph is not purifiable with every latent kept");
    return gt;
}

namespace detail {

/// Structural coefficient matrix B (x = B x + e) over all graph nodes.
inline Eigen::MatrixXd coefficient_matrix(const LatentVariableGraph& g, const LinearParameters& p) {
    const auto n = g.node_count();
    Eigen::MatrixXd b = Eigen::MatrixXd::Zero(n, n);
    for (std::size_t v = 0; v < n; ++v)
        for (auto parent : g.parents(v)) {
            auto it = p.coefficients.find({g.label(parent), g.label(v)});
            if (it == p.coefficients.end())
                throw std::invalid_argument("missing coefficient for " + g.label(parent) + " -> " + g.label(v));
            b(v, parent) = it->second;
        }
    return b;
}

inline double variance_of(const LinearParameters& p, const std::string& label) {
    auto it = p.variances.find(label);
    if (it == p.variances.end()) throw std::invalid_argument("missing exogenous variance for " + label);
    if (!(it->second > 0.0)) throw std::invalid_argument("non-positive exogenous variance for " + label);
    return it->second;
}

}  // namespace detail

/// Implied covariance of the observed variables (graph order):
/// (I - B)^-1 Omega (I - B)^-T restricted to the indicators.
inline Eigen::MatrixXd population_covariance(const LatentVariableGraph& g, const LinearParameters& p) {
    const auto n = g.node_count();
    const Eigen::MatrixXd b = detail::coefficient_matrix(g, p);
    Eigen::VectorXd omega(n);
    for (std::size_t v = 0; v < n; ++v) omega(v) = detail::variance_of(p, g.label(v));
    const Eigen::MatrixXd inv = (Eigen::MatrixXd::Identity(n, n) - b).inverse();
    const Eigen::MatrixXd full = inv * omega.asDiagonal() * inv.transpose();
    const auto obs = g.observed_indices();
    Eigen::MatrixXd out(obs.size(), obs.size());
    for (std::size_t i = 0; i < obs.size(); ++i)
        for (std::size_t j = 0; j < obs.size(); ++j) out(i, j) = full(obs[i], obs[j]);
    return 0.5 * (out + out.transpose());
}

/// Moment cache holding the exact covariance, for population-mode oracles.
inline MomentCache population_moments(const GroundTruth& gt, std::size_t nominal_n = 1000000) {
    return MomentCache(gt.graph.observed(), population_covariance(gt.graph, gt.params), nominal_n);
}

/// Ancestral sampling with independent Gaussian exogenous terms.
inline Dataset sample_linear(const GroundTruth& gt, std::size_t n_rows, std::uint64_t seed) {
    const auto& g = gt.graph;
    const auto order = g.topological_order();
    if (!order) throw std::invalid_argument("graph is cyclic");
    const auto n = g.node_count();
    const Eigen::MatrixXd b = detail::coefficient_matrix(g, gt.params);
    std::vector<double> sd(n);
    for (std::size_t v = 0; v < n; ++v) sd[v] = std::sqrt(detail::variance_of(gt.params, g.label(v)));

    const auto obs = g.observed_indices();
    Dataset d{g.observed(), Eigen::MatrixXd(n_rows, obs.size())};
    Rng rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<double> value(n);
    for (std::size_t r = 0; r < n_rows; ++r) {
        for (auto v : *order) {
            double x = sd[v] * normal(rng);
            for (auto p : g.parents(v)) x += b(v, p) * value[p];
            value[v] = x;
        }
        for (std::size_t j = 0; j < obs.size(); ++j) d.values(r, j) = value[obs[j]];
    }
    return d;
}

// ---------------------------------------------------------------------------
// Non-linear, non-Gaussian diamond study

inline double sample_beta(Rng& rng, double a, double b) {
    const double x = std::gamma_distribution<double>(a, 1.0)(rng);
    const double y = std::gamma_distribution<double>(b, 1.0)(rng);
    return x / (x + y);
}

/// Diamond latent structure L1 -> {L2, L3} -> L4 with four indicators each.
/// X6 also loads on L3 and X13, X15 share an error node, so the graph has
/// exactly two maximal purifications: drop X6 and one of X13, X15.
inline LatentVariableGraph diamond_fixture() {
    std::vector<std::string> latents{"L1", "L2", "L3", "L4"};
    std::vector<std::string> observed;
    std::vector<Edge> measurement;
    for (int i = 1; i <= 16; ++i) {
        observed.push_back("X" + std::to_string(i));
        measurement.emplace_back(latents[(i - 1) / 4], observed.back());
    }
    measurement.emplace_back("L3", "X6");
    std::vector<Edge> latent_edges{{"L1", "L2"}, {"L1", "L3"}, {"L2", "L4"}, {"L3", "L4"}};
    return LatentVariableGraph(latents, observed, {"E1"}, latent_edges, measurement, {{"E1", "X13"}, {"E1", "X15"}});
}

struct Study3Sample {
    Dataset data;
    GroundTruth truth;
    Eigen::VectorXd l1;  // root latent per row
};

/// L1 ~ 0.5 Beta(2,4) + 0.5 Beta(4,2); L2 = L1^2 + e2; L3 = sqrt(L1) + e3;
/// L4 = sin(L2 / L3) + e4. Latent errors mix Beta(4,2) with -Beta(2,4),
/// indicator and error-node terms mix Beta(2,4) with Beta(4,2); every mixing
/// weight is drawn uniformly on [0,1]. Loadings follow the linear studies.
inline Study3Sample sample_study3(std::size_t n_rows, std::uint64_t seed) {
    if (n_rows < 10) throw std::invalid_argument("study 3 needs at least 10 rows");
    Rng rng(seed);
    GroundTruth gt{diamond_fixture(), {}, {}};
    const auto& g = gt.graph;
    for (const auto* list : {&g.measurement_edges(), &g.error_edges()})
        for (const auto& e : *list) gt.params.coefficients[e] = draw_coefficient(rng);

    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::map<std::string, double> weight;
    for (const auto& l : {"L2", "L3", "L4"}) weight[l] = unit(rng);
    for (const auto& o : g.observed()) weight[o] = unit(rng);
    for (const auto& e : g.errors()) weight[e] = unit(rng);

    auto latent_error = [&](const std::string& l) {
        return unit(rng) < weight[l] ? sample_beta(rng, 4, 2) : -sample_beta(rng, 2, 4);
    };
    auto indicator_error = [&](const std::string& o) {
        return unit(rng) < weight[o] ? sample_beta(rng, 2, 4) : sample_beta(rng, 4, 2);
    };

    const auto obs = g.observed_indices();
    Study3Sample s{Dataset{g.observed(), Eigen::MatrixXd(n_rows, obs.size())}, std::move(gt),
                   Eigen::VectorXd(n_rows)};
    const auto& graph = s.truth.graph;
    const auto order = *graph.topological_order();
    std::vector<double> value(graph.node_count());
    const auto l1 = graph.index_of("L1"), l2 = graph.index_of("L2"), l3 = graph.index_of("L3"),
               l4 = graph.index_of("L4");
    for (std::size_t r = 0; r < n_rows; ++r) {
        do {
            value[l1] = unit(rng) < 0.5 ? sample_beta(rng, 2, 4) : sample_beta(rng, 4, 2);
            value[l2] = value[l1] * value[l1] + latent_error("L2");
            value[l3] = std::sqrt(value[l1]) + latent_error("L3");
        } while (std::abs(value[l3]) < 1e-6);
        value[l4] = std::sin(value[l2] / value[l3]) + latent_error("L4");
        for (auto v : order) {
            if (graph.kind(v) == NodeKind::latent) continue;
            const auto& label = graph.label(v);
            double x = indicator_error(label);
            for (auto p : graph.parents(v)) x += s.truth.params.coefficients.at({graph.label(p), label}) * value[p];
            value[v] = x;
        }
        for (std::size_t j = 0; j < obs.size(); ++j) s.data.values(r, j) = value[obs[j]];
        s.l1(static_cast<Eigen::Index>(r)) = value[l1];
    }
    s.truth.true_pure_models = reference_purifications(graph);
    return s;
}

}  // namespace mmlearn
