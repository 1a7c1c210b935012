#pragma once

// Fixtures and independent oracles shared by the unit tests and the
// acceptance binary. Nothing here calls the library routine it checks.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "mmlearn/mmlearn.hpp"

namespace mmtest {

using namespace mmlearn;

// Two correlated latents with three unit-loading indicators each:
// within-cluster covariance 1, cross 0.5, diagonal 2.
inline LatentVariableGraph g2x3_graph() {
    return LatentVariableGraph({"L1", "L2"}, {"X1", "X2", "X3", "Y1", "Y2", "Y3"}, {}, {{"L1", "L2"}},
                               {{"L1", "X1"}, {"L1", "X2"}, {"L1", "X3"}, {"L2", "Y1"}, {"L2", "Y2"}, {"L2", "Y3"}},
                               {});
}

inline LinearParameters g2x3_params() {
    const auto g = g2x3_graph();
    LinearParameters p;
    for (const auto& e : g.measurement_edges()) p.coefficients[e] = 1.0;
    p.coefficients[{"L1", "L2"}] = 0.5;
    p.variances = {{"L1", 1.0}, {"L2", 0.75}};
    for (const auto& o : g.observed()) p.variances[o] = 1.0;
    return p;
}

// Covariance written down by hand rather than derived from the graph.
inline MomentCache g2x3_cache(std::size_t n = 1000000) {
    const std::vector<std::string> labels{"X1", "X2", "X3", "Y1", "Y2", "Y3"};
    Eigen::MatrixXd s(6, 6);
    for (int i = 0; i < 6; ++i)
        for (int j = 0; j < 6; ++j) s(i, j) = i == j ? 2.0 : ((i < 3) == (j < 3) ? 1.0 : 0.5);
    return MomentCache(labels, s, n);
}

inline SignificanceConfig population_config() {
    SignificanceConfig c;
    c.population_mode = true;
    return c;
}

// Covariance of every node by recursion over a topological order:
// cov(v, u) = sum_p b(p->v) cov(p, u) for u before v, plus the exogenous
// variance on the diagonal.
inline std::map<std::pair<std::string, std::string>, double> path_traced_covariance(const LatentVariableGraph& g,
                                                                                    const LinearParameters& p) {
    const auto order = *g.topological_order();
    const auto n = g.node_count();
    std::vector<std::vector<double>> c(n, std::vector<double>(n, 0.0));
    std::vector<std::size_t> done;
    for (auto v : order) {
        const auto& lv = g.label(v);
        for (auto u : done) {
            double s = 0;
            for (auto par : g.parents(v)) s += p.coefficients.at({g.label(par), lv}) * c[par][u];
            c[v][u] = c[u][v] = s;
        }
        double var = 0;
        auto it = p.variances.find(lv);
        if (it != p.variances.end()) var = it->second;
        for (auto a : g.parents(v))
            for (auto b : g.parents(v))
                var += p.coefficients.at({g.label(a), lv}) * p.coefficients.at({g.label(b), lv}) * c[a][b];
        c[v][v] = var;
        done.push_back(v);
    }
    std::map<std::pair<std::string, std::string>, double> out;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) out[{g.label(i), g.label(j)}] = c[i][j];
    return out;
}

inline double naive_fourth_moment(const Eigen::MatrixXd& x, int i, int j, int k, int l) {
    const auto n = x.rows();
    double mi = 0, mj = 0, mk = 0, ml = 0;
    for (Eigen::Index r = 0; r < n; ++r) {
        mi += x(r, i);
        mj += x(r, j);
        mk += x(r, k);
        ml += x(r, l);
    }
    mi /= n, mj /= n, mk /= n, ml /= n;
    double s = 0;
    for (Eigen::Index r = 0; r < n; ++r) s += (x(r, i) - mi) * (x(r, j) - mj) * (x(r, k) - mk) * (x(r, l) - ml);
    return s / n;
}

// Pairs of indicators that share a latent in some true purification must
// share a pattern cluster, or sit in two clusters joined by a latent link.
inline bool pattern_consistent(const MeasurementPattern& p, const std::vector<PureMeasurementModel>& truth,
                               std::string* why = nullptr) {
    std::map<std::string, std::vector<std::string>> member_of;
    for (const auto& [latent, children] : p.clusters)
        for (const auto& o : children) member_of[o].push_back(latent);
    auto joined = [&](const std::string& a, const std::string& b) {
        for (const auto& la : member_of[a])
            for (const auto& lb : member_of[b])
                if (la == lb || p.linked(la, lb)) return true;
        return false;
    };
    for (const auto& m : truth)
        for (const auto& [latent, children] : m.clusters) {
            std::vector<std::string> v(children.begin(), children.end());
            for (std::size_t i = 0; i < v.size(); ++i) {
                if (member_of[v[i]].empty()) {
                    if (why) *why = v[i] + " of " + latent + " is not in any pattern cluster";
                    return false;
                }
                for (std::size_t j = i + 1; j < v.size(); ++j)
                    if (!joined(v[i], v[j])) {
                        if (why) *why = v[i] + " and " + v[j] + " are separated";
                        return false;
                    }
            }
        }
    return true;
}

struct OracleCase {
    StudyConfig config;
    GroundTruth truth;
};

// Purifiable graphs with m, n in {3,4,5} and every mix of the three
// impurity kinds, followed by small graphs (at most 12 observed).
inline std::vector<OracleCase> oracle_suite(std::size_t general, std::size_t small, std::uint64_t seed) {
    std::vector<OracleCase> out;
    for (std::size_t t = 0; t < general; ++t) {
        StudyConfig c;
        c.n_latents = 3 + t % 3;
        c.indicators_per_latent = 3 + (t / 3) % 3;
        c.impurities = ImpuritySpec{t % 2, (t / 2) % 2, (t / 4) % 2};
        c.seed = mix_seed(seed, t);
        out.push_back({c, random_purifiable_graph(c)});
    }
    for (std::size_t t = 0; t < small; ++t) {
        StudyConfig c;
        const auto shape = t % 3;
        c.n_latents = shape == 1 ? 4 : 3;
        c.indicators_per_latent = shape == 2 ? 4 : 3;
        if (shape == 0) c.impurities = ImpuritySpec{t % 2, (t / 3) % 2, (t / 6) % 2};
        c.seed = mix_seed(seed + 1, t);
        out.push_back({c, random_purifiable_graph(c)});
    }
    return out;
}

// One-factor model X_i = lambda_i L + e_i.
struct OneFactor {
    std::vector<double> loadings{1.0, 0.8, 1.2, 0.9};
    std::vector<std::string> labels{"A", "B", "C", "D"};
};

inline Dataset gaussian_one_factor(const OneFactor& f, std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> z(0.0, 1.0);
    Dataset d{f.labels, Eigen::MatrixXd(n, f.loadings.size())};
    for (std::size_t r = 0; r < n; ++r) {
        const double l = z(rng);
        for (std::size_t j = 0; j < f.loadings.size(); ++j) d.values(r, j) = f.loadings[j] * l + z(rng);
    }
    return d;
}

// Root latent as a 50/50 Beta(2,4)/Beta(4,2) mixture, indicator errors as
// Beta mixtures with per-indicator weights.
inline Dataset beta_mixture_one_factor(const OneFactor& f, std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    auto beta = [&](double a, double b) {
        const double x = std::gamma_distribution<double>(a, 1.0)(rng);
        const double y = std::gamma_distribution<double>(b, 1.0)(rng);
        return x / (x + y);
    };
    std::vector<double> w;
    for (std::size_t j = 0; j < f.loadings.size(); ++j) w.push_back(u(rng));
    Dataset d{f.labels, Eigen::MatrixXd(n, f.loadings.size())};
    for (std::size_t r = 0; r < n; ++r) {
        const double l = u(rng) < 0.5 ? beta(2, 4) : beta(4, 2);
        for (std::size_t j = 0; j < f.loadings.size(); ++j)
            d.values(r, j) = f.loadings[j] * l + (u(rng) < w[j] ? beta(2, 4) : beta(4, 2));
    }
    return d;
}

// Null rejection rate of one tetrad constraint over independent datasets.
inline double null_rejection_rate(TestKind kind, std::size_t reps, std::size_t n, std::uint64_t seed,
                                  double alpha = 0.05) {
    OneFactor f;
    SignificanceConfig cfg;
    cfg.alpha = alpha;
    cfg.test_kind = kind;
    std::size_t rejected = 0;
    for (std::size_t r = 0; r < reps; ++r) {
        const auto data = kind == TestKind::wishart ? gaussian_one_factor(f, n, mix_seed(seed, r))
                                                    : beta_mixture_one_factor(f, n, mix_seed(seed, r));
        const auto m = build_moments(data, kind == TestKind::bollen);
        const auto t = make_tetrad(m, {"A", "B", "C", "D"}, TetradKind::ab_cd_eq_ac_bd);
        rejected += test_tetrad(m, t, cfg) == TetradDecision::fails;
    }
    return static_cast<double>(rejected) / static_cast<double>(reps);
}

}  // namespace mmtest
