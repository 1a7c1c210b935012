#include <gtest/gtest.h>

#include <numeric>
#include <random>

#include "support.hpp"

using namespace mmlearn;

namespace {

// Every correlation is nonzero and every tetrad holds; only the listed
// partial correlations vanish.
class ScriptedOracle final : public ConstraintOracle {
public:
    explicit ScriptedOracle(std::set<std::array<std::size_t, 3>> vanishing) : vanishing_(std::move(vanishing)) {}
    const std::vector<std::string>& labels() const override { return labels_; }
    bool vanishing_correlation(std::size_t, std::size_t) const override { return false; }
    bool vanishing_partial_correlation(std::size_t x, std::size_t y, std::size_t z) const override {
        return vanishing_.count({std::min(x, y), std::max(x, y), z}) > 0;
    }
    bool tetrad_holds(const TetradIndex&) const override { return true; }

private:
    std::vector<std::string> labels_{"A", "B", "C", "D"};
    std::set<std::array<std::size_t, 3>> vanishing_;
};

MomentCache population_cache(const GroundTruth& t, std::size_t n = 1000) {
    const auto c = mmtest::path_traced_covariance(t.graph, t.params);
    const auto& obs = t.graph.observed();
    Eigen::MatrixXd s(obs.size(), obs.size());
    for (std::size_t i = 0; i < obs.size(); ++i)
        for (std::size_t j = 0; j < obs.size(); ++j) s(i, j) = c.at({obs[i], obs[j]});
    return MomentCache(obs, s, n);
}

// One latent per block, each with the listed indicators; latents chained
// when `linked` is set, independent otherwise.
GroundTruth blocks(const std::vector<std::vector<std::string>>& indicators, bool linked) {
    std::vector<std::string> latents, observed;
    std::vector<Edge> latent_edges, measurement;
    for (std::size_t b = 0; b < indicators.size(); ++b) {
        latents.push_back("L" + std::to_string(b + 1));
        if (linked && b > 0) latent_edges.push_back({latents[b - 1], latents[b]});
        for (const auto& o : indicators[b]) {
            observed.push_back(o);
            measurement.push_back({latents[b], o});
        }
    }
    LatentVariableGraph g(latents, observed, {}, latent_edges, measurement, {});
    LinearParameters p;
    double c = 0.7;
    for (const auto& e : g.latent_edges()) p.coefficients[e] = 0.8;
    for (const auto& e : g.measurement_edges()) p.coefficients[e] = (c += 0.13);
    for (const auto& l : latents) p.variances[l] = 1.0;
    for (const auto& o : observed) p.variances[o] = 1.0;
    return {g, p, {}};
}

bool share_latent_parent(const LatentVariableGraph& g, const std::string& x, const std::string& y) {
    for (auto p : g.parents(g.index_of(x))) {
        if (g.kind(p) != NodeKind::latent) continue;
        const auto& ys = g.parents(g.index_of(y));
        if (std::find(ys.begin(), ys.end(), p) != ys.end()) return true;
    }
    return false;
}

std::pair<Triple, Triple> random_disjoint_triples(std::size_t n, std::mt19937_64& rng) {
    std::vector<std::size_t> v(n);
    std::iota(v.begin(), v.end(), 0);
    std::shuffle(v.begin(), v.end(), rng);
    return {{v[0], v[1], v[2]}, {v[3], v[4], v[5]}};
}

}  // namespace

TEST(TetradScore, Examples) {
    const auto c = mmtest::g2x3_cache();
    const MomentOracle o(c, mmtest::population_config());
    EXPECT_EQ(tetrad_score({"X1", "X2", "X3", "Y1"}, o), 3);
    EXPECT_EQ(tetrad_score({"X1", "X2", "Y1", "Y2"}, o), 1);
    EXPECT_THROW(tetrad_score(Quad{0, 1, 1, 2}, o), std::invalid_argument);

    EXPECT_EQ(tetrad_score(Quad{0, 1, 2, 3}, ScriptedOracle({})), 3);
    EXPECT_EQ(tetrad_score(Quad{0, 1, 2, 3}, ScriptedOracle({{1, 3, 0}})), 0);
}

TEST(TetradScore, InvariantUnderPermutation) {
    const auto t = random_purifiable_graph(mmtest::oracle_suite(1, 0, 9)[0].config);
    const auto m = build_moments(sample_linear(t, 500, 3), false);
    const MomentOracle o(m, SignificanceConfig{});
    std::mt19937_64 rng(1);
    for (int rep = 0; rep < 200; ++rep) {
        std::vector<std::size_t> v(m.size());
        std::iota(v.begin(), v.end(), 0);
        std::shuffle(v.begin(), v.end(), rng);
        Quad q{v[0], v[1], v[2], v[3]};
        const int base = tetrad_score(q, o);
        std::sort(q.begin(), q.end());
        do ASSERT_EQ(tetrad_score(q, o), base);
        while (std::next_permutation(q.begin(), q.end()));
    }
}

TEST(Unclustered, SeparatedByTetrads) {
    const auto c = mmtest::g2x3_cache();
    const MomentOracle o(c, mmtest::population_config());
    EXPECT_TRUE(unclustered({"X1", "X2", "X3"}, {"Y1", "Y2", "Y3"}, o));
    EXPECT_EQ(unclustered_outcome({0, 1, 2}, {3, 4, 5}, o), UnclusteredOutcome::separated);
}

TEST(Unclustered, SharedLatentIsClustered) {
    const auto t = blocks({{"A", "B", "C", "D", "E", "F"}}, false);
    const auto c = population_cache(t);
    const MomentOracle o(c, mmtest::population_config());
    EXPECT_FALSE(unclustered({"A", "B", "C"}, {"D", "E", "F"}, o));
}

TEST(Unclustered, UncorrelatedBlocks) {
    const auto t = blocks({{"A", "B", "C"}, {"D", "E", "F"}}, false);
    const auto c = population_cache(t);
    const MomentOracle o(c, mmtest::population_config());
    EXPECT_EQ(unclustered_outcome({0, 1, 2}, {3, 4, 5}, o), UnclusteredOutcome::uncorrelated);
}

TEST(Unclustered, OneSharedIndicatorIsClustered) {
    // A on block 2 moves one one-factor tetrad off zero.
    auto t = blocks({{"A", "B", "C"}, {"D", "E", "F"}}, true);
    LatentVariableGraph g(t.graph.latents(), t.graph.observed(), {}, t.graph.latent_edges(),
                          [&] {
                              auto m = t.graph.measurement_edges();
                              m.push_back({"L2", "A"});
                              return m;
                          }(),
                          {});
    t.params.coefficients[{"L2", "A"}] = 1.0;
    const auto c = population_cache({g, t.params, {}});
    const MomentOracle o(c, mmtest::population_config());
    EXPECT_FALSE(unclustered({"A", "B", "C"}, {"D", "E", "F"}, o));
}

TEST(Unclustered, OverlappingTriplesThrow) {
    const auto c = mmtest::g2x3_cache();
    const MomentOracle o(c, mmtest::population_config());
    EXPECT_THROW(unclustered(Triple{0, 1, 2}, Triple{2, 3, 4}, o), std::invalid_argument);
    EXPECT_THROW(unclustered(Triple{0, 0, 1}, Triple{3, 4, 5}, o), std::invalid_argument);
}

TEST(Unclustered, SymmetricUnderSwapAndReorder) {
    StudyConfig cfg;
    cfg.n_latents = 4;
    cfg.indicators_per_latent = 4;
    cfg.impurities = ImpuritySpec{1, 1, 1};
    cfg.seed = 21;
    const auto t = random_purifiable_graph(cfg);
    const auto m = build_moments(sample_linear(t, 1000, 4), false);
    const MomentOracle o(m, SignificanceConfig{});
    std::mt19937_64 rng(5);
    std::size_t positives = 0;
    for (int rep = 0; rep < 1000; ++rep) {
        auto [a, b] = random_disjoint_triples(m.size(), rng);
        const bool u = unclustered(a, b, o);
        positives += u;
        ASSERT_EQ(unclustered(b, a, o), u);
        std::shuffle(a.begin(), a.end(), rng);
        std::shuffle(b.begin(), b.end(), rng);
        ASSERT_EQ(unclustered(a, b, o), u);
    }
    EXPECT_GT(positives, 0u);
}

// At the population covariance the predicate never certifies a pair that
// shares a latent parent.
TEST(Unclustered, SoundAtPopulationCovariance) {
    std::mt19937_64 rng(8);
    std::size_t certified = 0;
    for (const auto& oc : mmtest::oracle_suite(24, 6, 31)) {
        const auto c = population_cache(oc.truth);
        const MomentOracle o(c, mmtest::population_config());
        const auto& labels = c.labels();
        const auto& g = oc.truth.graph;
        for (int rep = 0; rep < 600; ++rep) {
            auto [a, b] = random_disjoint_triples(labels.size(), rng);
            // Half the draws take `a` from one latent's children.
            const auto& kids = g.children(g.index_of(g.latents()[rng() % g.latents().size()]));
            if (rep % 2 == 0 && kids.size() >= 3) {
                std::vector<std::size_t> pick;
                for (auto k : kids)
                    if (g.kind(k) == NodeKind::observed) pick.push_back(c.index_of(g.label(k)));
                std::shuffle(pick.begin(), pick.end(), rng);
                if (pick.size() < 3) continue;
                a = {pick[0], pick[1], pick[2]};
                std::vector<std::size_t> rest;
                for (std::size_t v = 0; v < labels.size(); ++v)
                    if (v != a[0] && v != a[1] && v != a[2]) rest.push_back(v);
                std::shuffle(rest.begin(), rest.end(), rng);
                b = {rest[0], rest[1], rest[2]};
            }
            if (!unclustered(a, b, o)) continue;
            ++certified;
            for (auto x : a)
                for (auto y : b)
                    ASSERT_FALSE(share_latent_parent(oc.truth.graph, labels[x], labels[y]))
                        << labels[x] << " " << labels[y] << " seed " << oc.config.seed;
        }
    }
    EXPECT_GT(certified, 100u);
}

TEST(Oracle, MemoizesDecisions) {
    const auto c = mmtest::g2x3_cache();
    const MomentOracle o(c, mmtest::population_config());
    EXPECT_EQ(o.decisions_evaluated(), 0u);
    unclustered(Triple{0, 1, 2}, Triple{3, 4, 5}, o);
    const auto first = o.decisions_evaluated();
    EXPECT_GT(first, 0u);
    unclustered(Triple{3, 4, 5}, Triple{0, 1, 2}, o);
    EXPECT_EQ(o.decisions_evaluated(), first);
}

TEST(Oracle, CanonicalTetradSharesCache) {
    const auto c = mmtest::g2x3_cache();
    const MomentOracle o(c, mmtest::population_config());
    o.tetrad_holds(0, 1, 3, 4, TetradKind::ac_bd_eq_ad_bc);
    const auto n = o.decisions_evaluated();
    o.tetrad_holds(1, 0, 4, 3, TetradKind::ac_bd_eq_ad_bc);
    EXPECT_EQ(o.decisions_evaluated(), n);
}

TEST(Oracle, RejectsBadArguments) {
    const auto c = mmtest::g2x3_cache();
    SignificanceConfig bollen;
    bollen.test_kind = TestKind::bollen;
    EXPECT_THROW(MomentOracle(c, bollen), std::invalid_argument);
    const MomentOracle o(c, SignificanceConfig{});
    EXPECT_THROW(o.vanishing_correlation(0, 0), std::invalid_argument);
    EXPECT_THROW(o.vanishing_partial_correlation(0, 1, 9), std::invalid_argument);
    EXPECT_THROW(o.index_of("nope"), std::invalid_argument);
}
