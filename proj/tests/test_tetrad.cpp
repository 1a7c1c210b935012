#include <gtest/gtest.h>

#include <random>

#include "support.hpp"

using namespace mmlearn;

namespace {

MomentCache random_covariance(std::mt19937_64& rng, std::size_t n = 4, std::size_t samples = 1000) {
    std::normal_distribution<double> z(0, 1);
    Eigen::MatrixXd a(n, n + 2);
    for (Eigen::Index i = 0; i < a.rows(); ++i)
        for (Eigen::Index j = 0; j < a.cols(); ++j) a(i, j) = z(rng);
    Eigen::MatrixXd s = a * a.transpose();
    std::vector<std::string> labels;
    for (std::size_t i = 0; i < n; ++i) labels.push_back("V" + std::to_string(i));
    return MomentCache(labels, 0.5 * (s + s.transpose()), samples);
}

MomentCache from_map(const std::map<std::pair<std::string, std::string>, double>& c,
                     const std::vector<std::string>& labels, std::size_t n) {
    Eigen::MatrixXd s(labels.size(), labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i)
        for (std::size_t j = 0; j < labels.size(); ++j) s(i, j) = c.at({labels[i], labels[j]});
    return MomentCache(labels, s, n);
}

GroundTruth g2x3_truth() { return {mmtest::g2x3_graph(), mmtest::g2x3_params(), {}}; }

}  // namespace

TEST(Tetrad, G2x3OneFactorQuadHasZeroDifferences) {
    const auto c = mmtest::g2x3_cache();
    for (auto k : kAllTetradKinds) EXPECT_EQ(tetrad_difference(c, make_tetrad(c, {"X1", "X2", "X3", "Y1"}, k)), 0.0);
}

TEST(Tetrad, G2x3CrossQuadDifference) {
    const auto c = mmtest::g2x3_cache();
    const auto t = make_tetrad(c, {"X1", "X2", "Y1", "Y2"}, TetradKind::ab_cd_eq_ac_bd);
    EXPECT_DOUBLE_EQ(tetrad_difference(c, t), 1.0 * 1.0 - 0.5 * 0.5);
}

TEST(Tetrad, SwappingSidesNegates) {
    std::mt19937_64 rng(1);
    const auto c = random_covariance(rng);
    // AB*CD = AC*BD read right to left is AC*BD = AB*CD, i.e. quad (A,C,B,D).
    const auto t = make_tetrad(c, {"V0", "V1", "V2", "V3"}, TetradKind::ab_cd_eq_ac_bd);
    const auto swapped = make_tetrad(c, {"V0", "V2", "V1", "V3"}, TetradKind::ab_cd_eq_ac_bd);
    EXPECT_NEAR(tetrad_difference(c, t), -tetrad_difference(c, swapped), 1e-12);
}

TEST(Tetrad, InvalidTetrads) {
    const auto c = mmtest::g2x3_cache();
    EXPECT_THROW(make_tetrad(c, {"X1", "X1", "X2", "X3"}, TetradKind::ab_cd_eq_ac_bd), std::invalid_argument);
    EXPECT_THROW(make_tetrad(c, {"X1", "X2", "X3", "Q"}, TetradKind::ab_cd_eq_ac_bd), std::invalid_argument);
    EXPECT_THROW(tetrad_difference(c, TetradIndex{{0, 1, 2, 9}, TetradKind::ab_cd_eq_ac_bd}), std::invalid_argument);
    SignificanceConfig bollen;
    bollen.test_kind = TestKind::bollen;
    EXPECT_THROW(test_tetrad(c, make_tetrad(c, {"X1", "X2", "X3", "Y1"}, TetradKind::ab_cd_eq_ac_bd), bollen),
                 std::invalid_argument);
    EXPECT_THROW(wishart_statistic(MomentCache(c.labels(), c.covariance(), 4),
                                   make_tetrad(c, {"X1", "X2", "X3", "Y1"}, TetradKind::ab_cd_eq_ac_bd)),
                 std::invalid_argument);
}

TEST(Tetrad, PopulationModeDecisions) {
    const auto c = mmtest::g2x3_cache();
    auto cfg = mmtest::population_config();
    for (auto kind : {TestKind::wishart, TestKind::bollen}) {
        cfg.test_kind = kind;
        for (auto k : kAllTetradKinds)
            EXPECT_EQ(test_tetrad(c, make_tetrad(c, {"X1", "X2", "X3", "Y1"}, k), cfg), TetradDecision::holds);
        EXPECT_EQ(test_tetrad(c, make_tetrad(c, {"X1", "X2", "Y1", "Y2"}, TetradKind::ab_cd_eq_ac_bd), cfg),
                  TetradDecision::fails);
    }
}

TEST(Tetrad, LinearDependenceIdentity) {
    std::mt19937_64 rng(3);
    for (int rep = 0; rep < 1000; ++rep) {
        const auto c = random_covariance(rng);
        auto d = [&](TetradKind k) { return tetrad_difference(c, TetradIndex{{0, 1, 2, 3}, k}); };
        const double scale = c.covariance().cwiseAbs().maxCoeff();
        ASSERT_NEAR(d(TetradKind::ab_cd_eq_ac_bd) + d(TetradKind::ac_bd_eq_ad_bc) - d(TetradKind::ab_cd_eq_ad_bc), 0.0,
                    1e-12 * scale * scale);
    }
}

TEST(Tetrad, PermutationCoherence) {
    std::mt19937_64 rng(4);
    const auto c = random_covariance(rng);
    auto magnitudes = [&](std::array<std::size_t, 4> q) {
        std::vector<double> m;
        for (auto k : kAllTetradKinds) m.push_back(std::abs(tetrad_difference(c, TetradIndex{q, k})));
        std::sort(m.begin(), m.end());
        return m;
    };
    const auto base = magnitudes({0, 1, 2, 3});
    std::array<std::size_t, 4> q{0, 1, 2, 3};
    do {
        const auto m = magnitudes(q);
        for (int i = 0; i < 3; ++i) EXPECT_NEAR(m[i], base[i], 1e-12);
    } while (std::next_permutation(q.begin(), q.end()));
}

TEST(Tetrad, PopulationDecisionsFollowExactDifference) {
    std::mt19937_64 rng(6);
    auto cfg = mmtest::population_config();
    for (int rep = 0; rep < 200; ++rep) {
        const auto c = random_covariance(rng);
        for (auto kind : {TestKind::wishart, TestKind::bollen}) {
            cfg.test_kind = kind;
            for (auto k : kAllTetradKinds) {
                TetradIndex t{{0, 1, 2, 3}, k};
                if (std::abs(tetrad_difference(c, t)) > 1e-6)
                    EXPECT_EQ(test_tetrad(c, t, cfg), TetradDecision::fails);
            }
        }
    }
}

TEST(Tetrad, OneFactorPopulationSatisfiesEveryConstraint) {
    LatentVariableGraph g({"L"}, {"A", "B", "C", "D", "E"}, {}, {},
                          {{"L", "A"}, {"L", "B"}, {"L", "C"}, {"L", "D"}, {"L", "E"}}, {});
    LinearParameters p;
    const double loads[] = {1.3, -0.7, 0.9, 1.1, -1.4};
    for (int i = 0; i < 5; ++i) p.coefficients[g.measurement_edges()[i]] = loads[i];
    p.variances = {{"L", 2.0}, {"A", 1.0}, {"B", 1.5}, {"C", 2.5}, {"D", 1.2}, {"E", 0.8}};
    const auto c = from_map(mmtest::path_traced_covariance(g, p), g.observed(), 1000);
    const auto cfg = mmtest::population_config();
    std::array<std::size_t, 4> q{};
    for (q[0] = 0; q[0] < 5; ++q[0])
        for (q[1] = q[0] + 1; q[1] < 5; ++q[1])
            for (q[2] = q[1] + 1; q[2] < 5; ++q[2])
                for (q[3] = q[2] + 1; q[3] < 5; ++q[3])
                    for (auto k : kAllTetradKinds) EXPECT_EQ(wishart_test(c, TetradIndex{q, k}, cfg), TetradDecision::holds);
}

// The sampling variance of the tetrad difference over Gaussian replications
// should match the normal-theory formula evaluated at the true covariance.
TEST(Tetrad, WishartVarianceMatchesMonteCarlo) {
    const auto truth = g2x3_truth();
    const auto pop = mmtest::path_traced_covariance(truth.graph, truth.params);
    const std::vector<std::string> labels{"X1", "X2", "Y1", "Y2"};
    const std::size_t n = 400, reps = 4000;
    const auto c = from_map(pop, labels, n);
    const TetradIndex t{{0, 1, 2, 3}, TetradKind::ac_bd_eq_ad_bc};
    std::vector<double> diffs;
    for (std::size_t r = 0; r < reps; ++r) {
        const auto d = sample_linear(truth, n, mix_seed(77, r));
        const auto m = build_moments(d, false);
        diffs.push_back(tetrad_difference(m, make_tetrad(m, {"X1", "X2", "Y1", "Y2"}, t.which)));
    }
    double mean = 0, var = 0;
    for (double x : diffs) mean += x;
    mean /= reps;
    for (double x : diffs) var += (x - mean) * (x - mean);
    var /= reps - 1;
    EXPECT_NEAR(mean, 0.0, 4 * std::sqrt(var / reps));
    EXPECT_NEAR(var / wishart_variance(c, t), 1.0, 0.1);
}

TEST(Tetrad, BollenAgreesWithWishartVarianceUnderNormality) {
    const auto truth = g2x3_truth();
    const auto d = sample_linear(truth, 50000, 12);
    const auto m = build_moments(d, true);
    const auto t = make_tetrad(m, {"X1", "X2", "Y1", "Y2"}, TetradKind::ac_bd_eq_ad_bc);
    EXPECT_NEAR(bollen_variance(m, t) / wishart_variance(m, t), 1.0, 0.1);
}

TEST(Tetrad, ViolatedConstraintIsRejected) {
    const auto truth = g2x3_truth();
    SignificanceConfig cfg;
    std::size_t rejected = 0;
    for (std::size_t r = 0; r < 500; ++r) {
        const auto m = build_moments(sample_linear(truth, 1000, mix_seed(5, r)), false);
        rejected += wishart_test(m, make_tetrad(m, {"X1", "X2", "Y1", "Y2"}, TetradKind::ab_cd_eq_ac_bd), cfg) ==
                    TetradDecision::fails;
    }
    EXPECT_GT(rejected, 495u);
}

TEST(Tetrad, BothTestsRejectStrongViolation) {
    const auto truth = g2x3_truth();
    SignificanceConfig cfg;
    for (std::size_t r = 0; r < 20; ++r) {
        const auto m = build_moments(sample_linear(truth, 5000, mix_seed(8, r)), true);
        const auto t = make_tetrad(m, {"X1", "X2", "Y1", "Y2"}, TetradKind::ab_cd_eq_ac_bd);
        EXPECT_EQ(wishart_test(m, t, cfg), TetradDecision::fails);
        EXPECT_EQ(bollen_test(m, t, cfg), TetradDecision::fails);
    }
}

TEST(Tetrad, WishartCalibration) {
    EXPECT_NEAR(mmtest::null_rejection_rate(TestKind::wishart, 2000, 5000, 101), 0.05, 0.02);
}

TEST(Tetrad, BollenCalibration) {
    EXPECT_NEAR(mmtest::null_rejection_rate(TestKind::bollen, 1000, 5000, 202), 0.05, 0.03);
}
