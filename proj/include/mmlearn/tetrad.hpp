#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>

#include <Eigen/Dense>

#include "mmlearn/stats.hpp"

namespace mmlearn {

/// The three ways to equate two pairings of a quad (A,B,C,D).
enum class TetradKind {
    ab_cd_eq_ac_bd,  // sAB sCD = sAC sBD
    ac_bd_eq_ad_bc,  // sAC sBD = sAD sBC
    ab_cd_eq_ad_bc,  // sAB sCD = sAD sBC
};

inline constexpr std::array<TetradKind, 3> kAllTetradKinds{
    TetradKind::ab_cd_eq_ac_bd, TetradKind::ac_bd_eq_ad_bc, TetradKind::ab_cd_eq_ad_bc};

inline const char* to_string(TetradKind k) {
    switch (k) {
        case TetradKind::ab_cd_eq_ac_bd: return "AB*CD=AC*BD";
        case TetradKind::ac_bd_eq_ad_bc: return "AC*BD=AD*BC";
        case TetradKind::ab_cd_eq_ad_bc: return "AB*CD=AD*BC";
    }
    return "?";
}

using VarPair = std::pair<std::size_t, std::size_t>;

struct TetradIndex {
    std::array<std::size_t, 4> quad;
    TetradKind which;

    /// Left and right products as covariance-index pairs.
    std::array<VarPair, 4> products() const {
        const auto [a, b, c, d] = quad;
        switch (which) {
            case TetradKind::ab_cd_eq_ac_bd: return {{{a, b}, {c, d}, {a, c}, {b, d}}};
            case TetradKind::ac_bd_eq_ad_bc: return {{{a, c}, {b, d}, {a, d}, {b, c}}};
            case TetradKind::ab_cd_eq_ad_bc: return {{{a, b}, {c, d}, {a, d}, {b, c}}};
        }
        throw std::logic_error("bad tetrad kind");
    }

    /// The pairing of the quad that does not appear in the constraint.
    std::array<VarPair, 2> excluded_pairing() const {
        const auto [a, b, c, d] = quad;
        switch (which) {
            case TetradKind::ab_cd_eq_ac_bd: return {{{a, d}, {b, c}}};
            case TetradKind::ac_bd_eq_ad_bc: return {{{a, b}, {c, d}}};
            case TetradKind::ab_cd_eq_ad_bc: return {{{a, c}, {b, d}}};
        }
        throw std::logic_error("bad tetrad kind");
    }

    void check_distinct() const {
        for (int i = 0; i < 4; ++i)
            for (int j = i + 1; j < 4; ++j)
                if (quad[i] == quad[j]) throw std::invalid_argument("tetrad variables must be distinct");
    }
};

inline TetradIndex make_tetrad(const MomentCache& c, const std::array<std::string, 4>& labels,
                               TetradKind which) {
    TetradIndex t{{c.index_of(labels[0]), c.index_of(labels[1]), c.index_of(labels[2]),
                   c.index_of(labels[3])},
                  which};
    t.check_distinct();
    return t;
}

inline double tetrad_difference(const Eigen::MatrixXd& cov, const TetradIndex& t) {
    const auto p = t.products();
    return cov(p[0].first, p[0].second) * cov(p[1].first, p[1].second) -
           cov(p[2].first, p[2].second) * cov(p[3].first, p[3].second);
}

inline double tetrad_difference(const MomentCache& c, const TetradIndex& t) {
    t.check_distinct();
    for (auto v : t.quad)
        if (v >= c.size()) throw std::invalid_argument("tetrad variable index out of range");
    return tetrad_difference(c.covariance(), t);
}

/// Difference on the correlation scale, used for exact population decisions.
inline double standardized_tetrad_difference(const MomentCache& c, const TetradIndex& t) {
    double scale = 1.0;
    for (auto v : t.quad) scale *= c.cov(v, v);
    return tetrad_difference(c, t) / std::sqrt(scale);
}

enum class TetradDecision { holds, fails };

/// Normal-theory standard error of a tetrad difference:
/// var = (D(p1) D(p2) (N+1)/(N-1) - D(quad)) / (N-2), where p1, p2 are the
/// 2x2 blocks of the pairing absent from the constraint.
inline double wishart_variance(const MomentCache& c, const TetradIndex& t) {
    const double n = static_cast<double>(c.n_samples());
    if (c.n_samples() <= 4) throw std::invalid_argument("Wishart test requires N > 4");
    const auto& s = c.covariance();
    auto det2 = [&](VarPair p) {
        return s(p.first, p.first) * s(p.second, p.second) - s(p.first, p.second) * s(p.first, p.second);
    };
    Eigen::Matrix4d sub;
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) sub(i, j) = s(t.quad[i], t.quad[j]);
    const auto ex = t.excluded_pairing();
    return (det2(ex[0]) * det2(ex[1]) * (n + 1.0) / (n - 1.0) - sub.determinant()) / (n - 2.0);
}

inline double wishart_statistic(const MomentCache& c, const TetradIndex& t) {
    const double var = wishart_variance(c, t);
    if (!(var > 0.0))
        throw std::runtime_error("Wishart variance estimate is not positive (near-singular covariance)");
    return tetrad_difference(c, t) / std::sqrt(var);
}

/// Delta-method variance of a tetrad difference with the asymptotic
/// covariance of sample covariances estimated from fourth moments:
/// Cov(s_ij, s_kl) = (m_ijkl - s_ij s_kl) / N.
inline double bollen_variance(const MomentCache& c, const TetradIndex& t) {
    if (!c.has_fourth_moments())
        throw std::invalid_argument("Bollen test requires fourth moments (build_moments with_fourth)");
    if (c.n_samples() <= 4) throw std::invalid_argument("Bollen test requires N > 4");
    const auto& m4 = c.fourth_moments();
    const double n = static_cast<double>(c.n_samples());
    const double ml = (n - 1.0) / n;
    const auto [a, b, cc, d] = t.quad;
    const std::array<VarPair, 6> pairs{{{a, b}, {a, cc}, {a, d}, {b, cc}, {b, d}, {cc, d}}};
    auto slot = [&](VarPair p) {
        for (std::size_t k = 0; k < pairs.size(); ++k)
            if ((pairs[k].first == p.first && pairs[k].second == p.second) ||
                (pairs[k].first == p.second && pairs[k].second == p.first))
                return k;
        throw std::logic_error("pair not in quad");
    };
    const auto& s = c.covariance();
    const auto prod = t.products();
    Eigen::Matrix<double, 6, 1> grad = Eigen::Matrix<double, 6, 1>::Zero();
    grad(slot(prod[0])) += s(prod[1].first, prod[1].second);
    grad(slot(prod[1])) += s(prod[0].first, prod[0].second);
    grad(slot(prod[2])) -= s(prod[3].first, prod[3].second);
    grad(slot(prod[3])) -= s(prod[2].first, prod[2].second);

    Eigen::Matrix<double, 6, 6> acov;
    for (std::size_t i = 0; i < 6; ++i)
        for (std::size_t j = 0; j < 6; ++j) {
            const auto [p, q] = pairs[i];
            const auto [r, u] = pairs[j];
            acov(i, j) = (m4(p, q, r, u) - ml * s(p, q) * ml * s(r, u)) / n;
        }
    return grad.dot(acov * grad);
}

inline double bollen_statistic(const MomentCache& c, const TetradIndex& t) {
    const double var = bollen_variance(c, t);
    if (!(var > 0.0))
        throw std::runtime_error("Bollen variance estimate is not positive (near-singular moments)");
    return tetrad_difference(c, t) / std::sqrt(var);
}

namespace detail {
inline TetradDecision decide_tetrad(const MomentCache& c, const TetradIndex& t,
                                    const SignificanceConfig& cfg, double (*stat)(const MomentCache&, const TetradIndex&)) {
    t.check_distinct();
    if (cfg.population_mode)
        return std::abs(standardized_tetrad_difference(c, t)) <= kPopulationTolerance ? TetradDecision::holds
                                                                                       : TetradDecision::fails;
    const double z = stat(c, t);
    return std::abs(z) <= normal_critical_value(cfg.effective_alpha()) ? TetradDecision::holds
                                                                       : TetradDecision::fails;
}
}  // namespace detail

inline TetradDecision wishart_test(const MomentCache& c, const TetradIndex& t, const SignificanceConfig& cfg) {
    return detail::decide_tetrad(c, t, cfg, &wishart_statistic);
}

inline TetradDecision bollen_test(const MomentCache& c, const TetradIndex& t, const SignificanceConfig& cfg) {
    if (!cfg.population_mode && !c.has_fourth_moments())
        throw std::invalid_argument("Bollen test requires fourth moments (build_moments with_fourth)");
    return detail::decide_tetrad(c, t, cfg, &bollen_statistic);
}

inline TetradDecision test_tetrad(const MomentCache& c, const TetradIndex& t, const SignificanceConfig& cfg) {
    return cfg.test_kind == TestKind::wishart ? wishart_test(c, t, cfg) : bollen_test(c, t, cfg);
}

}  // namespace mmlearn
