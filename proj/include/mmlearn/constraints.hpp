#pragma once

// Composite predicates over a ConstraintOracle: the tetrad score of a quad
// and the triple-versus-triple test certifying that two groups of
// indicators share no latent parent.

#include <algorithm>
#include <array>
#include <cstddef>
#include <stdexcept>
#include <string>

#include "mmlearn/oracle.hpp"

namespace mmlearn {

using Quad = std::array<std::size_t, 4>;
using Triple = std::array<std::size_t, 3>;

namespace detail {

/// True if some triple {x, y, z} of `vars` has a vanishing partial
/// correlation of x and y given z.
template <std::size_t N, class Vanishes>
bool any_vanishing_partial(const std::array<std::size_t, N>& vars, Vanishes&& vanishes) {
    for (std::size_t i = 0; i < N; ++i)
        for (std::size_t j = i + 1; j < N; ++j)
            for (std::size_t k = 0; k < N; ++k) {
                if (k == i || k == j) continue;
                if (vanishes(vars[i], vars[j], vars[k])) return true;
            }
    return false;
}

template <std::size_t N>
void check_distinct(const std::array<std::size_t, N>& v) {
    for (std::size_t i = 0; i < N; ++i)
        for (std::size_t j = i + 1; j < N; ++j)
            if (v[i] == v[j]) throw std::invalid_argument("variables must be distinct");
}

}  // namespace detail

/// Number of tetrad constraints (0..3) holding among four variables, or 0
/// when any triple among them has a vanishing partial correlation.
inline int tetrad_score(const Quad& vars, const ConstraintOracle& o) {
    detail::check_distinct(vars);
    if (detail::any_vanishing_partial(vars, [&](auto x, auto y, auto z) {
            return o.vanishing_partial_correlation(x, y, z);
        }))
        return 0;
    int score = 0;
    for (auto k : kAllTetradKinds) score += o.tetrad_holds(TetradIndex{vars, k}) ? 1 : 0;
    return score;
}

inline int tetrad_score(const std::array<std::string, 4>& labels, const ConstraintOracle& o) {
    return tetrad_score(Quad{o.index_of(labels[0]), o.index_of(labels[1]), o.index_of(labels[2]),
                             o.index_of(labels[3])},
                        o);
}

enum class UnclusteredOutcome {
    clustered,     // predicate is false
    uncorrelated,  // true via the all-cross-pairs-uncorrelated branch
    separated,     // true via the tetrad branch
};

/// Which branch, if any, certifies that no variable of `a` shares a latent
/// parent with a variable of `b`.
inline UnclusteredOutcome unclustered_outcome(Triple a, Triple b, const ConstraintOracle& o) {
    // Sample-mode decisions on the chained equalities depend on order.
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    const std::array<std::size_t, 6> all{a[0], a[1], a[2], b[0], b[1], b[2]};
    detail::check_distinct(all);

    bool all_cross_uncorrelated = true;
    for (auto x : a)
        for (auto y : b)
            if (o.correlated(x, y)) {
                all_cross_uncorrelated = false;
                break;
            }
    if (all_cross_uncorrelated) return UnclusteredOutcome::uncorrelated;

    for (std::size_t i = 0; i < 6; ++i)
        for (std::size_t j = i + 1; j < 6; ++j)
            if (o.vanishing_correlation(all[i], all[j])) return UnclusteredOutcome::clustered;

    // Every V in one triple forms a one-factor quad with the other triple:
    // sVX sYZ = sVY sXZ = sVZ sXY.
    auto one_factor_with = [&](const Triple& side, const Triple& other) {
        const auto [x, y, z] = other;
        for (auto v : side) {
            if (!o.tetrad_holds(v, x, y, z, TetradKind::ab_cd_eq_ac_bd)) return false;
            if (!o.tetrad_holds(v, x, y, z, TetradKind::ac_bd_eq_ad_bc)) return false;
        }
        return true;
    };
    if (!one_factor_with(a, b) || !one_factor_with(b, a)) return UnclusteredOutcome::clustered;

    // For {i,j} in a and {p,q} in b: s_ip s_jq = s_iq s_jp != s_ij s_pq.
    static constexpr std::array<std::array<std::size_t, 2>, 3> kPairs{{{0, 1}, {0, 2}, {1, 2}}};
    for (const auto& pa : kPairs)
        for (const auto& pb : kPairs) {
            const auto i = a[pa[0]], j = a[pa[1]], p = b[pb[0]], q = b[pb[1]];
            // quad (i, j, p, q): AC*BD = AD*BC is s_ip s_jq = s_iq s_jp.
            if (!o.tetrad_holds(i, j, p, q, TetradKind::ac_bd_eq_ad_bc)) return UnclusteredOutcome::clustered;
            if (o.tetrad_holds(i, j, p, q, TetradKind::ab_cd_eq_ac_bd)) return UnclusteredOutcome::clustered;
        }

    if (detail::any_vanishing_partial(all, [&](auto x, auto y, auto z) {
            return o.unclustered_partial_vanishes(x, y, z);
        }))
        return UnclusteredOutcome::clustered;
    return UnclusteredOutcome::separated;
}

inline bool unclustered(const Triple& a, const Triple& b, const ConstraintOracle& o) {
    return unclustered_outcome(a, b, o) != UnclusteredOutcome::clustered;
}

inline bool unclustered(const std::array<std::string, 3>& a, const std::array<std::string, 3>& b,
                        const ConstraintOracle& o) {
    return unclustered(Triple{o.index_of(a[0]), o.index_of(a[1]), o.index_of(a[2])},
                       Triple{o.index_of(b[0]), o.index_of(b[1]), o.index_of(b[2])}, o);
}

}  // namespace mmlearn
