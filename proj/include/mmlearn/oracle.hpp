#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <memory>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "mmlearn/stats.hpp"
#include "mmlearn/tetrad.hpp"

namespace mmlearn {

/// Source of the three kinds of statistical decision the search relies on.
/// Implementations must be deterministic for fixed inputs within a run.
class ConstraintOracle {
public:
    virtual ~ConstraintOracle() = default;

    virtual const std::vector<std::string>& labels() const = 0;
    virtual bool vanishing_correlation(std::size_t x, std::size_t y) const = 0;
    virtual bool vanishing_partial_correlation(std::size_t x, std::size_t y, std::size_t z) const = 0;
    virtual bool tetrad_holds(const TetradIndex& t) const = 0;
    /// Partial correlation decision used by the nonzero clause of
    /// Unclustered; may run at its own level.
    virtual bool unclustered_partial_vanishes(std::size_t x, std::size_t y, std::size_t z) const {
        return vanishing_partial_correlation(x, y, z);
    }

    std::size_t size() const { return labels().size(); }
    std::size_t index_of(const std::string& label) const {
        const auto& l = labels();
        auto it = std::find(l.begin(), l.end(), label);
        if (it == l.end()) throw std::invalid_argument("unknown variable '" + label + "'");
        return static_cast<std::size_t>(it - l.begin());
    }
    bool correlated(std::size_t x, std::size_t y) const { return !vanishing_correlation(x, y); }
    bool tetrad_holds(std::size_t a, std::size_t b, std::size_t c, std::size_t d, TetradKind k) const {
        return tetrad_holds(TetradIndex{{a, b, c, d}, k});
    }
};

namespace detail {

inline std::size_t choose_small(std::size_t n, std::size_t k) {
    if (k > n) return 0;
    std::size_t r = 1;
    for (std::size_t t = 1; t <= k; ++t) r = r * (n - k + t) / t;
    return r;
}

/// Lazily filled decision table. 0 = unknown, 1 = true, 2 = false. Racing
/// writers store the same deterministic value.
class DecisionTable {
public:
    explicit DecisionTable(std::size_t n) : n_(n), cells_(std::make_unique<std::atomic<std::int8_t>[]>(n)) {
        for (std::size_t i = 0; i < n; ++i) cells_[i].store(0, std::memory_order_relaxed);
    }
    template <class F>
    bool get(std::size_t i, F&& compute) const {
        auto v = cells_[i].load(std::memory_order_acquire);
        if (v == 0) {
            v = compute() ? 1 : 2;
            cells_[i].store(v, std::memory_order_release);
            evaluated_.fetch_add(1, std::memory_order_relaxed);
        }
        return v == 1;
    }
    std::size_t size() const { return n_; }
    std::size_t evaluated() const { return evaluated_.load(); }

private:
    std::size_t n_;
    std::unique_ptr<std::atomic<std::int8_t>[]> cells_;
    mutable std::atomic<std::size_t> evaluated_{0};
};

}  // namespace detail

/// Canonical representative of a tetrad constraint: sorted quad, with the
/// constraint identified by the pairing it leaves out.
inline TetradIndex canonical_tetrad(const TetradIndex& t) {
    t.check_distinct();
    auto q = t.quad;
    std::sort(q.begin(), q.end());
    const auto ex = t.excluded_pairing();
    std::size_t partner = 0;
    for (auto p : ex) {
        if (p.first == q[0]) partner = p.second;
        if (p.second == q[0]) partner = p.first;
    }
    TetradKind k = partner == q[1]   ? TetradKind::ac_bd_eq_ad_bc
                   : partner == q[2] ? TetradKind::ab_cd_eq_ad_bc
                                     : TetradKind::ab_cd_eq_ac_bd;
    return TetradIndex{q, k};
}

/// Statistical (or exact, in population mode) decisions over a moment
/// cache, memoized so every hypothesis is evaluated at most once.
class MomentOracle final : public ConstraintOracle {
public:
    MomentOracle(const MomentCache& cache, SignificanceConfig cfg)
        : cache_(cache),
          cfg_(cfg),
          n_(cache.size()),
          corr_(n_ * n_),
          partial_(n_ * n_ * n_),
          guard_(cfg.unclustered_partial_alpha ? n_ * n_ * n_ : 0),
          tetrads_(detail::choose_small(n_, 4) * 3) {
        cfg_.validate();
        if (cfg_.test_kind == TestKind::bollen && !cfg_.population_mode && !cache.has_fourth_moments())
            throw std::invalid_argument("Bollen test requires a moment cache with fourth moments");
    }

    const std::vector<std::string>& labels() const override { return cache_.labels(); }
    const MomentCache& cache() const { return cache_; }
    const SignificanceConfig& config() const { return cfg_; }

    bool vanishing_correlation(std::size_t x, std::size_t y) const override {
        check(x), check(y);
        if (x == y) throw std::invalid_argument("correlation of a variable with itself");
        if (x > y) std::swap(x, y);
        return corr_.get(x * n_ + y, [&] {
            return test_vanishing_partial_correlation(cache_, x, y, std::nullopt, cfg_) ==
                   CorrelationDecision::vanishes;
        });
    }

    bool vanishing_partial_correlation(std::size_t x, std::size_t y, std::size_t z) const override {
        check(x), check(y), check(z);
        if (x == y || x == z || y == z) throw std::invalid_argument("partial correlation needs distinct variables");
        if (x > y) std::swap(x, y);
        return partial_.get((x * n_ + y) * n_ + z, [&] {
            return test_vanishing_partial_correlation(cache_, x, y, z, cfg_) == CorrelationDecision::vanishes;
        });
    }

    bool unclustered_partial_vanishes(std::size_t x, std::size_t y, std::size_t z) const override {
        if (!cfg_.unclustered_partial_alpha) return vanishing_partial_correlation(x, y, z);
        check(x), check(y), check(z);
        if (x == y || x == z || y == z) throw std::invalid_argument("partial correlation needs distinct variables");
        if (x > y) std::swap(x, y);
        return guard_.get((x * n_ + y) * n_ + z, [&] {
            return test_vanishing_partial_correlation(cache_, x, y, z, cfg_.unclustered_guard()) ==
                   CorrelationDecision::vanishes;
        });
    }

    using ConstraintOracle::tetrad_holds;
    bool tetrad_holds(const TetradIndex& t) const override {
        for (auto v : t.quad) check(v);
        const auto c = canonical_tetrad(t);
        const auto [w, x, y, z] = c.quad;
        const std::size_t quad_rank = detail::choose_small(z, 4) + detail::choose_small(y, 3) +
                                      detail::choose_small(x, 2) + w;
        return tetrads_.get(quad_rank * 3 + static_cast<std::size_t>(c.which),
                            [&] { return test_tetrad(cache_, c, cfg_) == TetradDecision::holds; });
    }

    std::size_t decisions_evaluated() const {
        return corr_.evaluated() + partial_.evaluated() + guard_.evaluated() + tetrads_.evaluated();
    }

private:
    void check(std::size_t v) const {
        if (v >= n_) throw std::invalid_argument("variable index out of range");
    }

    const MomentCache& cache_;
    SignificanceConfig cfg_;
    std::size_t n_;
    detail::DecisionTable corr_, partial_, guard_, tetrads_;
};

}  // namespace mmlearn
