#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <boost/math/distributions/normal.hpp>

namespace mmlearn {

/// N x n table of observations with column labels.
struct Dataset {
    std::vector<std::string> labels;
    Eigen::MatrixXd values;

    std::size_t rows() const { return static_cast<std::size_t>(values.rows()); }
    std::size_t cols() const { return static_cast<std::size_t>(values.cols()); }
};

enum class TestKind { wishart, bollen };

inline const char* to_string(TestKind k) { return k == TestKind::wishart ? "wishart" : "bollen"; }

inline TestKind parse_test_kind(const std::string& s) {
    if (s == "wishart") return TestKind::wishart;
    if (s == "bollen") return TestKind::bollen;
    throw std::invalid_argument("unknown test kind '" + s + "' (expected wishart or bollen)");
}

struct SignificanceConfig {
    double alpha = 0.05;
    TestKind test_kind = TestKind::wishart;
    /// Exact thresholding against kPopulationTolerance instead of a test.
    bool population_mode = false;
    /// Bonferroni divisor applied to alpha; 1 disables the correction.
    std::size_t comparisons = 1;
    /// Level for the partial correlation clause of Unclustered; alpha when
    /// unset. A large value declares a partial correlation zero only when its
    /// estimate is very close to zero.
    std::optional<double> unclustered_partial_alpha;

    void validate() const {
        if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("alpha must lie in (0,1)");
        if (unclustered_partial_alpha && !(*unclustered_partial_alpha > 0.0 && *unclustered_partial_alpha < 1.0))
            throw std::invalid_argument("unclustered_partial_alpha must lie in (0,1)");
        if (comparisons == 0) throw std::invalid_argument("comparisons must be positive");
    }
    double effective_alpha() const { return alpha / static_cast<double>(comparisons); }
    /// Copy whose alpha is the Unclustered partial correlation level.
    SignificanceConfig unclustered_guard() const {
        SignificanceConfig c = *this;
        c.alpha = unclustered_partial_alpha.value_or(alpha);
        c.unclustered_partial_alpha.reset();
        return c;
    }
};

inline constexpr double kPopulationTolerance = 1e-9;

/// Two-sided standard normal critical value for level alpha.
inline double normal_critical_value(double alpha) {
    static const boost::math::normal_distribution<double> std_normal(0.0, 1.0);
    return boost::math::quantile(std_normal, 1.0 - alpha / 2.0);
}

/// Central fourth moments, stored once per sorted index quadruple.
class FourthMoments {
public:
    FourthMoments() = default;
    explicit FourthMoments(std::size_t n) : n_(n), data_(packed_size(n), 0.0) {}

    std::size_t dimension() const { return n_; }

    double operator()(std::size_t i, std::size_t j, std::size_t k, std::size_t l) const {
        return data_[offset(i, j, k, l)];
    }
    double& at(std::size_t i, std::size_t j, std::size_t k, std::size_t l) {
        return data_[offset(i, j, k, l)];
    }

    static std::size_t packed_size(std::size_t n) { return choose(n + 3, 4); }

    /// Index of the sorted quadruple i <= j <= k <= l in combinatorial order.
    static std::size_t offset(std::size_t i, std::size_t j, std::size_t k, std::size_t l) {
        sort4(i, j, k, l);
        return choose(l + 3, 4) + choose(k + 2, 3) + choose(j + 1, 2) + i;
    }

private:
    static std::size_t choose(std::size_t n, std::size_t k) {
        if (k > n) return 0;
        std::size_t r = 1;
        for (std::size_t t = 1; t <= k; ++t) r = r * (n - k + t) / t;
        return r;
    }
    static void sort4(std::size_t& a, std::size_t& b, std::size_t& c, std::size_t& d) {
        if (a > b) std::swap(a, b);
        if (c > d) std::swap(c, d);
        if (a > c) std::swap(a, c);
        if (b > d) std::swap(b, d);
        if (b > c) std::swap(b, c);
    }

    std::size_t n_ = 0;
    std::vector<double> data_;
};

/// Sample size, labelled covariance (denominator N-1) and optional fourth
/// moments. Immutable once built.
class MomentCache {
public:
    MomentCache(std::vector<std::string> labels, Eigen::MatrixXd covariance, std::size_t n_samples,
                std::optional<FourthMoments> fourth = std::nullopt)
        : labels_(std::move(labels)),
          cov_(std::move(covariance)),
          n_(n_samples),
          fourth_(std::move(fourth)) {
        const auto n = labels_.size();
        if (static_cast<std::size_t>(cov_.rows()) != n || static_cast<std::size_t>(cov_.cols()) != n)
            throw std::invalid_argument("covariance dimension does not match label count");
        if (n_ == 0) throw std::invalid_argument("sample size must be positive");
        for (std::size_t i = 0; i < n; ++i) {
            if (!index_.emplace(labels_[i], i).second)
                throw std::invalid_argument("duplicate variable label '" + labels_[i] + "'");
            if (!(cov_(i, i) > 0.0))
                throw std::invalid_argument("non-positive variance for '" + labels_[i] + "'");
            for (std::size_t j = 0; j < i; ++j) {
                double scale = std::max(1.0, std::abs(cov_(i, j)));
                if (std::abs(cov_(i, j) - cov_(j, i)) > 1e-10 * scale)
                    throw std::invalid_argument("covariance matrix is not symmetric");
            }
        }
        if (fourth_ && fourth_->dimension() != n)
            throw std::invalid_argument("fourth-moment table dimension mismatch");
    }

    std::size_t n_samples() const { return n_; }
    std::size_t size() const { return labels_.size(); }
    const std::vector<std::string>& labels() const { return labels_; }
    const Eigen::MatrixXd& covariance() const { return cov_; }
    double cov(std::size_t i, std::size_t j) const { return cov_(i, j); }
    double correlation(std::size_t i, std::size_t j) const {
        return cov_(i, j) / std::sqrt(cov_(i, i) * cov_(j, j));
    }
    bool has_fourth_moments() const { return fourth_.has_value(); }
    const FourthMoments& fourth_moments() const {
        if (!fourth_) throw std::logic_error("fourth moments were not computed for this cache");
        return *fourth_;
    }

    std::size_t index_of(const std::string& label) const {
        auto it = index_.find(label);
        if (it == index_.end()) throw std::invalid_argument("unknown variable '" + label + "'");
        return it->second;
    }

private:
    std::vector<std::string> labels_;
    Eigen::MatrixXd cov_;
    std::size_t n_;
    std::optional<FourthMoments> fourth_;
    std::unordered_map<std::string, std::size_t> index_;
};

/// Unbiased (denominator N-1) covariance of the columns of `values`.
inline Eigen::MatrixXd sample_covariance(const Eigen::MatrixXd& values) {
    if (values.rows() < 2) throw std::invalid_argument("sample covariance needs at least 2 rows");
    const Eigen::RowVectorXd mean = values.colwise().mean();
    const Eigen::MatrixXd centered = values.rowwise() - mean;
    Eigen::MatrixXd cov = (centered.transpose() * centered) / static_cast<double>(values.rows() - 1);
    return 0.5 * (cov + cov.transpose());
}

inline MomentCache build_moments(const Dataset& data, bool with_fourth) {
    const auto N = data.rows();
    const auto n = data.cols();
    if (data.labels.size() != n) throw std::invalid_argument("label count does not match columns");
    if (N < 4) throw std::invalid_argument("at least 4 observations are required");
    if (n < 1) throw std::invalid_argument("dataset has no columns");
    if (!data.values.allFinite()) throw std::invalid_argument("dataset contains non-finite values");
    for (std::size_t i = 0; i < n; ++i) {
        const auto col = data.values.col(static_cast<Eigen::Index>(i));
        if (col.maxCoeff() == col.minCoeff())
            throw std::invalid_argument("column '" + data.labels[i] + "' has zero variance");
    }

    Eigen::MatrixXd cov = sample_covariance(data.values);
    const Eigen::MatrixXd centered = data.values.rowwise() - data.values.colwise().mean();

    std::optional<FourthMoments> fourth;
    if (with_fourth) {
        FourthMoments fm(n);
        std::vector<double> acc(FourthMoments::packed_size(n), 0.0);
        for (std::size_t r = 0; r < N; ++r) {
            const auto row = centered.row(static_cast<Eigen::Index>(r));
            std::size_t idx = 0;
            for (std::size_t l = 0; l < n; ++l)
                for (std::size_t k = 0; k <= l; ++k) {
                    const double kl = row(k) * row(l);
                    for (std::size_t j = 0; j <= k; ++j) {
                        const double jkl = row(j) * kl;
                        for (std::size_t i = 0; i <= j; ++i) acc[idx++] += row(i) * jkl;
                    }
                }
        }
        std::size_t idx = 0;
        for (std::size_t l = 0; l < n; ++l)
            for (std::size_t k = 0; k <= l; ++k)
                for (std::size_t j = 0; j <= k; ++j)
                    for (std::size_t i = 0; i <= j; ++i) fm.at(i, j, k, l) = acc[idx++] / static_cast<double>(N);
        fourth = std::move(fm);
    }
    return MomentCache(data.labels, std::move(cov), N, std::move(fourth));
}

/// Correlation of x and y, or their partial correlation given z.
inline double partial_correlation(const MomentCache& c, std::size_t x, std::size_t y,
                                  std::optional<std::size_t> z = std::nullopt) {
    if (x == y) throw std::invalid_argument("partial_correlation requires distinct variables");
    const double rxy = c.correlation(x, y);
    if (!z) return rxy;
    if (*z == x || *z == y) throw std::invalid_argument("conditioning variable must differ");
    const double rxz = c.correlation(x, *z);
    const double ryz = c.correlation(y, *z);
    const double denom = (1.0 - rxz * rxz) * (1.0 - ryz * ryz);
    if (!(denom > 0.0))
        throw std::domain_error("partial correlation undefined: conditioning variable is perfectly correlated");
    return (rxy - rxz * ryz) / std::sqrt(denom);
}

inline double partial_correlation(const MomentCache& c, const std::string& x, const std::string& y,
                                  const std::vector<std::string>& cond = {}) {
    if (cond.size() > 1) throw std::invalid_argument("at most one conditioning variable is supported");
    std::optional<std::size_t> z;
    if (!cond.empty()) z = c.index_of(cond.front());
    return partial_correlation(c, c.index_of(x), c.index_of(y), z);
}

enum class CorrelationDecision { vanishes, does_not_vanish };

/// Fisher z statistic atanh(r) * sqrt(N - 3 - |cond|).
inline double fisher_z(double r, std::size_t n_samples, std::size_t cond_size) {
    if (n_samples <= 3 + cond_size)
        throw std::invalid_argument("sample size too small for the Fisher z test");
    const double clipped = std::clamp(r, -1.0 + 1e-15, 1.0 - 1e-15);
    return std::atanh(clipped) * std::sqrt(static_cast<double>(n_samples - 3 - cond_size));
}

inline CorrelationDecision decide_vanishing_correlation(double r, std::size_t n_samples,
                                                        std::size_t cond_size,
                                                        const SignificanceConfig& cfg) {
    if (cfg.population_mode)
        return std::abs(r) <= kPopulationTolerance ? CorrelationDecision::vanishes
                                                   : CorrelationDecision::does_not_vanish;
    const double z = fisher_z(r, n_samples, cond_size);
    return std::abs(z) <= normal_critical_value(cfg.effective_alpha())
               ? CorrelationDecision::vanishes
               : CorrelationDecision::does_not_vanish;
}

inline CorrelationDecision test_vanishing_partial_correlation(const MomentCache& c, std::size_t x,
                                                              std::size_t y,
                                                              std::optional<std::size_t> z,
                                                              const SignificanceConfig& cfg) {
    const double r = partial_correlation(c, x, y, z);
    return decide_vanishing_correlation(r, c.n_samples(), z ? 1 : 0, cfg);
}

inline CorrelationDecision test_vanishing_partial_correlation(const MomentCache& c,
                                                              const std::string& x,
                                                              const std::string& y,
                                                              const std::vector<std::string>& cond,
                                                              const SignificanceConfig& cfg) {
    if (cond.size() > 1) throw std::invalid_argument("at most one conditioning variable is supported");
    std::optional<std::size_t> z;
    if (!cond.empty()) z = c.index_of(cond.front());
    return test_vanishing_partial_correlation(c, c.index_of(x), c.index_of(y), z, cfg);
}

}  // namespace mmlearn
