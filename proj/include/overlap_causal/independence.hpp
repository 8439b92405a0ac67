#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <random>
#include <string>
#include <tuple>
#include <vector>

#include <Eigen/Dense>
#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include "overlap_causal/dataset.hpp"
#include "overlap_causal/errors.hpp"
#include "overlap_causal/graph.hpp"
#include "overlap_causal/graph_algorithms.hpp"
#include "overlap_causal/logging.hpp"

namespace overlap_causal {

struct CiDecision {
    double pvalue = 1.0;
    bool independent = true;
};

inline CiDecision decide(double pvalue, double alpha) { return {pvalue, pvalue > alpha}; }

/// Points beyond this many rows are thinned to an evenly spaced subsample
/// before computing the bandwidth.
inline constexpr int kBandwidthSampleCap = 1000;

namespace detail {

inline Eigen::MatrixXd squared_distances(const Eigen::MatrixXd& p) {
    const Eigen::MatrixXd gram = p * p.transpose();
    const Eigen::VectorXd norms = gram.diagonal();
    Eigen::MatrixXd d2 = (-2.0 * gram).colwise() + norms;
    d2.rowwise() += norms.transpose();
    return d2.cwiseMax(0.0);
}

/// Rows 0, step, 2*step, ... so that at most `cap` rows remain.
inline Eigen::MatrixXd thin_rows(const Eigen::MatrixXd& p, int cap) {
    const auto n = p.rows();
    if (n <= cap) return p;
    Eigen::MatrixXd out(cap, p.cols());
    for (int i = 0; i < cap; ++i) out.row(i) = p.row(static_cast<Eigen::Index>(i) * n / cap);
    return out;
}

inline Eigen::MatrixXd rbf(const Eigen::MatrixXd& p, double sigma) {
    return (-squared_distances(p) / (2.0 * sigma * sigma)).array().exp().matrix();
}

/// H K H with H = I - 11'/n.
inline Eigen::MatrixXd centered(const Eigen::MatrixXd& k) {
    const Eigen::VectorXd row_mean = k.rowwise().mean();
    const Eigen::RowVectorXd col_mean = k.colwise().mean();
    const double mean = k.mean();
    Eigen::MatrixXd c = k;
    c.colwise() -= row_mean;
    c.rowwise() -= col_mean;
    c.array() += mean;
    return c;
}

inline bool is_constant(const Eigen::VectorXd& v) {
    return v.size() == 0 || v.maxCoeff() - v.minCoeff() <= 1e-12 * std::max(1.0, v.cwiseAbs().maxCoeff());
}

inline Eigen::MatrixXd standardized(const Eigen::MatrixXd& m) {
    Eigen::MatrixXd out = m;
    for (Eigen::Index j = 0; j < out.cols(); ++j) {
        const double mean = out.col(j).mean();
        out.col(j).array() -= mean;
        const double sd = std::sqrt(out.col(j).squaredNorm() / std::max<Eigen::Index>(1, out.rows() - 1));
        if (sd > 0) out.col(j) /= sd;
    }
    return out;
}

/// Upper tail of Gamma(shape, scale) at x.
inline double gamma_survival(double x, double shape, double scale) {
    if (!(shape > 0) || !(scale > 0) || !std::isfinite(shape) || !std::isfinite(scale)) return 1.0;
    if (x <= 0) return 1.0;
    return boost::math::gamma_q(shape, x / scale);
}

}  // namespace detail

/// Median pairwise Euclidean distance between rows; 1.0 when that median is 0.
inline double median_bandwidth(const Eigen::MatrixXd& points) {
    if (points.rows() < 2) throw PreconditionError("median_bandwidth needs at least 2 samples");
    const Eigen::MatrixXd p = detail::thin_rows(points, kBandwidthSampleCap);
    const Eigen::MatrixXd d2 = detail::squared_distances(p);
    std::vector<double> d;
    d.reserve(static_cast<std::size_t>(p.rows() * (p.rows() - 1) / 2));
    for (Eigen::Index i = 0; i < p.rows(); ++i) {
        for (Eigen::Index j = i + 1; j < p.rows(); ++j) d.push_back(std::sqrt(d2(i, j)));
    }
    const std::size_t mid = d.size() / 2;
    std::nth_element(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(mid), d.end());
    double median = d[mid];
    if (d.size() % 2 == 0) {
        const double lower = *std::max_element(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(mid));
        median = 0.5 * (median + lower);
    }
    return median > 0 ? median : 1.0;
}

inline double median_bandwidth(const std::vector<double>& column) {
    return median_bandwidth(Eigen::Map<const Eigen::VectorXd>(column.data(), static_cast<Eigen::Index>(column.size())).eval());
}

struct HsicOptions {
    /// 0 selects the gamma approximation; otherwise a permutation null with
    /// this many shuffles.
    int permutations = 0;
    std::uint64_t seed = 0;
};

struct HsicResult {
    double statistic = 0.0;
    double pvalue = 1.0;
};

/// Biased HSIC with RBF kernels at the median bandwidth.
inline HsicResult hsic(const Eigen::VectorXd& x, const Eigen::VectorXd& y, const HsicOptions& opt = {}) {
    if (x.size() != y.size()) throw PreconditionError("hsic: length mismatch");
    const auto n = x.size();
    if (n < 20) throw PreconditionError("hsic: needs at least 20 samples");
    if (detail::is_constant(x) || detail::is_constant(y)) {
        logger()->warn("hsic: constant column, declaring independence");
        return {0.0, 1.0};
    }
    const Eigen::MatrixXd kx = detail::rbf(x, median_bandwidth(Eigen::MatrixXd(x)));
    const Eigen::MatrixXd ky = detail::rbf(y, median_bandwidth(Eigen::MatrixXd(y)));
    const Eigen::MatrixXd kc = detail::centered(kx);
    const Eigen::MatrixXd lc = detail::centered(ky);
    const double dn = static_cast<double>(n);
    const double stat = kc.cwiseProduct(lc).sum() / dn;

    if (opt.permutations > 0) {
        std::mt19937_64 rng(opt.seed);
        std::vector<Eigen::Index> perm(static_cast<std::size_t>(n));
        for (Eigen::Index i = 0; i < n; ++i) perm[static_cast<std::size_t>(i)] = i;
        int exceed = 0;
        for (int b = 0; b < opt.permutations; ++b) {
            std::shuffle(perm.begin(), perm.end(), rng);
            double s = 0.0;
            for (Eigen::Index j = 0; j < n; ++j) {
                const Eigen::Index pj = perm[static_cast<std::size_t>(j)];
                for (Eigen::Index i = 0; i < n; ++i) s += kc(i, j) * lc(perm[static_cast<std::size_t>(i)], pj);
            }
            if (s / dn >= stat) ++exceed;
        }
        return {stat, (1.0 + exceed) / (1.0 + opt.permutations)};
    }

    const double v_sum = (kc.array() * lc.array() / 6.0).square().sum();
    const double v_diag = (kc.diagonal().array() * lc.diagonal().array() / 6.0).square().sum();
    double var = (v_sum - v_diag) / dn / (dn - 1.0);
    var *= 72.0 * (dn - 4.0) * (dn - 5.0) / dn / (dn - 1.0) / (dn - 2.0) / (dn - 3.0);
    const double mu_x = (kx.sum() - kx.trace()) / dn / (dn - 1.0);
    const double mu_y = (ky.sum() - ky.trace()) / dn / (dn - 1.0);
    const double mean = (1.0 + mu_x * mu_y - mu_x - mu_y) / dn;
    if (!(var > 0) || !(mean > 0)) return {stat, 1.0};
    const double shape = mean * mean / var;
    const double scale = var * dn / mean;
    return {stat, detail::gamma_survival(stat, shape, scale)};
}

inline CiDecision hsic_test(const Eigen::VectorXd& x, const Eigen::VectorXd& y, double alpha,
                            const HsicOptions& opt = {}) {
    return decide(hsic(x, y, opt).pvalue, alpha);
}

struct KernelCiOptions {
    /// Ridge of the conditioning-kernel residual operator.
    double epsilon = 1e-3;
    /// Larger samples are thinned to this many evenly spaced rows.
    int sample_cap = 1000;
};

/// Kernel conditional independence p-value with a gamma-approximated null.
inline double kernel_ci_pvalue(const Eigen::VectorXd& x, const Eigen::VectorXd& y, const Eigen::MatrixXd& z,
                               const KernelCiOptions& opt = {}) {
    if (x.size() != y.size() || z.rows() != x.size()) throw PreconditionError("kernel_ci_test: length mismatch");
    if (z.cols() == 0) throw PreconditionError("kernel_ci_test: empty conditioning set, use hsic_test");
    if (x.size() < 20) throw PreconditionError("kernel_ci_test: needs at least 20 samples");
    if (detail::is_constant(x) || detail::is_constant(y)) {
        logger()->warn("kernel_ci_test: constant column, declaring independence");
        return 1.0;
    }
    Eigen::MatrixXd all(x.size(), 2 + z.cols());
    all << x, y, z;
    all = detail::standardized(detail::thin_rows(all, opt.sample_cap));
    const auto n = all.rows();
    const Eigen::MatrixXd zs = all.rightCols(z.cols());
    Eigen::MatrixXd xz(n, 1 + z.cols());
    xz << all.col(0), zs / 2.0;
    const Eigen::MatrixXd ys = all.col(1);

    const Eigen::MatrixXd kx = detail::centered(detail::rbf(xz, median_bandwidth(xz)));
    const Eigen::MatrixXd ky = detail::centered(detail::rbf(ys, median_bandwidth(ys)));
    const Eigen::MatrixXd kz = detail::centered(detail::rbf(zs, median_bandwidth(zs)));
    Eigen::MatrixXd reg = kz;
    reg.diagonal().array() += opt.epsilon;
    const Eigen::MatrixXd rz =
        opt.epsilon * reg.ldlt().solve(Eigen::MatrixXd::Identity(n, n));
    const Eigen::MatrixXd kxr = rz * kx * rz;
    const Eigen::MatrixXd kyr = rz * ky * rz;
    const double stat = kxr.cwiseProduct(kyr).sum();
    const double dn = static_cast<double>(n);
    const double mean = kxr.trace() * kyr.trace() / dn;
    const double var = 2.0 * kxr.squaredNorm() * kyr.squaredNorm() / (dn * dn);
    if (!(var > 0) || !(mean > 0)) return 1.0;
    return detail::gamma_survival(stat, mean * mean / var, var / mean);
}

inline CiDecision kernel_ci_test(const Eigen::VectorXd& x, const Eigen::VectorXd& y, const Eigen::MatrixXd& z,
                                 double alpha, const KernelCiOptions& opt = {}) {
    return decide(kernel_ci_pvalue(x, y, z, opt), alpha);
}

/// Fisher's method: survival of chi-squared with 2k degrees of freedom at
/// -2 sum(ln p). A p-value of 0 is clamped to the smallest normal double.
inline double fisher_pool(const std::vector<double>& pvalues) {
    if (pvalues.empty()) throw PreconditionError("fisher_pool: empty list");
    double stat = 0.0;
    for (double p : pvalues) {
        if (!(p >= 0.0 && p <= 1.0)) throw PreconditionError("fisher_pool: p-value outside [0, 1]");
        stat += -2.0 * std::log(std::max(p, std::numeric_limits<double>::min()));
    }
    const boost::math::chi_squared dist(2.0 * static_cast<double>(pvalues.size()));
    return boost::math::cdf(boost::math::complement(dist, stat));
}

/// Independence read off the m-separation relation of a known graph.
inline CiDecision oracle_ci(const MixedGraph& truth, Node x, Node y, NodeSet z) {
    return m_separated(truth, x, y, z) ? CiDecision{1.0, true} : CiDecision{0.0, false};
}

inline CiDecision oracle_ci(const MixedGraph& truth, const std::string& x, const std::string& y,
                            const std::vector<std::string>& z) {
    return oracle_ci(truth, truth.index(x), truth.index(y), truth.node_set(z));
}

/// Source of p-values for x _||_ y | z inside one dataset, by variable name.
class CiBackend {
public:
    virtual ~CiBackend() = default;
    virtual double pvalue(int dataset, const std::string& x, const std::string& y,
                          const std::vector<std::string>& z) = 0;
};

/// Answers every query from the m-separation relation of a truth graph,
/// which may contain latent nodes.
class OracleCiBackend : public CiBackend {
public:
    explicit OracleCiBackend(MixedGraph truth) : truth_(std::move(truth)) {}
    double pvalue(int, const std::string& x, const std::string& y, const std::vector<std::string>& z) override {
        return oracle_ci(truth_, x, y, z).pvalue;
    }
    const MixedGraph& truth() const { return truth_; }

private:
    MixedGraph truth_;
};

/// HSIC for marginal queries, the kernel conditional test otherwise.
class KernelCiBackend : public CiBackend {
public:
    explicit KernelCiBackend(std::vector<Dataset> datasets, KernelCiOptions opt = {})
        : datasets_(std::move(datasets)), opt_(opt) {}
    double pvalue(int dataset, const std::string& x, const std::string& y,
                  const std::vector<std::string>& z) override {
        const Dataset& d = datasets_.at(static_cast<std::size_t>(dataset));
        const Eigen::VectorXd xs = d.column(x);
        const Eigen::VectorXd ys = d.column(y);
        if (z.empty()) return hsic(xs, ys).pvalue;
        Eigen::MatrixXd zs(d.rows(), static_cast<Eigen::Index>(z.size()));
        for (std::size_t j = 0; j < z.size(); ++j) zs.col(static_cast<Eigen::Index>(j)) = d.column(z[j]);
        return kernel_ci_pvalue(xs, ys, zs, opt_);
    }

private:
    std::vector<Dataset> datasets_;
    KernelCiOptions opt_;
};

/// Memoizes p-values by (dataset, unordered pair, conditioning set). Safe to
/// share across threads; concurrent misses may compute the same entry twice.
class CiCache {
public:
    explicit CiCache(CiBackend& backend) : backend_(backend) {}

    double pvalue(int dataset, const MixedGraph& g, Node x, Node y, NodeSet z) {
        if (x > y) std::swap(x, y);
        const Key key{dataset, x, y, z.bits()};
        {
            std::lock_guard<std::mutex> lock(mutex_);
            auto it = cache_.find(key);
            if (it != cache_.end()) {
                ++hits_;
                return it->second;
            }
        }
        std::vector<std::string> zs;
        for (Node v : z) zs.push_back(g.label(v));
        const double p = backend_.pvalue(dataset, g.label(x), g.label(y), zs);
        std::lock_guard<std::mutex> lock(mutex_);
        cache_.emplace(key, p);
        ++misses_;
        return p;
    }
    std::size_t hits() const { return hits_; }
    std::size_t misses() const { return misses_; }

private:
    using Key = std::tuple<int, Node, Node, std::uint64_t>;
    CiBackend& backend_;
    std::mutex mutex_;
    std::map<Key, double> cache_;
    std::size_t hits_ = 0;
    std::size_t misses_ = 0;
};

}  // namespace overlap_causal
