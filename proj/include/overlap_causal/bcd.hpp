#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "overlap_causal/errors.hpp"
#include "overlap_causal/graph.hpp"
#include "overlap_causal/graph_algorithms.hpp"
#include "overlap_causal/independence.hpp"
#include "overlap_causal/logging.hpp"

namespace overlap_causal {

/// Marginal causal structure of an ordered pair (A, B). The first five
/// values are the dependent structures; `Independent` means no dependence
/// at all and `Unmatched` a pattern none of the others describes.
enum class BivariateStructure {
    DirectedAB,
    DirectedBA,
    CommonCause,
    DirectedCommonAB,
    DirectedCommonBA,
    Independent,
    Unmatched,
};

inline const char* to_string(BivariateStructure s) {
    switch (s) {
        case BivariateStructure::DirectedAB: return "directed_ab";
        case BivariateStructure::DirectedBA: return "directed_ba";
        case BivariateStructure::CommonCause: return "common_cause";
        case BivariateStructure::DirectedCommonAB: return "directed_common_ab";
        case BivariateStructure::DirectedCommonBA: return "directed_common_ba";
        case BivariateStructure::Independent: return "independent";
        case BivariateStructure::Unmatched: return "unmatched";
    }
    return "unmatched";
}

/// The same structure seen from the pair (B, A).
inline BivariateStructure swapped(BivariateStructure s) {
    switch (s) {
        case BivariateStructure::DirectedAB: return BivariateStructure::DirectedBA;
        case BivariateStructure::DirectedBA: return BivariateStructure::DirectedAB;
        case BivariateStructure::DirectedCommonAB: return BivariateStructure::DirectedCommonBA;
        case BivariateStructure::DirectedCommonBA: return BivariateStructure::DirectedCommonAB;
        default: return s;
    }
}

/// Pairs sorted into the Directed, Common and DirectedCommon stores. Order in
/// the directed stores is cause first.
class CausalStore {
public:
    using Pair = std::pair<std::string, std::string>;

    /// Records the structure of (a, b). Recording a different structure for a
    /// pair already present is a contradiction.
    void add(const std::string& a, const std::string& b, BivariateStructure s) {
        if (a == b) throw PreconditionError("causal store: pair needs two distinct variables");
        if (s == BivariateStructure::Independent || s == BivariateStructure::Unmatched) {
            throw PreconditionError("causal store: only dependent structures can be stored");
        }
        if (auto existing = lookup(a, b)) {
            if (*existing != s) {
                throw ContradictionError("conflicting causal structures for pair (" + a + ", " + b + "): " +
                                         to_string(*existing) + " vs " + to_string(s));
            }
            return;
        }
        switch (s) {
            case BivariateStructure::DirectedAB: directed_.insert({a, b}); break;
            case BivariateStructure::DirectedBA: directed_.insert({b, a}); break;
            case BivariateStructure::CommonCause: common_.insert(std::minmax(a, b)); break;
            case BivariateStructure::DirectedCommonAB: directed_common_.insert({a, b}); break;
            case BivariateStructure::DirectedCommonBA: directed_common_.insert({b, a}); break;
            default: break;
        }
    }

    /// Stored structure of the ordered pair (a, b), if any.
    std::optional<BivariateStructure> lookup(const std::string& a, const std::string& b) const {
        if (directed_.count({a, b})) return BivariateStructure::DirectedAB;
        if (directed_.count({b, a})) return BivariateStructure::DirectedBA;
        if (common_.count(std::minmax(a, b))) return BivariateStructure::CommonCause;
        if (directed_common_.count({a, b})) return BivariateStructure::DirectedCommonAB;
        if (directed_common_.count({b, a})) return BivariateStructure::DirectedCommonBA;
        return std::nullopt;
    }

    struct Entry {
        std::string a;
        std::string b;
        BivariateStructure structure;
    };

    /// Every stored pair with the structure as stored (cause first).
    std::vector<Entry> entries() const {
        std::vector<Entry> out;
        for (const auto& [a, b] : directed_) out.push_back({a, b, BivariateStructure::DirectedAB});
        for (const auto& [a, b] : common_) out.push_back({a, b, BivariateStructure::CommonCause});
        for (const auto& [a, b] : directed_common_) out.push_back({a, b, BivariateStructure::DirectedCommonAB});
        return out;
    }

    const std::set<Pair>& directed() const { return directed_; }
    const std::set<Pair>& common() const { return common_; }
    const std::set<Pair>& directed_common() const { return directed_common_; }
    bool empty() const { return directed_.empty() && common_.empty() && directed_common_.empty(); }
    std::size_t size() const { return directed_.size() + common_.size() + directed_common_.size(); }

private:
    std::set<Pair> directed_;
    std::set<Pair> common_;
    std::set<Pair> directed_common_;
};

/// Structure of (a, b) read off a latent-inclusive DAG: `a` causes `b` when
/// it is an ancestor of `b`; the pair is confounded when some third node has
/// directed paths to `a` avoiding `b` and to `b` avoiding `a`. Bidirected
/// edges in `truth` are read as latent common causes.
inline BivariateStructure oracle_bcd(const MixedGraph& truth, NodeSet observed, Node a, Node b) {
    if (!observed.contains(a) || !observed.contains(b)) {
        throw PreconditionError("oracle_bcd: pair must be observed");
    }
    if (a == b) throw PreconditionError("oracle_bcd: pair needs two distinct variables");
    const AncestorTable anc(truth);
    auto ancestors_avoiding = [&](Node target, Node avoid) {
        MixedGraph cut = truth;
        for (Node u : truth.neighbors(avoid)) cut.remove_edge(avoid, u);
        NodeSet s = ancestors(cut, target);
        s.erase(avoid);
        return s;
    };
    const bool ab = anc.is_ancestor(a, b);
    const bool ba = anc.is_ancestor(b, a);
    const NodeSet from_a = ancestors_avoiding(a, b);
    const NodeSet from_b = ancestors_avoiding(b, a);
    bool confounded = from_a.intersects(from_b);
    // A bidirected edge stands for a latent common cause of its endpoints.
    for (Node u : from_a | NodeSet{a}) {
        for (Node v : from_b | NodeSet{b}) {
            if (u != v && truth.is_bidirected(u, v)) confounded = true;
        }
    }
    if (ab) return confounded ? BivariateStructure::DirectedCommonAB : BivariateStructure::DirectedAB;
    if (ba) return confounded ? BivariateStructure::DirectedCommonBA : BivariateStructure::DirectedBA;
    return confounded ? BivariateStructure::CommonCause : BivariateStructure::Independent;
}

inline BivariateStructure oracle_bcd(const MixedGraph& truth, const std::string& a, const std::string& b) {
    return oracle_bcd(truth, truth.nodes(), truth.index(a), truth.index(b));
}

enum class Direction { AB, BA, Undecided };

struct KcdcOptions {
    /// Kernel ridge regularizer of the conditional embedding. Large values
    /// are needed for the deviance to point the right way on heavy-tailed
    /// multiplicative-noise data.
    double lambda = 0.3;
    /// Required relative gap between the two deviances.
    double margin = 0.1;
    /// Larger samples are thinned to this many evenly spaced rows.
    int sample_cap = 500;
};

namespace detail {

/// Spread of the RKHS norms of the embeddings of P(effect | cause = c_i).
inline double conditional_deviance(const Eigen::VectorXd& cause, const Eigen::VectorXd& effect, double lambda) {
    const auto n = cause.size();
    const Eigen::MatrixXd kc = rbf(cause, median_bandwidth(Eigen::MatrixXd(cause)));
    const Eigen::MatrixXd ke = rbf(effect, median_bandwidth(Eigen::MatrixXd(effect)));
    Eigen::MatrixXd reg = kc;
    reg.diagonal().array() += static_cast<double>(n) * lambda;
    const Eigen::MatrixXd beta = reg.llt().solve(kc);
    const Eigen::MatrixXd kb = ke * beta;
    Eigen::VectorXd norms(n);
    for (Eigen::Index i = 0; i < n; ++i) norms(i) = std::sqrt(std::max(0.0, beta.col(i).dot(kb.col(i))));
    return (norms.array() - norms.mean()).square().mean();
}

}  // namespace detail

struct KcdcScores {
    double ab = 0.0;  // deviance assuming A causes B
    double ba = 0.0;
};

inline KcdcScores kcdc_scores(const Eigen::VectorXd& xs, const Eigen::VectorXd& ys, const KcdcOptions& opt = {}) {
    if (xs.size() != ys.size()) throw PreconditionError("kcdc: length mismatch");
    if (xs.size() < 100) throw PreconditionError("kcdc: needs at least 100 samples");
    Eigen::MatrixXd both(xs.size(), 2);
    both << xs, ys;
    both = detail::standardized(detail::thin_rows(both, opt.sample_cap));
    const Eigen::VectorXd a = both.col(0);
    const Eigen::VectorXd b = both.col(1);
    return {detail::conditional_deviance(a, b, opt.lambda), detail::conditional_deviance(b, a, opt.lambda)};
}

/// The direction whose conditional deviance is smaller by the relative margin.
inline Direction kcdc_direction(const Eigen::VectorXd& xs, const Eigen::VectorXd& ys, const KcdcOptions& opt = {}) {
    const KcdcScores s = kcdc_scores(xs, ys, opt);
    const double top = std::max(s.ab, s.ba);
    if (!(top > 0)) return Direction::Undecided;
    if ((s.ba - s.ab) / top > opt.margin) return Direction::AB;
    if ((s.ab - s.ba) / top > opt.margin) return Direction::BA;
    return Direction::Undecided;
}

/// Classifies one pair of one dataset; nullopt leaves the pair unstored.
using PairClassifier =
    std::function<std::optional<BivariateStructure>(int dataset, const std::string& a, const std::string& b)>;

/// Runs `classify` on every listed pair of every dataset and merges the
/// results. The same pair classified differently anywhere is a contradiction.
inline CausalStore classify_pairs(
    const std::vector<std::vector<std::pair<std::string, std::string>>>& pairs_per_dataset,
    const PairClassifier& classify) {
    CausalStore store;
    for (std::size_t d = 0; d < pairs_per_dataset.size(); ++d) {
        for (const auto& [a, b] : pairs_per_dataset[d]) {
            const auto s = classify(static_cast<int>(d), a, b);
            if (!s || *s == BivariateStructure::Independent || *s == BivariateStructure::Unmatched) {
                logger()->debug("pair ({}, {}) in dataset {} left unclassified", a, b, d);
                continue;
            }
            store.add(a, b, *s);
        }
    }
    return store;
}

/// Oracle classifier over a latent-inclusive truth DAG.
inline PairClassifier oracle_classifier(const MixedGraph& truth) {
    return [truth](int, const std::string& a, const std::string& b) -> std::optional<BivariateStructure> {
        return oracle_bcd(truth, a, b);
    };
}

/// Data classifier: KCDC on the pair's columns; directed structures only.
inline PairClassifier kcdc_classifier(std::vector<Dataset> datasets, KcdcOptions opt = {}) {
    return [datasets = std::move(datasets), opt](int d, const std::string& a,
                                                 const std::string& b) -> std::optional<BivariateStructure> {
        const Dataset& ds = datasets.at(static_cast<std::size_t>(d));
        switch (kcdc_direction(ds.column(a), ds.column(b), opt)) {
            case Direction::AB: return BivariateStructure::DirectedAB;
            case Direction::BA: return BivariateStructure::DirectedBA;
            case Direction::Undecided: break;
        }
        return std::nullopt;
    };
}

inline BivariateStructure structure_from_string(const std::string& s) {
    if (s == "directed") return BivariateStructure::DirectedAB;
    if (s == "common") return BivariateStructure::CommonCause;
    if (s == "directed_common") return BivariateStructure::DirectedCommonAB;
    for (auto v : {BivariateStructure::DirectedAB, BivariateStructure::DirectedBA, BivariateStructure::CommonCause,
                   BivariateStructure::DirectedCommonAB, BivariateStructure::DirectedCommonBA}) {
        if (s == to_string(v)) return v;
    }
    throw FormatError("unknown structure '" + s + "'");
}

/// Merges assertions of the form [{"pair": ["Y", "X"], "structure": "directed"}].
inline void merge_expert_knowledge(CausalStore& store, const nlohmann::json& j) {
    if (!j.is_array()) throw FormatError("expert knowledge must be a JSON list");
    try {
        for (const auto& item : j) {
            const auto pair = item.at("pair").get<std::vector<std::string>>();
            if (pair.size() != 2) throw FormatError("expert knowledge pair must have two names");
            store.add(pair[0], pair[1], structure_from_string(item.at("structure").get<std::string>()));
        }
    } catch (const nlohmann::json::exception& ex) {
        throw FormatError(std::string("malformed expert knowledge: ") + ex.what());
    }
}

inline nlohmann::json store_to_json(const CausalStore& store) {
    nlohmann::json j = nlohmann::json::array();
    for (const auto& e : store.entries()) {
        const char* kind = e.structure == BivariateStructure::DirectedAB   ? "directed"
                           : e.structure == BivariateStructure::CommonCause ? "common"
                                                                            : "directed_common";
        j.push_back({{"pair", {e.a, e.b}}, {"structure", kind}});
    }
    return j;
}

}  // namespace overlap_causal
