#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdint>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "overlap_causal/bcd.hpp"
#include "overlap_causal/criteria.hpp"
#include "overlap_causal/errors.hpp"
#include "overlap_causal/graph.hpp"
#include "overlap_causal/graph_algorithms.hpp"
#include "overlap_causal/independence.hpp"
#include "overlap_causal/logging.hpp"
#include "overlap_causal/orientation.hpp"
#include "overlap_causal/sepset.hpp"

namespace overlap_causal {

/// A pair that stayed adjacent in dataset `dataset`, whose variables are `vars`.
/// Any joint MAG must keep an inducing path between the pair relative to the
/// variables the dataset did not measure.
struct IpEntry {
    Node a = 0;
    Node b = 0;
    int dataset = 0;
    NodeSet vars;
    friend auto operator<=>(const IpEntry&, const IpEntry&) = default;
};

struct Part1Output {
    /// Circle graph over all variables: complete minus every separated pair,
    /// with co-measured immoralities oriented.
    MixedGraph global;
    /// Per-dataset PAGs, indexed over all variables (unmeasured nodes isolated).
    std::vector<MixedGraph> locals;
    std::vector<NodeSet> var_sets;
    SepSet sepset;
    std::vector<IpEntry> ip;
    /// Colliders fixed by the local searches, restricted to triples unshielded in `global`.
    std::vector<Triple> immoralities;
};

struct Part1Options {
    double alpha = 0.05;
    /// Largest conditioning set; negative means no limit.
    int max_cond_size = -1;
};

namespace detail {

/// Nodes reachable from x along paths on which every interior node is a
/// collider or sits in a triangle with its path neighbours.
inline NodeSet possible_d_sep(const MixedGraph& g, Node x) {
    NodeSet found;
    std::set<std::pair<Node, Node>> seen;
    std::vector<std::pair<Node, Node>> stack;
    for (Node v : g.neighbors(x)) {
        stack.emplace_back(x, v);
        seen.emplace(x, v);
    }
    while (!stack.empty()) {
        const auto [prev, cur] = stack.back();
        stack.pop_back();
        found.insert(cur);
        for (Node next : g.neighbors(cur)) {
            if (next == prev || next == x) continue;
            const bool collider = g.mark_at(cur, prev) == Mark::Arrow && g.mark_at(cur, next) == Mark::Arrow;
            if (!collider && !g.adjacent(prev, next)) continue;
            if (seen.emplace(cur, next).second) stack.emplace_back(cur, next);
        }
    }
    found.erase(x);
    return found;
}

/// Colliders <a, c, b> of a skeleton whose end points were separated without c.
inline std::vector<Triple> sepset_immoralities(const MixedGraph& skeleton, const SepSet& sepset, NodeSet scope,
                                               const std::map<SepSet::Key, NodeSet>& local_sep) {
    std::vector<Triple> out;
    for (const Triple& t : unshielded_triples(skeleton)) {
        if (!scope.contains(t.a) || !scope.contains(t.b) || !scope.contains(t.center)) continue;
        auto it = local_sep.find(SepSet::key(t.a, t.b));
        if (it != local_sep.end()) {
            if (!it->second.contains(t.center)) out.push_back(t);
        } else if (sepset.has(t.a, t.b) && !sepset.in_every(t.a, t.b, t.center)) {
            out.push_back(t);
        }
    }
    return out;
}

}  // namespace detail

/// Local skeleton searches with pooled tests, Possible-D-Sep pruning, and
/// assembly of the global graph, SepSet and IP entries.
inline Part1Output iod_part1(const std::vector<std::vector<std::string>>& datasets, CiBackend& backend,
                             const Part1Options& opt = {}) {
    if (datasets.empty()) throw PreconditionError("iod needs at least one dataset");
    std::set<std::string> all;
    for (const auto& vars : datasets) {
        if (vars.size() < 2) throw PreconditionError("every dataset needs at least 2 variables");
        std::set<std::string> uniq(vars.begin(), vars.end());
        if (uniq.size() != vars.size()) throw PreconditionError("duplicate variable in a dataset");
        all.insert(vars.begin(), vars.end());
    }
    Part1Output out;
    out.global = MixedGraph(std::vector<std::string>(all.begin(), all.end()));
    const MixedGraph& labels = out.global;
    const int k = static_cast<int>(datasets.size());
    for (const auto& vars : datasets) out.var_sets.push_back(labels.node_set(vars));
    if (k > 1) {
        for (int i = 0; i < k; ++i) {
            NodeSet others;
            for (int j = 0; j < k; ++j) {
                if (j != i) others |= out.var_sets[static_cast<std::size_t>(j)];
            }
            if (!out.var_sets[static_cast<std::size_t>(i)].intersects(others)) {
                throw PreconditionError("dataset " + std::to_string(i) + " shares no variable with the others");
            }
        }
    }

    CiCache cache(backend);
    // Pooled decision over every dataset that measured {x, y} and z.
    auto test = [&](Node x, Node y, NodeSet z, SepRecord& rec) {
        const NodeSet need = z | NodeSet{x} | NodeSet{y};
        std::vector<double> ps;
        rec.datasets.clear();
        for (int d = 0; d < k; ++d) {
            if (need.is_subset_of(out.var_sets[static_cast<std::size_t>(d)])) {
                ps.push_back(cache.pvalue(d, labels, x, y, z));
                rec.datasets.push_back(d);
            }
        }
        rec.set = z;
        rec.pvalue = fisher_pool(ps);
        return rec.pvalue > opt.alpha;
    };

    const int n = labels.num_nodes();
    for (int d = 0; d < k; ++d) {
        const NodeSet vars = out.var_sets[static_cast<std::size_t>(d)];
        const int limit = opt.max_cond_size < 0 ? vars.size() - 2 : opt.max_cond_size;
        MixedGraph local = labels.empty_copy();
        for (Node a : vars) {
            for (Node b : vars) {
                if (a < b) local.set_edge(a, b, Mark::Circle, Mark::Circle);
            }
        }
        std::map<SepSet::Key, NodeSet> local_sep;
        auto separate = [&](Node x, Node y, const SepRecord& rec) {
            local.remove_edge(x, y);
            local_sep[SepSet::key(x, y)] = rec.set;
            out.sepset.add(x, y, rec);
        };
        // Adjacency search by conditioning-set size.
        for (int depth = 0; depth <= limit; ++depth) {
            bool any = false;
            for (Node x = 0; x < n; ++x) {
                for (Node y : local.neighbors(x)) {
                    if (!local.adjacent(x, y)) continue;
                    const NodeSet pool = local.neighbors(x) - NodeSet{y};
                    if (pool.size() < depth) continue;
                    any = true;
                    SepRecord rec;
                    const bool done = !for_each_subset_of_size(pool, depth, [&](NodeSet s) {
                        return !test(x, y, s, rec);
                    });
                    if (done) separate(x, y, rec);
                }
            }
            if (!any) break;
        }
        // Possible-D-Sep stage on the skeleton with its colliders marked.
        {
            MixedGraph marked = local;
            for (const Triple& t : detail::sepset_immoralities(local, out.sepset, vars, local_sep)) {
                marked.set_mark(t.center, t.a, Mark::Arrow);
                marked.set_mark(t.center, t.b, Mark::Arrow);
            }
            for (Node x = 0; x < n; ++x) {
                for (Node y : local.neighbors(x)) {
                    if (!local.adjacent(x, y)) continue;
                    const NodeSet pool = detail::possible_d_sep(marked, x) - NodeSet{y};
                    if (pool.is_subset_of(local.neighbors(x))) continue;  // nothing new to try
                    SepRecord rec;
                    bool separated = false;
                    for (int depth = 1; depth <= std::min(limit, pool.size()) && !separated; ++depth) {
                        separated = !for_each_subset_of_size(pool, depth, [&](NodeSet s) {
                            return !test(x, y, s, rec);
                        });
                    }
                    if (separated) separate(x, y, rec);
                }
            }
        }
        const std::vector<Triple> imm = detail::sepset_immoralities(local, out.sepset, vars, local_sep);
        OrientationContext ctx;
        ctx.skeleton = local;
        ctx.immoralities = imm;
        ctx.sepsets = &out.sepset;
        std::vector<Pag> pags = complete_pags(ctx);
        if (pags.empty()) {
            logger()->warn("dataset {}: local colliders admit no consistent orientation; keeping the skeleton", d);
            out.locals.push_back(local);
        } else {
            out.locals.push_back(pags.front());
        }
        for (const Edge& e : local.edges()) out.ip.push_back({e.a, e.b, d, vars});
        for (const Triple& t : imm) out.immoralities.push_back(t);
    }

    for (Node a = 0; a < n; ++a) {
        for (Node b = a + 1; b < n; ++b) {
            if (!out.sepset.has(a, b)) out.global.set_edge(a, b, Mark::Circle, Mark::Circle);
        }
    }
    std::set<Triple> imm;
    for (const Triple& t : out.immoralities) {
        const MixedGraph& g = out.global;
        if (g.adjacent(t.a, t.center) && g.adjacent(t.b, t.center) && !g.adjacent(t.a, t.b)) imm.insert(t);
    }
    out.immoralities.assign(imm.begin(), imm.end());
    for (const Triple& t : out.immoralities) {
        out.global.set_mark(t.center, t.a, Mark::Arrow);
        out.global.set_mark(t.center, t.b, Mark::Arrow);
    }
    std::sort(out.ip.begin(), out.ip.end());
    return out;
}

/// Edge marks implied by a causal store, as a graph holding only the pairs
/// the store speaks about: cause -> effect for directed and directed-common
/// pairs, <-> for common-cause pairs.
inline MixedGraph bcd_marks(const CausalStore& store, const MixedGraph& over) {
    MixedGraph m = over.empty_copy();
    for (const auto& e : store.entries()) {
        if (!over.has_node(e.a) || !over.has_node(e.b)) continue;
        if (e.structure == BivariateStructure::CommonCause) {
            m.add_bidirected(e.a, e.b);
        } else {
            m.add_directed(e.a, e.b);
        }
    }
    return m;
}

/// Global edges part 2 may delete. Every edge qualifies except a pair that a
/// dataset covering all variables kept adjacent, which cannot lose its edge.
inline std::vector<std::pair<Node, Node>> candidate_edge_removals(const Part1Output& p1) {
    const NodeSet everything = p1.global.nodes();
    std::set<std::pair<Node, Node>> fixed;
    for (const auto& e : p1.ip) {
        if (e.vars == everything) fixed.emplace(e.a, e.b);
    }
    std::vector<std::pair<Node, Node>> out;
    for (const Edge& e : p1.global.edges()) {
        if (!fixed.count({e.a, e.b})) out.emplace_back(e.a, e.b);
    }
    return out;
}

/// Unshielded triples of h that part 2 may still turn into colliders.
inline std::vector<Triple> candidate_immoralities(const MixedGraph& h, const Part1Output& p1,
                                                  const MixedGraph* marks = nullptr) {
    const std::set<Triple> fixed(p1.immoralities.begin(), p1.immoralities.end());
    std::vector<Triple> out;
    for (const Triple& t : unshielded_triples(h)) {
        if (fixed.count(t)) continue;
        if (p1.sepset.in_every(t.a, t.b, t.center)) continue;
        if (marks != nullptr && (marks->mark_at(t.center, t.a) == Mark::Tail ||
                                 marks->mark_at(t.center, t.b) == Mark::Tail)) {
            continue;
        }
        out.push_back(t);
    }
    return out;
}

/// Raised when the search runs out of time or candidate budget; carries
/// what was found before stopping.
class BudgetExceeded : public Error {
public:
    BudgetExceeded(const std::string& what, std::vector<Candidate> partial)
        : Error(what), partial_(std::move(partial)) {}
    const std::vector<Candidate>& partial() const { return partial_; }

private:
    std::vector<Candidate> partial_;
};

struct Part2Options {
    /// Wall-clock limit; zero or negative means none.
    double budget_seconds = 0.0;
    /// Limit on (removal, immorality) combinations examined; zero means none.
    std::uint64_t max_candidates = 0;
    /// The search stops once this many member MAGs are held; the class that
    /// reaches the limit is kept whole. Zero means none.
    std::uint64_t max_mags = 0;
    int jobs = 1;
    /// Skip removal sets that leave an adjacent local pair without any route
    /// through unmeasured variables.
    bool prune_removals = true;
};

struct Part2Stats {
    std::size_t removal_candidates = 0;
    /// Candidate immoralities with no edge removed.
    std::size_t immorality_candidates = 0;
    std::uint64_t combinations = 0;
    std::size_t classes = 0;
};

namespace detail {

/// Every subset of {0..m-1}, by size then lexicographically, as bit masks.
class SubsetCursor {
public:
    explicit SubsetCursor(int m) : m_(m) {}

    std::optional<std::uint64_t> next() {
        if (size_ > m_) return std::nullopt;
        std::uint64_t mask = 0;
        for (int i : idx_) mask |= std::uint64_t{1} << i;
        advance();
        return mask;
    }

private:
    void advance() {
        int i = size_ - 1;
        while (i >= 0 && idx_[static_cast<std::size_t>(i)] == m_ - size_ + i) --i;
        if (i < 0) {
            ++size_;
            idx_.resize(static_cast<std::size_t>(size_));
            for (int j = 0; j < size_; ++j) idx_[static_cast<std::size_t>(j)] = j;
            return;
        }
        ++idx_[static_cast<std::size_t>(i)];
        for (int j = i + 1; j < size_; ++j) idx_[static_cast<std::size_t>(j)] = idx_[static_cast<std::size_t>(j - 1)] + 1;
    }

    int m_;
    int size_ = 0;
    std::vector<int> idx_;
};

/// Whether some route from a to b in h passes through a node outside `vars`.
inline bool has_outside_route(const MixedGraph& h, Node a, Node b, NodeSet vars) {
    auto reach = [&](Node from, Node blocked) {
        NodeSet seen{from};
        std::vector<Node> stack{from};
        while (!stack.empty()) {
            const Node u = stack.back();
            stack.pop_back();
            for (Node v : h.neighbors(u)) {
                if (v == blocked || seen.contains(v)) continue;
                seen.insert(v);
                stack.push_back(v);
            }
        }
        return seen;
    };
    const NodeSet outside = h.nodes() - vars;
    return (reach(a, b) & reach(b, a) & outside).size() > 0;
}

inline bool respects_marks(const Mag& g, const MixedGraph& marks) {
    for (const Edge& e : marks.edges()) {
        if (!g.adjacent(e.a, e.b)) continue;
        if (g.mark_at(e.a, e.b) != e.mark_a || g.mark_at(e.b, e.a) != e.mark_b) return false;
    }
    return true;
}

inline bool passes_checks(const Mag& mag, const Part1Output& p1) {
    if (!validate_mag(mag)) return false;
    for (const auto& [key, records] : p1.sepset.entries()) {
        for (const auto& r : records) {
            if (!m_separated(mag, key.first, key.second, r.set)) return false;
        }
    }
    const NodeSet everything = mag.nodes();
    for (const auto& e : p1.ip) {
        if (!has_inducing_path(mag, e.a, e.b, everything - e.vars)) return false;
    }
    return true;
}

inline Pag overlay(Pag p, const MixedGraph& marks) {
    for (const Edge& e : marks.edges()) {
        if (!p.adjacent(e.a, e.b)) continue;
        if (p.mark_at(e.a, e.b) == Mark::Circle) p.set_mark(e.a, e.b, e.mark_a);
        if (p.mark_at(e.b, e.a) == Mark::Circle) p.set_mark(e.b, e.a, e.mark_b);
    }
    return p;
}

}  // namespace detail

/// Searches edge removals and extra colliders over the global graph. With
/// `marks`, each class keeps only the member MAGs that agree with them and is
/// reported with those marks written in.
inline std::vector<Candidate> iod_part2(const Part1Output& p1, const MixedGraph* marks = nullptr,
                                        const Part2Options& opt = {}, Part2Stats* stats = nullptr) {
    using Clock = std::chrono::steady_clock;
    const auto start = Clock::now();
    const auto removals = candidate_edge_removals(p1);
    if (removals.size() > 63) throw PreconditionError("too many removable edges to enumerate");
    const int m = static_cast<int>(removals.size());

    std::mutex mutex;
    detail::SubsetCursor cursor(m);
    std::map<std::string, Candidate> found;
    std::atomic<std::uint64_t> combinations{0};
    std::uint64_t stored = 0;
    std::atomic<bool> stop{false};
    std::string stop_reason;

    auto out_of_budget = [&]() {
        if (opt.max_candidates > 0 && combinations.load() >= opt.max_candidates) return true;
        if (opt.budget_seconds > 0) {
            const std::chrono::duration<double> used = Clock::now() - start;
            if (used.count() > opt.budget_seconds) return true;
        }
        return false;
    };
    auto halt = [&](const char* why) {
        std::lock_guard<std::mutex> lock(mutex);
        if (!stop.exchange(true)) stop_reason = why;
    };

    auto process_removal = [&](std::uint64_t mask) {
        MixedGraph h = p1.global;
        for (int i = 0; i < m; ++i) {
            if (mask >> i & 1U) h.remove_edge(removals[static_cast<std::size_t>(i)].first, removals[static_cast<std::size_t>(i)].second);
        }
        if (opt.prune_removals) {
            for (const auto& e : p1.ip) {
                if (!h.adjacent(e.a, e.b) && !detail::has_outside_route(h, e.a, e.b, e.vars)) return;
            }
        }
        std::vector<Triple> fixed;
        for (const Triple& t : p1.immoralities) {
            if (h.adjacent(t.a, t.center) && h.adjacent(t.b, t.center)) fixed.push_back(t);
        }
        const std::vector<Triple> options = candidate_immoralities(h, p1, marks);
        if (options.size() > 63) throw PreconditionError("too many candidate immoralities to enumerate");
        detail::SubsetCursor inner(static_cast<int>(options.size()));
        while (auto tmask = inner.next()) {
            if (stop.load()) return;
            if (out_of_budget()) {
                halt("search budget exceeded");
                return;
            }
            ++combinations;
            OrientationContext ctx;
            ctx.skeleton = h;
            ctx.immoralities = fixed;
            for (std::size_t j = 0; j < options.size(); ++j) {
                if (*tmask >> j & 1U) ctx.immoralities.push_back(options[j]);
            }
            ctx.sepsets = &p1.sepset;
            for (const Pag& pag : complete_pags(ctx)) {
                Mag rep;
                try {
                    rep = pag_to_mag(pag);
                } catch (const InconsistencyError&) {
                    continue;
                }
                if (!detail::passes_checks(rep, p1)) continue;
                Pag canonical = mag_to_pag(rep);
                const std::string key = canonical.key();
                {
                    std::lock_guard<std::mutex> lock(mutex);
                    if (found.count(key)) continue;
                }
                std::vector<Mag> members = enumerate_mags(canonical, marks);
                if (marks != nullptr) {
                    std::erase_if(members, [&](const Mag& g) { return !detail::respects_marks(g, *marks); });
                    canonical = detail::overlay(canonical, *marks);
                }
                bool full = false;
                {
                    std::lock_guard<std::mutex> lock(mutex);
                    if (!found.count(key)) {
                        stored += members.size();
                        full = opt.max_mags > 0 && stored >= opt.max_mags;
                        found.emplace(key, Candidate{std::move(canonical), std::move(members)});
                    }
                }
                if (full) {
                    halt("MAG limit exceeded");
                    return;
                }
            }
        }
    };

    std::exception_ptr failure;
    auto worker = [&]() {
        try {
            while (!stop.load()) {
                std::optional<std::uint64_t> mask;
                {
                    std::lock_guard<std::mutex> lock(mutex);
                    mask = cursor.next();
                }
                if (!mask) return;
                process_removal(*mask);
            }
        } catch (...) {
            std::lock_guard<std::mutex> lock(mutex);
            if (!failure) failure = std::current_exception();
            stop = true;
        }
    };
    const int jobs = std::max(1, opt.jobs);
    if (jobs == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int j = 0; j < jobs; ++j) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    if (failure) std::rethrow_exception(failure);

    std::vector<Candidate> out;
    for (auto& [key, c] : found) {
        if (!c.members.empty()) out.push_back(std::move(c));
    }
    if (stats != nullptr) {
        stats->removal_candidates = removals.size();
        stats->immorality_candidates = candidate_immoralities(p1.global, p1, marks).size();
        stats->combinations = combinations.load();
        stats->classes = out.size();
    }
    if (stop.load() && !stop_reason.empty()) throw BudgetExceeded(stop_reason, std::move(out));
    return out;
}

enum class IodMode { Iod, IodBcd, CausalIod };

inline const char* to_string(IodMode m) {
    switch (m) {
        case IodMode::Iod: return "iod";
        case IodMode::IodBcd: return "iod-bcd";
        case IodMode::CausalIod: return "causal-iod";
    }
    return "iod";
}

inline IodMode mode_from_string(const std::string& s) {
    if (s == "iod") return IodMode::Iod;
    if (s == "iod-bcd") return IodMode::IodBcd;
    if (s == "causal-iod") return IodMode::CausalIod;
    throw FormatError("unknown mode '" + s + "'");
}

/// Adjacent pairs of each local graph, by label, for bivariate classification.
inline std::vector<std::vector<std::pair<std::string, std::string>>> local_pairs(const Part1Output& p1) {
    std::vector<std::vector<std::pair<std::string, std::string>>> out;
    for (const auto& local : p1.locals) {
        auto& list = out.emplace_back();
        for (const Edge& e : local.edges()) list.emplace_back(local.label(e.a), local.label(e.b));
    }
    return out;
}

struct IodResult {
    IodMode mode = IodMode::Iod;
    Part1Output part1;
    CausalStore store;
    std::vector<Candidate> candidates;
    SolutionSet solutions;
    Part2Stats stats;
    /// False when the budget stopped the search; solutions are then partial.
    bool complete = true;
};

/// Part 1, classification of the local adjacencies (skipped for plain IOD),
/// part 2, and for the causal mode the criteria filter.
inline IodResult run_iod(const std::vector<std::vector<std::string>>& datasets, CiBackend& ci,
                         const PairClassifier* classify, IodMode mode, const Part1Options& p1opt = {},
                         const Part2Options& p2opt = {}, const CausalStore* extra = nullptr) {
    IodResult r;
    r.mode = mode;
    r.part1 = iod_part1(datasets, ci, p1opt);
    if (mode != IodMode::Iod) {
        if (classify != nullptr) r.store = classify_pairs(local_pairs(r.part1), *classify);
        if (extra != nullptr) {
            for (const auto& e : extra->entries()) r.store.add(e.a, e.b, e.structure);
        }
    }
    std::optional<MixedGraph> marks;
    if (mode != IodMode::Iod) marks = bcd_marks(r.store, r.part1.global);
    try {
        r.candidates = iod_part2(r.part1, marks ? &*marks : nullptr, p2opt, &r.stats);
    } catch (const BudgetExceeded& ex) {
        r.candidates = ex.partial();
        r.complete = false;
    }
    r.solutions = mode == IodMode::CausalIod ? filter_solutions(r.candidates, r.store)
                                             : unfiltered_solutions(r.candidates);
    return r;
}

}  // namespace overlap_causal
