#pragma once

#include <algorithm>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "overlap_causal/errors.hpp"
#include "overlap_causal/graph.hpp"
#include "overlap_causal/graph_algorithms.hpp"
#include "overlap_causal/sepset.hpp"

namespace overlap_causal {

/// Input of the orientation rules.
///
/// R4 needs to know whether the middle node of a discriminating path is a
/// collider. A `witness` MAG answers directly; otherwise the recorded sepset
/// of the path's end points decides. When neither is available both outcomes
/// are explored (see complete_pags).
struct OrientationContext {
    MixedGraph skeleton;
    std::vector<Triple> immoralities;
    const SepSet* sepsets = nullptr;
    const Mag* witness = nullptr;
};

namespace detail {

class Orienter {
public:
    explicit Orienter(Pag& g) : g_(g) {}

    bool changed = false;

    /// Sets the mark at `at` on the edge at *-* other. Overwriting a non-circle
    /// mark with a different one means the candidate has no MAG.
    void orient(Node at, Node other, Mark m) {
        const Mark cur = g_.mark_at(at, other);
        if (cur == m) return;
        if (cur != Mark::Circle) {
            throw InconsistencyError("conflicting orientation at " + g_.label(at) + " on " +
                                     g_.edge_string(at, other));
        }
        g_.set_mark(at, other, m);
        changed = true;
    }

    void rule1() {
        const int n = g_.num_nodes();
        for (Node b = 0; b < n; ++b) {
            for (Node a : g_.neighbors(b)) {
                if (g_.mark_at(b, a) != Mark::Arrow) continue;
                for (Node c : g_.neighbors(b)) {
                    if (c == a || g_.adjacent(a, c) || g_.mark_at(b, c) != Mark::Circle) continue;
                    orient(b, c, Mark::Tail);
                    orient(c, b, Mark::Arrow);
                }
            }
        }
    }

    void rule2() {
        for (const Edge& e : g_.edges()) {
            for (auto [a, c] : {std::pair{e.a, e.b}, std::pair{e.b, e.a}}) {
                if (g_.mark_at(c, a) != Mark::Circle) continue;
                const NodeSet common = g_.neighbors(a) & g_.neighbors(c);
                for (Node b : common) {
                    const bool via_tail = g_.is_directed(a, b) && g_.mark_at(c, b) == Mark::Arrow;
                    const bool via_head = g_.mark_at(b, a) == Mark::Arrow && g_.is_directed(b, c);
                    if (via_tail || via_head) {
                        orient(c, a, Mark::Arrow);
                        break;
                    }
                }
            }
        }
    }

    void rule3() {
        const int n = g_.num_nodes();
        for (Node b = 0; b < n; ++b) {
            const std::vector<Node> into = [&] {
                std::vector<Node> v;
                for (Node u : g_.neighbors(b)) {
                    if (g_.mark_at(b, u) == Mark::Arrow) v.push_back(u);
                }
                return v;
            }();
            for (std::size_t i = 0; i < into.size(); ++i) {
                for (std::size_t j = i + 1; j < into.size(); ++j) {
                    const Node a = into[i];
                    const Node c = into[j];
                    if (g_.adjacent(a, c)) continue;
                    for (Node t : g_.neighbors(a) & g_.neighbors(c) & g_.neighbors(b)) {
                        if (g_.mark_at(t, a) == Mark::Circle && g_.mark_at(t, c) == Mark::Circle &&
                            g_.mark_at(b, t) == Mark::Circle) {
                            orient(b, t, Mark::Arrow);
                        }
                    }
                }
            }
        }
    }

    /// Start node θ of some discriminating path <θ, ..., α, β, γ> for β;
    /// `alpha` receives α. Prefers a θ accepted by `usable`.
    template <typename Usable>
    std::optional<Node> discriminating_start(Node beta, Node gamma, Node& alpha, Usable&& usable) {
        std::optional<Node> any;
        Node any_alpha = -1;
        std::vector<Node> path;
        NodeSet on_path;
        std::optional<Node> chosen;
        auto extend = [&](auto&& self, Node head, Node succ) -> bool {
            for (Node p : g_.neighbors(head)) {
                if (on_path.contains(p)) continue;
                if (g_.mark_at(head, p) != Mark::Arrow || g_.mark_at(head, succ) != Mark::Arrow) continue;
                if (!g_.adjacent(p, gamma)) {
                    if (usable(p)) {
                        chosen = p;
                        return true;
                    }
                    if (!any) {
                        any = p;
                        any_alpha = path.front();
                    }
                } else if (g_.is_directed(p, gamma)) {
                    on_path.insert(p);
                    path.push_back(p);
                    if (self(self, p, head)) return true;
                    path.pop_back();
                    on_path.erase(p);
                }
            }
            return false;
        };
        for (Node a : g_.neighbors(beta)) {
            if (a == gamma || !g_.is_directed(a, gamma)) continue;
            path = {a};
            on_path = NodeSet{beta, gamma, a};
            if (extend(extend, a, beta)) {
                alpha = a;
                return chosen;
            }
        }
        if (any) alpha = any_alpha;
        return any;
    }

    bool uncovered_pd_path(Node prev, Node cur, Node target, NodeSet& on_path) {
        for (Node next : g_.neighbors(cur)) {
            if (on_path.contains(next) || g_.adjacent(prev, next)) continue;
            if (g_.mark_at(cur, next) == Mark::Arrow || g_.mark_at(next, cur) == Mark::Tail) continue;
            if (next == target) return true;
            on_path.insert(next);
            const bool ok = uncovered_pd_path(cur, next, target, on_path);
            on_path.erase(next);
            if (ok) return true;
        }
        return false;
    }

    bool pd_edge(Node from, Node to) const {
        return g_.mark_at(from, to) != Mark::Arrow && g_.mark_at(to, from) != Mark::Tail;
    }

    /// Neighbours mu of alpha that start an uncovered potentially directed path
    /// alpha, mu, ..., target.
    NodeSet pd_starts(Node alpha, Node target) {
        NodeSet out;
        for (Node mu : g_.neighbors(alpha)) {
            if (!pd_edge(alpha, mu)) continue;
            if (mu == target) {
                out.insert(mu);
                continue;
            }
            NodeSet on_path{alpha, mu};
            if (uncovered_pd_path(alpha, mu, target, on_path)) out.insert(mu);
        }
        return out;
    }

    void rules8to10() {
        for (const Edge& e : g_.edges()) {
            for (auto [a, c] : {std::pair{e.a, e.b}, std::pair{e.b, e.a}}) {
                if (g_.mark_at(a, c) != Mark::Circle || g_.mark_at(c, a) != Mark::Arrow) continue;
                if (rule8(a, c) || rule9(a, c) || rule10(a, c)) orient(a, c, Mark::Tail);
            }
        }
    }

private:
    bool rule8(Node a, Node c) {
        for (Node b : g_.neighbors(a) & g_.neighbors(c)) {
            const bool first = g_.is_directed(a, b) ||
                               (g_.mark_at(a, b) == Mark::Tail && g_.mark_at(b, a) == Mark::Circle);
            if (first && g_.is_directed(b, c)) return true;
        }
        return false;
    }

    bool rule9(Node a, Node c) {
        for (Node b : g_.neighbors(a)) {
            if (b == c || g_.adjacent(b, c) || !pd_edge(a, b)) continue;
            NodeSet on_path{a, b};
            if (uncovered_pd_path(a, b, c, on_path)) return true;
        }
        return false;
    }

    bool rule10(Node a, Node c) {
        std::vector<Node> parents;
        for (Node p : g_.parents(c)) {
            if (p != a) parents.push_back(p);
        }
        for (std::size_t i = 0; i < parents.size(); ++i) {
            for (std::size_t j = i + 1; j < parents.size(); ++j) {
                const NodeSet s1 = pd_starts(a, parents[i]);
                if (s1.empty()) continue;
                const NodeSet s2 = pd_starts(a, parents[j]);
                for (Node mu : s1) {
                    for (Node omega : s2) {
                        if (mu != omega && !g_.adjacent(mu, omega)) return true;
                    }
                }
            }
        }
        return false;
    }

    Pag& g_;
};

inline void check_context(const OrientationContext& ctx) {
    for (const Triple& t : ctx.immoralities) {
        const auto& s = ctx.skeleton;
        if (!s.adjacent(t.a, t.center) || !s.adjacent(t.b, t.center) || s.adjacent(t.a, t.b) ||
            t.a == t.b) {
            throw PreconditionError("immorality is not an unshielded triple of the skeleton");
        }
    }
}

inline Triple normalized(Triple t) {
    if (t.a > t.b) std::swap(t.a, t.b);
    return t;
}

inline void run_rules(const OrientationContext& ctx, Pag g, std::vector<Pag>& out) {
    try {
        Orienter o(g);
        while (true) {
            o.changed = false;
            o.rule1();
            o.rule2();
            o.rule3();
            // R4
            const int n = g.num_nodes();
            for (Node beta = 0; beta < n; ++beta) {
                for (Node gamma : g.neighbors(beta)) {
                    if (g.mark_at(beta, gamma) != Mark::Circle) continue;
                    Node alpha = -1;
                    auto has_record = [&](Node theta) {
                        return ctx.sepsets != nullptr && ctx.sepsets->has(theta, gamma);
                    };
                    const auto theta = o.discriminating_start(beta, gamma, alpha, has_record);
                    if (!theta) continue;
                    std::optional<bool> collider;
                    if (ctx.witness != nullptr) {
                        collider = ctx.witness->mark_at(beta, alpha) == Mark::Arrow &&
                                   ctx.witness->mark_at(beta, gamma) == Mark::Arrow;
                    } else if (has_record(*theta)) {
                        collider = !ctx.sepsets->records(*theta, gamma).front().set.contains(beta);
                    }
                    auto apply = [&](Orienter& on, bool is_collider) {
                        if (is_collider) {
                            on.orient(alpha, beta, Mark::Arrow);
                            on.orient(beta, alpha, Mark::Arrow);
                            on.orient(beta, gamma, Mark::Arrow);
                            on.orient(gamma, beta, Mark::Arrow);
                        } else {
                            on.orient(beta, gamma, Mark::Tail);
                            on.orient(gamma, beta, Mark::Arrow);
                        }
                    };
                    if (collider) {
                        apply(o, *collider);
                        continue;
                    }
                    for (bool branch : {true, false}) {
                        Pag copy = g;
                        try {
                            Orienter ob(copy);
                            apply(ob, branch);
                        } catch (const InconsistencyError&) {
                            continue;
                        }
                        run_rules(ctx, std::move(copy), out);
                    }
                    return;
                }
            }
            o.rules8to10();
            if (!o.changed) break;
        }
        std::set<Triple> designated;
        for (const Triple& t : ctx.immoralities) designated.insert(normalized(t));
        for (const Triple& t : unshielded_triples(g)) {
            if (is_collider(g, t) && !designated.count(t)) {
                throw InconsistencyError("orientation produced an undesignated collider at " +
                                         g.label(t.center));
            }
        }
        out.push_back(std::move(g));
    } catch (const InconsistencyError&) {
        // this branch has no consistent orientation
    }
}

}  // namespace detail

/// Every PAG the rules produce; more than one only when a discriminating path
/// cannot be decided from the context. Inconsistent branches are dropped.
inline std::vector<Pag> complete_pags(const OrientationContext& ctx) {
    detail::check_context(ctx);
    Pag g = ctx.skeleton.skeleton();
    {
        detail::Orienter o(g);
        try {
            for (const Triple& t : ctx.immoralities) {
                o.orient(t.center, t.a, Mark::Arrow);
                o.orient(t.center, t.b, Mark::Arrow);
            }
        } catch (const InconsistencyError&) {
            return {};
        }
    }
    std::vector<Pag> out;
    detail::run_rules(ctx, std::move(g), out);
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

/// Skeleton plus immoralities oriented by the FCI rules (no selection rules).
inline Pag complete_pag(const OrientationContext& ctx) {
    std::vector<Pag> all = complete_pags(ctx);
    if (all.empty()) throw InconsistencyError("immoralities admit no consistent orientation");
    if (all.size() > 1) {
        throw PreconditionError("a discriminating path is undecided; use complete_pags");
    }
    return std::move(all.front());
}

/// PAG of the Markov equivalence class of a MAG.
inline Pag mag_to_pag(const Mag& g) {
    OrientationContext ctx;
    ctx.skeleton = g.skeleton();
    for (const Triple& t : unshielded_triples(g)) {
        if (is_collider(g, t)) ctx.immoralities.push_back(t);
    }
    ctx.witness = &g;
    return complete_pag(ctx);
}

/// A representative MAG: arrowed circles become tails, then the circle
/// component is oriented acyclically without new unshielded colliders using
/// maximum cardinality search (ties broken by node order).
inline Mag pag_to_mag(const Pag& p) {
    Mag g = p;
    const int n = g.num_nodes();
    for (Node a = 0; a < n; ++a) {
        for (Node b : g.neighbors(a)) {
            if (g.mark_at(a, b) != Mark::Circle) continue;
            const Mark other = g.mark_at(b, a);
            if (other == Mark::Arrow) g.set_mark(a, b, Mark::Tail);
            if (other == Mark::Tail) g.set_mark(a, b, Mark::Arrow);
        }
    }
    std::vector<int> order(n, -1);
    std::vector<int> weight(n, 0);
    for (int step = 0; step < n; ++step) {
        Node best = -1;
        for (Node v = 0; v < n; ++v) {
            if (order[v] < 0 && (best < 0 || weight[v] > weight[best])) best = v;
        }
        order[best] = step;
        for (Node u : g.neighbors(best)) {
            if (g.mark_at(best, u) == Mark::Circle && g.mark_at(u, best) == Mark::Circle) ++weight[u];
        }
    }
    for (Node a = 0; a < n; ++a) {
        for (Node b = a + 1; b < n; ++b) {
            if (g.mark_at(a, b) != Mark::Circle || g.mark_at(b, a) != Mark::Circle) continue;
            if (order[a] < order[b]) {
                g.set_edge(a, b, Mark::Tail, Mark::Arrow);
            } else {
                g.set_edge(a, b, Mark::Arrow, Mark::Tail);
            }
        }
    }
    if (!validate_mag(g)) throw InconsistencyError("PAG has no valid MAG completion");
    return g;
}

/// Every MAG in the class represented by `p`, ordered by mark assignment
/// (tail before arrow at each circle, circles visited in edge order). With
/// `fixed`, a circle whose endpoint carries a mark in `fixed` is completed
/// with that mark only.
inline std::vector<Mag> enumerate_mags(const Pag& p, const MixedGraph* fixed = nullptr) {
    if (fixed != nullptr && fixed->labels() != p.labels()) throw PreconditionError("enumerate_mags: node sets differ");
    if (!p.has_circles()) {
        if (!validate_mag(p)) return {};
        return {p};
    }
    Mag rep;
    try {
        rep = pag_to_mag(p);
    } catch (const InconsistencyError&) {
        return {};
    }
    struct Slot {
        Node at;
        Node other;
    };
    std::vector<Slot> slots;
    for (const Edge& e : p.edges()) {
        if (e.mark_a == Mark::Circle) slots.push_back({e.a, e.b});
        if (e.mark_b == Mark::Circle) slots.push_back({e.b, e.a});
    }
    // Unshielded non-colliders of p must stay non-colliders.
    std::vector<Triple> non_colliders;
    for (const Triple& t : unshielded_triples(p)) {
        if (!is_collider(p, t)) non_colliders.push_back(t);
    }
    std::vector<Mag> out;
    Mag work = p;
    auto consistent_so_far = [&](std::size_t filled) {
        const Slot& s = slots[filled - 1];
        const Mark here = work.mark_at(s.at, s.other);
        const Mark there = work.mark_at(s.other, s.at);
        if (here == Mark::Tail && there == Mark::Tail) return false;
        for (const Triple& t : non_colliders) {
            if (t.center == s.at && work.mark_at(t.center, t.a) == Mark::Arrow &&
                work.mark_at(t.center, t.b) == Mark::Arrow) {
                return false;
            }
        }
        return is_ancestral(work);
    };
    auto recurse = [&](auto&& self, std::size_t i) -> void {
        if (i == slots.size()) {
            if (validate_mag(work) && markov_equivalent(work, rep)) out.push_back(work);
            return;
        }
        const Mark forced = fixed != nullptr ? fixed->mark_at(slots[i].at, slots[i].other) : Mark::None;
        for (Mark m : {Mark::Tail, Mark::Arrow}) {
            if (forced != Mark::None && forced != Mark::Circle && m != forced) continue;
            work.set_mark(slots[i].at, slots[i].other, m);
            if (consistent_so_far(i + 1)) self(self, i + 1);
        }
        work.set_mark(slots[i].at, slots[i].other, Mark::Circle);
    };
    recurse(recurse, 0);
    return out;
}

}  // namespace overlap_causal
