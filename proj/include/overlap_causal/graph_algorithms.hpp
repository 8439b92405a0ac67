#pragma once

#include <array>
#include <vector>

#include "overlap_causal/errors.hpp"
#include "overlap_causal/graph.hpp"

namespace overlap_causal {

namespace detail {

inline void require_node(const MixedGraph& g, Node v) {
    if (v < 0 || v >= g.num_nodes()) {
        throw LookupError("node index " + std::to_string(v) + " out of range");
    }
}

inline void require_no_circles(const MixedGraph& g, const char* op) {
    if (g.has_circles()) {
        throw PreconditionError(std::string(op) + " requires a graph without circle marks");
    }
}

/// Nodes with a directed path into `v`; contains `v` itself only when `v`
/// lies on a directed cycle.
inline NodeSet ancestors_raw(const MixedGraph& g, NodeSet from) {
    NodeSet seen;
    std::vector<Node> stack = from.to_vector();
    while (!stack.empty()) {
        Node v = stack.back();
        stack.pop_back();
        for (Node p : g.parents(v)) {
            if (!seen.contains(p)) {
                seen.insert(p);
                stack.push_back(p);
            }
        }
    }
    return seen;
}

/// Breadth-first search over walk states (node, arrived through an arrowhead).
/// `pass(v, is_collider)` decides whether the walk may continue through the
/// intermediate node `v`. Returns true when `y` is reached from `x`.
template <typename Pass>
bool walk_reaches(const MixedGraph& g, Node x, Node y, Pass&& pass) {
    const int n = g.num_nodes();
    std::vector<std::array<bool, 2>> visited(n, {false, false});
    std::vector<std::pair<Node, bool>> queue;
    for (Node u : g.neighbors(x)) {
        if (u == y) return true;
        const bool into = g.mark_at(u, x) == Mark::Arrow;
        if (!visited[u][into]) {
            visited[u][into] = true;
            queue.emplace_back(u, into);
        }
    }
    for (std::size_t head = 0; head < queue.size(); ++head) {
        const auto [v, arrived_into] = queue[head];
        for (Node u : g.neighbors(v)) {
            const bool collider = arrived_into && g.mark_at(v, u) == Mark::Arrow;
            if (!pass(v, collider)) continue;
            if (u == y) return true;
            const bool into = g.mark_at(u, v) == Mark::Arrow;
            if (!visited[u][into]) {
                visited[u][into] = true;
                queue.emplace_back(u, into);
            }
        }
    }
    return false;
}

}  // namespace detail

/// Anc(x): every node with a directed path to x, excluding x.
inline NodeSet ancestors(const MixedGraph& g, Node x) {
    detail::require_node(g, x);
    NodeSet a = detail::ancestors_raw(g, NodeSet::single(x));
    a.erase(x);
    return a;
}

/// Union of the ancestors of every member of `s`, plus `s` itself.
inline NodeSet ancestral_closure(const MixedGraph& g, NodeSet s) {
    return s | detail::ancestors_raw(g, s);
}

/// Strict ancestor sets for every node, computed once.
class AncestorTable {
public:
    explicit AncestorTable(const MixedGraph& g) : table_(g.num_nodes()) {
        for (Node v = 0; v < g.num_nodes(); ++v) {
            table_[v] = detail::ancestors_raw(g, NodeSet::single(v));
        }
    }
    /// May contain v itself when v sits on a directed cycle.
    NodeSet of(Node v) const { return table_[v]; }
    bool is_ancestor(Node a, Node of_node) const { return table_[of_node].contains(a); }
    bool has_directed_cycle() const {
        for (Node v = 0; v < static_cast<Node>(table_.size()); ++v) {
            if (table_[v].contains(v)) return true;
        }
        return false;
    }

private:
    std::vector<NodeSet> table_;
};

/// True iff no active path joins x and y given z.
inline bool m_separated(const MixedGraph& g, Node x, Node y, NodeSet z) {
    detail::require_node(g, x);
    detail::require_node(g, y);
    if (x == y) throw PreconditionError("m_separated: x and y must differ");
    if (z.contains(x) || z.contains(y)) {
        throw PreconditionError("m_separated: conditioning set contains an endpoint");
    }
    if (!z.is_subset_of(g.nodes())) throw LookupError("m_separated: unknown node in z");
    detail::require_no_circles(g, "m_separated");
    const NodeSet anc_z = ancestral_closure(g, z);
    return !detail::walk_reaches(g, x, y, [&](Node v, bool collider) {
        return collider ? anc_z.contains(v) : !z.contains(v);
    });
}

/// Inducing path between x and y relative to `hidden`: every non-hidden
/// interior node is a collider and every collider is an ancestor of x or y.
inline bool has_inducing_path(const MixedGraph& g, Node x, Node y, NodeSet hidden) {
    detail::require_node(g, x);
    detail::require_node(g, y);
    if (x == y) throw PreconditionError("has_inducing_path: x and y must differ");
    if (hidden.contains(x) || hidden.contains(y)) {
        throw PreconditionError("has_inducing_path: endpoints cannot be hidden");
    }
    detail::require_no_circles(g, "has_inducing_path");
    const NodeSet anc_xy =
        detail::ancestors_raw(g, NodeSet::single(x)) | detail::ancestors_raw(g, NodeSet::single(y));
    return detail::walk_reaches(g, x, y, [&](Node v, bool collider) {
        return collider ? anc_xy.contains(v) : hidden.contains(v);
    });
}

/// Removes the incoming (arrowhead at v, including bidirected) or outgoing
/// (v -> *) edges of v.
inline MixedGraph mutilate(const MixedGraph& g, Node v, MutilationMode mode) {
    detail::require_node(g, v);
    MixedGraph out = g;
    for (Node u : g.neighbors(v)) {
        const bool remove = mode == MutilationMode::RemoveIncoming
                                ? g.mark_at(v, u) == Mark::Arrow
                                : g.is_directed(v, u);
        if (remove) out.remove_edge(v, u);
    }
    return out;
}

/// Latent projection of g onto `keep`.
inline Mag marginalize(const Mag& g, NodeSet keep) {
    if (keep.empty()) throw PreconditionError("marginalize: keep set is empty");
    if (!keep.is_subset_of(g.nodes())) throw LookupError("marginalize: unknown node in keep");
    detail::require_no_circles(g, "marginalize");
    std::vector<std::string> labels;
    for (Node v : keep) labels.push_back(g.label(v));
    Mag out(labels);
    const NodeSet hidden = g.nodes() - keep;
    const AncestorTable anc(g);
    const std::vector<Node> kept = keep.to_vector();
    for (std::size_t i = 0; i < kept.size(); ++i) {
        for (std::size_t j = i + 1; j < kept.size(); ++j) {
            const Node x = kept[i];
            const Node y = kept[j];
            if (!has_inducing_path(g, x, y, hidden)) continue;
            // kept is ascending and labels are sorted, so i, j are the indices in `out`.
            out.set_edge(static_cast<Node>(i), static_cast<Node>(j),
                         anc.is_ancestor(x, y) ? Mark::Tail : Mark::Arrow,
                         anc.is_ancestor(y, x) ? Mark::Tail : Mark::Arrow);
        }
    }
    return out;
}

/// Ancestral (no directed or almost-directed cycle, no undirected edge) and
/// maximal (no inducing path w.r.t. the empty set between non-adjacent nodes).
inline bool validate_mag(const MixedGraph& g) {
    detail::require_no_circles(g, "validate_mag");
    const AncestorTable anc(g);
    if (anc.has_directed_cycle()) return false;
    for (const Edge& e : g.edges()) {
        if (e.mark_a == Mark::Tail && e.mark_b == Mark::Tail) return false;
        if (e.mark_a == Mark::Arrow && e.mark_b == Mark::Arrow &&
            (anc.is_ancestor(e.a, e.b) || anc.is_ancestor(e.b, e.a))) {
            return false;
        }
    }
    for (Node x = 0; x < g.num_nodes(); ++x) {
        for (Node y = x + 1; y < g.num_nodes(); ++y) {
            if (!g.adjacent(x, y) && has_inducing_path(g, x, y, NodeSet{})) return false;
        }
    }
    return true;
}

/// Ancestral check only (no maximality); cheap pruning test for partial graphs.
inline bool is_ancestral(const MixedGraph& g) {
    const AncestorTable anc(g);
    if (anc.has_directed_cycle()) return false;
    for (const Edge& e : g.edges()) {
        if (e.mark_a == Mark::Arrow && e.mark_b == Mark::Arrow &&
            (anc.is_ancestor(e.a, e.b) || anc.is_ancestor(e.b, e.a))) {
            return false;
        }
    }
    return true;
}

/// Triple <a, c, b> with a < b, both edges present and a, b non-adjacent.
struct Triple {
    Node a = 0;
    Node center = 0;
    Node b = 0;
    friend auto operator<=>(const Triple&, const Triple&) = default;
};

inline std::vector<Triple> unshielded_triples(const MixedGraph& g) {
    std::vector<Triple> out;
    for (Node c = 0; c < g.num_nodes(); ++c) {
        const std::vector<Node> nb = g.neighbors(c).to_vector();
        for (std::size_t i = 0; i < nb.size(); ++i) {
            for (std::size_t j = i + 1; j < nb.size(); ++j) {
                if (!g.adjacent(nb[i], nb[j])) out.push_back({nb[i], c, nb[j]});
            }
        }
    }
    std::sort(out.begin(), out.end());
    return out;
}

inline bool is_collider(const MixedGraph& g, const Triple& t) {
    return g.mark_at(t.center, t.a) == Mark::Arrow && g.mark_at(t.center, t.b) == Mark::Arrow;
}

/// A discriminating path <x, ..., w, v, y> for v, stored in path order.
using NodePath = std::vector<Node>;

/// Every discriminating path of g: x and y non-adjacent, every node strictly
/// between x and v is a collider on the path and a parent of y.
inline std::vector<NodePath> discriminating_paths(const MixedGraph& g) {
    std::vector<NodePath> found;
    const int n = g.num_nodes();
    // reversed holds y, v, w, ... back towards x.
    std::vector<Node> reversed;
    NodeSet on_path;
    auto extend = [&](auto&& self) -> void {
        const Node head = reversed.back();
        const Node succ = reversed[reversed.size() - 2];
        const Node y = reversed.front();
        for (Node p : g.neighbors(head)) {
            if (on_path.contains(p)) continue;
            // head is an interior node between x and v: needs an arrowhead from p.
            if (g.mark_at(head, p) != Mark::Arrow || g.mark_at(head, succ) != Mark::Arrow) continue;
            if (!g.adjacent(p, y)) {
                NodePath path(reversed.rbegin(), reversed.rend());
                path.insert(path.begin(), p);
                found.push_back(std::move(path));
            } else if (g.is_directed(p, y)) {
                reversed.push_back(p);
                on_path.insert(p);
                self(self);
                on_path.erase(p);
                reversed.pop_back();
            }
        }
    };
    for (Node y = 0; y < n; ++y) {
        for (Node v : g.neighbors(y)) {
            for (Node w : g.neighbors(v)) {
                if (w == y || !g.is_directed(w, y)) continue;
                reversed = {y, v, w};
                on_path = NodeSet{y, v, w};
                extend(extend);
            }
        }
    }
    return found;
}

namespace detail {

inline bool is_discriminating(const MixedGraph& g, const NodePath& p) {
    const std::size_t k = p.size();
    if (k < 4) return false;
    const Node x = p.front();
    const Node y = p.back();
    if (g.adjacent(x, y)) return false;
    for (std::size_t i = 0; i + 1 < k; ++i) {
        if (!g.adjacent(p[i], p[i + 1])) return false;
    }
    for (std::size_t i = 1; i + 2 < k; ++i) {
        if (g.mark_at(p[i], p[i - 1]) != Mark::Arrow || g.mark_at(p[i], p[i + 1]) != Mark::Arrow) {
            return false;
        }
        if (!g.is_directed(p[i], y)) return false;
    }
    return true;
}

inline bool path_collider_at(const MixedGraph& g, const NodePath& p, std::size_t i) {
    return g.mark_at(p[i], p[i - 1]) == Mark::Arrow && g.mark_at(p[i], p[i + 1]) == Mark::Arrow;
}

}  // namespace detail

/// Same adjacencies, same unshielded colliders, and the same collider status
/// on every path that is discriminating in both graphs.
inline bool markov_equivalent(const Mag& g, const Mag& h) {
    if (g.labels() != h.labels()) throw PreconditionError("markov_equivalent: node sets differ");
    const int n = g.num_nodes();
    for (Node a = 0; a < n; ++a) {
        for (Node b = a + 1; b < n; ++b) {
            if (g.adjacent(a, b) != h.adjacent(a, b)) return false;
        }
    }
    for (const Triple& t : unshielded_triples(g)) {
        if (is_collider(g, t) != is_collider(h, t)) return false;
    }
    for (const NodePath& p : discriminating_paths(g)) {
        if (!detail::is_discriminating(h, p)) continue;
        const std::size_t v = p.size() - 2;
        if (detail::path_collider_at(g, p, v) != detail::path_collider_at(h, p, v)) return false;
    }
    return true;
}

}  // namespace overlap_causal
