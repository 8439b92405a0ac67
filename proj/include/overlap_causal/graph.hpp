#pragma once

#include <algorithm>
#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "overlap_causal/errors.hpp"
#include "overlap_causal/node_set.hpp"

namespace overlap_causal {

/// Mark at one endpoint of an edge. `None` means "no edge".
enum class Mark : std::uint8_t { None = 0, Tail, Arrow, Circle };

inline const char* to_string(Mark m) {
    switch (m) {
        case Mark::Tail: return "tail";
        case Mark::Arrow: return "arrow";
        case Mark::Circle: return "circle";
        case Mark::None: break;
    }
    return "none";
}

/// One edge as seen from its lower-indexed endpoint `a`.
struct Edge {
    Node a = 0;
    Node b = 0;
    Mark mark_a = Mark::None;
    Mark mark_b = Mark::None;

    friend bool operator==(const Edge&, const Edge&) = default;
};

/// Mixed graph over labelled nodes with per-endpoint marks.
///
/// Nodes are kept in lexicographic label order, so two graphs built from the
/// same label set agree on every index. Marks live in a dense n x n matrix:
/// `mark_at(x, y)` is the mark at `x` on the edge x *-* y. At most one edge
/// joins any pair and self-loops are impossible by construction.
class MixedGraph {
public:
    MixedGraph() = default;

    explicit MixedGraph(std::vector<std::string> labels) : labels_(std::move(labels)) {
        std::sort(labels_.begin(), labels_.end());
        if (std::adjacent_find(labels_.begin(), labels_.end()) != labels_.end()) {
            throw PreconditionError("duplicate node label");
        }
        if (labels_.size() > static_cast<std::size_t>(kMaxNodes)) {
            throw PreconditionError("graphs are limited to 64 nodes");
        }
        marks_.assign(labels_.size() * labels_.size(), Mark::None);
    }

    int num_nodes() const { return static_cast<int>(labels_.size()); }
    NodeSet nodes() const { return NodeSet::first(num_nodes()); }
    const std::vector<std::string>& labels() const { return labels_; }
    const std::string& label(Node v) const {
        check(v);
        return labels_[v];
    }

    Node index(std::string_view label) const {
        auto it = std::lower_bound(labels_.begin(), labels_.end(), label);
        if (it == labels_.end() || *it != label) {
            throw LookupError("unknown node '" + std::string(label) + "'");
        }
        return static_cast<Node>(it - labels_.begin());
    }
    bool has_node(std::string_view label) const {
        return std::binary_search(labels_.begin(), labels_.end(), label);
    }
    NodeSet node_set(const std::vector<std::string>& names) const {
        NodeSet s;
        for (const auto& n : names) s.insert(index(n));
        return s;
    }

    Mark mark_at(Node x, Node y) const { return marks_[x * num_nodes() + y]; }
    bool adjacent(Node x, Node y) const { return mark_at(x, y) != Mark::None; }

    /// x -> y
    bool is_directed(Node x, Node y) const {
        return mark_at(x, y) == Mark::Tail && mark_at(y, x) == Mark::Arrow;
    }
    bool is_bidirected(Node x, Node y) const {
        return mark_at(x, y) == Mark::Arrow && mark_at(y, x) == Mark::Arrow;
    }

    void set_edge(Node x, Node y, Mark at_x, Mark at_y) {
        check(x);
        check(y);
        if (x == y) throw PreconditionError("self-loops are not allowed");
        if ((at_x == Mark::None) != (at_y == Mark::None)) {
            throw PreconditionError("an edge needs a mark at both endpoints");
        }
        marks_[x * num_nodes() + y] = at_x;
        marks_[y * num_nodes() + x] = at_y;
    }
    void set_edge(std::string_view x, std::string_view y, Mark at_x, Mark at_y) {
        set_edge(index(x), index(y), at_x, at_y);
    }
    void add_directed(std::string_view from, std::string_view to) {
        set_edge(from, to, Mark::Tail, Mark::Arrow);
    }
    void add_bidirected(std::string_view x, std::string_view y) {
        set_edge(x, y, Mark::Arrow, Mark::Arrow);
    }
    /// Changes the mark at x on an existing edge x *-* y.
    void set_mark(Node x, Node y, Mark m) {
        if (!adjacent(x, y) || m == Mark::None) {
            throw PreconditionError("set_mark on a missing edge");
        }
        marks_[x * num_nodes() + y] = m;
    }
    void remove_edge(Node x, Node y) {
        marks_[x * num_nodes() + y] = Mark::None;
        marks_[y * num_nodes() + x] = Mark::None;
    }

    NodeSet neighbors(Node v) const {
        NodeSet s;
        for (Node u = 0; u < num_nodes(); ++u) {
            if (mark_at(v, u) != Mark::None) s.insert(u);
        }
        return s;
    }
    NodeSet parents(Node v) const {
        NodeSet s;
        for (Node u = 0; u < num_nodes(); ++u) {
            if (is_directed(u, v)) s.insert(u);
        }
        return s;
    }
    NodeSet children(Node v) const {
        NodeSet s;
        for (Node u = 0; u < num_nodes(); ++u) {
            if (is_directed(v, u)) s.insert(u);
        }
        return s;
    }

    std::vector<Edge> edges() const {
        std::vector<Edge> out;
        for (Node a = 0; a < num_nodes(); ++a) {
            for (Node b = a + 1; b < num_nodes(); ++b) {
                if (adjacent(a, b)) out.push_back({a, b, mark_at(a, b), mark_at(b, a)});
            }
        }
        return out;
    }
    int num_edges() const {
        int count = 0;
        for (Node a = 0; a < num_nodes(); ++a) {
            for (Node b = a + 1; b < num_nodes(); ++b) count += adjacent(a, b) ? 1 : 0;
        }
        return count;
    }

    bool has_circles() const {
        return std::find(marks_.begin(), marks_.end(), Mark::Circle) != marks_.end();
    }

    /// Same nodes, no edges.
    MixedGraph empty_copy() const {
        MixedGraph g;
        g.labels_ = labels_;
        g.marks_.assign(marks_.size(), Mark::None);
        return g;
    }

    /// Same adjacencies with every mark replaced by a circle.
    MixedGraph skeleton() const {
        MixedGraph g = *this;
        for (auto& m : g.marks_) {
            if (m != Mark::None) m = Mark::Circle;
        }
        return g;
    }

    /// Canonical byte string of the mark matrix, usable as a map key.
    std::string key() const {
        std::string k(marks_.size(), '0');
        for (std::size_t i = 0; i < marks_.size(); ++i) {
            k[i] = static_cast<char>('0' + static_cast<int>(marks_[i]));
        }
        return k;
    }

    std::string edge_string(Node a, Node b) const;

    friend bool operator==(const MixedGraph& a, const MixedGraph& b) {
        return a.labels_ == b.labels_ && a.marks_ == b.marks_;
    }
    friend bool operator<(const MixedGraph& a, const MixedGraph& b) {
        if (a.labels_ != b.labels_) return a.labels_ < b.labels_;
        return a.marks_ < b.marks_;
    }

private:
    void check(Node v) const {
        if (v < 0 || v >= num_nodes()) {
            throw LookupError("node index " + std::to_string(v) + " out of range");
        }
    }

    std::vector<std::string> labels_;
    std::vector<Mark> marks_;
};

/// Human readable edge such as "X o-> Y".
inline std::string MixedGraph::edge_string(Node a, Node b) const {
    auto left = [](Mark m) {
        switch (m) {
            case Mark::Tail: return "-";
            case Mark::Arrow: return "<";
            case Mark::Circle: return "o";
            default: return "?";
        }
    };
    auto right = [](Mark m) {
        switch (m) {
            case Mark::Tail: return "-";
            case Mark::Arrow: return ">";
            case Mark::Circle: return "o";
            default: return "?";
        }
    };
    return label(a) + " " + left(mark_at(a, b)) + "-" + right(mark_at(b, a)) + " " + label(b);
}

/// A MAG is a MixedGraph without circle marks that passes validate_mag.
using Mag = MixedGraph;
/// A PAG is a MixedGraph that may carry circle marks.
using Pag = MixedGraph;

enum class MutilationMode { RemoveIncoming, RemoveOutgoing };

}  // namespace overlap_causal
