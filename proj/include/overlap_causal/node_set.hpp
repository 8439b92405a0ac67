#pragma once

#include <bit>
#include <cstdint>
#include <initializer_list>
#include <iterator>
#include <vector>

namespace overlap_causal {

/// Dense node handle; index into a graph's sorted label table.
using Node = int;

inline constexpr int kMaxNodes = 64;

/// Small ordered set of nodes backed by a 64-bit mask.
class NodeSet {
public:
    class iterator {
    public:
        using iterator_category = std::forward_iterator_tag;
        using value_type = Node;
        using difference_type = std::ptrdiff_t;
        using pointer = const Node*;
        using reference = Node;

        iterator() = default;
        explicit iterator(std::uint64_t rest) : rest_(rest) {}

        Node operator*() const { return std::countr_zero(rest_); }
        iterator& operator++() {
            rest_ &= rest_ - 1;
            return *this;
        }
        iterator operator++(int) {
            iterator old = *this;
            ++*this;
            return old;
        }
        bool operator==(const iterator&) const = default;

    private:
        std::uint64_t rest_ = 0;
    };

    constexpr NodeSet() = default;
    constexpr explicit NodeSet(std::uint64_t bits) : bits_(bits) {}
    NodeSet(std::initializer_list<Node> nodes) {
        for (Node v : nodes) insert(v);
    }

    static constexpr NodeSet single(Node v) { return NodeSet(std::uint64_t{1} << v); }
    /// {0, ..., n-1}
    static constexpr NodeSet first(int n) {
        return NodeSet(n >= 64 ? ~std::uint64_t{0} : (std::uint64_t{1} << n) - 1);
    }

    constexpr bool contains(Node v) const { return (bits_ >> v) & 1U; }
    constexpr void insert(Node v) { bits_ |= std::uint64_t{1} << v; }
    constexpr void erase(Node v) { bits_ &= ~(std::uint64_t{1} << v); }
    constexpr bool empty() const { return bits_ == 0; }
    constexpr int size() const { return std::popcount(bits_); }
    constexpr std::uint64_t bits() const { return bits_; }

    constexpr bool is_subset_of(NodeSet other) const { return (bits_ & ~other.bits_) == 0; }
    constexpr bool intersects(NodeSet other) const { return (bits_ & other.bits_) != 0; }

    iterator begin() const { return iterator(bits_); }
    iterator end() const { return iterator(0); }

    std::vector<Node> to_vector() const { return {begin(), end()}; }

    friend constexpr NodeSet operator|(NodeSet a, NodeSet b) { return NodeSet(a.bits_ | b.bits_); }
    friend constexpr NodeSet operator&(NodeSet a, NodeSet b) { return NodeSet(a.bits_ & b.bits_); }
    friend constexpr NodeSet operator-(NodeSet a, NodeSet b) { return NodeSet(a.bits_ & ~b.bits_); }
    constexpr NodeSet& operator|=(NodeSet o) {
        bits_ |= o.bits_;
        return *this;
    }
    constexpr NodeSet& operator&=(NodeSet o) {
        bits_ &= o.bits_;
        return *this;
    }
    constexpr NodeSet& operator-=(NodeSet o) {
        bits_ &= ~o.bits_;
        return *this;
    }
    friend constexpr bool operator==(NodeSet, NodeSet) = default;
    friend constexpr auto operator<=>(NodeSet a, NodeSet b) { return a.bits_ <=> b.bits_; }

private:
    std::uint64_t bits_ = 0;
};

/// Visits every subset of `base` with exactly `k` elements, in lexicographic
/// order of the member indices.
template <typename Visitor>
bool for_each_subset_of_size(NodeSet base, int k, Visitor&& visit) {
    const std::vector<Node> items = base.to_vector();
    const int n = static_cast<int>(items.size());
    if (k < 0 || k > n) return true;
    std::vector<int> idx(k);
    for (int i = 0; i < k; ++i) idx[i] = i;
    while (true) {
        NodeSet s;
        for (int i : idx) s.insert(items[i]);
        if (!visit(s)) return false;
        int i = k - 1;
        while (i >= 0 && idx[i] == n - k + i) --i;
        if (i < 0) return true;
        ++idx[i];
        for (int j = i + 1; j < k; ++j) idx[j] = idx[j - 1] + 1;
    }
}

}  // namespace overlap_causal
