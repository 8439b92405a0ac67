#pragma once

#include <map>
#include <utility>
#include <vector>

#include "overlap_causal/node_set.hpp"

namespace overlap_causal {

/// One separating set found for a pair, with the datasets it was tested in.
struct SepRecord {
    NodeSet set;
    std::vector<int> datasets;
    double pvalue = 1.0;
};

/// Recorded separating sets keyed by unordered node pair.
class SepSet {
public:
    using Key = std::pair<Node, Node>;

    void add(Node a, Node b, SepRecord record) {
        auto& list = map_[key(a, b)];
        for (const auto& r : list) {
            if (r.set == record.set && r.datasets == record.datasets) return;
        }
        list.push_back(std::move(record));
    }
    bool has(Node a, Node b) const { return map_.count(key(a, b)) != 0; }
    const std::vector<SepRecord>& records(Node a, Node b) const {
        static const std::vector<SepRecord> none;
        auto it = map_.find(key(a, b));
        return it == map_.end() ? none : it->second;
    }
    /// True iff the pair has records and c is in all of them.
    bool in_every(Node a, Node b, Node c) const {
        const auto& list = records(a, b);
        if (list.empty()) return false;
        for (const auto& r : list) {
            if (!r.set.contains(c)) return false;
        }
        return true;
    }
    bool empty() const { return map_.empty(); }
    std::size_t size() const { return map_.size(); }
    const std::map<Key, std::vector<SepRecord>>& entries() const { return map_; }

    static Key key(Node a, Node b) { return a < b ? Key{a, b} : Key{b, a}; }

private:
    std::map<Key, std::vector<SepRecord>> map_;
};

}  // namespace overlap_causal
