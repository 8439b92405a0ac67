#pragma once

#include <array>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "overlap_causal/bcd.hpp"
#include "overlap_causal/errors.hpp"
#include "overlap_causal/graph.hpp"
#include "overlap_causal/graph_algorithms.hpp"
#include "overlap_causal/graph_io.hpp"
#include "overlap_causal/logging.hpp"

namespace overlap_causal {

/// Marginal separation of a pair in four mutilated copies of a MAG:
/// y's incoming removed, y's outgoing removed, x's incoming removed,
/// x's outgoing removed.
struct CriterionProfile {
    std::array<bool, 4> bits{};

    friend bool operator==(const CriterionProfile&, const CriterionProfile&) = default;

    std::string str() const {
        std::string s;
        for (bool b : bits) s += b ? 'T' : 'F';
        return s;
    }
};

inline CriterionProfile criterion_profile(const Mag& g, Node x, Node y) {
    detail::require_node(g, x);
    detail::require_node(g, y);
    if (x == y) throw PreconditionError("criterion_profile: pair needs two distinct nodes");
    auto sep = [&](Node v, MutilationMode m) { return m_separated(mutilate(g, v, m), x, y, NodeSet{}); };
    return {{sep(y, MutilationMode::RemoveIncoming), sep(y, MutilationMode::RemoveOutgoing),
             sep(x, MutilationMode::RemoveIncoming), sep(x, MutilationMode::RemoveOutgoing)}};
}

/// The five rows of the criteria table in order, read for the ordered pair (x, y).
inline constexpr std::array<std::pair<BivariateStructure, std::array<bool, 4>>, 5> kCriteria{{
    {BivariateStructure::DirectedAB, {true, false, false, true}},
    {BivariateStructure::DirectedBA, {false, true, true, false}},
    {BivariateStructure::CommonCause, {true, false, true, false}},
    {BivariateStructure::DirectedCommonAB, {true, false, false, false}},
    {BivariateStructure::DirectedCommonBA, {false, false, true, false}},
}};

/// Structure of (x, y) as read from the profile. All four separations mean the
/// pair is disconnected (`Independent`); a pattern matching no row is `Unmatched`.
inline BivariateStructure structure_of(const CriterionProfile& p) {
    for (const auto& [s, bits] : kCriteria) {
        if (p.bits == bits) return s;
    }
    if (p.bits == std::array<bool, 4>{true, true, true, true}) return BivariateStructure::Independent;
    return BivariateStructure::Unmatched;
}

inline BivariateStructure classify_pair(const Mag& g, Node x, Node y) {
    return structure_of(criterion_profile(g, x, y));
}

inline BivariateStructure classify_pair(const Mag& g, const std::string& x, const std::string& y) {
    return classify_pair(g, g.index(x), g.index(y));
}

/// True iff every stored pair is classified in `g` exactly as stored.
inline bool consistent_mag(const Mag& g, const CausalStore& store) {
    for (const auto& e : store.entries()) {
        if (!g.has_node(e.a) || !g.has_node(e.b)) {
            throw LookupError("stored pair (" + e.a + ", " + e.b + ") is not in the graph");
        }
        const CriterionProfile p = criterion_profile(g, g.index(e.a), g.index(e.b));
        const BivariateStructure got = structure_of(p);
        if (got == BivariateStructure::Unmatched) {
            logger()->debug("pair ({}, {}) has unmatched profile {}", e.a, e.b, p.str());
        }
        if (got != e.structure) return false;
    }
    return true;
}

/// One Markov class found by the search, with the member MAGs it admits.
struct Candidate {
    Pag pag;
    std::vector<Mag> members;
};

/// A reported solution: a whole class or a single MAG.
struct Solution {
    enum class Kind { Pag, Mag };
    Kind kind = Kind::Mag;
    MixedGraph graph;
    std::vector<Mag> members;
};

struct SolutionSet {
    std::vector<Solution> solutions;

    std::size_t total_mags() const {
        std::size_t n = 0;
        for (const auto& s : solutions) n += s.members.size();
        return n;
    }
    std::vector<Mag> mags() const {
        std::vector<Mag> out;
        for (const auto& s : solutions) out.insert(out.end(), s.members.begin(), s.members.end());
        return out;
    }
};

/// Keeps a class whole when all its members agree with the store, otherwise
/// only the members that do. Classes left with no members are dropped.
inline SolutionSet filter_solutions(const std::vector<Candidate>& candidates, const CausalStore& store) {
    SolutionSet out;
    for (const auto& c : candidates) {
        std::vector<Mag> pass;
        for (const Mag& m : c.members) {
            if (consistent_mag(m, store)) pass.push_back(m);
        }
        if (pass.empty()) continue;
        if (pass.size() == c.members.size()) {
            out.solutions.push_back({Solution::Kind::Pag, c.pag, std::move(pass)});
        } else {
            for (Mag& m : pass) out.solutions.push_back({Solution::Kind::Mag, m, {m}});
        }
    }
    return out;
}

/// Every candidate reported as a whole class.
inline SolutionSet unfiltered_solutions(const std::vector<Candidate>& candidates) {
    SolutionSet out;
    for (const auto& c : candidates) {
        if (!c.members.empty()) out.solutions.push_back({Solution::Kind::Pag, c.pag, c.members});
    }
    return out;
}

inline nlohmann::json solutions_to_json(const SolutionSet& s) {
    nlohmann::json list = nlohmann::json::array();
    for (const auto& sol : s.solutions) {
        list.push_back({{"kind", sol.kind == Solution::Kind::Pag ? "pag" : "mag"},
                        {"graph", graph_to_json(sol.graph)},
                        {"member_count", sol.members.size()}});
    }
    return {{"solutions", list}, {"total_mags", s.total_mags()}};
}

}  // namespace overlap_causal
