#include <gtest/gtest.h>

#include "overlap_causal/criteria.hpp"
#include "overlap_causal/graph_algorithms.hpp"
#include "test_support.hpp"

using namespace overlap_causal;

namespace {

MixedGraph xyw() { return MixedGraph({"W", "X", "Y"}); }

std::string profile(const MixedGraph& g) { return criterion_profile(g, g.index("X"), g.index("Y")).str(); }

}  // namespace

TEST(CriterionProfile, TableRows) {
    MixedGraph ab = xyw();
    ab.add_directed("X", "Y");
    EXPECT_EQ(profile(ab), "TFFT");
    EXPECT_EQ(classify_pair(ab, "X", "Y"), BivariateStructure::DirectedAB);
    EXPECT_EQ(classify_pair(ab, "Y", "X"), BivariateStructure::DirectedBA);

    MixedGraph ba = xyw();
    ba.add_directed("Y", "X");
    EXPECT_EQ(profile(ba), "FTTF");

    MixedGraph common = xyw();
    common.add_directed("W", "X");
    common.add_directed("W", "Y");
    EXPECT_EQ(profile(common), "TFTF");
    EXPECT_EQ(classify_pair(common, "X", "Y"), BivariateStructure::CommonCause);

    MixedGraph latent = xyw();
    latent.add_bidirected("X", "Y");
    EXPECT_EQ(classify_pair(latent, "X", "Y"), BivariateStructure::CommonCause);

    MixedGraph both = xyw();
    both.add_directed("X", "Y");
    both.add_directed("W", "X");
    both.add_directed("W", "Y");
    EXPECT_EQ(profile(both), "TFFF");
    EXPECT_EQ(classify_pair(both, "X", "Y"), BivariateStructure::DirectedCommonAB);
    EXPECT_EQ(classify_pair(both, "Y", "X"), BivariateStructure::DirectedCommonBA);

    MixedGraph hidden = xyw();
    hidden.add_directed("X", "Y");
    hidden.add_bidirected("W", "X");
    hidden.add_directed("W", "Y");
    EXPECT_EQ(classify_pair(hidden, "X", "Y"), BivariateStructure::DirectedCommonAB);

    MixedGraph none = xyw();
    none.add_directed("X", "W");
    none.add_directed("Y", "W");
    EXPECT_EQ(profile(none), "TTTT");
    EXPECT_EQ(classify_pair(none, "X", "Y"), BivariateStructure::Independent);
}

TEST(CriterionProfile, OtherPatternsAreUnmatched) {
    EXPECT_EQ(structure_of({{false, false, false, false}}), BivariateStructure::Unmatched);
    EXPECT_EQ(structure_of({{true, true, false, false}}), BivariateStructure::Unmatched);
    EXPECT_EQ(structure_of({{true, true, true, true}}), BivariateStructure::Independent);
}

TEST(CriterionProfile, Preconditions) {
    const MixedGraph g = xyw();
    EXPECT_THROW(criterion_profile(g, 0, 0), PreconditionError);
    EXPECT_THROW(criterion_profile(g, 0, 7), LookupError);
}

TEST(CriterionProfile, SwappingThePairSwapsTheStructure) {
    for (const auto& g : test_support::all_mags(4)) {
        for (Node a = 0; a < 4; ++a) {
            for (Node b = a + 1; b < 4; ++b) {
                ASSERT_EQ(classify_pair(g, b, a), swapped(classify_pair(g, a, b))) << g.key();
            }
        }
    }
}

TEST(ConsistentMag, ChecksEveryStoredPair) {
    MixedGraph ab = xyw();
    ab.add_directed("X", "Y");
    ab.add_directed("W", "Y");
    CausalStore store;
    store.add("X", "Y", BivariateStructure::DirectedAB);
    EXPECT_TRUE(consistent_mag(ab, store));
    store.add("W", "X", BivariateStructure::CommonCause);
    EXPECT_FALSE(consistent_mag(ab, store));
    CausalStore foreign;
    foreign.add("X", "Q", BivariateStructure::DirectedAB);
    EXPECT_THROW(consistent_mag(ab, foreign), LookupError);
}

TEST(FilterSolutions, KeepsWholeClassesAndSplitsMixedOnes) {
    MixedGraph pag({"X", "Y"});
    pag.set_edge("X", "Y", Mark::Circle, Mark::Circle);
    MixedGraph xy({"X", "Y"});
    xy.add_directed("X", "Y");
    MixedGraph yx({"X", "Y"});
    yx.add_directed("Y", "X");
    MixedGraph bi({"X", "Y"});
    bi.add_bidirected("X", "Y");
    const std::vector<Candidate> candidates{{pag, {xy, yx, bi}}, {xy, {xy}}};

    const SolutionSet all = filter_solutions(candidates, CausalStore{});
    ASSERT_EQ(all.solutions.size(), 2U);
    EXPECT_EQ(all.solutions[0].kind, Solution::Kind::Pag);
    EXPECT_EQ(all.total_mags(), 4U);

    CausalStore store;
    store.add("X", "Y", BivariateStructure::DirectedAB);
    const SolutionSet some = filter_solutions(candidates, store);
    ASSERT_EQ(some.solutions.size(), 2U);
    EXPECT_EQ(some.solutions[0].kind, Solution::Kind::Mag);
    EXPECT_EQ(some.solutions[0].graph, xy);
    EXPECT_EQ(some.solutions[1].kind, Solution::Kind::Pag);
    EXPECT_EQ(some.mags(), (std::vector<Mag>{xy, xy}));

    CausalStore other;
    other.add("X", "Y", BivariateStructure::DirectedCommonAB);
    EXPECT_TRUE(filter_solutions(candidates, other).solutions.empty());

    EXPECT_EQ(unfiltered_solutions(candidates).total_mags(), 4U);
}

TEST(FilterSolutions, Json) {
    MixedGraph xy({"X", "Y"});
    xy.add_directed("X", "Y");
    const SolutionSet s = filter_solutions({{xy, {xy}}}, CausalStore{});
    const nlohmann::json j = solutions_to_json(s);
    EXPECT_EQ(j.at("total_mags"), 1);
    ASSERT_EQ(j.at("solutions").size(), 1U);
    EXPECT_EQ(j.at("solutions")[0].at("kind"), "pag");
    EXPECT_EQ(j.at("solutions")[0].at("member_count"), 1);
    EXPECT_TRUE(j.at("solutions")[0].contains("graph"));
}

// Every MAG passes the filter built from its own pairwise structures.
TEST(ConsistentMag, EveryMagAgreesWithItsOwnClassification) {
    for (const auto& g : test_support::all_mags(4)) {
        CausalStore store;
        for (Node a = 0; a < 4; ++a) {
            for (Node b = a + 1; b < 4; ++b) {
                const BivariateStructure s = classify_pair(g, a, b);
                if (s != BivariateStructure::Independent && s != BivariateStructure::Unmatched) {
                    store.add(g.label(a), g.label(b), s);
                }
            }
        }
        ASSERT_TRUE(consistent_mag(g, store)) << g.key();
    }
}
