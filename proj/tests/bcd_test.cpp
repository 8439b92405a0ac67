#include <gtest/gtest.h>

#include <random>

#include "overlap_causal/bcd.hpp"
#include "overlap_causal/criteria.hpp"
#include "overlap_causal/synthetic.hpp"
#include "test_support.hpp"

using namespace overlap_causal;

TEST(CausalStore, SortsPairsIntoStores) {
    CausalStore s;
    s.add("Y", "X", BivariateStructure::DirectedAB);
    s.add("A", "B", BivariateStructure::DirectedBA);
    s.add("Z", "Y", BivariateStructure::CommonCause);
    s.add("P", "Q", BivariateStructure::DirectedCommonAB);
    EXPECT_EQ(s.directed().count({"Y", "X"}), 1U);
    EXPECT_EQ(s.directed().count({"B", "A"}), 1U);
    EXPECT_EQ(s.common().count({"Y", "Z"}), 1U);
    EXPECT_EQ(s.directed_common().count({"P", "Q"}), 1U);
    EXPECT_EQ(s.size(), 4U);
    EXPECT_EQ(*s.lookup("X", "Y"), BivariateStructure::DirectedBA);
    EXPECT_EQ(*s.lookup("Z", "Y"), BivariateStructure::CommonCause);
    EXPECT_FALSE(s.lookup("X", "Z").has_value());
}

TEST(CausalStore, RepeatsAreIdempotent) {
    CausalStore s;
    s.add("Y", "X", BivariateStructure::DirectedAB);
    s.add("X", "Y", BivariateStructure::DirectedBA);
    EXPECT_EQ(s.size(), 1U);
}

TEST(CausalStore, ContradictionNamesThePair) {
    CausalStore s;
    s.add("Y", "X", BivariateStructure::DirectedAB);
    try {
        s.add("X", "Y", BivariateStructure::DirectedAB);
        FAIL() << "expected a contradiction";
    } catch (const ContradictionError& ex) {
        const std::string what = ex.what();
        EXPECT_NE(what.find('X'), std::string::npos);
        EXPECT_NE(what.find('Y'), std::string::npos);
    }
}

TEST(CausalStore, RejectsNonDependentStructures) {
    CausalStore s;
    EXPECT_THROW(s.add("A", "B", BivariateStructure::Independent), PreconditionError);
    EXPECT_THROW(s.add("A", "A", BivariateStructure::DirectedAB), PreconditionError);
}

TEST(OracleBcd, FiveStructures) {
    const auto chain = test_support::letters(3);
    MixedGraph g(chain);
    g.add_directed("A", "B");
    EXPECT_EQ(oracle_bcd(g, "A", "B"), BivariateStructure::DirectedAB);
    EXPECT_EQ(oracle_bcd(g, "B", "A"), BivariateStructure::DirectedBA);
    EXPECT_EQ(oracle_bcd(g, "A", "C"), BivariateStructure::Independent);

    MixedGraph common(chain);
    common.add_directed("C", "A");
    common.add_directed("C", "B");
    EXPECT_EQ(oracle_bcd(common, "A", "B"), BivariateStructure::CommonCause);

    MixedGraph both(chain);
    both.add_directed("A", "B");
    both.add_directed("C", "A");
    both.add_directed("C", "B");
    EXPECT_EQ(oracle_bcd(both, "A", "B"), BivariateStructure::DirectedCommonAB);
    EXPECT_EQ(oracle_bcd(both, "B", "A"), BivariateStructure::DirectedCommonBA);

    MixedGraph latent(chain);
    latent.add_directed("A", "B");
    latent.add_bidirected("A", "C");
    latent.add_directed("C", "B");
    EXPECT_EQ(oracle_bcd(latent, "A", "B"), BivariateStructure::DirectedCommonAB);
}

TEST(OracleBcd, AgreesWithCriteriaOnEveryAdjacentPairOfSmallMags) {
    for (int n : {3, 4}) {
        for (const auto& g : test_support::all_mags(n)) {
            for (Node a = 0; a < n; ++a) {
                for (Node b = a + 1; b < n; ++b) {
                    if (!g.adjacent(a, b)) continue;
                    ASSERT_EQ(oracle_bcd(g, g.label(a), g.label(b)), classify_pair(g, a, b)) << g.key();
                }
            }
        }
    }
}

TEST(ClassifyPairs, MergesAndSkipsUnclassified) {
    const std::vector<std::vector<std::pair<std::string, std::string>>> pairs{{{"X", "Y"}}, {{"Y", "Z"}, {"Z", "W"}}};
    const PairClassifier c = [](int, const std::string& a, const std::string&) -> std::optional<BivariateStructure> {
        if (a == "Z") return std::nullopt;
        return BivariateStructure::DirectedAB;
    };
    const CausalStore s = classify_pairs(pairs, c);
    EXPECT_EQ(s.size(), 2U);
    EXPECT_EQ(*s.lookup("X", "Y"), BivariateStructure::DirectedAB);
    EXPECT_FALSE(s.lookup("Z", "W").has_value());
}

TEST(ClassifyPairs, ContradictionAcrossDatasets) {
    const std::vector<std::vector<std::pair<std::string, std::string>>> pairs{{{"X", "Y"}}, {{"X", "Y"}}};
    const PairClassifier c = [](int d, const std::string&, const std::string&) -> std::optional<BivariateStructure> {
        return d == 0 ? BivariateStructure::DirectedAB : BivariateStructure::DirectedBA;
    };
    EXPECT_THROW(classify_pairs(pairs, c), ContradictionError);
}

TEST(ExpertKnowledge, MergeAndRoundTrip) {
    CausalStore s;
    merge_expert_knowledge(s, nlohmann::json::parse(R"([{"pair": ["Y", "X"], "structure": "directed"},
                                                        {"pair": ["Y", "Z"], "structure": "common"}])"));
    EXPECT_EQ(*s.lookup("Y", "X"), BivariateStructure::DirectedAB);
    EXPECT_EQ(*s.lookup("Z", "Y"), BivariateStructure::CommonCause);
    CausalStore back;
    merge_expert_knowledge(back, store_to_json(s));
    EXPECT_EQ(store_to_json(back), store_to_json(s));
    EXPECT_THROW(merge_expert_knowledge(s, nlohmann::json::object()), FormatError);
    EXPECT_THROW(merge_expert_knowledge(s, nlohmann::json::parse(R"([{"pair": ["A"], "structure": "directed"}])")),
                 FormatError);
    EXPECT_THROW(structure_from_string("sideways"), FormatError);
}

TEST(Kcdc, Preconditions) {
    const Eigen::VectorXd a = Eigen::VectorXd::LinSpaced(50, 0.0, 1.0);
    EXPECT_THROW(kcdc_scores(a, a), PreconditionError);
    const Eigen::VectorXd b = Eigen::VectorXd::LinSpaced(200, 0.0, 1.0);
    EXPECT_THROW(kcdc_scores(b, b.head(150)), PreconditionError);
}

TEST(Kcdc, ScoresSwapWithArguments) {
    const Dataset d = gen_synthetic1(600, 5);
    const KcdcScores s = kcdc_scores(d.column("X"), d.column("Y"));
    const KcdcScores t = kcdc_scores(d.column("Y"), d.column("X"));
    EXPECT_NEAR(s.ab, t.ba, 1e-12);
    EXPECT_NEAR(s.ba, t.ab, 1e-12);
}

TEST(Kcdc, OrientsFirstSyntheticProblem) {
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
        const Dataset d = gen_synthetic1(3000, seed);
        EXPECT_EQ(kcdc_direction(d.column("X"), d.column("Y")), Direction::AB) << seed;
        EXPECT_EQ(kcdc_direction(d.column("Y"), d.column("Z")), Direction::AB) << seed;
    }
}

TEST(Kcdc, ClassifierStoresDirectedOnly) {
    const Dataset d = gen_synthetic1(1000, 1);
    const PairClassifier c = kcdc_classifier({d.select({"X", "Y"}), d.select({"Y", "Z"})});
    const auto xy = c(0, "X", "Y");
    ASSERT_TRUE(xy.has_value());
    EXPECT_EQ(*xy, BivariateStructure::DirectedAB);
    EXPECT_EQ(*c(0, "Y", "X"), BivariateStructure::DirectedBA);
    EXPECT_THROW(c(0, "X", "Z"), LookupError);
}
