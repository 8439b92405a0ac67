#include <gtest/gtest.h>

#include "overlap_causal/graph_algorithms.hpp"
#include "overlap_causal/independence.hpp"
#include "overlap_causal/synthetic.hpp"

using namespace overlap_causal;

namespace {

double ci_pvalue(const Dataset& d, const std::string& x, const std::string& y, const std::vector<std::string>& z) {
    KernelCiBackend backend({d});
    return backend.pvalue(0, x, y, z);
}

}  // namespace

TEST(Synthetic1, ShapeAndSupport) {
    const Dataset d = gen_synthetic1(500, 1);
    EXPECT_EQ(d.variables, (std::vector<std::string>{"X", "Y", "Z"}));
    EXPECT_EQ(d.rows(), 500);
    EXPECT_GT(d.column("X").minCoeff(), 0.0);
    EXPECT_NO_THROW(d.validate());
    EXPECT_THROW(gen_synthetic1(0, 1), PreconditionError);
}

TEST(Synthetic1, SeedDeterminism) {
    EXPECT_EQ(gen_synthetic1(200, 7).samples, gen_synthetic1(200, 7).samples);
    EXPECT_NE(gen_synthetic1(200, 7).samples, gen_synthetic1(200, 8).samples);
}

TEST(Synthetic1, ChainIndependencePattern) {
    const Dataset d = gen_synthetic1(3000, 0);
    EXPECT_GT(ci_pvalue(d, "X", "Z", {"Y"}), 0.05);
    EXPECT_LT(ci_pvalue(d, "X", "Z", {}), 0.05);
}

TEST(Synthetic2, ShapeAndDeterminism) {
    const Dataset d = gen_synthetic2(300, 2);
    EXPECT_EQ(d.variables, (std::vector<std::string>{"Y", "X", "Z", "W", "S", "V"}));
    EXPECT_EQ(d.samples, gen_synthetic2(300, 2).samples);
    EXPECT_THROW(gen_synthetic2(0, 1), PreconditionError);
}

TEST(Synthetic2, GeneratorIndependencies) {
    const Dataset d = gen_synthetic2(3000, 0);
    EXPECT_GT(ci_pvalue(d, "X", "Z", {"Y"}), 0.05);
    EXPECT_GT(ci_pvalue(d, "S", "Y", {}), 0.05);
    EXPECT_GT(ci_pvalue(d, "S", "W", {}), 0.05);
    EXPECT_LT(ci_pvalue(d, "W", "Y", {}), 0.05);
}

TEST(SampleSize, ShapeAndSplits) {
    const Dataset d = gen_sample_size(200, 3);
    EXPECT_EQ(d.variables, (std::vector<std::string>{"t", "u", "v", "w", "x", "y", "z"}));
    EXPECT_NO_THROW(d.validate());
    const Fixture f = sample_size_fixture();
    ASSERT_EQ(f.splits.size(), 2U);
    EXPECT_EQ(f.splits[0], (std::vector<std::string>{"t", "u", "v", "x", "y", "z"}));
    EXPECT_EQ(f.splits[1], (std::vector<std::string>{"u", "v", "w", "x", "y", "z"}));
    EXPECT_TRUE(validate_mag(f.truth));
}

TEST(Fixtures, LookupAndValidity) {
    for (const auto& f : all_fixtures()) {
        EXPECT_TRUE(validate_mag(f.truth)) << f.name;
        EXPECT_EQ(fixture_by_name(f.name).truth, f.truth);
        NodeSet covered;
        for (const auto& s : f.splits) covered |= f.truth.node_set(s);
        EXPECT_EQ(covered, f.truth.nodes()) << f.name;
    }
    EXPECT_THROW(fixture_by_name("nope"), LookupError);
    const Fixture s2 = synthetic2_fixture();
    EXPECT_EQ((s2.truth.node_set(s2.splits[0]) & s2.truth.node_set(s2.splits[1])), s2.truth.node_set({"Z"}));
}

TEST(VariableLabels, Padding) {
    EXPECT_EQ(variable_labels(3), (std::vector<std::string>{"V1", "V2", "V3"}));
    const auto ten = variable_labels(10, "L");
    EXPECT_EQ(ten.front(), "L01");
    EXPECT_EQ(ten.back(), "L10");
}

// Uniform labelled DAGs on six nodes carry about 0.6 of the possible arcs.
TEST(RandomTruth, AcyclicWithUniformDagDensity) {
    double density = 0.0;
    const int draws = 1000;
    for (int s = 0; s < draws; ++s) {
        const RandomTruth rt = random_truth(6, static_cast<std::uint64_t>(s));
        ASSERT_TRUE(is_ancestral(rt.dag));
        density += rt.dag.num_edges() / 15.0;
    }
    EXPECT_NEAR(density / draws, 0.6, 0.03);
    EXPECT_THROW(random_truth(2, 0), PreconditionError);
    EXPECT_THROW(random_truth(4, 0, 1.5), PreconditionError);
}

TEST(RandomTruth, ProjectionIsAlwaysAMag) {
    for (int s = 0; s < 1000; ++s) {
        const RandomTruth rt = random_truth(5, static_cast<std::uint64_t>(s), 0.2);
        ASSERT_TRUE(validate_mag(rt.projection)) << s;
        ASSERT_EQ(rt.projection.num_nodes(), 5);
    }
}

TEST(RandomTruth, LatentsConfoundTheirPair) {
    const RandomTruth rt = random_truth(4, 11, 1.0);
    EXPECT_EQ(rt.dag.num_nodes(), 4 + 6);
    EXPECT_EQ(rt.observed.size(), 4);
    for (Node v = 0; v < rt.dag.num_nodes(); ++v) {
        if (rt.observed.contains(v)) continue;
        EXPECT_EQ(rt.dag.label(v)[0], 'L');
        EXPECT_EQ(rt.dag.children(v).size(), 2);
        EXPECT_TRUE(rt.dag.parents(v).empty());
    }
}

TEST(StructuralModel, SamplesFollowTheGraph) {
    const RandomTruth rt = random_truth(5, 4);
    const StructuralModel m = random_structural_model(rt.dag, 4);
    const Dataset a = sample(m, 300, 9);
    EXPECT_EQ(a.samples, sample(m, 300, 9).samples);
    EXPECT_EQ(a.variables, rt.dag.labels());
    EXPECT_TRUE(a.samples.allFinite());
    // A root's column is pure noise, so it is centred near zero.
    for (Node v = 0; v < rt.dag.num_nodes(); ++v) {
        if (rt.dag.parents(v).empty()) EXPECT_LT(std::abs(a.samples.col(v).mean()), 0.1);
    }
}
