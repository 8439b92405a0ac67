#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "overlap_causal/dataset.hpp"
#include "overlap_causal/errors.hpp"
#include "overlap_causal/graph.hpp"
#include "overlap_causal/graph_algorithms.hpp"

namespace overlap_causal {

/// A known generating graph together with the variable sets of its datasets.
struct Fixture {
    std::string name;
    MixedGraph truth;
    std::vector<std::vector<std::string>> splits;
};

namespace detail {

inline MixedGraph graph_from_edges(std::vector<std::string> labels,
                                   const std::vector<std::pair<std::string, std::string>>& directed,
                                   const std::vector<std::pair<std::string, std::string>>& bidirected = {}) {
    MixedGraph g(std::move(labels));
    for (const auto& [a, b] : directed) g.add_directed(a, b);
    for (const auto& [a, b] : bidirected) g.add_bidirected(a, b);
    return g;
}

/// Exponential draws with the given mean.
inline Eigen::VectorXd exponential(std::mt19937_64& rng, int n, double scale) {
    std::exponential_distribution<double> d(1.0 / scale);
    Eigen::VectorXd v(n);
    for (int i = 0; i < n; ++i) v(i) = d(rng);
    return v;
}

inline void require_rows(int n) {
    if (n < 1) throw PreconditionError("sample size must be at least 1");
}

}  // namespace detail

/// Chain X -> Y -> Z, datasets {X, Y} and {Y, Z}.
inline Fixture synthetic1_fixture() {
    return {"synthetic1", detail::graph_from_edges({"X", "Y", "Z"}, {{"X", "Y"}, {"Y", "Z"}}), {{"X", "Y"}, {"Y", "Z"}}};
}

/// Y -> X, Y -> Z, Z -> W, W -> V <- S; datasets share only Z.
inline Fixture synthetic2_fixture() {
    return {"synthetic2",
            detail::graph_from_edges({"S", "V", "W", "X", "Y", "Z"},
                                     {{"Y", "X"}, {"Y", "Z"}, {"Z", "W"}, {"W", "V"}, {"S", "V"}}),
            {{"X", "Y", "Z"}, {"S", "V", "W", "Z"}}};
}

/// Y causes X and shares a latent cause with Z; datasets {X, Y} and {Y, Z}.
inline Fixture motivating_fixture() {
    return {"motivating", detail::graph_from_edges({"X", "Y", "Z"}, {{"Y", "X"}}, {{"Y", "Z"}}),
            {{"X", "Y"}, {"Y", "Z"}}};
}

/// Seven-variable polytree for the sample-size study. `t` is seen only by the
/// first dataset and `w` only by the second; the other five are shared.
inline Fixture sample_size_fixture() {
    return {"sample_size",
            detail::graph_from_edges({"t", "u", "v", "w", "x", "y", "z"},
                                     {{"y", "x"}, {"t", "x"}, {"x", "z"}, {"z", "u"}, {"z", "v"}, {"v", "w"}}),
            {{"t", "u", "v", "x", "y", "z"}, {"u", "v", "w", "x", "y", "z"}}};
}

/// Consensus protein-signalling network; the first dataset lacks PKA and the
/// second lacks p44/42.
inline Fixture sachs_fixture() {
    return {"sachs",
            detail::graph_from_edges(
                {"P38", "PIP2", "PIP3", "PKA", "PKC", "p44/42", "pakts473", "pjnk", "plcg", "pmek", "praf"},
                {{"praf", "pmek"},   {"pmek", "p44/42"}, {"plcg", "PIP2"},    {"plcg", "PIP3"},   {"PIP3", "PIP2"},
                 {"PKC", "praf"},    {"PKC", "pmek"},    {"PKC", "PKA"},      {"PKC", "pjnk"},    {"PKC", "P38"},
                 {"PKA", "praf"},    {"PKA", "pmek"},    {"PKA", "p44/42"},   {"PKA", "pakts473"}, {"PKA", "pjnk"},
                 {"PKA", "P38"},     {"p44/42", "pakts473"}}),
            {{"P38", "PIP2", "PIP3", "PKC", "p44/42", "pakts473", "pjnk", "plcg", "pmek", "praf"},
             {"P38", "PIP2", "PIP3", "PKA", "PKC", "pakts473", "pjnk", "plcg", "pmek", "praf"}}};
}

inline std::vector<Fixture> all_fixtures() {
    return {synthetic1_fixture(), synthetic2_fixture(), motivating_fixture(), sample_size_fixture(), sachs_fixture()};
}

inline Fixture fixture_by_name(const std::string& name) {
    for (auto& f : all_fixtures()) {
        if (f.name == name) return f;
    }
    throw LookupError("unknown fixture '" + name + "'");
}

/// Noise means for the first synthetic problem, in the order (X, Y, Z).
inline constexpr std::array<double, 3> kSynthetic1Scales{1.0, 0.5, 0.5};
/// Noise means for the second, in the order (Y, X, Z, W, S, V).
inline constexpr std::array<double, 6> kSynthetic2Scales{1.0, 0.5, 0.5, 0.5, 1.0, 0.25};

/// x = n_x, y = 3 log(x^2) n_y, z = 4 y^2 n_z with exponential noise.
inline Dataset gen_synthetic1(int n, std::uint64_t seed, const std::array<double, 3>& scales = kSynthetic1Scales) {
    detail::require_rows(n);
    std::mt19937_64 rng(seed);
    const Eigen::VectorXd nx = detail::exponential(rng, n, scales[0]);
    const Eigen::VectorXd ny = detail::exponential(rng, n, scales[1]);
    const Eigen::VectorXd nz = detail::exponential(rng, n, scales[2]);
    Dataset d;
    d.variables = {"X", "Y", "Z"};
    d.samples.resize(n, 3);
    d.samples.col(0) = nx;
    d.samples.col(1) = (3.0 * nx.array().square().log() * ny.array()).matrix();
    d.samples.col(2) = (4.0 * d.samples.col(1).array().square() * nz.array()).matrix();
    return d;
}

/// y = n_y, x = 3 log(y^2) n_x, z = 4 y^2 n_z, w = z^0.5 n_w, s = n_s,
/// v = w^2 s^3 n_v with exponential noise.
inline Dataset gen_synthetic2(int n, std::uint64_t seed, const std::array<double, 6>& scales = kSynthetic2Scales) {
    detail::require_rows(n);
    std::mt19937_64 rng(seed);
    std::array<Eigen::VectorXd, 6> noise;
    for (std::size_t i = 0; i < noise.size(); ++i) noise[i] = detail::exponential(rng, n, scales[i]);
    const Eigen::ArrayXd y = noise[0].array();
    const Eigen::ArrayXd x = 3.0 * y.square().log() * noise[1].array();
    const Eigen::ArrayXd z = 4.0 * y.square() * noise[2].array();
    const Eigen::ArrayXd w = z.sqrt() * noise[3].array();
    const Eigen::ArrayXd s = noise[4].array();
    const Eigen::ArrayXd v = w.square() * s.cube() * noise[5].array();
    Dataset d;
    d.variables = {"Y", "X", "Z", "W", "S", "V"};
    d.samples.resize(n, 6);
    d.samples << y.matrix(), x.matrix(), z.matrix(), w.matrix(), s.matrix(), v.matrix();
    return d;
}

/// Data for the sample-size fixture, columns t, u, v, w, x, y, z:
/// y, t exponential roots; x = 3 (log y^2 + log t^2) n1; z = x^2 n2;
/// u = z^2 n3; v = z^2 n4; w = v n5, with exponential noise of mean 0.5.
/// Only the mechanisms into x are needed for the study; the rest are chosen
/// so the direction method abstains on them rather than erring.
inline Dataset gen_sample_size(int n, std::uint64_t seed) {
    detail::require_rows(n);
    std::mt19937_64 rng(seed);
    auto e = [&](double scale) { return detail::exponential(rng, n, scale).array().eval(); };
    const Eigen::ArrayXd y = e(1.0);
    const Eigen::ArrayXd t = e(1.0);
    std::array<Eigen::ArrayXd, 5> noise;
    for (auto& a : noise) a = e(0.5);
    const Eigen::ArrayXd x = 3.0 * (y.square().log() + t.square().log()) * noise[0];
    const Eigen::ArrayXd z = x.square() * noise[1];
    const Eigen::ArrayXd u = z.square() * noise[2];
    const Eigen::ArrayXd v = z.square() * noise[3];
    const Eigen::ArrayXd w = v * noise[4];
    Dataset d;
    d.variables = {"t", "u", "v", "w", "x", "y", "z"};
    d.samples.resize(n, 7);
    d.samples << t.matrix(), u.matrix(), v.matrix(), w.matrix(), x.matrix(), y.matrix(), z.matrix();
    return d;
}

/// Random generating DAG, optionally with latent confounders, and its latent
/// projection onto the observed nodes.
struct RandomTruth {
    MixedGraph dag;
    NodeSet observed;
    Mag projection;
};

/// Observed labels V1..Vn (zero-padded when n >= 10).
inline std::vector<std::string> variable_labels(int n, const std::string& prefix = "V") {
    const int width = static_cast<int>(std::to_string(n).size());
    std::vector<std::string> out;
    for (int i = 1; i <= n; ++i) {
        std::string digits = std::to_string(i);
        out.push_back(prefix + std::string(static_cast<std::size_t>(width) - digits.size(), '0') + digits);
    }
    return out;
}

/// Edge-toggle Markov chain over DAGs: pick an ordered pair, delete the arc
/// if present, otherwise add it unless that closes a cycle. 10 n^2 steps of
/// burn-in. Each pair of observed nodes then gains a latent common cause
/// with probability `p_conf`.
inline RandomTruth random_truth(int n_nodes, std::uint64_t seed, double p_conf = 0.0) {
    if (n_nodes < 3) throw PreconditionError("random_truth needs at least 3 nodes");
    if (p_conf < 0.0 || p_conf > 1.0) throw PreconditionError("p_conf must lie in [0, 1]");
    std::mt19937_64 rng(seed);
    const int n = n_nodes;
    std::vector<std::vector<char>> arc(static_cast<std::size_t>(n), std::vector<char>(static_cast<std::size_t>(n), 0));
    auto reaches = [&](int from, int to) {
        std::vector<char> seen(static_cast<std::size_t>(n), 0);
        std::vector<int> stack{from};
        seen[static_cast<std::size_t>(from)] = 1;
        while (!stack.empty()) {
            const int u = stack.back();
            stack.pop_back();
            if (u == to) return true;
            for (int v = 0; v < n; ++v) {
                if (arc[static_cast<std::size_t>(u)][static_cast<std::size_t>(v)] && !seen[static_cast<std::size_t>(v)]) {
                    seen[static_cast<std::size_t>(v)] = 1;
                    stack.push_back(v);
                }
            }
        }
        return false;
    };
    std::uniform_int_distribution<int> pick(0, n - 1);
    const long steps = 10L * n * n;
    for (long s = 0; s < steps; ++s) {
        const int i = pick(rng);
        int j = pick(rng);
        while (j == i) j = pick(rng);
        char& a = arc[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
        if (a) {
            a = 0;
        } else if (!reaches(j, i)) {
            a = 1;
        }
    }
    std::vector<std::string> observed = variable_labels(n);
    std::vector<std::pair<int, int>> confounded;
    std::bernoulli_distribution coin(p_conf);
    for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) {
            if (p_conf > 0.0 && coin(rng)) confounded.emplace_back(i, j);
        }
    }
    std::vector<std::string> labels = observed;
    const std::vector<std::string> latent = variable_labels(static_cast<int>(confounded.size()), "L");
    labels.insert(labels.end(), latent.begin(), latent.end());
    MixedGraph dag(labels);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            if (arc[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)]) dag.add_directed(observed[static_cast<std::size_t>(i)], observed[static_cast<std::size_t>(j)]);
        }
    }
    for (std::size_t k = 0; k < confounded.size(); ++k) {
        dag.add_directed(latent[k], observed[static_cast<std::size_t>(confounded[k].first)]);
        dag.add_directed(latent[k], observed[static_cast<std::size_t>(confounded[k].second)]);
    }
    const NodeSet obs = dag.node_set(observed);
    return {dag, obs, marginalize(dag, obs)};
}

/// Additive-noise structural equations over a DAG: every node is the sum of
/// one smooth nonlinearity per parent plus independent non-Gaussian noise.
struct StructuralModel {
    enum class Shape { Tanh, Sine, Square, Cube };
    struct Term {
        Node parent;
        Shape shape;
        double weight;
    };
    MixedGraph dag;
    std::vector<std::vector<Term>> terms;  // by node
    std::vector<double> noise_scale;       // by node; uniform noise on [-s, s]
};

namespace detail {

inline std::vector<Node> topological_order(const MixedGraph& dag) {
    std::vector<int> indegree(static_cast<std::size_t>(dag.num_nodes()), 0);
    for (Node v = 0; v < dag.num_nodes(); ++v) indegree[static_cast<std::size_t>(v)] = dag.parents(v).size();
    std::vector<Node> order;
    std::vector<char> done(static_cast<std::size_t>(dag.num_nodes()), 0);
    while (static_cast<int>(order.size()) < dag.num_nodes()) {
        bool progressed = false;
        for (Node v = 0; v < dag.num_nodes(); ++v) {
            if (done[static_cast<std::size_t>(v)] || indegree[static_cast<std::size_t>(v)] != 0) continue;
            done[static_cast<std::size_t>(v)] = 1;
            order.push_back(v);
            for (Node c : dag.children(v)) --indegree[static_cast<std::size_t>(c)];
            progressed = true;
        }
        if (!progressed) throw PreconditionError("structural model needs an acyclic graph");
    }
    return order;
}

inline double apply_shape(StructuralModel::Shape s, double u) {
    switch (s) {
        case StructuralModel::Shape::Tanh: return std::tanh(2.0 * u);
        case StructuralModel::Shape::Sine: return std::sin(2.0 * u);
        case StructuralModel::Shape::Square: return u * u;
        case StructuralModel::Shape::Cube: return u * u * u;
    }
    return u;
}

}  // namespace detail

/// Draws shapes, weights in [0.5, 1.5] with random sign, and noise scales in
/// [0.2, 0.5] for every node of `dag`.
inline StructuralModel random_structural_model(const MixedGraph& dag, std::uint64_t seed) {
    for (const Edge& e : dag.edges()) {
        if (!dag.is_directed(e.a, e.b) && !dag.is_directed(e.b, e.a)) {
            throw PreconditionError("structural model needs a graph with directed edges only");
        }
    }
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> shape(0, 3);
    std::uniform_real_distribution<double> weight(0.5, 1.5);
    std::uniform_real_distribution<double> noise(0.2, 0.5);
    std::bernoulli_distribution negative(0.5);
    StructuralModel m;
    m.dag = dag;
    m.terms.resize(static_cast<std::size_t>(dag.num_nodes()));
    m.noise_scale.resize(static_cast<std::size_t>(dag.num_nodes()));
    for (Node v = 0; v < dag.num_nodes(); ++v) {
        for (Node p : dag.parents(v)) {
            const auto s = static_cast<StructuralModel::Shape>(shape(rng));
            const double w = weight(rng) * (negative(rng) ? -1.0 : 1.0);
            m.terms[static_cast<std::size_t>(v)].push_back({p, s, w});
        }
        m.noise_scale[static_cast<std::size_t>(v)] = noise(rng);
    }
    (void)detail::topological_order(dag);
    return m;
}

/// n samples of every node of the model's graph. Parent values are
/// standardized before entering a nonlinearity so scales stay bounded.
inline Dataset sample(const StructuralModel& m, int n, std::uint64_t seed) {
    detail::require_rows(n);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    const int p = m.dag.num_nodes();
    Eigen::MatrixXd x = Eigen::MatrixXd::Zero(n, p);
    Eigen::MatrixXd standardized = Eigen::MatrixXd::Zero(n, p);
    for (Node v : detail::topological_order(m.dag)) {
        Eigen::VectorXd col(n);
        for (int i = 0; i < n; ++i) col(i) = m.noise_scale[static_cast<std::size_t>(v)] * unit(rng);
        for (const auto& t : m.terms[static_cast<std::size_t>(v)]) {
            for (int i = 0; i < n; ++i) col(i) += t.weight * detail::apply_shape(t.shape, standardized(i, t.parent));
        }
        x.col(v) = col;
        const double mean = col.mean();
        const double sd = n > 1 ? std::sqrt((col.array() - mean).square().sum() / (n - 1)) : 0.0;
        if (sd > 0) standardized.col(v) = ((col.array() - mean) / sd).matrix();
    }
    Dataset d;
    d.variables = m.dag.labels();
    d.samples = x;
    return d;
}

}  // namespace overlap_causal
