#pragma once

#include <atomic>
#include <cmath>
#include <chrono>
#include <cstdint>
#include <iomanip>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "overlap_causal/bcd.hpp"
#include "overlap_causal/criteria.hpp"
#include "overlap_causal/dataset.hpp"
#include "overlap_causal/errors.hpp"
#include "overlap_causal/graph.hpp"
#include "overlap_causal/graph_algorithms.hpp"
#include "overlap_causal/independence.hpp"
#include "overlap_causal/iod.hpp"
#include "overlap_causal/logging.hpp"
#include "overlap_causal/synthetic.hpp"

namespace overlap_causal {

/// Output quality against the true MAG.
struct Metrics {
    std::size_t mag_count = 0;
    double precision = 0.0;
    double recall = 0.0;
};

/// An output edge counts as correct when the truth has the same adjacency
/// with identical marks at both ends. P divides by all output edges, R by the
/// truth's edge count times the number of MAGs.
inline Metrics precision_recall(const std::vector<Mag>& mags, const Mag& truth) {
    if (mags.empty()) {
        logger()->warn("precision_recall: empty solution list, reporting zeros");
        return {};
    }
    std::size_t matching = 0;
    std::size_t total = 0;
    for (const Mag& g : mags) {
        if (g.labels() != truth.labels()) throw PreconditionError("precision_recall: node sets differ");
        for (const Edge& e : g.edges()) {
            ++total;
            if (truth.mark_at(e.a, e.b) == e.mark_a && truth.mark_at(e.b, e.a) == e.mark_b) ++matching;
        }
    }
    Metrics m;
    m.mag_count = mags.size();
    m.precision = total == 0 ? 0.0 : static_cast<double>(matching) / static_cast<double>(total);
    const auto truth_edges = static_cast<std::size_t>(truth.num_edges());
    m.recall = truth_edges == 0 ? 0.0
                                : static_cast<double>(matching) / static_cast<double>(truth_edges * mags.size());
    return m;
}

inline nlohmann::json metrics_to_json(const Metrics& m) {
    return {{"mag_count", m.mag_count}, {"precision", m.precision}, {"recall", m.recall}};
}

/// Datasets over overlapping variable sets, with the generating graph and
/// its projection onto the observed variables. `datasets` is empty in
/// oracle mode.
struct OverlapProblem {
    MixedGraph generator;
    NodeSet observed;
    Mag truth;
    std::vector<std::vector<std::string>> variable_sets;
    std::vector<Dataset> datasets;

    bool has_data() const { return !datasets.empty(); }
};

namespace detail {

inline void check_variable_sets(const MixedGraph& generator, NodeSet observed,
                                const std::vector<std::vector<std::string>>& sets) {
    if (sets.empty()) throw PreconditionError("an overlap problem needs at least one variable set");
    std::vector<NodeSet> ns;
    NodeSet covered;
    for (const auto& s : sets) {
        NodeSet one;
        for (const auto& v : s) {
            const Node i = generator.index(v);
            if (!observed.contains(i)) throw PreconditionError("variable '" + v + "' is latent");
            one.insert(i);
        }
        ns.push_back(one);
        covered |= one;
    }
    for (Node v : observed - covered) {
        throw PreconditionError("observed variable '" + generator.label(v) + "' is in no dataset");
    }
    for (std::size_t i = 0; ns.size() > 1 && i < ns.size(); ++i) {
        NodeSet others;
        for (std::size_t j = 0; j < ns.size(); ++j) {
            if (j != i) others |= ns[j];
        }
        if (!ns[i].intersects(others)) {
            throw PreconditionError("variable set " + std::to_string(i) + " shares no variable with the others");
        }
    }
}

}  // namespace detail

/// Oracle problem when `joint` is absent. Otherwise each dataset takes its
/// columns from the one joint sample.
inline OverlapProblem make_overlap_problem(const MixedGraph& generator, NodeSet observed,
                                           const std::vector<std::vector<std::string>>& sets,
                                           const std::optional<Dataset>& joint = std::nullopt) {
    detail::check_variable_sets(generator, observed, sets);
    OverlapProblem p;
    p.generator = generator;
    p.observed = observed;
    p.truth = marginalize(generator, observed);
    p.variable_sets = sets;
    if (joint) {
        for (const auto& s : sets) p.datasets.push_back(joint->select(s));
    }
    return p;
}

/// Every node observed; data, when `n` is given, drawn from random additive
/// noise structural equations over the (acyclic, bidirected-free) generator.
inline OverlapProblem make_overlap_problem(const MixedGraph& generator,
                                           const std::vector<std::vector<std::string>>& sets,
                                           std::optional<int> n = std::nullopt, std::uint64_t seed = 0) {
    std::optional<Dataset> joint;
    if (n) joint = sample(random_structural_model(generator, seed), *n, seed + 1);
    return make_overlap_problem(generator, generator.nodes(), sets, joint);
}

/// Joint sample of a named fixture from its own equations.
inline Dataset fixture_sample(const std::string& name, int n, std::uint64_t seed) {
    if (name == "synthetic1") return gen_synthetic1(n, seed);
    if (name == "synthetic2") return gen_synthetic2(n, seed);
    if (name == "sample_size") return gen_sample_size(n, seed);
    throw PreconditionError("fixture '" + name + "' has no data generator");
}

/// Splits for an overlap of k variables: the first k labels are shared and
/// the remainder is halved between two datasets (first half gets the extra).
inline std::vector<std::vector<std::string>> overlap_split(const std::vector<std::string>& labels, int k) {
    const int n = static_cast<int>(labels.size());
    if (k < 1 || k > n - 2) throw PreconditionError("overlap size must lie in [1, n - 2]");
    std::vector<std::string> shared(labels.begin(), labels.begin() + k);
    const int rest = n - k;
    const int first = (rest + 1) / 2;
    std::vector<std::string> a = shared;
    std::vector<std::string> b = shared;
    a.insert(a.end(), labels.begin() + k, labels.begin() + k + first);
    b.insert(b.end(), labels.begin() + k + first, labels.end());
    return {a, b};
}

enum class CiKind { Oracle, Kernel };
enum class BcdKind { Oracle, Kcdc, None };

inline const char* to_string(CiKind k) { return k == CiKind::Oracle ? "oracle" : "kernel"; }

inline const char* to_string(BcdKind k) {
    switch (k) {
        case BcdKind::Oracle: return "oracle";
        case BcdKind::Kcdc: return "kcdc";
        case BcdKind::None: break;
    }
    return "none";
}

inline CiKind ci_kind_from_string(const std::string& s) {
    if (s == "oracle") return CiKind::Oracle;
    if (s == "kernel") return CiKind::Kernel;
    throw FormatError("unknown ci backend '" + s + "'");
}

inline BcdKind bcd_kind_from_string(const std::string& s) {
    if (s == "oracle") return BcdKind::Oracle;
    if (s == "kcdc") return BcdKind::Kcdc;
    if (s == "none") return BcdKind::None;
    throw FormatError("unknown bcd method '" + s + "'");
}

struct PipelineOptions {
    CiKind ci = CiKind::Oracle;
    BcdKind bcd = BcdKind::Oracle;
    Part1Options part1;
    Part2Options part2;
    KcdcOptions kcdc;
    KernelCiOptions kernel_ci;
};

/// One search over a problem with the chosen information sources.
inline IodResult run_pipeline(const OverlapProblem& p, IodMode mode, const PipelineOptions& opt,
                              const CausalStore* extra = nullptr) {
    const bool needs_data = opt.ci == CiKind::Kernel || (mode != IodMode::Iod && opt.bcd == BcdKind::Kcdc);
    if (needs_data && !p.has_data()) throw PreconditionError("kernel CI and KCDC need sampled data");
    std::unique_ptr<CiBackend> ci;
    if (opt.ci == CiKind::Oracle) {
        ci = std::make_unique<OracleCiBackend>(p.generator);
    } else {
        ci = std::make_unique<KernelCiBackend>(p.datasets, opt.kernel_ci);
    }
    std::optional<PairClassifier> classify;
    if (mode != IodMode::Iod) {
        if (opt.bcd == BcdKind::Oracle) classify = oracle_classifier(p.generator);
        if (opt.bcd == BcdKind::Kcdc) classify = kcdc_classifier(p.datasets, opt.kcdc);
    }
    return run_iod(p.variable_sets, *ci, classify ? &*classify : nullptr, mode, opt.part1, opt.part2, extra);
}

/// One experiment as read from a JSON config.
struct ExperimentConfig {
    std::string id;
    /// "fixture" (a named graph) or "random" (overlap sweep on random graphs).
    std::string source = "fixture";
    std::string fixture;
    /// Optional replacement for the fixture's own splits.
    std::vector<std::vector<std::string>> splits;
    std::vector<std::uint64_t> seeds{0};
    /// Empty means oracle only; otherwise one group per sample size.
    std::vector<int> sample_sizes;
    std::vector<IodMode> modes{IodMode::Iod, IodMode::IodBcd, IodMode::CausalIod};
    CiKind ci = CiKind::Oracle;
    BcdKind bcd = BcdKind::Oracle;
    double alpha = 0.05;
    int max_cond_size = -1;
    double budget_seconds = 0.0;
    std::uint64_t max_mags = 0;
    int jobs = 1;
    int nodes = 6;
    std::vector<int> overlaps;
    double p_conf = 0.0;

    void validate() const {
        if (id.empty()) throw FormatError("experiment config needs an id");
        if (source != "fixture" && source != "random") throw FormatError("source must be 'fixture' or 'random'");
        if (source == "fixture") fixture_by_name(fixture);
        if (source == "random") {
            if (nodes < 3) throw FormatError("random graphs need at least 3 nodes");
            if (overlaps.empty()) throw FormatError("random source needs a list of overlaps");
            for (int k : overlaps) {
                if (k < 1 || k > nodes - 2) throw FormatError("overlap sizes must lie in [1, nodes - 2]");
            }
        }
        if (seeds.empty()) throw FormatError("experiment config needs at least one seed");
        if (modes.empty()) throw FormatError("experiment config needs at least one mode");
        for (int n : sample_sizes) {
            if (n < 1) throw FormatError("sample sizes must be positive");
        }
        const bool needs_data = ci == CiKind::Kernel || bcd == BcdKind::Kcdc;
        if (needs_data && sample_sizes.empty()) throw FormatError("kernel CI and KCDC need sample_sizes");
        if (!(alpha > 0.0 && alpha < 1.0)) throw FormatError("alpha must lie in (0, 1)");
        if (budget_seconds < 0.0) throw FormatError("budget_seconds must be non-negative");
        if (jobs < 1) throw FormatError("jobs must be at least 1");
        if (p_conf < 0.0 || p_conf > 1.0) throw FormatError("p_conf must lie in [0, 1]");
    }
};

inline ExperimentConfig experiment_config_from_json(const nlohmann::json& j) {
    ExperimentConfig c;
    try {
        c.id = j.at("id").get<std::string>();
        c.source = j.value("source", c.source);
        c.fixture = j.value("fixture", c.fixture);
        c.splits = j.value("splits", c.splits);
        c.seeds = j.value("seeds", c.seeds);
        c.sample_sizes = j.value("sample_sizes", c.sample_sizes);
        if (j.contains("modes")) {
            c.modes.clear();
            for (const auto& m : j.at("modes")) c.modes.push_back(mode_from_string(m.get<std::string>()));
        }
        c.ci = ci_kind_from_string(j.value("ci", std::string(to_string(c.ci))));
        c.bcd = bcd_kind_from_string(j.value("bcd", std::string(to_string(c.bcd))));
        c.alpha = j.value("alpha", c.alpha);
        c.max_cond_size = j.value("max_cond_size", c.max_cond_size);
        c.budget_seconds = j.value("budget_seconds", c.budget_seconds);
        c.max_mags = j.value("max_mags", c.max_mags);
        c.jobs = j.value("jobs", c.jobs);
        c.nodes = j.value("nodes", c.nodes);
        c.overlaps = j.value("overlaps", c.overlaps);
        c.p_conf = j.value("p_conf", c.p_conf);
    } catch (const nlohmann::json::exception& ex) {
        throw FormatError(std::string("malformed experiment config: ") + ex.what());
    }
    c.validate();
    return c;
}

/// Result of one mode on one problem instance.
struct InstanceResult {
    std::string group;
    std::uint64_t seed = 0;
    IodMode mode = IodMode::Iod;
    Metrics metrics;
    double seconds = 0.0;
    bool complete = true;
    bool contains_truth = false;
    /// Every output MAG classifies every stored pair as stored.
    bool sound = true;
    std::size_t store_size = 0;
    std::size_t removal_candidates = 0;
    std::size_t immorality_candidates = 0;
};

/// Mean over the instances of one (group, mode). Means cover complete runs;
/// a row with any incomplete run is reported intractable.
struct ReportRow {
    std::string experiment;
    std::string group;
    std::string overlap;
    IodMode mode = IodMode::Iod;
    std::size_t instances = 0;
    std::size_t intractable = 0;
    double mag_count = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    double seconds = 0.0;
};

struct ExperimentReport {
    ExperimentConfig config;
    std::vector<ReportRow> rows;
    std::vector<InstanceResult> instances;

    nlohmann::json to_json() const;
    std::string to_table() const;
};

namespace detail {

inline std::string overlap_label(const std::vector<std::vector<std::string>>& sets) {
    std::set<std::string> all;
    std::set<std::string> shared(sets.front().begin(), sets.front().end());
    for (const auto& s : sets) {
        all.insert(s.begin(), s.end());
        std::set<std::string> keep;
        for (const auto& v : s) {
            if (shared.count(v) > 0) keep.insert(v);
        }
        shared = keep;
    }
    return std::to_string(shared.size()) + "/" + std::to_string(all.size());
}

struct Task {
    std::string group;
    std::uint64_t seed = 0;
    std::optional<int> n;
    int overlap = 0;
};

inline OverlapProblem task_problem(const ExperimentConfig& c, const Task& t) {
    if (c.source == "random") {
        const RandomTruth rt = random_truth(c.nodes, t.seed, c.p_conf);
        const auto sets = overlap_split(variable_labels(c.nodes), t.overlap);
        std::optional<Dataset> joint;
        if (t.n) joint = sample(random_structural_model(rt.dag, t.seed), *t.n, t.seed + 1);
        return make_overlap_problem(rt.dag, rt.observed, sets, joint);
    }
    const Fixture f = fixture_by_name(c.fixture);
    const auto sets = c.splits.empty() ? f.splits : c.splits;
    std::optional<Dataset> joint;
    if (t.n) joint = fixture_sample(f.name, *t.n, t.seed);
    return make_overlap_problem(f.truth, f.truth.nodes(), sets, joint);
}

inline std::vector<InstanceResult> run_task(const ExperimentConfig& c, const Task& t, int inner_jobs) {
    const OverlapProblem p = task_problem(c, t);
    PipelineOptions opt;
    opt.ci = c.ci;
    opt.bcd = c.bcd;
    opt.part1.alpha = c.alpha;
    opt.part1.max_cond_size = c.max_cond_size;
    opt.part2.budget_seconds = c.budget_seconds;
    opt.part2.max_mags = c.max_mags;
    opt.part2.jobs = inner_jobs;
    std::vector<InstanceResult> out;
    for (IodMode mode : c.modes) {
        const auto start = std::chrono::steady_clock::now();
        const IodResult r = run_pipeline(p, mode, opt);
        InstanceResult ir;
        ir.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        ir.group = t.group;
        ir.seed = t.seed;
        ir.mode = mode;
        const std::vector<Mag> mags = r.solutions.mags();
        ir.metrics = precision_recall(mags, p.truth);
        ir.complete = r.complete;
        for (const Mag& m : mags) {
            if (m == p.truth) ir.contains_truth = true;
            if (!consistent_mag(m, r.store)) ir.sound = false;
        }
        ir.store_size = r.store.size();
        ir.removal_candidates = r.stats.removal_candidates;
        ir.immorality_candidates = r.stats.immorality_candidates;
        out.push_back(ir);
    }
    return out;
}

}  // namespace detail

/// Runs every (group, seed) instance, `jobs` at a time, and aggregates the
/// rows in configuration order so the report does not depend on `jobs`.
inline ExperimentReport run_experiment(const ExperimentConfig& c) {
    c.validate();
    std::vector<detail::Task> tasks;
    std::vector<std::pair<std::string, std::string>> groups;
    std::vector<std::optional<int>> sizes;
    if (c.sample_sizes.empty()) {
        sizes.push_back(std::nullopt);
    } else {
        for (int n : c.sample_sizes) sizes.emplace_back(n);
    }
    auto name_of = [](const std::optional<int>& n) { return n ? "n=" + std::to_string(*n) : std::string("oracle"); };
    if (c.source == "random") {
        for (int k : c.overlaps) {
            const std::string overlap = std::to_string(k) + "/" + std::to_string(c.nodes);
            for (const auto& n : sizes) {
                const std::string g = overlap + " " + name_of(n);
                groups.emplace_back(g, overlap);
                for (auto s : c.seeds) tasks.push_back({g, s, n, k});
            }
        }
    } else {
        const Fixture f = fixture_by_name(c.fixture);
        const std::string overlap = detail::overlap_label(c.splits.empty() ? f.splits : c.splits);
        for (const auto& n : sizes) {
            const std::string g = name_of(n);
            groups.emplace_back(g, overlap);
            for (auto s : c.seeds) tasks.push_back({g, s, n, 0});
        }
    }

    std::vector<std::vector<InstanceResult>> results(tasks.size());
    const int workers = std::min<int>(c.jobs, static_cast<int>(tasks.size()));
    const int inner_jobs = workers > 1 ? 1 : c.jobs;
    std::atomic<std::size_t> next{0};
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(std::max(workers, 1)));
    auto work = [&](int w) {
        try {
            for (std::size_t i = next++; i < tasks.size(); i = next++) {
                results[i] = detail::run_task(c, tasks[i], inner_jobs);
            }
        } catch (...) {
            errors[static_cast<std::size_t>(w)] = std::current_exception();
            next = tasks.size();
        }
    };
    if (workers <= 1) {
        work(0);
    } else {
        std::vector<std::thread> pool;
        for (int w = 0; w < workers; ++w) pool.emplace_back(work, w);
        for (auto& t : pool) t.join();
    }
    for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }

    ExperimentReport rep;
    rep.config = c;
    for (auto& r : results) rep.instances.insert(rep.instances.end(), r.begin(), r.end());
    for (const auto& [g, overlap] : groups) {
        for (IodMode mode : c.modes) {
            ReportRow row;
            row.experiment = c.id;
            row.group = g;
            row.overlap = overlap;
            row.mode = mode;
            std::size_t done = 0;
            for (const auto& ir : rep.instances) {
                if (ir.group != g || ir.mode != mode) continue;
                ++row.instances;
                row.seconds += ir.seconds;
                if (!ir.complete) {
                    ++row.intractable;
                    continue;
                }
                ++done;
                row.mag_count += static_cast<double>(ir.metrics.mag_count);
                row.precision += ir.metrics.precision;
                row.recall += ir.metrics.recall;
            }
            if (done > 0) {
                row.mag_count /= static_cast<double>(done);
                row.precision /= static_cast<double>(done);
                row.recall /= static_cast<double>(done);
            }
            if (row.instances > 0) row.seconds /= static_cast<double>(row.instances);
            rep.rows.push_back(row);
        }
    }
    return rep;
}

inline nlohmann::json ExperimentReport::to_json() const {
    nlohmann::json rows_j = nlohmann::json::array();
    for (const auto& r : rows) {
        nlohmann::json j = {{"experiment", r.experiment}, {"group", r.group},          {"overlap", r.overlap},
                            {"algorithm", to_string(r.mode)}, {"instances", r.instances}, {"intractable", r.intractable},
                            {"seconds", r.seconds}};
        if (r.intractable == 0) {
            j["mag_count"] = r.mag_count;
            j["precision"] = r.precision;
            j["recall"] = r.recall;
        } else {
            j["mag_count"] = nullptr;
            j["precision"] = nullptr;
            j["recall"] = nullptr;
        }
        rows_j.push_back(j);
    }
    nlohmann::json inst = nlohmann::json::array();
    for (const auto& i : instances) {
        inst.push_back({{"group", i.group},
                        {"seed", i.seed},
                        {"algorithm", to_string(i.mode)},
                        {"metrics", metrics_to_json(i.metrics)},
                        {"seconds", i.seconds},
                        {"complete", i.complete},
                        {"contains_truth", i.contains_truth},
                        {"sound", i.sound},
                        {"store_size", i.store_size},
                        {"removal_candidates", i.removal_candidates},
                        {"immorality_candidates", i.immorality_candidates}});
    }
    return {{"experiment", config.id},
            {"ci", to_string(config.ci)},
            {"bcd", to_string(config.bcd)},
            {"rows", rows_j},
            {"instances", inst}};
}

/// Aligned text table: Experiment, Overlap/Total, Algorithm, Setting,
/// MAG count, P, R, seconds. Intractable rows show "-".
inline std::string ExperimentReport::to_table() const {
    std::vector<std::vector<std::string>> cells{
        {"Experiment", "Overlap/Total", "Algorithm", "Setting", "MAG count", "P", "R", "Time (s)"}};
    auto fixed = [](double v, int digits) {
        std::ostringstream os;
        os << std::fixed << std::setprecision(digits) << v;
        return os.str();
    };
    for (const auto& r : rows) {
        const bool dash = r.intractable > 0;
        const bool whole = r.instances == 1 || std::floor(r.mag_count) == r.mag_count;
        cells.push_back({r.experiment, r.overlap, to_string(r.mode), r.group,
                         dash ? "-" : fixed(r.mag_count, whole ? 0 : 1), dash ? "-" : fixed(r.precision, 2),
                         dash ? "-" : fixed(r.recall, 2), fixed(r.seconds, 2)});
    }
    std::vector<std::size_t> width(cells.front().size(), 0);
    for (const auto& row : cells) {
        for (std::size_t i = 0; i < row.size(); ++i) width[i] = std::max(width[i], row[i].size());
    }
    std::ostringstream os;
    for (std::size_t r = 0; r < cells.size(); ++r) {
        for (std::size_t i = 0; i < cells[r].size(); ++i) {
            os << std::left << std::setw(static_cast<int>(width[i])) << cells[r][i];
            os << (i + 1 < cells[r].size() ? "  " : "\n");
        }
        if (r == 0) {
            std::size_t total = 0;
            for (auto w : width) total += w + 2;
            os << std::string(total - 2, '-') << "\n";
        }
    }
    return os.str();
}

}  // namespace overlap_causal
