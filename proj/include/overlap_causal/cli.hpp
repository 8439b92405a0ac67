#pragma once

#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "overlap_causal/bcd.hpp"
#include "overlap_causal/criteria.hpp"
#include "overlap_causal/dataset.hpp"
#include "overlap_causal/errors.hpp"
#include "overlap_causal/experiments.hpp"
#include "overlap_causal/graph_io.hpp"
#include "overlap_causal/independence.hpp"
#include "overlap_causal/iod.hpp"
#include "overlap_causal/logging.hpp"
#include "overlap_causal/synthetic.hpp"

namespace overlap_causal::cli {

namespace fs = std::filesystem;

inline constexpr int kExitOk = 0;
inline constexpr int kExitError = 1;
inline constexpr int kExitPartial = 2;

/// Flags shared by the commands that run a search. Unset flags leave the
/// configuration value alone.
struct Overrides {
    std::optional<std::uint64_t> seed;
    std::optional<int> jobs;
    std::optional<double> alpha;
    std::optional<double> budget_seconds;
    std::optional<std::string> mode;
    std::optional<std::string> ci;
    std::optional<std::string> bcd;
};

/// Files produced by a command, written only once the whole run succeeded.
class OutputSet {
public:
    void add(std::string name, std::string content) { files_.emplace_back(std::move(name), std::move(content)); }

    /// Writes into a staging directory next to `dir`, then moves each file
    /// into place. On failure nothing new is left behind.
    void commit(const fs::path& dir) const {
        const bool existed = fs::exists(dir);
        fs::create_directories(dir);
        const fs::path staging = dir / ".staging";
        fs::remove_all(staging);
        fs::create_directories(staging);
        try {
            for (const auto& [name, content] : files_) {
                std::ofstream out(staging / name, std::ios::binary);
                out << content;
                if (!out) throw FormatError("cannot write '" + (dir / name).string() + "'");
            }
            for (const auto& [name, content] : files_) fs::rename(staging / name, dir / name);
            fs::remove_all(staging);
        } catch (...) {
            fs::remove_all(staging);
            if (!existed) fs::remove_all(dir);
            throw;
        }
    }

private:
    std::vector<std::pair<std::string, std::string>> files_;
};

inline std::string config_hash(const nlohmann::json& j) {
    std::ostringstream os;
    os << std::hex << std::setw(16) << std::setfill('0') << std::hash<std::string>{}(j.dump());
    return os.str();
}

inline fs::path resolve(const fs::path& base, const std::string& p) {
    const fs::path path(p);
    return path.is_absolute() ? path : base / path;
}

/// Discovery problem as read from a config file.
struct DiscoverConfig {
    struct Source {
        std::optional<std::string> path;
        std::vector<std::string> variables;
    };
    std::vector<Source> datasets;
    IodMode mode = IodMode::CausalIod;
    CiKind ci = CiKind::Kernel;
    BcdKind bcd = BcdKind::Kcdc;
    double alpha = 0.05;
    int max_cond_size = -1;
    double budget_seconds = 0.0;
    std::uint64_t max_mags = 0;
    int jobs = 1;
    std::uint64_t seed = 0;
    std::optional<std::string> truth_graph;
    nlohmann::json expert_knowledge;
};

inline DiscoverConfig discover_config_from_json(const nlohmann::json& j, const fs::path& base) {
    DiscoverConfig c;
    try {
        for (const auto& d : j.at("datasets")) {
            DiscoverConfig::Source s;
            if (d.contains("path")) s.path = resolve(base, d.at("path").get<std::string>()).string();
            s.variables = d.value("variables", std::vector<std::string>{});
            if (!s.path && s.variables.empty()) throw FormatError("a dataset needs a path or a variable list");
            c.datasets.push_back(s);
        }
        if (c.datasets.empty()) throw FormatError("config lists no datasets");
        c.mode = mode_from_string(j.value("mode", std::string("causal-iod")));
        c.ci = ci_kind_from_string(j.value("ci", std::string("kernel")));
        c.bcd = bcd_kind_from_string(j.value("bcd", std::string("kcdc")));
        c.alpha = j.value("alpha", c.alpha);
        c.max_cond_size = j.value("max_cond_size", c.max_cond_size);
        c.budget_seconds = j.value("budget_seconds", c.budget_seconds);
        c.max_mags = j.value("max_mags", c.max_mags);
        c.jobs = j.value("jobs", c.jobs);
        c.seed = j.value("seed", c.seed);
        if (j.contains("truth_graph")) c.truth_graph = resolve(base, j.at("truth_graph").get<std::string>()).string();
        if (j.contains("expert_knowledge")) {
            const auto& e = j.at("expert_knowledge");
            c.expert_knowledge = e.is_string() ? read_json_file(resolve(base, e.get<std::string>()).string()) : e;
        }
    } catch (const nlohmann::json::exception& ex) {
        throw FormatError(std::string("malformed config: ") + ex.what());
    }
    return c;
}

inline void apply(DiscoverConfig& c, const Overrides& o) {
    if (o.seed) c.seed = *o.seed;
    if (o.jobs) c.jobs = *o.jobs;
    if (o.alpha) c.alpha = *o.alpha;
    if (o.budget_seconds) c.budget_seconds = *o.budget_seconds;
    if (o.mode) c.mode = mode_from_string(*o.mode);
    if (o.ci) c.ci = ci_kind_from_string(*o.ci);
    if (o.bcd) c.bcd = bcd_kind_from_string(*o.bcd);
    if (!(c.alpha > 0.0 && c.alpha < 1.0)) throw FormatError("alpha must lie in (0, 1)");
    if (c.jobs < 1) throw FormatError("jobs must be at least 1");
    if (c.budget_seconds < 0.0) throw FormatError("budget must be non-negative");
}

/// Solution report; member MAGs are listed so the file can be scored alone.
inline nlohmann::json solution_report(const IodResult& r) {
    nlohmann::json j = solutions_to_json(r.solutions);
    for (std::size_t i = 0; i < r.solutions.solutions.size(); ++i) {
        nlohmann::json members = nlohmann::json::array();
        for (const Mag& m : r.solutions.solutions[i].members) members.push_back(graph_to_json(m));
        j["solutions"][i]["members"] = members;
    }
    j["mode"] = to_string(r.mode);
    j["complete"] = r.complete;
    j["store"] = store_to_json(r.store);
    j["stats"] = {{"removal_candidates", r.stats.removal_candidates},
                  {"immorality_candidates", r.stats.immorality_candidates},
                  {"combinations", r.stats.combinations},
                  {"classes", r.stats.classes}};
    return j;
}

inline int discover(const std::string& config_path, const std::string& out_dir, const Overrides& o) {
    const nlohmann::json raw = read_json_file(config_path);
    DiscoverConfig c = discover_config_from_json(raw, fs::path(config_path).parent_path());
    apply(c, o);

    std::vector<Dataset> data;
    std::vector<std::vector<std::string>> vars;
    for (const auto& s : c.datasets) {
        if (s.path) {
            Dataset d = read_csv(*s.path);
            if (!s.variables.empty()) d = d.select(s.variables);
            vars.push_back(d.variables);
            data.push_back(std::move(d));
        } else {
            vars.push_back(s.variables);
        }
    }
    const bool all_data = data.size() == c.datasets.size();
    std::optional<MixedGraph> truth;
    if (c.truth_graph) truth = read_graph_file(*c.truth_graph);
    const bool oracle_needed = c.ci == CiKind::Oracle || (c.mode != IodMode::Iod && c.bcd == BcdKind::Oracle);
    if (oracle_needed && !truth) throw FormatError("oracle CI or BCD needs truth_graph");
    const bool data_needed = c.ci == CiKind::Kernel || (c.mode != IodMode::Iod && c.bcd == BcdKind::Kcdc);
    if (data_needed && !all_data) throw FormatError("kernel CI and KCDC need a CSV path for every dataset");

    std::unique_ptr<CiBackend> backend;
    if (c.ci == CiKind::Oracle) {
        backend = std::make_unique<OracleCiBackend>(*truth);
    } else {
        backend = std::make_unique<KernelCiBackend>(data);
    }
    std::optional<PairClassifier> classify;
    if (c.bcd == BcdKind::Oracle) classify = oracle_classifier(*truth);
    if (c.bcd == BcdKind::Kcdc) classify = kcdc_classifier(data);
    CausalStore extra;
    if (!c.expert_knowledge.is_null()) merge_expert_knowledge(extra, c.expert_knowledge);

    Part1Options p1;
    p1.alpha = c.alpha;
    p1.max_cond_size = c.max_cond_size;
    Part2Options p2;
    p2.budget_seconds = c.budget_seconds;
    p2.max_mags = c.max_mags;
    p2.jobs = c.jobs;
    const auto start = std::chrono::steady_clock::now();
    const IodResult r = run_iod(vars, *backend, classify ? &*classify : nullptr, c.mode, p1, p2,
                                extra.empty() ? nullptr : &extra);
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

    nlohmann::json report = solution_report(r);
    if (truth) {
        const NodeSet observed = truth->node_set(r.part1.global.labels());
        const Mag projected = marginalize(*truth, observed);
        report["metrics"] = metrics_to_json(precision_recall(r.solutions.mags(), projected));
    }
    OutputSet out;
    out.add("solutions.json", report.dump(2) + "\n");
    for (std::size_t i = 0; i < r.solutions.solutions.size(); ++i) {
        std::ostringstream name;
        name << "solution_" << std::setw(4) << std::setfill('0') << i + 1;
        out.add(name.str() + ".dot", graph_to_dot(r.solutions.solutions[i].graph, name.str()));
    }
    std::ostringstream log;
    log << "config " << fs::path(config_path).string() << "\n"
        << "config_hash " << config_hash(raw) << "\n"
        << "seed " << c.seed << "\n"
        << "mode " << to_string(c.mode) << "\n"
        << "ci " << to_string(c.ci) << "\n"
        << "bcd " << to_string(c.bcd) << "\n"
        << "alpha " << c.alpha << "\n"
        << "stored_pairs " << r.store.size() << "\n"
        << "classes " << r.stats.classes << "\n"
        << "total_mags " << r.solutions.total_mags() << "\n"
        << "complete " << (r.complete ? "true" : "false") << "\n"
        << "seconds " << seconds << "\n";
    out.add("run.log", log.str());
    out.commit(out_dir);

    std::cout << "mode " << to_string(c.mode) << ": " << r.solutions.solutions.size() << " solutions, "
              << r.solutions.total_mags() << " MAGs" << (r.complete ? "" : " (search budget exhausted)") << "\n";
    if (report.contains("metrics")) {
        std::cout << "P " << std::fixed << std::setprecision(2) << report["metrics"]["precision"].get<double>()
                  << "  R " << report["metrics"]["recall"].get<double>() << "\n";
    }
    return r.complete ? kExitOk : kExitPartial;
}

inline int synth(const std::string& name, int n, std::uint64_t seed, const std::string& out_dir, int nodes,
                 int overlap, double p_conf) {
    if (n < 1) throw PreconditionError("sample size must be at least 1");
    MixedGraph generator;
    NodeSet observed;
    std::vector<std::vector<std::string>> splits;
    Dataset joint;
    if (name == "random") {
        const RandomTruth rt = random_truth(nodes, seed, p_conf);
        generator = rt.dag;
        observed = rt.observed;
        splits = overlap_split(variable_labels(nodes), overlap);
        joint = sample(random_structural_model(rt.dag, seed), n, seed + 1);
    } else {
        if (name != "synthetic1" && name != "synthetic2" && name != "sample_size") {
            throw PreconditionError("unknown generator '" + name + "'");
        }
        const Fixture f = fixture_by_name(name);
        generator = f.truth;
        observed = f.truth.nodes();
        splits = f.splits;
        joint = fixture_sample(name, n, seed);
    }
    const OverlapProblem p = make_overlap_problem(generator, observed, splits, joint);
    OutputSet out;
    nlohmann::json config = {{"datasets", nlohmann::json::array()},
                             {"mode", "causal-iod"},
                             {"ci", "kernel"},
                             {"bcd", "kcdc"},
                             {"seed", seed},
                             {"truth_graph", "generator.json"}};
    for (std::size_t i = 0; i < p.datasets.size(); ++i) {
        std::ostringstream csv;
        csv.imbue(std::locale::classic());
        csv.precision(17);
        const Dataset& d = p.datasets[i];
        for (std::size_t j = 0; j < d.variables.size(); ++j) csv << (j ? "," : "") << d.variables[j];
        csv << '\n';
        for (Eigen::Index r = 0; r < d.samples.rows(); ++r) {
            for (Eigen::Index c = 0; c < d.samples.cols(); ++c) csv << (c ? "," : "") << d.samples(r, c);
            csv << '\n';
        }
        const std::string file = name + "_" + std::to_string(i + 1) + ".csv";
        out.add(file, csv.str());
        config["datasets"].push_back({{"path", file}});
    }
    out.add("truth.json", graph_to_json(p.truth).dump(2) + "\n");
    out.add("generator.json", graph_to_json(p.generator).dump(2) + "\n");
    out.add("config.json", config.dump(2) + "\n");
    out.commit(out_dir);
    std::cout << "wrote " << p.datasets.size() << " datasets of " << n << " rows to " << out_dir << "\n";
    return kExitOk;
}

/// MAG list from a solution report, a bare graph, or a list of graphs.
inline std::vector<Mag> read_mag_list(const std::string& path) {
    const nlohmann::json j = read_json_file(path);
    std::vector<Mag> out;
    try {
        if (j.is_object() && j.contains("solutions")) {
            for (const auto& s : j.at("solutions")) {
                if (s.contains("members")) {
                    for (const auto& m : s.at("members")) out.push_back(graph_from_json(m));
                } else {
                    const MixedGraph g = graph_from_json(s.at("graph"));
                    const auto members = g.has_circles() ? enumerate_mags(g) : std::vector<Mag>{g};
                    out.insert(out.end(), members.begin(), members.end());
                }
            }
        } else if (j.is_array()) {
            for (const auto& g : j) out.push_back(graph_from_json(g));
        } else {
            out.push_back(graph_from_json(j));
        }
    } catch (const nlohmann::json::exception& ex) {
        throw FormatError(std::string("malformed solutions file: ") + ex.what());
    }
    for (const Mag& m : out) {
        if (m.has_circles()) throw FormatError("solution list contains a graph with circle marks");
    }
    return out;
}

inline int eval(const std::string& solutions_path, const std::string& truth_path) {
    const std::vector<Mag> mags = read_mag_list(solutions_path);
    const Mag truth = read_graph_file(truth_path);
    for (const Mag& m : mags) {
        if (m.labels() != truth.labels()) throw PreconditionError("solutions and truth have different node sets");
    }
    const Metrics m = precision_recall(mags, truth);
    std::cout << std::fixed << std::setprecision(2) << "MAG count " << m.mag_count << "  P " << m.precision
              << "  R " << m.recall << "\n";
    return kExitOk;
}

inline int validate_graph(const std::string& path, const std::string& kind) {
    const MixedGraph g = read_graph_file(path);
    if (graph_from_json(graph_to_json(g)) != g) throw FormatError("graph does not survive a round trip");
    bool ok = false;
    if (kind == "mag") {
        ok = !g.has_circles() && validate_mag(g);
    } else if (kind == "pag") {
        ok = !enumerate_mags(g).empty();
    } else {
        throw PreconditionError("kind must be 'mag' or 'pag'");
    }
    std::cout << path << ": " << (ok ? "valid " : "invalid ") << kind << " (" << g.num_nodes() << " nodes, "
              << g.num_edges() << " edges)\n";
    return ok ? kExitOk : kExitError;
}

inline int experiment(const std::string& config_path, const std::string& out_dir, const Overrides& o) {
    const nlohmann::json raw = read_json_file(config_path);
    std::vector<nlohmann::json> items;
    if (raw.is_object() && raw.contains("experiments")) {
        for (const auto& e : raw.at("experiments")) items.push_back(e);
    } else {
        items.push_back(raw);
    }
    OutputSet out;
    for (const auto& item : items) {
        ExperimentConfig c = experiment_config_from_json(item);
        if (o.seed) c.seeds = {*o.seed};
        if (o.jobs) c.jobs = *o.jobs;
        if (o.alpha) c.alpha = *o.alpha;
        if (o.budget_seconds) c.budget_seconds = *o.budget_seconds;
        if (o.mode) c.modes = {mode_from_string(*o.mode)};
        if (o.ci) c.ci = ci_kind_from_string(*o.ci);
        if (o.bcd) c.bcd = bcd_kind_from_string(*o.bcd);
        c.validate();
        const ExperimentReport rep = run_experiment(c);
        nlohmann::json j = rep.to_json();
        j["config_hash"] = config_hash(item);
        out.add(c.id + ".json", j.dump(2) + "\n");
        out.add(c.id + ".txt", rep.to_table());
        std::cout << rep.to_table() << "\n";
    }
    out.commit(out_dir);
    return kExitOk;
}

/// Parses arguments and dispatches. Errors are reported on stderr and turn
/// into exit code 1.
inline int run(int argc, const char* const* argv) {
    CLI::App app{"Causal structure discovery over overlapping datasets"};
    app.require_subcommand(1);
    Overrides o;
    auto search_flags = [&o](CLI::App* sub) {
        sub->add_option("--seed", o.seed, "Seed for every random choice");
        sub->add_option("--jobs", o.jobs, "Worker threads")->check(CLI::PositiveNumber);
        sub->add_option("--alpha", o.alpha, "Significance level of the CI tests");
        sub->add_option("--budget-seconds", o.budget_seconds, "Wall-clock limit of the search");
        sub->add_option("--mode", o.mode, "iod, iod-bcd or causal-iod");
        sub->add_option("--ci", o.ci, "kernel or oracle");
        sub->add_option("--bcd", o.bcd, "kcdc, oracle or none");
    };

    std::string config;
    std::string out;
    auto* disc = app.add_subcommand("discover", "Search for joint structures over the configured datasets");
    disc->add_option("--config", config, "Problem config JSON")->required();
    disc->add_option("--out", out, "Output directory")->required();
    search_flags(disc);

    auto* exp = app.add_subcommand("experiment", "Run an experiment config and write reports");
    exp->add_option("--config", config, "Experiment config JSON")->required();
    exp->add_option("--out", out, "Output directory")->required();
    search_flags(exp);

    std::string name;
    int n = 0;
    std::uint64_t seed = 0;
    int nodes = 6;
    int overlap = 2;
    double p_conf = 0.0;
    auto* syn = app.add_subcommand("synth", "Write generated datasets, truth graph and a discover config");
    syn->add_option("name", name, "synthetic1, synthetic2, sample_size or random")->required();
    syn->add_option("--n", n, "Rows per dataset")->required();
    syn->add_option("--seed", seed, "Generator seed");
    syn->add_option("--out", out, "Output directory")->required();
    syn->add_option("--nodes", nodes, "Observed nodes of a random graph");
    syn->add_option("--overlap", overlap, "Shared variables of a random graph");
    syn->add_option("--p-conf", p_conf, "Chance of a latent confounder per pair");

    std::string solutions;
    std::string truth;
    auto* ev = app.add_subcommand("eval", "Score a solution file against a truth graph");
    ev->add_option("--solutions", solutions, "Solution report or graph list")->required();
    ev->add_option("--truth", truth, "Truth MAG JSON")->required();

    std::string graph;
    std::string kind = "mag";
    auto* val = app.add_subcommand("validate-graph", "Check a graph file");
    val->add_option("graph", graph, "Graph JSON")->required();
    val->add_option("--kind", kind, "mag or pag");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? kExitOk : kExitError;
    }
    try {
        if (*disc) return discover(config, out, o);
        if (*exp) return experiment(config, out, o);
        if (*syn) return synth(name, n, seed, out, nodes, overlap, p_conf);
        if (*ev) return eval(solutions, truth);
        if (*val) return validate_graph(graph, kind);
    } catch (const std::exception& ex) {
        std::cerr << "error: " << ex.what() << "\n";
        return kExitError;
    }
    return kExitError;
}

}  // namespace overlap_causal::cli
