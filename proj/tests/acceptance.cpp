// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
// exits non-zero when any criterion fails. Pass criterion numbers as
// arguments to run a subset.

#include <chrono>
#include <cmath>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include "overlap_causal/criteria.hpp"
#include "overlap_causal/experiments.hpp"
#include "overlap_causal/graph_io.hpp"
#include "overlap_causal/independence.hpp"
#include "overlap_causal/orientation.hpp"
#include "test_support.hpp"

using namespace overlap_causal;

namespace {

// Pinned targets and tolerances.
constexpr std::size_t kSyn1Counts[3] = {63, 8, 1};
constexpr double kSyn1IodPrecision = 0.34;
constexpr double kSyn1IodRecall = 0.53;
constexpr double kRoundingTolerance = 0.01;
constexpr int kDataSeedsRequired = 8;
constexpr std::size_t kSyn2ImmoralitiesIod = 29;
constexpr std::size_t kSyn2ImmoralitiesCausal = 8;
constexpr double kSyn2IodBudgetSeconds = 600.0;
constexpr double kSmallSamplePrecisionFloor = 0.68;
constexpr int kHsicRepetitions = 500;
constexpr int kHsicSamples = 200;
constexpr double kHsicRejectLow = 0.03;
constexpr double kHsicRejectHigh = 0.08;
constexpr double kFisherTolerance = 1e-12;

struct Outcome {
    bool pass = true;
    std::ostringstream detail;

    void require(bool ok, const std::string& what) {
        if (!ok) {
            pass = false;
            detail << "[miss] " << what << "; ";
        }
    }
    template <typename T>
    Outcome& note(const T& v) {
        detail << v;
        return *this;
    }
};

std::string config_path(const std::string& name) {
    return std::string(OVERLAP_CAUSAL_SOURCE_DIR) + "/configs/experiments/" + name + ".json";
}

ExperimentConfig load_config(const std::string& name) {
    return experiment_config_from_json(read_json_file(config_path(name)));
}

IodResult oracle_run(const Fixture& f, IodMode mode, Part2Options p2 = {}) {
    PipelineOptions opt;
    opt.part2 = p2;
    return run_pipeline(make_overlap_problem(f.truth, f.splits), mode, opt);
}

bool contains(const std::vector<Mag>& mags, const Mag& g) {
    return std::find(mags.begin(), mags.end(), g) != mags.end();
}

std::string fixed(double v, int digits = 2) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(digits) << v;
    return os.str();
}

// 1. The five canonical structures and the criteria table.
void table_rows(Outcome& out) {
    auto profile_row = [](BivariateStructure s) {
        for (const auto& [row, bits] : kCriteria) {
            if (row == s) return CriterionProfile{bits};
        }
        return CriterionProfile{};
    };
    const std::map<BivariateStructure, std::string> expected_bits{
        {BivariateStructure::DirectedAB, "TFFT"},       {BivariateStructure::DirectedBA, "FTTF"},
        {BivariateStructure::CommonCause, "TFTF"},      {BivariateStructure::DirectedCommonAB, "TFFF"},
        {BivariateStructure::DirectedCommonBA, "FFTF"},
    };
    std::set<std::string> distinct;
    for (const auto& [s, bits] : expected_bits) {
        out.require(profile_row(s).str() == bits, std::string("table row ") + to_string(s));
        distinct.insert(bits);
    }
    out.require(distinct.size() == 5 && !distinct.count("TTTT"), "rows mutually exclusive");

    MixedGraph a({"X", "Y"});
    a.add_directed("X", "Y");
    MixedGraph b({"X", "Y"});
    b.add_directed("Y", "X");
    MixedGraph c({"X", "Y"});
    c.add_bidirected("X", "Y");
    MixedGraph d({"W", "X", "Y"});
    d.add_directed("X", "Y");
    d.add_bidirected("X", "W");
    d.add_directed("W", "Y");
    MixedGraph e({"W", "X", "Y"});
    e.add_directed("Y", "X");
    e.add_bidirected("Y", "W");
    e.add_directed("W", "X");
    const std::vector<std::pair<MixedGraph, BivariateStructure>> cases{
        {a, BivariateStructure::DirectedAB},       {b, BivariateStructure::DirectedBA},
        {c, BivariateStructure::CommonCause},      {d, BivariateStructure::DirectedCommonAB},
        {e, BivariateStructure::DirectedCommonBA},
    };
    for (const auto& [g, s] : cases) {
        const CriterionProfile p = criterion_profile(g, g.index("X"), g.index("Y"));
        out.note(to_string(s)).note('=').note(p.str()).note(' ');
        out.require(classify_pair(g, "X", "Y") == s, std::string("classify ") + to_string(s));
        out.require(p.str() == expected_bits.at(s), std::string("profile ") + to_string(s));
    }
    MixedGraph none({"X", "Y"});
    out.require(classify_pair(none, "X", "Y") == BivariateStructure::Independent, "edgeless pair");

    // Worked example: the path Y -> X -> Z survives removing Y's incoming edges.
    MixedGraph f({"X", "Y", "Z"});
    f.add_directed("Y", "X");
    f.add_directed("X", "Z");
    f.add_bidirected("Y", "Z");
    const MixedGraph cut = mutilate(f, f.index("Y"), MutilationMode::RemoveIncoming);
    MixedGraph expected_cut({"X", "Y", "Z"});
    expected_cut.add_directed("Y", "X");
    expected_cut.add_directed("X", "Z");
    out.require(cut == expected_cut, "worked example mutilation");
    out.require(!m_separated(cut, cut.index("Y"), cut.index("Z"), NodeSet{}), "worked example active path");
    out.require(classify_pair(f, "Y", "Z") != BivariateStructure::CommonCause, "worked example (Y, Z)");
    out.require(classify_pair(f, "Y", "X") == BivariateStructure::DirectedAB, "worked example (Y, X)");
}

// 2. The motivating example.
void motivating(Outcome& out) {
    const Fixture f = motivating_fixture();
    const IodResult iod = oracle_run(f, IodMode::Iod);
    const IodResult causal = oracle_run(f, IodMode::CausalIod);
    CausalStore expected;
    expected.add("Y", "X", BivariateStructure::DirectedAB);
    expected.add("Y", "Z", BivariateStructure::CommonCause);
    out.require(store_to_json(causal.store) == store_to_json(expected), "store {directed (Y,X), common {Y,Z}}");
    const Node x = f.truth.index("X");
    const Node z = f.truth.index("Z");
    auto x_z_directed = [&](const Mag& m) { return m.is_directed(x, z) || m.is_directed(z, x); };
    const auto cm = causal.solutions.mags();
    const auto im = iod.solutions.mags();
    out.require(contains(cm, f.truth), "causal-iod contains the true structure");
    out.require(std::none_of(cm.begin(), cm.end(), x_z_directed), "causal-iod has no X->Z or Z->X");
    out.require(std::any_of(im.begin(), im.end(), x_z_directed), "iod has an X->Z or Z->X MAG");
    out.note("iod ").note(im.size()).note(" MAGs, causal-iod ").note(cm.size()).note(" MAGs");

    // Store checks on the three worked graphs.
    MixedGraph xz = f.truth;
    xz.add_directed("X", "Z");
    MixedGraph zx = f.truth;
    zx.add_directed("Z", "X");
    out.require(consistent_mag(f.truth, expected), "true structure consistent");
    out.require(!consistent_mag(xz, expected), "X->Z rejected");
    out.require(!consistent_mag(zx, expected), "Z->X rejected");
}

// 3. First synthetic problem under oracles.
void synthetic1_oracle(Outcome& out) {
    const Fixture f = synthetic1_fixture();
    const IodMode modes[3] = {IodMode::Iod, IodMode::IodBcd, IodMode::CausalIod};
    Metrics m[3];
    for (int i = 0; i < 3; ++i) {
        const IodResult r = oracle_run(f, modes[i]);
        m[i] = precision_recall(r.solutions.mags(), f.truth);
        out.note(to_string(modes[i])).note(' ').note(m[i].mag_count).note(" (P ").note(fixed(m[i].precision));
        out.note(" R ").note(fixed(m[i].recall)).note(") ");
        out.require(m[i].mag_count == kSyn1Counts[i], std::string(to_string(modes[i])) + " count " +
                                                           std::to_string(m[i].mag_count) + " vs " +
                                                           std::to_string(kSyn1Counts[i]));
    }
    out.require(m[2].precision == 1.0 && m[2].recall == 1.0, "causal-iod P=R=1");
    out.require(std::abs(m[0].precision - kSyn1IodPrecision) <= kRoundingTolerance, "iod precision 0.34");
    out.require(std::abs(m[0].recall - kSyn1IodRecall) <= kRoundingTolerance, "iod recall 0.53");
}

// 4. First synthetic problem from data.
void synthetic1_data(Outcome& out) {
    const ExperimentConfig c = load_config("synthetic1_data");
    const ExperimentReport r = run_experiment(c);
    const Mag truth = synthetic1_fixture().truth;
    int exact = 0;
    for (const auto& i : r.instances) {
        if (i.mode != IodMode::CausalIod) continue;
        const bool hit = i.metrics.mag_count == 1 && i.contains_truth;
        exact += hit ? 1 : 0;
        out.note(i.seed).note(hit ? ":ok " : ":miss ");
    }
    out.note("| ").note(exact).note("/").note(c.seeds.size()).note(" seeds exact");
    out.require(exact >= kDataSeedsRequired, "at least 8 of 10 seeds");
}

// 5. Second synthetic problem under oracles.
void synthetic2_oracle(Outcome& out) {
    const Fixture f = synthetic2_fixture();
    Part2Options budget;
    budget.budget_seconds = kSyn2IodBudgetSeconds;
    const auto start = std::chrono::steady_clock::now();
    const IodResult iod = oracle_run(f, IodMode::Iod, budget);
    const double iod_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const IodResult bcd = oracle_run(f, IodMode::IodBcd);
    const IodResult causal = oracle_run(f, IodMode::CausalIod);
    const auto mags = causal.solutions.mags();
    const Metrics m = precision_recall(mags, f.truth);
    out.note("iod ").note(iod.complete ? std::to_string(iod.solutions.total_mags()) : std::string("-"));
    out.note(" in ").note(fixed(iod_seconds, 1)).note("s, iod-bcd ").note(bcd.solutions.total_mags());
    out.note(", causal-iod ").note(m.mag_count).note(" (P ").note(fixed(m.precision)).note(" R ");
    out.note(fixed(m.recall)).note("), immorality candidates ").note(iod.stats.immorality_candidates);
    out.note(" vs ").note(causal.stats.immorality_candidates).note("; ");
    out.require(mags.size() == 1 && mags.front() == f.truth, "causal-iod is exactly the truth");
    out.require(contains(mags, f.truth), "causal-iod contains the truth");
    out.require(iod.stats.immorality_candidates == kSyn2ImmoralitiesIod, "29 candidate immoralities without BCD");
    out.require(causal.stats.immorality_candidates == kSyn2ImmoralitiesCausal, "8 candidate immoralities with BCD");
    out.require(!iod.complete, "iod intractable within 600 s");
}

// 6. Overlap sweep on random graphs.
void overlap_sweep(Outcome& out) {
    const ExperimentConfig c = load_config("overlap_sweep");
    const ExperimentReport r = run_experiment(c);
    // (group, seed) -> mode -> instance
    std::map<std::pair<std::string, std::uint64_t>, std::map<IodMode, const InstanceResult*>> by;
    for (const auto& i : r.instances) by[{i.group, i.seed}][i.mode] = &i;

    int ordered = 0;
    int proven_by_bound = 0;
    int undetermined = 0;
    bool truth_everywhere = true;
    bool sound_everywhere = true;
    bool bcd_complete = true;
    for (const auto& [key, modes] : by) {
        const InstanceResult* iod = modes.at(IodMode::Iod);
        const InstanceResult* bcd = modes.at(IodMode::IodBcd);
        const InstanceResult* causal = modes.at(IodMode::CausalIod);
        if (!bcd->complete || !causal->complete) {
            bcd_complete = false;
            continue;
        }
        truth_everywhere = truth_everywhere && causal->contains_truth;
        sound_everywhere = sound_everywhere && causal->sound;
        const bool lower = causal->metrics.mag_count <= bcd->metrics.mag_count;
        // A stopped search holds a subset of the full output, so its count is a lower bound.
        const bool upper = bcd->metrics.mag_count <= iod->metrics.mag_count;
        if (lower && upper) {
            ++ordered;
            if (!iod->complete) ++proven_by_bound;
        } else if (lower && !iod->complete) {
            ++undetermined;
        }
    }
    out.require(bcd_complete, "iod-bcd and causal-iod complete on every instance");
    out.note("ordering ").note(ordered).note("/").note(by.size()).note(" (").note(proven_by_bound);
    out.note(" via partial iod counts, ").note(undetermined).note(" undetermined); ");
    out.require(ordered == static_cast<int>(by.size()), "(a) per-instance ordering");

    // Means over every instance of a group; a stopped run contributes its partial count.
    auto mean_of = [&](const std::string& group, IodMode mode) {
        double sum = 0.0;
        std::size_t n = 0;
        for (const auto& inst : r.instances) {
            if (inst.group == group && inst.mode == mode) {
                sum += static_cast<double>(inst.metrics.mag_count);
                ++n;
            }
        }
        return n ? sum / static_cast<double>(n) : 0.0;
    };
    for (IodMode mode : c.modes) {
        std::vector<const ReportRow*> rows;
        for (const auto& row : r.rows) {
            if (row.mode == mode) rows.push_back(&row);
        }
        out.note(to_string(mode)).note(':');
        bool decreasing = true;
        for (std::size_t i = 0; i < rows.size(); ++i) {
            const double mean = mean_of(rows[i]->group, mode);
            out.note(' ').note(rows[i]->overlap).note('=');
            out.note(rows[i]->intractable ? ">=" + fixed(mean, 1) : fixed(mean, 1));
            // A lower bound on the earlier mean settles the comparison only when the later mean is exact.
            if (i > 0 && (rows[i]->intractable > 0 || !(mean_of(rows[i - 1]->group, mode) > mean))) decreasing = false;
        }
        out.note("; ");
        out.require(decreasing, std::string("(b) mean count decreases with overlap for ") + to_string(mode));
    }
    out.require(truth_everywhere, "(c) truth in every causal-iod output");
    out.require(sound_everywhere, "(d) every causal-iod MAG matches the store");
}

// 7. Sample-size study.
void sample_size(Outcome& out) {
    const ExperimentConfig c = load_config("sample_size");
    const ExperimentReport r = run_experiment(c);
    for (const auto& row : r.rows) {
        if (row.mode != IodMode::CausalIod) continue;
        out.note(row.group).note(": ").note(fixed(row.mag_count, 1)).note(" MAG, P ").note(fixed(row.precision));
        out.note(" R ").note(fixed(row.recall)).note("; ");
        if (row.group == "n=200") {
            out.require(row.intractable == 0 && row.precision >= kSmallSamplePrecisionFloor, "n=200 P >= 0.68");
        } else {
            out.require(row.intractable == 0 && row.mag_count == 1.0 && row.precision == 1.0 && row.recall == 1.0,
                        row.group + " single exact MAG");
        }
    }
}

// 8. Graph calculus against first-principles oracles.
void graph_properties(Outcome& out) {
    std::mt19937_64 rng(2024);
    int msep = 0;
    for (int rep = 0; rep < 200; ++rep) {
        const int n = 2 + static_cast<int>(rng() % 5);
        const MixedGraph g = test_support::random_mixed(rng, n, 0.35, 0.2);
        for (Node x = 0; x < n; ++x) {
            for (Node y = x + 1; y < n; ++y) {
                const NodeSet rest = g.nodes() - NodeSet{x, y};
                for (std::uint64_t bits = 0; bits < (std::uint64_t{1} << n); ++bits) {
                    const NodeSet z(bits);
                    if (!z.is_subset_of(rest)) continue;
                    ++msep;
                    if (m_separated(g, x, y, z) != test_support::msep_by_paths(g, x, y, z)) {
                        out.require(false, "m-separation rep " + std::to_string(rep));
                        return;
                    }
                }
            }
        }
    }
    out.note("m-separation ").note(msep).note(" queries; ");

    int inducing = 0;
    for (int rep = 0; rep < 600; ++rep) {
        const int n = 3 + static_cast<int>(rng() % 4);
        const MixedGraph g = test_support::random_mixed(rng, n, 0.35, 0.15);
        if (!is_ancestral(g)) continue;
        const NodeSet hidden(rng() & g.nodes().bits());
        for (Node x = 0; x < n; ++x) {
            for (Node y = x + 1; y < n; ++y) {
                if (hidden.contains(x) || hidden.contains(y)) continue;
                const NodeSet observed = g.nodes() - hidden - NodeSet{x, y};
                ++inducing;
                if (has_inducing_path(g, x, y, hidden) != !test_support::separable_within(g, x, y, observed)) {
                    out.require(false, "inducing path rep " + std::to_string(rep));
                    return;
                }
            }
        }
    }
    out.note("inducing paths ").note(inducing).note("; ");

    int marg = 0;
    for (int rep = 0; rep < 150; ++rep) {
        const int n = 3 + static_cast<int>(rng() % 4);
        MixedGraph g = test_support::random_dag(rng, n, 0.4);
        const NodeSet keep(rng() & g.nodes().bits());
        if (keep.size() < 2) continue;
        const Mag m = marginalize(g, keep);
        const std::vector<Node> kept = keep.to_vector();
        bool ok = test_support::is_mag_oracle(m);
        for (std::size_t i = 0; ok && i < kept.size(); ++i) {
            for (std::size_t j = i + 1; ok && j < kept.size(); ++j) {
                const NodeSet rest = m.nodes() - NodeSet{static_cast<Node>(i), static_cast<Node>(j)};
                for (std::uint64_t bits = 0; ok && bits < (std::uint64_t{1} << kept.size()); ++bits) {
                    const NodeSet s(bits);
                    if (!s.is_subset_of(rest)) continue;
                    NodeSet full;
                    for (Node v : s) full.insert(kept[static_cast<std::size_t>(v)]);
                    ++marg;
                    ok = m_separated(m, static_cast<Node>(i), static_cast<Node>(j), s) ==
                         m_separated(g, kept[i], kept[j], full);
                }
            }
        }
        if (!ok) {
            out.require(false, "marginalization rep " + std::to_string(rep));
            return;
        }
    }
    out.note("marginal separations ").note(marg).note("; ");

    const std::vector<MixedGraph> all4 = test_support::all_mags(4);
    std::vector<std::vector<bool>> prints;
    for (const auto& g : all4) prints.push_back(test_support::fingerprint(g));
    int equivalence = 0;
    for (std::size_t i = 0; i < all4.size(); ++i) {
        for (std::size_t j = i; j < all4.size(); ++j) {
            ++equivalence;
            if (markov_equivalent(all4[i], all4[j]) != (prints[i] == prints[j])) {
                out.require(false, "markov equivalence " + all4[i].key() + " / " + all4[j].key());
                return;
            }
        }
    }
    // Five nodes: a random MAG against one edge made bidirected, and against an unrelated MAG.
    for (int rep = 0; rep < 300; ++rep) {
        const MixedGraph g = test_support::random_mag(rng, 5, 0.4, 0.2);
        std::vector<MixedGraph> others{test_support::random_mag(rng, 5, 0.4, 0.2)};
        const auto edges = g.edges();
        if (!edges.empty()) {
            MixedGraph h = g;
            const Edge& e = edges[rng() % edges.size()];
            h.set_edge(e.a, e.b, Mark::Arrow, Mark::Arrow);
            if (test_support::is_mag_oracle(h)) others.push_back(h);
        }
        for (const auto& h : others) {
            ++equivalence;
            if (markov_equivalent(g, h) != (test_support::fingerprint(g) == test_support::fingerprint(h))) {
                out.require(false, "markov equivalence " + g.key() + " / " + h.key());
                return;
            }
        }
    }
    out.note("equivalence pairs ").note(equivalence).note("; ");

    std::map<std::vector<bool>, std::vector<Mag>> classes;
    for (std::size_t i = 0; i < all4.size(); ++i) classes[prints[i]].push_back(all4[i]);
    int pags = 0;
    for (const auto& [print, members] : classes) {
        const Pag p = mag_to_pag(members.front());
        std::vector<std::pair<Node, Node>> slots;
        for (const Edge& e : p.edges()) {
            if (e.mark_a == Mark::Circle) slots.emplace_back(e.a, e.b);
            if (e.mark_b == Mark::Circle) slots.emplace_back(e.b, e.a);
        }
        std::vector<Mag> expected;
        for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << slots.size()); ++mask) {
            Mag candidate = p;
            for (std::size_t i = 0; i < slots.size(); ++i) {
                candidate.set_mark(slots[i].first, slots[i].second, (mask >> i & 1U) ? Mark::Arrow : Mark::Tail);
            }
            if (test_support::is_mag_oracle(candidate) && test_support::fingerprint(candidate) == print) {
                expected.push_back(candidate);
            }
        }
        std::vector<Mag> got = enumerate_mags(p);
        std::sort(got.begin(), got.end());
        std::sort(expected.begin(), expected.end());
        ++pags;
        if (got != expected) {
            out.require(false, "enumerate_mags on " + p.key());
            return;
        }
    }
    out.note("four-node PAGs ").note(pags);
}

// 9. Calibration of the marginal test and the p-value pooling.
void calibration(Outcome& out) {
    std::mt19937_64 rng(9);
    std::normal_distribution<double> normal;
    std::exponential_distribution<double> expo(1.0);
    int rejected = 0;
    for (int rep = 0; rep < kHsicRepetitions; ++rep) {
        Eigen::VectorXd x(kHsicSamples);
        Eigen::VectorXd y(kHsicSamples);
        for (int i = 0; i < kHsicSamples; ++i) {
            x(i) = normal(rng);
            y(i) = expo(rng);
        }
        if (!hsic_test(x, y, 0.05).independent) ++rejected;
    }
    const double rate = static_cast<double>(rejected) / kHsicRepetitions;
    out.note("HSIC rejection rate ").note(fixed(rate, 3)).note(" over ").note(kHsicRepetitions).note(" reps; ");
    out.require(rate >= kHsicRejectLow && rate <= kHsicRejectHigh, "rejection rate in [0.03, 0.08]");
    double worst = 0.0;
    for (double p = 1e-12; p <= 1.0; p *= 1.3) worst = std::max(worst, std::abs(fisher_pool({p}) - p));
    worst = std::max(worst, std::abs(fisher_pool({1.0}) - 1.0));
    out.note("fisher_pool max deviation ").note(worst);
    out.require(worst <= kFisherTolerance, "fisher_pool fixed point");
}

}  // namespace

int main(int argc, char** argv) {
    const std::vector<std::pair<std::string, std::function<void(Outcome&)>>> criteria{
        {"criteria table", table_rows},
        {"motivating example", motivating},
        {"first synthetic, oracle", synthetic1_oracle},
        {"first synthetic, data", synthetic1_data},
        {"second synthetic, oracle", synthetic2_oracle},
        {"overlap sweep", overlap_sweep},
        {"sample size", sample_size},
        {"graph properties", graph_properties},
        {"calibration", calibration},
    };
    std::set<int> selected;
    for (int i = 1; i < argc; ++i) selected.insert(std::stoi(argv[i]));
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const int number = static_cast<int>(i) + 1;
        if (!selected.empty() && !selected.count(number)) continue;
        Outcome out;
        const auto start = std::chrono::steady_clock::now();
        try {
            criteria[i].second(out);
        } catch (const std::exception& ex) {
            out.pass = false;
            out.detail << "[error] " << ex.what();
        }
        const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        failed += out.pass ? 0 : 1;
        std::cout << "CRITERION " << number << " " << (out.pass ? "PASS" : "FAIL") << " (" << criteria[i].first
                  << ", " << fixed(seconds, 1) << "s): " << out.detail.str() << std::endl;
    }
    return failed == 0 ? 0 : 1;
}
