#pragma once

#include <fstream>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "overlap_causal/errors.hpp"
#include "overlap_causal/graph.hpp"

namespace overlap_causal {

inline Mark mark_from_string(const std::string& s) {
    if (s == "tail") return Mark::Tail;
    if (s == "arrow") return Mark::Arrow;
    if (s == "circle") return Mark::Circle;
    throw FormatError("unknown edge mark '" + s + "'");
}

inline nlohmann::json graph_to_json(const MixedGraph& g) {
    nlohmann::json j;
    j["nodes"] = g.labels();
    j["edges"] = nlohmann::json::array();
    for (const Edge& e : g.edges()) {
        j["edges"].push_back({{"a", g.label(e.a)},
                              {"b", g.label(e.b)},
                              {"mark_a", to_string(e.mark_a)},
                              {"mark_b", to_string(e.mark_b)}});
    }
    return j;
}

inline MixedGraph graph_from_json(const nlohmann::json& j) {
    try {
        MixedGraph g(j.at("nodes").get<std::vector<std::string>>());
        for (const auto& e : j.at("edges")) {
            const Node a = g.index(e.at("a").get<std::string>());
            const Node b = g.index(e.at("b").get<std::string>());
            if (g.adjacent(a, b)) {
                throw FormatError("duplicate edge " + g.label(a) + " - " + g.label(b));
            }
            g.set_edge(a, b, mark_from_string(e.at("mark_a").get<std::string>()),
                       mark_from_string(e.at("mark_b").get<std::string>()));
        }
        return g;
    } catch (const nlohmann::json::exception& ex) {
        throw FormatError(std::string("malformed graph JSON: ") + ex.what());
    } catch (const LookupError& ex) {
        throw FormatError(std::string("malformed graph JSON: ") + ex.what());
    } catch (const PreconditionError& ex) {
        throw FormatError(std::string("malformed graph JSON: ") + ex.what());
    }
}

inline nlohmann::json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open '" + path + "'");
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& ex) {
        throw FormatError("'" + path + "': " + ex.what());
    }
}

inline MixedGraph read_graph_file(const std::string& path) {
    return graph_from_json(read_json_file(path));
}

/// DOT digraph; circle marks become `odot` arrowheads.
inline std::string graph_to_dot(const MixedGraph& g, const std::string& name = "G") {
    auto head = [](Mark m) {
        switch (m) {
            case Mark::Arrow: return "normal";
            case Mark::Circle: return "odot";
            default: return "none";
        }
    };
    std::ostringstream out;
    out << "digraph \"" << name << "\" {\n";
    for (const auto& l : g.labels()) out << "  \"" << l << "\";\n";
    for (const Edge& e : g.edges()) {
        out << "  \"" << g.label(e.a) << "\" -> \"" << g.label(e.b) << "\"";
        if (e.mark_a == Mark::Tail && e.mark_b == Mark::Arrow) {
            out << ";\n";
        } else if (e.mark_a == Mark::Arrow && e.mark_b == Mark::Arrow) {
            out << " [dir=both];\n";
        } else {
            out << " [dir=both, arrowhead=" << head(e.mark_b) << ", arrowtail=" << head(e.mark_a)
                << "];\n";
        }
    }
    out << "}\n";
    return out.str();
}

}  // namespace overlap_causal
