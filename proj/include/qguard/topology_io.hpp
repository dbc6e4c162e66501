// JSON topology files. Derived link fields (p_gen, f0_mean) are not stored;
// they are recomputed from alpha and eta on load.
#pragma once

#include <fstream>
#include <stdexcept>
#include <string>

#include <nlohmann/json.hpp>

#include "qguard/topology.hpp"

namespace qguard {

inline nlohmann::json topology_to_json(const NetworkGraph& g) {
    nlohmann::json doc;
    doc["alpha"] = g.alpha();
    auto& nodes = doc["nodes"] = nlohmann::json::array();
    for (const auto& n : g.nodes()) {
        nodes.push_back({{"id", n.id}, {"x_km", n.x_km}, {"y_km", n.y_km}, {"memory", n.memory_qubits}});
    }
    auto& links = doc["links"] = nlohmann::json::array();
    for (const auto& l : g.links()) {
        links.push_back(
            {{"u", l.u}, {"v", l.v}, {"length_km", l.length_km}, {"channels", l.channels}, {"eta", l.eta}});
    }
    return doc;
}

inline NetworkGraph topology_from_json(const nlohmann::json& doc) {
    try {
        std::vector<Node> nodes;
        for (const auto& jn : doc.at("nodes")) {
            nodes.push_back(Node{jn.at("id").get<int>(), jn.at("x_km").get<double>(), jn.at("y_km").get<double>(),
                                 jn.at("memory").get<int>()});
        }
        std::sort(nodes.begin(), nodes.end(), [](const Node& a, const Node& b) { return a.id < b.id; });
        std::vector<Link> links;
        for (const auto& jl : doc.at("links")) {
            Link l;
            l.u = jl.at("u").get<int>();
            l.v = jl.at("v").get<int>();
            l.length_km = jl.at("length_km").get<double>();
            l.channels = jl.at("channels").get<int>();
            l.eta = jl.at("eta").get<double>();
            links.push_back(l);
        }
        return NetworkGraph{std::move(nodes), std::move(links), doc.at("alpha").get<double>()};
    } catch (const nlohmann::json::exception& e) {
        throw std::invalid_argument(std::string{"topology: malformed document: "} + e.what());
    }
}

inline void write_topology(const NetworkGraph& g, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path + " for writing");
    out << topology_to_json(g).dump(2) << '\n';
}

inline NetworkGraph read_topology(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    return topology_from_json(nlohmann::json::parse(in));
}

} // namespace qguard
