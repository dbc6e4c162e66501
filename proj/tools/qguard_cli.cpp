// Command-line front end: run experiments and generate topologies.
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "qguard/qguard.hpp"

namespace {

qguard::ExperimentConfig load_config(const std::string& path) {
    std::ifstream in{path};
    if (!in) throw std::invalid_argument("config: cannot open '" + path + "'");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::parse_error& e) {
        throw std::invalid_argument("config: '" + path + "' is not valid JSON: " + e.what());
    }
    return qguard::config_from_json(j);
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Purification-aware entanglement routing simulator"};
    app.require_subcommand(1);

    std::string config_path;
    std::string experiment;
    std::optional<std::uint64_t> seed;
    std::string out_path;
    bool trace = false;

    auto* sim = app.add_subcommand("simulate", "Run an experiment and write aggregate CSV");
    sim->add_option("--config", config_path, "JSON experiment config")->required();
    sim->add_option("--experiment", experiment, "threshold|heterogeneity|load|range-hops|range-distance|fp-compare");
    sim->add_option("--seed", seed, "Run a single seed instead of the configured list");
    sim->add_option("--out", out_path, "CSV output path (default: stdout)");
    sim->add_flag("--trace", trace, "Also write per-slot JSON lines (<out>.trace.jsonl, or stderr)");

    std::string topo_config;
    std::string topo_out;
    std::optional<std::uint64_t> topo_seed;
    auto* gen = app.add_subcommand("gen-topology", "Generate a calibrated Waxman topology as JSON");
    gen->add_option("--config", topo_config, "JSON experiment config")->required();
    gen->add_option("--out", topo_out, "Topology output path")->required();
    gen->add_option("--seed", topo_seed, "Seed (default: first configured seed)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*sim) {
            qguard::ExperimentConfig cfg = load_config(config_path);
            if (!experiment.empty()) cfg.experiment = qguard::parse_experiment(experiment);
            if (seed) cfg.seeds = {*seed};
            qguard::validate(cfg);
            const auto result = qguard::run_experiment(cfg, trace);
            if (out_path.empty()) {
                qguard::write_csv(std::cout, result.rows);
            } else {
                std::ofstream out{out_path};
                if (!out) throw std::runtime_error("cannot write '" + out_path + "'");
                qguard::write_csv(out, result.rows);
            }
            if (trace) {
                std::ofstream trace_file;
                if (!out_path.empty()) {
                    trace_file.open(out_path + ".trace.jsonl");
                    if (!trace_file) throw std::runtime_error("cannot write '" + out_path + ".trace.jsonl'");
                }
                std::ostream& sink = out_path.empty() ? std::cerr : trace_file;
                for (const auto& line : result.trace) sink << line << '\n';
            }
        } else if (*gen) {
            const qguard::ExperimentConfig cfg = load_config(topo_config);
            const auto g = qguard::build_topology(cfg, topo_seed.value_or(cfg.seeds.front()));
            qguard::write_topology(g, topo_out);
        }
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
