// Seeded multi-trial experiments: configuration, sweeps, range studies and
// CSV emission.
#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <map>
#include <mutex>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "qguard/slot_engine.hpp"
#include "qguard/topology.hpp"

namespace qguard {

struct SweepSpec {
    std::string param;
    std::vector<double> values;
};

enum class ExperimentKind { Threshold, Heterogeneity, Load, RangeHops, RangeDistance, FpCompare };

inline std::string_view experiment_name(ExperimentKind k) {
    switch (k) {
    case ExperimentKind::Threshold: return "threshold";
    case ExperimentKind::Heterogeneity: return "heterogeneity";
    case ExperimentKind::Load: return "load";
    case ExperimentKind::RangeHops: return "range-hops";
    case ExperimentKind::RangeDistance: return "range-distance";
    case ExperimentKind::FpCompare: return "fp-compare";
    }
    return "?";
}

inline ExperimentKind parse_experiment(std::string_view s) {
    for (auto k : {ExperimentKind::Threshold, ExperimentKind::Heterogeneity, ExperimentKind::Load,
                   ExperimentKind::RangeHops, ExperimentKind::RangeDistance, ExperimentKind::FpCompare}) {
        if (experiment_name(k) == s) return k;
    }
    throw std::invalid_argument("unknown experiment '" + std::string{s} + "'");
}

struct ExperimentConfig {
    int nodes = 100;
    double avg_degree = 6.0;
    double area_km = 100.0;
    double target_p = 0.7;
    double q = 0.9;
    int k = 3;
    int m = 10;
    double f_th = 0.75;
    double eta_mean = 9.5;
    double eta_sigma = 1.0;
    double gen_noise_sigma = 0.01;
    int r_max = 3;
    IntRange memory_range{20, 31};
    IntRange channel_range{6, 12};
    int slots = 1000;
    std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
    std::vector<Algorithm> algorithms{Algorithm::QCast, Algorithm::QCastPur, Algorithm::QGuard, Algorithm::QGuardWs};
    std::optional<SweepSpec> sweep;
    ExperimentKind experiment = ExperimentKind::Threshold;
    double waxman_gamma = 0.05;
    bool stochastic_e2e = true;
    double distance_bin_km = 10.0;
    int threads = 0;
};

inline const std::vector<std::string>& sweepable_params() {
    static const std::vector<std::string> names{"f_th",     "eta_sigma", "eta_mean", "m",     "q",
                                                "k",        "target_p",  "nodes",    "r_max", "avg_degree",
                                                "gen_noise_sigma"};
    return names;
}

inline void validate(const ExperimentConfig& c) {
    auto fail = [](const std::string& msg) { throw std::invalid_argument("config: " + msg); };
    if (c.nodes < 2) fail("nodes must be >= 2");
    if (!(c.avg_degree > 0.0)) fail("avg_degree must be positive");
    if (!(c.area_km > 0.0)) fail("area_km must be positive");
    if (!(c.target_p > 0.0 && c.target_p <= 1.0)) fail("target_p must be in (0, 1]");
    if (!(c.q > 0.0 && c.q <= 1.0)) fail("q must be in (0, 1]");
    if (c.k < 1) fail("k must be >= 1");
    if (c.m < 1) fail("m must be >= 1");
    if (!(c.f_th > 0.25 && c.f_th <= 1.0)) fail("f_th must be in (0.25, 1]");
    if (!(c.eta_mean > 0.0)) fail("eta_mean must be positive");
    if (c.eta_sigma < 0.0) fail("eta_sigma must be >= 0");
    if (c.gen_noise_sigma < 0.0) fail("gen_noise_sigma must be >= 0");
    if (c.r_max < 1) fail("r_max must be >= 1");
    if (c.memory_range.lo < 1 || c.memory_range.hi < c.memory_range.lo) fail("memory_range must be a nonempty range of positive values");
    if (c.channel_range.lo < 1 || c.channel_range.hi < c.channel_range.lo) fail("channel_range must be a nonempty range of positive values");
    if (c.slots < 0) fail("slots must be >= 0");
    if (c.seeds.empty()) fail("seeds must not be empty");
    if (c.algorithms.empty()) fail("algorithms must not be empty");
    if (!(c.waxman_gamma > 0.0)) fail("waxman_gamma must be positive");
    if (!(c.distance_bin_km > 0.0)) fail("distance_bin_km must be positive");
    if (c.sweep) {
        const auto& names = sweepable_params();
        if (std::find(names.begin(), names.end(), c.sweep->param) == names.end()) {
            fail("sweep.param '" + c.sweep->param + "' is not sweepable");
        }
        if (c.sweep->values.empty()) fail("sweep.values must not be empty");
    }
    const long long pairs = static_cast<long long>(c.nodes) * (c.nodes - 1) / 2;
    if (c.m > pairs) fail("m exceeds the number of distinct node pairs");
}

inline ExperimentConfig config_from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw std::invalid_argument("config: top level must be a JSON object");
    ExperimentConfig c;
    static const std::vector<std::string> known{
        "nodes", "avg_degree", "area_km", "target_p", "q", "k", "m", "f_th", "eta_mean", "eta_sigma",
        "gen_noise_sigma", "r_max", "memory_range", "channel_range", "slots", "seeds", "algorithms", "sweep",
        "experiment", "waxman_gamma", "stochastic_e2e", "distance_bin_km", "threads"};
    for (const auto& [key, _] : j.items()) {
        if (std::find(known.begin(), known.end(), key) == known.end()) {
            throw std::invalid_argument("config: unknown field '" + key + "'");
        }
    }
    try {
        auto num = [&](const char* key, auto& field) {
            if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
        };
        num("nodes", c.nodes);
        num("avg_degree", c.avg_degree);
        num("area_km", c.area_km);
        num("target_p", c.target_p);
        num("q", c.q);
        num("k", c.k);
        num("m", c.m);
        num("f_th", c.f_th);
        num("eta_mean", c.eta_mean);
        num("eta_sigma", c.eta_sigma);
        num("gen_noise_sigma", c.gen_noise_sigma);
        num("r_max", c.r_max);
        num("slots", c.slots);
        num("waxman_gamma", c.waxman_gamma);
        num("stochastic_e2e", c.stochastic_e2e);
        num("distance_bin_km", c.distance_bin_km);
        num("threads", c.threads);
        auto range = [&](const char* key, IntRange& r) {
            if (!j.contains(key)) return;
            const auto& a = j.at(key);
            if (!a.is_array() || a.size() != 2) throw std::invalid_argument(std::string{"config: "} + key + " must be [lo, hi]");
            r = IntRange{a[0].get<int>(), a[1].get<int>()};
        };
        range("memory_range", c.memory_range);
        range("channel_range", c.channel_range);
        if (j.contains("seeds")) c.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
        if (j.contains("algorithms")) {
            c.algorithms.clear();
            for (const auto& a : j.at("algorithms")) c.algorithms.push_back(parse_algorithm(a.get<std::string>()));
        }
        if (j.contains("experiment")) c.experiment = parse_experiment(j.at("experiment").get<std::string>());
        if (j.contains("sweep") && !j.at("sweep").is_null()) {
            const auto& s = j.at("sweep");
            c.sweep = SweepSpec{s.at("param").get<std::string>(), s.at("values").get<std::vector<double>>()};
        }
    } catch (const nlohmann::json::exception& e) {
        throw std::invalid_argument(std::string{"config: "} + e.what());
    }
    validate(c);
    return c;
}

inline nlohmann::json config_to_json(const ExperimentConfig& c) {
    nlohmann::json j{{"nodes", c.nodes},
                     {"avg_degree", c.avg_degree},
                     {"area_km", c.area_km},
                     {"target_p", c.target_p},
                     {"q", c.q},
                     {"k", c.k},
                     {"m", c.m},
                     {"f_th", c.f_th},
                     {"eta_mean", c.eta_mean},
                     {"eta_sigma", c.eta_sigma},
                     {"gen_noise_sigma", c.gen_noise_sigma},
                     {"r_max", c.r_max},
                     {"memory_range", {c.memory_range.lo, c.memory_range.hi}},
                     {"channel_range", {c.channel_range.lo, c.channel_range.hi}},
                     {"slots", c.slots},
                     {"seeds", c.seeds},
                     {"experiment", experiment_name(c.experiment)},
                     {"waxman_gamma", c.waxman_gamma},
                     {"stochastic_e2e", c.stochastic_e2e},
                     {"distance_bin_km", c.distance_bin_km},
                     {"threads", c.threads}};
    auto& algos = j["algorithms"] = nlohmann::json::array();
    for (auto a : c.algorithms) algos.push_back(algorithm_name(a));
    if (c.sweep) j["sweep"] = {{"param", c.sweep->param}, {"values", c.sweep->values}};
    return j;
}

inline ExperimentConfig with_param(ExperimentConfig c, const std::string& param, double v) {
    if (param == "f_th") c.f_th = v;
    else if (param == "eta_sigma") c.eta_sigma = v;
    else if (param == "eta_mean") c.eta_mean = v;
    else if (param == "m") c.m = static_cast<int>(std::lround(v));
    else if (param == "q") c.q = v;
    else if (param == "k") c.k = static_cast<int>(std::lround(v));
    else if (param == "target_p") c.target_p = v;
    else if (param == "nodes") c.nodes = static_cast<int>(std::lround(v));
    else if (param == "r_max") c.r_max = static_cast<int>(std::lround(v));
    else if (param == "avg_degree") c.avg_degree = v;
    else if (param == "gen_noise_sigma") c.gen_noise_sigma = v;
    else throw std::invalid_argument("config: '" + param + "' is not sweepable");
    return c;
}

inline bool is_range_experiment(ExperimentKind k) {
    return k == ExperimentKind::RangeHops || k == ExperimentKind::RangeDistance || k == ExperimentKind::FpCompare;
}

// The sweep an experiment runs when the config does not name one.
inline SweepSpec default_sweep(const ExperimentConfig& c) {
    switch (c.experiment) {
    case ExperimentKind::Threshold: return {"f_th", {0.60, 0.65, 0.70, 0.75, 0.80, 0.85, 0.90, 0.95}};
    case ExperimentKind::Heterogeneity: return {"eta_sigma", {0, 1, 2, 3, 4, 5}};
    case ExperimentKind::Load: return {"m", {1, 2, 3, 4, 5, 6, 7, 8, 9, 10}};
    default: return {"f_th", {c.f_th}};
    }
}

inline WaxmanParams waxman_params(const ExperimentConfig& c) {
    WaxmanParams p;
    p.nodes = c.nodes;
    p.avg_degree = c.avg_degree;
    p.area_km = c.area_km;
    p.eta_mean = c.eta_mean;
    p.eta_sigma = c.eta_sigma;
    p.memory = c.memory_range;
    p.channels = c.channel_range;
    p.gamma = c.waxman_gamma;
    return p;
}

inline SlotParams slot_params(const ExperimentConfig& c) {
    SlotParams p;
    p.k = c.k;
    p.q = c.q;
    p.cap = RoundsCap{c.r_max};
    p.gen_noise_sigma = c.gen_noise_sigma;
    p.stochastic_e2e = c.stochastic_e2e;
    return p;
}

// One topology per seed; link geometry does not depend on the eta draws.
inline NetworkGraph build_topology(const ExperimentConfig& c, std::uint64_t seed) {
    NetworkGraph g = generate_waxman(waxman_params(c), RandomStream{seed}.substream("topology"));
    calibrate_alpha(g, c.target_p);
    return g;
}

inline RandomStream slot_stream(std::uint64_t seed, int slot) {
    return RandomStream{seed}.substream("slot", static_cast<std::uint64_t>(slot));
}

inline std::vector<Request> slot_requests(const NetworkGraph& g, const ExperimentConfig& c, std::uint64_t seed,
                                          int slot) {
    RandomStream rng = RandomStream{seed}.substream("requests", static_cast<std::uint64_t>(slot));
    return sample_requests(g, c.m, Fidelity{c.f_th}, rng);
}

struct AggregateRow {
    std::string algorithm;
    std::string sweep_param;
    double sweep_value = 0.0;
    std::uint64_t seed = 0;
    double qualified_eps = 0.0;
    double raw_eps = 0.0;
    double qualified_sd_pairs = 0.0;
    std::string bin_kind;  // "", "hops" or "distance_km"
    double bin = 0.0;
    int slots = 0;
    double success_fraction = 0.0;
};

// Per-slot results of every algorithm, sharing path selection between
// algorithms that score paths the same way and sharing generation outcomes.
struct SlotRecord {
    int slot = 0;
    std::vector<Request> requests;
    std::vector<SlotMetrics> metrics;  // one per configured algorithm
};

inline SlotRecord simulate_slot(const NetworkGraph& g, const ExperimentConfig& c, std::uint64_t seed, int slot) {
    SlotRecord rec;
    rec.slot = slot;
    rec.requests = slot_requests(g, c, seed, slot);
    const SlotParams params = slot_params(c);
    const RandomStream stream = slot_stream(seed, slot);
    const ChannelDraws draws{g, SlotStreams{stream}.generation};
    std::map<ScorerKind, std::pair<PathPlan, LinkOutcomes>> phase2;
    for (Algorithm a : c.algorithms) {
        const AlgorithmConfig algo = algorithm_config(a);
        auto it = phase2.find(algo.scorer);
        if (it == phase2.end()) {
            PathPlan plan = select_paths(g, rec.requests, algo.scorer, params);
            LinkOutcomes outcomes = attempt_generation(plan.reservations, g, draws, params.gen_noise_sigma);
            it = phase2.emplace(algo.scorer, std::pair{std::move(plan), std::move(outcomes)}).first;
        }
        SlotStreams streams{stream};
        rec.metrics.push_back(complete_slot(g, rec.requests, algo, params, it->second.first, it->second.second,
                                            streams.purification, streams.swap));
    }
    return rec;
}

inline std::string trace_line(const ExperimentConfig& c, std::uint64_t seed, const std::string& param, double value,
                              const SlotRecord& rec) {
    nlohmann::json j;
    j["seed"] = seed;
    j["sweep_param"] = param;
    j["sweep_value"] = value;
    j["slot"] = rec.slot;
    auto& reqs = j["requests"] = nlohmann::json::array();
    for (const auto& r : rec.requests) reqs.push_back({r.source, r.destination});
    auto& algos = j["algorithms"] = nlohmann::json::object();
    for (std::size_t a = 0; a < c.algorithms.size(); ++a) {
        const auto& m = rec.metrics[a];
        nlohmann::json per = nlohmann::json::array();
        for (const auto& rm : m.requests) per.push_back({{"raw", rm.raw}, {"qualified", rm.qualified}});
        algos[std::string{algorithm_name(c.algorithms[a])}] = {
            {"raw", m.raw}, {"qualified", m.qualified}, {"served", m.served}, {"per_request", per}};
    }
    return j.dump();
}

struct TrialResult {
    std::vector<AggregateRow> rows;
    std::vector<std::string> trace;
};

inline TrialResult run_trial(const ExperimentConfig& base, const std::string& param, double value, std::uint64_t seed,
                             bool want_trace) {
    const ExperimentConfig c = with_param(base, param, value);
    validate(c);
    TrialResult out;
    if (c.slots == 0) return out;
    const NetworkGraph g = build_topology(c, seed);
    const std::size_t na = c.algorithms.size();

    const bool range = is_range_experiment(c.experiment);
    const bool by_distance = c.experiment == ExperimentKind::RangeDistance;
    struct Bin {
        int slots = 0;
        int successes = 0;
        double qualified = 0.0;
        double raw = 0.0;
    };
    std::vector<std::map<double, Bin>> bins(na);
    std::vector<double> qualified(na, 0.0), raw(na, 0.0), served(na, 0.0);

    for (int t = 0; t < c.slots; ++t) {
        const SlotRecord rec = simulate_slot(g, c, seed, t);
        if (want_trace) out.trace.push_back(trace_line(c, seed, param, value, rec));
        for (std::size_t a = 0; a < na; ++a) {
            const auto& m = rec.metrics[a];
            qualified[a] += m.qualified;
            raw[a] += m.raw;
            served[a] += m.served;
            if (range) {
                const auto& req = rec.requests.front();
                double key;
                if (by_distance) {
                    key = std::floor(g.euclidean_km(req.source, req.destination) / c.distance_bin_km) * c.distance_bin_km;
                } else {
                    key = g.hop_distances(req.source)[req.destination];
                }
                Bin& b = bins[a][key];
                ++b.slots;
                b.successes += m.requests.front().served ? 1 : 0;
                b.qualified += m.qualified;
                b.raw += m.raw;
            }
        }
    }

    for (std::size_t a = 0; a < na; ++a) {
        const std::string name{algorithm_name(c.algorithms[a])};
        if (!range) {
            AggregateRow row{name, param, value, seed, qualified[a] / c.slots, raw[a] / c.slots, served[a] / c.slots,
                             "", 0.0, c.slots, served[a] / (static_cast<double>(c.slots) * c.m)};
            out.rows.push_back(row);
            continue;
        }
        for (const auto& [key, b] : bins[a]) {
            AggregateRow row{name, param, value, seed, b.qualified / b.slots, b.raw / b.slots,
                             static_cast<double>(b.successes) / b.slots, by_distance ? "distance_km" : "hops", key,
                             b.slots, static_cast<double>(b.successes) / b.slots};
            out.rows.push_back(row);
        }
    }
    return out;
}

struct ExperimentOutput {
    std::vector<AggregateRow> rows;
    std::vector<std::string> trace;
};

// Adjusts a config for the chosen experiment: range studies use a single
// request per slot and fp-compare pits QGUARD against QGUARD_FP by hop count.
inline ExperimentConfig prepare(ExperimentConfig c) {
    if (is_range_experiment(c.experiment)) c.m = 1;
    if (c.experiment == ExperimentKind::FpCompare) c.algorithms = {Algorithm::QGuard, Algorithm::QGuardFp};
    validate(c);
    return c;
}

// Trials (sweep value x seed) run concurrently; rows come back ordered by
// sweep value, then algorithm, then seed, then bin.
inline ExperimentOutput run_experiment(const ExperimentConfig& raw_cfg, bool want_trace = false) {
    const ExperimentConfig c = prepare(raw_cfg);
    const SweepSpec sweep = c.sweep.value_or(default_sweep(c));
    struct Trial {
        std::size_t value_index;
        std::size_t seed_index;
    };
    std::vector<Trial> trials;
    for (std::size_t v = 0; v < sweep.values.size(); ++v) {
        for (std::size_t s = 0; s < c.seeds.size(); ++s) trials.push_back({v, s});
    }
    for (double v : sweep.values) validate(with_param(c, sweep.param, v));

    std::vector<TrialResult> results(trials.size());
    std::atomic<std::size_t> next{0};
    std::mutex error_mutex;
    std::exception_ptr error;
    auto worker = [&] {
        for (std::size_t i = next++; i < trials.size(); i = next++) {
            try {
                results[i] = run_trial(c, sweep.param, sweep.values[trials[i].value_index], c.seeds[trials[i].seed_index],
                                       want_trace);
            } catch (...) {
                std::lock_guard lock{error_mutex};
                if (!error) error = std::current_exception();
            }
        }
    };
    unsigned threads = c.threads > 0 ? static_cast<unsigned>(c.threads) : std::max(1u, std::thread::hardware_concurrency());
    threads = std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::size_t>(trials.size(), 1)));
    if (threads <= 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
    }
    if (error) std::rethrow_exception(error);

    ExperimentOutput out;
    for (std::size_t v = 0; v < sweep.values.size(); ++v) {
        for (std::size_t a = 0; a < c.algorithms.size(); ++a) {
            const std::string name{algorithm_name(c.algorithms[a])};
            for (std::size_t i = 0; i < trials.size(); ++i) {
                if (trials[i].value_index != v) continue;
                for (const auto& row : results[i].rows) {
                    if (row.algorithm == name) out.rows.push_back(row);
                }
            }
        }
    }
    for (auto& r : results) {
        for (auto& line : r.trace) out.trace.push_back(std::move(line));
    }
    return out;
}

// Range study: a single random pair per slot, success fraction per bin.
inline std::vector<AggregateRow> run_range_study(ExperimentConfig c, bool by_distance) {
    c.experiment = by_distance ? ExperimentKind::RangeDistance : ExperimentKind::RangeHops;
    return run_experiment(c).rows;
}

inline std::string csv_header() {
    return "algorithm,sweep_param,sweep_value,seed,qualified_eps,raw_eps,qualified_sd_pairs,bin_kind,bin,slots,"
           "success_fraction";
}

inline std::string format_number(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

inline void write_csv(std::ostream& out, const std::vector<AggregateRow>& rows) {
    out << csv_header() << '\n';
    for (const auto& r : rows) {
        out << r.algorithm << ',' << r.sweep_param << ',' << format_number(r.sweep_value) << ',' << r.seed << ','
            << format_number(r.qualified_eps) << ',' << format_number(r.raw_eps) << ','
            << format_number(r.qualified_sd_pairs) << ',' << r.bin_kind << ','
            << (r.bin_kind.empty() ? std::string{} : format_number(r.bin)) << ',' << r.slots << ','
            << format_number(r.success_fraction) << '\n';
    }
}

inline std::string to_csv(const std::vector<AggregateRow>& rows) {
    std::ostringstream out;
    write_csv(out, rows);
    return out.str();
}

} // namespace qguard
