#pragma once

#include <fstream>
#include <optional>
#include <ostream>
#include <string>

#include <json.hpp>

#include <maxent/ebe.hpp>
#include <maxent/multi_index.hpp>
#include <maxent/problem.hpp>
#include <maxent/quadrature.hpp>

namespace maxent {

using nlohmann::json;

inline json to_json(const BasisSet& b) {
    json idx = json::array();
    for (const auto& mi : b.indices) idx.push_back(mi.exponents);
    return {{"dimension", b.dimension}, {"max_order", b.max_order}, {"indices", idx}};
}

inline BasisSet basis_from_json(const json& j) {
    BasisSet b;
    b.dimension = j.at("dimension").get<int>();
    b.max_order = j.at("max_order").get<int>();
    for (const auto& e : j.at("indices"))
        b.indices.push_back(MultiIndex{e.get<std::vector<int>>()});
    return b;
}

// How to rebuild a quadrature rule; rules themselves are never serialized.
struct QuadSpec {
    QuadKind kind = QuadKind::sparse;
    int level = 0;  // sparse level, or nodes per axis for uniform grids

    QuadratureRule build(int dimension) const {
        return kind == QuadKind::sparse ? smolyak_sparse_grid(dimension, level)
                                        : uniform_grid(dimension, level);
    }
};

inline json to_json(const QuadSpec& q) {
    return {{"kind", q.kind == QuadKind::sparse ? "sparse" : "uniform"}, {"level", q.level}};
}

inline QuadSpec quad_spec_from_json(const json& j) {
    QuadSpec q;
    std::string kind = j.at("kind").get<std::string>();
    if (kind == "sparse")
        q.kind = QuadKind::sparse;
    else if (kind == "uniform")
        q.kind = QuadKind::uniform;
    else
        throw NumericalError("unknown quadrature kind: " + kind);
    q.level = j.at("level").get<int>();
    return q;
}

inline json to_json(const AffineRescale& r) { return {{"lo", r.lo}, {"hi", r.hi}}; }

inline AffineRescale rescale_from_json(const json& j) {
    AffineRescale r;
    r.lo = j.at("lo").get<std::vector<double>>();
    r.hi = j.at("hi").get<std::vector<double>>();
    return r;
}

inline json problem_to_json(const BasisSet& b, const Eigen::VectorXd& targets, const QuadSpec& q,
                            const std::optional<AffineRescale>& rescale = std::nullopt) {
    json j{{"basis", to_json(b)},
           {"targets", std::vector<double>(targets.begin(), targets.end())},
           {"quad", to_json(q)}};
    if (rescale) j["rescale"] = to_json(*rescale);
    return j;
}

inline MomentProblem problem_from_json(const json& j) {
    BasisSet b = basis_from_json(j.at("basis"));
    auto tv = j.at("targets").get<std::vector<double>>();
    Eigen::VectorXd targets =
        Eigen::Map<const Eigen::VectorXd>(tv.data(), static_cast<Eigen::Index>(tv.size()));
    QuadSpec q = quad_spec_from_json(j.at("quad"));
    std::optional<AffineRescale> rescale;
    if (j.contains("rescale")) rescale = rescale_from_json(j.at("rescale"));
    QuadratureRule rule = q.build(b.dimension);
    return MomentProblem(std::move(b), std::move(targets), std::move(rule), std::move(rescale));
}

inline json to_json(const SolveReport& rep) {
    json discarded = json::array();
    for (const auto& d : rep.discarded)
        discarded.push_back({{"index", d.index}, {"reason", d.reason}});
    return {{"lambda", std::vector<double>(rep.lambda.begin(), rep.lambda.end())},
            {"z", rep.z},
            {"retained", rep.retained},
            {"discarded", discarded},
            {"final_moment_error", rep.final_moment_error},
            {"total_inner_iterations", rep.total_inner_iterations},
            {"wall_seconds", rep.wall_seconds},
            {"all_retained", rep.all_retained}};
}

// One JSON object per line; lambda lengths vary as constraints activate.
inline void write_trace_jsonl(std::ostream& os, const std::vector<TraceRecord>& trace) {
    for (const auto& t : trace) {
        json j{{"outer", t.outer},
               {"inner", t.inner},
               {"lambda", std::vector<double>(t.lambda.begin(), t.lambda.end())},
               {"residual", t.residual_i},
               {"working_tol", t.working_tol}};
        os << j.dump() << '\n';
    }
}

struct RunManifest {
    std::string subcommand;
    std::vector<std::string> inputs;
    std::vector<std::string> outputs;
    json config;
    std::uint64_t seed = 0;
    std::string timestamp;
};

inline json to_json(const RunManifest& m) {
    return {{"subcommand", m.subcommand}, {"inputs", m.inputs},   {"outputs", m.outputs},
            {"config", m.config},         {"seed", m.seed},       {"timestamp", m.timestamp},
            {"version", "0.1.0"}};
}

inline void write_json_file(const std::string& path, const json& j) {
    std::ofstream os(path);
    if (!os) throw NumericalError("cannot write file: " + path);
    os << j.dump(2) << '\n';
}

inline json read_json_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw NumericalError("cannot read file: " + path);
    return json::parse(is);
}

}  // namespace maxent
