#pragma once

#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"
#include "mmlearn/evaluation.hpp"
#include "mmlearn/graph.hpp"
#include "mmlearn/pattern.hpp"
#include "mmlearn/purification.hpp"
#include "mmlearn/replication.hpp"
#include "mmlearn/simulation.hpp"
#include "mmlearn/stats.hpp"

namespace mmlearn::io {

using json = nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// CSV

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream ss(line);
    while (std::getline(ss, cell, ',')) {
        auto b = cell.find_first_not_of(" \t\r\"");
        auto e = cell.find_last_not_of(" \t\r\"");
        out.push_back(b == std::string::npos ? std::string{} : cell.substr(b, e - b + 1));
    }
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

inline double parse_number(const std::string& s, std::size_t row, std::size_t col) {
    try {
        std::size_t used = 0;
        double v = std::stod(s, &used);
        if (used != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw std::invalid_argument("CSV row " + std::to_string(row) + ", column " + std::to_string(col + 1) +
                                    ": '" + s + "' is not a number");
    }
}

/// Header of labels followed by numeric rows of the same width.
inline std::pair<std::vector<std::string>, std::vector<std::vector<double>>> read_table(std::istream& in) {
    std::string line;
    std::vector<std::string> header;
    while (std::getline(in, line))
        if (line.find_first_not_of(" \t\r") != std::string::npos) {
            header = split_csv_line(line);
            break;
        }
    if (header.empty()) throw std::invalid_argument("CSV input is empty");
    std::vector<std::vector<double>> rows;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        auto cells = split_csv_line(line);
        if (cells.size() != header.size())
            throw std::invalid_argument("CSV row " + std::to_string(lineno) + " has " + std::to_string(cells.size()) +
                                        " fields, expected " + std::to_string(header.size()));
        std::vector<double> row;
        for (std::size_t c = 0; c < cells.size(); ++c) row.push_back(parse_number(cells[c], lineno, c));
        rows.push_back(std::move(row));
    }
    return {header, rows};
}

inline std::ifstream open_in(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::invalid_argument("cannot open '" + path + "'");
    return f;
}

inline std::ofstream open_out(const std::string& path) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot write '" + path + "'");
    return f;
}

}  // namespace detail

inline Dataset read_dataset_csv(std::istream& in) {
    auto [header, rows] = detail::read_table(in);
    Dataset d{header, Eigen::MatrixXd(rows.size(), header.size())};
    for (std::size_t r = 0; r < rows.size(); ++r)
        for (std::size_t c = 0; c < header.size(); ++c) d.values(r, c) = rows[r][c];
    return d;
}

inline Dataset read_dataset_csv(const std::string& path) {
    auto f = detail::open_in(path);
    return read_dataset_csv(f);
}

inline void write_dataset_csv(std::ostream& out, const Dataset& d) {
    for (std::size_t c = 0; c < d.labels.size(); ++c) out << (c ? "," : "") << d.labels[c];
    out << "\n" << std::setprecision(std::numeric_limits<double>::max_digits10);
    for (Eigen::Index r = 0; r < d.values.rows(); ++r) {
        for (Eigen::Index c = 0; c < d.values.cols(); ++c) out << (c ? "," : "") << d.values(r, c);
        out << "\n";
    }
}

/// Square covariance matrix with a header row of labels.
inline MomentCache read_covariance_csv(std::istream& in, std::size_t n_samples) {
    auto [header, rows] = detail::read_table(in);
    if (rows.size() != header.size())
        throw std::invalid_argument("covariance CSV must have as many rows as labels");
    Eigen::MatrixXd cov(header.size(), header.size());
    for (std::size_t r = 0; r < rows.size(); ++r)
        for (std::size_t c = 0; c < header.size(); ++c) cov(r, c) = rows[r][c];
    return MomentCache(header, cov, n_samples);
}

inline MomentCache read_covariance_csv(const std::string& path, std::size_t n_samples) {
    auto f = detail::open_in(path);
    return read_covariance_csv(f, n_samples);
}

// ---------------------------------------------------------------------------
// JSON

inline json read_json(const std::string& path) {
    auto f = detail::open_in(path);
    try {
        return json::parse(f);
    } catch (const json::exception& e) {
        throw std::invalid_argument("'" + path + "' is not valid JSON: " + e.what());
    }
}

inline void write_json(const std::string& path, const json& j) {
    auto f = detail::open_out(path);
    f << j.dump(2) << "\n";
}

namespace detail {
template <class T>
T field(const json& j, const char* key) {
    if (!j.is_object() || !j.contains(key)) throw std::invalid_argument(std::string("JSON is missing '") + key + "'");
    try {
        return j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw std::invalid_argument(std::string("JSON field '") + key + "': " + e.what());
    }
}
template <class T>
T field_or(const json& j, const char* key, T fallback) {
    return j.contains(key) ? field<T>(j, key) : fallback;
}
}  // namespace detail

inline json to_json(const LatentVariableGraph& g) {
    return json{{"latents", g.latents()},
                {"observed", g.observed()},
                {"errors", g.errors()},
                {"latent_edges", g.latent_edges()},
                {"measurement_edges", g.measurement_edges()},
                {"error_edges", g.error_edges()}};
}

inline LatentVariableGraph graph_from_json(const json& j) {
    using V = std::vector<std::string>;
    using E = std::vector<Edge>;
    return LatentVariableGraph(detail::field<V>(j, "latents"), detail::field<V>(j, "observed"),
                               detail::field_or<V>(j, "errors", {}), detail::field_or<E>(j, "latent_edges", {}),
                               detail::field<E>(j, "measurement_edges"), detail::field_or<E>(j, "error_edges", {}));
}

inline json to_json(const LinearParameters& p) {
    json coef = json::array();
    for (const auto& [e, v] : p.coefficients) coef.push_back({e.first, e.second, v});
    json var = json::object();
    for (const auto& [k, v] : p.variances) var[k] = v;
    return json{{"coefficients", coef}, {"variances", var}};
}

inline LinearParameters params_from_json(const json& j) {
    LinearParameters p;
    for (const auto& c : detail::field<json>(j, "coefficients")) {
        if (!c.is_array() || c.size() != 3) throw std::invalid_argument("coefficient entries are [from, to, value]");
        p.coefficients[{c[0].get<std::string>(), c[1].get<std::string>()}] = c[2].get<double>();
    }
    const auto variances = detail::field<json>(j, "variances");
    for (const auto& [k, v] : variances.items()) p.variances[k] = v.get<double>();
    return p;
}

inline json to_json(const PureMeasurementModel& m) {
    json clusters = json::object();
    for (const auto& [l, c] : m.clusters) clusters[l] = c;
    return json{{"clusters", clusters}};
}

inline PureMeasurementModel model_from_json(const json& j) {
    PureMeasurementModel m;
    const auto clusters = detail::field<json>(j, "clusters");
    for (const auto& [l, c] : clusters.items())
        m.clusters[l] = c.get<std::set<std::string>>();
    return m;
}

inline json to_json(const GroundTruth& gt) {
    json models = json::array();
    for (const auto& m : gt.true_pure_models) models.push_back(to_json(m));
    return json{{"graph", to_json(gt.graph)}, {"params", to_json(gt.params)}, {"true_pure_models", models}};
}

/// Accepts either a ground-truth document or a bare graph.
inline GroundTruth truth_from_json(const json& j) {
    if (!j.contains("graph")) {
        auto g = graph_from_json(j);
        return GroundTruth{g, {}, reference_purifications(g)};
    }
    GroundTruth gt{graph_from_json(j.at("graph")), {}, {}};
    if (j.contains("params")) gt.params = params_from_json(j.at("params"));
    if (j.contains("true_pure_models"))
        for (const auto& m : j.at("true_pure_models")) gt.true_pure_models.push_back(model_from_json(m));
    if (gt.true_pure_models.empty()) gt.true_pure_models = reference_purifications(gt.graph);
    return gt;
}

inline json to_json(const MeasurementPattern& p) {
    json clusters = json::object();
    for (const auto& l : p.latents) clusters[l] = p.cluster(l);
    return json{{"latents", p.latents},         {"clusters", clusters}, {"impurity_edges", p.impurity_edges},
                {"latent_links", p.latent_links}, {"retained", p.retained}, {"dropped", p.dropped}};
}

inline MeasurementPattern pattern_from_json(const json& j) {
    MeasurementPattern p;
    p.latents = detail::field<std::vector<std::string>>(j, "latents");
    const auto clusters = detail::field<json>(j, "clusters");
    for (const auto& l : p.latents) {
        if (!clusters.contains(l)) throw std::invalid_argument("pattern has no cluster for latent '" + l + "'");
        p.clusters[l] = clusters.at(l).get<std::vector<std::string>>();
    }
    p.impurity_edges = detail::field_or<std::vector<LabelPair>>(j, "impurity_edges", {});
    p.latent_links = detail::field_or<std::vector<LabelPair>>(j, "latent_links", {});
    p.retained = detail::field_or<std::vector<std::string>>(j, "retained", {});
    p.dropped = detail::field_or<std::vector<std::string>>(j, "dropped", {});
    if (p.retained.empty()) {
        std::set<std::string> seen;
        for (const auto& l : p.latents)
            for (const auto& o : p.clusters[l])
                if (seen.insert(o).second) p.retained.push_back(o);
    }
    return p;
}

inline json to_json(const PurificationResult& r) {
    json arr = json::array();
    for (const auto& s : r.solutions) {
        auto j = to_json(s.model);
        j["latent_clique"] = s.latent_clique;
        arr.push_back(j);
    }
    return arr;
}

/// A models file (array) or a single model object.
inline std::vector<PureMeasurementModel> models_from_json(const json& j) {
    std::vector<PureMeasurementModel> out;
    if (j.is_array())
        for (const auto& m : j) out.push_back(model_from_json(m));
    else
        out.push_back(model_from_json(j));
    return out;
}

inline json to_json(const EvaluationReport& r) {
    json map = json::object();
    for (const auto& [k, v] : r.match.latent_map) map[k] = v ? json(*v) : json(nullptr);
    return json{{"missing_latents", r.missing_latents},
                {"missing_indicators", r.missing_indicators},
                {"misplaced_indicators", r.misplaced_indicators},
                {"impurities", r.impurities},
                {"latent_map", map},
                {"ties", r.match.ties},
                {"reference_index", r.reference_index},
                {"reference_candidates", r.reference_candidates},
                {"flags", r.flags}};
}

inline json to_json(const StudyTable& t) {
    const auto& c = t.config;
    json metrics = json::object();
    for (const auto& m : t.metric_order) metrics[m] = {{"mean", t.metrics.at(m).mean}, {"sd", t.metrics.at(m).sd}};
    json trials = json::array();
    for (const auto& tr : t.trials) {
        json j{{"trial", tr.trial}};
        if (tr.report)
            j["report"] = to_json(*tr.report);
        else
            j["error"] = tr.error;
        trials.push_back(j);
    }
    return json{{"config",
                 {{"n_latents", c.n_latents},
                  {"indicators_per_latent", c.indicators_per_latent},
                  {"sample_size", c.sample_size},
                  {"avg_latent_degree", c.avg_latent_degree},
                  {"impurities",
                   {{"correlated_errors", c.impurities.correlated_errors},
                    {"observed_edges", c.impurities.observed_edges},
                    {"cross_loadings", c.impurities.cross_loadings}}},
                  {"nonlinear", c.nonlinear},
                  {"trials", c.trials},
                  {"seed", c.seed},
                  {"test", to_string(t.run.significance.test_kind)},
                  {"alpha", t.run.significance.alpha},
                  {"link_on_uncorrelated", t.run.link_on_uncorrelated},
                  {"min_children", t.run.min_children}}},
                {"metrics", metrics},
                {"completed", t.trials.size() - t.aborted},
                {"aborted", t.aborted},
                {"ties", t.ties},
                {"failed", t.failed},
                {"trials", trials}};
}

}  // namespace mmlearn::io
