#pragma once

// Suite manifest parsing and validation. The manifest is a JSON document:
//
//   {
//     "ladder": [ { "size_label": "150M", "non_embedding_params": ..., ... } ],
//     "recipes": ["c4", "dclm", ...],
//     "seeds": ["default", "rerun-2", "rerun-3"],
//     "target": { "size": "1B", "tasks": ["synthetic"], "metric": "accuracy" },
//     "early_stop_fraction": 0.25,
//     "token_parameter_ratio": 100,      // optional, enforced within 5%
//     "ground_truth": { ... }            // optional extension (see synthetic.hpp)
//   }

#include <cmath>
#include <set>
#include <string>

#include <json.hpp>

#include "rankcast/common.hpp"
#include "rankcast/types.hpp"

namespace rankcast {

struct ParsedManifest {
    SuiteManifest manifest;
    nlohmann::json ground_truth; // null when the extension section is absent
};

namespace detail {

inline const nlohmann::json& require_field(const nlohmann::json& obj, const char* name,
                                           const std::string& where) {
    auto it = obj.find(name);
    if (it == obj.end()) throw parse_error(where + ": missing field '" + name + "'");
    return *it;
}

inline std::int64_t int_field(const nlohmann::json& obj, const char* name,
                              const std::string& where) {
    const auto& v = require_field(obj, name, where);
    if (!v.is_number()) throw parse_error(where + "." + name + ": expected a number");
    // accept 1.1768e9-style literals as long as they are integral
    double d = v.get<double>();
    double r = std::nearbyint(d);
    if (!std::isfinite(d) || std::fabs(d - r) > 1e-6 * std::max(1.0, std::fabs(d))) {
        throw parse_error(where + "." + name + ": expected an integer count");
    }
    if (std::fabs(r) > 9.0e18)
        throw parse_error(where + "." + name + ": count out of range");
    return static_cast<std::int64_t>(r);
}

inline double num_field(const nlohmann::json& obj, const char* name, const std::string& where) {
    const auto& v = require_field(obj, name, where);
    if (!v.is_number()) throw parse_error(where + "." + name + ": expected a number");
    return v.get<double>();
}

inline std::string str_field(const nlohmann::json& obj, const char* name,
                             const std::string& where) {
    const auto& v = require_field(obj, name, where);
    if (!v.is_string()) throw parse_error(where + "." + name + ": expected a string");
    return v.get<std::string>();
}

} // namespace detail

inline void validate_manifest(const SuiteManifest& m) {
    if (m.ladder.empty()) throw validation_error("manifest: ladder must not be empty");
    std::set<std::string> labels;
    for (const auto& cfg : m.ladder) {
        const std::string where = "ladder entry '" + cfg.size_label + "'";
        if (!labels.insert(cfg.size_label).second)
            throw validation_error(where + ": duplicate size label");
        if (cfg.non_embedding_params <= 0)
            throw validation_error(where + ": non_embedding_params must be > 0");
        if (cfg.tokens_trained <= 0)
            throw validation_error(where + ": tokens_trained must be > 0");
        if (cfg.train_steps <= 0)
            throw validation_error(where + ": train_steps must be > 0");
        if (cfg.batch_size <= 0 || cfg.hidden_dim <= 0 || cfg.n_heads <= 0 || cfg.n_layers <= 0)
            throw validation_error(where + ": architecture fields must be > 0");
        if (!(cfg.learning_rate > 0.0))
            throw validation_error(where + ": learning_rate must be > 0");
        if (m.token_parameter_ratio > 0.0) {
            double actual = static_cast<double>(cfg.tokens_trained) /
                            static_cast<double>(cfg.non_embedding_params);
            if (std::fabs(actual / m.token_parameter_ratio - 1.0) > 0.05) {
                throw validation_error(where + ": tokens_trained is inconsistent with declared "
                                               "token-parameter ratio " +
                                       format_double(m.token_parameter_ratio) +
                                       " (actual ratio " + format_double(actual) +
                                       ", tolerance 5%)");
            }
        }
    }
    for (std::size_t i = 1; i < m.ladder.size(); ++i) {
        if (m.ladder[i].non_embedding_params <= m.ladder[i - 1].non_embedding_params) {
            throw validation_error("manifest: ladder must be strictly increasing in "
                                   "non_embedding_params ('" +
                                   m.ladder[i - 1].size_label + "' >= '" +
                                   m.ladder[i].size_label + "')");
        }
    }
    if (m.recipes.empty()) throw validation_error("manifest: recipes must not be empty");
    if (std::set<std::string>(m.recipes.begin(), m.recipes.end()).size() != m.recipes.size())
        throw validation_error("manifest: duplicate recipe id");
    if (m.seeds.empty()) throw validation_error("manifest: at least one seed is required");
    if (std::set<std::string>(m.seeds.begin(), m.seeds.end()).size() != m.seeds.size())
        throw validation_error("manifest: duplicate seed id");
    if (!m.find_size(m.target.size_label))
        throw validation_error("manifest: target size '" + m.target.size_label +
                               "' is not in the ladder");
    if (m.target.tasks.empty())
        throw validation_error("manifest: target.tasks must not be empty");
    if (m.target.metric.empty())
        throw validation_error("manifest: target.metric must not be empty");
    if (!(m.early_stop_fraction > 0.0) || m.early_stop_fraction > 1.0)
        throw validation_error("manifest: early_stop_fraction must be in (0, 1]");
}

inline ParsedManifest parse_manifest(const std::string& text) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw parse_error(std::string("manifest: ") + e.what());
    }
    if (!doc.is_object()) throw parse_error("manifest: top level must be an object");

    ParsedManifest out;
    SuiteManifest& m = out.manifest;

    const auto& ladder = detail::require_field(doc, "ladder", "manifest");
    if (!ladder.is_array()) throw parse_error("manifest.ladder: expected an array");
    for (std::size_t i = 0; i < ladder.size(); ++i) {
        const auto& e = ladder[i];
        const std::string where = "manifest.ladder[" + std::to_string(i) + "]";
        if (!e.is_object()) throw parse_error(where + ": expected an object");
        ModelConfig cfg;
        cfg.size_label = detail::str_field(e, "size_label", where);
        cfg.non_embedding_params = detail::int_field(e, "non_embedding_params", where);
        cfg.tokens_trained = detail::int_field(e, "tokens_trained", where);
        cfg.train_steps = detail::int_field(e, "train_steps", where);
        cfg.batch_size = detail::int_field(e, "batch_size", where);
        cfg.hidden_dim = detail::int_field(e, "hidden_dim", where);
        cfg.n_heads = detail::int_field(e, "n_heads", where);
        cfg.n_layers = detail::int_field(e, "n_layers", where);
        cfg.learning_rate = detail::num_field(e, "learning_rate", where);
        m.ladder.push_back(std::move(cfg));
    }

    const auto& recipes = detail::require_field(doc, "recipes", "manifest");
    if (!recipes.is_array()) throw parse_error("manifest.recipes: expected an array");
    for (const auto& r : recipes) {
        if (!r.is_string()) throw parse_error("manifest.recipes: expected strings");
        m.recipes.push_back(r.get<std::string>());
    }

    const auto& seeds = detail::require_field(doc, "seeds", "manifest");
    if (!seeds.is_array()) throw parse_error("manifest.seeds: expected an array");
    for (const auto& s : seeds) {
        if (!s.is_string()) throw parse_error("manifest.seeds: expected strings");
        m.seeds.push_back(s.get<std::string>());
    }

    const auto& target = detail::require_field(doc, "target", "manifest");
    if (!target.is_object()) throw parse_error("manifest.target: expected an object");
    m.target.size_label = detail::str_field(target, "size", "manifest.target");
    m.target.metric = detail::str_field(target, "metric", "manifest.target");
    const auto& tasks = detail::require_field(target, "tasks", "manifest.target");
    if (!tasks.is_array()) throw parse_error("manifest.target.tasks: expected an array");
    for (const auto& t : tasks) {
        if (!t.is_string()) throw parse_error("manifest.target.tasks: expected strings");
        m.target.tasks.push_back(t.get<std::string>());
    }

    if (doc.contains("early_stop_fraction"))
        m.early_stop_fraction = detail::num_field(doc, "early_stop_fraction", "manifest");
    if (doc.contains("token_parameter_ratio"))
        m.token_parameter_ratio = detail::num_field(doc, "token_parameter_ratio", "manifest");
    if (doc.contains("ground_truth")) out.ground_truth = doc["ground_truth"];

    validate_manifest(m);
    return out;
}

inline std::string write_manifest(const SuiteManifest& m,
                                  const nlohmann::json& ground_truth = {}) {
    nlohmann::json doc;
    doc["ladder"] = nlohmann::json::array();
    for (const auto& cfg : m.ladder) {
        nlohmann::json e;
        e["size_label"] = cfg.size_label;
        e["non_embedding_params"] = cfg.non_embedding_params;
        e["tokens_trained"] = cfg.tokens_trained;
        e["train_steps"] = cfg.train_steps;
        e["batch_size"] = cfg.batch_size;
        e["hidden_dim"] = cfg.hidden_dim;
        e["n_heads"] = cfg.n_heads;
        e["n_layers"] = cfg.n_layers;
        e["learning_rate"] = cfg.learning_rate;
        doc["ladder"].push_back(std::move(e));
    }
    doc["recipes"] = m.recipes;
    doc["seeds"] = m.seeds;
    doc["target"] = {{"size", m.target.size_label},
                     {"tasks", m.target.tasks},
                     {"metric", m.target.metric}};
    doc["early_stop_fraction"] = m.early_stop_fraction;
    if (m.token_parameter_ratio > 0.0) doc["token_parameter_ratio"] = m.token_parameter_ratio;
    if (!ground_truth.is_null()) doc["ground_truth"] = ground_truth;
    return doc.dump(2) + "\n";
}

} // namespace rankcast
