#pragma once

// Persistence of evaluation records and aggregated metric points, plus the
// grid coverage report.
//
// Item records are line-delimited JSON (one record per line, append-friendly):
//   {"recipe":"c4","size":"150M","seed":"default","step":100,"tokens_seen":4096,
//    "task":"arc_easy","item":"q1",
//    "choices":[{"logprob":-12.5,"tokens":7,"chars":30,"correct":true}, ...]}
//
// Metric points are a CSV table with header:
//   recipe,size,seed,step,tokens_seen,task,metric,value
// Values are rendered shortest-round-trip so read(write(x)) == x exactly.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "rankcast/common.hpp"
#include "rankcast/manifest.hpp"
#include "rankcast/types.hpp"

namespace rankcast {

// ---------------------------------------------------------------------------
// Item score records (JSONL)
// ---------------------------------------------------------------------------

inline void validate_item_record(const ItemScoreRecord& rec, const std::string& where) {
    if (rec.choices.size() < 2)
        throw validation_error(where + ": item '" + rec.item + "' needs at least 2 choices");
    int n_correct = 0;
    for (const auto& c : rec.choices) {
        if (c.is_correct) ++n_correct;
        if (c.logprob_sum > 0.0)
            throw validation_error(where + ": item '" + rec.item +
                                   "' has a positive log-probability");
        if (c.n_tokens < 1 || c.n_chars < 1)
            throw validation_error(where + ": item '" + rec.item +
                                   "' has a nonpositive choice length");
    }
    if (n_correct != 1)
        throw validation_error(where + ": item '" + rec.item + "' has " +
                               std::to_string(n_correct) + " correct choices, expected 1");
    if (rec.key.step < 0 || rec.key.tokens_seen < 0)
        throw validation_error(where + ": item '" + rec.item + "' has a negative step count");
}

inline ItemScoreRecord parse_item_record_line(const std::string& line, std::size_t line_no) {
    const std::string where = "records line " + std::to_string(line_no);
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
        throw parse_error(where + ": " + e.what());
    }
    if (!doc.is_object()) throw parse_error(where + ": expected an object");

    ItemScoreRecord rec;
    rec.key.recipe = detail::str_field(doc, "recipe", where);
    rec.key.size_label = detail::str_field(doc, "size", where);
    rec.key.seed = detail::str_field(doc, "seed", where);
    rec.key.step = detail::int_field(doc, "step", where);
    rec.key.tokens_seen = detail::int_field(doc, "tokens_seen", where);
    rec.task = detail::str_field(doc, "task", where);
    rec.item = detail::str_field(doc, "item", where);

    const auto& choices = detail::require_field(doc, "choices", where);
    if (!choices.is_array()) throw parse_error(where + ".choices: expected an array");
    for (std::size_t i = 0; i < choices.size(); ++i) {
        const auto& c = choices[i];
        const std::string cwhere = where + ".choices[" + std::to_string(i) + "]";
        if (!c.is_object()) throw parse_error(cwhere + ": expected an object");
        ChoiceScore cs;
        cs.logprob_sum = detail::num_field(c, "logprob", cwhere);
        cs.n_tokens = detail::int_field(c, "tokens", cwhere);
        cs.n_chars = detail::int_field(c, "chars", cwhere);
        const auto& corr = detail::require_field(c, "correct", cwhere);
        if (!corr.is_boolean()) throw parse_error(cwhere + ".correct: expected a boolean");
        cs.is_correct = corr.get<bool>();
        rec.choices.push_back(cs);
    }
    validate_item_record(rec, where);
    return rec;
}

// Input order is preserved.
inline std::vector<ItemScoreRecord> parse_item_records(std::istream& in) {
    std::vector<ItemScoreRecord> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        out.push_back(parse_item_record_line(line, line_no));
    }
    return out;
}

inline std::vector<ItemScoreRecord> parse_item_records(const std::string& text) {
    std::istringstream in(text);
    return parse_item_records(in);
}

inline std::string write_item_record_line(const ItemScoreRecord& rec) {
    nlohmann::json doc;
    doc["recipe"] = rec.key.recipe;
    doc["size"] = rec.key.size_label;
    doc["seed"] = rec.key.seed;
    doc["step"] = rec.key.step;
    doc["tokens_seen"] = rec.key.tokens_seen;
    doc["task"] = rec.task;
    doc["item"] = rec.item;
    auto choices = nlohmann::json::array();
    for (const auto& c : rec.choices) {
        choices.push_back({{"logprob", c.logprob_sum},
                           {"tokens", c.n_tokens},
                           {"chars", c.n_chars},
                           {"correct", c.is_correct}});
    }
    doc["choices"] = std::move(choices);
    return doc.dump();
}

inline void write_item_records(std::ostream& out, const std::vector<ItemScoreRecord>& recs) {
    for (const auto& rec : recs) out << write_item_record_line(rec) << '\n';
}

// ---------------------------------------------------------------------------
// Metric point table (CSV)
// ---------------------------------------------------------------------------

inline constexpr const char* kMetricPointHeader =
    "recipe,size,seed,step,tokens_seen,task,metric,value";

inline void write_metric_points(std::ostream& out, const std::vector<MetricPoint>& points) {
    out << kMetricPointHeader << '\n';
    for (const auto& p : points) {
        out << csv_join({p.key.recipe, p.key.size_label, p.key.seed,
                         std::to_string(p.key.step), std::to_string(p.key.tokens_seen), p.task,
                         p.metric, format_double(p.value)})
            << '\n';
    }
}

inline std::string write_metric_points(const std::vector<MetricPoint>& points) {
    std::ostringstream out;
    write_metric_points(out, points);
    return out.str();
}

inline std::vector<MetricPoint> read_metric_points(std::istream& in) {
    std::vector<MetricPoint> out;
    std::string line;
    std::size_t line_no = 0;
    if (!std::getline(in, line)) throw parse_error("metric table: empty document");
    ++line_no;
    // step determines tokens_seen within a run, so uniqueness is checked on
    // (recipe,size,seed,step,task,metric)
    std::map<std::tuple<std::string, std::string, std::string, std::int64_t, std::string,
                        std::string>,
             std::size_t>
        seen;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        auto fields = csv_split(line, line_no);
        if (fields.size() != 8)
            throw parse_error("metric table line " + std::to_string(line_no) + ": expected 8 " +
                              "columns, got " + std::to_string(fields.size()));
        const std::string where = "metric table line " + std::to_string(line_no);
        MetricPoint p;
        p.key.recipe = fields[0];
        p.key.size_label = fields[1];
        p.key.seed = fields[2];
        p.key.step = parse_int(fields[3], where + " step");
        p.key.tokens_seen = parse_int(fields[4], where + " tokens_seen");
        p.task = fields[5];
        p.metric = fields[6];
        p.value = parse_double(fields[7], where + " value");
        if (!std::isfinite(p.value))
            throw validation_error(where + ": value must be finite");
        auto key = std::make_tuple(p.key.recipe, p.key.size_label, p.key.seed, p.key.step, p.task,
                                   p.metric);
        auto [it, inserted] = seen.emplace(key, line_no);
        if (!inserted) {
            throw validation_error("metric table line " + std::to_string(line_no) +
                                   ": duplicate point (" + p.key.recipe + "," +
                                   p.key.size_label + "," + p.key.seed + "," +
                                   std::to_string(p.key.step) + "," + p.task + "," + p.metric +
                                   ") first seen on line " + std::to_string(it->second));
        }
        out.push_back(std::move(p));
    }
    return out;
}

inline std::vector<MetricPoint> read_metric_points(const std::string& text) {
    std::istringstream in(text);
    return read_metric_points(in);
}

// ---------------------------------------------------------------------------
// Coverage report
// ---------------------------------------------------------------------------

enum class CellStatus { complete, early_stop_consistent, incomplete, absent, overrun };

inline const char* to_string(CellStatus s) {
    switch (s) {
        case CellStatus::complete: return "complete";
        case CellStatus::early_stop_consistent: return "early-stop-consistent";
        case CellStatus::incomplete: return "incomplete";
        case CellStatus::absent: return "absent";
        case CellStatus::overrun: return "overrun";
    }
    return "?";
}

struct CoverageCell {
    std::string recipe;
    std::string size_label;
    std::string seed;
    std::int64_t max_step = 0;
    std::int64_t train_steps = 0;
    std::int64_t n_checkpoints = 0;
    double fraction = 0.0; // max_step / train_steps
    CellStatus status = CellStatus::absent;
};

struct CoverageReport {
    std::vector<CoverageCell> cells;          // manifest grid order
    std::vector<CheckpointKey> unlisted_keys; // keys outside the declared grid
    std::int64_t n_flagged = 0;               // cells that are not complete/early-stop
};

// Reporting only: early-terminated non-default seeds are expected by the
// suite design, so they are flagged consistent rather than erroring.
inline CoverageReport coverage_report_from_keys(std::vector<CheckpointKey> keys,
                                                const SuiteManifest& manifest) {
    std::sort(keys.begin(), keys.end());
    keys.erase(std::unique(keys.begin(), keys.end()), keys.end());

    struct RunStat {
        std::int64_t max_step = 0;
        std::int64_t max_tokens = 0;
        std::int64_t n_checkpoints = 0;
    };
    std::map<std::tuple<std::string, std::string, std::string>, RunStat> runs;
    CoverageReport report;
    for (const auto& k : keys) {
        bool known = manifest.find_size(k.size_label) != nullptr &&
                     std::find(manifest.recipes.begin(), manifest.recipes.end(), k.recipe) !=
                         manifest.recipes.end() &&
                     std::find(manifest.seeds.begin(), manifest.seeds.end(), k.seed) !=
                         manifest.seeds.end();
        if (!known) {
            report.unlisted_keys.push_back(k);
            continue;
        }
        auto& rs = runs[{k.recipe, k.size_label, k.seed}];
        rs.max_step = std::max(rs.max_step, k.step);
        rs.max_tokens = std::max(rs.max_tokens, k.tokens_seen);
        rs.n_checkpoints += 1;
    }

    for (const auto& recipe : manifest.recipes) {
        for (const auto& cfg : manifest.ladder) {
            for (const auto& seed : manifest.seeds) {
                CoverageCell cell;
                cell.recipe = recipe;
                cell.size_label = cfg.size_label;
                cell.seed = seed;
                cell.train_steps = cfg.train_steps;
                auto it = runs.find({recipe, cfg.size_label, seed});
                if (it == runs.end()) {
                    cell.status = CellStatus::absent;
                } else {
                    cell.max_step = it->second.max_step;
                    cell.n_checkpoints = it->second.n_checkpoints;
                    cell.fraction = static_cast<double>(cell.max_step) /
                                    static_cast<double>(cfg.train_steps);
                    // a run terminated at the early-stop point lands on an
                    // integer step, so allow one step of rounding slack
                    double step_tol = 1.0 / static_cast<double>(cfg.train_steps);
                    if (cell.max_step > cfg.train_steps ||
                        it->second.max_tokens > cfg.tokens_trained) {
                        cell.status = CellStatus::overrun;
                    } else if (cell.max_step == cfg.train_steps) {
                        cell.status = CellStatus::complete;
                    } else if (seed != manifest.default_seed() &&
                               cell.fraction >=
                                   manifest.early_stop_fraction - step_tol - 1e-12) {
                        cell.status = CellStatus::early_stop_consistent;
                    } else {
                        cell.status = CellStatus::incomplete;
                    }
                }
                if (cell.status != CellStatus::complete &&
                    cell.status != CellStatus::early_stop_consistent)
                    ++report.n_flagged;
                report.cells.push_back(std::move(cell));
            }
        }
    }
    return report;
}

inline CoverageReport coverage_report(const std::vector<ItemScoreRecord>& records,
                                      const SuiteManifest& manifest) {
    std::vector<CheckpointKey> keys;
    keys.reserve(records.size());
    for (const auto& r : records) keys.push_back(r.key);
    return coverage_report_from_keys(std::move(keys), manifest);
}

inline CoverageReport coverage_report(const std::vector<MetricPoint>& points,
                                      const SuiteManifest& manifest) {
    std::vector<CheckpointKey> keys;
    keys.reserve(points.size());
    for (const auto& p : points) keys.push_back(p.key);
    return coverage_report_from_keys(std::move(keys), manifest);
}

inline void write_coverage_report(std::ostream& out, const CoverageReport& report) {
    out << "recipe,size,seed,max_step,train_steps,n_checkpoints,fraction,status\n";
    for (const auto& c : report.cells) {
        out << csv_join({c.recipe, c.size_label, c.seed, std::to_string(c.max_step),
                         std::to_string(c.train_steps), std::to_string(c.n_checkpoints),
                         format_double(c.fraction), to_string(c.status)})
            << '\n';
    }
}

} // namespace rankcast
