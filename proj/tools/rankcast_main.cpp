// rankcast: decide between pretraining data recipes from small-scale
// experiment logs.
//
// Subcommands: validate, metrics, fit, rank, decide, frontier, analyze,
// simulate. Subcommands compose through files only, every run is
// deterministic given its flags (randomness flows from --rng-seed), and
// --jobs never changes output bytes.

#include <CLI11.hpp>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "rankcast/analysis.hpp"
#include "rankcast/budget.hpp"
#include "rankcast/decision.hpp"
#include "rankcast/manifest.hpp"
#include "rankcast/metrics.hpp"
#include "rankcast/parallel.hpp"
#include "rankcast/records.hpp"
#include "rankcast/scaling.hpp"
#include "rankcast/synthetic.hpp"
#include "rankcast/types.hpp"

namespace fs = std::filesystem;
using namespace rankcast;

namespace {

// ---------------------------------------------------------------------------
// File plumbing
// ---------------------------------------------------------------------------

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw validation_error("cannot read '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void write_file(const std::string& path, const std::string& content) {
    fs::path p(path);
    if (p.has_parent_path()) {
        std::error_code ec;
        fs::create_directories(p.parent_path(), ec);
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw validation_error("cannot write '" + path + "'");
    out << content;
    if (!out) throw validation_error("write failed for '" + path + "'");
}

ParsedManifest load_manifest(const std::string& path) {
    return parse_manifest(read_file(path));
}

std::vector<MetricPoint> load_points(const std::string& path) {
    return read_metric_points(read_file(path));
}

std::vector<std::string> split_list(const std::string& text) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : text) {
        if (c == ',') {
            if (!cur.empty()) out.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    if (!cur.empty()) out.push_back(cur);
    return out;
}

// ---------------------------------------------------------------------------
// Series lookup built on top of the raw point list
// ---------------------------------------------------------------------------

struct SeriesIndex {
    // (recipe, size, seed, task, metric) -> ordered (step, value)
    std::map<std::tuple<std::string, std::string, std::string, std::string, std::string>,
             std::map<std::int64_t, double>>
        series;
    PointIndex points;

    explicit SeriesIndex(const std::vector<MetricPoint>& pts) : points(pts) {
        for (const auto& p : pts) {
            series[{p.key.recipe, p.key.size_label, p.key.seed, p.task, p.metric}]
                  [p.key.step] = p.value;
        }
    }

    const std::map<std::int64_t, double>* find(const std::string& recipe,
                                               const std::string& size,
                                               const std::string& seed,
                                               const std::string& task,
                                               const std::string& metric) const {
        auto it = series.find({recipe, size, seed, task, metric});
        return it == series.end() ? nullptr : &it->second;
    }
};

// Observations for one (recipe, task) over a size subset.
struct ChainInputs {
    std::vector<LossPoint> finals;
    std::vector<AccPoint> checkpoints;
};

ChainInputs assemble_chain_inputs(const SeriesIndex& idx, const SuiteManifest& manifest,
                                  const std::string& recipe, const SizeSubset& subset,
                                  const std::string& task, const std::string& acc_metric,
                                  const std::string& loss_metric, const std::string& seed,
                                  bool need_loss) {
    ChainInputs out;
    for (const auto& label : subset.labels) {
        const ModelConfig* cfg = manifest.find_size(label);
        if (!cfg) throw validation_error("fit: unknown size label '" + label + "'");
        double n_params = static_cast<double>(cfg->non_embedding_params);

        const auto* acc = idx.find(recipe, label, seed, task, acc_metric);
        if (!acc || acc->empty())
            throw validation_error("fit: no '" + acc_metric + "' series for " + recipe + "/" +
                                   label + "/" + seed + "/" + task);
        const auto* loss = idx.find(recipe, label, seed, task, loss_metric);
        if (need_loss) {
            if (!loss || loss->empty())
                throw validation_error("fit: no '" + loss_metric + "' series for " + recipe +
                                       "/" + label + "/" + seed + "/" + task);
            if (loss->rbegin()->first != cfg->train_steps)
                throw validation_error("fit: run " + recipe + "/" + label + "/" + seed +
                                       " is not fully trained (last step " +
                                       std::to_string(loss->rbegin()->first) + " of " +
                                       std::to_string(cfg->train_steps) + ")");
            std::vector<std::pair<std::int64_t, double>> series(loss->begin(), loss->end());
            LossPoint lp;
            lp.n_params = n_params;
            lp.n_tokens = static_cast<double>(cfg->tokens_trained);
            lp.compute = flops(lp.n_params, lp.n_tokens);
            lp.loss = smooth_final_loss(series);
            out.finals.push_back(lp);
        }

        std::int64_t final_step = acc->rbegin()->first;
        for (const auto& [step, value] : *acc) {
            AccPoint ap;
            ap.step = step;
            ap.final_step = final_step;
            ap.value = value;
            auto tokens = idx.points.tokens_seen(recipe, label, seed, step);
            if (!tokens)
                throw validation_error("fit: no tokens_seen for " + recipe + "/" + label + "/" +
                                       seed + " step " + std::to_string(step));
            ap.n_params = n_params;
            ap.n_tokens = static_cast<double>(*tokens);
            ap.compute = flops(ap.n_params, ap.n_tokens);
            if (need_loss) {
                auto it = loss->find(step);
                if (it == loss->end())
                    throw validation_error("fit: no '" + loss_metric + "' value for " + recipe +
                                           "/" + label + "/" + seed + " step " +
                                           std::to_string(step));
                ap.loss = it->second;
            }
            out.checkpoints.push_back(ap);
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Prediction table I/O (shared by rank, fit --pred-out, decide)
// ---------------------------------------------------------------------------

constexpr const char* kPredictionHeader =
    "method,scale,step,seed,metric,variant,recipe,yhat,flops,percent_of_target";

void append_prediction_rows(std::ostringstream& out, const Prediction& pred) {
    for (const auto& [recipe, yhat] : pred.yhat) {
        out << csv_join({pred.method.method, pred.method.scale, pred.method.step,
                         pred.method.seed, pred.method.metric, pred.method.variant, recipe,
                         format_double(yhat), format_double(pred.budget.flops),
                         format_double(pred.budget.percent_of_target)})
            << '\n';
    }
}

std::vector<Prediction> read_predictions(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line)) throw parse_error("prediction table: empty document");
    std::map<std::vector<std::string>, Prediction> groups; // descriptor fields -> rows
    std::vector<std::vector<std::string>> order;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        auto fields = csv_split(line, line_no);
        if (fields.size() != 10)
            throw parse_error("prediction table line " + std::to_string(line_no) +
                              ": expected 10 columns");
        std::vector<std::string> key(fields.begin(), fields.begin() + 6);
        auto [it, inserted] = groups.try_emplace(key);
        Prediction& pred = it->second;
        if (inserted) {
            pred.method = {fields[0], fields[1], fields[2], fields[3], fields[4], fields[5]};
            pred.budget.flops = parse_double(fields[8], "prediction flops");
            pred.budget.percent_of_target = parse_double(fields[9], "prediction pct");
            if (pred.budget.percent_of_target > 0.0)
                pred.budget.target_flops =
                    pred.budget.flops / pred.budget.percent_of_target * 100.0;
            order.push_back(key);
        }
        pred.yhat.emplace_back(fields[6], parse_double(fields[7], "prediction yhat"));
    }
    std::vector<Prediction> out;
    for (const auto& key : order) {
        Prediction& p = groups[key];
        std::sort(p.yhat.begin(), p.yhat.end());
        for (std::size_t i = 1; i < p.yhat.size(); ++i) {
            if (p.yhat[i].first == p.yhat[i - 1].first)
                throw validation_error("prediction table: recipe '" + p.yhat[i].first +
                                       "' appears twice for one method (same file passed "
                                       "twice?)");
        }
        out.push_back(std::move(p));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Subcommand state
// ---------------------------------------------------------------------------

struct Options {
    std::string manifest_path;
    std::string records_path;
    std::string points_path;
    std::string out_path;
    std::string out_dir;
    std::string pred_out;
    std::string pairs_out;
    std::string errors_out;
    std::string plot_path;
    std::vector<std::string> pred_paths;
    std::vector<std::string> report_paths;
    std::vector<std::string> metric_names;
    std::vector<std::string> variant_names;
    std::vector<std::string> subset_names;
    std::vector<std::string> seeds;
    std::string tasks_csv;
    std::string size_label;
    std::string step_text = "final";
    std::string gold_metric;
    std::string loss_metric = "correct_nll_per_char";
    std::string acc_metric;
    std::uint64_t rng_seed = 0;
    unsigned jobs = 1;
    bool with_loss = false;
    bool all_metrics = false;
    bool exclude_target = false;
    bool best_effort = false;
    bool score_gold = false;
    int items_override = -1;
};

std::vector<std::string> resolve_tasks(const Options& opt, const SuiteManifest& m) {
    if (opt.tasks_csv.empty()) return m.target.tasks;
    auto tasks = split_list(opt.tasks_csv);
    if (tasks.empty()) throw validation_error("--tasks: empty task list");
    return tasks;
}

// ---------------------------------------------------------------------------
// validate
// ---------------------------------------------------------------------------

int cmd_validate(const Options& opt) {
    ParsedManifest parsed = load_manifest(opt.manifest_path);
    CoverageReport report;
    if (!opt.records_path.empty()) {
        auto records = parse_item_records(read_file(opt.records_path));
        report = coverage_report(records, parsed.manifest);
        std::cerr << "validated " << records.size() << " item records\n";
    } else if (!opt.points_path.empty()) {
        report = coverage_report(load_points(opt.points_path), parsed.manifest);
    } else {
        throw validation_error("validate: pass --records or --points");
    }
    std::ostringstream table;
    write_coverage_report(table, report);
    if (!opt.out_path.empty()) write_file(opt.out_path, table.str());
    else std::cout << table.str();
    std::cout << "coverage: " << report.cells.size() << " cells, " << report.n_flagged
              << " flagged, " << report.unlisted_keys.size() << " unlisted checkpoints\n";
    return 0;
}

// ---------------------------------------------------------------------------
// metrics
// ---------------------------------------------------------------------------

int cmd_metrics(const Options& opt) {
    auto records = parse_item_records(read_file(opt.records_path));
    std::vector<MetricName> metrics;
    if (opt.metric_names.empty() || opt.all_metrics) {
        metrics = all_metric_names();
    } else {
        for (const auto& name : opt.metric_names) {
            auto parsed = parse_metric_name(name);
            if (!parsed) throw validation_error("unknown metric '" + name + "'");
            metrics.push_back(*parsed);
        }
    }
    auto points = compute_all(records, metrics, opt.with_loss, NormalizationMode::per_char,
                              opt.jobs);
    write_file(opt.out_path, write_metric_points(points));
    std::cout << "wrote " << points.size() << " metric points to " << opt.out_path << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// fit
// ---------------------------------------------------------------------------

std::string params_field(const FitParams& params) {
    std::string out;
    for (const auto& [name, value] : named_params(params)) {
        if (!out.empty()) out += ";";
        out += name + "=" + format_double(value);
    }
    return out;
}

int cmd_fit(const Options& opt) {
    ParsedManifest parsed = load_manifest(opt.manifest_path);
    const SuiteManifest& manifest = parsed.manifest;
    auto points = load_points(opt.points_path);
    SeriesIndex idx(points);

    std::vector<std::string> tasks = resolve_tasks(opt, manifest);
    std::string acc_metric = opt.acc_metric.empty() ? manifest.target.metric : opt.acc_metric;
    if (opt.seeds.size() > 1)
        throw validation_error("fit: fits use one experiment seed; pass a single --seed");
    std::string seed = opt.seeds.empty() ? manifest.default_seed() : opt.seeds.front();

    std::vector<Variant> variants;
    if (opt.variant_names.empty()) {
        variants.push_back(Variant::three_param);
    } else {
        for (const auto& name : opt.variant_names) {
            if (name == "all") {
                variants = all_variants();
                break;
            }
            auto v = parse_variant(name);
            if (!v) throw validation_error("unknown variant '" + name + "'");
            variants.push_back(*v);
        }
    }

    std::vector<std::string> fit_ladder;
    for (const auto& cfg : manifest.ladder) {
        if (opt.exclude_target && cfg.size_label == manifest.target.size_label) continue;
        fit_ladder.push_back(cfg.size_label);
    }

    std::vector<SizeSubset> subsets;
    auto add_subset = [&](const std::string& name) {
        if (name == "all") {
            subsets.push_back({"all", fit_ladder});
            return;
        }
        auto sep = name.find(':');
        if (sep == std::string::npos)
            throw validation_error("bad --subset '" + name + "' (use all, prefix:K, suffix:K)");
        std::int64_t k = parse_int(name.substr(sep + 1), "--subset");
        std::int64_t n = static_cast<std::int64_t>(fit_ladder.size());
        std::string kind = name.substr(0, sep);
        SizeSubset s;
        s.descriptor = name;
        if (kind == "prefix") {
            if (k < 3 || k > n)
                throw validation_error("--subset prefix:k needs 3 <= k <= " +
                                       std::to_string(n));
            s.labels.assign(fit_ladder.begin(), fit_ladder.begin() + k);
        } else if (kind == "suffix") {
            if (k < 2 || k > n - 3)
                throw validation_error("--subset suffix:k needs 2 <= k <= " +
                                       std::to_string(n - 3));
            s.labels.assign(fit_ladder.begin() + (k - 1), fit_ladder.end());
        } else {
            throw validation_error("bad --subset '" + name + "' (use all, prefix:K, suffix:K)");
        }
        subsets.push_back(std::move(s));
    };
    if (opt.subset_names.empty()) {
        subsets.push_back({"all", fit_ladder});
    } else {
        for (const auto& name : opt.subset_names) {
            if (name == "sweep") {
                auto sweep = size_subsets(fit_ladder);
                subsets.insert(subsets.end(), sweep.begin(), sweep.end());
            } else {
                add_subset(name);
            }
        }
    }

    std::vector<std::string> recipes = manifest.recipes;
    std::sort(recipes.begin(), recipes.end());

    // in a batch over several variant-subset combos, drop the structurally
    // infeasible ones (too few sizes for the loss form); a single explicit
    // combo still errors
    const bool batch = variants.size() * subsets.size() > 1;
    std::vector<std::pair<std::size_t, std::size_t>> combos;
    for (std::size_t v = 0; v < variants.size(); ++v) {
        for (std::size_t s = 0; s < subsets.size(); ++s) {
            if (batch && !is_single_step(variants[v]) &&
                subsets[s].labels.size() <
                    static_cast<std::size_t>(free_param_count(loss_form(variants[v])))) {
                std::cerr << "fit: skipping " << to_string(variants[v]) << " on "
                          << subsets[s].descriptor << " (needs "
                          << free_param_count(loss_form(variants[v])) << " sizes, has "
                          << subsets[s].labels.size() << ")\n";
                continue;
            }
            combos.emplace_back(v, s);
        }
    }

    struct Job {
        std::size_t task_i, variant_i, subset_i, recipe_i;
    };
    std::vector<Job> jobs_list;
    for (std::size_t t = 0; t < tasks.size(); ++t)
        for (const auto& [v, s] : combos)
            for (std::size_t r = 0; r < recipes.size(); ++r)
                jobs_list.push_back({t, v, s, r});

    std::vector<FitChain> chains(jobs_list.size());
    parallel_for(jobs_list.size(), opt.jobs, [&](std::size_t i) {
        const Job& job = jobs_list[i];
        bool single = is_single_step(variants[job.variant_i]);
        ChainInputs inputs = assemble_chain_inputs(
            idx, manifest, recipes[job.recipe_i], subsets[job.subset_i], tasks[job.task_i],
            acc_metric, opt.loss_metric, seed, !single);
        chains[i] = fit_chain(inputs.finals, inputs.checkpoints, variants[job.variant_i]);
    });

    std::ostringstream fits_csv;
    fits_csv << "recipe,task,variant,subset,params,sse,n_points,converged\n";
    auto emit_fit = [&](const Job& job, const FitResult& fit) {
        fits_csv << csv_join({recipes[job.recipe_i], tasks[job.task_i],
                              to_string(fit.variant), subsets[job.subset_i].descriptor,
                              params_field(fit.params), format_double(fit.sse),
                              std::to_string(fit.n_points), fit.converged ? "true" : "false"})
                 << '\n';
    };
    for (std::size_t i = 0; i < jobs_list.size(); ++i) {
        emit_fit(jobs_list[i], chains[i].step1);
        if (chains[i].step2) emit_fit(jobs_list[i], *chains[i].step2);
    }
    write_file(opt.out_path, fits_csv.str());

    int not_converged = 0;
    for (const auto& c : chains)
        if (!c.converged()) ++not_converged;

    if (!opt.pred_out.empty()) {
        std::ostringstream pred_csv;
        pred_csv << kPredictionHeader << '\n';
        for (std::size_t t = 0; t < tasks.size(); ++t) {
            for (std::size_t c = 0; c < combos.size(); ++c) {
                std::vector<std::pair<std::string, FitChain>> fits;
                for (std::size_t r = 0; r < recipes.size(); ++r) {
                    std::size_t i = (t * combos.size() + c) * recipes.size() + r;
                    fits.emplace_back(recipes[r], chains[i]);
                }
                Prediction pred = predict_multi_scale(fits, manifest, subsets[combos[c].second],
                                                      acc_metric, seed, opt.best_effort);
                pred.method.metric = acc_metric + "@" + tasks[t];
                append_prediction_rows(pred_csv, pred);
            }
        }
        write_file(opt.pred_out, pred_csv.str());
    }

    std::cout << "fitted " << chains.size() << " chains (" << not_converged
              << " not converged); wrote " << opt.out_path << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// rank
// ---------------------------------------------------------------------------

int cmd_rank(const Options& opt) {
    ParsedManifest parsed = load_manifest(opt.manifest_path);
    const SuiteManifest& manifest = parsed.manifest;
    auto points = load_points(opt.points_path);
    PointIndex idx(points);
    std::vector<std::string> tasks = resolve_tasks(opt, manifest);
    std::string metric = opt.acc_metric.empty() ? manifest.target.metric : opt.acc_metric;
    std::vector<std::string> seeds = opt.seeds.empty() ? manifest.seeds : opt.seeds;
    if (opt.size_label.empty()) throw validation_error("rank: --size is required");

    std::ostringstream pred_csv;
    pred_csv << kPredictionHeader << '\n';
    for (const auto& seed : seeds) {
        std::int64_t step = 0;
        if (opt.step_text == "final") {
            // every recipe must agree on the final step of this (size, seed)
            std::optional<std::int64_t> agreed;
            for (const auto& recipe : manifest.recipes) {
                auto fs = idx.final_step(recipe, opt.size_label, seed);
                if (!fs)
                    throw validation_error("rank: no checkpoints for " + recipe + "/" +
                                           opt.size_label + "/" + seed);
                if (agreed && *agreed != *fs)
                    throw validation_error("rank: final step differs across recipes at " +
                                           opt.size_label + "/" + seed + " (" +
                                           std::to_string(*agreed) + " vs " +
                                           std::to_string(*fs) + "); pass --step explicitly");
                agreed = fs;
            }
            step = *agreed;
        } else {
            step = parse_int(opt.step_text, "--step");
        }
        Prediction pred = rank_single_scale(idx, manifest, opt.size_label, step, seed, metric,
                                            tasks);
        pred.method.metric = metric + "@" + (tasks.size() == 1 ? tasks[0] : "macro");
        append_prediction_rows(pred_csv, pred);
        if (tasks.size() > 1) {
            // per-task predictions ride along so per-task reports need no re-run
            for (const auto& task : tasks) {
                Prediction pt = rank_single_scale(idx, manifest, opt.size_label, step, seed,
                                                  metric, {task});
                pt.method.metric = metric + "@" + task;
                append_prediction_rows(pred_csv, pt);
            }
        }
    }
    write_file(opt.out_path, pred_csv.str());
    std::cout << "wrote " << seeds.size() << " prediction attempts to " << opt.out_path << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// decide
// ---------------------------------------------------------------------------

int cmd_decide(const Options& opt) {
    ParsedManifest parsed = load_manifest(opt.manifest_path);
    const SuiteManifest& manifest = parsed.manifest;
    auto points = load_points(opt.points_path);
    PointIndex idx(points);
    std::vector<std::string> tasks = resolve_tasks(opt, manifest);
    std::string gold_metric = opt.gold_metric.empty() ? manifest.target.metric
                                                      : opt.gold_metric;

    // a prediction's metric field may carry a "@task" suffix; per-task
    // predictions are scored against the gold of that task alone
    std::map<std::string, GoldRanking> golds;
    auto gold_for = [&](const std::string& metric_field) -> const GoldRanking& {
        std::string suffix = "macro";
        auto pos = metric_field.rfind('@');
        if (pos != std::string::npos) suffix = metric_field.substr(pos + 1);
        auto it = golds.find(suffix);
        if (it == golds.end()) {
            std::vector<std::string> gtasks =
                suffix == "macro" ? tasks : std::vector<std::string>{suffix};
            it = golds.emplace(suffix, gold_targets(idx, manifest, gold_metric, gtasks)).first;
        }
        return it->second;
    };

    std::vector<Prediction> predictions;
    for (const auto& path : opt.pred_paths) {
        auto batch = read_predictions(read_file(path));
        predictions.insert(predictions.end(), batch.begin(), batch.end());
    }
    if (predictions.empty()) throw validation_error("decide: no predictions loaded");

    // attempts = same method up to the seed field
    std::map<std::vector<std::string>, std::vector<const Prediction*>> attempt_groups;
    std::vector<std::vector<std::string>> order;
    for (const auto& p : predictions) {
        std::vector<std::string> key = {p.method.method, p.method.scale, p.method.step,
                                        p.method.metric, p.method.variant};
        auto [it, inserted] = attempt_groups.try_emplace(key);
        if (inserted) order.push_back(key);
        it->second.push_back(&p);
    }

    std::vector<DecisionReport> reports;
    std::vector<DecisionReport> attempt_reports;
    std::vector<PredictionErrorReport> error_reports;
    for (const auto& key : order) {
        std::vector<Prediction> attempts;
        std::set<std::string> seeds_seen;
        for (const Prediction* p : attempt_groups[key]) {
            if (!seeds_seen.insert(p->method.seed).second)
                throw validation_error("decide: duplicate attempt (method " + p->method.method +
                                       " " + p->method.scale + ", seed '" + p->method.seed +
                                       "'); same prediction file passed twice?");
            attempts.push_back(*p);
        }
        const GoldRanking& gold = gold_for(attempts.front().method.metric);
        for (const auto& a : attempts) {
            attempt_reports.push_back(decision_accuracy(a, gold));
            error_reports.push_back(prediction_error(a, gold));
        }
        reports.push_back(seed_attempts(attempts, gold));
    }

    std::ostringstream table;
    write_decision_reports(table, reports);
    write_file(opt.out_path, table.str());
    if (!opt.pairs_out.empty()) {
        std::ostringstream pairs;
        bool first = true;
        for (const auto& r : attempt_reports) {
            if (first) {
                write_pair_outcomes(pairs, r);
                first = false;
            } else {
                std::ostringstream one;
                write_pair_outcomes(one, r);
                auto text = one.str();
                pairs << text.substr(text.find('\n') + 1); // skip repeated header
            }
        }
        write_file(opt.pairs_out, pairs.str());
    }
    if (!opt.errors_out.empty()) {
        std::ostringstream errs;
        write_prediction_errors(errs, error_reports);
        write_file(opt.errors_out, errs.str());
    }
    for (const auto& r : reports) {
        std::cout << r.method.method << " scale=" << r.method.scale << " step=" << r.method.step
                  << " metric=" << r.method.metric << " variant=" << r.method.variant
                  << " decision_accuracy=" << format_double(r.decision_accuracy)
                  << " da_std=" << format_double(r.da_std)
                  << " percent_of_target=" << format_double(r.budget.percent_of_target)
                  << "\n";
    }
    return 0;
}

// ---------------------------------------------------------------------------
// frontier
// ---------------------------------------------------------------------------

int cmd_frontier(const Options& opt) {
    std::vector<FrontierPoint> points;
    for (const auto& path : opt.report_paths) {
        std::istringstream in(read_file(path));
        std::string line;
        if (!std::getline(in, line))
            throw parse_error("report '" + path + "': empty document");
        if (line != kDecisionReportHeader)
            throw parse_error("report '" + path + "': unexpected header");
        std::size_t line_no = 1;
        while (std::getline(in, line)) {
            ++line_no;
            if (line.empty()) continue;
            auto fields = csv_split(line, line_no);
            if (fields.size() != 13)
                throw parse_error("report '" + path + "' line " + std::to_string(line_no) +
                                  ": expected 13 columns");
            FrontierPoint p;
            p.method = fields[0] + ":" + fields[1] + ":step" + fields[2] + ":" + fields[4];
            if (fields[5] != "-") p.method += ":" + fields[5];
            p.flops = parse_double(fields[6], "report flops");
            p.decision_accuracy = parse_double(fields[8], "report decision_accuracy");
            p.da_std = parse_double(fields[9], "report da_std");
            if (p.flops <= 0.0) {
                std::cerr << "frontier: skipping zero-cost method " << p.method << "\n";
                continue;
            }
            points.push_back(std::move(p));
        }
    }
    auto frontier = pareto_frontier(points);
    std::ostringstream table;
    write_frontier(table, frontier);
    write_file(opt.out_path, table.str());
    if (!opt.plot_path.empty()) write_file(opt.plot_path, frontier_svg(points, frontier));
    std::cout << "frontier: " << frontier.size() << " of " << points.size()
              << " points are non-dominated\n";
    return 0;
}

// ---------------------------------------------------------------------------
// analyze
// ---------------------------------------------------------------------------

int cmd_analyze(const Options& opt) {
    ParsedManifest parsed = load_manifest(opt.manifest_path);
    const SuiteManifest& manifest = parsed.manifest;
    auto points = load_points(opt.points_path);
    PointIndex idx(points);
    std::vector<std::string> tasks = resolve_tasks(opt, manifest);
    std::vector<std::string> metrics = opt.metric_names.empty()
                                           ? std::vector<std::string>{manifest.target.metric}
                                           : opt.metric_names;
    std::string size = opt.size_label.empty() ? manifest.ladder.front().size_label
                                              : opt.size_label;

    std::optional<GoldRanking> gold;
    if (opt.score_gold) {
        std::string gold_metric = opt.gold_metric.empty() ? manifest.target.metric
                                                          : opt.gold_metric;
        gold = gold_targets(idx, manifest, gold_metric, tasks);
    }

    std::vector<NoiseSpreadPoint> results;
    for (const auto& task : tasks) {
        for (const auto& metric : metrics) {
            NoiseSpreadPoint p = noise_spread(idx, manifest, size, task, metric);
            if (gold) {
                // average single-scale decision accuracy over fully trained seeds
                const ModelConfig* cfg = manifest.find_size(size);
                double sum = 0.0;
                int n = 0;
                for (const auto& seed : manifest.seeds) {
                    bool full = true;
                    for (const auto& recipe : manifest.recipes) {
                        auto fs = idx.final_step(recipe, size, seed);
                        if (!fs || *fs != cfg->train_steps) full = false;
                    }
                    if (!full) continue;
                    Prediction pred = rank_single_scale(idx, manifest, size, cfg->train_steps,
                                                        seed, metric, {task});
                    sum += decision_accuracy(pred, *gold).decision_accuracy;
                    ++n;
                }
                if (n > 0) p.decision_accuracy = sum / n;
            }
            results.push_back(std::move(p));
        }
    }
    std::ostringstream table;
    write_noise_spread(table, results);
    write_file(opt.out_path, table.str());
    if (!opt.plot_path.empty()) write_file(opt.plot_path, noise_spread_svg(results));
    std::cout << "analyzed " << results.size() << " task-metric configurations at " << size
              << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

int cmd_simulate(const Options& opt) {
    ParsedManifest parsed = load_manifest(opt.manifest_path);
    if (parsed.ground_truth.is_null())
        throw validation_error("simulate: manifest has no ground_truth section");
    GroundTruthSection section = parse_ground_truth(parsed.ground_truth);
    if (opt.items_override >= 0) section.options.items_per_task = opt.items_override;

    SyntheticSuite suite = gen_suite(section.truths, parsed.manifest, opt.rng_seed,
                                     section.options);
    fs::path dir(opt.out_dir.empty() ? "." : opt.out_dir);
    write_file((dir / "points.csv").string(), write_metric_points(suite.points));

    GoldRanking gold = true_gold(section.truths, parsed.manifest);
    std::ostringstream gold_csv;
    gold_csv << "recipe,value\n";
    for (const auto& [recipe, value] : gold.values)
        gold_csv << csv_join({recipe, format_double(value)}) << '\n';
    write_file((dir / "true_gold.csv").string(), gold_csv.str());

    if (!suite.records.empty()) {
        std::ostringstream recs;
        write_item_records(recs, suite.records);
        write_file((dir / "records.jsonl").string(), recs.str());
    }
    std::cout << "simulated " << suite.points.size() << " metric points"
              << (suite.records.empty()
                      ? std::string()
                      : " and " + std::to_string(suite.records.size()) + " item records")
              << " into " << dir.string() << "\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"decide between pretraining data recipes from small-scale experiment logs"};
    app.require_subcommand(1);
    Options opt;

    auto* validate = app.add_subcommand("validate", "check records against a suite manifest");
    validate->add_option("--manifest", opt.manifest_path)->required();
    validate->add_option("--records", opt.records_path);
    validate->add_option("--points", opt.points_path);
    validate->add_option("--out", opt.out_path);

    auto* metrics = app.add_subcommand("metrics", "aggregate item records into metric points");
    metrics->add_option("--records", opt.records_path)->required();
    metrics->add_option("--out", opt.out_path)->required();
    metrics->add_option("--metric", opt.metric_names, "metric names (default: all 15)");
    metrics->add_flag("--all-metrics", opt.all_metrics);
    metrics->add_flag("--with-loss", opt.with_loss, "also emit correct_nll_per_char");
    metrics->add_option("--jobs", opt.jobs);

    auto* fit = app.add_subcommand("fit", "fit scaling-law chains and extrapolate");
    fit->add_option("--manifest", opt.manifest_path)->required();
    fit->add_option("--points", opt.points_path)->required();
    fit->add_option("--out", opt.out_path)->required();
    fit->add_option("--pred-out", opt.pred_out, "also write target-scale predictions");
    fit->add_option("--variant", opt.variant_names,
                    "three_param, two_param, five_param_nd, single_step_3, single_step_5, "
                    "three_param_helper, three_param_late, three_param_helper_late, or all");
    fit->add_option("--subset", opt.subset_names, "all, prefix:K, suffix:K, or sweep");
    fit->add_option("--task", opt.tasks_csv, "comma-separated tasks (default: manifest target)");
    fit->add_option("--metric", opt.acc_metric, "value series (default: manifest target)");
    fit->add_option("--loss-metric", opt.loss_metric);
    fit->add_option("--seed", opt.seeds, "experiment seed (default: manifest default seed)");
    fit->add_flag("--exclude-target", opt.exclude_target,
                  "drop the target size from fitting subsets");
    fit->add_flag("--best-effort", opt.best_effort, "predict from non-converged fits too");
    fit->add_option("--jobs", opt.jobs);

    auto* rank = app.add_subcommand("rank", "single-scale ranking predictions");
    rank->add_option("--manifest", opt.manifest_path)->required();
    rank->add_option("--points", opt.points_path)->required();
    rank->add_option("--out", opt.out_path)->required();
    rank->add_option("--size", opt.size_label)->required();
    rank->add_option("--step", opt.step_text, "checkpoint step or 'final'");
    rank->add_option("--seed", opt.seeds, "seeds to attempt (default: all manifest seeds)");
    rank->add_option("--metric", opt.acc_metric, "proxy metric (default: manifest target)");
    rank->add_option("--tasks", opt.tasks_csv);

    auto* decide = app.add_subcommand("decide", "score predictions against gold rankings");
    decide->add_option("--manifest", opt.manifest_path)->required();
    decide->add_option("--points", opt.points_path)->required();
    decide->add_option("--pred", opt.pred_paths)->required();
    decide->add_option("--out", opt.out_path)->required();
    decide->add_option("--pairs-out", opt.pairs_out);
    decide->add_option("--errors-out", opt.errors_out);
    decide->add_option("--gold-metric", opt.gold_metric);
    decide->add_option("--tasks", opt.tasks_csv);

    auto* frontier = app.add_subcommand("frontier", "compute-accuracy Pareto frontier");
    frontier->add_option("--report", opt.report_paths)->required();
    frontier->add_option("--out", opt.out_path)->required();
    frontier->add_option("--plot", opt.plot_path, "also write an SVG chart");

    auto* analyze = app.add_subcommand("analyze", "noise and spread at one scale");
    analyze->add_option("--manifest", opt.manifest_path)->required();
    analyze->add_option("--points", opt.points_path)->required();
    analyze->add_option("--out", opt.out_path)->required();
    analyze->add_option("--size", opt.size_label, "size label (default: smallest)");
    analyze->add_option("--metric", opt.metric_names, "metric series to analyze");
    analyze->add_option("--tasks", opt.tasks_csv);
    analyze->add_flag("--score-gold", opt.score_gold,
                      "also score single-scale decisions against gold");
    analyze->add_option("--gold-metric", opt.gold_metric);
    analyze->add_option("--plot", opt.plot_path, "also write an SVG scatter");

    auto* simulate = app.add_subcommand("simulate", "generate a suite from ground truths");
    simulate->add_option("--manifest", opt.manifest_path)->required();
    simulate->add_option("--out-dir", opt.out_dir)->required();
    simulate->add_option("--rng-seed", opt.rng_seed);
    simulate->add_option("--items", opt.items_override, "items per task (overrides manifest)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2; // usage errors exit 2, --help exits 0
    }

    try {
        if (app.got_subcommand(validate)) return cmd_validate(opt);
        if (app.got_subcommand(metrics)) return cmd_metrics(opt);
        if (app.got_subcommand(fit)) return cmd_fit(opt);
        if (app.got_subcommand(rank)) return cmd_rank(opt);
        if (app.got_subcommand(decide)) return cmd_decide(opt);
        if (app.got_subcommand(frontier)) return cmd_frontier(opt);
        if (app.got_subcommand(analyze)) return cmd_analyze(opt);
        if (app.got_subcommand(simulate)) return cmd_simulate(opt);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
