#pragma once

// Noise/spread characterization, the compute-to-decision-accuracy Pareto
// frontier, and deterministic table/SVG emission.
//
//   noise  = per-recipe sample std over seed reruns, averaged over recipes
//   spread = sample std over recipes of the per-recipe seed means
//
// Both use fully trained runs only (final checkpoint present) and
// Bessel-corrected standard deviations, since seed counts are tiny.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "rankcast/common.hpp"
#include "rankcast/decision.hpp"
#include "rankcast/types.hpp"

namespace rankcast {

struct NoiseSpreadPoint {
    std::string task;
    std::string metric;
    std::string size_label;
    double noise = 0.0;
    double spread = 0.0;
    double decision_accuracy = std::numeric_limits<double>::quiet_NaN(); // NaN = not scored
};

struct FrontierPoint {
    std::string method; // descriptor string
    double flops = 0.0;
    double decision_accuracy = 0.0;
    double da_std = 0.0;
};

namespace detail {

inline double sample_std(const std::vector<double>& xs, double mean) {
    // identical values have zero deviation even when mean rounding says otherwise
    bool all_equal = true;
    for (double x : xs) {
        if (x != xs.front()) all_equal = false;
    }
    if (all_equal) return 0.0;
    double ss = 0.0;
    for (double x : xs) {
        double d = x - mean;
        ss += d * d;
    }
    return std::sqrt(ss / static_cast<double>(xs.size() - 1));
}

inline double mean_of(const std::vector<double>& xs) {
    double s = 0.0;
    for (double x : xs) s += x;
    return s / static_cast<double>(xs.size());
}

} // namespace detail

// ---------------------------------------------------------------------------
// Noise / spread
// ---------------------------------------------------------------------------

inline NoiseSpreadPoint noise_spread(const PointIndex& index, const SuiteManifest& manifest,
                                     const std::string& size, const std::string& task,
                                     const std::string& metric) {
    const ModelConfig* cfg = manifest.find_size(size);
    if (!cfg) throw validation_error("noise_spread: unknown size label '" + size + "'");

    std::vector<double> per_recipe_std;
    std::vector<double> per_recipe_mean;
    for (const auto& recipe : manifest.recipes) {
        std::vector<double> seed_values;
        for (const auto& seed : manifest.seeds) {
            // only seeds whose run reached the final step count as fully trained
            auto fs = index.final_step(recipe, size, seed);
            if (!fs || *fs != cfg->train_steps) continue;
            auto v = index.value(recipe, size, seed, *fs, task, metric);
            if (v) seed_values.push_back(*v);
        }
        if (seed_values.empty()) continue;
        per_recipe_mean.push_back(detail::mean_of(seed_values));
        if (seed_values.size() >= 2)
            per_recipe_std.push_back(
                detail::sample_std(seed_values, per_recipe_mean.back()));
    }

    if (per_recipe_std.empty())
        throw validation_error("noise_spread: noise needs >= 2 fully trained seeds for at "
                               "least one recipe at " + size + "/" + task + "/" + metric);
    if (per_recipe_mean.size() < 2)
        throw validation_error("noise_spread: spread needs >= 2 recipes with fully trained "
                               "runs at " + size + "/" + task + "/" + metric);

    NoiseSpreadPoint out;
    out.task = task;
    out.metric = metric;
    out.size_label = size;
    out.noise = detail::mean_of(per_recipe_std);
    out.spread = detail::sample_std(per_recipe_mean, detail::mean_of(per_recipe_mean));
    return out;
}

// ---------------------------------------------------------------------------
// Pareto frontier
// ---------------------------------------------------------------------------

// Keeps the points no other point dominates (<= flops and >= accuracy, one
// strict), ordered by flops ascending; exact duplicates collapse to one.
inline std::vector<FrontierPoint> pareto_frontier(std::vector<FrontierPoint> points) {
    std::sort(points.begin(), points.end(), [](const FrontierPoint& a, const FrontierPoint& b) {
        if (a.flops != b.flops) return a.flops < b.flops;
        if (a.decision_accuracy != b.decision_accuracy)
            return a.decision_accuracy > b.decision_accuracy;
        return a.method < b.method;
    });
    std::vector<FrontierPoint> out;
    double best = -std::numeric_limits<double>::infinity();
    double last_flops = std::numeric_limits<double>::quiet_NaN();
    for (const auto& p : points) {
        if (p.flops == last_flops) continue; // dominated by the better point at this cost
        if (p.decision_accuracy > best) {
            out.push_back(p);
            best = p.decision_accuracy;
            last_flops = p.flops;
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Table emission
// ---------------------------------------------------------------------------

inline constexpr const char* kDecisionReportHeader =
    "method,scale,step,seed,metric,variant,flops,percent_of_target,decision_accuracy,da_std,"
    "n_pairs,n_excluded_pairs,n_attempts";

inline void write_decision_reports(std::ostream& out,
                                   const std::vector<DecisionReport>& reports) {
    out << kDecisionReportHeader << '\n';
    for (const auto& r : reports) {
        out << csv_join({r.method.method, r.method.scale, r.method.step, r.method.seed,
                         r.method.metric, r.method.variant, format_double(r.budget.flops),
                         format_double(r.budget.percent_of_target),
                         format_double(r.decision_accuracy), format_double(r.da_std),
                         std::to_string(r.n_pairs), std::to_string(r.n_excluded),
                         std::to_string(r.n_attempts)})
            << '\n';
    }
}

inline void write_pair_outcomes(std::ostream& out, const DecisionReport& report) {
    out << "method,scale,step,seed,recipe_a,recipe_b,gold_sign,pred_sign,result\n";
    for (const auto& p : report.pairs) {
        const char* res = p.result == PairResult::correct ? "correct"
                          : p.result == PairResult::incorrect ? "incorrect"
                                                              : "excluded";
        out << csv_join({report.method.method, report.method.scale, report.method.step,
                         report.method.seed, p.recipe_a, p.recipe_b,
                         std::to_string(p.gold_sign), std::to_string(p.pred_sign), res})
            << '\n';
    }
}

inline void write_noise_spread(std::ostream& out, const std::vector<NoiseSpreadPoint>& points) {
    out << "task,metric,size,noise,spread,decision_accuracy\n";
    for (const auto& p : points) {
        out << csv_join({p.task, p.metric, p.size_label, format_double(p.noise),
                         format_double(p.spread),
                         std::isnan(p.decision_accuracy) ? std::string("nan")
                                                         : format_double(p.decision_accuracy)})
            << '\n';
    }
}

inline void write_frontier(std::ostream& out, const std::vector<FrontierPoint>& points) {
    out << "method,flops,decision_accuracy,da_std\n";
    for (const auto& p : points) {
        out << csv_join({p.method, format_double(p.flops), format_double(p.decision_accuracy),
                         format_double(p.da_std)})
            << '\n';
    }
}

inline void write_prediction_errors(std::ostream& out,
                                    const std::vector<PredictionErrorReport>& reports) {
    out << "method,scale,step,seed,metric,variant,recipe,gold,predicted,abs_error_points,"
           "rel_error_pct,rel_defined\n";
    for (const auto& r : reports) {
        for (const auto& e : r.per_recipe) {
            out << csv_join({r.method.method, r.method.scale, r.method.step, r.method.seed,
                             r.method.metric, r.method.variant, e.recipe,
                             format_double(e.gold), format_double(e.predicted),
                             format_double(e.abs_error_points), format_double(e.rel_error_pct),
                             e.rel_defined ? "true" : "false"})
                << '\n';
        }
    }
}

// ---------------------------------------------------------------------------
// SVG emission
// ---------------------------------------------------------------------------

namespace svg {

// Fixed-precision coordinates keep emission byte-deterministic.
inline std::string coord(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", v);
    return buf;
}

struct Canvas {
    double width = 720.0;
    double height = 480.0;
    double margin_left = 70.0;
    double margin_right = 20.0;
    double margin_top = 20.0;
    double margin_bottom = 50.0;

    double plot_width() const { return width - margin_left - margin_right; }
    double plot_height() const { return height - margin_top - margin_bottom; }
};

struct LinearScale {
    double lo = 0.0;
    double hi = 1.0;
    double pixel_lo = 0.0;
    double pixel_hi = 1.0;

    double operator()(double v) const {
        double t = hi > lo ? (v - lo) / (hi - lo) : 0.5;
        return pixel_lo + t * (pixel_hi - pixel_lo);
    }
};

} // namespace svg

// Compute-vs-decision-accuracy chart: one circle per point (log10 FLOPs on
// the x axis) and a step line along the Pareto frontier.
inline std::string frontier_svg(const std::vector<FrontierPoint>& points,
                                const std::vector<FrontierPoint>& frontier) {
    svg::Canvas c;
    double xlo = 0.0, xhi = 1.0;
    if (!points.empty()) {
        xlo = std::numeric_limits<double>::infinity();
        xhi = -std::numeric_limits<double>::infinity();
        for (const auto& p : points) {
            double lx = std::log10(p.flops);
            xlo = std::min(xlo, lx);
            xhi = std::max(xhi, lx);
        }
        if (xlo == xhi) {
            xlo -= 0.5;
            xhi += 0.5;
        }
    }
    svg::LinearScale xs{xlo, xhi, c.margin_left, c.width - c.margin_right};
    svg::LinearScale ys{0.0, 1.0, c.height - c.margin_bottom, c.margin_top};

    std::ostringstream out;
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << svg::coord(c.width)
        << "\" height=\"" << svg::coord(c.height) << "\" viewBox=\"0 0 " << svg::coord(c.width)
        << " " << svg::coord(c.height) << "\">\n";
    out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";

    // axes
    out << "<line x1=\"" << svg::coord(c.margin_left) << "\" y1=\"" << svg::coord(ys(0.0))
        << "\" x2=\"" << svg::coord(c.width - c.margin_right) << "\" y2=\""
        << svg::coord(ys(0.0)) << "\" stroke=\"black\"/>\n";
    out << "<line x1=\"" << svg::coord(c.margin_left) << "\" y1=\"" << svg::coord(ys(0.0))
        << "\" x2=\"" << svg::coord(c.margin_left) << "\" y2=\"" << svg::coord(ys(1.0))
        << "\" stroke=\"black\"/>\n";
    for (int i = 0; i <= 5; ++i) {
        double v = 0.2 * i;
        out << "<text x=\"" << svg::coord(c.margin_left - 8.0) << "\" y=\""
            << svg::coord(ys(v) + 4.0) << "\" font-size=\"11\" text-anchor=\"end\">"
            << svg::coord(v) << "</text>\n";
    }
    int first_decade = static_cast<int>(std::ceil(xlo));
    int last_decade = static_cast<int>(std::floor(xhi));
    for (int d = first_decade; d <= last_decade; ++d) {
        out << "<line x1=\"" << svg::coord(xs(d)) << "\" y1=\"" << svg::coord(ys(0.0))
            << "\" x2=\"" << svg::coord(xs(d)) << "\" y2=\"" << svg::coord(ys(0.0) + 5.0)
            << "\" stroke=\"black\"/>\n";
        out << "<text x=\"" << svg::coord(xs(d)) << "\" y=\"" << svg::coord(ys(0.0) + 18.0)
            << "\" font-size=\"11\" text-anchor=\"middle\">1e" << d << "</text>\n";
    }
    out << "<text x=\"" << svg::coord(c.margin_left + c.plot_width() / 2.0) << "\" y=\""
        << svg::coord(c.height - 12.0)
        << "\" font-size=\"12\" text-anchor=\"middle\">compute (FLOPs, log scale)</text>\n";
    out << "<text x=\"16\" y=\"" << svg::coord(c.margin_top + c.plot_height() / 2.0)
        << "\" font-size=\"12\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
        << svg::coord(c.margin_top + c.plot_height() / 2.0)
        << ")\">decision accuracy</text>\n";

    // frontier step line
    if (!frontier.empty()) {
        out << "<path d=\"";
        for (std::size_t i = 0; i < frontier.size(); ++i) {
            double x = xs(std::log10(frontier[i].flops));
            double y = ys(frontier[i].decision_accuracy);
            if (i == 0) {
                out << "M " << svg::coord(x) << " " << svg::coord(y);
            } else {
                out << " L " << svg::coord(x) << " "
                    << svg::coord(ys(frontier[i - 1].decision_accuracy)) << " L "
                    << svg::coord(x) << " " << svg::coord(y);
            }
        }
        out << "\" fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"1.5\"/>\n";
    }

    // data markers
    for (const auto& p : points) {
        out << "<circle cx=\"" << svg::coord(xs(std::log10(p.flops))) << "\" cy=\""
            << svg::coord(ys(p.decision_accuracy))
            << "\" r=\"4\" fill=\"#ff7f0e\" fill-opacity=\"0.8\"><title>"
            << p.method << "</title></circle>\n";
    }
    out << "</svg>\n";
    return out.str();
}

// Spread-vs-noise scatter; each point is one (task, metric) configuration.
inline std::string noise_spread_svg(const std::vector<NoiseSpreadPoint>& points) {
    svg::Canvas c;
    double lo = 0.0, hi = 1e-3;
    for (const auto& p : points) {
        hi = std::max({hi, p.noise, p.spread});
    }
    hi *= 1.1;
    svg::LinearScale xs{lo, hi, c.margin_left, c.width - c.margin_right};
    svg::LinearScale ys{lo, hi, c.height - c.margin_bottom, c.margin_top};

    std::ostringstream out;
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << svg::coord(c.width)
        << "\" height=\"" << svg::coord(c.height) << "\" viewBox=\"0 0 " << svg::coord(c.width)
        << " " << svg::coord(c.height) << "\">\n";
    out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    out << "<line x1=\"" << svg::coord(c.margin_left) << "\" y1=\"" << svg::coord(ys(lo))
        << "\" x2=\"" << svg::coord(c.width - c.margin_right) << "\" y2=\""
        << svg::coord(ys(lo)) << "\" stroke=\"black\"/>\n";
    out << "<line x1=\"" << svg::coord(c.margin_left) << "\" y1=\"" << svg::coord(ys(lo))
        << "\" x2=\"" << svg::coord(c.margin_left) << "\" y2=\"" << svg::coord(ys(hi))
        << "\" stroke=\"black\"/>\n";
    out << "<text x=\"" << svg::coord(c.margin_left + c.plot_width() / 2.0) << "\" y=\""
        << svg::coord(c.height - 12.0)
        << "\" font-size=\"12\" text-anchor=\"middle\">spread over recipes</text>\n";
    out << "<text x=\"16\" y=\"" << svg::coord(c.margin_top + c.plot_height() / 2.0)
        << "\" font-size=\"12\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
        << svg::coord(c.margin_top + c.plot_height() / 2.0)
        << ")\">noise over seeds</text>\n";
    for (const auto& p : points) {
        double x = xs(p.spread);
        double y = ys(p.noise);
        out << "<circle cx=\"" << svg::coord(x) << "\" cy=\"" << svg::coord(y)
            << "\" r=\"4\" fill=\"#2ca02c\" fill-opacity=\"0.8\"><title>" << p.task << "/"
            << p.metric << "</title></circle>\n";
        out << "<text x=\"" << svg::coord(x + 6.0) << "\" y=\"" << svg::coord(y - 6.0)
            << "\" font-size=\"10\">" << p.task << "</text>\n";
    }
    out << "</svg>\n";
    return out.str();
}

} // namespace rankcast
