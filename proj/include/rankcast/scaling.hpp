#pragma once

// Scaling-curve fitting and extrapolation.
//
// The two-step route fits a loss law over final fully-trained checkpoints
// (power law in compute, or a separate-N-and-D law) and chains it with a
// sigmoid from loss to metric value fitted over all checkpoints. Single-step
// variants merge both stages into one function of compute (or of N and D)
// with the sigmoid's k and L0 absorbed into the loss-side parameters.
//
// Eight variants:
//   three_param             L(C) = A/C^a + E, then Acc(L)
//   two_param               L(C) = A/C^a
//   five_param_nd           L(N,D) = A/N^a + B/D^b + E
//   single_step_3           Acc(C)   = s/(1+exp(-(A/C^a + E))) + f
//   single_step_5           Acc(N,D) = s/(1+exp(-(A/N^a + B/D^b + E))) + f
//   three_param_helper      baseline + (loss 0, value 1) anchor in step two
//   three_param_late        baseline, step two on the last half of checkpoints
//   three_param_helper_late both of the above

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "rankcast/common.hpp"
#include "rankcast/levmar.hpp"

namespace rankcast {

// ---------------------------------------------------------------------------
// Parameter records
// ---------------------------------------------------------------------------

struct PowerLawParams {
    double A = 0.0;     // > 0
    double alpha = 0.0;
    double E = 0.0;     // irreducible loss; frozen at 0 for the 2-param form
};

struct SigmoidParams {
    double a = 0.0;  // span, canonical >= 0
    double b = 0.0;  // floor
    double k = 0.0;  // steepness, sign-free (fits discover k < 0)
    double L0 = 0.0; // midpoint loss
};

struct NDParams {
    double A = 0.0;
    double alpha = 0.0;
    double B = 0.0;
    double beta = 0.0;
    double E = 0.0;
};

// Merged sigmoid-over-power-law; A and E absorb k and L0, so A is sign-free.
struct SingleStepComputeParams {
    double A = 0.0;
    double alpha = 0.0;
    double E = 0.0;
    double a = 0.0;
    double b = 0.0;
};

struct SingleStepNDParams {
    double A = 0.0;
    double alpha = 0.0;
    double B = 0.0;
    double beta = 0.0;
    double E = 0.0;
    double a = 0.0;
    double b = 0.0;
};

enum class Variant {
    three_param,
    two_param,
    five_param_nd,
    single_step_3,
    single_step_5,
    three_param_helper,
    three_param_late,
    three_param_helper_late,
};

inline const char* to_string(Variant v) {
    switch (v) {
        case Variant::three_param: return "three_param";
        case Variant::two_param: return "two_param";
        case Variant::five_param_nd: return "five_param_nd";
        case Variant::single_step_3: return "single_step_3";
        case Variant::single_step_5: return "single_step_5";
        case Variant::three_param_helper: return "three_param_helper";
        case Variant::three_param_late: return "three_param_late";
        case Variant::three_param_helper_late: return "three_param_helper_late";
    }
    return "?";
}

inline std::optional<Variant> parse_variant(const std::string& name) {
    for (Variant v : {Variant::three_param, Variant::two_param, Variant::five_param_nd,
                      Variant::single_step_3, Variant::single_step_5,
                      Variant::three_param_helper, Variant::three_param_late,
                      Variant::three_param_helper_late}) {
        if (name == to_string(v)) return v;
    }
    return std::nullopt;
}

inline std::vector<Variant> all_variants() {
    return {Variant::three_param,        Variant::two_param,
            Variant::five_param_nd,      Variant::single_step_3,
            Variant::single_step_5,      Variant::three_param_helper,
            Variant::three_param_late,   Variant::three_param_helper_late};
}

inline bool is_single_step(Variant v) {
    return v == Variant::single_step_3 || v == Variant::single_step_5;
}

inline bool uses_nd(Variant v) {
    return v == Variant::five_param_nd || v == Variant::single_step_5;
}

inline bool uses_helper(Variant v) {
    return v == Variant::three_param_helper || v == Variant::three_param_helper_late;
}

inline bool uses_late_filter(Variant v) {
    return v == Variant::three_param_late || v == Variant::three_param_helper_late;
}

// Which loss form a two-step variant fits in its first stage.
inline Variant loss_form(Variant v) {
    switch (v) {
        case Variant::two_param: return Variant::two_param;
        case Variant::five_param_nd: return Variant::five_param_nd;
        case Variant::single_step_3:
        case Variant::single_step_5:
            throw validation_error("loss_form: single-step variants have no loss stage");
        default: return Variant::three_param;
    }
}

using FitParams = std::variant<PowerLawParams, SigmoidParams, NDParams, SingleStepComputeParams,
                               SingleStepNDParams>;

struct FitResult {
    Variant variant = Variant::three_param;
    FitParams params;
    double sse = 0.0;
    int n_points = 0; // observed points fitted (helper anchor not counted)
    bool converged = false;
    int n_restarts_used = 0;
};

// Named parameter list for table export.
inline std::vector<std::pair<std::string, double>> named_params(const FitParams& p) {
    std::vector<std::pair<std::string, double>> out;
    if (const auto* q = std::get_if<PowerLawParams>(&p)) {
        out = {{"A", q->A}, {"alpha", q->alpha}, {"E", q->E}};
    } else if (const auto* q = std::get_if<SigmoidParams>(&p)) {
        out = {{"a", q->a}, {"b", q->b}, {"k", q->k}, {"L0", q->L0}};
    } else if (const auto* q = std::get_if<NDParams>(&p)) {
        out = {{"A", q->A}, {"alpha", q->alpha}, {"B", q->B}, {"beta", q->beta}, {"E", q->E}};
    } else if (const auto* q = std::get_if<SingleStepComputeParams>(&p)) {
        out = {{"A", q->A}, {"alpha", q->alpha}, {"E", q->E}, {"a", q->a}, {"b", q->b}};
    } else if (const auto* q = std::get_if<SingleStepNDParams>(&p)) {
        out = {{"A", q->A},   {"alpha", q->alpha}, {"B", q->B}, {"beta", q->beta},
               {"E", q->E},   {"a", q->a},         {"b", q->b}};
    }
    return out;
}

// ---------------------------------------------------------------------------
// Observations
// ---------------------------------------------------------------------------

// One fully trained run's smoothed final loss at its scale.
struct LossPoint {
    double compute = 0.0;  // training FLOPs
    double n_params = 0.0;
    double n_tokens = 0.0;
    double loss = 0.0;
};

// One checkpoint's (loss, metric value) pair plus enough context for the
// late-checkpoint filter and the single-step forms.
struct AccPoint {
    double loss = 0.0;
    double value = 0.0;
    std::int64_t step = 0;
    std::int64_t final_step = 0;
    double compute = 0.0;
    double n_params = 0.0;
    double n_tokens = 0.0;
};

struct TargetScale {
    double compute = 0.0;
    double n_params = 0.0;
    double n_tokens = 0.0;
};

// ---------------------------------------------------------------------------
// Checkpoint smoothing
// ---------------------------------------------------------------------------

// Mean of the values in the last 10% of the run by step fraction
// (step >= 0.9 * final step); the final step is always included.
inline double smooth_final_loss(std::vector<std::pair<std::int64_t, double>> series) {
    if (series.empty()) throw validation_error("smooth_final_loss: empty series");
    std::sort(series.begin(), series.end());
    const double final_step = static_cast<double>(series.back().first);
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& [step, value] : series) {
        if (static_cast<double>(step) >= 0.9 * final_step) {
            sum += value;
            ++n;
        }
    }
    return sum / static_cast<double>(n);
}

// ---------------------------------------------------------------------------
// Numeric kernels
// ---------------------------------------------------------------------------

namespace detail {

inline double sigmoid(double x) {
    if (x >= 0.0) {
        double e = std::exp(-x);
        return 1.0 / (1.0 + e);
    }
    double e = std::exp(x);
    return e / (1.0 + e);
}

inline double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    std::size_t n = v.size();
    if (n % 2 == 1) return v[n / 2];
    return 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

inline void require_finite(double v, const char* what) {
    if (!std::isfinite(v)) throw validation_error(std::string("fit: non-finite ") + what);
}

// span-preserving canonical form: a >= 0 (the sigmoid has a reflection
// symmetry a*s(x)+b == -a*s(-x)+(a+b))
inline void canonicalize(SigmoidParams& p) {
    if (p.a < 0.0) {
        p.b += p.a;
        p.a = -p.a;
        p.k = -p.k;
    }
}

inline void canonicalize(SingleStepComputeParams& p) {
    if (p.a < 0.0) {
        p.b += p.a;
        p.a = -p.a;
        p.A = -p.A;
        p.E = -p.E;
    }
}

inline void canonicalize(SingleStepNDParams& p) {
    if (p.a < 0.0) {
        p.b += p.a;
        p.a = -p.a;
        p.A = -p.A;
        p.B = -p.B;
        p.E = -p.E;
    }
}

inline const std::vector<double>& alpha_grid() {
    static const std::vector<double> grid = [] {
        std::vector<double> g;
        for (int i = 1; i <= 20; ++i) g.push_back(0.05 * i);
        return g;
    }();
    return grid;
}

} // namespace detail

// ---------------------------------------------------------------------------
// Loss-curve fitting (two-step first stage)
// ---------------------------------------------------------------------------

inline int free_param_count(Variant v) {
    switch (v) {
        case Variant::two_param: return 2;
        case Variant::five_param_nd: return 5;
        case Variant::single_step_3: return 5;
        case Variant::single_step_5: return 7;
        default: return 3; // three_param family
    }
}

inline FitResult fit_loss_curve(const std::vector<LossPoint>& points, Variant variant) {
    const Variant form = loss_form(variant);
    const int min_points = free_param_count(form);
    if (static_cast<int>(points.size()) < min_points)
        throw validation_error("fit_loss_curve: " + std::string(to_string(form)) + " needs at "
                               "least " + std::to_string(min_points) + " points, got " +
                               std::to_string(points.size()));
    for (const auto& p : points) {
        detail::require_finite(p.loss, "loss");
        if (form == Variant::five_param_nd) {
            if (!(p.n_params > 0.0) || !(p.n_tokens > 0.0))
                throw validation_error("fit_loss_curve: N and D must be positive");
        } else if (!(p.compute > 0.0)) {
            throw validation_error("fit_loss_curve: compute values must be positive");
        }
    }
    {
        std::vector<std::pair<double, double>> seen;
        for (const auto& p : points)
            seen.emplace_back(form == Variant::five_param_nd ? p.n_params : p.compute,
                              form == Variant::five_param_nd ? p.n_tokens : 0.0);
        std::sort(seen.begin(), seen.end());
        if (std::adjacent_find(seen.begin(), seen.end()) != seen.end())
            throw validation_error("fit_loss_curve: scale values must be distinct");
    }

    const std::size_t n = points.size();
    std::vector<double> y(n);
    double min_loss = points[0].loss;
    for (std::size_t i = 0; i < n; ++i) {
        y[i] = points[i].loss;
        min_loss = std::min(min_loss, y[i]);
    }

    FitResult result;
    result.variant = variant;
    result.n_points = static_cast<int>(n);

    if (form == Variant::five_param_nd) {
        std::vector<double> lnN(n), lnD(n);
        for (std::size_t i = 0; i < n; ++i) {
            lnN[i] = std::log(points[i].n_params);
            lnD[i] = std::log(points[i].n_tokens);
        }
        // params: (lnA, alpha, lnB, beta, E)
        auto model = [&](const std::vector<double>& p, std::vector<double>& r,
                         std::vector<double>* jac) {
            for (std::size_t i = 0; i < n; ++i) {
                double t = std::exp(p[0] - p[1] * lnN[i]);
                double s = std::exp(p[2] - p[3] * lnD[i]);
                r[i] = t + s + p[4] - y[i];
                if (jac) {
                    double* row = jac->data() + i * 5;
                    row[0] = t;
                    row[1] = -lnN[i] * t;
                    row[2] = s;
                    row[3] = -lnD[i] * s;
                    row[4] = 1.0;
                }
            }
        };
        double E0 = 0.9 * min_loss;
        std::vector<std::vector<double>> starts;
        for (double alpha : detail::alpha_grid()) {
            for (double beta : detail::alpha_grid()) {
                // linear least squares for (A, B) given (alpha, beta, E0)
                double s11 = 0, s12 = 0, s22 = 0, b1 = 0, b2 = 0, zbar = 0, x1bar = 0,
                       x2bar = 0;
                for (std::size_t i = 0; i < n; ++i) {
                    double x1 = std::exp(-alpha * lnN[i]);
                    double x2 = std::exp(-beta * lnD[i]);
                    double z = y[i] - E0;
                    s11 += x1 * x1;
                    s12 += x1 * x2;
                    s22 += x2 * x2;
                    b1 += x1 * z;
                    b2 += x2 * z;
                    zbar += z;
                    x1bar += x1;
                    x2bar += x2;
                }
                double det = s11 * s22 - s12 * s12;
                double A0 = 0.0, B0 = 0.0;
                if (std::fabs(det) > 1e-300) {
                    A0 = (b1 * s22 - b2 * s12) / det;
                    B0 = (s11 * b2 - s12 * b1) / det;
                }
                if (!(A0 > 0.0) || !(B0 > 0.0) || !std::isfinite(A0) || !std::isfinite(B0)) {
                    double fallback = std::max(zbar, 1e-12) / std::max(x1bar + x2bar, 1e-300);
                    A0 = B0 = std::max(fallback, 1e-12);
                }
                starts.push_back({std::log(A0), alpha, std::log(B0), beta, E0});
            }
        }
        auto best = levmar::multi_start(model, starts, n);
        NDParams params;
        if (!best.params.empty()) {
            params.A = std::exp(best.params[0]);
            params.alpha = best.params[1];
            params.B = std::exp(best.params[2]);
            params.beta = best.params[3];
            params.E = best.params[4];
        }
        result.params = params;
        result.sse = best.sse;
        result.converged = best.converged;
        result.n_restarts_used = best.starts_run;
        return result;
    }

    const bool with_E = form != Variant::two_param;
    std::vector<double> lnC(n);
    for (std::size_t i = 0; i < n; ++i) lnC[i] = std::log(points[i].compute);
    // params: (lnA, alpha[, E])
    auto model = [&](const std::vector<double>& p, std::vector<double>& r,
                     std::vector<double>* jac) {
        const std::size_t np = with_E ? 3 : 2;
        for (std::size_t i = 0; i < n; ++i) {
            double t = std::exp(p[0] - p[1] * lnC[i]);
            r[i] = t + (with_E ? p[2] : 0.0) - y[i];
            if (jac) {
                double* row = jac->data() + i * np;
                row[0] = t;
                row[1] = -lnC[i] * t;
                if (with_E) row[2] = 1.0;
            }
        }
    };
    double E0 = with_E ? 0.9 * min_loss : 0.0;
    std::vector<std::vector<double>> starts;
    for (double alpha : detail::alpha_grid()) {
        double acc = 0.0;
        std::size_t usable = 0;
        for (std::size_t i = 0; i < n; ++i) {
            double z = y[i] - E0;
            if (z > 0.0) {
                acc += std::log(z) + alpha * lnC[i];
                ++usable;
            }
        }
        double lnA0 = usable ? acc / static_cast<double>(usable) : 0.0;
        if (with_E) starts.push_back({lnA0, alpha, E0});
        else starts.push_back({lnA0, alpha});
    }
    auto best = levmar::multi_start(model, starts, n);
    PowerLawParams params;
    if (!best.params.empty()) {
        params.A = std::exp(best.params[0]);
        params.alpha = best.params[1];
        params.E = with_E ? best.params[2] : 0.0;
    }
    result.params = params;
    result.sse = best.sse;
    result.converged = best.converged;
    result.n_restarts_used = best.starts_run;
    return result;
}

// ---------------------------------------------------------------------------
// Loss-to-value sigmoid fitting (two-step second stage)
// ---------------------------------------------------------------------------

inline FitResult fit_acc_curve(const std::vector<AccPoint>& points, bool helpers,
                               bool late_only, Variant chain_variant = Variant::three_param) {
    std::vector<AccPoint> kept;
    for (const auto& p : points) {
        detail::require_finite(p.loss, "loss");
        detail::require_finite(p.value, "value");
        if (late_only &&
            static_cast<double>(p.step) < 0.5 * static_cast<double>(p.final_step))
            continue;
        kept.push_back(p);
    }
    if (kept.size() < 4)
        throw validation_error("fit_acc_curve: needs at least 4 points after filtering, got " +
                               std::to_string(kept.size()));

    std::vector<double> L, Y;
    for (const auto& p : kept) {
        L.push_back(p.loss);
        Y.push_back(p.value);
    }
    if (helpers) {
        L.push_back(0.0); // anchors the upper asymptote
        Y.push_back(1.0);
    }
    const std::size_t n = L.size();

    // params: (a, b, k, L0)
    auto model = [&](const std::vector<double>& p, std::vector<double>& r,
                     std::vector<double>* jac) {
        for (std::size_t i = 0; i < n; ++i) {
            double x = p[2] * (L[i] - p[3]);
            double s = detail::sigmoid(x);
            r[i] = p[0] * s + p[1] - Y[i];
            if (jac) {
                double* row = jac->data() + i * 4;
                double ds = s * (1.0 - s);
                row[0] = s;
                row[1] = 1.0;
                row[2] = p[0] * ds * (L[i] - p[3]);
                row[3] = -p[0] * ds * p[2];
            }
        }
    };

    std::vector<double> observed_values;
    std::vector<double> observed_losses;
    for (const auto& p : kept) {
        observed_values.push_back(p.value);
        observed_losses.push_back(p.loss);
    }
    double vmin = *std::min_element(observed_values.begin(), observed_values.end());
    double vmax = *std::max_element(observed_values.begin(), observed_values.end());
    double L0_start = detail::median(observed_losses);
    std::vector<std::vector<double>> starts;
    for (double k : {1.0, -1.0, 4.0, -4.0, 16.0, -16.0})
        starts.push_back({vmax - vmin, vmin, k, L0_start});

    auto best = levmar::multi_start(model, starts, n);
    SigmoidParams params;
    if (!best.params.empty()) {
        params.a = best.params[0];
        params.b = best.params[1];
        params.k = best.params[2];
        params.L0 = best.params[3];
        detail::canonicalize(params);
    }
    FitResult result;
    result.variant = chain_variant;
    result.params = params;
    result.sse = best.sse;
    result.n_points = static_cast<int>(kept.size());
    result.converged = best.converged;
    result.n_restarts_used = best.starts_run;
    return result;
}

// ---------------------------------------------------------------------------
// Single-step fitting
// ---------------------------------------------------------------------------

inline FitResult fit_single_step(const std::vector<AccPoint>& points, Variant variant) {
    if (!is_single_step(variant))
        throw validation_error("fit_single_step: variant must be single_step_3 or "
                               "single_step_5");
    const bool nd = variant == Variant::single_step_5;
    const int min_points = free_param_count(variant);
    if (static_cast<int>(points.size()) < min_points)
        throw validation_error("fit_single_step: " + std::string(to_string(variant)) +
                               " needs at least " + std::to_string(min_points) +
                               " points, got " + std::to_string(points.size()));
    const std::size_t n = points.size();
    std::vector<double> lnN(n), lnD(n), lnC(n), y(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto& p = points[i];
        detail::require_finite(p.value, "value");
        if (nd) {
            if (!(p.n_params > 0.0) || !(p.n_tokens > 0.0))
                throw validation_error("fit_single_step: N and D must be positive");
            lnN[i] = std::log(p.n_params);
            lnD[i] = std::log(p.n_tokens);
        } else {
            if (!(p.compute > 0.0))
                throw validation_error("fit_single_step: compute values must be positive");
            lnC[i] = std::log(p.compute);
        }
        y[i] = p.value;
    }

    double vmin = *std::min_element(y.begin(), y.end());
    double vmax = *std::max_element(y.begin(), y.end());
    double a0 = vmax - vmin;
    double b0 = vmin;

    // starting logits of the observed values against the assumed floor/span
    std::vector<double> z(n, 0.0);
    if (a0 > 1e-12) {
        for (std::size_t i = 0; i < n; ++i) {
            double p = (y[i] - b0) / a0;
            p = std::clamp(p, 0.02, 0.98);
            z[i] = std::log(p / (1.0 - p));
        }
    }

    std::vector<std::vector<double>> starts;
    auto linear_fit = [&](const std::vector<double>& x) {
        // least squares z ~ slope*x + intercept
        double sx = 0, sz = 0, sxx = 0, sxz = 0;
        for (std::size_t i = 0; i < n; ++i) {
            sx += x[i];
            sz += z[i];
            sxx += x[i] * x[i];
            sxz += x[i] * z[i];
        }
        double nn = static_cast<double>(n);
        double det = nn * sxx - sx * sx;
        double slope = 0.0, intercept = sz / nn;
        if (std::fabs(det) > 1e-300) {
            slope = (nn * sxz - sx * sz) / det;
            intercept = (sz * sxx - sx * sxz) / det;
        }
        return std::pair{slope, intercept};
    };

    if (!nd) {
        // params: (A, alpha, E, a, b)
        for (double alpha : detail::alpha_grid()) {
            std::vector<double> x(n);
            for (std::size_t i = 0; i < n; ++i) x[i] = std::exp(-alpha * lnC[i]);
            auto [A0, E0] = linear_fit(x);
            starts.push_back({A0, alpha, E0, a0, b0});
        }
        auto model = [&](const std::vector<double>& p, std::vector<double>& r,
                         std::vector<double>* jac) {
            for (std::size_t i = 0; i < n; ++i) {
                double t = std::exp(-p[1] * lnC[i]);
                double w = p[0] * t + p[2];
                double s = detail::sigmoid(w);
                r[i] = p[3] * s + p[4] - y[i];
                if (jac) {
                    double* row = jac->data() + i * 5;
                    double ds = p[3] * s * (1.0 - s);
                    row[0] = ds * t;
                    row[1] = -ds * p[0] * lnC[i] * t;
                    row[2] = ds;
                    row[3] = s;
                    row[4] = 1.0;
                }
            }
        };
        auto best = levmar::multi_start(model, starts, n);
        SingleStepComputeParams params;
        if (!best.params.empty()) {
            params.A = best.params[0];
            params.alpha = best.params[1];
            params.E = best.params[2];
            params.a = best.params[3];
            params.b = best.params[4];
            detail::canonicalize(params);
        }
        FitResult result;
        result.variant = variant;
        result.params = params;
        result.sse = best.sse;
        result.n_points = static_cast<int>(n);
        result.converged = best.converged;
        result.n_restarts_used = best.starts_run;
        return result;
    }

    // params: (A, alpha, B, beta, E, a, b)
    for (double alpha : detail::alpha_grid()) {
        for (double beta : detail::alpha_grid()) {
            // least squares z ~ A*x1 + B*x2 + E
            double s11 = 0, s12 = 0, s22 = 0, s1 = 0, s2 = 0, b1 = 0, b2 = 0, sz = 0;
            std::vector<double> x1(n), x2(n);
            for (std::size_t i = 0; i < n; ++i) {
                x1[i] = std::exp(-alpha * lnN[i]);
                x2[i] = std::exp(-beta * lnD[i]);
                s11 += x1[i] * x1[i];
                s12 += x1[i] * x2[i];
                s22 += x2[i] * x2[i];
                s1 += x1[i];
                s2 += x2[i];
                b1 += x1[i] * z[i];
                b2 += x2[i] * z[i];
                sz += z[i];
            }
            double nn = static_cast<double>(n);
            // 3x3 normal equations via levmar's solver
            std::vector<double> M = {s11, s12, s1, s12, s22, s2, s1, s2, nn};
            std::vector<double> rhs = {b1, b2, sz};
            double A0 = 0.0, B0 = 0.0, E0 = sz / nn;
            if (levmar::detail::solve_inplace(M, rhs, 3)) {
                A0 = rhs[0];
                B0 = rhs[1];
                E0 = rhs[2];
            }
            starts.push_back({A0, alpha, B0, beta, E0, a0, b0});
        }
    }
    auto model = [&](const std::vector<double>& p, std::vector<double>& r,
                     std::vector<double>* jac) {
        for (std::size_t i = 0; i < n; ++i) {
            double t = std::exp(-p[1] * lnN[i]);
            double u = std::exp(-p[3] * lnD[i]);
            double w = p[0] * t + p[2] * u + p[4];
            double s = detail::sigmoid(w);
            r[i] = p[5] * s + p[6] - y[i];
            if (jac) {
                double* row = jac->data() + i * 7;
                double ds = p[5] * s * (1.0 - s);
                row[0] = ds * t;
                row[1] = -ds * p[0] * lnN[i] * t;
                row[2] = ds * u;
                row[3] = -ds * p[2] * lnD[i] * u;
                row[4] = ds;
                row[5] = s;
                row[6] = 1.0;
            }
        }
    };
    auto best = levmar::multi_start(model, starts, n);
    SingleStepNDParams params;
    if (!best.params.empty()) {
        params.A = best.params[0];
        params.alpha = best.params[1];
        params.B = best.params[2];
        params.beta = best.params[3];
        params.E = best.params[4];
        params.a = best.params[5];
        params.b = best.params[6];
        detail::canonicalize(params);
    }
    FitResult result;
    result.variant = variant;
    result.params = params;
    result.sse = best.sse;
    result.n_points = static_cast<int>(n);
    result.converged = best.converged;
    result.n_restarts_used = best.starts_run;
    return result;
}

// ---------------------------------------------------------------------------
// Evaluation and prediction
// ---------------------------------------------------------------------------

inline double eval_power_law(const PowerLawParams& p, double compute) {
    return p.A * std::pow(compute, -p.alpha) + p.E;
}

inline double eval_nd_law(const NDParams& p, double n_params, double n_tokens) {
    return p.A * std::pow(n_params, -p.alpha) + p.B * std::pow(n_tokens, -p.beta) + p.E;
}

inline double eval_sigmoid(const SigmoidParams& p, double loss) {
    return p.a * detail::sigmoid(p.k * (loss - p.L0)) + p.b;
}

inline double eval_single_step(const SingleStepComputeParams& p, double compute) {
    return p.a * detail::sigmoid(p.A * std::pow(compute, -p.alpha) + p.E) + p.b;
}

inline double eval_single_step(const SingleStepNDParams& p, double n_params, double n_tokens) {
    return p.a * detail::sigmoid(p.A * std::pow(n_params, -p.alpha) +
                                 p.B * std::pow(n_tokens, -p.beta) + p.E) +
           p.b;
}

// A fitted prediction route: loss stage + sigmoid stage, or one merged stage.
struct FitChain {
    Variant variant = Variant::three_param;
    FitResult step1;
    std::optional<FitResult> step2;

    bool converged() const {
        return step1.converged && (!step2 || step2->converged);
    }
};

inline double predict_at_target(const FitChain& chain, const TargetScale& target,
                                bool best_effort = false) {
    if (!chain.converged() && !best_effort)
        throw validation_error("predict_at_target: fit did not converge (pass best_effort to "
                               "evaluate anyway)");
    double value = 0.0;
    if (is_single_step(chain.variant)) {
        if (chain.variant == Variant::single_step_5) {
            value = eval_single_step(std::get<SingleStepNDParams>(chain.step1.params),
                                     target.n_params, target.n_tokens);
        } else {
            value = eval_single_step(std::get<SingleStepComputeParams>(chain.step1.params),
                                     target.compute);
        }
    } else {
        double loss = 0.0;
        if (chain.variant == Variant::five_param_nd) {
            loss = eval_nd_law(std::get<NDParams>(chain.step1.params), target.n_params,
                               target.n_tokens);
        } else {
            loss = eval_power_law(std::get<PowerLawParams>(chain.step1.params), target.compute);
        }
        value = eval_sigmoid(std::get<SigmoidParams>(chain.step2->params), loss);
    }
    return std::clamp(value, 0.0, 1.0);
}

// Fits one variant end to end on one recipe's observations.
inline FitChain fit_chain(const std::vector<LossPoint>& final_losses,
                          const std::vector<AccPoint>& checkpoints, Variant variant) {
    FitChain chain;
    chain.variant = variant;
    if (is_single_step(variant)) {
        chain.step1 = fit_single_step(checkpoints, variant);
        return chain;
    }
    chain.step1 = fit_loss_curve(final_losses, variant);
    chain.step2 = fit_acc_curve(checkpoints, uses_helper(variant), uses_late_filter(variant),
                                variant);
    return chain;
}

// ---------------------------------------------------------------------------
// Ladder subsets
// ---------------------------------------------------------------------------

struct SizeSubset {
    std::string descriptor; // "prefix:k" = smallest k sizes, "suffix:k" = sizes k..n
    std::vector<std::string> labels;
};

// Prefixes {s1..sk} for 3 <= k <= n grow the fit upward from the smallest
// scales; suffixes {sk..sn} for 2 <= k <= n-3 drop potentially noisy small
// models. Ladders shorter than 3 yield no subsets.
inline std::vector<SizeSubset> size_subsets(const std::vector<std::string>& ladder) {
    std::vector<SizeSubset> out;
    const int n = static_cast<int>(ladder.size());
    for (int k = 3; k <= n; ++k) {
        SizeSubset s;
        s.descriptor = "prefix:" + std::to_string(k);
        s.labels.assign(ladder.begin(), ladder.begin() + k);
        out.push_back(std::move(s));
    }
    for (int k = 2; k <= n - 3; ++k) {
        SizeSubset s;
        s.descriptor = "suffix:" + std::to_string(k);
        s.labels.assign(ladder.begin() + (k - 1), ladder.end());
        out.push_back(std::move(s));
    }
    return out;
}

} // namespace rankcast
