#pragma once

// Damped least squares (Levenberg-Marquardt) with a fixed multi-start grid.
// Everything is deterministic: no randomness, fixed iteration order, ties
// between starts broken by earlier grid position.

#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

namespace rankcast::levmar {

struct Options {
    int max_iterations = 2000;   // linear-solve attempts per start
    double rel_sse_tol = 1e-10;  // accepted-step relative SSE change
    double lambda_init = 1e-3;
    double lambda_up = 3.0;
    double lambda_down = 3.0;
    double lambda_max = 1e14;    // no progress at this damping = stalled
};

struct Outcome {
    std::vector<double> params;
    double sse = std::numeric_limits<double>::infinity();
    bool converged = false;
    int iterations = 0;
    int starts_run = 0; // filled by multi_start
};

namespace detail {

// Gaussian elimination with partial pivoting; A is row-major n x n.
// Returns false on a (numerically) singular system.
inline bool solve_inplace(std::vector<double>& A, std::vector<double>& b, std::size_t n) {
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t pivot = col;
        double best = std::fabs(A[col * n + col]);
        for (std::size_t row = col + 1; row < n; ++row) {
            double v = std::fabs(A[row * n + col]);
            if (v > best) {
                best = v;
                pivot = row;
            }
        }
        if (!(best > 0.0) || !std::isfinite(best)) return false;
        if (pivot != col) {
            for (std::size_t j = 0; j < n; ++j) std::swap(A[col * n + j], A[pivot * n + j]);
            std::swap(b[col], b[pivot]);
        }
        double d = A[col * n + col];
        for (std::size_t row = col + 1; row < n; ++row) {
            double f = A[row * n + col] / d;
            if (f == 0.0) continue;
            for (std::size_t j = col; j < n; ++j) A[row * n + j] -= f * A[col * n + j];
            b[row] -= f * b[col];
        }
    }
    for (std::size_t i = n; i-- > 0;) {
        double s = b[i];
        for (std::size_t j = i + 1; j < n; ++j) s -= A[i * n + j] * b[j];
        b[i] = s / A[i * n + i];
        if (!std::isfinite(b[i])) return false;
    }
    return true;
}

inline double sum_squares(const std::vector<double>& r) {
    double s = 0.0;
    for (double v : r) s += v * v;
    return s;
}

inline bool all_finite(const std::vector<double>& v) {
    for (double x : v) {
        if (!std::isfinite(x)) return false;
    }
    return true;
}

} // namespace detail

// ModelFn: void(const std::vector<double>& params, std::vector<double>& residuals,
//               std::vector<double>* jacobian)
// The Jacobian, when requested, is row-major n_residuals x n_params.
template <typename ModelFn>
Outcome minimize(ModelFn&& model, std::vector<double> params, std::size_t n_residuals,
                 const Options& opt = {}) {
    const std::size_t n = params.size();
    Outcome out;
    out.params = params;

    std::vector<double> resid(n_residuals), jac(n_residuals * n);
    model(params, resid, &jac);
    if (!detail::all_finite(resid)) return out; // invalid start: sse stays infinite
    double sse = detail::sum_squares(resid);
    out.sse = sse;
    if (sse == 0.0) {
        out.converged = true;
        return out;
    }

    double lambda = opt.lambda_init;
    std::vector<double> jtj(n * n), step(n), trial(n), trial_resid(n_residuals);
    bool jac_fresh = true;

    while (out.iterations < opt.max_iterations) {
        ++out.iterations;
        if (!jac_fresh) {
            model(params, resid, &jac);
            jac_fresh = true;
        }

        // normal equations with Marquardt diagonal scaling
        double max_diag = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = i; j < n; ++j) {
                double s = 0.0;
                for (std::size_t r = 0; r < n_residuals; ++r)
                    s += jac[r * n + i] * jac[r * n + j];
                jtj[i * n + j] = s;
                jtj[j * n + i] = s;
            }
            max_diag = std::max(max_diag, jtj[i * n + i]);
        }
        std::vector<double> lhs = jtj;
        for (std::size_t i = 0; i < n; ++i) {
            double d = jtj[i * n + i];
            if (d <= 0.0) d = max_diag > 0.0 ? 1e-12 * max_diag : 1e-12;
            lhs[i * n + i] += lambda * d;
        }
        for (std::size_t i = 0; i < n; ++i) {
            double g = 0.0;
            for (std::size_t r = 0; r < n_residuals; ++r) g += jac[r * n + i] * resid[r];
            step[i] = -g;
        }

        bool ok = detail::solve_inplace(lhs, step, n);
        double trial_sse = std::numeric_limits<double>::infinity();
        if (ok) {
            for (std::size_t i = 0; i < n; ++i) trial[i] = params[i] + step[i];
            model(trial, trial_resid, nullptr);
            if (detail::all_finite(trial_resid)) trial_sse = detail::sum_squares(trial_resid);
        }

        if (trial_sse < sse) {
            double rel = (sse - trial_sse) / sse;
            params = trial;
            resid = trial_resid;
            sse = trial_sse;
            jac_fresh = false;
            lambda = std::max(lambda / opt.lambda_down, 1e-12);
            out.params = params;
            out.sse = sse;
            if (rel < opt.rel_sse_tol || sse == 0.0) {
                out.converged = true;
                return out;
            }
        } else {
            lambda *= opt.lambda_up;
            if (lambda > opt.lambda_max) {
                // no step at maximal damping improves the fit: the SSE change
                // is zero, which satisfies the convergence tolerance
                out.converged = true;
                return out;
            }
        }
    }
    return out; // iteration cap: not converged
}

// Runs minimize from every start; the lowest final SSE wins and ties keep the
// earlier start.
template <typename ModelFn>
Outcome multi_start(ModelFn&& model, const std::vector<std::vector<double>>& starts,
                    std::size_t n_residuals, const Options& opt = {}) {
    Outcome best;
    bool have_best = false;
    int run = 0;
    for (const auto& s : starts) {
        Outcome o = minimize(model, s, n_residuals, opt);
        ++run;
        if (!have_best || o.sse < best.sse) {
            best = o;
            have_best = true;
        }
        if (best.converged && best.sse == 0.0) break; // exact fit cannot be beaten
    }
    if (!have_best) best.params.clear();
    best.starts_run = run;
    return best;
}

} // namespace rankcast::levmar
