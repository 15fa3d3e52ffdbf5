#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <vector>

#include "glucokin/stats.hpp"

// Kinetic model of the reaction, drop-relative time m = n - n_D:
//
//   r(m) = (r_D - r_C) * exp(m * tau(r_C)) + r_C,   tau(r_C) = dtau * r_C + tau0
//
// The rate tau is negative over the valid remission range (dtau > 0,
// tau0 < 0), so the exponential decays in m; steeper for low r_C, i.e.,
// high glucose.

namespace glucokin::kinetics {

struct KineticModelParams {
    double dtau = 7.6e-4;   // per (percent * frame), > 0
    double tau0 = -0.0842;  // per frame, < 0
    double sigma_v_sq = 0.0625;  // measurement noise variance seed

    double rate(double r_c) const { return dtau * r_c + tau0; }
    void check() const {
        if (!(dtau > 0.0) || !(tau0 < 0.0))
            throw std::invalid_argument("KineticModelParams: require dtau > 0 and tau0 < 0");
    }
};

namespace detail {
inline double clamped_exp(double a, bool* overflow = nullptr) {
    if (a > 60.0 || a < -60.0) {
        if (overflow) *overflow = true;
        a = std::clamp(a, -60.0, 60.0);
    }
    return std::exp(a);
}
}  // namespace detail

/// Noise-free kinetic model value at drop-relative frame m.
inline double model_eval(double m, double r_d, double r_c, const KineticModelParams& p) {
    if (m < 0.0) throw std::invalid_argument("model_eval: m must be >= 0");
    return (r_d - r_c) * detail::clamped_exp(m * p.rate(r_c)) + r_c;
}

/// d model_eval / d r_C at drop-relative frame m.
inline double model_jacobian(double m, double r_d, double r_c, const KineticModelParams& p) {
    const double e = detail::clamped_exp(m * p.rate(r_c));
    return 1.0 - e * (1.0 - r_d * p.dtau * m + r_c * p.dtau * m);
}

struct ExponentialFit {
    double r_d = 0.0;
    double r_c = 0.0;
    double rate = 0.0;  // free decay rate, negative
    double residual_rms = 0.0;
    bool converged = false;
    bool degenerate = false;  // constant trace, rate unidentifiable
    int iterations = 0;
};

/// Nonlinear least squares of r(m) = (r_D - r_C) e^{m*rate} + r_C over the
/// post-drop samples, Levenberg-damped Gauss-Newton with analytic Jacobian.
/// Deterministic: initialisation is first sample, last sample, and a
/// log-linear rate fit.
inline ExponentialFit fit_exponential(const std::vector<double>& post_drop_samples,
                                      int max_iters = 200, double tol = 1e-12) {
    const std::size_t n = post_drop_samples.size();
    if (n < 10) throw std::invalid_argument("fit_exponential: need >= 10 post-drop samples");
    ExponentialFit fit;

    const double var = stats::sample_variance(post_drop_samples);
    if (var < 1e-12) {
        fit.degenerate = true;
        fit.r_d = fit.r_c = stats::mean(post_drop_samples);
        fit.rate = 0.0;
        return fit;
    }

    double r_d = post_drop_samples.front();
    double r_c = post_drop_samples.back();
    // log-linear rate initialisation on the decaying part
    double rate = -0.05;
    {
        const double guess = r_c - 1e-3 * std::abs(r_d - r_c) - 1e-9;
        double sx = 0, sy = 0, sxx = 0, sxy = 0;
        std::size_t cnt = 0;
        for (std::size_t i = 0; i < n; ++i) {
            const double d = post_drop_samples[i] - guess;
            if (d > 0.0 && r_d > guess) {
                const double y = std::log(d);
                const double x = static_cast<double>(i);
                sx += x; sy += y; sxx += x * x; sxy += x * y;
                ++cnt;
            }
        }
        if (cnt >= 2) {
            const double denom = static_cast<double>(cnt) * sxx - sx * sx;
            if (std::abs(denom) > 1e-12) {
                const double slope = (static_cast<double>(cnt) * sxy - sx * sy) / denom;
                if (slope < -1e-6) rate = slope;
            }
        }
    }

    auto sse = [&](double a, double b, double t) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double e = (a - b) * detail::clamped_exp(t * static_cast<double>(i)) + b -
                             post_drop_samples[i];
            s += e * e;
        }
        return s;
    };

    double lambda = 1e-3;
    double cost = sse(r_d, r_c, rate);
    for (fit.iterations = 0; fit.iterations < max_iters; ++fit.iterations) {
        // normal equations J'J + lambda diag, J'e for theta = (r_d, r_c, rate)
        double jtj[3][3] = {};
        double jte[3] = {};
        for (std::size_t i = 0; i < n; ++i) {
            const double m = static_cast<double>(i);
            const double ex = detail::clamped_exp(rate * m);
            const double resid = (r_d - r_c) * ex + r_c - post_drop_samples[i];
            const double j0 = ex;
            const double j1 = 1.0 - ex;
            const double j2 = (r_d - r_c) * m * ex;
            const double j[3] = {j0, j1, j2};
            for (int a = 0; a < 3; ++a) {
                jte[a] += j[a] * resid;
                for (int b = 0; b < 3; ++b) jtj[a][b] += j[a] * j[b];
            }
        }
        bool improved = false;
        for (int attempt = 0; attempt < 12 && !improved; ++attempt) {
            double A[3][3];
            for (int a = 0; a < 3; ++a)
                for (int b = 0; b < 3; ++b)
                    A[a][b] = jtj[a][b] + (a == b ? lambda * (1.0 + jtj[a][a]) : 0.0);
            // solve A d = jte by Gaussian elimination
            double d[3] = {jte[0], jte[1], jte[2]};
            double M[3][4];
            for (int a = 0; a < 3; ++a) {
                for (int b = 0; b < 3; ++b) M[a][b] = A[a][b];
                M[a][3] = d[a];
            }
            bool singular = false;
            for (int col = 0; col < 3 && !singular; ++col) {
                int piv = col;
                for (int rrow = col + 1; rrow < 3; ++rrow)
                    if (std::abs(M[rrow][col]) > std::abs(M[piv][col])) piv = rrow;
                if (std::abs(M[piv][col]) < 1e-15) { singular = true; break; }
                std::swap(M[piv], M[col]);
                for (int rrow = 0; rrow < 3; ++rrow) {
                    if (rrow == col) continue;
                    const double f = M[rrow][col] / M[col][col];
                    for (int b = col; b < 4; ++b) M[rrow][b] -= f * M[col][b];
                }
            }
            if (singular) { lambda *= 10.0; continue; }
            for (int a = 0; a < 3; ++a) d[a] = M[a][3] / M[a][a];

            const double nr_d = r_d - d[0];
            const double nr_c = r_c - d[1];
            double nrate = rate - d[2];
            if (nrate > -1e-9) nrate = -1e-9;  // keep the decaying sign
            const double ncost = sse(nr_d, nr_c, nrate);
            if (ncost < cost) {
                const double gain = cost - ncost;
                r_d = nr_d; r_c = nr_c; rate = nrate;
                cost = ncost;
                lambda = std::max(lambda * 0.3, 1e-12);
                improved = true;
                if (gain < tol * (1.0 + cost)) {
                    fit.converged = true;
                }
            } else {
                lambda *= 10.0;
            }
        }
        if (!improved || fit.converged) {
            fit.converged = fit.converged || !improved;
            break;
        }
    }
    fit.r_d = r_d;
    fit.r_c = r_c;
    fit.rate = rate;
    fit.residual_rms = std::sqrt(cost / static_cast<double>(n));
    return fit;
}

/// OLS line tau = dtau * r_C + tau0 over (r_C, rate) pairs; the residual
/// variance seeds sigma_v^2.
inline KineticModelParams regress_tau(const std::vector<double>& r_c_values,
                                      const std::vector<double>& tau_values) {
    const std::size_t n = r_c_values.size();
    if (n < 2 || tau_values.size() != n)
        throw std::invalid_argument("regress_tau: need >= 2 paired samples");
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < n; ++i) {
        sx += r_c_values[i];
        sy += tau_values[i];
        sxx += r_c_values[i] * r_c_values[i];
        sxy += r_c_values[i] * tau_values[i];
    }
    const double denom = static_cast<double>(n) * sxx - sx * sx;
    if (std::abs(denom) < 1e-12)
        throw std::invalid_argument("regress_tau: all r_C values identical (singular design)");
    KineticModelParams p;
    p.dtau = (static_cast<double>(n) * sxy - sx * sy) / denom;
    p.tau0 = (sy - p.dtau * sx) / static_cast<double>(n);
    double ss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double e = tau_values[i] - (p.dtau * r_c_values[i] + p.tau0);
        ss += e * e;
    }
    p.sigma_v_sq = n > 2 ? ss / static_cast<double>(n - 2) : 0.0;
    return p;
}

enum class ConvergenceMethod { Standard, Ekf };

struct ConvergenceDecision {
    ConvergenceMethod method = ConvergenceMethod::Standard;
    std::uint32_t n_c = 0;    // frame index of the decision
    double r_c_hat = 0.0;
};

/// Baseline slope-threshold criterion: the least-squares slope over the most
/// recent window (up to W samples) must stay below T_slope for W consecutive
/// frames after the drop. r_C_hat is the remission at n_C.
inline std::optional<ConvergenceDecision> standard_convergence(
    const std::vector<double>& r_hat, std::uint32_t n_d, double t_slope = 1e-2,
    std::uint32_t window = 15) {
    if (!(t_slope > 0.0)) throw std::invalid_argument("standard_convergence: T_slope must be > 0");
    if (window < 2) throw std::invalid_argument("standard_convergence: W must be >= 2");
    std::uint32_t run = 0;
    for (std::size_t n = n_d + 1; n < r_hat.size(); ++n) {
        const std::size_t w = std::min<std::size_t>(window, n - n_d + 1);
        double sx = 0, sy = 0, sxx = 0, sxy = 0;
        for (std::size_t i = n + 1 - w; i <= n; ++i) {
            const double x = static_cast<double>(i);
            sx += x; sy += r_hat[i]; sxx += x * x; sxy += x * r_hat[i];
        }
        const double denom = static_cast<double>(w) * sxx - sx * sx;
        const double slope = (static_cast<double>(w) * sxy - sx * sy) / denom;
        if (std::abs(slope) < t_slope) {
            ++run;
            if (run >= window) {
                ConvergenceDecision d;
                d.method = ConvergenceMethod::Standard;
                d.n_c = static_cast<std::uint32_t>(n);
                d.r_c_hat = r_hat[n];
                return d;
            }
        } else {
            run = 0;
        }
    }
    return std::nullopt;
}

struct EkfState {
    double r_c_hat = 0.0;
    double p = 25.0;       // state variance
    double q = 1e-4;       // process noise variance
    double r = 0.25;       // measurement noise variance
    std::uint32_t n = 0;   // current absolute frame
    bool overflow_flag = false;
};

/// One EKF predict + update with the measurement r_hat at absolute frame n.
/// The state is static (a = 1); the observation model is the kinetic curve
/// at drop-relative time and its Jacobian H supplies the gain.
inline EkfState ekf_step(EkfState state, double measurement, double r_d, std::uint32_t n,
                         std::uint32_t n_d, const KineticModelParams& params) {
    if (n <= n_d) throw std::invalid_argument("ekf_step: n must be > n_D");
    if (!(state.r > 0.0)) throw std::invalid_argument("ekf_step: R must be > 0");
    const double m = static_cast<double>(n - n_d);

    state.p += state.q;  // predict; r_c_hat unchanged
    bool overflow = false;
    const double e = detail::clamped_exp(m * params.rate(state.r_c_hat), &overflow);
    const double predicted = (r_d - state.r_c_hat) * e + state.r_c_hat;
    const double innovation = measurement - predicted;
    const double h = 1.0 - e * (1.0 - r_d * params.dtau * m + state.r_c_hat * params.dtau * m);
    const double k = state.p * h / (h * h * state.p + state.r);
    state.r_c_hat += k * innovation;
    state.p *= (1.0 - k * h);
    state.n = n;
    state.overflow_flag = state.overflow_flag || overflow;
    return state;
}

/// Declare convergence once the state has stayed inside a band of width
/// tol_state over the last W steps (max - min of the trailing W+1 states).
/// A band tolerates per-step measurement jitter that a per-step rule would
/// conflate with genuine drift; the estimate is the last state of the run.
inline std::optional<ConvergenceDecision> ekf_convergence(const std::vector<EkfState>& history,
                                                          double tol_state,
                                                          std::uint32_t window = 15) {
    if (!(tol_state > 0.0)) throw std::invalid_argument("ekf_convergence: tol_state must be > 0");
    for (std::size_t i = window; i < history.size(); ++i) {
        double lo = history[i].r_c_hat, hi = lo;
        for (std::size_t j = i - window; j <= i; ++j) {
            lo = std::min(lo, history[j].r_c_hat);
            hi = std::max(hi, history[j].r_c_hat);
        }
        if (hi - lo < tol_state) {
            ConvergenceDecision d;
            d.method = ConvergenceMethod::Ekf;
            d.n_c = history[i].n;
            d.r_c_hat = history[i].r_c_hat;
            return d;
        }
    }
    return std::nullopt;
}

}  // namespace glucokin::kinetics
