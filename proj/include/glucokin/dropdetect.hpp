#pragma once

#include <cmath>
#include <optional>
#include <stdexcept>
#include <vector>

#include "glucokin/frame.hpp"
#include "glucokin/stats.hpp"

namespace glucokin::dropdetect {

struct DropDetectorConfig {
    double sigma1_sq = 0.0;   // pre-reaction pixel variance; <= 0 means estimate from calibration
    double p_fa = 0.01;       // nominal false-alarm probability
    int min_consecutive = 3;  // consecutive H1 decisions required

    void check() const {
        if (!(p_fa > 0.0 && p_fa < 1.0))
            throw std::invalid_argument("DropDetectorConfig: p_fa must be in (0,1)");
        if (min_consecutive < 1)
            throw std::invalid_argument("DropDetectorConfig: min_consecutive must be >= 1");
    }
};

struct DropDecision {
    std::optional<std::uint32_t> n_d;
    std::vector<double> statistic_trace;
    double threshold = 0.0;  // delta'
};

/// Variance test statistic: sum of squared deviations of the mean-adjusted
/// pixel vector, T = sum_l (x_l - mean)^2.
inline double test_statistic(const PixelVector& x) {
    if (x.size() < 2) throw std::invalid_argument("test_statistic: need L >= 2");
    const double m = stats::mean(x);
    double t = 0.0;
    for (double v : x) t += (v - m) * (v - m);
    return t;
}

/// Detection threshold delta'. Under H0, T/sigma1^2 ~ chi^2_L, approximated
/// by N(L, 2L) for large L, so delta' = sigma1^2 * (L + sqrt(2L) * Q^{-1}(p_fa)).
inline double threshold(const DropDetectorConfig& cfg, std::size_t L) {
    cfg.check();
    if (!(cfg.sigma1_sq > 0.0)) throw std::invalid_argument("threshold: sigma1_sq must be > 0");
    if (L < 30) throw std::invalid_argument("threshold: L >= 30 required for Gaussian approximation");
    const double Ld = static_cast<double>(L);
    return cfg.sigma1_sq * (Ld + std::sqrt(2.0 * Ld) * stats::normal_upper_quantile(cfg.p_fa));
}

/// Pooled sample variance of the mean-adjusted calibration frames; the
/// default sigma1^2 estimate when the config leaves it unset.
inline double estimate_sigma1_sq(const std::vector<Frame>& calibration_frames) {
    if (calibration_frames.empty())
        throw std::invalid_argument("estimate_sigma1_sq: no calibration frames");
    double ss = 0.0;
    std::size_t dof = 0;
    for (const Frame& f : calibration_frames) {
        if (f.size() < 2) throw std::invalid_argument("estimate_sigma1_sq: frame too small");
        const double m = stats::mean(f.pixels);
        for (double p : f.pixels) ss += (p - m) * (p - m);
        dof += f.size() - 1;
    }
    // Normalizing by the calibration mean couples each calibration frame to
    // the divisor it helped estimate: their apparent noise variance shrinks by
    // (1 - 1/N) while later frames, whose noise is independent of the divisor,
    // are inflated by (1 + 1/N). Rescale so sigma1 describes reaction frames.
    const double n = static_cast<double>(calibration_frames.size());
    const double correction = n > 1.0 ? (n + 1.0) / (n - 1.0) : 2.0;
    return correction * ss / static_cast<double>(dof);
}

/// Scan pre-processed frames in order; n_D is the first index of a run of
/// min_consecutive frames with T > delta'.
inline DropDecision detect(const std::vector<Frame>& frames, const DropDetectorConfig& cfg) {
    if (frames.empty()) throw std::invalid_argument("detect: empty frame sequence");
    DropDecision out;
    out.threshold = threshold(cfg, frames.front().size());
    out.statistic_trace.reserve(frames.size());
    int run = 0;
    for (std::size_t n = 0; n < frames.size(); ++n) {
        const double t = test_statistic(frames[n].pixels);
        out.statistic_trace.push_back(t);
        if (t > out.threshold) {
            ++run;
            if (run >= cfg.min_consecutive && !out.n_d)
                out.n_d = static_cast<std::uint32_t>(n + 1 - cfg.min_consecutive);
        } else {
            run = 0;
        }
    }
    return out;
}

}  // namespace glucokin::dropdetect
