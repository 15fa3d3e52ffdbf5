#pragma once

#include <array>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "glucokin/stats.hpp"

namespace glucokin::metrics {

/// Mean remission coefficient of variation over glucose levels, percent.
/// Per level: sample std / sample mean * 100.
inline double cv_remission(const std::vector<std::vector<double>>& groups) {
    if (groups.empty()) throw std::invalid_argument("cv_remission: no groups");
    double acc = 0.0;
    for (const auto& g : groups) {
        if (g.size() < 2) throw std::invalid_argument("cv_remission: singleton group");
        const double m = stats::mean(g);
        if (!(m > 0.0)) throw std::invalid_argument("cv_remission: non-positive group mean");
        acc += 100.0 * std::sqrt(stats::sample_variance(g)) / m;
    }
    return acc / static_cast<double>(groups.size());
}

enum class CegZone { A, B, C, D, E };

inline char zone_letter(CegZone z) { return static_cast<char>('A' + static_cast<int>(z)); }

/// Clarke Error Grid zone of an (actual, estimated) glucose pair, mg/dl.
/// Region tests follow the original published grid geometry:
///   A: within 20% of the reference, or both readings below 70
///   E: opposite-extreme confusion (ref <= 70 read >= 180, or ref >= 180 read <= 70)
///   C: overcorrection regions (ref in [70,290] with read >= ref+110;
///      ref in [130,180] with read <= (7/5)ref - 182)
///   D: dangerous failure to detect (ref >= 240 with read in [70,180];
///      ref <= 175/3 with read in [70,180];
///      ref in (175/3, 70) with read >= (6/5)ref)
///   B: everything else
inline CegZone ceg_zone(double g_true, double g_est) {
    if (g_true < 0.0 || g_est < 0.0) throw std::invalid_argument("ceg_zone: negative glucose");
    const double g = g_true, e = g_est;
    if ((g <= 70.0 && e <= 70.0) || std::abs(e - g) <= 0.2 * g) return CegZone::A;
    if ((g >= 180.0 && e <= 70.0) || (g <= 70.0 && e >= 180.0)) return CegZone::E;
    if ((g >= 70.0 && g <= 290.0 && e >= g + 110.0) ||
        (g >= 130.0 && g <= 180.0 && e <= (7.0 / 5.0) * g - 182.0))
        return CegZone::C;
    if ((g >= 240.0 && e >= 70.0 && e <= 180.0) ||
        (g <= 175.0 / 3.0 && e >= 70.0 && e <= 180.0) ||
        (g > 175.0 / 3.0 && g < 70.0 && e >= (6.0 / 5.0) * g && e <= 180.0))
        return CegZone::D;
    return CegZone::B;
}

/// Smooth gMAD penalty weights. The severity factor ramps up through a
/// logistic transition (scale 10 mg/dl) centred on the branch boundary:
/// overestimated hypoglycaemia approaches 1.5, underestimated
/// hyperglycaemia approaches 1.25, everything else stays at 1. Weights are
/// therefore always >= 1.
struct GmadWeights {
    double hypo_boundary = 85.0;
    double hyper_boundary = 155.0;
    double sigmoid_scale = 10.0;
    double hypo_amplitude = 0.5;    // peak weight 1.5
    double hyper_amplitude = 0.25;  // peak weight 1.25

    static double sigmoid(double u) { return 1.0 / (1.0 + std::exp(-u)); }

    double operator()(double g_true, double g_est) const {
        if (g_true <= hypo_boundary && g_est >= g_true) {
            const double below = sigmoid((hypo_boundary - g_true) / sigmoid_scale);
            const double over = sigmoid((g_est - hypo_boundary) / sigmoid_scale);
            return 1.0 + hypo_amplitude * below * over;
        }
        if (g_true >= hyper_boundary && g_est <= g_true) {
            const double above = sigmoid((g_true - hyper_boundary) / sigmoid_scale);
            const double under = sigmoid((hyper_boundary - g_est) / sigmoid_scale);
            return 1.0 + hyper_amplitude * above * under;
        }
        return 1.0;
    }
};

/// Glucose-specific MAD: |g - g_hat| scaled by the clinical severity weight.
inline double gmad(const std::vector<std::pair<double, double>>& pairs,
                   const GmadWeights& w = {}) {
    if (pairs.empty()) throw std::invalid_argument("gmad: empty input");
    double acc = 0.0;
    for (const auto& [g, e] : pairs) acc += std::abs(g - e) * w(g, e);
    return acc / static_cast<double>(pairs.size());
}

struct IsoResult {
    bool pass = true;
    std::vector<bool> per_pair;
};

/// ISO accuracy limits: +-15 mg/dl for references <= 75, +-20% above.
inline IsoResult iso_check(const std::vector<std::pair<double, double>>& pairs) {
    IsoResult out;
    out.per_pair.reserve(pairs.size());
    for (const auto& [g, e] : pairs) {
        const bool ok = g <= 75.0 ? std::abs(g - e) <= 15.0 : std::abs(g - e) / g <= 0.20;
        out.per_pair.push_back(ok);
        out.pass = out.pass && ok;
    }
    return out;
}

struct EvaluationReport {
    double cv_r = 0.0;
    bool cv_available = false;
    double gmad_low = 0.0;   // g <= 75 mg/dl
    double gmad_high = 0.0;  // g > 75 mg/dl
    std::array<std::size_t, 5> ceg_counts{};  // zones A..E
    double iso_pass_rate = 0.0;
    bool iso_pass = false;      // all pairs within limits
    bool ceg_compliant = false; // >= 95% zone A, <= 5% zone B, none beyond
    std::size_t n_evaluated = 0;
};

/// Aggregate scores over a dataset of (g_true, g_est) pairs plus per-level
/// remission estimate groups.
inline EvaluationReport evaluate(const std::vector<std::pair<double, double>>& glucose_pairs,
                                 const std::vector<std::vector<double>>& remission_groups,
                                 const GmadWeights& w = {}) {
    EvaluationReport rep;
    rep.n_evaluated = glucose_pairs.size();
    std::vector<std::pair<double, double>> low, high;
    for (const auto& p : glucose_pairs) {
        rep.ceg_counts[static_cast<std::size_t>(ceg_zone(p.first, p.second))]++;
        (p.first <= 75.0 ? low : high).push_back(p);
    }
    if (!low.empty()) rep.gmad_low = gmad(low, w);
    if (!high.empty()) rep.gmad_high = gmad(high, w);

    std::vector<std::vector<double>> usable;
    for (const auto& g : remission_groups)
        if (g.size() >= 2) usable.push_back(g);
    if (!usable.empty() && usable.size() == remission_groups.size()) {
        rep.cv_r = cv_remission(usable);
        rep.cv_available = true;
    }

    const IsoResult iso = iso_check(glucose_pairs);
    rep.iso_pass = iso.pass;
    std::size_t ok = 0;
    for (bool b : iso.per_pair) ok += b ? 1 : 0;
    rep.iso_pass_rate = glucose_pairs.empty()
                            ? 0.0
                            : static_cast<double>(ok) / static_cast<double>(glucose_pairs.size());

    if (rep.n_evaluated > 0) {
        const double frac_a = static_cast<double>(rep.ceg_counts[0]) / static_cast<double>(rep.n_evaluated);
        const double frac_b = static_cast<double>(rep.ceg_counts[1]) / static_cast<double>(rep.n_evaluated);
        const bool none_beyond = rep.ceg_counts[2] + rep.ceg_counts[3] + rep.ceg_counts[4] == 0;
        rep.ceg_compliant = frac_a >= 0.95 && frac_b <= 0.05 && none_beyond;
    }
    return rep;
}

}  // namespace glucokin::metrics
