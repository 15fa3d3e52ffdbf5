#pragma once

#include <algorithm>
#include <fstream>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace glucokin::calibrate {

/// Piecewise-linear remission -> glucose mapping. Knots are sorted by
/// remission; glucose is strictly decreasing in remission (the reagent
/// darkens with glucose).
struct CalibrationCurve {
    std::vector<std::pair<double, double>> knots;  // (r_C percent, g mg/dl), r ascending
    std::string fitted_at;
    std::string source_dataset;
};

/// Build the curve from (r_C, g) observations: per-level mean remission,
/// then pool-adjacent-violators to restore monotonicity, then dedupe.
inline CalibrationCurve fit(const std::vector<std::pair<double, double>>& pairs) {
    std::map<double, std::vector<double>> by_level;  // g -> remissions
    for (const auto& [r, g] : pairs) by_level[g].push_back(r);
    if (by_level.size() < 2)
        throw std::invalid_argument("calibrate::fit: need at least 2 distinct glucose levels");

    // knots ordered by ascending remission = descending glucose
    std::vector<std::pair<double, double>> knots;  // (r, g)
    for (auto it = by_level.rbegin(); it != by_level.rend(); ++it) {
        double m = 0.0;
        for (double r : it->second) m += r;
        m /= static_cast<double>(it->second.size());
        knots.emplace_back(m, it->first);
    }

    // PAV on remission: enforce non-decreasing r along descending g by
    // pooling adjacent violators (weights = 1 per level)
    std::vector<double> r_vals, w_vals;
    std::vector<std::vector<double>> g_pool;
    for (const auto& [r, g] : knots) {
        r_vals.push_back(r);
        w_vals.push_back(1.0);
        g_pool.push_back({g});
        while (r_vals.size() >= 2 && r_vals[r_vals.size() - 2] >= r_vals.back()) {
            const std::size_t a = r_vals.size() - 2, b = r_vals.size() - 1;
            const double w = w_vals[a] + w_vals[b];
            r_vals[a] = (r_vals[a] * w_vals[a] + r_vals[b] * w_vals[b]) / w;
            w_vals[a] = w;
            for (double gg : g_pool[b]) g_pool[a].push_back(gg);
            r_vals.pop_back();
            w_vals.pop_back();
            g_pool.pop_back();
        }
    }

    CalibrationCurve curve;
    for (std::size_t i = 0; i < r_vals.size(); ++i) {
        double g = 0.0;
        for (double gg : g_pool[i]) g += gg;
        g /= static_cast<double>(g_pool[i].size());
        curve.knots.emplace_back(r_vals[i], g);
    }
    // pooled groups can still produce equal-g neighbours; merge them
    std::vector<std::pair<double, double>> merged;
    for (const auto& k : curve.knots) {
        if (!merged.empty() && merged.back().second <= k.second + 1e-12) {
            merged.back().first = 0.5 * (merged.back().first + k.first);
            merged.back().second = std::min(merged.back().second, k.second);
        } else {
            merged.push_back(k);
        }
    }
    curve.knots = std::move(merged);
    if (curve.knots.size() < 2)
        throw std::invalid_argument("calibrate::fit: levels collapsed, not enough distinct levels");
    return curve;
}

/// Interpolate; clamps to the end knots outside the calibrated range.
inline double map(const CalibrationCurve& curve, double r_c) {
    if (curve.knots.size() < 2) throw std::invalid_argument("calibrate::map: invalid curve");
    const auto& k = curve.knots;
    if (r_c <= k.front().first) return std::max(0.0, k.front().second);
    if (r_c >= k.back().first) return std::max(0.0, k.back().second);
    for (std::size_t i = 1; i < k.size(); ++i) {
        if (r_c <= k[i].first) {
            const double t = (r_c - k[i - 1].first) / (k[i].first - k[i - 1].first);
            return std::max(0.0, k[i - 1].second + t * (k[i].second - k[i - 1].second));
        }
    }
    return std::max(0.0, k.back().second);
}

inline nlohmann::json to_json(const CalibrationCurve& curve) {
    nlohmann::json j;
    j["knots"] = nlohmann::json::array();
    for (const auto& [r, g] : curve.knots) j["knots"].push_back({r, g});
    j["fitted_at"] = curve.fitted_at;
    j["source_dataset"] = curve.source_dataset;
    return j;
}

inline CalibrationCurve from_json(const nlohmann::json& j) {
    CalibrationCurve curve;
    for (const auto& k : j.at("knots")) curve.knots.emplace_back(k.at(0).get<double>(), k.at(1).get<double>());
    if (j.contains("fitted_at")) curve.fitted_at = j.at("fitted_at").get<std::string>();
    if (j.contains("source_dataset")) curve.source_dataset = j.at("source_dataset").get<std::string>();
    if (curve.knots.size() < 2) throw std::invalid_argument("calibration curve: need >= 2 knots");
    return curve;
}

inline void save(const CalibrationCurve& curve, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("calibrate::save: cannot open " + path);
    os << to_json(curve).dump(2) << "\n";
}

inline CalibrationCurve load(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("calibrate::load: cannot open " + path);
    return from_json(nlohmann::json::parse(is));
}

}  // namespace glucokin::calibrate
