#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <deque>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "glucokin/calibrate.hpp"
#include "glucokin/dropdetect.hpp"
#include "glucokin/frame.hpp"
#include "glucokin/kinetics.hpp"
#include "glucokin/metrics.hpp"
#include "glucokin/modeseek.hpp"
#include "glucokin/roi.hpp"
#include "glucokin/synth.hpp"

namespace glucokin::pipeline {

struct PipelineConfig {
    dropdetect::DropDetectorConfig detector{};
    modeseek::Variant variant = modeseek::Variant::MedoidShift;
    double h = 1.25;         // intensity bandwidth, percent
    bool spatial = false;
    double h_spatial = 4.0;  // pixel bandwidth when spatial features are on
    modeseek::ModeSeekOptions seek{};

    kinetics::ConvergenceMethod method = kinetics::ConvergenceMethod::Ekf;
    double t_slope = 1e-2;
    std::uint32_t window = 30;
    double tol_state = 0.06;  // width of the EKF state band over the window
    std::uint32_t w_skip = 10;  // frames skipped after the drop before the EKF starts
    double ekf_q = 1e-3;
    double ekf_r = 0.25;
    double ekf_p0 = 25.0;
    kinetics::KineticModelParams model{};

    std::optional<calibrate::CalibrationCurve> calibration;

    KernelConfig kernel() const {
        return spatial ? KernelConfig(h, h_spatial) : KernelConfig(h);
    }
};

enum class Stage { PreDrop, Decay, Converged };

inline const char* stage_name(Stage s) {
    switch (s) {
        case Stage::PreDrop: return "pre-drop";
        case Stage::Decay: return "decay";
        case Stage::Converged: return "converged";
    }
    return "pre-drop";
}

struct TraceRow {
    std::uint32_t n = 0;
    double r_hat = std::numeric_limits<double>::quiet_NaN();
    Stage stage = Stage::PreDrop;
    double r_c_hat = std::numeric_limits<double>::quiet_NaN();
    double p = std::numeric_limits<double>::quiet_NaN();
};

struct MeasurementResult {
    std::optional<std::uint32_t> n_d;
    double drop_threshold = 0.0;
    std::optional<std::uint32_t> n_c;
    double r_c_hat = std::numeric_limits<double>::quiet_NaN();
    std::optional<double> g_hat;
    std::vector<TraceRow> trace;
    std::size_t frames_processed = 0;
    std::size_t frames_segmented = 0;
    std::size_t last_cluster_count = 0;
    bool single_region_flag = false;  // ROI convention used on a 1-cluster frame
};

/// Run the full measurement pipeline: pre-process, detect the drop, segment
/// each post-drop frame, track convergence, optionally map to glucose.
/// Processing stops at the first convergence decision.
inline MeasurementResult run_pipeline(const Measurement& m, const PipelineConfig& cfg) {
    if (m.frames.empty()) throw std::invalid_argument("run_pipeline: no frames");
    if (m.calibration_frames.empty())
        throw std::invalid_argument("run_pipeline: no calibration frames");

    MeasurementResult out;
    const Frame calib_mean = calibration_mean(m.calibration_frames);
    const std::uint32_t B = m.bin_size;

    auto preprocess = [&](const Frame& f) { return bin(normalize(f, calib_mean), B); };

    dropdetect::DropDetectorConfig det = cfg.detector;
    if (!(det.sigma1_sq > 0.0)) {
        // Unclamped: calibration frames hover at 100 by construction, and the
        // clamp would censor half the noise and bias the estimate low.
        std::vector<Frame> calib_pp;
        calib_pp.reserve(m.calibration_frames.size());
        for (const Frame& f : m.calibration_frames)
            calib_pp.push_back(bin(normalize(f, calib_mean, false), B));
        det.sigma1_sq = dropdetect::estimate_sigma1_sq(calib_pp);
    }
    const std::size_t L = preprocess(m.frames.front()).size();
    out.drop_threshold = dropdetect::threshold(det, L);

    const KernelConfig kernel = cfg.kernel();
    kinetics::EkfState ekf;
    ekf.q = cfg.ekf_q;
    ekf.r = cfg.ekf_r;
    ekf.p = cfg.ekf_p0;
    bool ekf_started = false;
    std::deque<double> ekf_states;
    double r_d = 0.0;

    // r_trace holds NaN both before segmentation and for unreliable frames
    // (single region, or the runner-up cluster too small to be the reaction
    // zone); `segmented` tells the two cases apart.
    std::vector<double> r_trace(m.frames.size(), std::numeric_limits<double>::quiet_NaN());
    std::vector<char> segmented(m.frames.size(), 0);
    const std::size_t min_cluster = std::max<std::size_t>(2, L / 20);
    int consec = 0;

    for (std::uint32_t n = 0; n < m.frames.size(); ++n) {
        const Frame pp = preprocess(m.frames[n]);
        ++out.frames_processed;
        TraceRow row;
        row.n = n;

        if (!out.n_d) {
            const double t = dropdetect::test_statistic(pp.pixels);
            if (t > out.drop_threshold) {
                ++consec;
                if (consec >= det.min_consecutive)
                    out.n_d = n + 1 - static_cast<std::uint32_t>(det.min_consecutive);
            } else {
                consec = 0;
            }
        }
        if (!out.n_d) {
            out.trace.push_back(row);
            continue;
        }

        // segmentation backfill: the debounced drop decision arrives
        // min_consecutive-1 frames late, so catch up from n_D
        for (std::uint32_t k = *out.n_d; k <= n; ++k) {
            if (segmented[k]) continue;
            const Frame ppk = k == n ? pp : preprocess(m.frames[k]);
            const auto pts = frame_points(ppk, cfg.spatial);
            const auto seek = modeseek::run(pts, cfg.variant, kernel, cfg.seek);
            const auto clusters =
                modeseek::prune_modes(seek.modes, kernel, modeseek::is_medoid(cfg.variant));
            // only clusters covering a real fraction of the frame can play
            // ROI or background; a lone dry spot must not win "second
            // largest" on a frame where the reaction zone has not separated
            // from the background yet
            modeseek::ClusterSet eligible;
            for (std::size_t c = 0; c < clusters.centers.size(); ++c)
                if (clusters.sizes[c] >= min_cluster) {
                    eligible.centers.push_back(clusters.centers[c]);
                    eligible.sizes.push_back(clusters.sizes[c]);
                }
            if (eligible.centers.empty()) eligible = clusters;
            const auto region = roi::assign(eligible);
            if (!region.single_region) r_trace[k] = region.r_hat;
            segmented[k] = 1;
            ++out.frames_segmented;
            out.last_cluster_count = clusters.centers.size();
            out.single_region_flag = out.single_region_flag || region.single_region;
        }
        row.stage = Stage::Decay;
        row.r_hat = r_trace[n];

        if (cfg.method == kinetics::ConvergenceMethod::Standard) {
            const std::vector<double> upto(r_trace.begin(), r_trace.begin() + n + 1);
            if (auto d = kinetics::standard_convergence(upto, *out.n_d, cfg.t_slope, cfg.window)) {
                if (d->n_c == n) {
                    out.n_c = d->n_c;
                    out.r_c_hat = d->r_c_hat;
                    row.stage = Stage::Converged;
                }
            }
        } else {
            if (!ekf_started && n >= *out.n_d + cfg.w_skip && !std::isnan(r_trace[n])) {
                // r_D: the first frame after the drop where the reaction zone
                // actually separated from the background
                r_d = r_trace[n];
                for (std::uint32_t k = *out.n_d; k <= n; ++k)
                    if (!std::isnan(r_trace[k])) {
                        r_d = r_trace[k];
                        break;
                    }
                ekf.r_c_hat = r_trace[n] - 5.0;
                ekf.n = n;
                ekf_started = true;
            } else if (ekf_started && !std::isnan(r_trace[n])) {
                ekf = kinetics::ekf_step(ekf, r_trace[n], r_d, n, *out.n_d, cfg.model);
                // band rule: converged once the trailing window+1 states all
                // fit inside a tol_state-wide band
                ekf_states.push_back(ekf.r_c_hat);
                if (ekf_states.size() > cfg.window + 1) ekf_states.pop_front();
                if (ekf_states.size() == cfg.window + 1) {
                    const auto [lo, hi] = std::minmax_element(ekf_states.begin(), ekf_states.end());
                    if (*hi - *lo < cfg.tol_state) {
                        out.n_c = n;
                        out.r_c_hat = ekf.r_c_hat;
                        row.stage = Stage::Converged;
                    }
                }
            }
            row.r_c_hat = ekf_started ? ekf.r_c_hat : std::numeric_limits<double>::quiet_NaN();
            row.p = ekf_started ? ekf.p : std::numeric_limits<double>::quiet_NaN();
        }
        out.trace.push_back(row);
        if (out.n_c) break;  // no frame after the decision affects the result
    }

    if (out.n_c && cfg.calibration)
        out.g_hat = calibrate::map(*cfg.calibration, out.r_c_hat);
    return out;
}

inline nlohmann::json result_to_json(const MeasurementResult& r) {
    nlohmann::json j;
    j["n_d"] = r.n_d ? nlohmann::json(*r.n_d) : nlohmann::json(nullptr);
    j["drop_threshold"] = r.drop_threshold;
    j["n_c"] = r.n_c ? nlohmann::json(*r.n_c) : nlohmann::json(nullptr);
    j["r_c_hat"] = std::isnan(r.r_c_hat) ? nlohmann::json(nullptr) : nlohmann::json(r.r_c_hat);
    j["g_hat"] = r.g_hat ? nlohmann::json(*r.g_hat) : nlohmann::json(nullptr);
    j["frames_processed"] = r.frames_processed;
    j["frames_segmented"] = r.frames_segmented;
    j["last_cluster_count"] = r.last_cluster_count;
    j["single_region_flag"] = r.single_region_flag;
    return j;
}

inline void write_trace_csv(const MeasurementResult& r, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("write_trace_csv: cannot open " + path);
    os << "n,r_hat,stage,r_c_hat,p\n";
    for (const TraceRow& row : r.trace) {
        os << row.n << ",";
        if (!std::isnan(row.r_hat)) os << row.r_hat;
        os << "," << stage_name(row.stage) << ",";
        if (!std::isnan(row.r_c_hat)) os << row.r_c_hat;
        os << ",";
        if (!std::isnan(row.p)) os << row.p;
        os << "\n";
    }
}

struct DatasetEvaluation {
    metrics::EvaluationReport report;
    std::vector<std::pair<double, double>> glucose_pairs;   // (true, estimated)
    std::vector<std::pair<double, double>> remission_pairs; // (true r_C, estimated r_C)
    std::vector<MeasurementResult> results;
};

/// Run the pipeline over every manifest entry (parallel across measurements,
/// merged in manifest order) and aggregate the accuracy report.
inline DatasetEvaluation evaluate_dataset(const synth::DatasetManifest& manifest,
                                          const std::string& dir, const PipelineConfig& cfg) {
    if (manifest.entries.empty()) throw std::invalid_argument("evaluate_dataset: empty manifest");
    const std::size_t n = manifest.entries.size();
    DatasetEvaluation ev;
    ev.results.resize(n);

    const unsigned workers = std::max(1u, std::min<unsigned>(
        std::thread::hardware_concurrency(), static_cast<unsigned>(n)));
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    std::vector<std::string> errors(n);
    for (unsigned w = 0; w < workers; ++w)
        pool.emplace_back([&]() {
            for (std::size_t i = next.fetch_add(1); i < n; i = next.fetch_add(1)) {
                try {
                    const Measurement m =
                        io::read_measurement(dir + "/" + manifest.entries[i].file);
                    ev.results[i] = run_pipeline(m, cfg);
                } catch (const std::exception& e) {
                    errors[i] = e.what();
                }
            }
        });
    for (auto& t : pool) t.join();
    for (const auto& e : errors)
        if (!e.empty()) throw std::runtime_error("evaluate_dataset: " + e);

    std::map<double, std::vector<double>> groups;
    for (std::size_t i = 0; i < n; ++i) {
        const auto& entry = manifest.entries[i];
        const auto& res = ev.results[i];
        if (!res.n_c) continue;  // incomplete measurements are excluded from scoring
        ev.remission_pairs.emplace_back(entry.r_c, res.r_c_hat);
        groups[entry.glucose].push_back(res.r_c_hat);
        if (res.g_hat) ev.glucose_pairs.emplace_back(entry.glucose, *res.g_hat);
    }
    std::vector<std::vector<double>> remission_groups;
    for (auto& [g, v] : groups) remission_groups.push_back(std::move(v));
    ev.report = metrics::evaluate(ev.glucose_pairs, remission_groups);
    return ev;
}

inline nlohmann::json report_to_json(const metrics::EvaluationReport& rep) {
    nlohmann::json j;
    j["cv_r"] = rep.cv_available ? nlohmann::json(rep.cv_r) : nlohmann::json(nullptr);
    j["gmad_low"] = rep.gmad_low;
    j["gmad_high"] = rep.gmad_high;
    j["ceg_counts"] = {{"A", rep.ceg_counts[0]},
                       {"B", rep.ceg_counts[1]},
                       {"C", rep.ceg_counts[2]},
                       {"D", rep.ceg_counts[3]},
                       {"E", rep.ceg_counts[4]}};
    j["iso_pass"] = rep.iso_pass;
    j["iso_pass_rate"] = rep.iso_pass_rate;
    j["ceg_compliant"] = rep.ceg_compliant;
    j["n_evaluated"] = rep.n_evaluated;
    return j;
}

inline void write_ceg_csv(const std::vector<std::pair<double, double>>& pairs,
                          const std::string& path) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("write_ceg_csv: cannot open " + path);
    os << "g_true,g_est,zone\n";
    for (const auto& [g, e] : pairs)
        os << g << "," << e << "," << metrics::zone_letter(metrics::ceg_zone(g, e)) << "\n";
}

/// Scatter of the estimates with the zone A boundary polylines, 480x480.
inline void write_ceg_svg(const std::vector<std::pair<double, double>>& pairs,
                          const std::string& path, double g_max = 600.0) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("write_ceg_svg: cannot open " + path);
    const double size = 480.0;
    auto sx = [&](double g) { return g / g_max * size; };
    auto sy = [&](double g) { return size - g / g_max * size; };
    os << "<svg xmlns='http://www.w3.org/2000/svg' width='480' height='480' "
          "viewBox='0 0 480 480'>\n";
    os << "<rect width='480' height='480' fill='white' stroke='black'/>\n";
    os << "<line x1='" << sx(0) << "' y1='" << sy(0) << "' x2='" << sx(g_max) << "' y2='"
       << sy(g_max) << "' stroke='gray'/>\n";
    os << "<line x1='" << sx(0) << "' y1='" << sy(0) << "' x2='" << sx(g_max) << "' y2='"
       << sy(1.2 * g_max) << "' stroke='lightgray'/>\n";
    os << "<line x1='" << sx(0) << "' y1='" << sy(0) << "' x2='" << sx(g_max) << "' y2='"
       << sy(0.8 * g_max) << "' stroke='lightgray'/>\n";
    for (const auto& [g, e] : pairs) {
        const auto zone = metrics::ceg_zone(g, e);
        const char* color = zone == metrics::CegZone::A ? "green"
                            : zone == metrics::CegZone::B ? "orange" : "red";
        os << "<circle cx='" << sx(g) << "' cy='" << sy(e) << "' r='3' fill='" << color
           << "'/>\n";
    }
    os << "</svg>\n";
}

}  // namespace glucokin::pipeline
