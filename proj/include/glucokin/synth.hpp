#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "glucokin/frame.hpp"
#include "glucokin/io.hpp"
#include "glucokin/kinetics.hpp"

namespace glucokin::synth {

enum class Region : std::uint8_t { Background = 0, Edge = 1, Roi = 2, Artefact = 3 };

struct SceneConfig {
    std::uint32_t rows = 24;
    std::uint32_t cols = 24;
    double roi_center_x = 11.5;  // row coordinate
    double roi_center_y = 11.5;  // column coordinate
    double roi_radius = 8.0;     // pixels
    double edge_width = 2.0;     // ring outside the ROI disk
    int artefact_count = 1;
    double artefact_radius_min = 1.0;
    double artefact_radius_max = 1.8;
    double artefact_level = 88.0;  // post-drop remission of dry spots
    double noise_sigma = 0.75;     // percent, additive Gaussian
    double background_level = 100.0;
    double background_drift = 0.5;  // total linear drop over the run, percent

    void check() const {
        if (!(roi_radius > 0.0)) throw std::invalid_argument("SceneConfig: roi_radius must be > 0");
        if (noise_sigma < 0.0) throw std::invalid_argument("SceneConfig: noise_sigma must be >= 0");
        const double margin = roi_radius + edge_width;
        if (roi_center_x - margin < 0 || roi_center_y - margin < 0 ||
            roi_center_x + margin > rows || roi_center_y + margin > cols)
            throw std::invalid_argument("SceneConfig: ROI (incl. edge) does not fit in frame");
    }
};

/// Generator-side kinetic conventions: the g -> r_C map is linear from
/// (20 mg/dl, 95%) to (600 mg/dl, 45%), and the rate line is chosen so the
/// decay saturates within roughly 3-15 s at 30 fps.
struct KineticDefaults {
    double g_low = 20.0, r_at_low = 95.0;
    double g_high = 600.0, r_at_high = 45.0;
    double r_d = 97.0;  // remission right after the drop
    kinetics::KineticModelParams model{};  // dtau = 7.6e-4, tau0 = -0.0842

    double r_c_of_glucose(double g) const {
        return r_at_low + (g - g_low) * (r_at_high - r_at_low) / (g_high - g_low);
    }
};

struct GroundTruth {
    double glucose = 0.0;
    double r_c = 0.0;
    double r_d = 0.0;
    double rate = 0.0;  // negative
    std::uint32_t n_d = 0;
    std::vector<Region> mask;  // column-major, raw pixel grid
};

struct GeneratorConfig {
    SceneConfig scene{};
    KineticDefaults kinetics{};
    std::uint32_t n_frames = 580;
    std::uint32_t n_calibration = 10;
    std::uint32_t n_d = 60;
    double sample_rate_fps = 30.0;
    double resolution_um_per_px = 30.0;
    std::uint32_t bin_size = 2;
    double calibration_reflectance = 0.8;  // raw sensor level at 100% remission
};

namespace detail {
/// Fixed per-pixel reflectance pattern so normalisation has real work to do.
inline double calib_level(const GeneratorConfig& cfg, std::uint32_t r, std::uint32_t c) {
    return cfg.calibration_reflectance *
           (1.0 + 0.05 * std::sin(0.7 * static_cast<double>(r)) *
                      std::cos(0.5 * static_cast<double>(c)));
}
}  // namespace detail

/// Build one synthetic measurement plus its ground truth. Frames are emitted
/// in raw reflectance units; the pipeline recovers percent remission by
/// normalising against the calibration frames. Deterministic given the seed.
inline std::pair<Measurement, GroundTruth> generate_measurement(const GeneratorConfig& cfg,
                                                                double glucose,
                                                                std::uint64_t seed) {
    cfg.scene.check();
    if (glucose < 20.0 || glucose > 600.0)
        throw std::invalid_argument("generate_measurement: glucose must be in [20, 600] mg/dl");

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> noise(0.0, 1.0);

    GroundTruth truth;
    truth.glucose = glucose;
    truth.r_c = cfg.kinetics.r_c_of_glucose(glucose);
    truth.r_d = cfg.kinetics.r_d;
    truth.rate = cfg.kinetics.model.rate(truth.r_c);
    truth.n_d = cfg.n_d;

    const SceneConfig& sc = cfg.scene;
    truth.mask.assign(static_cast<std::size_t>(sc.rows) * sc.cols, Region::Background);

    // artefact disks drawn inside the ROI
    struct Disk { double x, y, r; };
    std::vector<Disk> artefacts;
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    for (int a = 0; a < sc.artefact_count; ++a) {
        const double rad = sc.artefact_radius_min +
                           uni(rng) * (sc.artefact_radius_max - sc.artefact_radius_min);
        const double ang = 2.0 * M_PI * uni(rng);
        const double dist = uni(rng) * std::max(0.0, sc.roi_radius - rad - 1.0);
        artefacts.push_back({sc.roi_center_x + dist * std::cos(ang),
                             sc.roi_center_y + dist * std::sin(ang), rad});
    }
    for (std::uint32_t c = 0; c < sc.cols; ++c)
        for (std::uint32_t r = 0; r < sc.rows; ++r) {
            const double dx = static_cast<double>(r) - sc.roi_center_x;
            const double dy = static_cast<double>(c) - sc.roi_center_y;
            const double d = std::sqrt(dx * dx + dy * dy);
            Region reg = Region::Background;
            if (d <= sc.roi_radius)
                reg = Region::Roi;
            else if (d <= sc.roi_radius + sc.edge_width)
                reg = Region::Edge;
            if (reg == Region::Roi)
                for (const Disk& a : artefacts) {
                    const double ax = static_cast<double>(r) - a.x;
                    const double ay = static_cast<double>(c) - a.y;
                    if (ax * ax + ay * ay <= a.r * a.r) reg = Region::Artefact;
                }
            truth.mask[static_cast<std::size_t>(c) * sc.rows + r] = reg;
        }

    Measurement m;
    m.sample_rate_fps = cfg.sample_rate_fps;
    m.resolution_um_per_px = cfg.resolution_um_per_px;
    m.bin_size = cfg.bin_size;
    m.has_glucose_truth = true;
    m.glucose_mg_dl = glucose;

    // reference = true emits a white-standard frame at exactly 100% remission;
    // the pipeline divides by the calibration mean, so anything else would
    // silently rescale every remission value downstream.
    auto emit_frame = [&](std::uint32_t index, bool reacting, bool reference = false) {
        Frame f(sc.rows, sc.cols, 0.0, index);
        const double n_rel = reacting ? static_cast<double>(index - cfg.n_d) : 0.0;
        const double drift = sc.background_drift * static_cast<double>(index) /
                             static_cast<double>(cfg.n_frames);
        const double bg = reference ? 100.0 : sc.background_level - drift;
        const double roi_val =
            reacting ? kinetics::model_eval(n_rel, truth.r_d, truth.r_c, cfg.kinetics.model) : bg;
        for (std::uint32_t c = 0; c < sc.cols; ++c)
            for (std::uint32_t r = 0; r < sc.rows; ++r) {
                const Region reg = truth.mask[static_cast<std::size_t>(c) * sc.rows + r];
                double v = bg;
                if (reacting) {
                    if (reg == Region::Roi)
                        v = roi_val;
                    else if (reg == Region::Edge)
                        v = 0.5 * roi_val + 0.5 * bg;
                    else if (reg == Region::Artefact)
                        v = sc.artefact_level;
                }
                v += sc.noise_sigma * noise(rng);
                f.at(r, c) = (v / 100.0) * detail::calib_level(cfg, r, c);
            }
        return f;
    };

    for (std::uint32_t n = 0; n < cfg.n_calibration; ++n)
        m.calibration_frames.push_back(emit_frame(0, false, true));
    for (std::uint32_t n = 0; n < cfg.n_frames; ++n)
        m.frames.push_back(emit_frame(n, n >= cfg.n_d));
    for (std::uint32_t n = 0; n < cfg.n_frames; ++n) m.frames[n].index = n;
    return {std::move(m), std::move(truth)};
}

struct DatasetEntry {
    std::string file;
    double glucose = 0.0;
    double r_c = 0.0;
    double r_d = 0.0;
    double rate = 0.0;
    std::uint32_t n_d = 0;
    std::uint64_t seed = 0;
};

struct DatasetManifest {
    std::vector<DatasetEntry> entries;
    GeneratorConfig config{};
};

inline nlohmann::json manifest_to_json(const DatasetManifest& man) {
    nlohmann::json j;
    j["entries"] = nlohmann::json::array();
    for (const auto& e : man.entries) {
        j["entries"].push_back({{"file", e.file},
                                {"glucose_mg_dl", e.glucose},
                                {"r_c", e.r_c},
                                {"r_d", e.r_d},
                                {"rate", e.rate},
                                {"n_d", e.n_d},
                                {"seed", e.seed}});
    }
    j["n_frames"] = man.config.n_frames;
    j["sample_rate_fps"] = man.config.sample_rate_fps;
    j["bin_size"] = man.config.bin_size;
    return j;
}

inline DatasetManifest manifest_from_json(const nlohmann::json& j) {
    DatasetManifest man;
    for (const auto& e : j.at("entries")) {
        DatasetEntry d;
        d.file = e.at("file").get<std::string>();
        d.glucose = e.at("glucose_mg_dl").get<double>();
        d.r_c = e.at("r_c").get<double>();
        d.r_d = e.at("r_d").get<double>();
        d.rate = e.at("rate").get<double>();
        d.n_d = e.at("n_d").get<std::uint32_t>();
        d.seed = e.at("seed").get<std::uint64_t>();
        man.entries.push_back(std::move(d));
    }
    return man;
}

/// Per-measurement jitter of the drop frame and ROI geometry, then one
/// generate_measurement per (level, repeat). Writes containers named
/// m_<level>_<repeat>.glkf plus a manifest when out_dir is non-empty.
inline DatasetManifest generate_dataset(const std::vector<double>& levels, int repeats,
                                        const GeneratorConfig& base, std::uint64_t seed,
                                        const std::string& out_dir = "",
                                        std::vector<std::pair<Measurement, GroundTruth>>* keep = nullptr) {
    if (repeats < 1) throw std::invalid_argument("generate_dataset: repeats must be >= 1");
    DatasetManifest man;
    man.config = base;
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> uni(0.0, 1.0);

    for (std::size_t li = 0; li < levels.size(); ++li) {
        for (int rep = 0; rep < repeats; ++rep) {
            GeneratorConfig cfg = base;
            cfg.n_d = base.n_d + static_cast<std::uint32_t>(uni(rng) * 20.0);
            cfg.scene.roi_center_x += (uni(rng) - 0.5) * 2.0;
            cfg.scene.roi_center_y += (uni(rng) - 0.5) * 2.0;
            // Cap the upward jitter so the worst case (centre shifted a full
            // pixel inward, radius inflated) still fits inside the frame.
            cfg.scene.roi_radius *= 0.9 + 0.15 * uni(rng);
            const std::uint64_t mseed = rng();

            auto [meas, truth] = generate_measurement(cfg, levels[li], mseed);
            DatasetEntry e;
            e.file = "m_" + std::to_string(static_cast<int>(levels[li])) + "_" +
                     std::to_string(rep) + ".glkf";
            e.glucose = truth.glucose;
            e.r_c = truth.r_c;
            e.r_d = truth.r_d;
            e.rate = truth.rate;
            e.n_d = truth.n_d;
            e.seed = mseed;
            if (!out_dir.empty()) io::write_measurement(out_dir + "/" + e.file, meas);
            if (keep) keep->emplace_back(std::move(meas), std::move(truth));
            man.entries.push_back(std::move(e));
        }
    }
    if (!out_dir.empty()) {
        std::ofstream os(out_dir + "/manifest.json");
        if (!os) throw std::runtime_error("generate_dataset: cannot write manifest");
        os << manifest_to_json(man).dump(2) << "\n";
    }
    return man;
}

}  // namespace glucokin::synth
