#pragma once

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "glucokin/frame.hpp"

// Frame-container file format "GLKF": little-endian binary with a fixed
// header (magic, version, M_x, M_y, N_f) followed by N_f column-major
// float32 frames. A JSON sidecar (<container>.json) carries the acquisition
// metadata; calibration frames occupy the first calibration_frame_count
// slots of the container.

namespace glucokin::io {

inline constexpr char kMagic[4] = {'G', 'L', 'K', 'F'};
inline constexpr std::uint32_t kVersion = 1;

namespace detail {
inline void write_u32(std::ostream& os, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                          static_cast<unsigned char>((v >> 8) & 0xff),
                          static_cast<unsigned char>((v >> 16) & 0xff),
                          static_cast<unsigned char>((v >> 24) & 0xff)};
    os.write(reinterpret_cast<const char*>(b), 4);
}
inline std::uint32_t read_u32(std::istream& is) {
    unsigned char b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}
inline void write_f32(std::ostream& os, float v) {
    std::uint32_t u;
    std::memcpy(&u, &v, 4);
    write_u32(os, u);
}
inline float read_f32(std::istream& is) {
    std::uint32_t u = read_u32(is);
    float v;
    std::memcpy(&v, &u, 4);
    return v;
}
}  // namespace detail

inline std::string manifest_path(const std::string& container_path) {
    return container_path + ".json";
}

inline void write_measurement(const std::string& path, const Measurement& m) {
    if (m.calibration_frames.empty())
        throw std::invalid_argument("write_measurement: calibration frames required");
    const Frame& first = m.calibration_frames.front();
    const std::uint32_t n_total =
        static_cast<std::uint32_t>(m.calibration_frames.size() + m.frames.size());

    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("write_measurement: cannot open " + path);
    os.write(kMagic, 4);
    detail::write_u32(os, kVersion);
    detail::write_u32(os, first.rows);
    detail::write_u32(os, first.cols);
    detail::write_u32(os, n_total);
    auto emit = [&](const Frame& f) {
        if (f.rows != first.rows || f.cols != first.cols)
            throw std::invalid_argument("write_measurement: inconsistent frame dimensions");
        for (double p : f.pixels) detail::write_f32(os, static_cast<float>(p));
    };
    for (const Frame& f : m.calibration_frames) emit(f);
    for (const Frame& f : m.frames) emit(f);
    if (!os) throw std::runtime_error("write_measurement: write failed for " + path);

    nlohmann::json j;
    j["sample_rate_fps"] = m.sample_rate_fps;
    j["resolution_um_per_px"] = m.resolution_um_per_px;
    j["bin_size"] = m.bin_size;
    if (m.has_glucose_truth)
        j["glucose_mg_dl"] = m.glucose_mg_dl;
    else
        j["glucose_mg_dl"] = nullptr;
    j["calibration_frame_count"] = m.calibration_frames.size();
    std::ofstream js(manifest_path(path));
    if (!js) throw std::runtime_error("write_measurement: cannot open sidecar for " + path);
    js << j.dump(2) << "\n";
}

inline Measurement read_measurement(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("read_measurement: cannot open " + path);
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, kMagic, 4) != 0)
        throw std::runtime_error("read_measurement: bad magic in " + path);
    const std::uint32_t version = detail::read_u32(is);
    if (version != kVersion)
        throw std::runtime_error("read_measurement: unsupported version in " + path);
    const std::uint32_t rows = detail::read_u32(is);
    const std::uint32_t cols = detail::read_u32(is);
    const std::uint32_t n_total = detail::read_u32(is);
    if (rows == 0 || cols == 0) throw std::runtime_error("read_measurement: zero dimension");

    std::ifstream js(manifest_path(path));
    if (!js) throw std::runtime_error("read_measurement: missing sidecar for " + path);
    nlohmann::json j = nlohmann::json::parse(js);

    Measurement m;
    m.sample_rate_fps = j.at("sample_rate_fps").get<double>();
    m.resolution_um_per_px = j.at("resolution_um_per_px").get<double>();
    m.bin_size = j.at("bin_size").get<std::uint32_t>();
    if (!j.at("glucose_mg_dl").is_null()) {
        m.has_glucose_truth = true;
        m.glucose_mg_dl = j.at("glucose_mg_dl").get<double>();
    }
    const std::uint32_t n_calib = j.at("calibration_frame_count").get<std::uint32_t>();
    if (n_calib == 0 || n_calib > n_total)
        throw std::runtime_error("read_measurement: bad calibration_frame_count");

    for (std::uint32_t n = 0; n < n_total; ++n) {
        Frame f(rows, cols, 0.0, n);
        for (double& p : f.pixels) p = detail::read_f32(is);
        if (!is) throw std::runtime_error("read_measurement: truncated container " + path);
        if (n < n_calib)
            m.calibration_frames.push_back(std::move(f));
        else
            m.frames.push_back(std::move(f));
    }
    // re-index reaction frames from zero
    for (std::uint32_t n = 0; n < m.frames.size(); ++n) m.frames[n].index = n;
    return m;
}

}  // namespace glucokin::io
