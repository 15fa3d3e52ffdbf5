#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

namespace glucokin {

/// A single grayscale frame, stored column-major. After normalisation the
/// pixel values are percent relative remission in [0, 100].
struct Frame {
    std::uint32_t rows = 0;  // M_x
    std::uint32_t cols = 0;  // M_y
    std::vector<double> pixels;  // column-major, size rows*cols
    std::uint32_t index = 0;     // frame number n

    Frame() = default;
    Frame(std::uint32_t r, std::uint32_t c, double fill = 0.0, std::uint32_t n = 0)
        : rows(r), cols(c), pixels(static_cast<std::size_t>(r) * c, fill), index(n) {
        if (r == 0 || c == 0) throw std::invalid_argument("Frame: zero dimension");
    }

    double& at(std::uint32_t r, std::uint32_t c) {
        return pixels[static_cast<std::size_t>(c) * rows + r];
    }
    double at(std::uint32_t r, std::uint32_t c) const {
        return pixels[static_cast<std::size_t>(c) * rows + r];
    }
    std::size_t size() const { return pixels.size(); }
};

using PixelVector = std::vector<double>;

/// One measurement: ordered frames plus acquisition metadata. Calibration
/// frames are taken before the reaction and share the frame dimensions.
struct Measurement {
    std::vector<Frame> calibration_frames;
    std::vector<Frame> frames;
    double sample_rate_fps = 30.0;
    double resolution_um_per_px = 30.0;
    std::uint32_t bin_size = 1;
    bool has_glucose_truth = false;
    double glucose_mg_dl = 0.0;
};

/// Pixel-wise mean of the calibration frames; the normalisation reference.
inline Frame calibration_mean(const std::vector<Frame>& calib) {
    if (calib.empty()) throw std::invalid_argument("calibration_mean: no calibration frames");
    Frame out(calib.front().rows, calib.front().cols);
    for (const Frame& f : calib) {
        if (f.rows != out.rows || f.cols != out.cols)
            throw std::invalid_argument("calibration_mean: dimension mismatch");
        for (std::size_t i = 0; i < out.size(); ++i) out.pixels[i] += f.pixels[i];
    }
    const double inv = 1.0 / static_cast<double>(calib.size());
    for (double& p : out.pixels) p *= inv;
    return out;
}

/// Normalise a raw frame against the calibration reference: each pixel
/// becomes 100 * raw / calibration, clamped to [0, 100]. Pass clamp = false
/// when the uncensored values are needed, e.g. when estimating the noise
/// variance of frames whose mean sits at the clamp itself.
inline Frame normalize(const Frame& raw, const Frame& calibration_mean, bool clamp = true) {
    if (raw.rows != calibration_mean.rows || raw.cols != calibration_mean.cols)
        throw std::invalid_argument("normalize: dimension mismatch");
    Frame out(raw.rows, raw.cols, 0.0, raw.index);
    for (std::size_t i = 0; i < raw.size(); ++i) {
        const double c = calibration_mean.pixels[i];
        if (!(c > 0.0)) throw std::invalid_argument("normalize: non-positive calibration pixel");
        double v = 100.0 * raw.pixels[i] / c;
        out.pixels[i] = clamp ? std::min(100.0, std::max(0.0, v)) : v;
    }
    return out;
}

/// Non-overlapping BxB block averaging. B must divide both dimensions.
inline Frame bin(const Frame& frame, std::uint32_t B) {
    if (B < 1) throw std::invalid_argument("bin: B must be >= 1");
    if (B == 1) return frame;
    if (frame.rows % B != 0 || frame.cols % B != 0)
        throw std::invalid_argument("bin: B does not divide frame dimensions");
    Frame out(frame.rows / B, frame.cols / B, 0.0, frame.index);
    const double inv = 1.0 / (static_cast<double>(B) * B);
    for (std::uint32_t c = 0; c < out.cols; ++c)
        for (std::uint32_t r = 0; r < out.rows; ++r) {
            double s = 0.0;
            for (std::uint32_t dc = 0; dc < B; ++dc)
                for (std::uint32_t dr = 0; dr < B; ++dr)
                    s += frame.at(r * B + dr, c * B + dc);
            out.at(r, c) = s * inv;
        }
    return out;
}

/// Column-major vectorisation, length L = rows*cols.
inline PixelVector vectorize(const Frame& frame) {
    return frame.pixels;  // storage is already column-major
}

/// Inverse of vectorize for fixed dimensions.
inline Frame reshape(const PixelVector& v, std::uint32_t rows, std::uint32_t cols,
                     std::uint32_t index = 0) {
    if (v.size() != static_cast<std::size_t>(rows) * cols)
        throw std::invalid_argument("reshape: length does not match dimensions");
    Frame out(rows, cols, 0.0, index);
    out.pixels = v;
    return out;
}

}  // namespace glucokin
