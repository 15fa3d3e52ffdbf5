#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "glucokin/frame.hpp"

namespace glucokin {

/// Feature-space point. dim = 1 for intensity-only clustering, dim = 3 when
/// the two spatial coordinates are appended.
struct Point {
    std::array<double, 3> v{0.0, 0.0, 0.0};

    Point() = default;
    explicit Point(double intensity) : v{intensity, 0.0, 0.0} {}
    Point(double intensity, double px, double py) : v{intensity, px, py} {}

    double& operator[](std::size_t i) { return v[i]; }
    double operator[](std::size_t i) const { return v[i]; }
};

/// Gaussian kernel with profile k(u) = exp(-u/2); the iteration weight is
/// g(u) = -k'(u) = k(u)/2, which is strictly positive. Per-dimension
/// bandwidths; distances are always taken in the bandwidth-scaled space.
struct KernelConfig {
    int dim = 1;
    std::array<double, 3> bandwidth{1.0, 1.0, 1.0};

    KernelConfig() = default;
    explicit KernelConfig(double h) : dim(1), bandwidth{h, h, h} { check(); }
    KernelConfig(double h_intensity, double h_spatial)
        : dim(3), bandwidth{h_intensity, h_spatial, h_spatial} { check(); }

    void check() const {
        for (int d = 0; d < dim; ++d)
            if (!(bandwidth[d] > 0.0)) throw std::invalid_argument("KernelConfig: bandwidth must be > 0");
    }

    /// sum_d ((a_d - b_d)/h_d)^2
    double scaled_sqdist(const Point& a, const Point& b) const {
        double u = 0.0;
        for (int d = 0; d < dim; ++d) {
            const double t = (a.v[d] - b.v[d]) / bandwidth[d];
            u += t * t;
        }
        return u;
    }

    static double profile(double u) { return std::exp(-0.5 * u); }
    static double deriv_weight(double u) { return 0.5 * std::exp(-0.5 * u); }

    /// K((a-b)/h); every call is counted for complexity assertions.
    double eval(const Point& a, const Point& b) const {
        ++eval_count;
        return profile(scaled_sqdist(a, b));
    }

    double normalizer() const {
        double p = 1.0;
        for (int d = 0; d < dim; ++d) p *= bandwidth[d];
        return p;
    }

    static inline thread_local std::uint64_t eval_count = 0;
    static void reset_eval_count() { eval_count = 0; }
};

/// Feature-space view of a frame: intensities only, or intensity plus pixel
/// coordinates when spatial is set.
inline std::vector<Point> frame_points(const Frame& f, bool spatial = false) {
    std::vector<Point> pts;
    pts.reserve(f.size());
    if (!spatial) {
        for (double p : f.pixels) pts.emplace_back(p);
    } else {
        for (std::uint32_t c = 0; c < f.cols; ++c)
            for (std::uint32_t r = 0; r < f.rows; ++r)
                pts.emplace_back(f.at(r, c), static_cast<double>(r), static_cast<double>(c));
    }
    return pts;
}

}  // namespace glucokin
