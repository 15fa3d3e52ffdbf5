#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>

#include "glucokin/frame.hpp"
#include "glucokin/io.hpp"

using namespace glucokin;

namespace {
Frame constant_frame(std::uint32_t rows, std::uint32_t cols, double v, std::uint32_t idx = 0) {
    return Frame(rows, cols, v, idx);
}
}  // namespace

TEST_CASE("normalize: identity, halving, clamp") {
    Frame raw = constant_frame(2, 2, 0.8, 7);
    Frame calib = constant_frame(2, 2, 0.8);
    Frame out = normalize(raw, calib);
    CHECK(out.index == 7);
    for (double p : out.pixels) CHECK(p == doctest::Approx(100.0));

    raw = constant_frame(2, 2, 0.4);
    for (double p : normalize(raw, calib).pixels) CHECK(p == doctest::Approx(50.0));

    raw = constant_frame(2, 2, 0.9);  // 112.5 before the clamp
    for (double p : normalize(raw, calib).pixels) CHECK(p == doctest::Approx(100.0));
}

TEST_CASE("normalize: errors") {
    Frame raw = constant_frame(2, 2, 1.0);
    CHECK_THROWS_AS(normalize(raw, constant_frame(2, 3, 1.0)), std::invalid_argument);
    Frame bad_calib = constant_frame(2, 2, 1.0);
    bad_calib.at(0, 0) = 0.0;
    CHECK_THROWS_AS(normalize(raw, bad_calib), std::invalid_argument);
}

TEST_CASE("bin: identity, 2x2 mean, divisibility") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(0.0, 100.0);
    Frame f(4, 4, 0.0, 3);
    for (double& p : f.pixels) p = u(rng);
    Frame same = bin(f, 1);
    CHECK(same.pixels == f.pixels);
    CHECK(same.index == 3);

    Frame small(2, 2, 0.0, 0);
    small.at(0, 0) = 10;
    small.at(0, 1) = 20;
    small.at(1, 0) = 30;
    small.at(1, 1) = 40;
    Frame b = bin(small, 2);
    CHECK(b.rows == 1);
    CHECK(b.cols == 1);
    CHECK(b.pixels[0] == doctest::Approx(25.0));

    CHECK_THROWS_AS(bin(Frame(3, 3, 1.0, 0), 2), std::invalid_argument);
}

TEST_CASE("bin: variance reduction by B^2 on i.i.d. noise") {
    std::mt19937_64 rng(42);
    std::normal_distribution<double> noise(50.0, 2.0);  // sigma^2 = 4
    double ss = 0.0;
    std::size_t count = 0;
    for (int t = 0; t < 10000; ++t) {
        Frame f(4, 4, 0.0, 0);
        for (double& p : f.pixels) p = noise(rng);
        const Frame b = bin(f, 2);
        for (double p : b.pixels) {
            ss += (p - 50.0) * (p - 50.0);
            ++count;
        }
    }
    const double var = ss / static_cast<double>(count);
    CHECK(var == doctest::Approx(4.0 / 4.0).epsilon(0.05));
}

TEST_CASE("vectorize: column-major order and round trip") {
    Frame f(2, 2, 0.0, 0);
    f.at(0, 0) = 1;
    f.at(0, 1) = 2;
    f.at(1, 0) = 3;
    f.at(1, 1) = 4;
    const PixelVector v = vectorize(f);
    CHECK(v == PixelVector{1, 3, 2, 4});

    Frame single(1, 1, 7.0, 0);
    CHECK(vectorize(single) == PixelVector{7});

    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0.0, 100.0);
    for (int t = 0; t < 100; ++t) {
        const std::uint32_t r = 1 + rng() % 6, c = 1 + rng() % 6;
        Frame g(r, c, 0.0, static_cast<std::uint32_t>(t));
        for (double& p : g.pixels) p = u(rng);
        const Frame back = reshape(vectorize(g), r, c, g.index);
        CHECK(back.pixels == g.pixels);
    }
}

TEST_CASE("binning a constant frame stays constant after vectorizing") {
    const Frame f = constant_frame(6, 4, 42.5);
    for (double p : vectorize(bin(f, 2))) CHECK(p == doctest::Approx(42.5));
}

TEST_CASE("container file round trip") {
    const std::string path = (std::filesystem::temp_directory_path() / "glucokin_io_test.glkf").string();
    Measurement m;
    m.sample_rate_fps = 30.0;
    m.resolution_um_per_px = 30.0;
    m.bin_size = 2;
    m.has_glucose_truth = true;
    m.glucose_mg_dl = 150.0;
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0.0, 100.0);
    for (int i = 0; i < 3; ++i) {
        Frame f(4, 6, 0.0, static_cast<std::uint32_t>(i));
        for (double& p : f.pixels) p = u(rng);
        m.calibration_frames.push_back(f);
    }
    for (int i = 0; i < 5; ++i) {
        Frame f(4, 6, 0.0, static_cast<std::uint32_t>(i));
        for (double& p : f.pixels) p = u(rng);
        m.frames.push_back(f);
    }
    io::write_measurement(path, m);
    const Measurement back = io::read_measurement(path);
    CHECK(back.calibration_frames.size() == 3);
    CHECK(back.frames.size() == 5);
    CHECK(back.sample_rate_fps == doctest::Approx(30.0));
    CHECK(back.bin_size == 2);
    CHECK(back.has_glucose_truth);
    CHECK(back.glucose_mg_dl == doctest::Approx(150.0));
    for (std::size_t i = 0; i < 5; ++i) {
        CHECK(back.frames[i].index == i);
        for (std::size_t p = 0; p < back.frames[i].pixels.size(); ++p)
            CHECK(back.frames[i].pixels[p] ==
                  doctest::Approx(m.frames[i].pixels[p]).epsilon(1e-6));  // f32 storage
    }
    std::remove(path.c_str());
    std::remove((path + ".json").c_str());
}

TEST_CASE("container file rejects bad magic and truncation") {
    const auto dir = std::filesystem::temp_directory_path();
    const std::string bad = (dir / "glucokin_bad.glkf").string();
    {
        std::ofstream os(bad, std::ios::binary);
        os << "NOPE";
    }
    CHECK_THROWS(io::read_measurement(bad));
    std::remove(bad.c_str());
}
