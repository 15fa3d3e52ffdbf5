#include <doctest.h>

#include <random>

#include "glucokin/dropdetect.hpp"
#include "oracles.hpp"

using namespace glucokin;

TEST_CASE("test_statistic: basic values and shift invariance") {
    CHECK(dropdetect::test_statistic({5, 5, 5, 5}) == doctest::Approx(0.0));
    CHECK(dropdetect::test_statistic({0, 2}) == doctest::Approx(2.0));

    std::mt19937_64 rng(1);
    std::normal_distribution<double> noise(0.0, 1.0);
    PixelVector x(64);
    for (double& v : x) v = noise(rng);
    const double t0 = dropdetect::test_statistic(x);
    for (double& v : x) v += 123.456;
    CHECK(dropdetect::test_statistic(x) == doctest::Approx(t0).epsilon(1e-9));

    CHECK_THROWS_AS(dropdetect::test_statistic({1.0}), std::invalid_argument);
}

TEST_CASE("test_statistic: chi-square mean over Monte Carlo") {
    const std::size_t L = 1210;
    const double sigma_sq = 0.7;
    std::mt19937_64 rng(7);
    std::normal_distribution<double> noise(0.0, std::sqrt(sigma_sq));
    double acc = 0.0;
    const int trials = 10000;
    PixelVector x(L);
    for (int t = 0; t < trials; ++t) {
        for (double& v : x) v = noise(rng);
        acc += dropdetect::test_statistic(x) / sigma_sq;
    }
    const double mean = acc / trials;
    CHECK(mean == doctest::Approx(static_cast<double>(L - 1)).epsilon(0.03));
}

TEST_CASE("threshold: closed form against a bisection quantile oracle") {
    dropdetect::DropDetectorConfig cfg;
    cfg.sigma1_sq = 1.0;

    cfg.p_fa = 0.5;
    CHECK(dropdetect::threshold(cfg, 1210) == doctest::Approx(1210.0).epsilon(1e-9));

    cfg.p_fa = 0.01;
    const double expected = 1210.0 + std::sqrt(2420.0) * oracle::normal_upper_quantile_bisect(0.01);
    CHECK(dropdetect::threshold(cfg, 1210) == doctest::Approx(expected).epsilon(1e-9));

    cfg.sigma1_sq = 2.5;
    CHECK(dropdetect::threshold(cfg, 1210) == doctest::Approx(2.5 * expected).epsilon(1e-9));
}

TEST_CASE("threshold: monotone in sigma1_sq and p_fa, rejects small L") {
    dropdetect::DropDetectorConfig a, b;
    a.sigma1_sq = 1.0;
    b.sigma1_sq = 1.5;
    CHECK(dropdetect::threshold(b, 100) > dropdetect::threshold(a, 100));
    a.p_fa = 0.01;
    b = a;
    b.p_fa = 0.001;
    CHECK(dropdetect::threshold(b, 100) > dropdetect::threshold(a, 100));
    CHECK_THROWS_AS(dropdetect::threshold(a, 29), std::invalid_argument);
    a.p_fa = 0.0;
    CHECK_THROWS_AS(dropdetect::threshold(a, 100), std::invalid_argument);
}

TEST_CASE("detect: constant frames never trigger") {
    std::vector<Frame> frames(20, Frame(8, 8, 42.0, 0));
    dropdetect::DropDetectorConfig cfg;
    cfg.sigma1_sq = 1.0;
    const auto d = dropdetect::detect(frames, cfg);
    CHECK_FALSE(d.n_d.has_value());
}

TEST_CASE("detect: injected variance jump found with debounce slack") {
    std::mt19937_64 rng(21);
    std::normal_distribution<double> quiet(50.0, 0.5);
    std::normal_distribution<double> loud(50.0, 3.0);
    for (int run = 0; run < 20; ++run) {
        std::vector<Frame> frames;
        for (int n = 0; n < 120; ++n) {
            Frame f(8, 8, 0.0, static_cast<std::uint32_t>(n));
            for (double& p : f.pixels) p = n >= 60 ? loud(rng) : quiet(rng);
            frames.push_back(std::move(f));
        }
        dropdetect::DropDetectorConfig cfg;
        cfg.sigma1_sq = 0.25;
        cfg.p_fa = 0.01;
        const auto d = dropdetect::detect(frames, cfg);
        REQUIRE(d.n_d.has_value());
        CHECK(*d.n_d >= 60);
        CHECK(*d.n_d <= 60 + cfg.min_consecutive);
    }
}

TEST_CASE("detect: lowering p_fa never gives an earlier drop") {
    std::mt19937_64 rng(33);
    std::normal_distribution<double> quiet(50.0, 0.5);
    std::normal_distribution<double> loud(50.0, 1.1);  // marginal jump
    std::vector<Frame> frames;
    for (int n = 0; n < 200; ++n) {
        Frame f(8, 8, 0.0, static_cast<std::uint32_t>(n));
        for (double& p : f.pixels) p = n >= 100 ? loud(rng) : quiet(rng);
        frames.push_back(std::move(f));
    }
    dropdetect::DropDetectorConfig loose, tight;
    loose.sigma1_sq = tight.sigma1_sq = 0.25;
    loose.p_fa = 0.05;
    tight.p_fa = 0.001;
    const auto dl = dropdetect::detect(frames, loose);
    const auto dt = dropdetect::detect(frames, tight);
    if (dt.n_d.has_value()) {
        REQUIRE(dl.n_d.has_value());
        CHECK(*dl.n_d <= *dt.n_d);
    }
}

TEST_CASE("detect: pure noise with tiny p_fa stays silent") {
    std::mt19937_64 rng(55);
    std::normal_distribution<double> noise(50.0, 1.0);
    int silent = 0;
    for (int run = 0; run < 100; ++run) {
        std::vector<Frame> frames;
        for (int n = 0; n < 580; ++n) {
            Frame f(10, 10, 0.0, static_cast<std::uint32_t>(n));
            for (double& p : f.pixels) p = noise(rng);
            frames.push_back(std::move(f));
        }
        dropdetect::DropDetectorConfig cfg;
        cfg.sigma1_sq = 1.0;
        cfg.p_fa = 1e-4;
        if (!dropdetect::detect(frames, cfg).n_d.has_value()) ++silent;
    }
    CHECK(silent >= 99);
}

TEST_CASE("estimate_sigma1_sq predicts normalized reaction-frame variance") {
    // Raw frames are c*(1 + noise); normalisation against the mean of the
    // calibration frames couples their noise to the divisor. The estimator
    // must describe frames with noise independent of the divisor.
    std::mt19937_64 rng(99);
    std::normal_distribution<double> noise(0.0, 0.01);
    const std::uint32_t R = 16, C = 16;
    const int n_calib = 10;
    std::vector<Frame> raw_calib;
    for (int i = 0; i < n_calib; ++i) {
        Frame f(R, C, 0.0, static_cast<std::uint32_t>(i));
        for (double& p : f.pixels) p = 0.8 * (1.0 + noise(rng));
        raw_calib.push_back(std::move(f));
    }
    const Frame ref = calibration_mean(raw_calib);
    std::vector<Frame> norm_calib;
    for (const Frame& f : raw_calib) norm_calib.push_back(normalize(f, ref));
    const double est = dropdetect::estimate_sigma1_sq(norm_calib);

    // empirical variance of independently drawn normalized frames
    double ss = 0.0;
    std::size_t cnt = 0;
    for (int t = 0; t < 400; ++t) {
        Frame f(R, C, 0.0, 0);
        for (double& p : f.pixels) p = 0.8 * (1.0 + noise(rng));
        const Frame n = normalize(f, ref);
        const double m = stats::mean(n.pixels);
        for (double p : n.pixels) ss += (p - m) * (p - m);
        cnt += n.size() - 1;
    }
    const double actual = ss / static_cast<double>(cnt);
    CHECK(est == doctest::Approx(actual).epsilon(0.08));
}
