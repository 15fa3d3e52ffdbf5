#include <doctest.h>

#include <random>

#include "glucokin/modeseek.hpp"
#include "oracles.hpp"

using namespace glucokin;
using modeseek::Variant;

namespace {
std::vector<Point> points_1d(const std::vector<double>& vals) {
    std::vector<Point> pts;
    for (double v : vals) pts.emplace_back(v);
    return pts;
}
std::vector<double> uniform_w(std::size_t n) {
    return std::vector<double>(n, 1.0 / static_cast<double>(n));
}
}  // namespace

TEST_CASE("kde: zero distance, symmetry, naive oracle") {
    KernelConfig k(2.0);
    const auto single = points_1d({3.0});
    CHECK(modeseek::kde(Point(3.0), single, {1.0}, k) == doctest::Approx(0.5));  // k(0)/h

    const auto pair = points_1d({-1.0, 1.0});
    const double at0 = modeseek::kde(Point(0.0), pair, uniform_w(2), k);
    const double one_side = 0.5 * KernelConfig::profile(k.scaled_sqdist(Point(0.0), Point(1.0))) / 2.0;
    CHECK(at0 == doctest::Approx(2.0 * one_side));

    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> u(0.0, 10.0);
    std::vector<Point> data;
    std::vector<std::vector<double>> data_o;
    for (int i = 0; i < 20; ++i) {
        const double v = u(rng);
        data.emplace_back(v);
        data_o.push_back({v});
    }
    const double x = u(rng);
    const double lib = modeseek::kde(Point(x), data, uniform_w(20), k);
    const double ref = oracle::kde_naive({x}, data_o, uniform_w(20), {2.0});
    CHECK(lib == doctest::Approx(ref).epsilon(1e-12));
}

TEST_CASE("kde: rejects non-positive weights and length mismatch") {
    KernelConfig k(1.0);
    const auto data = points_1d({0.0, 1.0});
    CHECK_THROWS_AS(modeseek::kde(Point(0.0), data, {0.5, 0.0}, k), std::invalid_argument);
    CHECK_THROWS_AS(modeseek::kde(Point(0.0), data, {1.0}, k), std::invalid_argument);
}

TEST_CASE("mean_shift_step: single datum, symmetry fixed point") {
    KernelConfig k(1.0);
    const auto single = points_1d({4.2});
    CHECK(modeseek::mean_shift_step(Point(-5.0), single, {1.0}, k).v[0] == doctest::Approx(4.2));

    const auto pair = points_1d({-1.0, 1.0});
    CHECK(modeseek::mean_shift_step(Point(0.0), pair, uniform_w(2), k).v[0] ==
          doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("mean_shift_step: {0, 0.1, 10} converges to both modes") {
    KernelConfig k(1.0);
    const auto data = points_1d({0.0, 0.1, 10.0});
    const auto w = uniform_w(3);
    auto iterate = [&](double start) {
        Point x(start);
        for (int i = 0; i < 500; ++i) {
            const Point nx = modeseek::mean_shift_step(x, data, w, k);
            if (std::abs(nx.v[0] - x.v[0]) < 1e-10) return nx.v[0];
            x = nx;
        }
        return x.v[0];
    };
    CHECK(iterate(0.0) == doctest::Approx(0.05).epsilon(0.02));
    CHECK(iterate(10.0) == doctest::Approx(10.0).epsilon(1e-4));
}

TEST_CASE("medoid_shift_step: exhaustive argmin oracle, 1-d and 3-d") {
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> u(0.0, 5.0);
    for (int t = 0; t < 50; ++t) {
        const std::size_t L = 5 + rng() % 20;
        std::vector<Point> data;
        std::vector<std::vector<double>> data_o;
        const bool spatial = t % 2 == 1;
        for (std::size_t i = 0; i < L; ++i) {
            if (spatial) {
                const double a = u(rng), b = u(rng), c = u(rng);
                data.emplace_back(a, b, c);
                data_o.push_back({a, b, c});
            } else {
                const double a = u(rng);
                data.emplace_back(a);
                data_o.push_back({a});
            }
        }
        const KernelConfig k = spatial ? KernelConfig(1.5, 2.0) : KernelConfig(1.5);
        const std::vector<double> bw =
            spatial ? std::vector<double>{1.5, 2.0, 2.0} : std::vector<double>{1.5};
        std::vector<double> w(L);
        double ws = 0.0;
        for (auto& v : w) ws += (v = 0.1 + u(rng));
        for (auto& v : w) v /= ws;

        const Point query = data[rng() % L];
        std::size_t idx = 0;
        modeseek::medoid_shift_step(query, data, w, k, &idx);
        std::vector<double> q_o(bw.size());
        for (std::size_t d = 0; d < bw.size(); ++d) q_o[d] = query.v[d];
        CHECK(idx == oracle::medoid_argmin_naive(q_o, data_o, w, bw));
    }
}

TEST_CASE("medoid_shift_step: membership and isolated mode") {
    KernelConfig k(1.0);
    const auto single = points_1d({3.3});
    CHECK(modeseek::medoid_shift_step(Point(0.0), single, {1.0}, k).v[0] == doctest::Approx(3.3));

    const auto data = points_1d({0.0, 0.1, 10.0});
    const Point r = modeseek::medoid_shift_step(Point(10.0), data, uniform_w(3), k);
    CHECK(r.v[0] == doctest::Approx(10.0));
}

TEST_CASE("variant strings round trip") {
    for (const auto v :
         {Variant::MeanShift, Variant::RobustMeanShift, Variant::MedoidShift,
          Variant::RobustMedoidShift, Variant::SparseMeanShift, Variant::RobustSparseMeanShift,
          Variant::SparseMedoidShift, Variant::RobustSparseMedoidShift})
        CHECK(modeseek::variant_from_string(modeseek::to_string(v)) == v);
    CHECK_THROWS_AS(modeseek::variant_from_string("bogus"), std::invalid_argument);
}

TEST_CASE("run: two blobs give two pruned modes near the blob means") {
    std::mt19937_64 rng(8);
    std::normal_distribution<double> blob_a(0.0, 0.05), blob_b(1.0, 0.05);
    std::vector<Point> data;
    double mean_a = 0.0, mean_b = 0.0;
    for (int i = 0; i < 40; ++i) {
        const double a = blob_a(rng), b = blob_b(rng);
        data.emplace_back(a);
        data.emplace_back(b);
        mean_a += a;
        mean_b += b;
    }
    mean_a /= 40.0;
    mean_b /= 40.0;
    const KernelConfig k(0.2);
    const auto res = modeseek::run(data, Variant::MeanShift, k);
    const auto cs = modeseek::prune_modes(res.modes, k, false);
    REQUIRE(cs.centers.size() == 2);
    std::vector<double> centers = {cs.centers[0].v[0], cs.centers[1].v[0]};
    std::sort(centers.begin(), centers.end());
    CHECK(std::abs(centers[0] - mean_a) < 0.02);
    CHECK(std::abs(centers[1] - mean_b) < 0.02);
}

TEST_CASE("run: constant dataset collapses to one mode") {
    const std::vector<Point> data(25, Point(77.0));
    const KernelConfig k(1.0);
    for (const auto v : {Variant::MeanShift, Variant::MedoidShift}) {
        const auto res = modeseek::run(data, v, k);
        const auto cs = modeseek::prune_modes(res.modes, k, modeseek::is_medoid(v));
        REQUIRE(cs.centers.size() == 1);
        CHECK(cs.centers[0].v[0] == doctest::Approx(77.0));
        CHECK(cs.sizes[0] == 25);
    }
}

TEST_CASE("run: density trace never decreases") {
    std::mt19937_64 rng(31);
    std::uniform_real_distribution<double> u(0.0, 10.0);
    std::vector<Point> data;
    for (int i = 0; i < 60; ++i) data.emplace_back(u(rng));
    const KernelConfig k(0.8);
    for (const auto v : {Variant::MeanShift, Variant::MedoidShift, Variant::RobustMeanShift}) {
        const auto res = modeseek::run(data, v, k);
        for (const auto& trace : res.density_trace)
            for (std::size_t j = 1; j < trace.size(); ++j)
                CHECK(trace[j] >= trace[j - 1] - 1e-12);
    }
}

TEST_CASE("irwls: core residuals give uniform weights; outliers get less") {
    std::mt19937_64 rng(4);
    std::normal_distribution<double> noise(50.0, 0.3);
    std::vector<Point> data;
    for (int i = 0; i < 50; ++i) data.emplace_back(noise(rng));
    const KernelConfig k(2.0);

    robust::RobustConfig cfg;
    cfg.scale = 100.0;  // every residual deep inside the Huber core
    const auto uni = robust::irwls_weights(data, k, cfg);
    for (double w : uni.weights) CHECK(w == doctest::Approx(1.0 / 50.0).epsilon(1e-9));

    data.emplace_back(95.0);  // gross outlier
    const auto rob = robust::irwls_weights(data, k, {});
    double wsum = 0.0;
    for (double w : rob.weights) {
        CHECK(w > 0.0);
        wsum += w;
    }
    CHECK(wsum == doctest::Approx(1.0).epsilon(1e-9));
    const double outlier_w = rob.weights.back();
    for (std::size_t i = 0; i + 1 < rob.weights.size(); ++i) CHECK(outlier_w < rob.weights[i]);
}

TEST_CASE("irwls: robust mean-shift equals plain mean-shift when nothing is an outlier") {
    std::mt19937_64 rng(12);
    std::normal_distribution<double> noise(40.0, 0.5);
    std::vector<Point> data;
    for (int i = 0; i < 30; ++i) data.emplace_back(noise(rng));
    const KernelConfig k(3.0);
    modeseek::ModeSeekOptions opts;
    opts.robust.scale = 1e6;  // forces uniform IRWLS weights
    const auto plain = modeseek::run(data, Variant::MeanShift, k, opts);
    const auto rob = modeseek::run(data, Variant::RobustMeanShift, k, opts);
    for (std::size_t i = 0; i < data.size(); ++i)
        CHECK(rob.modes[i].v[0] == doctest::Approx(plain.modes[i].v[0]).epsilon(1e-10));
}

TEST_CASE("huber constant 1.345 sits at 95% Gaussian efficiency") {
    CHECK(oracle::huber_efficiency(1.345) == doctest::Approx(0.95).epsilon(0.002));
}

TEST_CASE("prune_modes: basic grouping rules") {
    const KernelConfig k(1.0);  // h = 1
    const auto all_same = std::vector<Point>(10, Point(5.0));
    const auto cs1 = modeseek::prune_modes(all_same, k, false);
    CHECK(cs1.centers.size() == 1);
    CHECK(cs1.sizes[0] == 10);

    const auto spread = points_1d({0.0, 0.5, 10.0});
    const auto cs2 = modeseek::prune_modes(spread, k, false);
    REQUIRE(cs2.centers.size() == 2);
    std::vector<std::size_t> sizes = {cs2.sizes[0], cs2.sizes[1]};
    std::sort(sizes.begin(), sizes.end());
    CHECK(sizes[0] == 1);
    CHECK(sizes[1] == 2);

    std::mt19937_64 rng(44);
    std::uniform_real_distribution<double> u(0.0, 20.0);
    for (int t = 0; t < 100; ++t) {
        std::vector<Point> modes;
        for (int i = 0; i < 30; ++i) modes.emplace_back(u(rng));
        const auto cs = modeseek::prune_modes(modes, k, t % 2 == 1);
        for (std::size_t a = 0; a < cs.centers.size(); ++a)
            for (std::size_t b = a + 1; b < cs.centers.size(); ++b)
                CHECK(k.scaled_sqdist(cs.centers[a], cs.centers[b]) > 1.0);
        std::size_t total = 0;
        for (auto s : cs.sizes) total += s;
        CHECK(total == modes.size());
    }
}
