#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "glucokin/synth.hpp"

using namespace glucokin;

TEST_CASE("generator: deterministic given the seed") {
    synth::GeneratorConfig cfg;
    cfg.n_frames = 40;
    const auto [m1, t1] = synth::generate_measurement(cfg, 150.0, 77);
    const auto [m2, t2] = synth::generate_measurement(cfg, 150.0, 77);
    REQUIRE(m1.frames.size() == m2.frames.size());
    for (std::size_t i = 0; i < m1.frames.size(); ++i)
        CHECK(m1.frames[i].pixels == m2.frames[i].pixels);
    CHECK(t1.r_c == t2.r_c);

    const auto [m3, t3] = synth::generate_measurement(cfg, 150.0, 78);
    CHECK(m1.frames[0].pixels != m3.frames[0].pixels);
}

TEST_CASE("generator: region masks partition the frame") {
    synth::GeneratorConfig cfg;
    cfg.n_frames = 5;
    const auto [m, truth] = synth::generate_measurement(cfg, 300.0, 5);
    CHECK(truth.mask.size() == static_cast<std::size_t>(cfg.scene.rows) * cfg.scene.cols);
    std::size_t roi = 0, edge = 0, bg = 0, art = 0;
    for (auto r : truth.mask) {
        switch (r) {
            case synth::Region::Roi: ++roi; break;
            case synth::Region::Edge: ++edge; break;
            case synth::Region::Background: ++bg; break;
            case synth::Region::Artefact: ++art; break;
        }
    }
    CHECK(roi > 0);
    CHECK(edge > 0);
    CHECK(bg > 0);
    CHECK(roi + edge + bg + art == truth.mask.size());
}

TEST_CASE("generator: noiseless ROI pixels follow the kinetic model exactly") {
    synth::GeneratorConfig cfg;
    cfg.scene.noise_sigma = 0.0;
    cfg.scene.artefact_count = 0;
    cfg.n_frames = 120;
    cfg.n_d = 30;
    const auto [m, truth] = synth::generate_measurement(cfg, 200.0, 9);
    const Frame ref = calibration_mean(m.calibration_frames);
    for (std::uint32_t n : {30u, 60u, 119u}) {
        const Frame norm = normalize(m.frames[n], ref);
        const double expect =
            kinetics::model_eval(static_cast<double>(n - cfg.n_d), truth.r_d, truth.r_c,
                                 cfg.kinetics.model);
        for (std::uint32_t c = 0; c < cfg.scene.cols; ++c)
            for (std::uint32_t r = 0; r < cfg.scene.rows; ++r)
                if (truth.mask[static_cast<std::size_t>(c) * cfg.scene.rows + r] ==
                    synth::Region::Roi)
                    CHECK(norm.at(r, c) == doctest::Approx(expect).epsilon(1e-9));
    }
}

TEST_CASE("generator: ROI mean trace matches the model within noise bounds") {
    synth::GeneratorConfig cfg;
    cfg.n_frames = 200;
    cfg.n_d = 40;
    const auto [m, truth] = synth::generate_measurement(cfg, 250.0, 23);
    const Frame ref = calibration_mean(m.calibration_frames);
    std::size_t roi_count = 0;
    for (auto r : truth.mask) roi_count += r == synth::Region::Roi ? 1 : 0;
    REQUIRE(roi_count > 0);
    const double bound = 3.5 * cfg.scene.noise_sigma / std::sqrt(static_cast<double>(roi_count));
    for (std::uint32_t n = cfg.n_d; n < cfg.n_frames; n += 13) {
        const Frame norm = normalize(m.frames[n], ref);
        double acc = 0.0;
        for (std::uint32_t c = 0; c < cfg.scene.cols; ++c)
            for (std::uint32_t r = 0; r < cfg.scene.rows; ++r)
                if (truth.mask[static_cast<std::size_t>(c) * cfg.scene.rows + r] ==
                    synth::Region::Roi)
                    acc += norm.at(r, c);
        acc /= static_cast<double>(roi_count);
        const double expect = kinetics::model_eval(static_cast<double>(n - cfg.n_d), truth.r_d,
                                                   truth.r_c, cfg.kinetics.model);
        CHECK(std::abs(acc - expect) < bound + 0.05);  // small slack for the normalisation noise
    }
}

TEST_CASE("generator: kinetic ordering over glucose") {
    synth::GeneratorConfig cfg;
    cfg.n_frames = 5;
    const auto [m_lo, t_lo] = synth::generate_measurement(cfg, 50.0, 1);
    const auto [m_hi, t_hi] = synth::generate_measurement(cfg, 400.0, 1);
    CHECK(t_hi.r_c < t_lo.r_c);
    CHECK(t_hi.rate < t_lo.rate);  // steeper decay for high glucose
    CHECK(t_lo.rate < 0.0);
}

TEST_CASE("generator: rejects out-of-range glucose") {
    synth::GeneratorConfig cfg;
    CHECK_THROWS_AS(synth::generate_measurement(cfg, 10.0, 1), std::invalid_argument);
    CHECK_THROWS_AS(synth::generate_measurement(cfg, 700.0, 1), std::invalid_argument);
}

TEST_CASE("dataset: manifest truths round trip through JSON") {
    synth::GeneratorConfig cfg;
    cfg.n_frames = 30;
    const auto man = synth::generate_dataset({100.0, 300.0}, 2, cfg, 55, "");
    CHECK(man.entries.size() == 4);
    const auto j = synth::manifest_to_json(man);
    const auto back = synth::manifest_from_json(j);
    REQUIRE(back.entries.size() == man.entries.size());
    for (std::size_t i = 0; i < man.entries.size(); ++i) {
        CHECK(back.entries[i].file == man.entries[i].file);
        CHECK(back.entries[i].glucose == man.entries[i].glucose);
        CHECK(back.entries[i].r_c == man.entries[i].r_c);
        CHECK(back.entries[i].n_d == man.entries[i].n_d);
        CHECK(back.entries[i].seed == man.entries[i].seed);
    }
}

TEST_CASE("dataset: repeated generation writes bitwise-identical containers") {
    namespace fs = std::filesystem;
    const auto dir1 = fs::temp_directory_path() / "glucokin_det_a";
    const auto dir2 = fs::temp_directory_path() / "glucokin_det_b";
    fs::create_directories(dir1);
    fs::create_directories(dir2);
    synth::GeneratorConfig cfg;
    cfg.n_frames = 30;
    synth::generate_dataset({150.0}, 1, cfg, 99, dir1.string());
    synth::generate_dataset({150.0}, 1, cfg, 99, dir2.string());
    auto slurp = [](const fs::path& p) {
        std::ifstream is(p, std::ios::binary);
        return std::string((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
    };
    const auto f1 = slurp(dir1 / "m_150_0.glkf");
    const auto f2 = slurp(dir2 / "m_150_0.glkf");
    CHECK(f1.size() > 0);
    CHECK(f1 == f2);
    fs::remove_all(dir1);
    fs::remove_all(dir2);
}
