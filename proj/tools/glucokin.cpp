// glucokin command-line tool: synthetic measurement generation, drop
// detection, segmentation, convergence tracking, calibration and dataset
// evaluation. Exit codes: 0 success, 2 invalid input, 3 pipeline incomplete
// (no drop or no convergence).

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "glucokin/pipeline.hpp"

using nlohmann::json;
namespace gk = glucokin;

namespace {

constexpr int kExitInvalidInput = 2;
constexpr int kExitIncomplete = 3;

std::vector<double> parse_levels(const std::string& csv) {
    std::vector<double> out;
    std::stringstream ss(csv);
    std::string tok;
    while (std::getline(ss, tok, ',')) out.push_back(std::stod(tok));
    return out;
}

gk::pipeline::PipelineConfig config_from_json(const json& j) {
    gk::pipeline::PipelineConfig cfg;
    if (j.contains("version") && j.at("version").get<int>() != 1)
        throw std::invalid_argument("config: unsupported schema version");
    if (j.contains("detector")) {
        const auto& d = j.at("detector");
        if (d.contains("pfa")) cfg.detector.p_fa = d.at("pfa").get<double>();
        if (d.contains("min_consecutive"))
            cfg.detector.min_consecutive = d.at("min_consecutive").get<int>();
        if (d.contains("sigma1_sq")) cfg.detector.sigma1_sq = d.at("sigma1_sq").get<double>();
    }
    if (j.contains("segment")) {
        const auto& s = j.at("segment");
        if (s.contains("variant"))
            cfg.variant = gk::modeseek::variant_from_string(s.at("variant").get<std::string>());
        if (s.contains("h")) cfg.h = s.at("h").get<double>();
        if (s.contains("spatial")) cfg.spatial = s.at("spatial").get<bool>();
        if (s.contains("h_spatial")) cfg.h_spatial = s.at("h_spatial").get<double>();
        if (s.contains("sparse_n")) cfg.seek.sparse_stop.fixed_n = s.at("sparse_n").get<std::size_t>();
        if (s.contains("tnu")) cfg.seek.sparse_stop.t_nu = s.at("tnu").get<double>();
    }
    if (j.contains("convergence")) {
        const auto& c = j.at("convergence");
        if (c.contains("method"))
            cfg.method = c.at("method").get<std::string>() == "standard"
                             ? gk::kinetics::ConvergenceMethod::Standard
                             : gk::kinetics::ConvergenceMethod::Ekf;
        if (c.contains("tslope")) cfg.t_slope = c.at("tslope").get<double>();
        if (c.contains("window")) cfg.window = c.at("window").get<std::uint32_t>();
        if (c.contains("tol_state")) cfg.tol_state = c.at("tol_state").get<double>();
        if (c.contains("w_skip")) cfg.w_skip = c.at("w_skip").get<std::uint32_t>();
        if (c.contains("q")) cfg.ekf_q = c.at("q").get<double>();
        if (c.contains("r")) cfg.ekf_r = c.at("r").get<double>();
        if (c.contains("p0")) cfg.ekf_p0 = c.at("p0").get<double>();
    }
    if (j.contains("model")) {
        const auto& mo = j.at("model");
        if (mo.contains("dtau")) cfg.model.dtau = mo.at("dtau").get<double>();
        if (mo.contains("tau0")) cfg.model.tau0 = mo.at("tau0").get<double>();
    }
    if (j.contains("calibration_path"))
        cfg.calibration = gk::calibrate::load(j.at("calibration_path").get<std::string>());
    return cfg;
}

gk::synth::DatasetManifest load_manifest(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::invalid_argument("cannot open manifest " + path);
    return gk::synth::manifest_from_json(json::parse(is));
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"glucometer kinetic-curve measurement pipeline"};
    app.require_subcommand(1);

    // simulate
    auto* sim = app.add_subcommand("simulate", "generate a synthetic dataset");
    std::string sim_levels = "50,105,160,215,270,325,380,435,490,550";
    int sim_repeats = 5;
    std::uint64_t sim_seed = 1;
    std::string sim_out = ".";
    std::uint32_t sim_frames = 580;
    sim->add_option("--levels", sim_levels, "comma-separated glucose levels (mg/dl)");
    sim->add_option("--repeats", sim_repeats, "measurements per level");
    sim->add_option("--seed", sim_seed, "RNG seed");
    sim->add_option("--out", sim_out, "output directory")->required();
    sim->add_option("--frames", sim_frames, "frames per measurement");

    // shared pipeline options
    std::string in_path, config_path, calib_path;
    std::string variant_str = "meds";
    double opt_h = 2.0;
    bool opt_spatial = false;
    bool opt_sparse = false;
    std::size_t opt_sparse_n = 0;
    double opt_tnu = 1e-3;
    double opt_pfa = 0.01;
    int opt_min_consec = 3;
    std::string method_str = "ekf";
    double opt_tslope = 1e-2;

    auto add_common = [&](CLI::App* cmd, bool needs_input) {
        if (needs_input) cmd->add_option("--input", in_path, "GLKF container")->required();
        cmd->add_option("--config", config_path, "pipeline config JSON");
    };
    auto add_segment_opts = [&](CLI::App* cmd) {
        cmd->add_option("--variant", variant_str,
                        "ms|rms|meds|rmeds|ssms|rssms|ssmeds|rssmeds");
        cmd->add_option("--bw", opt_h, "intensity bandwidth (percent)");
        cmd->add_flag("--spatial", opt_spatial, "append pixel coordinates as features");
        cmd->add_flag("--sparse", opt_sparse, "force a sparse variant");
        cmd->add_option("--N", opt_sparse_n, "fixed sparse subset size");
        cmd->add_option("--tnu", opt_tnu, "incoherence gradient threshold T_nu");
    };

    auto* det = app.add_subcommand("detect", "drop-time detection");
    add_common(det, true);
    det->add_option("--pfa", opt_pfa, "false-alarm probability");
    det->add_option("--min-consec", opt_min_consec, "consecutive H1 frames required");

    auto* seg = app.add_subcommand("segment", "segment one frame");
    add_common(seg, true);
    add_segment_opts(seg);
    std::uint32_t seg_frame = 0;
    seg->add_option("--frame", seg_frame, "frame index to segment")->required();

    auto* trk = app.add_subcommand("track", "convergence tracking");
    add_common(trk, true);
    add_segment_opts(trk);
    trk->add_option("--method", method_str, "standard|ekf");
    trk->add_option("--tslope", opt_tslope, "slope threshold");
    std::string trace_path;
    trk->add_option("--trace", trace_path, "write the per-frame trace CSV here");

    auto* cal = app.add_subcommand("calibrate", "fit the remission->glucose curve");
    std::string cal_manifest, cal_out = "curve.json";
    cal->add_option("--manifest", cal_manifest, "dataset manifest JSON")->required();
    cal->add_option("--out", cal_out, "output curve path");
    cal->add_option("--config", config_path, "pipeline config JSON");
    add_segment_opts(cal);

    auto* runc = app.add_subcommand("run", "full pipeline on one measurement");
    add_common(runc, true);
    add_segment_opts(runc);
    runc->add_option("--method", method_str, "standard|ekf");
    runc->add_option("--calib", calib_path, "calibration curve JSON");
    runc->add_option("--trace", trace_path, "write the per-frame trace CSV here");

    auto* eval = app.add_subcommand("evaluate", "score a dataset");
    std::string eval_manifest, eval_out = "report.json", eval_ceg = "ceg.csv", eval_svg;
    eval->add_option("--manifest", eval_manifest, "dataset manifest JSON")->required();
    eval->add_option("--calib", calib_path, "calibration curve JSON")->required();
    eval->add_option("--out", eval_out, "report JSON path");
    eval->add_option("--ceg", eval_ceg, "CEG scatter CSV path");
    eval->add_option("--svg", eval_svg, "optional CEG SVG path");
    eval->add_option("--config", config_path, "pipeline config JSON");
    add_segment_opts(eval);
    eval->add_option("--method", method_str, "standard|ekf");

    CLI11_PARSE(app, argc, argv);

    try {
        gk::pipeline::PipelineConfig cfg;
        if (!config_path.empty()) {
            std::ifstream is(config_path);
            if (!is) throw std::invalid_argument("cannot open config " + config_path);
            cfg = config_from_json(json::parse(is));
        }
        // CLI flags override file values
        auto given = [](CLI::App* cmd, const std::string& name) {
            const auto* o = cmd->get_option_no_throw(name);
            return o != nullptr && o->count() > 0;
        };
        auto apply_overrides = [&](CLI::App* cmd) {
            if (given(cmd, "--variant")) cfg.variant = gk::modeseek::variant_from_string(variant_str);
            if (given(cmd, "--bw")) cfg.h = opt_h;
            if (given(cmd, "--spatial")) cfg.spatial = opt_spatial;
            if (given(cmd, "--N")) cfg.seek.sparse_stop = gk::sparse::SparseStop::fixed(opt_sparse_n);
            if (given(cmd, "--tnu")) cfg.seek.sparse_stop = gk::sparse::SparseStop::gradient(opt_tnu);
            if (given(cmd, "--sparse") && !gk::modeseek::is_sparse(cfg.variant)) {
                cfg.variant = gk::modeseek::is_robust(cfg.variant)
                                  ? (gk::modeseek::is_medoid(cfg.variant)
                                         ? gk::modeseek::Variant::RobustSparseMedoidShift
                                         : gk::modeseek::Variant::RobustSparseMeanShift)
                                  : (gk::modeseek::is_medoid(cfg.variant)
                                         ? gk::modeseek::Variant::SparseMedoidShift
                                         : gk::modeseek::Variant::SparseMeanShift);
            }
            if (given(cmd, "--method"))
                cfg.method = method_str == "standard" ? gk::kinetics::ConvergenceMethod::Standard
                                                      : gk::kinetics::ConvergenceMethod::Ekf;
            if (given(cmd, "--tslope")) cfg.t_slope = opt_tslope;
            if (given(cmd, "--pfa")) cfg.detector.p_fa = opt_pfa;
            if (given(cmd, "--min-consec")) cfg.detector.min_consecutive = opt_min_consec;
            if (given(cmd, "--calib")) cfg.calibration = gk::calibrate::load(calib_path);
        };

        if (sim->parsed()) {
            std::filesystem::create_directories(sim_out);
            gk::synth::GeneratorConfig gen;
            gen.n_frames = sim_frames;
            const auto levels = parse_levels(sim_levels);
            gk::synth::generate_dataset(levels, sim_repeats, gen, sim_seed, sim_out);
            std::cout << json{{"out", sim_out},
                              {"measurements", levels.size() * static_cast<std::size_t>(sim_repeats)}}
                             .dump(2)
                      << "\n";
            return 0;
        }

        if (det->parsed()) {
            apply_overrides(det);
            const auto m = gk::io::read_measurement(in_path);
            const gk::Frame calib_mean = gk::calibration_mean(m.calibration_frames);
            std::vector<gk::Frame> pp;
            for (const auto& f : m.frames) pp.push_back(gk::bin(gk::normalize(f, calib_mean), m.bin_size));
            auto dcfg = cfg.detector;
            if (!(dcfg.sigma1_sq > 0.0)) {
                std::vector<gk::Frame> cpp;
                // unclamped: the calibration frames sit at the clamp itself
                for (const auto& f : m.calibration_frames)
                    cpp.push_back(gk::bin(gk::normalize(f, calib_mean, false), m.bin_size));
                dcfg.sigma1_sq = gk::dropdetect::estimate_sigma1_sq(cpp);
            }
            const auto d = gk::dropdetect::detect(pp, dcfg);
            json j;
            j["n_d"] = d.n_d ? json(*d.n_d) : json(nullptr);
            j["threshold"] = d.threshold;
            j["sigma1_sq"] = dcfg.sigma1_sq;
            std::cout << j.dump(2) << "\n";
            return d.n_d ? 0 : kExitIncomplete;
        }

        if (seg->parsed()) {
            apply_overrides(seg);
            const auto m = gk::io::read_measurement(in_path);
            if (seg_frame >= m.frames.size())
                throw std::invalid_argument("frame index out of range");
            const gk::Frame calib_mean = gk::calibration_mean(m.calibration_frames);
            const gk::Frame pp =
                gk::bin(gk::normalize(m.frames[seg_frame], calib_mean), m.bin_size);
            const auto pts = gk::frame_points(pp, cfg.spatial);
            const auto seek = gk::modeseek::run(pts, cfg.variant, cfg.kernel(), cfg.seek);
            const auto clusters = gk::modeseek::prune_modes(seek.modes, cfg.kernel(),
                                                            gk::modeseek::is_medoid(cfg.variant));
            const auto region = gk::roi::assign(clusters);
            json j;
            j["variant"] = gk::modeseek::to_string(cfg.variant);
            j["clusters"] = json::array();
            for (std::size_t i = 0; i < clusters.centers.size(); ++i)
                j["clusters"].push_back({{"intensity", clusters.centers[i].v[0]},
                                         {"size", clusters.sizes[i]},
                                         {"role", gk::roi::role_name(region.roles[i])}});
            j["r_hat"] = region.r_hat;
            j["single_region"] = region.single_region;
            if (gk::modeseek::is_sparse(cfg.variant)) j["n_nu"] = seek.basis.size();
            std::cout << j.dump(2) << "\n";
            return 0;
        }

        if (trk->parsed() || runc->parsed()) {
            CLI::App* cmd = trk->parsed() ? trk : runc;
            apply_overrides(cmd);
            const auto m = gk::io::read_measurement(in_path);
            const auto res = gk::pipeline::run_pipeline(m, cfg);
            if (!trace_path.empty()) gk::pipeline::write_trace_csv(res, trace_path);
            std::cout << gk::pipeline::result_to_json(res).dump(2) << "\n";
            return res.n_d && res.n_c ? 0 : kExitIncomplete;
        }

        if (cal->parsed()) {
            apply_overrides(cal);
            const auto manifest = load_manifest(cal_manifest);
            const std::string dir = std::filesystem::path(cal_manifest).parent_path().string();
            const auto ev = gk::pipeline::evaluate_dataset(manifest, dir.empty() ? "." : dir, cfg);
            std::vector<std::pair<double, double>> pairs;
            for (std::size_t i = 0; i < manifest.entries.size(); ++i)
                if (ev.results[i].n_c)
                    pairs.emplace_back(ev.results[i].r_c_hat, manifest.entries[i].glucose);
            auto curve = gk::calibrate::fit(pairs);
            curve.source_dataset = cal_manifest;
            gk::calibrate::save(curve, cal_out);
            std::cout << gk::calibrate::to_json(curve).dump(2) << "\n";
            return 0;
        }

        if (eval->parsed()) {
            apply_overrides(eval);
            cfg.calibration = gk::calibrate::load(calib_path);
            const auto manifest = load_manifest(eval_manifest);
            const std::string dir = std::filesystem::path(eval_manifest).parent_path().string();
            const auto ev = gk::pipeline::evaluate_dataset(manifest, dir.empty() ? "." : dir, cfg);
            std::ofstream os(eval_out);
            if (!os) throw std::invalid_argument("cannot open " + eval_out);
            os << gk::pipeline::report_to_json(ev.report).dump(2) << "\n";
            gk::pipeline::write_ceg_csv(ev.glucose_pairs, eval_ceg);
            if (!eval_svg.empty()) gk::pipeline::write_ceg_svg(ev.glucose_pairs, eval_svg);
            std::cout << gk::pipeline::report_to_json(ev.report).dump(2) << "\n";
            return 0;
        }
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitInvalidInput;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
