#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "gsmap/io/checkpoint.hpp"
#include "gsmap/io/config.hpp"
#include "gsmap/io/png_io.hpp"
#include "gsmap/io/synthetic.hpp"
#include "gsmap/pipeline/gradcheck.hpp"
#include "gsmap/pipeline/pipeline.hpp"
#include "gsmap/render/rasterizer.hpp"

namespace {

gsmap::Pose parse_pose(const std::string& text) {
    std::istringstream is(text);
    double qw, qx, qy, qz, tx, ty, tz;
    if (!(is >> qw >> qx >> qy >> qz >> tx >> ty >> tz))
        throw CLI::ValidationError("--pose", "expected \"qw qx qy qz tx ty tz\"");
    return gsmap::Pose(Eigen::Quaterniond(qw, qx, qy, qz), Eigen::Vector3d(tx, ty, tz));
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"gsmap: incremental 3D Gaussian splatting mapper for "
                 "recorded LiDAR-visual sequences"};
    app.require_subcommand(1);

    // synth -----------------------------------------------------------------
    auto* synth = app.add_subcommand("synth", "Generate a synthetic ground-truth sequence");
    gsmap::SyntheticSpec spec;
    std::string synth_out;
    synth->add_option("--out", synth_out, "Output sequence directory")->required();
    synth->add_option("--gaussians", spec.n_gaussians, "Number of Gaussians");
    synth->add_option("--frames", spec.n_frames, "Number of frames");
    synth->add_option("--seed", spec.seed, "Random seed");
    synth->add_option("--extent", spec.extent, "Scene extent in meters");
    synth->add_option("--trajectory", spec.trajectory, "line or orbit");
    synth->add_option("--width", spec.width, "Image width");
    synth->add_option("--height", spec.height, "Image height");
    synth->add_option("--focal", spec.focal, "Focal length in pixels");
    synth->add_option("--lidar-noise", spec.lidar_noise, "Range noise sigma in meters");

    // train -----------------------------------------------------------------
    auto* train = app.add_subcommand("train", "Train a map from a recorded sequence");
    std::string train_seq, train_cfg_file, train_out;
    bool train_single = false;
    train->add_option("--seq", train_seq, "Sequence directory")->required();
    train->add_option("--config", train_cfg_file, "Config file (key = value)");
    train->add_option("--out", train_out, "Output directory")->required();
    train->add_flag("--single-thread", train_single, "Serialize the pipeline");

    // render ----------------------------------------------------------------
    auto* rend = app.add_subcommand("render", "Render one view from a checkpoint");
    std::string rend_map, rend_pose, rend_out, rend_depth;
    gsmap::CameraModel rend_cam{500.0, 500.0, 319.5, 239.5, 640, 480};
    rend->add_option("--map", rend_map, "Checkpoint file")->required();
    rend->add_option("--pose", rend_pose, "\"qw qx qy qz tx ty tz\" (world->camera)")->required();
    rend->add_option("--out", rend_out, "Output PNG")->required();
    rend->add_option("--depth", rend_depth, "Optional depth PNG (normalized gray)");
    rend->add_option("--fx", rend_cam.fx, "Focal x");
    rend->add_option("--fy", rend_cam.fy, "Focal y");
    rend->add_option("--cx", rend_cam.cx, "Principal point x");
    rend->add_option("--cy", rend_cam.cy, "Principal point y");
    rend->add_option("--width", rend_cam.width, "Image width");
    rend->add_option("--height", rend_cam.height, "Image height");

    // eval ------------------------------------------------------------------
    auto* eval = app.add_subcommand("eval", "Score a checkpoint against a sequence");
    std::string eval_map, eval_seq, eval_out;
    eval->add_option("--map", eval_map, "Checkpoint file")->required();
    eval->add_option("--seq", eval_seq, "Sequence directory")->required();
    eval->add_option("--out", eval_out, "Report output path (.jsonl)")->required();

    // grad-check ------------------------------------------------------------
    auto* gc = app.add_subcommand("grad-check", "Finite-difference gradient suite");
    gsmap::GradCheckOptions gc_opts;
    gc->add_option("--seed", gc_opts.seed, "Random seed");
    gc->add_option("--gaussians", gc_opts.n_gaussians, "Gaussians per configuration");
    gc->add_option("--configs", gc_opts.configs, "Number of render configurations");
    gc->add_option("--core-configs", gc_opts.core_configs, "Core-primitive configurations");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*synth) {
            gsmap::write_synthetic_scene(synth_out, spec);
            std::printf("wrote %d frames, %d gaussians to %s\n", spec.n_frames,
                        spec.n_gaussians, synth_out.c_str());
        } else if (*train) {
            gsmap::PipelineConfig cfg;
            if (!train_cfg_file.empty()) {
                cfg = gsmap::PipelineConfig::load_file(train_cfg_file);
            } else {
                cfg.apply_environment();
            }
            if (train_single) cfg.single_thread = true;
            cfg.out_dir = train_out;
            const auto result = gsmap::run_pipeline(train_seq, cfg);
            std::printf("done: %zu keyframes, %zu gaussians, %lld steps\n",
                        result.keyframes_admitted, result.gaussian_count,
                        static_cast<long long>(result.total_steps));
        } else if (*rend) {
            const gsmap::GaussianMap map = gsmap::load_checkpoint(rend_map);
            rend_cam.validate();
            const auto out = gsmap::render(map, parse_pose(rend_pose), rend_cam);
            gsmap::write_png_rgb(rend_out, out.color);
            if (!rend_depth.empty()) {
                double dmax = 0.0;
                for (size_t i = 0; i < out.depth.size(); ++i)
                    dmax = std::max(dmax, out.depth.data()[i]);
                gsmap::write_png_gray(rend_depth, out.depth, dmax);
            }
        } else if (*eval) {
            const gsmap::GaussianMap map = gsmap::load_checkpoint(eval_map);
            gsmap::SequenceReader reader(eval_seq);
            const auto report = gsmap::evaluate_sequence(map, reader);
            std::ofstream jf(eval_out);
            jf << report.to_jsonl();
            std::printf("%s", report.summary_table().c_str());
        } else if (*gc) {
            const auto result = gsmap::run_gradcheck(gc_opts);
            std::printf("%s", result.summary.c_str());
            return result.passed ? 0 : 1;
        }
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
