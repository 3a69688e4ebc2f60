#include "gsmap/pipeline/pipeline.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <condition_variable>
#include <cstdio>
#include <deque>
#include <filesystem>
#include <fstream>
#include <optional>
#include <thread>

#include "gsmap/io/checkpoint.hpp"
#include "gsmap/map/keyframe.hpp"
#include "gsmap/map/mapper.hpp"
#include "gsmap/render/rasterizer.hpp"

namespace fs = std::filesystem;

namespace gsmap {

namespace {

constexpr size_t kOverlapHistory = 5; // admitted keyframes checked for overlap
constexpr double kDegToRad = M_PI / 180.0;

double now_seconds(const std::chrono::steady_clock::time_point& start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

} // namespace

ImageD quantize_8bit(const ImageD& image) {
    ImageD out = image;
    for (size_t i = 0; i < out.size(); ++i)
        out.data()[i] = std::lround(std::clamp(out.data()[i], 0.0, 1.0) * 255.0) / 255.0;
    return out;
}

EvalReport evaluate_sequence(const GaussianMap& map, const SequenceReader& reader, int threads) {
    ThreadPool pool(threads);
    EvalReport report;
    const auto start = std::chrono::steady_clock::now();
    for (int i = 0; i < reader.frame_count(); ++i) {
        const Frame frame = reader.read_frame(i);
        const RenderOutput out = render(map, frame.pose, reader.manifest().camera, &pool);
        EvalRecord rec;
        rec.frame = i;
        rec.psnr = psnr(quantize_8bit(out.color), frame.color);
        rec.ssim = ssim(quantize_8bit(out.color), frame.color);
        if (reader.manifest().has_gt_depth) {
            rec.depth_rmse = depth_rmse(out.depth, reader.read_gt_depth(i));
        } else {
            rec.depth_rmse =
                depth_rmse(out.depth, project_sparse_depth(frame.cloud, frame.pose,
                                                           reader.manifest().camera));
        }
        rec.iteration = map.global_step();
        rec.wall_time_s = now_seconds(start);
        report.frames.push_back(rec);
    }
    return report;
}

namespace {

/// Everything the two pipeline roles share.
struct PipelineState {
    const PipelineConfig& cfg;
    const SequenceReader& reader;
    CameraModel cam;
    ThreadPool pool;
    VoxelStore store;
    KeyframeQueue queue;
    GaussianMap map;
    std::mt19937 sample_rng;
    bool verbose;

    // Ingestion-local admission state.
    std::optional<Pose> last_admitted_pose;
    std::deque<KeyframePtr> recent_admitted;
    std::vector<KeyframePtr> all_admitted;

    // Hand-off between the roles (two-thread mode).
    std::mutex inbox_mutex;
    std::condition_variable inbox_cv;
    std::deque<KeyframePtr> inbox;
    bool ingestion_done = false;
    std::exception_ptr ingestion_error;

    PipelineState(const PipelineConfig& c, const SequenceReader& r, bool v)
        : cfg(c), reader(r), cam(r.manifest().camera), pool(c.threads),
          store(c.voxel_size, c.voxel_cap), sample_rng(c.seed), verbose(v) {}

    /// Ingest one frame; returns keyframes released from the delay buffer.
    std::vector<KeyframePtr> ingest_frame(int i) {
        Frame frame = reader.read_frame(i);
        store.insert_points(frame.cloud, frame.timestamp);

        if (last_admitted_pose &&
            !should_admit(frame.pose, *last_admitted_pose, cfg.kf.tau_r_deg * kDegToRad,
                          cfg.kf.tau_t_m))
            return {};
        if (sharpness_score(frame.color) < cfg.kf.blur_threshold) return {};

        auto kf = std::make_shared<Keyframe>();
        kf->id = i;
        kf->pose = frame.pose;
        kf->sparse_depth = project_sparse_depth(frame.cloud, frame.pose, cam);
        kf->color_image = std::move(frame.color);

        // Overlap against recent admitted keyframes, from sparse depth only,
        // so admission never depends on optimizer timing.
        for (const KeyframePtr& prev : recent_admitted)
            if (overlap_ratio(*kf, *prev, nullptr, cam) > cfg.kf.tau_overlap) return {};

        kf->points = store.drain_for_frame(cfg.points_per_frame);
        kf->initial_iters = kf->remaining_iters = cfg.kf.iter_budget;
        last_admitted_pose = kf->pose;
        recent_admitted.push_back(kf);
        if (recent_admitted.size() > kOverlapHistory) recent_admitted.pop_front();
        all_admitted.push_back(kf);
        return queue.push_and_release(kf, cfg.kf.delay_depth);
    }

    void report_step(const Keyframe& kf, const StepReport& rep) {
        if (!verbose) return;
        std::printf("kf %3d  step %6lld  level %d  loss %.6f  psnr %6.2f\n", kf.id,
                    static_cast<long long>(map.global_step()), rep.level, rep.loss, rep.psnr);
    }

    void housekeeping() {
        maybe_upgrade_sh(map, cfg.train);
        if (cfg.prune_interval > 0 && map.global_step() > 0 &&
            map.global_step() % cfg.prune_interval == 0)
            map.prune(cfg.train.prune_threshold);
        if (cfg.checkpoint_interval > 0 && map.global_step() > 0 &&
            map.global_step() % cfg.checkpoint_interval == 0) {
            char name[64];
            std::snprintf(name, sizeof(name), "checkpoint_%08lld.gsmap",
                          static_cast<long long>(map.global_step()));
            save_checkpoint((fs::path(cfg.out_dir) / name).string(), map);
        }
    }

    /// New keyframe reaches the optimizer: visibility-filter its points,
    /// spawn Gaussians, build the pyramid, and run one immediate step.
    void integrate_keyframe(const KeyframePtr& kf) {
        std::unique_lock<std::shared_mutex> write_lock(map.mutex());
        const auto kept = filter_points_by_visibility(kf->points, *kf, map, cam,
                                                      cfg.kf.tau_alpha, &pool);
        init_gaussians_from_points(map, kept);
        build_keyframe_pyramid(*kf, cfg.train.pyramid_levels);
        if (kf->remaining_iters > 0) {
            kf->remaining_iters -= 1;
            if (auto rep = train_keyframe_step(map, *kf, cfg.train, cam, &pool)) {
                report_step(*kf, *rep);
                housekeeping();
            }
        }
    }

    /// One sampled optimization step; false when nothing is eligible.
    bool optimize_once(double* last_loss) {
        KeyframePtr kf = queue.sample_for_optimization(sample_rng);
        if (!kf) return false;
        std::unique_lock<std::shared_mutex> write_lock(map.mutex());
        if (auto rep = train_keyframe_step(map, *kf, cfg.train, cam, &pool)) {
            if (last_loss) *last_loss = rep->loss;
            report_step(*kf, *rep);
            housekeeping();
        }
        return true;
    }
};

} // namespace

PipelineResult run_pipeline(const std::string& sequence_path, const PipelineConfig& cfg,
                            GaussianMap* out_map, bool verbose) {
    cfg.validate();
    SequenceReader reader(sequence_path); // sequence errors surface before any thread starts
    fs::create_directories(cfg.out_dir);

    PipelineState st(cfg, reader, verbose);
    PipelineResult result;
    const auto t_start = std::chrono::steady_clock::now();

    auto save_partial = [&]() {
        try {
            save_checkpoint((fs::path(cfg.out_dir) / "map_partial.gsmap").string(), st.map);
        } catch (...) {
        }
    };

    if (cfg.single_thread) {
        try {
            for (int i = 0; i < reader.frame_count(); ++i)
                for (const KeyframePtr& kf : st.ingest_frame(i)) st.integrate_keyframe(kf);
            for (const KeyframePtr& kf : st.queue.flush()) st.integrate_keyframe(kf);
            while (st.optimize_once(&result.final_loss)) {
            }
        } catch (...) {
            save_partial();
            throw;
        }
    } else {
        std::thread ingestion([&] {
            try {
                for (int i = 0; i < reader.frame_count(); ++i) {
                    auto released = st.ingest_frame(i);
                    std::lock_guard<std::mutex> lock(st.inbox_mutex);
                    for (auto& kf : released) st.inbox.push_back(kf);
                    st.inbox_cv.notify_one();
                }
                auto released = st.queue.flush();
                std::lock_guard<std::mutex> lock(st.inbox_mutex);
                for (auto& kf : released) st.inbox.push_back(kf);
                st.ingestion_done = true;
                st.inbox_cv.notify_one();
            } catch (...) {
                std::lock_guard<std::mutex> lock(st.inbox_mutex);
                st.ingestion_error = std::current_exception();
                st.ingestion_done = true;
                st.inbox_cv.notify_one();
            }
        });

        try {
            for (;;) {
                KeyframePtr fresh;
                bool done = false;
                {
                    std::unique_lock<std::mutex> lock(st.inbox_mutex);
                    if (st.ingestion_error) std::rethrow_exception(st.ingestion_error);
                    if (!st.inbox.empty()) {
                        fresh = st.inbox.front();
                        st.inbox.pop_front();
                    } else {
                        done = st.ingestion_done;
                    }
                }
                if (fresh) {
                    st.integrate_keyframe(fresh);
                    continue;
                }
                if (st.optimize_once(&result.final_loss)) continue;
                if (done) break;
                std::unique_lock<std::mutex> lock(st.inbox_mutex);
                st.inbox_cv.wait_for(lock, std::chrono::milliseconds(2));
            }
        } catch (...) {
            ingestion.join();
            save_partial();
            throw;
        }
        ingestion.join();
        if (st.ingestion_error) {
            save_partial();
            std::rethrow_exception(st.ingestion_error);
        }
    }

    // Final checkpoint and per-keyframe evaluation at native resolution.
    result.checkpoint_path = (fs::path(cfg.out_dir) / "map.gsmap").string();
    save_checkpoint(result.checkpoint_path, st.map);
    result.keyframes_admitted = st.all_admitted.size();
    result.gaussian_count = st.map.size();
    result.total_steps = st.map.global_step();

    for (const KeyframePtr& kf : st.all_admitted) {
        const RenderOutput out = render(st.map, kf->pose, st.cam, &st.pool);
        EvalRecord rec;
        rec.frame = kf->id;
        const ImageD q = quantize_8bit(out.color);
        rec.psnr = psnr(q, kf->color_image);
        rec.ssim = ssim(q, kf->color_image);
        if (reader.manifest().has_gt_depth)
            rec.depth_rmse = depth_rmse(out.depth, reader.read_gt_depth(kf->id));
        else
            rec.depth_rmse = depth_rmse(out.depth, kf->sparse_depth);
        rec.iteration = st.map.global_step();
        rec.wall_time_s = now_seconds(t_start);
        result.report.frames.push_back(rec);
    }

    std::ofstream jf(fs::path(cfg.out_dir) / "report.jsonl");
    jf << result.report.to_jsonl();
    std::ofstream tf(fs::path(cfg.out_dir) / "report.txt");
    tf << result.report.summary_table();
    if (verbose) std::printf("%s", result.report.summary_table().c_str());

    if (out_map) *out_map = std::move(st.map);
    return result;
}

} // namespace gsmap
