#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gsmap/io/image.hpp"

namespace gsmap {

/// 10*log10(1/MSE) for [0,1] images; identical images return the +100 dB
/// sentinel.
double psnr(const ImageD& a, const ImageD& b);

/// Mean local SSIM over an 11x11 Gaussian window (sigma 1.5, C1 = 0.01^2,
/// C2 = 0.03^2 on [0,1] data), averaged over channels. Windows that fit
/// entirely inside the image only; min side must be >= 11.
double ssim(const ImageD& a, const ImageD& b);

/// ssim plus its gradient with respect to the first image.
double ssim_with_gradient(const ImageD& a, const ImageD& b, ImageD& d_ssim_da);

/// Root-mean-square of (rendered - gt) over pixels where gt > 0. Returns NaN
/// and sets *empty_mask when no pixel qualifies.
double depth_rmse(const ImageD& rendered, const ImageD& gt, bool* empty_mask = nullptr);

struct EvalRecord {
    int frame = 0;
    double psnr = 0.0;
    double ssim = 0.0;
    double depth_rmse = 0.0; // NaN when no depth reference
    int64_t iteration = 0;
    double wall_time_s = 0.0;
};

struct EvalReport {
    std::vector<EvalRecord> frames;

    double mean_psnr() const;
    double mean_ssim() const;
    double mean_depth_rmse() const; // over frames with a finite value

    std::string to_jsonl() const;
    std::string summary_table() const;
};

} // namespace gsmap
