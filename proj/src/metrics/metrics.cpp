#include "gsmap/metrics/metrics.hpp"

#include <array>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace gsmap {

namespace {

constexpr int kWindow = 11;
constexpr int kHalf = kWindow / 2;
constexpr double kSsimC1 = 0.01 * 0.01;
constexpr double kSsimC2 = 0.03 * 0.03;

std::array<double, kWindow> gaussian_taps() {
    std::array<double, kWindow> g{};
    double sum = 0.0;
    for (int i = 0; i < kWindow; ++i) {
        const double d = i - kHalf;
        g[i] = std::exp(-d * d / (2.0 * 1.5 * 1.5));
        sum += g[i];
    }
    for (double& v : g) v /= sum;
    return g;
}

/// Valid-region separable correlation with the 11-tap Gaussian.
/// in: H x W plane, out: (H-10) x (W-10).
void conv_valid(const std::vector<double>& in, int h, int w, std::vector<double>& out) {
    static const std::array<double, kWindow> g = gaussian_taps();
    const int vw = w - kWindow + 1;
    const int vh = h - kWindow + 1;
    std::vector<double> tmp(static_cast<size_t>(h) * vw);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < vw; ++x) {
            double s = 0.0;
            for (int k = 0; k < kWindow; ++k) s += g[k] * in[y * w + x + k];
            tmp[y * vw + x] = s;
        }
    out.assign(static_cast<size_t>(vh) * vw, 0.0);
    for (int y = 0; y < vh; ++y)
        for (int x = 0; x < vw; ++x) {
            double s = 0.0;
            for (int k = 0; k < kWindow; ++k) s += g[k] * tmp[(y + k) * vw + x];
            out[y * vw + x] = s;
        }
}

/// Adjoint of conv_valid: scatters (H-10) x (W-10) cotangents back to H x W.
void conv_valid_adjoint(const std::vector<double>& in, int h, int w, std::vector<double>& out) {
    static const std::array<double, kWindow> g = gaussian_taps();
    const int vw = w - kWindow + 1;
    const int vh = h - kWindow + 1;
    std::vector<double> tmp(static_cast<size_t>(h) * vw, 0.0);
    for (int y = 0; y < vh; ++y)
        for (int x = 0; x < vw; ++x) {
            const double v = in[y * vw + x];
            if (v == 0.0) continue;
            for (int k = 0; k < kWindow; ++k) tmp[(y + k) * vw + x] += g[k] * v;
        }
    out.assign(static_cast<size_t>(h) * w, 0.0);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < vw; ++x) {
            const double v = tmp[y * vw + x];
            if (v == 0.0) continue;
            for (int k = 0; k < kWindow; ++k) out[y * w + x + k] += g[k] * v;
        }
}

void extract_channel(const ImageD& img, int c, std::vector<double>& plane) {
    plane.resize(static_cast<size_t>(img.height()) * img.width());
    for (int y = 0; y < img.height(); ++y)
        for (int x = 0; x < img.width(); ++x)
            plane[static_cast<size_t>(y) * img.width() + x] = img.at(y, x, c);
}

double ssim_impl(const ImageD& a, const ImageD& b, ImageD* d_da) {
    if (!a.same_shape(b)) throw std::invalid_argument("ssim: image dimensions mismatch");
    if (a.height() < kWindow || a.width() < kWindow)
        throw std::invalid_argument("ssim: image smaller than the 11x11 window");

    const int h = a.height(), w = a.width(), channels = a.channels();
    const int vh = h - kWindow + 1, vw = w - kWindow + 1;
    const double inv_n = 1.0 / (static_cast<double>(vh) * vw * channels);

    if (d_da) {
        *d_da = ImageD(h, w, channels, 0.0);
    }

    std::vector<double> pa, pb, a2, b2, ab;
    std::vector<double> mu_a, mu_b, m_a2, m_b2, m_ab;
    std::vector<double> w_mu(static_cast<size_t>(vh) * vw), w_a2(w_mu.size()), w_ab(w_mu.size());
    std::vector<double> back;
    double total = 0.0;

    for (int c = 0; c < channels; ++c) {
        extract_channel(a, c, pa);
        extract_channel(b, c, pb);
        a2.resize(pa.size());
        b2.resize(pa.size());
        ab.resize(pa.size());
        for (size_t i = 0; i < pa.size(); ++i) {
            a2[i] = pa[i] * pa[i];
            b2[i] = pb[i] * pb[i];
            ab[i] = pa[i] * pb[i];
        }
        conv_valid(pa, h, w, mu_a);
        conv_valid(pb, h, w, mu_b);
        conv_valid(a2, h, w, m_a2);
        conv_valid(b2, h, w, m_b2);
        conv_valid(ab, h, w, m_ab);

        for (size_t i = 0; i < mu_a.size(); ++i) {
            const double ma = mu_a[i], mb = mu_b[i];
            const double sa = m_a2[i] - ma * ma;
            const double sb = m_b2[i] - mb * mb;
            const double sab = m_ab[i] - ma * mb;
            const double num1 = 2.0 * ma * mb + kSsimC1;
            const double num2 = 2.0 * sab + kSsimC2;
            const double den1 = ma * ma + mb * mb + kSsimC1;
            const double den2 = sa + sb + kSsimC2;
            const double s = (num1 * num2) / (den1 * den2);
            total += s;

            if (d_da) {
                const double inv_dd = 1.0 / (den1 * den2);
                const double ds_dsab = 2.0 * num1 * inv_dd;
                const double ds_dsa = -s / den2;
                const double ds_dmu_direct =
                    (2.0 * mb * num2) * inv_dd - s * (2.0 * ma) / den1;
                const double ds_dmu = ds_dmu_direct + ds_dsa * (-2.0 * ma) + ds_dsab * (-mb);
                w_mu[i] = ds_dmu * inv_n;
                w_a2[i] = ds_dsa * inv_n;
                w_ab[i] = ds_dsab * inv_n;
            }
        }

        if (d_da) {
            conv_valid_adjoint(w_mu, h, w, back);
            for (int y = 0; y < h; ++y)
                for (int x = 0; x < w; ++x)
                    d_da->at(y, x, c) += back[static_cast<size_t>(y) * w + x];
            conv_valid_adjoint(w_a2, h, w, back);
            for (int y = 0; y < h; ++y)
                for (int x = 0; x < w; ++x)
                    d_da->at(y, x, c) +=
                        2.0 * pa[static_cast<size_t>(y) * w + x] * back[static_cast<size_t>(y) * w + x];
            conv_valid_adjoint(w_ab, h, w, back);
            for (int y = 0; y < h; ++y)
                for (int x = 0; x < w; ++x)
                    d_da->at(y, x, c) +=
                        pb[static_cast<size_t>(y) * w + x] * back[static_cast<size_t>(y) * w + x];
        }
    }
    return total * inv_n;
}

} // namespace

double psnr(const ImageD& a, const ImageD& b) {
    if (!a.same_shape(b)) throw std::invalid_argument("psnr: image dimensions mismatch");
    double mse = 0.0;
    for (size_t i = 0; i < a.size(); ++i) {
        const double d = a.data()[i] - b.data()[i];
        mse += d * d;
    }
    mse /= static_cast<double>(a.size());
    if (mse == 0.0) return 100.0;
    return 10.0 * std::log10(1.0 / mse);
}

double ssim(const ImageD& a, const ImageD& b) { return ssim_impl(a, b, nullptr); }

double ssim_with_gradient(const ImageD& a, const ImageD& b, ImageD& d_ssim_da) {
    return ssim_impl(a, b, &d_ssim_da);
}

double depth_rmse(const ImageD& rendered, const ImageD& gt, bool* empty_mask) {
    if (!rendered.same_shape(gt)) throw std::invalid_argument("depth_rmse: dimensions mismatch");
    double sum = 0.0;
    size_t n = 0;
    for (size_t i = 0; i < gt.size(); ++i) {
        if (gt.data()[i] > 0.0) {
            const double d = rendered.data()[i] - gt.data()[i];
            sum += d * d;
            ++n;
        }
    }
    if (empty_mask) *empty_mask = (n == 0);
    if (n == 0) return std::numeric_limits<double>::quiet_NaN();
    return std::sqrt(sum / static_cast<double>(n));
}

double EvalReport::mean_psnr() const {
    if (frames.empty()) return 0.0;
    double s = 0.0;
    for (const auto& f : frames) s += f.psnr;
    return s / static_cast<double>(frames.size());
}

double EvalReport::mean_ssim() const {
    if (frames.empty()) return 0.0;
    double s = 0.0;
    for (const auto& f : frames) s += f.ssim;
    return s / static_cast<double>(frames.size());
}

double EvalReport::mean_depth_rmse() const {
    double s = 0.0;
    size_t n = 0;
    for (const auto& f : frames)
        if (std::isfinite(f.depth_rmse)) {
            s += f.depth_rmse;
            ++n;
        }
    return n ? s / static_cast<double>(n) : std::numeric_limits<double>::quiet_NaN();
}

std::string EvalReport::to_jsonl() const {
    std::string out;
    for (const auto& f : frames) {
        nlohmann::json j;
        j["frame"] = f.frame;
        j["psnr"] = f.psnr;
        j["ssim"] = f.ssim;
        if (std::isfinite(f.depth_rmse))
            j["depth_rmse"] = f.depth_rmse;
        else
            j["depth_rmse"] = nullptr;
        j["iteration"] = f.iteration;
        j["wall_time_s"] = f.wall_time_s;
        out += j.dump();
        out += '\n';
    }
    return out;
}

std::string EvalReport::summary_table() const {
    std::ostringstream os;
    os << "frame    psnr_db    ssim    depth_rmse_m\n";
    char line[128];
    for (const auto& f : frames) {
        std::snprintf(line, sizeof(line), "%5d   %8.3f  %6.4f    %10.4f\n", f.frame, f.psnr,
                      f.ssim, f.depth_rmse);
        os << line;
    }
    std::snprintf(line, sizeof(line), "mean    %8.3f  %6.4f    %10.4f\n", mean_psnr(),
                  mean_ssim(), mean_depth_rmse());
    os << line;
    return os.str();
}

} // namespace gsmap
