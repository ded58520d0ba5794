#include "tml/metrics.hpp"

#include <cmath>
#include <vector>

namespace tml {

double psnr(const ImageBuffer& pred, const ImageBuffer& ref, double max_value) {
    if (pred.width != ref.width || pred.height != ref.height)
        throw ShapeError("psnr: image extents differ");
    double mse = 0.0;
    for (std::size_t i = 0; i < pred.pixels.size(); ++i) {
        double d = static_cast<double>(pred.pixels[i]) - static_cast<double>(ref.pixels[i]);
        mse += d * d;
    }
    mse /= static_cast<double>(pred.pixels.size());
    if (mse <= 0.0) return kPsnrCap;
    return std::min(kPsnrCap, 10.0 * std::log10(max_value * max_value / mse));
}

namespace {

constexpr int kWindow = 11;
constexpr double kSigma = 1.5;

std::vector<double> gaussian_kernel() {
    std::vector<double> k(kWindow);
    double sum = 0.0;
    for (int i = 0; i < kWindow; ++i) {
        double d = i - (kWindow - 1) / 2.0;
        k[i] = std::exp(-d * d / (2.0 * kSigma * kSigma));
        sum += k[i];
    }
    for (double& v : k) v /= sum;
    return k;
}

// Separable Gaussian filter over one channel plane; output restricted to
// valid (fully interior) positions.
void filter_valid(const std::vector<double>& plane, std::int64_t h, std::int64_t w,
                  const std::vector<double>& k, std::vector<double>& out, std::int64_t vh,
                  std::int64_t vw) {
    std::vector<double> tmp(static_cast<std::size_t>(h * vw));
    for (std::int64_t y = 0; y < h; ++y)
        for (std::int64_t x = 0; x < vw; ++x) {
            double acc = 0.0;
            for (int i = 0; i < kWindow; ++i) acc += k[i] * plane[y * w + x + i];
            tmp[y * vw + x] = acc;
        }
    out.assign(static_cast<std::size_t>(vh * vw), 0.0);
    for (std::int64_t y = 0; y < vh; ++y)
        for (std::int64_t x = 0; x < vw; ++x) {
            double acc = 0.0;
            for (int i = 0; i < kWindow; ++i) acc += k[i] * tmp[(y + i) * vw + x];
            out[y * vw + x] = acc;
        }
}

}  // namespace

double ssim(const ImageBuffer& pred, const ImageBuffer& ref) {
    if (pred.width != ref.width || pred.height != ref.height)
        throw ShapeError("ssim: image extents differ");
    std::int64_t h = pred.height, w = pred.width;
    if (h < kWindow || w < kWindow) throw ShapeError("ssim: image smaller than 11x11 window");
    std::int64_t vh = h - kWindow + 1, vw = w - kWindow + 1;
    const double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;  // L = 1
    auto k = gaussian_kernel();

    double total = 0.0;
    std::vector<double> a(static_cast<std::size_t>(h * w)), b(a), aa(a), bb(a), ab(a);
    std::vector<double> mu_a, mu_b, m_aa, m_bb, m_ab;
    for (int c = 0; c < 3; ++c) {
        for (std::int64_t p = 0; p < h * w; ++p) {
            a[p] = pred.pixels[p * 3 + c];
            b[p] = ref.pixels[p * 3 + c];
            aa[p] = a[p] * a[p];
            bb[p] = b[p] * b[p];
            ab[p] = a[p] * b[p];
        }
        filter_valid(a, h, w, k, mu_a, vh, vw);
        filter_valid(b, h, w, k, mu_b, vh, vw);
        filter_valid(aa, h, w, k, m_aa, vh, vw);
        filter_valid(bb, h, w, k, m_bb, vh, vw);
        filter_valid(ab, h, w, k, m_ab, vh, vw);
        double acc = 0.0;
        for (std::int64_t p = 0; p < vh * vw; ++p) {
            double va = m_aa[p] - mu_a[p] * mu_a[p];
            double vb = m_bb[p] - mu_b[p] * mu_b[p];
            double cov = m_ab[p] - mu_a[p] * mu_b[p];
            double num = (2.0 * mu_a[p] * mu_b[p] + c1) * (2.0 * cov + c2);
            double den = (mu_a[p] * mu_a[p] + mu_b[p] * mu_b[p] + c1) * (va + vb + c2);
            acc += num / den;
        }
        total += acc / static_cast<double>(vh * vw);
    }
    return total / 3.0;
}

}  // namespace tml
