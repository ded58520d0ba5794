#include <doctest.h>

#include "tml/dataset.hpp"
#include "tml/metrics.hpp"

using namespace tml;

namespace {

// Independent SSIM reference: direct double-precision window sums, no
// separable filtering. Same constants as the implementation under test.
double ssim_oracle(const ImageBuffer& a, const ImageBuffer& b) {
    const int win = 11;
    const double sigma = 1.5;
    double kernel[win][win];
    double ksum = 0;
    for (int i = 0; i < win; ++i)
        for (int j = 0; j < win; ++j) {
            double dy = i - 5, dx = j - 5;
            kernel[i][j] = std::exp(-(dx * dx + dy * dy) / (2 * sigma * sigma));
            ksum += kernel[i][j];
        }
    for (auto& row : kernel)
        for (double& v : row) v /= ksum;
    const double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;
    double total = 0;
    for (int ch = 0; ch < 3; ++ch) {
        double acc = 0;
        std::int64_t count = 0;
        for (std::int64_t y = 0; y + win <= a.height; ++y)
            for (std::int64_t x = 0; x + win <= a.width; ++x) {
                double mu_a = 0, mu_b = 0, aa = 0, bb = 0, ab = 0;
                for (int i = 0; i < win; ++i)
                    for (int j = 0; j < win; ++j) {
                        double va = a.at(y + i, x + j, ch), vb = b.at(y + i, x + j, ch);
                        mu_a += kernel[i][j] * va;
                        mu_b += kernel[i][j] * vb;
                        aa += kernel[i][j] * va * va;
                        bb += kernel[i][j] * vb * vb;
                        ab += kernel[i][j] * va * vb;
                    }
                double var_a = aa - mu_a * mu_a, var_b = bb - mu_b * mu_b;
                double cov = ab - mu_a * mu_b;
                acc += (2 * mu_a * mu_b + c1) * (2 * cov + c2) /
                       ((mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2));
                ++count;
            }
        total += acc / double(count);
    }
    return total / 3.0;
}

}  // namespace

TEST_CASE("psnr closed forms") {
    ImageBuffer zeros = ImageBuffer::filled(16, 16, 0.0f);
    ImageBuffer halves = ImageBuffer::filled(16, 16, 0.5f);
    CHECK(std::abs(psnr(zeros, halves) - 6.0206) <= 1e-4);
    CHECK(psnr(halves, halves) == kPsnrCap);
}

TEST_CASE("ssim of an image with itself is one") {
    SyntheticDarkener d;
    ImageBuffer img = make_synth_corpus(77, d, 24, 0, 1, 0).step2[0];
    CHECK(std::abs(ssim(img, img) - 1.0) <= 1e-6);
}

TEST_CASE("ssim matches an independent dense oracle") {
    SyntheticDarkener darkener;
    SynthCorpus corpus = make_synth_corpus(78, darkener, 24, 1, 0, 0);
    const ImageBuffer& normal = corpus.train[0].normal;
    const ImageBuffer& low = corpus.train[0].low;
    double fast = ssim(low, normal);
    double ref = ssim_oracle(low, normal);
    CHECK(std::abs(fast - ref) <= 1e-5);
    CHECK(fast < 0.999);  // degraded image is measurably dissimilar
}

TEST_CASE("metric inputs must agree in shape") {
    ImageBuffer a = ImageBuffer::filled(8, 8, 0.2f);
    ImageBuffer b = ImageBuffer::filled(8, 9, 0.2f);
    CHECK_THROWS_AS(psnr(a, b), ShapeError);
    CHECK_THROWS_AS(ssim(a, b), ShapeError);
}
