#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tml/f32.hpp"

namespace tml {

// Decoded RGB image, values in [0,1], interleaved row-major RGB.
struct ImageBuffer {
    std::int64_t width = 0;
    std::int64_t height = 0;
    std::vector<float> pixels;  // height * width * 3
    int bit_depth = 8;

    static ImageBuffer filled(std::int64_t w, std::int64_t h, float v) {
        ImageBuffer img;
        img.width = w;
        img.height = h;
        img.pixels.assign(static_cast<std::size_t>(w * h * 3), v);
        return img;
    }

    float& at(std::int64_t y, std::int64_t x, int c) { return pixels[(y * width + x) * 3 + c]; }
    float at(std::int64_t y, std::int64_t x, int c) const {
        return pixels[(y * width + x) * 3 + c];
    }
};

// Records every file the data layer opens; used to audit that step-2
// training never touches a low-light path.
struct AccessLog {
    std::vector<std::string> opened;
    void note(const std::string& path) { opened.push_back(path); }
};

// Binary 8-bit PPM (P6). decode -> encode is byte-identical.
ImageBuffer load_ppm(const std::string& path, AccessLog* log = nullptr);
void save_ppm(const std::string& path, const ImageBuffer& img);

Tensor image_to_tensor(const ImageBuffer& img);            // [1,3,H,W]
ImageBuffer tensor_to_image(const Tensor& t);              // from [1,3,H,W] or [3,H,W]

// Reflect-pads to the next multiple of `multiple` on each spatial axis.
ImageBuffer pad_reflect(const ImageBuffer& img, std::int64_t multiple);
ImageBuffer crop(const ImageBuffer& img, std::int64_t width, std::int64_t height);

}  // namespace tml
