#include "tml/image.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

namespace tml {

namespace {

int read_ppm_token(std::istream& in) {
    // Skips whitespace and '#' comments between header tokens.
    int c = in.get();
    while (c != EOF) {
        if (c == '#') {
            while (c != EOF && c != '\n') c = in.get();
        } else if (!std::isspace(c)) {
            break;
        }
        c = in.get();
    }
    if (c == EOF) throw IoError("ppm: truncated header");
    int value = 0;
    while (c != EOF && std::isdigit(c)) {
        value = value * 10 + (c - '0');
        c = in.get();
    }
    return value;
}

}  // namespace

ImageBuffer load_ppm(const std::string& path, AccessLog* log) {
    if (log) log->note(path);
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    char m0 = 0, m1 = 0;
    in.get(m0);
    in.get(m1);
    if (m0 != 'P' || m1 != '6') throw IoError(path + ": not a binary PPM (P6)");
    std::int64_t w = read_ppm_token(in);
    std::int64_t h = read_ppm_token(in);
    int maxval = read_ppm_token(in);
    if (maxval != 255) throw IoError(path + ": only 8-bit PPM supported");
    if (w <= 0 || h <= 0) throw IoError(path + ": bad extents");
    std::vector<unsigned char> raw(static_cast<std::size_t>(w * h * 3));
    in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (in.gcount() != static_cast<std::streamsize>(raw.size()))
        throw IoError(path + ": truncated pixel data");
    ImageBuffer img;
    img.width = w;
    img.height = h;
    img.bit_depth = 8;
    img.pixels.resize(raw.size());
    for (std::size_t i = 0; i < raw.size(); ++i)
        img.pixels[i] = static_cast<float>(raw[i]) / 255.0f;
    return img;
}

void save_ppm(const std::string& path, const ImageBuffer& img) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path);
    out << "P6\n" << img.width << " " << img.height << "\n255\n";
    std::vector<unsigned char> raw(img.pixels.size());
    for (std::size_t i = 0; i < raw.size(); ++i) {
        float v = std::min(1.0f, std::max(0.0f, img.pixels[i]));
        raw[i] = static_cast<unsigned char>(std::lround(v * 255.0f));
    }
    out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (!out) throw IoError("write failed: " + path);
}

Tensor image_to_tensor(const ImageBuffer& img) {
    Tensor t({1, 3, img.height, img.width});
    std::int64_t hw = img.height * img.width;
    for (std::int64_t p = 0; p < hw; ++p)
        for (int c = 0; c < 3; ++c) t.data()[c * hw + p] = img.pixels[p * 3 + c];
    return t;
}

ImageBuffer tensor_to_image(const Tensor& t) {
    Shape s = t.shape();
    if (s.size() == 4 && s[0] == 1) s.erase(s.begin());
    if (s.size() != 3 || s[0] != 3) throw ShapeError("tensor_to_image expects [1,3,H,W] or [3,H,W]");
    ImageBuffer img;
    img.height = s[1];
    img.width = s[2];
    img.pixels.resize(static_cast<std::size_t>(3 * s[1] * s[2]));
    std::int64_t hw = s[1] * s[2];
    for (std::int64_t p = 0; p < hw; ++p)
        for (int c = 0; c < 3; ++c)
            img.pixels[p * 3 + c] = std::min(1.0f, std::max(0.0f, t.data()[c * hw + p]));
    return img;
}

namespace {
std::int64_t reflect(std::int64_t i, std::int64_t n) {
    if (i < n) return i;
    std::int64_t over = i - n + 1;
    return std::max<std::int64_t>(0, n - 1 - over);
}
}  // namespace

ImageBuffer pad_reflect(const ImageBuffer& img, std::int64_t multiple) {
    std::int64_t w = (img.width + multiple - 1) / multiple * multiple;
    std::int64_t h = (img.height + multiple - 1) / multiple * multiple;
    if (w == img.width && h == img.height) return img;
    ImageBuffer out = ImageBuffer::filled(w, h, 0.0f);
    for (std::int64_t y = 0; y < h; ++y)
        for (std::int64_t x = 0; x < w; ++x)
            for (int c = 0; c < 3; ++c)
                out.at(y, x, c) = img.at(reflect(y, img.height), reflect(x, img.width), c);
    return out;
}

ImageBuffer crop(const ImageBuffer& img, std::int64_t width, std::int64_t height) {
    if (width > img.width || height > img.height) throw ShapeError("crop larger than image");
    if (width == img.width && height == img.height) return img;
    ImageBuffer out = ImageBuffer::filled(width, height, 0.0f);
    for (std::int64_t y = 0; y < height; ++y)
        for (std::int64_t x = 0; x < width; ++x)
            for (int c = 0; c < 3; ++c) out.at(y, x, c) = img.at(y, x, c);
    return out;
}

}  // namespace tml
