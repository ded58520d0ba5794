// NumPy-facing wrappers around the core float32 operations.

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "tml/dataset.hpp"
#include "tml/gdc.hpp"
#include "tml/loss.hpp"
#include "tml/metrics.hpp"

namespace py = pybind11;
using namespace tml;

namespace {

using Array = py::array_t<float, py::array::c_style | py::array::forcecast>;

Tensor to_tensor(const Array& a) {
    Shape shape(a.ndim());
    for (py::ssize_t i = 0; i < a.ndim(); ++i) shape[size_t(i)] = a.shape(i);
    Tensor t(shape);
    std::copy(a.data(), a.data() + a.size(), t.data().begin());
    return t;
}

Array to_array(const Tensor& t) {
    std::vector<py::ssize_t> shape(t.shape().begin(), t.shape().end());
    Array out(shape);
    std::copy(t.data().begin(), t.data().end(), out.mutable_data());
    return out;
}

ImageBuffer to_image(const Array& a) {
    if (a.ndim() != 3 || a.shape(2) != 3)
        throw ShapeError("image arrays must be [H, W, 3] float32");
    ImageBuffer img;
    img.height = a.shape(0);
    img.width = a.shape(1);
    img.pixels.assign(a.data(), a.data() + a.size());
    return img;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "float32 tensor ops: convolution, dynamic convolution, attention, metrics";

    m.def(
        "conv2d",
        [](const Array& x, const Array& w, const Array& b, std::int64_t stride,
           std::int64_t pad) {
            Tensor wt = to_tensor(w);
            ConvSpec spec{wt.extent(2), wt.extent(3), stride, pad};
            return to_array(conv2d<float>(nullptr, to_tensor(x), wt, to_tensor(b), spec));
        },
        py::arg("x"), py::arg("w"), py::arg("b"), py::arg("stride") = 1, py::arg("pad") = 0,
        "Cross-correlation of [N,C,H,W] with [O,C,kh,kw] plus bias [O].");

    m.def(
        "conv2d_dynamic",
        [](const Array& x, const Array& kernels) {
            return to_array(conv2d_dynamic<float>(nullptr, to_tensor(x), to_tensor(kernels)));
        },
        py::arg("x"), py::arg("kernels"),
        "Per-sample 1x1 convolution: [N,E,H,W] with kernels [N,S,E] -> [N,S,H,W].");

    m.def(
        "patch_pool",
        [](const Array& x, std::int64_t grid_h, std::int64_t grid_w) {
            return to_array(patch_pool<float>(nullptr, to_tensor(x), grid_h, grid_w));
        },
        py::arg("x"), py::arg("grid_h"), py::arg("grid_w"),
        "Adaptive average pooling of [N,C,H,W] to a fixed grid.");

    m.def(
        "matmul",
        [](const Array& a, const Array& b) {
            return to_array(matmul<float>(nullptr, to_tensor(a), to_tensor(b)));
        },
        py::arg("a"), py::arg("b"));

    m.def(
        "softmax",
        [](const Array& x) { return to_array(softmax<float>(nullptr, to_tensor(x))); },
        py::arg("x"), "Softmax over the last axis.");

    m.def(
        "self_attention",
        [](const Array& q, const Array& k, const Array& v) {
            return to_array(
                self_attention<float>(nullptr, to_tensor(q), to_tensor(k), to_tensor(v)));
        },
        py::arg("q"), py::arg("k"), py::arg("v"),
        "softmax(QK^T / sqrt(E)) V over [S,E] operands.");

    m.def(
        "attention_map_via_conv",
        [](const Array& q, const Array& k, std::int64_t h, std::int64_t w) {
            return to_array(attention_map_via_conv(to_tensor(q), to_tensor(k), h, w));
        },
        py::arg("q"), py::arg("k"), py::arg("h"), py::arg("w"),
        "QK^T computed by the convolution route; h*w must equal the token count.");

    m.def(
        "smooth_l1",
        [](const Array& pred, const Array& target) {
            return smooth_l1<float>(nullptr, to_tensor(pred), to_tensor(target)).item();
        },
        py::arg("pred"), py::arg("target"));

    m.def(
        "psnr",
        [](const Array& pred, const Array& ref) { return psnr(to_image(pred), to_image(ref)); },
        py::arg("pred"), py::arg("ref"), "PSNR in dB over [H,W,3] images in [0,1].");

    m.def(
        "ssim",
        [](const Array& pred, const Array& ref) { return ssim(to_image(pred), to_image(ref)); },
        py::arg("pred"), py::arg("ref"));

    m.def(
        "darken",
        [](const Array& img, float gamma, float gain, float sigma, std::uint64_t seed) {
            DarkenParams p{gamma, gain, sigma};
            Rng rng(seed);
            ImageBuffer low = darken(to_image(img), p, rng);
            std::vector<py::ssize_t> shape{py::ssize_t(low.height), py::ssize_t(low.width), 3};
            Array out(shape);
            std::copy(low.pixels.begin(), low.pixels.end(), out.mutable_data());
            return out;
        },
        py::arg("img"), py::arg("gamma"), py::arg("gain"), py::arg("sigma") = 0.0f,
        py::arg("seed") = 0, "clamp(gain * img^gamma + noise) degradation.");
}
