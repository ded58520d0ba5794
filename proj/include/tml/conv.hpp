#pragma once

#include <cstdint>

#include "tml/tensor.hpp"

namespace tml {

struct ConvSpec {
    std::int64_t kh = 3;
    std::int64_t kw = 3;
    std::int64_t stride = 1;
    std::int64_t pad = 0;

    std::int64_t out_extent(std::int64_t in, std::int64_t k) const {
        return (in + 2 * pad - k) / stride + 1;
    }
};

namespace detail {

// col layout: [C*kh*kw, OH*OW], zero padding.
template <class R>
void im2col(const R* x, std::int64_t C, std::int64_t H, std::int64_t W, const ConvSpec& s,
            std::int64_t OH, std::int64_t OW, R* col) {
    for (std::int64_t c = 0; c < C; ++c) {
        for (std::int64_t ki = 0; ki < s.kh; ++ki) {
            for (std::int64_t kj = 0; kj < s.kw; ++kj) {
                R* row = col + ((c * s.kh + ki) * s.kw + kj) * OH * OW;
                for (std::int64_t oi = 0; oi < OH; ++oi) {
                    std::int64_t ii = oi * s.stride - s.pad + ki;
                    if (ii < 0 || ii >= H) {
                        for (std::int64_t oj = 0; oj < OW; ++oj) row[oi * OW + oj] = R(0);
                        continue;
                    }
                    const R* xr = x + (c * H + ii) * W;
                    for (std::int64_t oj = 0; oj < OW; ++oj) {
                        std::int64_t jj = oj * s.stride - s.pad + kj;
                        row[oi * OW + oj] = (jj >= 0 && jj < W) ? xr[jj] : R(0);
                    }
                }
            }
        }
    }
}

template <class R>
void col2im_add(const R* col, std::int64_t C, std::int64_t H, std::int64_t W, const ConvSpec& s,
                std::int64_t OH, std::int64_t OW, R* x) {
    for (std::int64_t c = 0; c < C; ++c) {
        for (std::int64_t ki = 0; ki < s.kh; ++ki) {
            for (std::int64_t kj = 0; kj < s.kw; ++kj) {
                const R* row = col + ((c * s.kh + ki) * s.kw + kj) * OH * OW;
                for (std::int64_t oi = 0; oi < OH; ++oi) {
                    std::int64_t ii = oi * s.stride - s.pad + ki;
                    if (ii < 0 || ii >= H) continue;
                    R* xr = x + (c * H + ii) * W;
                    for (std::int64_t oj = 0; oj < OW; ++oj) {
                        std::int64_t jj = oj * s.stride - s.pad + kj;
                        if (jj >= 0 && jj < W) xr[jj] += row[oi * OW + oj];
                    }
                }
            }
        }
    }
}

}  // namespace detail

// 2-d convolution in the cross-correlation convention (no kernel flip).
// x: [N,C,H,W], w: [O,C,kh,kw], b: [O] -> [N,O,OH,OW].
template <class R>
TensorT<R> conv2d(TapeT<R>* tape, TensorT<R> x, TensorT<R> w, TensorT<R> b, ConvSpec spec) {
    if (x.ndim() != 4 || w.ndim() != 4) throw ShapeError("conv2d expects 4-d x and w");
    std::int64_t N = x.extent(0), C = x.extent(1), H = x.extent(2), W = x.extent(3);
    std::int64_t O = w.extent(0);
    if (w.extent(1) != C)
        throw ShapeError("conv2d channels: x " + shape_str(x.shape()) + " vs w " +
                         shape_str(w.shape()));
    if (w.extent(2) != spec.kh || w.extent(3) != spec.kw)
        throw ShapeError("conv2d kernel extents disagree with spec");
    if (b.size() != O) throw ShapeError("conv2d bias length != out channels");
    std::int64_t OH = spec.out_extent(H, spec.kh);
    std::int64_t OW = spec.out_extent(W, spec.kw);
    if (OH < 1 || OW < 1) throw ShapeError("conv2d non-positive output extent");

    std::int64_t CK = C * spec.kh * spec.kw;
    TensorT<R> out({N, O, OH, OW});
    std::vector<R> col(static_cast<std::size_t>(CK * OH * OW));
    for (std::int64_t n = 0; n < N; ++n) {
        detail::im2col(x.data().data() + n * C * H * W, C, H, W, spec, OH, OW, col.data());
        R* y = out.data().data() + n * O * OH * OW;
        detail::gemm_nn(O, CK, OH * OW, w.data().data(), col.data(), y);
        for (std::int64_t o = 0; o < O; ++o) {
            R bias = b.data()[o];
            for (std::int64_t p = 0; p < OH * OW; ++p) y[o * OH * OW + p] += bias;
        }
    }

    if (detail::taping(tape, {&x, &w, &b}, out))
        tape->record([x, w, b, out, spec, N, C, H, W, O, OH, OW, CK]() mutable {
            std::vector<R> col(static_cast<std::size_t>(CK * OH * OW));
            std::vector<R> dcol(static_cast<std::size_t>(CK * OH * OW));
            for (std::int64_t n = 0; n < N; ++n) {
                const R* gy = out.grad().data() + n * O * OH * OW;
                // dW += dY * col^T (col rebuilt rather than cached)
                detail::im2col(x.data().data() + n * C * H * W, C, H, W, spec, OH, OW,
                               col.data());
                detail::gemm_nt(O, OH * OW, CK, gy, col.data(), w.grad().data());
                // dX += col2im(W^T * dY)
                std::fill(dcol.begin(), dcol.end(), R(0));
                detail::gemm_tn(CK, O, OH * OW, w.data().data(), gy, dcol.data());
                detail::col2im_add(dcol.data(), C, H, W, spec, OH, OW,
                                   x.grad().data() + n * C * H * W);
                for (std::int64_t o = 0; o < O; ++o) {
                    R acc = R(0);
                    for (std::int64_t p = 0; p < OH * OW; ++p) acc += gy[o * OH * OW + p];
                    b.grad()[o] += acc;
                }
            }
        });
    return out;
}

// Dynamic-kernel convolution: sample n's S rows of `kernels` act as S 1x1xE
// kernels on x[n]. out[n,s,h,w] = sum_e kernels[n,s,e] * x[n,e,h,w].
// Differentiable w.r.t. both x and kernels (the kernels are activations).
template <class R>
TensorT<R> conv2d_dynamic(TapeT<R>* tape, TensorT<R> x, TensorT<R> kernels) {
    if (x.ndim() != 4 || kernels.ndim() != 3)
        throw ShapeError("conv2d_dynamic expects x [N,E,H,W], kernels [N,S,E]");
    std::int64_t N = x.extent(0), E = x.extent(1), H = x.extent(2), W = x.extent(3);
    std::int64_t S = kernels.extent(1);
    if (kernels.extent(0) != N || kernels.extent(2) != E)
        throw ShapeError("conv2d_dynamic: kernels " + shape_str(kernels.shape()) +
                         " vs x " + shape_str(x.shape()));
    std::int64_t HW = H * W;
    TensorT<R> out({N, S, H, W});
    for (std::int64_t n = 0; n < N; ++n)
        detail::gemm_nn(S, E, HW, kernels.data().data() + n * S * E,
                        x.data().data() + n * E * HW, out.data().data() + n * S * HW);
    if (detail::taping(tape, {&x, &kernels}, out))
        tape->record([x, kernels, out, N, E, S, HW]() mutable {
            for (std::int64_t n = 0; n < N; ++n) {
                const R* gy = out.grad().data() + n * S * HW;
                // dK += dY * X^T ; dX += K^T * dY
                detail::gemm_nt(S, HW, E, gy, x.data().data() + n * E * HW,
                                kernels.grad().data() + n * S * E);
                detail::gemm_tn(E, S, HW, kernels.data().data() + n * S * E, gy,
                                x.grad().data() + n * E * HW);
            }
        });
    return out;
}

// Adaptive average pooling to a fixed (gh, gw) grid; cell (i,j) averages the
// half-open window [floor(iH/gh), floor((i+1)H/gh)) x [floor(jW/gw), ...).
template <class R>
TensorT<R> patch_pool(TapeT<R>* tape, TensorT<R> x, std::int64_t gh, std::int64_t gw) {
    if (x.ndim() != 4) throw ShapeError("patch_pool expects [N,C,H,W]");
    std::int64_t N = x.extent(0), C = x.extent(1), H = x.extent(2), W = x.extent(3);
    if (gh < 1 || gw < 1 || gh > H || gw > W)
        throw ShapeError("patch_pool grid " + std::to_string(gh) + "x" + std::to_string(gw) +
                         " vs input " + std::to_string(H) + "x" + std::to_string(W));
    TensorT<R> out({N, C, gh, gw});
    auto row0 = [H, gh](std::int64_t i) { return i * H / gh; };
    auto col0 = [W, gw](std::int64_t j) { return j * W / gw; };
    for (std::int64_t nc = 0; nc < N * C; ++nc) {
        const R* xp = x.data().data() + nc * H * W;
        R* yp = out.data().data() + nc * gh * gw;
        for (std::int64_t i = 0; i < gh; ++i) {
            for (std::int64_t j = 0; j < gw; ++j) {
                R acc = R(0);
                std::int64_t r1 = row0(i + 1), c1 = col0(j + 1);
                for (std::int64_t r = row0(i); r < r1; ++r)
                    for (std::int64_t c = col0(j); c < c1; ++c) acc += xp[r * W + c];
                R count = static_cast<R>((r1 - row0(i)) * (c1 - col0(j)));
                yp[i * gw + j] = acc / count;
            }
        }
    }
    if (detail::taping(tape, {&x}, out))
        tape->record([x, out, N, C, H, W, gh, gw, row0, col0]() mutable {
            for (std::int64_t nc = 0; nc < N * C; ++nc) {
                R* gx = x.grad().data() + nc * H * W;
                const R* gy = out.grad().data() + nc * gh * gw;
                for (std::int64_t i = 0; i < gh; ++i) {
                    for (std::int64_t j = 0; j < gw; ++j) {
                        std::int64_t r1 = row0(i + 1), c1 = col0(j + 1);
                        R g = gy[i * gw + j] /
                              static_cast<R>((r1 - row0(i)) * (c1 - col0(j)));
                        for (std::int64_t r = row0(i); r < r1; ++r)
                            for (std::int64_t c = col0(j); c < c1; ++c) gx[r * W + c] += g;
                    }
                }
            }
        });
    return out;
}

// 2x2 average pool, stride 2. Requires even H, W.
template <class R>
TensorT<R> downsample2x(TapeT<R>* tape, TensorT<R> x) {
    if (x.ndim() != 4) throw ShapeError("downsample2x expects [N,C,H,W]");
    std::int64_t H = x.extent(2), W = x.extent(3);
    if (H % 2 || W % 2) throw ShapeError("downsample2x needs even extents");
    std::int64_t NC = x.extent(0) * x.extent(1), OH = H / 2, OW = W / 2;
    TensorT<R> out({x.extent(0), x.extent(1), OH, OW});
    for (std::int64_t nc = 0; nc < NC; ++nc) {
        const R* xp = x.data().data() + nc * H * W;
        R* yp = out.data().data() + nc * OH * OW;
        for (std::int64_t i = 0; i < OH; ++i)
            for (std::int64_t j = 0; j < OW; ++j)
                yp[i * OW + j] = (xp[2 * i * W + 2 * j] + xp[2 * i * W + 2 * j + 1] +
                                  xp[(2 * i + 1) * W + 2 * j] +
                                  xp[(2 * i + 1) * W + 2 * j + 1]) *
                                 R(0.25);
    }
    if (detail::taping(tape, {&x}, out))
        tape->record([x, out, NC, H, W, OH, OW]() mutable {
            for (std::int64_t nc = 0; nc < NC; ++nc) {
                R* gx = x.grad().data() + nc * H * W;
                const R* gy = out.grad().data() + nc * OH * OW;
                for (std::int64_t i = 0; i < OH; ++i)
                    for (std::int64_t j = 0; j < OW; ++j) {
                        R g = gy[i * OW + j] * R(0.25);
                        gx[2 * i * W + 2 * j] += g;
                        gx[2 * i * W + 2 * j + 1] += g;
                        gx[(2 * i + 1) * W + 2 * j] += g;
                        gx[(2 * i + 1) * W + 2 * j + 1] += g;
                    }
            }
        });
    return out;
}

// Nearest-neighbor 2x upsampling; downsample2x(upsample2x(x)) == x bit-exact.
template <class R>
TensorT<R> upsample2x(TapeT<R>* tape, TensorT<R> x) {
    if (x.ndim() != 4) throw ShapeError("upsample2x expects [N,C,H,W]");
    std::int64_t NC = x.extent(0) * x.extent(1), H = x.extent(2), W = x.extent(3);
    TensorT<R> out({x.extent(0), x.extent(1), 2 * H, 2 * W});
    for (std::int64_t nc = 0; nc < NC; ++nc) {
        const R* xp = x.data().data() + nc * H * W;
        R* yp = out.data().data() + nc * 4 * H * W;
        for (std::int64_t i = 0; i < H; ++i)
            for (std::int64_t j = 0; j < W; ++j) {
                R v = xp[i * W + j];
                yp[2 * i * 2 * W + 2 * j] = v;
                yp[2 * i * 2 * W + 2 * j + 1] = v;
                yp[(2 * i + 1) * 2 * W + 2 * j] = v;
                yp[(2 * i + 1) * 2 * W + 2 * j + 1] = v;
            }
    }
    if (detail::taping(tape, {&x}, out))
        tape->record([x, out, NC, H, W]() mutable {
            for (std::int64_t nc = 0; nc < NC; ++nc) {
                R* gx = x.grad().data() + nc * H * W;
                const R* gy = out.grad().data() + nc * 4 * H * W;
                for (std::int64_t i = 0; i < H; ++i)
                    for (std::int64_t j = 0; j < W; ++j)
                        gx[i * W + j] += gy[2 * i * 2 * W + 2 * j] +
                                         gy[2 * i * 2 * W + 2 * j + 1] +
                                         gy[(2 * i + 1) * 2 * W + 2 * j] +
                                         gy[(2 * i + 1) * 2 * W + 2 * j + 1];
            }
        });
    return out;
}

}  // namespace tml
