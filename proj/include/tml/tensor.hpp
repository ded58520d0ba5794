#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <numeric>
#include <string>
#include <vector>

#include "tml/errors.hpp"
#include "tml/rng.hpp"

namespace tml {

using Shape = std::vector<std::int64_t>;

inline std::int64_t numel(const Shape& s) {
    std::int64_t n = 1;
    for (std::int64_t e : s) {
        if (e < 0) throw ShapeError("negative extent");
        if (e != 0 && n > std::numeric_limits<std::int64_t>::max() / e)
            throw ShapeError("extent overflow");
        n *= e;
    }
    return n;
}

inline std::string shape_str(const Shape& s) {
    std::string out = "[";
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (i) out += ",";
        out += std::to_string(s[i]);
    }
    return out + "]";
}

template <class R>
class TapeT;

// Dense row-major tensor. Copies are shallow (buffers shared); values are
// treated as immutable after construction except for the grad slot and the
// optimizer's in-place parameter updates.
template <class R>
class TensorT {
public:
    using Buffer = std::vector<R>;

    TensorT() = default;
    explicit TensorT(Shape shape)
        : shape_(std::move(shape)),
          data_(std::make_shared<Buffer>(numel(shape_), R(0))) {}
    TensorT(Shape shape, Buffer values) : shape_(std::move(shape)) {
        if (static_cast<std::int64_t>(values.size()) != numel(shape_))
            throw ShapeError("value count " + std::to_string(values.size()) +
                             " does not match shape " + shape_str(shape_));
        data_ = std::make_shared<Buffer>(std::move(values));
    }

    static TensorT zeros(Shape shape) { return TensorT(std::move(shape)); }
    static TensorT ones(Shape shape) { return full(std::move(shape), R(1)); }
    static TensorT full(Shape shape, R c) {
        TensorT t(std::move(shape));
        std::fill(t.data().begin(), t.data().end(), c);
        return t;
    }
    static TensorT randn(Rng& rng, Shape shape, R mu = R(0), R sigma = R(1)) {
        TensorT t(std::move(shape));
        for (R& v : t.data()) v = static_cast<R>(rng.normal(mu, sigma));
        return t;
    }
    static TensorT scalar(R v) { return TensorT({}, {v}); }

    const Shape& shape() const { return shape_; }
    std::int64_t size() const { return static_cast<std::int64_t>(data_->size()); }
    std::int64_t extent(std::size_t axis) const { return shape_.at(axis); }
    std::int64_t ndim() const { return static_cast<std::int64_t>(shape_.size()); }

    Buffer& data() { return *data_; }
    const Buffer& data() const { return *data_; }
    R item() const {
        if (size() != 1) throw ShapeError("item() on non-scalar " + shape_str(shape_));
        return (*data_)[0];
    }

    bool has_grad() const { return grad_ != nullptr; }
    Buffer& grad() {
        if (!grad_) throw ContractError("tensor has no grad slot");
        return *grad_;
    }
    const Buffer& grad() const {
        if (!grad_) throw ContractError("tensor has no grad slot");
        return *grad_;
    }
    void ensure_grad() {
        if (!grad_) grad_ = std::make_shared<Buffer>(data_->size(), R(0));
    }
    void zero_grad() {
        if (grad_) std::fill(grad_->begin(), grad_->end(), R(0));
    }
    TensorT grad_tensor() const {
        if (!grad_) throw ContractError("tensor has no grad slot");
        return TensorT(shape_, *grad_);
    }

    // Deep copy of the value buffer; grad slot not carried over.
    TensorT clone() const { return TensorT(shape_, *data_); }

    // Same buffers, new shape (row-major relabeling).
    TensorT viewed_as(Shape shape) const {
        if (numel(shape) != size())
            throw ShapeError("reshape " + shape_str(shape_) + " -> " + shape_str(shape) +
                             " changes element count");
        TensorT t;
        t.shape_ = std::move(shape);
        t.data_ = data_;
        t.grad_ = grad_;
        return t;
    }

    bool same_buffers(const TensorT& o) const { return data_ == o.data_ && grad_ == o.grad_; }

private:
    Shape shape_;
    std::shared_ptr<Buffer> data_;
    std::shared_ptr<Buffer> grad_;
};

// Reverse-mode tape: an append-only list of backward closures in execution
// (topological) order. Single-use; confined to one thread.
template <class R>
class TapeT {
public:
    using Tensor = TensorT<R>;

    void record(std::function<void()> backward) { nodes_.push_back(std::move(backward)); }

    // Marks a leaf (parameter or input) whose gradient should accumulate.
    void watch(Tensor& t) { t.ensure_grad(); }

    std::size_t node_count() const { return nodes_.size(); }

    void backward(Tensor& loss) {
        if (loss.size() != 1) throw ContractError("backward on non-scalar loss");
        if (!loss.has_grad()) throw ContractError("loss is not on the tape");
        if (used_) throw ContractError("backward called twice on one tape");
        used_ = true;
        loss.grad()[0] = R(1);
        for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) (*it)();
    }

private:
    std::vector<std::function<void()>> nodes_;
    bool used_ = false;
};

namespace detail {

// Allocates grad slots for inputs and output before the caller builds the
// backward closure, so the closure's captured copies share those slots.
template <class R>
bool taping(TapeT<R>* tape, std::initializer_list<TensorT<R>*> inputs, TensorT<R>& out) {
    if (!tape) return false;
    for (TensorT<R>* in : inputs) in->ensure_grad();
    out.ensure_grad();
    return true;
}

inline void check_same_shape(const Shape& a, const Shape& b, const char* what) {
    if (a != b)
        throw ShapeError(std::string(what) + ": " + shape_str(a) + " vs " + shape_str(b));
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Elementwise ops
// ---------------------------------------------------------------------------

template <class R>
TensorT<R> add(TapeT<R>* tape, TensorT<R> a, TensorT<R> b) {
    detail::check_same_shape(a.shape(), b.shape(), "add");
    TensorT<R> out(a.shape());
    const auto& av = a.data();
    const auto& bv = b.data();
    auto& ov = out.data();
    for (std::int64_t i = 0; i < a.size(); ++i) ov[i] = av[i] + bv[i];
    if (detail::taping(tape, {&a, &b}, out))
        tape->record([a, b, out]() mutable {
        const auto& g = out.grad();
        auto& ga = a.grad();
        auto& gb = b.grad();
        for (std::int64_t i = 0; i < a.size(); ++i) {
            ga[i] += g[i];
            gb[i] += g[i];
        }
    });
    return out;
}

template <class R>
TensorT<R> sub(TapeT<R>* tape, TensorT<R> a, TensorT<R> b) {
    detail::check_same_shape(a.shape(), b.shape(), "sub");
    TensorT<R> out(a.shape());
    for (std::int64_t i = 0; i < a.size(); ++i) out.data()[i] = a.data()[i] - b.data()[i];
    if (detail::taping(tape, {&a, &b}, out))
        tape->record([a, b, out]() mutable {
        const auto& g = out.grad();
        auto& ga = a.grad();
        auto& gb = b.grad();
        for (std::int64_t i = 0; i < a.size(); ++i) {
            ga[i] += g[i];
            gb[i] -= g[i];
        }
    });
    return out;
}

template <class R>
TensorT<R> mul(TapeT<R>* tape, TensorT<R> a, TensorT<R> b) {
    detail::check_same_shape(a.shape(), b.shape(), "mul");
    TensorT<R> out(a.shape());
    for (std::int64_t i = 0; i < a.size(); ++i) out.data()[i] = a.data()[i] * b.data()[i];
    if (detail::taping(tape, {&a, &b}, out))
        tape->record([a, b, out]() mutable {
        const auto& g = out.grad();
        auto& ga = a.grad();
        auto& gb = b.grad();
        for (std::int64_t i = 0; i < a.size(); ++i) {
            ga[i] += g[i] * b.data()[i];
            gb[i] += g[i] * a.data()[i];
        }
    });
    return out;
}

template <class R>
TensorT<R> scalar_mul(TapeT<R>* tape, TensorT<R> a, R c) {
    TensorT<R> out(a.shape());
    for (std::int64_t i = 0; i < a.size(); ++i) out.data()[i] = a.data()[i] * c;
    if (detail::taping(tape, {&a}, out))
        tape->record([a, out, c]() mutable {
        const auto& g = out.grad();
        auto& ga = a.grad();
        for (std::int64_t i = 0; i < a.size(); ++i) ga[i] += g[i] * c;
    });
    return out;
}

template <class R>
TensorT<R> relu(TapeT<R>* tape, TensorT<R> a) {
    TensorT<R> out(a.shape());
    for (std::int64_t i = 0; i < a.size(); ++i) out.data()[i] = a.data()[i] > R(0) ? a.data()[i] : R(0);
    if (detail::taping(tape, {&a}, out))
        tape->record([a, out]() mutable {
        const auto& g = out.grad();
        auto& ga = a.grad();
        for (std::int64_t i = 0; i < a.size(); ++i)
            if (a.data()[i] > R(0)) ga[i] += g[i];
    });
    return out;
}

template <class R>
TensorT<R> leaky_relu(TapeT<R>* tape, TensorT<R> a, R alpha) {
    TensorT<R> out(a.shape());
    for (std::int64_t i = 0; i < a.size(); ++i) {
        R v = a.data()[i];
        out.data()[i] = v > R(0) ? v : alpha * v;
    }
    if (detail::taping(tape, {&a}, out))
        tape->record([a, out, alpha]() mutable {
        const auto& g = out.grad();
        auto& ga = a.grad();
        for (std::int64_t i = 0; i < a.size(); ++i)
            ga[i] += a.data()[i] > R(0) ? g[i] : alpha * g[i];
    });
    return out;
}

template <class R>
TensorT<R> sigmoid(TapeT<R>* tape, TensorT<R> a) {
    TensorT<R> out(a.shape());
    for (std::int64_t i = 0; i < a.size(); ++i)
        out.data()[i] = R(1) / (R(1) + std::exp(-a.data()[i]));
    if (detail::taping(tape, {&a}, out))
        tape->record([a, out]() mutable {
        const auto& g = out.grad();
        auto& ga = a.grad();
        for (std::int64_t i = 0; i < a.size(); ++i) {
            R s = out.data()[i];
            ga[i] += g[i] * s * (R(1) - s);
        }
    });
    return out;
}

template <class R>
TensorT<R> tanh_op(TapeT<R>* tape, TensorT<R> a) {
    TensorT<R> out(a.shape());
    for (std::int64_t i = 0; i < a.size(); ++i) out.data()[i] = std::tanh(a.data()[i]);
    if (detail::taping(tape, {&a}, out))
        tape->record([a, out]() mutable {
        const auto& g = out.grad();
        auto& ga = a.grad();
        for (std::int64_t i = 0; i < a.size(); ++i) {
            R t = out.data()[i];
            ga[i] += g[i] * (R(1) - t * t);
        }
    });
    return out;
}

// ---------------------------------------------------------------------------
// Matmul and layout ops
// ---------------------------------------------------------------------------

namespace detail {

// C[M,N] += A[M,K] * B[K,N]. Rows of B stream through the inner loop so the
// compiler can vectorize over j; four output rows share each B row.
template <class R>
void gemm_nn(std::int64_t M, std::int64_t K, std::int64_t N, const R* A, const R* B, R* C) {
    std::int64_t i = 0;
    for (; i + 4 <= M; i += 4) {
        const R* a0 = A + i * K;
        const R* a1 = a0 + K;
        const R* a2 = a1 + K;
        const R* a3 = a2 + K;
        R* c0 = C + i * N;
        R* c1 = c0 + N;
        R* c2 = c1 + N;
        R* c3 = c2 + N;
        for (std::int64_t k = 0; k < K; ++k) {
            const R* b = B + k * N;
            R v0 = a0[k], v1 = a1[k], v2 = a2[k], v3 = a3[k];
            for (std::int64_t j = 0; j < N; ++j) {
                R bj = b[j];
                c0[j] += v0 * bj;
                c1[j] += v1 * bj;
                c2[j] += v2 * bj;
                c3[j] += v3 * bj;
            }
        }
    }
    for (; i < M; ++i) {
        R* c = C + i * N;
        for (std::int64_t k = 0; k < K; ++k) {
            R v = A[i * K + k];
            const R* b = B + k * N;
            for (std::int64_t j = 0; j < N; ++j) c[j] += v * b[j];
        }
    }
}

// C[M,N] += A[M,K] * B[N,K]^T (dot-product form).
template <class R>
void gemm_nt(std::int64_t M, std::int64_t K, std::int64_t N, const R* A, const R* B, R* C) {
    for (std::int64_t i = 0; i < M; ++i) {
        const R* a = A + i * K;
        for (std::int64_t j = 0; j < N; ++j) {
            const R* b = B + j * K;
            R acc = R(0);
            for (std::int64_t k = 0; k < K; ++k) acc += a[k] * b[k];
            C[i * N + j] += acc;
        }
    }
}

// C[M,N] += A[K,M]^T * B[K,N].
template <class R>
void gemm_tn(std::int64_t M, std::int64_t K, std::int64_t N, const R* A, const R* B, R* C) {
    for (std::int64_t k = 0; k < K; ++k) {
        const R* a = A + k * M;
        const R* b = B + k * N;
        for (std::int64_t i = 0; i < M; ++i) {
            R v = a[i];
            R* c = C + i * N;
            for (std::int64_t j = 0; j < N; ++j) c[j] += v * b[j];
        }
    }
}

}  // namespace detail

template <class R>
TensorT<R> matmul(TapeT<R>* tape, TensorT<R> a, TensorT<R> b) {
    if (a.ndim() != 2 || b.ndim() != 2)
        throw ShapeError("matmul expects 2-d operands, got " + shape_str(a.shape()) + " x " +
                         shape_str(b.shape()));
    std::int64_t M = a.extent(0), K = a.extent(1), N = b.extent(1);
    if (b.extent(0) != K)
        throw ShapeError("matmul inner extents " + shape_str(a.shape()) + " x " +
                         shape_str(b.shape()));
    TensorT<R> out({M, N});
    detail::gemm_nn(M, K, N, a.data().data(), b.data().data(), out.data().data());
    if (detail::taping(tape, {&a, &b}, out))
        tape->record([a, b, out, M, K, N]() mutable {
        // dA = dY * B^T ; dB = A^T * dY
        detail::gemm_nt(M, N, K, out.grad().data(), b.data().data(), a.grad().data());
        detail::gemm_tn(K, M, N, a.data().data(), out.grad().data(), b.grad().data());
    });
    return out;
}

template <class R>
TensorT<R> reshape(TapeT<R>* tape, TensorT<R> a, Shape shape) {
    // Pure relabeling: data and grad buffers are shared, so no tape node is
    // needed; gradients written through the view land in the original slot.
    if (tape) a.ensure_grad();
    return a.viewed_as(std::move(shape));
}

template <class R>
TensorT<R> transpose2d(TapeT<R>* tape, TensorT<R> a) {
    if (a.ndim() != 2) throw ShapeError("transpose expects 2-d, got " + shape_str(a.shape()));
    std::int64_t M = a.extent(0), N = a.extent(1);
    TensorT<R> out({N, M});
    for (std::int64_t i = 0; i < M; ++i)
        for (std::int64_t j = 0; j < N; ++j) out.data()[j * M + i] = a.data()[i * N + j];
    if (detail::taping(tape, {&a}, out))
        tape->record([a, out, M, N]() mutable {
        const auto& g = out.grad();
        auto& ga = a.grad();
        for (std::int64_t i = 0; i < M; ++i)
            for (std::int64_t j = 0; j < N; ++j) ga[i * N + j] += g[j * M + i];
    });
    return out;
}

// Concatenates along axis 1 of [N,C,H,W] tensors.
template <class R>
TensorT<R> concat_channels(TapeT<R>* tape, TensorT<R> a, TensorT<R> b) {
    if (a.ndim() != 4 || b.ndim() != 4)
        throw ShapeError("concat-channels expects 4-d tensors");
    for (std::size_t axis : {0u, 2u, 3u})
        if (a.extent(axis) != b.extent(axis))
            throw ShapeError("concat-channels non-channel extents differ: " +
                             shape_str(a.shape()) + " vs " + shape_str(b.shape()));
    std::int64_t N = a.extent(0), Ca = a.extent(1), Cb = b.extent(1);
    std::int64_t HW = a.extent(2) * a.extent(3);
    TensorT<R> out({N, Ca + Cb, a.extent(2), a.extent(3)});
    for (std::int64_t n = 0; n < N; ++n) {
        std::copy_n(a.data().data() + n * Ca * HW, Ca * HW,
                    out.data().data() + n * (Ca + Cb) * HW);
        std::copy_n(b.data().data() + n * Cb * HW, Cb * HW,
                    out.data().data() + n * (Ca + Cb) * HW + Ca * HW);
    }
    if (detail::taping(tape, {&a, &b}, out))
        tape->record([a, b, out, N, Ca, Cb, HW]() mutable {
        const auto& g = out.grad();
        for (std::int64_t n = 0; n < N; ++n) {
            const R* gn = g.data() + n * (Ca + Cb) * HW;
            R* ga = a.grad().data() + n * Ca * HW;
            R* gb = b.grad().data() + n * Cb * HW;
            for (std::int64_t i = 0; i < Ca * HW; ++i) ga[i] += gn[i];
            for (std::int64_t i = 0; i < Cb * HW; ++i) gb[i] += gn[Ca * HW + i];
        }
    });
    return out;
}

// ---------------------------------------------------------------------------
// Softmax and reductions
// ---------------------------------------------------------------------------

// Softmax over the last axis, stabilized by max subtraction.
template <class R>
TensorT<R> softmax(TapeT<R>* tape, TensorT<R> a) {
    if (a.ndim() < 1) throw ShapeError("softmax needs at least one axis");
    std::int64_t cols = a.extent(a.ndim() - 1);
    if (cols == 0) throw ShapeError("softmax over empty axis");
    std::int64_t rows = a.size() / cols;
    TensorT<R> out(a.shape());
    for (std::int64_t r = 0; r < rows; ++r) {
        const R* x = a.data().data() + r * cols;
        R* y = out.data().data() + r * cols;
        R mx = x[0];
        for (std::int64_t j = 1; j < cols; ++j) mx = std::max(mx, x[j]);
        R sum = R(0);
        for (std::int64_t j = 0; j < cols; ++j) {
            y[j] = std::exp(x[j] - mx);
            sum += y[j];
        }
        for (std::int64_t j = 0; j < cols; ++j) y[j] /= sum;
    }
    if (detail::taping(tape, {&a}, out))
        tape->record([a, out, rows, cols]() mutable {
        auto& ga = a.grad();
        const auto& g = out.grad();
        for (std::int64_t r = 0; r < rows; ++r) {
            const R* y = out.data().data() + r * cols;
            const R* gy = g.data() + r * cols;
            R dot = R(0);
            for (std::int64_t j = 0; j < cols; ++j) dot += y[j] * gy[j];
            for (std::int64_t j = 0; j < cols; ++j) ga[r * cols + j] += y[j] * (gy[j] - dot);
        }
    });
    return out;
}

template <class R>
TensorT<R> reduce_sum(TapeT<R>* tape, TensorT<R> a) {
    R acc = R(0);
    for (R v : a.data()) acc += v;
    TensorT<R> out = TensorT<R>::scalar(acc);
    if (detail::taping(tape, {&a}, out))
        tape->record([a, out]() mutable {
        R g = out.grad()[0];
        auto& ga = a.grad();
        for (std::int64_t i = 0; i < a.size(); ++i) ga[i] += g;
    });
    return out;
}

template <class R>
TensorT<R> reduce_mean(TapeT<R>* tape, TensorT<R> a) {
    if (a.size() == 0) throw DomainError("mean of empty tensor");
    R acc = R(0);
    for (R v : a.data()) acc += v;
    R inv = R(1) / static_cast<R>(a.size());
    TensorT<R> out = TensorT<R>::scalar(acc * inv);
    if (detail::taping(tape, {&a}, out))
        tape->record([a, out, inv]() mutable {
        R g = out.grad()[0] * inv;
        auto& ga = a.grad();
        for (std::int64_t i = 0; i < a.size(); ++i) ga[i] += g;
    });
    return out;
}

// ---------------------------------------------------------------------------
// Finite-difference oracle
// ---------------------------------------------------------------------------

// Central differences per coordinate: (f(x+h e_i) - f(x-h e_i)) / 2h.
// f must be deterministic and side-effect free.
template <class R>
TensorT<R> finite_diff(const std::function<R(const TensorT<R>&)>& f, const TensorT<R>& x,
                       R h = std::is_same_v<R, double> ? R(1e-6) : R(1e-3)) {
    TensorT<R> probe = x.clone();
    TensorT<R> out(x.shape());
    for (std::int64_t i = 0; i < x.size(); ++i) {
        R orig = probe.data()[i];
        probe.data()[i] = orig + h;
        R fp = f(probe);
        probe.data()[i] = orig - h;
        R fm = f(probe);
        probe.data()[i] = orig;
        out.data()[i] = (fp - fm) / (R(2) * h);
    }
    return out;
}

}  // namespace tml
