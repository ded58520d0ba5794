#pragma once

#include <cmath>

#include "tml/tensor.hpp"

namespace tml {

// Mean over all n elements of the piecewise smooth-L1 penalty:
// 0.5 d^2 for |d| < 1, |d| - 0.5 otherwise, d = pred - target.
// Both branches agree in value and derivative at |d| = 1.
template <class R>
TensorT<R> smooth_l1(TapeT<R>* tape, TensorT<R> pred, TensorT<R> target) {
    detail::check_same_shape(pred.shape(), target.shape(), "smooth_l1");
    if (pred.size() == 0) throw DomainError("smooth_l1 of empty tensors");
    R acc = R(0);
    for (std::int64_t i = 0; i < pred.size(); ++i) {
        R d = pred.data()[i] - target.data()[i];
        R ad = std::abs(d);
        acc += ad < R(1) ? R(0.5) * d * d : ad - R(0.5);
    }
    R inv = R(1) / static_cast<R>(pred.size());
    TensorT<R> out = TensorT<R>::scalar(acc * inv);
    if (detail::taping(tape, {&pred, &target}, out))
        tape->record([pred, target, out, inv]() mutable {
            R g = out.grad()[0] * inv;
            for (std::int64_t i = 0; i < pred.size(); ++i) {
                R d = pred.data()[i] - target.data()[i];
                R dd = std::abs(d) < R(1) ? d : (d > R(0) ? R(1) : R(-1));
                pred.grad()[i] += g * dd;
                target.grad()[i] -= g * dd;
            }
        });
    return out;
}

}  // namespace tml
