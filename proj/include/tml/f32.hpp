#pragma once

#include "tml/loss.hpp"
#include "tml/ugdc.hpp"

namespace tml {

// Default single-precision build of the templated core.
using Tensor = TensorT<float>;
using Tape = TapeT<float>;
using Model = ModelT<float>;
using GDCParams = GDCParamsT<float>;

}  // namespace tml
