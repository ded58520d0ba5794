"""NumPy bindings for the low-light enhancement core ops."""

from ._core import (
    attention_map_via_conv,
    conv2d,
    conv2d_dynamic,
    darken,
    matmul,
    patch_pool,
    psnr,
    self_attention,
    smooth_l1,
    softmax,
    ssim,
)

__all__ = [
    "attention_map_via_conv",
    "conv2d",
    "conv2d_dynamic",
    "darken",
    "matmul",
    "patch_pool",
    "psnr",
    "self_attention",
    "smooth_l1",
    "softmax",
    "ssim",
]
