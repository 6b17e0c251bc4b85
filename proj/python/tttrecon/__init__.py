"""Test-time training for accelerated MRI reconstruction.

Thin wrapper over the C++ core. Arrays are numpy: real images are float32
[H, W], k-space and coil maps complex64 [C, H, W].
"""

from ._core import (
    Model,
    SamplingMask,
    TTTConfig,
    TTTError,
    adjoint,
    fft2c,
    forward,
    gap_metrics,
    ifft2c,
    make_mask,
    make_sample,
    nl1,
    ssim,
    subspace,
)

__all__ = [
    "Model",
    "SamplingMask",
    "TTTConfig",
    "TTTError",
    "adjoint",
    "fft2c",
    "forward",
    "gap_metrics",
    "ifft2c",
    "make_mask",
    "make_sample",
    "nl1",
    "ssim",
    "subspace",
]
