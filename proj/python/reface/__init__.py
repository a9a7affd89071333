"""Audio-driven multi-face reenactment toolkit (python surface).

The heavy lifting lives in the C++ extension `_core`: convolution kernels,
the dynamic-convolution generator, SSIM/landmark metrics, the synthetic face
renderer, finite-difference gradient checks, and checkpoint-backed inference.
"""

from ._core import (
    AUDIO_CHANNELS,
    Model,
    __version__,
    ada_conv,
    conv1d,
    conv2d,
    gen_audio_feature,
    grad_check,
    landmark_error,
    region_l1,
    render_face,
    ssim,
)

__all__ = [
    "AUDIO_CHANNELS",
    "Model",
    "__version__",
    "ada_conv",
    "conv1d",
    "conv2d",
    "gen_audio_feature",
    "grad_check",
    "landmark_error",
    "region_l1",
    "render_face",
    "ssim",
]
