from .codec import DecodeError, DetectionReport, WatermarkParams, decode, encode
from .detection import (
    inverse_normal_cdf,
    normal_cdf,
    p_w,
    required_length,
    z_score,
    z_threshold,
)
from .perturb import perturb, perturb_proportional

__all__ = [
    "DecodeError",
    "DetectionReport",
    "WatermarkParams",
    "decode",
    "encode",
    "inverse_normal_cdf",
    "normal_cdf",
    "p_w",
    "perturb",
    "perturb_proportional",
    "required_length",
    "z_score",
    "z_threshold",
]
