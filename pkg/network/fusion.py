"""Audio-visual feature fusion: addition, concatenation or factorized bilinear pooling."""

import logging

from autodiff.ops import l2_normalize, signed_sqrt, sum_pool
from autodiff.tensor import Tensor, concat
from config import FusionConfig, FusionMode
from errors import DimensionError
from network.layers import DenseLayer, ParameterSet

logger = logging.getLogger(__name__)


class Fusion:
    def __init__(self, params: ParameterSet, prefix: str, cfg: FusionConfig):
        self.cfg = cfg
        if cfg.mode is FusionMode.MFB:
            width = cfg.fused_dim * cfg.mfb_factor
            self.audio_projection = DenseLayer(params, f"{prefix}.audio_projection", cfg.feature_dim, width)
            self.visual_projection = DenseLayer(params, f"{prefix}.visual_projection", cfg.feature_dim, width)

    def __call__(self, audio: Tensor, visual: Tensor) -> Tensor:
        return fuse_features(audio, visual, self.cfg, self)


def fuse_features(audio: Tensor, visual: Tensor, cfg: FusionConfig, fusion: "Fusion | None" = None) -> Tensor:
    """add: a + v. concat: [a; v]. mfb: project both to k*d, multiply, sum-pool by k,
    signed square root, L2 normalise."""
    if cfg.mode is FusionMode.CONCAT:
        return concat([audio, visual])
    if audio.shape != visual.shape:
        raise DimensionError(f"{cfg.mode.value} fusion needs equal dims, got {audio.shape} and {visual.shape}")
    if cfg.mode is FusionMode.ADD:
        return audio + visual
    if fusion is None:
        raise DimensionError("mfb fusion needs projection weights")
    joint = fusion.audio_projection(audio) * fusion.visual_projection(visual)
    return l2_normalize(signed_sqrt(sum_pool(joint, cfg.mfb_factor)))
