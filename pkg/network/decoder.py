"""Mirrored 2-D image decoder (pretraining) and the 3-D voxel decoder."""

import logging

from autodiff.ops import activate
from autodiff.tensor import Tensor
from config import Decoder2DConfig, DecoderConfig3D
from errors import DimensionError
from network.layers import DenseLayer, ParameterSet, TransposedBlock

logger = logging.getLogger(__name__)


class ImageDecoder:
    """ConvLSTM hidden map back to a single-channel frame."""

    def __init__(self, params: ParameterSet, prefix: str, cfg: Decoder2DConfig):
        self.cfg = cfg
        channels = cfg.input_channels
        self.stages = []
        for index, spec in enumerate(cfg.stages):
            final = index == len(cfg.stages) - 1
            self.stages.append(TransposedBlock(params, f"{prefix}.stage{index}", channels, spec, 2, final))
            channels = spec.channels

    def __call__(self, hidden: Tensor) -> Tensor:
        expected = (self.cfg.input_channels, self.cfg.input_size, self.cfg.input_size)
        if hidden.shape != expected:
            raise DimensionError(f"hidden map {hidden.shape} does not match {expected}")
        x = hidden
        for stage in self.stages:
            x = stage(x)
        return x


class VoxelDecoder:
    """Dense seed (C x 1 x 1 x 1) then five transposed 3-D convs to an occupancy grid."""

    def __init__(self, params: ParameterSet, prefix: str, cfg: DecoderConfig3D):
        self.cfg = cfg
        self.seed = DenseLayer(params, f"{prefix}.seed", cfg.input_dim, cfg.seed_channels)
        channels = cfg.seed_channels
        self.stages = []
        for index, spec in enumerate(cfg.stages):
            final = index == len(cfg.stages) - 1
            self.stages.append(TransposedBlock(params, f"{prefix}.stage{index}", channels, spec, 3, final))
            channels = spec.channels

    def __call__(self, feature: Tensor) -> Tensor:
        if feature.shape != (self.cfg.input_dim,):
            raise DimensionError(f"decoder expects a ({self.cfg.input_dim},) feature, got {feature.shape}")
        x = activate(self.seed(feature), "relu").reshape(self.cfg.seed_channels, 1, 1, 1)
        for stage in self.stages:
            x = stage(x)
        size = self.cfg.output_size
        return x.reshape(size, size, size)
