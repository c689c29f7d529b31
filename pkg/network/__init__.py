"""Encoders, decoders, fusion and training for the voxel reconstruction network."""
