"""Synthetic audio-visual-voxel dataset generation."""
