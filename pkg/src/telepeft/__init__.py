"""Depth-scaled bottleneck adapters for a small prompt-conditioned
segmentation transformer, with exact trainable-parameter accounting."""

__version__ = "0.1.0"
