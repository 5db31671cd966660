"""Dental-arch-prior tooth instance detection and segmentation on point clouds."""

__version__ = "0.1.0"
