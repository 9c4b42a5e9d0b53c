"""Segmentation network built on the tensor engine."""
from network.hiperformer import HiPerformer, SegmentationOutput, param_count
from network.layers import Module, Parameter

__all__ = ["HiPerformer", "Module", "Parameter", "SegmentationOutput", "param_count"]
