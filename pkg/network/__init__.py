"""Network blocks, the assembled segmentation network and its accounting."""

from network.accounting import (
    block_params,
    count_flops,
    count_params,
    cost_breakdown,
    network_params,
)
from network.attention import AxialSelfAttention
from network.blocks import ConvBlock, DenseBlock, HCMAUp, HybridBlock, OutBlock, ResBlock
from network.layers import Conv3d, InstanceNorm3d, LayerNorm, Linear, TransposeConv3d
from network.mism import MISM, VIEWS, ViewBranch, asc_split, reslice, unslice, view_process
from network.module import Module, Parameter
from network.ssm import S6, VSSB, Mamba3d, cross_merge, cross_scan, scan_orders
from network.unet import HCMAUNet, build

__all__ = [
    "AxialSelfAttention",
    "Conv3d",
    "ConvBlock",
    "DenseBlock",
    "HCMAUNet",
    "HCMAUp",
    "HybridBlock",
    "InstanceNorm3d",
    "LayerNorm",
    "Linear",
    "MISM",
    "Mamba3d",
    "Module",
    "OutBlock",
    "Parameter",
    "ResBlock",
    "S6",
    "TransposeConv3d",
    "VIEWS",
    "VSSB",
    "ViewBranch",
    "asc_split",
    "block_params",
    "build",
    "count_flops",
    "count_params",
    "cost_breakdown",
    "cross_merge",
    "cross_scan",
    "network_params",
    "reslice",
    "scan_orders",
    "unslice",
    "view_process",
]
