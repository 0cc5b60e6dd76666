"""Encoder-decoder networks for disparity estimation and spectral
reconstruction.

Both networks share one architecture: a contractive part of strided
convolutions (7 stages of stride 2, total downsampling factor 128) and an
expanding part that upsamples back while concatenating long-range skip
features from the matching contractive resolution.  Kernel sizes are 7, 7,
5, 5 and then 3 for all deeper layers; every convolution is followed by a
ReLU except the last, which feeds a scaled sigmoid bounding the output to
[output_min, output_max].  The total convolution count is exactly 32:
1 stem + 14 contracting + 14 expanding + 3 head layers.

Inputs whose resolution is not divisible by 128 are replicate-padded up
and the output is cropped back.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch
import torch.nn.functional as F
from torch import nn

DOWNSAMPLE_FACTOR = 128
CONV_LAYER_COUNT = 32
_STAGES = 7

DEFAULT_WIDTHS = (16, 32, 48, 64, 96, 128, 192, 192)


@dataclass(frozen=True)
class NetworkSpec:
    in_channels: int
    out_channels: int
    output_max: float
    output_min: float = 0.0
    widths: tuple = DEFAULT_WIDTHS  # stem width + one width per stage

    def __post_init__(self):
        if len(self.widths) != _STAGES + 1:
            raise ValueError(f"widths needs {_STAGES + 1} entries, got "
                             f"{len(self.widths)}")
        if self.output_max <= self.output_min:
            raise ValueError("output_max must exceed output_min")


def _kernel_for_layer(index: int) -> int:
    # 1-based conv index: layers 1-2 -> 7x7, 3-4 -> 5x5, deeper -> 3x3
    if index <= 2:
        return 7
    if index <= 4:
        return 5
    return 3


def _conv(cin: int, cout: int, kernel: int, stride: int = 1) -> nn.Conv2d:
    return nn.Conv2d(cin, cout, kernel, stride=stride, padding=kernel // 2)


class HourglassNet(nn.Module):
    """The shared 32-convolution encoder-decoder with skip links."""

    def __init__(self, spec: NetworkSpec):
        super().__init__()
        self.spec = spec
        w = spec.widths
        layer = 1
        self.stem = _conv(spec.in_channels, w[0], _kernel_for_layer(layer))

        self.down_strided = nn.ModuleList()
        self.down_refine = nn.ModuleList()
        for i in range(_STAGES):
            layer += 1
            self.down_strided.append(_conv(w[i], w[i + 1], _kernel_for_layer(layer),
                                           stride=2))
            layer += 1
            self.down_refine.append(_conv(w[i + 1], w[i + 1], _kernel_for_layer(layer)))

        self.up_merge = nn.ModuleList()
        self.up_refine = nn.ModuleList()
        for i in reversed(range(_STAGES)):
            skip_w = w[i]
            self.up_merge.append(_conv(w[i + 1] + skip_w, skip_w, 3))
            self.up_refine.append(_conv(skip_w, skip_w, 3))
            layer += 2

        self.head1 = _conv(w[0], w[0], 3)
        self.head2 = _conv(w[0], w[0], 3)
        self.out_conv = _conv(w[0], spec.out_channels, 3)
        assert layer + 3 == CONV_LAYER_COUNT

    def conv_layer_count(self) -> int:
        return sum(1 for m in self.modules() if isinstance(m, nn.Conv2d))

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        if x.shape[1] != self.spec.in_channels:
            raise ValueError(f"expected {self.spec.in_channels} input channels, "
                             f"got {x.shape[1]}")
        h, w = x.shape[2], x.shape[3]
        pad_h = (-h) % DOWNSAMPLE_FACTOR
        pad_w = (-w) % DOWNSAMPLE_FACTOR
        if pad_h or pad_w:
            x = F.pad(x, (0, pad_w, 0, pad_h), mode="replicate")

        feat = F.relu(self.stem(x))
        skips = [feat]
        for strided, refine in zip(self.down_strided, self.down_refine):
            feat = F.relu(strided(feat))
            feat = F.relu(refine(feat))
            skips.append(feat)

        for j, (merge, refine) in enumerate(zip(self.up_merge, self.up_refine)):
            skip = skips[_STAGES - 1 - j]
            feat = F.interpolate(feat, size=skip.shape[2:], mode="bilinear",
                                 align_corners=False)
            feat = F.relu(merge(torch.cat([feat, skip], dim=1)))
            feat = F.relu(refine(feat))

        feat = F.relu(self.head1(feat))
        feat = F.relu(self.head2(feat))
        out = self.out_conv(feat)
        span = self.spec.output_max - self.spec.output_min
        out = self.spec.output_min + span * torch.sigmoid(out)
        if pad_h or pad_w:
            out = out[:, :, :h, :w]
        return out


DISPARITY_FLOOR = 0.5  # px; keeps Z = bf/D finite


def disparity_net_spec(max_disparity: float, widths=DEFAULT_WIDTHS) -> NetworkSpec:
    """Six-channel input: the RGB image concatenated with its LCN."""
    return NetworkSpec(in_channels=6, out_channels=1, output_max=max_disparity,
                       output_min=DISPARITY_FLOOR, widths=widths)


def spectral_net_spec(band_count: int, widths=DEFAULT_WIDTHS) -> NetworkSpec:
    """Input: image (3) + estimated depth (1) + warped illumination (bands)."""
    return NetworkSpec(in_channels=4 + band_count, out_channels=band_count,
                       output_max=1.0, widths=widths)


def build_networks(max_disparity: float, band_count: int,
                   widths=DEFAULT_WIDTHS) -> tuple[HourglassNet, HourglassNet]:
    return (HourglassNet(disparity_net_spec(max_disparity, widths)),
            HourglassNet(spectral_net_spec(band_count, widths)))
