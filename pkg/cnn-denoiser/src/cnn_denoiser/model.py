"""Residual CNN conditioned on per-band noise levels.

A DnCNN-style residual denoiser where *every* convolutional stage receives,
in addition to its feature maps, 13 extra channels holding the per-subband
noise standard deviations, each broadcast to a constant h x w plane. The
network predicts the noise and subtracts it from its input.

The model works on a single real channel; inputs and sds are normalized by
255 so training runs on the unit scale.
"""

import numpy as np
import torch
from torch import nn

from .dataset import NUM_BANDS

PIXEL_SCALE = 255.0
DESK_DEPTH = 8  # number of conv layers, first and last included
DESK_FEATURES = 32


class ColoredDnCNN(nn.Module):
    def __init__(self, depth=DESK_DEPTH, features=DESK_FEATURES):
        super().__init__()
        if depth < 2:
            raise ValueError("depth must be at least 2")
        self.depth = depth
        self.features = features
        convs = [nn.Conv2d(1 + NUM_BANDS, features, 3, padding=1)]
        norms = []
        for _ in range(depth - 2):
            convs.append(nn.Conv2d(features + NUM_BANDS, features, 3, padding=1))
            norms.append(nn.BatchNorm2d(features))
        convs.append(nn.Conv2d(features + NUM_BANDS, 1, 3, padding=1))
        self.convs = nn.ModuleList(convs)
        self.norms = nn.ModuleList(norms)

    def forward(self, noisy, band_sds):
        """noisy: (B, 1, H, W); band_sds: (B, 13); both on the unit scale."""
        planes = band_sds[:, :, None, None].expand(
            -1, -1, noisy.shape[2], noisy.shape[3]
        )
        out = self.convs[0](torch.cat([noisy, planes], dim=1))
        out = torch.relu(out)
        for conv, norm in zip(self.convs[1:-1], self.norms):
            out = torch.relu(norm(conv(torch.cat([out, planes], dim=1))))
        residual = self.convs[-1](torch.cat([out, planes], dim=1))
        return noisy - residual


def denoise_image(model, image, band_sds):
    """Apply a trained model to one real image in pixel units."""
    model.eval()
    with torch.no_grad():
        noisy = torch.from_numpy(
            np.ascontiguousarray(image, dtype=np.float32)[None, None] / PIXEL_SCALE
        )
        sds = torch.from_numpy(
            np.asarray(band_sds, dtype=np.float32)[None] / PIXEL_SCALE
        )
        out = model(noisy, sds)
    return out[0, 0].numpy().astype(np.float64) * PIXEL_SCALE
