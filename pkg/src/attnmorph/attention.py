"""Soft spatial attention driven by a global feature vector.

For a tap layer with local features ``l_i`` (one per spatial location) and a
global vector ``g``:

    c_i = <l_i, g>                      compatibility
    a_i = exp(c_i) / sum_j exp(c_j)     attention weights
    g_a = sum_i a_i * l_i               attention-weighted feature

All functions operate on a leading batch axis ``N`` and stay on the gradient
tape. Spatial locations are flattened row-major, so ``i = row * w + col``.
"""

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .data.netpbm import write_raster
from .engine import Tensor, bmm, conv2d, reshape, softmax, transpose
from .errors import InputError

LAYER_IDS = ("L1", "L2", "L3")


@dataclass
class LocalFeatureMap:
    features: Tensor        # [N, n, D]
    spatial_shape: tuple    # (h, w), h * w == n
    layer_id: str

    @property
    def width(self):
        return self.features.shape[2]


@dataclass
class AttentionMap:
    weights: Tensor         # [N, n], rows on the probability simplex
    spatial_shape: tuple
    layer_id: str

    def as_images(self):
        """Weights as an ``[N, h, w]`` array."""
        return self.weights.data.reshape((-1,) + tuple(self.spatial_shape))


def project(features, proj_kernel, layer_id="L1"):
    """1x1 convolution of ``features [N, C, h, w]`` to ``D`` channels, flattened to ``[N, h*w, D]``."""
    if features.ndim != 4:
        raise InputError(f"expected [N, C, h, w] features, got {features.shape}")
    if proj_kernel.ndim != 4 or proj_kernel.shape[2:] != (1, 1) or proj_kernel.shape[1] != features.shape[1]:
        raise InputError(f"projection kernel {proj_kernel.shape} does not match {features.shape[1]} input channels")
    n, _, h, w = features.shape
    d = proj_kernel.shape[0]
    projected = conv2d(features, proj_kernel, None)
    flat = reshape(transpose(projected, (0, 2, 3, 1)), (n, h * w, d))
    return LocalFeatureMap(flat, (h, w), layer_id)


def compatibility(local, global_feature):
    """Inner product of every local vector with the global vector: ``[N, n]``."""
    n, locations, d = local.features.shape
    if global_feature.shape != (n, d):
        raise InputError(f"global feature {global_feature.shape} incompatible with local features {local.features.shape}")
    scores = bmm(local.features, reshape(global_feature, (n, d, 1)))
    return reshape(scores, (n, locations))


def normalize(scores, spatial_shape=None, layer_id="L1"):
    """Softmax over locations (max-shifted)."""
    if spatial_shape is None:
        spatial_shape = (1, scores.shape[-1])
    return AttentionMap(softmax(scores), tuple(spatial_shape), layer_id)


def attend(local, attention_map):
    """Attention-weighted sum of the local vectors: ``[N, D]``."""
    n, locations, d = local.features.shape
    if attention_map.weights.shape != (n, locations):
        raise InputError(f"attention weights {attention_map.weights.shape} do not match {(n, locations)} locations")
    pooled = bmm(reshape(attention_map.weights, (n, 1, locations)), local.features)
    return reshape(pooled, (n, d))


def attention_forward(features, proj_kernel, global_feature, layer_id="L1"):
    """project -> compatibility -> normalize -> attend.

    Returns
    -------
    (Tensor, AttentionMap)
        The ``[N, D]`` attention-weighted feature and the weights that produced it.
    """
    local = project(features, proj_kernel, layer_id)
    amap = normalize(compatibility(local, global_feature), local.spatial_shape, layer_id)
    return attend(local, amap), amap


def _bilinear_resize(grid, size):
    # Corner-aligned: output pixel 0 and H-1 sit exactly on source rows 0 and h-1.
    h, w = grid.shape
    out_h, out_w = size
    ys = np.linspace(0.0, h - 1, out_h) if out_h > 1 else np.zeros(1)
    xs = np.linspace(0.0, w - 1, out_w) if out_w > 1 else np.zeros(1)
    y0 = np.clip(np.floor(ys).astype(int), 0, max(h - 2, 0))
    x0 = np.clip(np.floor(xs).astype(int), 0, max(w - 2, 0))
    y1 = np.minimum(y0 + 1, h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    fy = (ys - y0)[:, None]
    fx = (xs - x0)[None, :]
    top = grid[np.ix_(y0, x0)] * (1 - fx) + grid[np.ix_(y0, x1)] * fx
    bottom = grid[np.ix_(y1, x0)] * (1 - fx) + grid[np.ix_(y1, x1)] * fx
    return top * (1 - fy) + bottom * fy


def export_heatmap(attention_map, target_size, index=0):
    """Upsample one sample's weights to ``target_size`` and min-max normalize to [0, 1].

    A constant map becomes 0.5 everywhere.
    """
    h, w = attention_map.spatial_shape
    target_h, target_w = target_size
    if target_h < max(h, 2) or target_w < max(w, 2):
        raise InputError(f"target size {target_size} smaller than attention grid {(h, w)}")
    grid = attention_map.as_images()[index]
    up = _bilinear_resize(grid, (target_h, target_w))
    lo, hi = up.min(), up.max()
    if hi - lo <= 0:
        return np.full((target_h, target_w), 0.5)
    return (up - lo) / (hi - lo)


def write_heatmaps(attention_maps, sample_id, out_dir, target_size, index=0):
    """Write one 8-bit PGM per tap layer as ``<sample_id>.<layer_id>.pgm``; returns the paths."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    for amap in attention_maps:
        path = out_dir / f"{sample_id}.{amap.layer_id}.pgm"
        write_raster(export_heatmap(amap, target_size, index), path, bits=8)
        paths.append(path)
    return paths
