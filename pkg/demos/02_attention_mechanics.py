"""
Soft attention, step by step
============================

The attention module scores each local feature vector against a global
vector, turns the scores into a distribution over locations and pools the
local vectors with it.
"""

import numpy as np

from attnmorph.attention import attend, attention_forward, compatibility, export_heatmap, normalize, project
from attnmorph.engine import Tensor, backward, total

rng = np.random.default_rng(0)

# A 6-channel 3x4 feature map, projected to D = 4 by a 1x1 convolution.
features = Tensor(rng.normal(size=(1, 6, 3, 4)), requires_grad=True)
kernel = Tensor(rng.normal(size=(4, 6, 1, 1)), requires_grad=True)
local = project(features, kernel)
print("local features", local.features.shape, "spatial", local.spatial_shape)

# Global vector that happens to point along the local vector at location 5.
g = Tensor(local.features.numpy()[:, 5] * 2.0)
scores = compatibility(local, g)
amap = normalize(scores, local.spatial_shape)
print("scores  ", scores.numpy().round(2))
print("weights ", amap.weights.numpy().round(3), "sum", amap.weights.numpy().sum())
print("argmax location", int(amap.weights.numpy().argmax()))

# Weighted feature: a convex combination of the local vectors.
g_a = attend(local, amap)
lo, hi = local.features.numpy()[0].min(axis=0), local.features.numpy()[0].max(axis=0)
print("g_a", g_a.numpy().round(3), "inside hull:", bool(np.all((g_a.numpy() >= lo) & (g_a.numpy() <= hi))))

# Everything stays on the tape, so gradients reach the projection kernel.
g_a, amap = attention_forward(features, kernel, g)
backward(total(g_a))
print("d/d kernel norm", np.linalg.norm(kernel.grad).round(4))

# Heatmap: bilinear upsampling to image size, then min-max normalization.
heat = export_heatmap(amap, (12, 16))
print("heatmap", heat.shape, "min", heat.min(), "max", heat.max())
print((heat * 9).round().astype(int))
