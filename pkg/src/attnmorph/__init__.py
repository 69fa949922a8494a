"""Attention-aware wavelet morph detection on synthetic faces.

Subpackages and modules:

- ``engine``: numpy reverse-mode autodiff, Adam, checkpoints
- ``wavelet``: 48-band undecimated packet decomposition
- ``attention``: compatibility / softmax / weighted-feature attention and heatmaps
- ``model``: residual backbone with attention taps, training and scoring
- ``data``: procedural faces, landmark morphs, splits, netpbm I/O
- ``metrics``: APCER, BPCER, D-EER, BPCER@APCER, DET curves
- ``cli``: the ``attnmorph`` command
"""

__version__ = "0.1.0"
