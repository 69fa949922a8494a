"""Undecimated 2-D wavelet-packet decomposition.

Every node of a depth-3 packet tree is split with à trous filters (the level-``j``
filter has ``2**(j-1) - 1`` zeros between taps) under periodic boundary
extension, so all sub-bands keep the input resolution. The subtree under the
level-1 LL node is dropped, leaving ``3 * 4 * 4 = 48`` leaves.

Orientation: "rows" filtering runs along axis 1 (each row is a signal),
"columns" filtering along axis 0. Band ``LH`` is low-pass on rows and
high-pass on columns.
"""

from dataclasses import dataclass
from itertools import product

import numpy as np

from .errors import InputError

CHILD_ORDER = ("LL", "LH", "HL", "HH")
DEPTH = 3
N_BANDS = 48
LUMA = np.array([0.299, 0.587, 0.114])


@dataclass(frozen=True)
class FilterPair:
    name: str
    lowpass: tuple
    highpass: tuple

    def __post_init__(self):
        if len(self.lowpass) != len(self.highpass) or not self.lowpass:
            raise InputError(f"filter pair {self.name!r} needs equal, non-zero lengths")


def quadrature_mirror(lowpass):
    """High-pass partner ``g[k] = (-1)**k * h[L-1-k]``."""
    n = len(lowpass)
    return tuple((-1) ** k * lowpass[n - 1 - k] for k in range(n))


def haar():
    s = 1.0 / np.sqrt(2.0)
    return FilterPair("haar", (s, s), (s, -s))


def db2():
    r3 = np.sqrt(3.0)
    h = tuple(float(v) for v in np.array([1 + r3, 3 + r3, 3 - r3, 1 - r3]) / (4 * np.sqrt(2.0)))
    return FilterPair("db2", h, quadrature_mirror(h))


FILTERS = {"haar": haar, "db2": db2}


def get_filters(name):
    try:
        return FILTERS[name]()
    except KeyError:
        raise InputError(f"unknown wavelet {name!r}; choose from {sorted(FILTERS)}") from None


@dataclass
class SubbandStack:
    """48 same-size sub-bands of one image, in depth-first LL/LH/HL/HH order."""

    bands: np.ndarray
    band_labels: list
    source_size: tuple

    def __post_init__(self):
        if self.bands.shape[0] != N_BANDS or len(self.band_labels) != N_BANDS:
            raise InputError(f"expected {N_BANDS} bands, got {self.bands.shape[0]}")
        if self.bands.shape[1:] != tuple(self.source_size):
            raise InputError(f"band size {self.bands.shape[1:]} != source size {self.source_size}")

    def band(self, label):
        return self.bands[self.band_labels.index(label)]


def to_grayscale(image):
    """Luma conversion for ``H x W x 3`` input; ``H x W`` (or ``H x W x 1``) passes through."""
    image = np.asarray(image, dtype=np.float64)
    if image.ndim == 2:
        return image.copy()
    if image.ndim == 3 and image.shape[2] == 1:
        return image[:, :, 0].copy()
    if image.ndim == 3 and image.shape[2] == 3:
        return image @ LUMA
    raise InputError(f"expected a gray or RGB raster, got shape {image.shape}")


def _filter_periodic(x, taps, dilation, axis):
    # y[n] = sum_k taps[k] * x[(n - dilation*k) mod N]
    out = np.zeros_like(x)
    for k, c in enumerate(taps):
        if c != 0.0:
            out += c * np.roll(x, dilation * k, axis=axis)
    return out


def swt_split(band, filters, level):
    """One undecimated 2-D analysis step at ``level`` (1-based).

    Returns
    -------
    dict
        ``{"LL", "LH", "HL", "HH"}`` -> arrays with the shape of ``band``.
    """
    band = np.asarray(band, dtype=np.float64)
    if band.ndim != 2:
        raise InputError(f"swt_split needs a 2-d raster, got shape {band.shape}")
    if level < 1:
        raise InputError(f"level must be >= 1, got {level}")
    dilation = 2 ** (level - 1)
    span = (len(filters.lowpass) - 1) * dilation + 1
    if span > min(band.shape):
        raise InputError(f"dilated filter length {span} exceeds raster extent {band.shape}")
    row_low = _filter_periodic(band, filters.lowpass, dilation, axis=1)
    row_high = _filter_periodic(band, filters.highpass, dilation, axis=1)
    return {
        "LL": _filter_periodic(row_low, filters.lowpass, dilation, axis=0),
        "LH": _filter_periodic(row_low, filters.highpass, dilation, axis=0),
        "HL": _filter_periodic(row_high, filters.lowpass, dilation, axis=0),
        "HH": _filter_periodic(row_high, filters.highpass, dilation, axis=0),
    }


def band_labels():
    """The 48 retained leaf paths, depth-first."""
    return [".".join(p) for p in product(CHILD_ORDER, repeat=DEPTH) if p[0] != "LL"]


def packet_decompose(image, filters=None):
    """Depth-3 undecimated packet tree with the level-1 LL subtree removed.

    Parameters
    ----------
    image : ndarray, shape (H, W)
        Gray raster; ``H`` and ``W`` must be multiples of 8.
    filters : FilterPair, optional
        Defaults to Haar.

    Returns
    -------
    SubbandStack
    """
    filters = haar() if filters is None else filters
    image = np.asarray(image, dtype=np.float64)
    if image.ndim != 2 or image.shape[0] % 8 or image.shape[1] % 8:
        raise InputError(f"packet_decompose needs a 2-d raster with sides divisible by 8, got {image.shape}")
    leaves = {}

    def split(node, path, level):
        for name, child in swt_split(node, filters, level).items():
            if level == 1 and name == "LL":
                continue
            if level == DEPTH:
                leaves[".".join(path + (name,))] = child
            else:
                split(child, path + (name,), level + 1)

    split(image, (), 1)
    labels = band_labels()
    return SubbandStack(np.stack([leaves[lab] for lab in labels]), labels, image.shape)


def decompose_image(image, filters=None):
    """Grayscale-convert then decompose; returns the ``(48, H, W)`` array."""
    return packet_decompose(to_grayscale(image), filters).bands


def inverse_split(bands, filters, level):
    """Invert one :func:`swt_split` step.

    Each band is filtered with the adjoint (time-reversed) taps; for an
    orthonormal pair the four results sum to four times the analysed raster,
    so their average is the reconstruction.
    """
    dilation = 2 ** (level - 1)
    shifts = [-dilation * k for k in range(len(filters.lowpass))]

    def adj(x, taps, axis):
        out = np.zeros_like(x)
        for shift, c in zip(shifts, taps):
            out += c * np.roll(x, shift, axis=axis)
        return out

    lo, hi = filters.lowpass, filters.highpass
    parts = (adj(adj(bands["LL"], lo, 0), lo, 1), adj(adj(bands["LH"], hi, 0), lo, 1),
             adj(adj(bands["HL"], lo, 0), hi, 1), adj(adj(bands["HH"], hi, 0), hi, 1))
    return sum(parts) / 4.0
