"""Procedural grayscale faces with a fixed 13-point landmark schema."""

from dataclasses import dataclass, field

import numpy as np

from ..errors import InputError

LANDMARK_NAMES = (
    "oval_left", "oval_right", "jaw_left", "jaw_right",
    "eye_left", "eye_right", "brow_left", "brow_right",
    "nose", "mouth_left", "mouth_right",
    "hairline_left", "hairline_right",
)

# Unit-square template, (x, y) with y pointing down.
TEMPLATE = np.array([
    [0.20, 0.55], [0.80, 0.55], [0.35, 0.85], [0.65, 0.85],
    [0.36, 0.40], [0.64, 0.40], [0.22, 0.30], [0.78, 0.30],
    [0.50, 0.56], [0.40, 0.71], [0.60, 0.71],
    [0.35, 0.12], [0.65, 0.12],
])

# Delaunay triangulation of TEMPLATE, stored once so every face shares it.
# Each triple has positive signed area in (x right, y down) coordinates.
TRIANGLES = np.array([
    (3, 10, 1), (4, 6, 11), (4, 8, 0), (4, 12, 5),
    (5, 7, 1), (6, 4, 0), (8, 4, 5), (8, 5, 1),
    (8, 9, 0), (9, 2, 0), (9, 10, 2), (10, 3, 2),
    (10, 8, 1), (10, 9, 8), (12, 4, 11), (12, 7, 5),
])

JITTER = 0.08
NOISE_SIGMA = 0.02
MIN_AREA_FRACTION = 0.25
BONA_FIDE, MORPH = "bona_fide", "morph"


def signed_areas(points, triangles=TRIANGLES):
    a, b, c = points[triangles[:, 0]], points[triangles[:, 1]], points[triangles[:, 2]]
    return 0.5 * ((b[:, 0] - a[:, 0]) * (c[:, 1] - a[:, 1]) - (b[:, 1] - a[:, 1]) * (c[:, 0] - a[:, 0]))


@dataclass
class FaceSample:
    image: np.ndarray
    label: str
    subject_ids: tuple
    landmarks: np.ndarray
    sample_id: str = ""
    alpha: float = field(default=None)

    def __post_init__(self):
        if self.label not in (BONA_FIDE, MORPH):
            raise InputError(f"unknown label {self.label!r}")
        expected = 2 if self.label == MORPH else 1
        if len(set(self.subject_ids)) != expected or len(self.subject_ids) != expected:
            raise InputError(f"{self.label} sample needs {expected} distinct subject id(s), got {self.subject_ids}")


def _check_size(size):
    h, w = (size, size) if np.isscalar(size) else tuple(size)
    if h != w or h < 8 or h % 8:
        raise InputError(f"face size must be square with side a multiple of 8, got {size}")
    return int(h)


def sample_landmarks(rng, size):
    """Jittered template in pixel coordinates; resampled until every triangle keeps its orientation."""
    base = TEMPLATE * size
    min_area = MIN_AREA_FRACTION * signed_areas(base)
    for _ in range(1000):
        pts = base + rng.uniform(-JITTER, JITTER, size=base.shape) * size
        if np.all(signed_areas(pts) >= min_area) and pts.min() >= 0 and pts.max() <= size - 1:
            return pts
    raise RuntimeError("could not draw a valid landmark set")  # pragma: no cover


def _capsule(xx, yy, p, q, radius):
    d = q - p
    t = np.clip(((xx - p[0]) * d[0] + (yy - p[1]) * d[1]) / max(d @ d, 1e-12), 0.0, 1.0)
    return (xx - p[0] - t * d[0]) ** 2 + (yy - p[1] - t * d[1]) ** 2 <= radius ** 2


def _ellipse(xx, yy, center, rx, ry):
    return ((xx - center[0]) / rx) ** 2 + ((yy - center[1]) / ry) ** 2 <= 1.0


def render_face(rng, pts, size):
    """Draw head, hair, brows, eyes, nose and mouth at the given landmarks."""
    lm = dict(zip(LANDMARK_NAMES, pts))
    yy, xx = np.mgrid[0:size, 0:size].astype(np.float64)
    background = rng.uniform(0.10, 0.25)
    skin = rng.uniform(0.55, 0.80)
    hair = rng.uniform(0.05, 0.30)
    img = np.full((size, size), background)

    top = 0.5 * (lm["hairline_left"][1] + lm["hairline_right"][1])
    bottom = 0.5 * (lm["jaw_left"][1] + lm["jaw_right"][1])
    cx = 0.5 * (lm["oval_left"][0] + lm["oval_right"][0])
    head = _ellipse(xx, yy, (cx, 0.5 * (top + bottom)),
                    0.56 * (lm["oval_right"][0] - lm["oval_left"][0]), 0.62 * (bottom - top))
    img[head] = skin
    hl, hr = lm["hairline_left"], lm["hairline_right"]
    hair_line_y = hl[1] + (xx - hl[0]) * (hr[1] - hl[1]) / (hr[0] - hl[0])
    img[head & (yy < hair_line_y)] = hair

    for side in ("left", "right"):
        eye, brow = lm[f"eye_{side}"], lm[f"brow_{side}"]
        inner = np.array([eye[0] + 0.4 * (eye[0] - brow[0]), eye[1] - 0.09 * size])
        img[_capsule(xx, yy, brow, inner, 0.025 * size)] = skin - 0.40
        img[_ellipse(xx, yy, eye, 0.06 * size, 0.035 * size)] = skin - 0.45
    img[_ellipse(xx, yy, lm["nose"], 0.03 * size, 0.05 * size)] = skin - 0.20
    img[_capsule(xx, yy, lm["mouth_left"], lm["mouth_right"], 0.03 * size)] = skin - 0.35

    theta = rng.uniform(0, 2 * np.pi)
    ramp = ((xx - size / 2) * np.cos(theta) + (yy - size / 2) * np.sin(theta)) / size
    img = img + rng.uniform(0.05, 0.20) * ramp
    img = img + rng.normal(0.0, NOISE_SIGMA, size=img.shape)
    return np.clip(img, 0.0, 1.0)


def generate_subject(subject_seed, size=32, subject_id=None):
    """Deterministic bona fide face for one subject.

    Parameters
    ----------
    subject_seed : int
        Seeds landmark jitter, tones, shading and texture noise.
    size : int
        Square side in pixels; a multiple of 8.
    subject_id : hashable, optional
        Identity recorded on the sample; defaults to ``subject_seed``.
    """
    size = _check_size(size)
    rng = np.random.default_rng(subject_seed)
    pts = sample_landmarks(rng, size)
    image = render_face(rng, pts, size)
    sid = subject_seed if subject_id is None else subject_id
    return FaceSample(image, BONA_FIDE, (sid,), pts, sample_id=f"bf_{sid}")
