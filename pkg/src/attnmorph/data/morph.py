"""Landmark-based morphing: average geometry, piecewise-affine warp, alpha blend."""

import numpy as np

from ..errors import GeometryError, InputError
from .faces import BONA_FIDE, MORPH, TRIANGLES, FaceSample, signed_areas

MIN_TRIANGLE_AREA = 0.5


def bilinear_sample(image, xs, ys):
    """Sample ``image`` at real coordinates (x = column, y = row), clamped to the border."""
    h, w = image.shape
    xs = np.clip(xs, 0.0, w - 1)
    ys = np.clip(ys, 0.0, h - 1)
    x0 = np.floor(xs).astype(int)
    y0 = np.floor(ys).astype(int)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    fx = xs - x0
    fy = ys - y0
    top = image[y0, x0] * (1 - fx) + image[y0, x1] * fx
    bottom = image[y1, x0] * (1 - fx) + image[y1, x1] * fx
    return top * (1 - fy) + bottom * fy


def affine_from_triangles(dst, src):
    """2x3 matrix ``M`` with ``M @ [x, y, 1] = src`` for each vertex of ``dst``."""
    lhs = np.column_stack([dst, np.ones(3)])
    return np.linalg.solve(lhs, src).T


def warp_image(image, src_pts, dst_pts, triangles=TRIANGLES):
    """Resample ``image`` (drawn with geometry ``src_pts``) onto geometry ``dst_pts``.

    Each output pixel inside a target triangle is mapped back through that
    triangle's affine map and bilinearly sampled. Pixels outside every
    triangle keep their own coordinates. When the geometries are identical
    the image is returned unchanged.
    """
    src_pts = np.asarray(src_pts, dtype=np.float64)
    dst_pts = np.asarray(dst_pts, dtype=np.float64)
    areas = signed_areas(dst_pts, triangles)
    if np.any(np.abs(areas) < MIN_TRIANGLE_AREA):
        bad = int(np.argmin(np.abs(areas)))
        raise GeometryError(f"target triangle {tuple(triangles[bad])} has area {abs(areas[bad]):.3g} px^2 < {MIN_TRIANGLE_AREA}")
    if np.array_equal(src_pts, dst_pts):
        return image.copy()
    h, w = image.shape
    yy, xx = np.mgrid[0:h, 0:w].astype(np.float64)
    src_x, src_y = xx.copy(), yy.copy()
    assigned = np.zeros((h, w), dtype=bool)
    for tri in triangles:
        d, s = dst_pts[tri], src_pts[tri]
        # Barycentric coordinates of every pixel w.r.t. the target triangle.
        t = np.array([[d[0, 0] - d[2, 0], d[1, 0] - d[2, 0]], [d[0, 1] - d[2, 1], d[1, 1] - d[2, 1]]])
        inv = np.linalg.inv(t)
        l0 = inv[0, 0] * (xx - d[2, 0]) + inv[0, 1] * (yy - d[2, 1])
        l1 = inv[1, 0] * (xx - d[2, 0]) + inv[1, 1] * (yy - d[2, 1])
        inside = (l0 >= -1e-12) & (l1 >= -1e-12) & (1 - l0 - l1 >= -1e-12) & ~assigned
        if not inside.any():
            continue
        m = affine_from_triangles(d, s)
        src_x[inside] = m[0, 0] * xx[inside] + m[0, 1] * yy[inside] + m[0, 2]
        src_y[inside] = m[1, 0] * xx[inside] + m[1, 1] * yy[inside] + m[1, 2]
        assigned |= inside
    return bilinear_sample(image, src_x, src_y)


def morph_images(image_a, pts_a, image_b, pts_b, alpha=0.5, triangles=TRIANGLES):
    """Blend two faces on their interpolated geometry.

    Returns
    -------
    (ndarray, ndarray)
        The morphed image ``(1-alpha)*warp(a) + alpha*warp(b)`` and the target landmarks.
    """
    if not 0.0 <= alpha <= 1.0:
        raise InputError(f"alpha must lie in [0, 1], got {alpha}")
    if image_a.shape != image_b.shape:
        raise InputError(f"image sizes differ: {image_a.shape} vs {image_b.shape}")
    target = (1.0 - alpha) * np.asarray(pts_a) + alpha * np.asarray(pts_b)
    warped_a = warp_image(image_a, pts_a, target, triangles)
    warped_b = warp_image(image_b, pts_b, target, triangles)
    return (1.0 - alpha) * warped_a + alpha * warped_b, target


def morph_pair(a, b, alpha=0.5):
    """Morph two bona fide :class:`FaceSample` objects into a morph sample."""
    if a.label != BONA_FIDE or b.label != BONA_FIDE:
        raise InputError("morph_pair needs two bona fide samples")
    image, target = morph_images(a.image, a.landmarks, b.image, b.landmarks, alpha)
    sa, sb = a.subject_ids[0], b.subject_ids[0]
    return FaceSample(image, MORPH, (sa, sb), target, sample_id=f"m_{sa}_{sb}", alpha=float(alpha))
