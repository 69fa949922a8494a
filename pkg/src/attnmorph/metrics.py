"""Morph-detection error rates: APCER, BPCER, D-EER, BPCER@APCER and DET curves.

Scores are morph-likeness: a sample is declared a morph when ``score >= threshold``.
"""

import csv
from dataclasses import dataclass

import numpy as np

from .errors import InputError


@dataclass
class ScoreSet:
    bona_fide_scores: np.ndarray
    morph_scores: np.ndarray

    def __post_init__(self):
        self.bona_fide_scores = np.asarray(self.bona_fide_scores, dtype=np.float64).ravel()
        self.morph_scores = np.asarray(self.morph_scores, dtype=np.float64).ravel()

    def require_both(self):
        if self.bona_fide_scores.size == 0 or self.morph_scores.size == 0:
            raise InputError("both bona fide and morph scores are required")


def apcer(scores, threshold):
    """Fraction of morphs classified bona fide (score below threshold)."""
    if scores.morph_scores.size == 0:
        raise InputError("APCER needs at least one morph score")
    return float(np.mean(scores.morph_scores < threshold))


def bpcer(scores, threshold):
    """Fraction of bona fides classified morph (score at or above threshold)."""
    if scores.bona_fide_scores.size == 0:
        raise InputError("BPCER needs at least one bona fide score")
    return float(np.mean(scores.bona_fide_scores >= threshold))


@dataclass
class DetCurve:
    thresholds: np.ndarray
    apcer: np.ndarray
    bpcer: np.ndarray

    def rows(self):
        return list(zip(self.thresholds.tolist(), self.apcer.tolist(), self.bpcer.tolist()))


def det_curve(scores):
    """Error rates at every distinct observed score plus the -inf/+inf sentinels."""
    scores.require_both()
    observed = np.unique(np.concatenate([scores.bona_fide_scores, scores.morph_scores]))
    thresholds = np.concatenate([[-np.inf], observed, [np.inf]])
    morph = np.sort(scores.morph_scores)
    bona = np.sort(scores.bona_fide_scores)
    # counts of morphs strictly below t, bona fides at or above t
    a = np.searchsorted(morph, thresholds, side="left") / morph.size
    b = (bona.size - np.searchsorted(bona, thresholds, side="left")) / bona.size
    return DetCurve(thresholds, a, b)


def d_eer(scores):
    """Rate where APCER and BPCER cross on the DET step function.

    An exact equality point is returned as is; otherwise the two rates are
    linearly interpolated between the adjacent thresholds that bracket the
    sign change of ``APCER - BPCER``.
    """
    curve = det_curve(scores)
    diff = curve.apcer - curve.bpcer
    # diff runs from -1 at -inf to +1 at +inf and never decreases
    i = int(np.argmax(diff >= 0))
    if diff[i] == 0:
        return float(curve.apcer[i])
    a0, a1 = curve.apcer[i - 1], curve.apcer[i]
    b0, b1 = curve.bpcer[i - 1], curve.bpcer[i]
    t = (b0 - a0) / ((a1 - a0) - (b1 - b0))
    return float(a0 + t * (a1 - a0))


def bpcer_at_apcer(scores, target):
    """Lowest BPCER over thresholds whose APCER does not exceed ``target``.

    Because BPCER never increases with the threshold, this is the BPCER at the
    largest such threshold. No interpolation, so the reported point is
    achievable.
    """
    if not 0.0 < target < 1.0:
        raise InputError(f"target APCER must lie in (0, 1), got {target}")
    curve = det_curve(scores)
    ok = np.nonzero(curve.apcer <= target)[0]
    return float(curve.bpcer[ok[-1]])


def summary(scores):
    """``{"deer", "bpcer5", "bpcer10"}`` for one score set."""
    return {
        "deer": d_eer(scores),
        "bpcer5": bpcer_at_apcer(scores, 0.05),
        "bpcer10": bpcer_at_apcer(scores, 0.10),
    }


def write_det_csv(curve, path):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["threshold", "apcer", "bpcer"])
        for t, a, b in curve.rows():
            writer.writerow([repr(t), repr(a), repr(b)])


def write_summary_csv(rows, path, key_column=None):
    """Write summary dicts; with ``key_column`` each row is ``(key, summary_dict)``."""
    fields = ["deer", "bpcer5", "bpcer10"]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(([key_column] if key_column else []) + fields)
        for row in rows:
            if key_column:
                key, values = row
                writer.writerow([key] + [repr(values[f]) for f in fields])
            else:
                writer.writerow([repr(row[f]) for f in fields])
