"""Subject-disjoint synthetic morph datasets and their on-disk layout.

On disk::

    <root>/manifest.csv                       sample_id,partition,label,subject_ids,alpha
    <root>/<partition>/<label>/<sample_id>.pgm

``subject_ids`` is ``;``-separated; ``alpha`` is empty for bona fide rows.
"""

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..errors import InputError
from ..seeding import derive_seed, rng_for
from .faces import BONA_FIDE, MORPH, FaceSample, generate_subject
from .morph import morph_pair
from .netpbm import read_raster, write_raster

PARTITIONS = ("train", "val", "test")
VAL_FRACTION = 0.15
MANIFEST_FIELDS = ("sample_id", "partition", "label", "subject_ids", "alpha")


@dataclass
class SplitSpec:
    train: tuple
    val: tuple
    test: tuple
    seed: int

    def partition_of(self, subject_id):
        for name in PARTITIONS:
            if subject_id in getattr(self, name):
                return name
        raise KeyError(subject_id)


@dataclass
class Dataset:
    samples: list      # FaceSample
    partitions: list   # partition name per sample
    split: SplitSpec

    def select(self, partition):
        return [s for s, p in zip(self.samples, self.partitions) if p == partition]


def split_subjects(n_subjects, seed):
    """Shuffle subjects, halve into train/test, then move ``floor(0.15 * n_train)`` to val.

    Every partition needs at least two subjects so it can hold a morph.
    """
    n_subjects = int(n_subjects)
    order = rng_for(seed, "split").permutation(n_subjects)
    n_train_all = n_subjects // 2
    n_val = math.floor(VAL_FRACTION * n_train_all)
    n_train = n_train_all - n_val
    n_test = n_subjects - n_train_all
    if min(n_train, n_val, n_test) < 2:
        raise InputError(f"{n_subjects} subjects give partitions of {n_train}/{n_val}/{n_test}; each needs >= 2")
    ids = [int(i) for i in order]
    return SplitSpec(
        train=tuple(sorted(ids[:n_train])),
        val=tuple(sorted(ids[n_train:n_train_all])),
        test=tuple(sorted(ids[n_train_all:])),
        seed=int(seed),
    )


def morph_pairs(subjects, morphs_per_subject, rng):
    """Ring pairing over a shuffled subject list: offsets 1..k, unordered duplicates removed."""
    order = [subjects[i] for i in rng.permutation(len(subjects))]
    m = len(order)
    pairs, seen = [], set()
    for offset in range(1, morphs_per_subject + 1):
        for i in range(m):
            a, b = order[i], order[(i + offset) % m]
            key = frozenset((a, b))
            if a == b or key in seen:
                continue
            seen.add(key)
            pairs.append((a, b))
    return pairs


def subject_id_str(sid):
    return f"{sid:04d}"


def build_dataset(n_subjects, seed, size=32, morphs_per_subject=1, alpha=0.5):
    """Generate bona fides for every subject plus same-partition morphs.

    Returns
    -------
    Dataset
        Samples ordered by partition (train, val, test), bona fides first.
    """
    if morphs_per_subject < 1:
        raise InputError(f"morphs_per_subject must be >= 1, got {morphs_per_subject}")
    split = split_subjects(n_subjects, seed)
    faces = {}
    samples, partitions = [], []
    for part in PARTITIONS:
        subjects = getattr(split, part)
        for sid in subjects:
            face = generate_subject(derive_seed(seed, "subject", sid), size, subject_id=subject_id_str(sid))
            faces[sid] = face
            samples.append(face)
            partitions.append(part)
        for a, b in morph_pairs(list(subjects), morphs_per_subject, rng_for(seed, "pairs", part)):
            samples.append(morph_pair(faces[a], faces[b], alpha))
            partitions.append(part)
    return Dataset(samples, partitions, split)


def write_dataset(dataset, root):
    """Write every sample as 16-bit PGM plus ``manifest.csv``; returns the manifest path."""
    root = Path(root)
    rows = []
    for sample, part in zip(dataset.samples, dataset.partitions):
        folder = root / part / sample.label
        folder.mkdir(parents=True, exist_ok=True)
        write_raster(sample.image, folder / f"{sample.sample_id}.pgm", bits=16)
        rows.append({
            "sample_id": sample.sample_id,
            "partition": part,
            "label": sample.label,
            "subject_ids": ";".join(sample.subject_ids),
            "alpha": "" if sample.alpha is None else repr(sample.alpha),
        })
    manifest = root / "manifest.csv"
    with open(manifest, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=MANIFEST_FIELDS, lineterminator="\n")
        writer.writeheader()
        writer.writerows(rows)
    return manifest


def read_manifest(root):
    with open(Path(root) / "manifest.csv", newline="") as fh:
        rows = list(csv.DictReader(fh))
    for row in rows:
        if row.get("partition") not in PARTITIONS or row.get("label") not in (BONA_FIDE, MORPH):
            raise InputError(f"bad manifest row: {row}")
    return rows


def load_partition(root, partition):
    """Images and labels of one partition: ``(sample_ids, images [N, H, W], labels [N])``.

    Labels are 1 for morph, 0 for bona fide.
    """
    root = Path(root)
    ids, images, labels = [], [], []
    for row in read_manifest(root):
        if row["partition"] != partition:
            continue
        ids.append(row["sample_id"])
        images.append(read_raster(root / partition / row["label"] / f"{row['sample_id']}.pgm"))
        labels.append(1 if row["label"] == MORPH else 0)
    if not ids:
        raise InputError(f"partition {partition!r} is empty in {root}")
    return ids, np.stack(images), np.array(labels, dtype=np.int64)


def verify_disjoint(rows):
    """Check subject disjointness across partitions; returns a list of problems (empty if fine)."""
    owner, problems = {}, []
    for row in rows:
        ids = row["subject_ids"].split(";")
        parts = {owner.setdefault(sid, row["partition"]) for sid in ids}
        if parts != {row["partition"]}:
            problems.append(f"{row['sample_id']} uses subjects from {sorted(parts | {row['partition']})}")
    return problems


def in_memory_partition(dataset, partition):
    """Same triple as :func:`load_partition`, from an in-memory :class:`Dataset`."""
    chosen = dataset.select(partition)
    if not chosen:
        raise InputError(f"partition {partition!r} is empty")
    return ([s.sample_id for s in chosen], np.stack([s.image for s in chosen]),
            np.array([1 if s.label == MORPH else 0 for s in chosen], dtype=np.int64))

