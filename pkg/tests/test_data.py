import numpy as np
import pytest

from attnmorph.data import (
    BONA_FIDE,
    LANDMARK_NAMES,
    MORPH,
    TRIANGLES,
    FaceSample,
    build_dataset,
    generate_subject,
    load_partition,
    morph_images,
    morph_pair,
    read_manifest,
    split_subjects,
    verify_disjoint,
    warp_image,
    write_dataset,
)
from attnmorph.data.faces import JITTER, TEMPLATE, signed_areas
from attnmorph.data.morph import affine_from_triangles, bilinear_sample
from attnmorph.errors import GeometryError, InputError
from attnmorph.seeding import derive_seed

TOY = np.array([[0, 1, 2]])


# -- faces -----------------------------------------------------------------

def test_generation_is_deterministic():
    a, b = generate_subject(123), generate_subject(123)
    assert a.image.tobytes() == b.image.tobytes()
    assert a.landmarks.tobytes() == b.landmarks.tobytes()


def test_distinct_seeds_give_distinct_landmarks():
    pts = np.stack([generate_subject(s, 16).landmarks.ravel() for s in range(1000)])
    assert len(np.unique(pts, axis=0)) == 1000


def test_faces_are_valid():
    for seed in range(50):
        face = generate_subject(seed, 32)
        assert face.image.shape == (32, 32)
        assert face.image.min() >= 0.0 and face.image.max() <= 1.0
        assert face.landmarks.shape == (len(LANDMARK_NAMES), 2)
        # jitter stays within the stated band around the template
        assert np.abs(face.landmarks - TEMPLATE * 32).max() <= JITTER * 32
        # every triangle keeps the template's orientation
        assert (signed_areas(face.landmarks) > 0).all()
        assert face.label == BONA_FIDE and face.subject_ids == (seed,)


def test_template_triangulation_is_consistent():
    assert (signed_areas(TEMPLATE) > 0).all()
    assert set(np.unique(TRIANGLES)) == set(range(len(LANDMARK_NAMES)))


@pytest.mark.parametrize("size", [0, 12, (16, 24)])
def test_bad_face_size(size):
    with pytest.raises(InputError):
        generate_subject(0, size)


def test_face_sample_label_contract():
    with pytest.raises(InputError):
        FaceSample(np.zeros((8, 8)), MORPH, ("a", "a"), np.zeros((13, 2)))
    with pytest.raises(InputError):
        FaceSample(np.zeros((8, 8)), "other", ("a",), np.zeros((13, 2)))


# -- warp and morph --------------------------------------------------------

def test_bilinear_by_hand():
    img = np.array([[1.0, 2.0], [5.0, 11.0]])
    # x = 0.25 (column), y = 0.5 (row)
    expected = 0.5 * (0.75 * 1 + 0.25 * 2) + 0.5 * (0.75 * 5 + 0.25 * 11)
    assert bilinear_sample(img, np.array([0.25]), np.array([0.5]))[0] == pytest.approx(expected, abs=1e-15)


def test_affine_maps_vertices():
    rng = np.random.default_rng(0)
    dst, src = rng.normal(size=(3, 2)), rng.normal(size=(3, 2))
    m = affine_from_triangles(dst, src)
    np.testing.assert_allclose(m @ np.vstack([dst.T, np.ones(3)]), src.T, atol=1e-12)


def test_morph_matches_hand_solved_toy():
    # 3-point geometry on a 4x4 raster: A spans 2 px, B spans 3 px, target spans 2.5 px.
    rng = np.random.default_rng(1)
    img_a, img_b = rng.uniform(size=(4, 4)), rng.uniform(size=(4, 4))
    pts_a = np.array([[0.0, 0.0], [2.0, 0.0], [0.0, 2.0]])
    pts_b = np.array([[0.0, 0.0], [3.0, 0.0], [0.0, 3.0]])
    out, target = morph_images(img_a, pts_a, img_b, pts_b, 0.5, TOY)
    np.testing.assert_array_equal(target, [[0, 0], [2.5, 0], [0, 2.5]])
    # Pixel (x=1, y=1) lies inside the target; the target->A map scales by 0.8, target->B by 1.2.
    a_val = (0.2 * 0.2 * img_a[0, 0] + 0.2 * 0.8 * img_a[0, 1]
             + 0.8 * 0.2 * img_a[1, 0] + 0.8 * 0.8 * img_a[1, 1])
    b_val = (0.8 * 0.8 * img_b[1, 1] + 0.8 * 0.2 * img_b[1, 2]
             + 0.2 * 0.8 * img_b[2, 1] + 0.2 * 0.2 * img_b[2, 2])
    assert out[1, 1] == pytest.approx(0.5 * a_val + 0.5 * b_val, abs=1e-10)
    # Pixel (x=3, y=3) is outside every triangle and keeps its own coordinates.
    assert out[3, 3] == pytest.approx(0.5 * img_a[3, 3] + 0.5 * img_b[3, 3], abs=1e-15)


def test_warp_identity_returns_copy():
    img = np.random.default_rng(2).uniform(size=(16, 16))
    pts = generate_subject(5, 16).landmarks
    out = warp_image(img, pts, pts)
    assert out is not img
    np.testing.assert_array_equal(out, img)


def test_degenerate_target_triangle():
    img = np.zeros((8, 8))
    src = np.array([[0.0, 0.0], [4.0, 0.0], [0.0, 4.0]])
    with pytest.raises(GeometryError):
        warp_image(img, src, np.array([[0.0, 0.0], [4.0, 0.0], [2.0, 0.1]]), TOY)


@pytest.mark.parametrize("seed", range(5))
def test_alpha_endpoints_exact(seed):
    a, b = generate_subject(2 * seed), generate_subject(2 * seed + 1)
    m0, m1 = morph_pair(a, b, 0.0), morph_pair(a, b, 1.0)
    assert np.array_equal(m0.image, a.image) and np.array_equal(m0.landmarks, a.landmarks)
    assert np.array_equal(m1.image, b.image) and np.array_equal(m1.landmarks, b.landmarks)


@pytest.mark.parametrize("alpha", [0.5, 0.25, 0.7])
def test_morph_symmetry(alpha):
    for seed in range(5):
        a, b = generate_subject(10 + seed), generate_subject(20 + seed)
        ab, ba = morph_pair(a, b, alpha), morph_pair(b, a, 1.0 - alpha)
        np.testing.assert_allclose(ab.image, ba.image, rtol=0, atol=1e-10)
        np.testing.assert_allclose(ab.landmarks, ba.landmarks, rtol=0, atol=1e-10)


def test_morph_sample_fields_and_range():
    a, b = generate_subject(3, subject_id="0003"), generate_subject(8, subject_id="0008")
    m = morph_pair(a, b)
    assert m.label == MORPH and m.subject_ids == ("0003", "0008")
    assert m.sample_id == "m_0003_0008" and m.alpha == 0.5
    assert m.image.min() >= 0.0 and m.image.max() <= 1.0
    np.testing.assert_array_equal(m.landmarks, 0.5 * a.landmarks + 0.5 * b.landmarks)


def test_morph_rejects_bad_inputs():
    a, b = generate_subject(1), generate_subject(2)
    with pytest.raises(InputError):
        morph_pair(a, b, 1.5)
    with pytest.raises(InputError):
        morph_pair(a, morph_pair(a, b))
    with pytest.raises(InputError):
        morph_pair(a, generate_subject(2, 16))


# -- splits and datasets ---------------------------------------------------

def test_split_counts_for_100_subjects():
    split = split_subjects(100, 7)
    assert (len(split.train), len(split.val), len(split.test)) == (43, 7, 50)
    assert sorted(split.train + split.val + split.test) == list(range(100))


def test_too_few_subjects():
    with pytest.raises(InputError):
        split_subjects(6, 0)
    with pytest.raises(InputError):
        build_dataset(100, 0, morphs_per_subject=0)


@pytest.mark.parametrize("seed", range(100))
def test_partitions_are_disjoint(seed):
    ds = build_dataset(28, seed, size=16)
    owner = {}
    for sample, part in zip(ds.samples, ds.partitions):
        for sid in sample.subject_ids:
            assert owner.setdefault(sid, part) == part
            assert ds.split.partition_of(int(sid)) == part
    split = ds.split
    assert not (set(split.train) & set(split.val) or set(split.train) & set(split.test) or set(split.val) & set(split.test))


def test_morph_counts_and_seeding():
    ds = build_dataset(40, 3, size=16, morphs_per_subject=2)
    for part in ("train", "val", "test"):
        subjects = getattr(ds.split, part)
        morphs = [s for s in ds.select(part) if s.label == MORPH]
        pairs = {frozenset(m.subject_ids) for m in morphs}
        assert len(pairs) == len(morphs)
        expected = len(subjects) if len(subjects) <= 4 else 2 * len(subjects)
        assert len(morphs) == min(expected, len(subjects) * (len(subjects) - 1) // 2)
    again = build_dataset(40, 3, size=16, morphs_per_subject=2)
    assert all(np.array_equal(x.image, y.image) for x, y in zip(ds.samples, again.samples))
    # a subject's face does not depend on which other subjects exist
    face = next(s for s in ds.samples if s.subject_ids == ("0005",))
    assert np.array_equal(face.image, generate_subject(derive_seed(3, "subject", 5), 16).image)


def test_write_and_load_round_trip(tmp_path):
    ds = build_dataset(28, 1, size=16)
    write_dataset(ds, tmp_path)
    rows = read_manifest(tmp_path)
    assert len(rows) == len(ds.samples)
    assert verify_disjoint(rows) == []
    ids, images, labels = load_partition(tmp_path, "test")
    chosen = ds.select("test")
    assert ids == [s.sample_id for s in chosen]
    assert labels.tolist() == [int(s.label == MORPH) for s in chosen]
    # 16-bit storage keeps images to within half a quantization step
    np.testing.assert_allclose(images, [s.image for s in chosen], rtol=0, atol=0.5 / 65535 + 1e-12)
    morph_row = next(r for r in rows if r["label"] == MORPH)
    assert len(morph_row["subject_ids"].split(";")) == 2 and float(morph_row["alpha"]) == 0.5


def test_verify_disjoint_reports_leaks():
    rows = [
        {"sample_id": "bf_0001", "partition": "train", "subject_ids": "0001"},
        {"sample_id": "bf_0002", "partition": "test", "subject_ids": "0002"},
        {"sample_id": "m_0001_0002", "partition": "test", "subject_ids": "0001;0002"},
    ]
    problems = verify_disjoint(rows)
    assert len(problems) == 1 and "m_0001_0002" in problems[0]


def test_bad_manifest(tmp_path):
    (tmp_path / "manifest.csv").write_text("sample_id,partition,label,subject_ids,alpha\nx,holdout,morph,1;2,0.5\n")
    with pytest.raises(InputError):
        read_manifest(tmp_path)
