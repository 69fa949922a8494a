import csv
import filecmp
import subprocess
import sys

import numpy as np
import pytest

from attnmorph import metrics
from attnmorph import model as M
from attnmorph.cli import load_stacks, main, read_bands, write_bands
from attnmorph.config import RunConfig, load_config, parse_text
from attnmorph.data import build_dataset, in_memory_partition, read_manifest, read_raster, write_raster
from attnmorph.errors import ConfigError
from attnmorph.wavelet import band_labels, decompose_image

# Small network so each training run takes well under a second per epoch.
TINY = ["--set", "widths=4,4,4", "--set", "attention_width=4", "--set", "epochs=1", "--set", "dtype=float32"]


def rows(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def same_tree(a, b):
    cmp = filecmp.dircmp(a, b)
    if cmp.left_only or cmp.right_only:
        return False
    _, mismatch, errors = filecmp.cmpfiles(a, b, cmp.common_files, shallow=False)
    return not mismatch and not errors and all(same_tree(a / d, b / d) for d in cmp.common_dirs)


@pytest.fixture(scope="module")
def dataset(tmp_path_factory):
    out = tmp_path_factory.mktemp("run")
    assert main(["generate", "--seed", "5", "--subjects", "30", "--out", str(out)]) == 0
    return out


# -- configuration ---------------------------------------------------------

def test_config_precedence(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text("# comment\nseed = 3\nepochs = 7   # trailing comment\n\ntaps = L2, L3\n")
    cfg = load_config(path, {"epochs": "2", "out": None})
    assert (cfg.seed, cfg.epochs, cfg.taps, cfg.lr) == (3, 2, ("L2", "L3"), 1e-3)
    assert load_config(path).epochs == 7
    assert load_config(None, {"seed": "9"}).epochs == 20


def test_config_round_trip(tmp_path):
    cfg = load_config(None, {"seed": "4", "widths": "8,8,16", "lr": "0.01"})
    (tmp_path / "c.cfg").write_text(cfg.dumps())
    assert load_config(tmp_path / "c.cfg") == cfg


@pytest.mark.parametrize("text, message", [
    ("seed = 1\nbogus = 2\n", "unknown config key"),
    ("seed = 1\nseed = 2\n", "duplicate key"),
    ("seed = 1\njust words\n", "expected 'key = value'"),
    ("seed = one\n", "bad value"),
    ("seed = 1\ntaps = L4\n", "bad value"),
    ("epochs = 3\n", "seed is required"),
    ("seed = 1\nimage_size = 12\n", "multiple of 8"),
    ("seed = 1\npartition = holdout\n", "partition"),
])
def test_config_errors(tmp_path, text, message):
    (tmp_path / "c.cfg").write_text(text)
    with pytest.raises(ConfigError, match=message):
        load_config(tmp_path / "c.cfg")


def test_parse_text_keeps_raw_strings():
    assert parse_text("a = 1 # x\n  b=two  \n") == {"a": "1", "b": "two"}


def test_config_paths():
    cfg = RunConfig(seed=1, out="o")
    assert str(cfg.data_dir) == "o/data" and str(cfg.checkpoint_path) == "o/model.ckpt"


# -- generate --------------------------------------------------------------

def test_generate_is_byte_identical(tmp_path, capsys):
    for name in ("a", "b"):
        assert main(["generate", "--seed", "7", "--subjects", "30", "--out", str(tmp_path / name), "--verify"]) == 0
    assert same_tree(tmp_path / "a", tmp_path / "b")
    out = capsys.readouterr().out
    assert "train: 13 subjects" in out and "verify: partitions are subject-disjoint" in out


def test_manifest_counts(dataset):
    manifest = read_manifest(dataset / "data")
    pgms = list((dataset / "data").rglob("*.pgm"))
    assert len(manifest) == len(pgms) == 30 + 13 + 1 + 15


def test_generate_rejects_too_few_subjects(tmp_path, capsys):
    assert main(["generate", "--seed", "1", "--subjects", "6", "--out", str(tmp_path)]) == 1
    assert "error" in capsys.readouterr().err


# -- decompose -------------------------------------------------------------

def test_decompose_writes_48_bands(dataset, tmp_path):
    image = next((dataset / "data" / "test" / "bona_fide").glob("*.pgm"))
    assert main(["decompose", "--seed", "0", "--out", str(tmp_path), str(image)]) == 0
    band_dir = tmp_path / "bands" / image.stem
    assert len(list(band_dir.glob("band_*.pgm"))) == 48
    labels, stack = read_bands(band_dir)
    assert labels == band_labels()
    original = decompose_image(read_raster(image))
    # 16-bit affine quantization: at most half a level of each band's range
    half_step = (original.max(axis=(1, 2)) - original.min(axis=(1, 2))) / 65535 / 2
    err = np.abs(stack - original).max(axis=(1, 2))
    assert np.all(err <= half_step * (1 + 1e-9) + 1e-15)


def test_constant_image_gives_mid_gray(tmp_path):
    write_raster(np.full((16, 16), 0.4), tmp_path / "flat.pgm")
    assert main(["decompose", "--seed", "0", "--out", str(tmp_path), str(tmp_path / "flat.pgm")]) == 0
    band_dir = tmp_path / "bands" / "flat"
    for path in band_dir.glob("band_*.pgm"):
        assert np.all(read_raster(path) == 32768 / 65535)
    _, stack = read_bands(band_dir)
    assert np.abs(stack).max() <= 1e-10


def test_write_bands_round_trip_random(tmp_path):
    stack = np.random.default_rng(0).normal(size=(48, 8, 8))
    write_bands(stack, band_labels(), tmp_path)
    _, back = read_bands(tmp_path)
    bound = (stack.max(axis=(1, 2)) - stack.min(axis=(1, 2))) / 65535 / 2
    assert np.all(np.abs(back - stack).max(axis=(1, 2)) <= bound * (1 + 1e-9))


def test_decompose_missing_file(tmp_path, capsys):
    assert main(["decompose", "--seed", "0", "--out", str(tmp_path), str(tmp_path / "none.pgm")]) == 1
    assert "none.pgm" in capsys.readouterr().err


def test_decompose_reports_parse_offset(tmp_path, capsys):
    (tmp_path / "bad.pgm").write_bytes(b"P5\n4 4\n255\n" + bytes(3))
    assert main(["decompose", "--seed", "0", "--out", str(tmp_path), str(tmp_path / "bad.pgm")]) == 1
    err = capsys.readouterr().err
    assert "bad.pgm" in err and "at byte" in err


# -- train / eval / attmaps / ablate ---------------------------------------

def test_train_eval_attmaps(dataset, tmp_path):
    out = ["--seed", "5", "--out", str(dataset), "--set", f"data_root={dataset / 'data'}"] + TINY
    assert main(["train"] + out) == 0
    assert (dataset / "model.ckpt").exists()
    log = rows(dataset / "train_log.csv")
    assert log[0] == ["epoch", "train_loss", "val_deer"] and len(log) == 2
    assert main(["eval"] + out) == 0
    first = (dataset / "metrics.csv").read_bytes()
    assert rows(dataset / "metrics.csv")[0] == ["deer", "bpcer5", "bpcer10"]
    assert rows(dataset / "det.csv")[0] == ["threshold", "apcer", "bpcer"]
    # evaluation is reproducible
    assert main(["eval"] + out) == 0
    assert (dataset / "metrics.csv").read_bytes() == first
    assert main(["attmaps"] + out) == 0
    maps = sorted(p.name for p in (dataset / "attmaps").glob("*.pgm"))
    assert len(maps) == 6 and sum(m.startswith("bf_") for m in maps) == 3
    for path in (dataset / "attmaps").glob("m_*.pgm"):
        heat = read_raster(path)
        assert heat.shape == (32, 32) and heat.max() > heat.min()
    assert main(["attmaps", "bf_9999"] + out) == 1


def test_train_is_reproducible(dataset, tmp_path):
    for name in ("a", "b"):
        args = ["--seed", "5", "--out", str(tmp_path / name), "--set", f"data_root={dataset / 'data'}"] + TINY
        assert main(["train"] + args) == 0 and main(["eval"] + args) == 0
    for f in ("train_log.csv", "metrics.csv", "det.csv", "model.ckpt"):
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()


def test_ablate_three_rows(dataset, tmp_path):
    args = ["--seed", "5", "--out", str(tmp_path), "--set", f"data_root={dataset / 'data'}"] + TINY
    assert main(["ablate"] + args) == 0
    table = rows(tmp_path / "ablation_summary.csv")
    assert table[0] == ["taps", "deer", "bpcer5", "bpcer10"]
    assert [r[0] for r in table[1:]] == ["L3", "L2+L3", "L1+L2+L3"]
    assert all(0.0 <= float(v) <= 1.0 for r in table[1:] for v in r[1:])


def test_eval_without_checkpoint(tmp_path, capsys):
    assert main(["eval", "--seed", "1", "--out", str(tmp_path)]) == 1
    assert "not found" in capsys.readouterr().err


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "attnmorph", "train", "--out", str(tmp_path)],
                          capture_output=True, text=True)
    assert proc.returncode == 1 and "seed is required" in proc.stderr


# -- untrained baseline ----------------------------------------------------

def test_untrained_model_is_chance_without_class_signal():
    """Seed-0 untrained scorer on balanced sets whose labels carry no image signal."""
    model = M.build(M.BackboneConfig(), 0)
    deers = []
    for seed in range(10):
        ds = build_dataset(40, seed)
        _, images, labels = in_memory_partition(ds, "test")
        bona = images[labels == 0]
        fake = np.random.default_rng(seed).permutation(len(bona)) % 2
        s = M.score(model, np.stack([decompose_image(im) for im in bona]))
        deers.append(metrics.d_eer(metrics.ScoreSet(s[fake == 0], s[fake == 1])))
    assert 0.35 <= np.mean(deers) <= 0.65


@pytest.mark.slow
@pytest.mark.xfail(strict=True, reason="random features already respond to the morph noise-energy cue; "
                                       "measured untrained D-EER 0.02-0.12 over 10 seeds (see decision ledger)")
def test_untrained_model_on_morph_partition_is_chance(tmp_path):
    assert main(["generate", "--seed", "0", "--subjects", "100", "--out", str(tmp_path)]) == 0
    assert main(["train", "--seed", "0", "--out", str(tmp_path), "--set", "epochs=0"]) == 0
    cfg = load_config(None, {"seed": "0", "out": str(tmp_path)})
    _, x, y = load_stacks(cfg, "test")
    model = M.MorphDetector.load(cfg.checkpoint_path, M.BackboneConfig())
    s = M.score(model, x)
    assert 0.35 <= metrics.d_eer(metrics.ScoreSet(s[y == 0], s[y == 1])) <= 0.65
