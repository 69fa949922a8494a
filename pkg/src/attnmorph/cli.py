"""Command-line entry point: ``attnmorph <command> [options]``.

Commands share one run directory (``--out``)::

    <out>/data/                  generate: rasters + manifest.csv
    <out>/model.ckpt             train: best-validation checkpoint
    <out>/train_log.csv          train: epoch,train_loss,val_deer
    <out>/run.cfg                train/ablate: the effective configuration
    <out>/metrics.csv, det.csv   eval
    <out>/attmaps/               attmaps: <sample_id>.<layer_id>.pgm
    <out>/ablation_summary.csv   ablate: taps,deer,bpcer5,bpcer10
    <out>/bands/<image stem>/    decompose: 48 PGMs, ranges.txt, bands.txt
"""

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import metrics
from . import model as M
from .attention import write_heatmaps
from .config import load_config
from .data import build_dataset, load_partition, read_manifest, read_raster, verify_disjoint, write_dataset
from .data.faces import MORPH
from .data.netpbm import encode_levels
from .errors import AttnMorphError, InputError
from .wavelet import band_labels, decompose_image, get_filters

logger = logging.getLogger("attnmorph")


# -- helpers ---------------------------------------------------------------

def backbone_config(cfg, taps=None):
    return M.BackboneConfig(
        input_size=cfg.image_size, widths=cfg.widths, blocks=cfg.blocks,
        attention_width=cfg.attention_width, taps=taps or cfg.taps,
        dtype=cfg.dtype, input_scale=cfg.input_scale,
    )


def load_stacks(cfg, partition):
    """``(sample_ids, stacks [N, 48, S, S], labels)`` for one partition on disk."""
    ids, images, labels = load_partition(cfg.data_dir, partition)
    if images.shape[1:3] != (cfg.image_size, cfg.image_size):
        raise InputError(f"dataset images are {images.shape[1:3]}, config image_size is {cfg.image_size}")
    filters = get_filters(cfg.wavelet)
    return ids, np.stack([decompose_image(img, filters) for img in images]), labels


def score_set(model, stacks, labels):
    s = M.score(model, stacks)
    return metrics.ScoreSet(s[labels == 0], s[labels == 1])


def taps_key(taps):
    return "+".join(taps)


def _train(cfg, taps, out_dir):
    out_dir.mkdir(parents=True, exist_ok=True)
    _, x_tr, y_tr = load_stacks(cfg, "train")
    _, x_va, y_va = load_stacks(cfg, "val")
    model = M.build(backbone_config(cfg, taps), cfg.seed)
    hyper = M.TrainHyper(epochs=cfg.epochs, batch_size=cfg.batch_size, lr=cfg.lr, seed=cfg.seed)
    result = M.train(model, (x_tr, y_tr), (x_va, y_va), hyper)
    result.write_log(out_dir / "train_log.csv")
    return model, result


def _evaluate(cfg, model, out_dir):
    _, x, y = load_stacks(cfg, cfg.partition)
    scores = score_set(model, x, y)
    summary = metrics.summary(scores)
    metrics.write_summary_csv([summary], out_dir / "metrics.csv")
    metrics.write_det_csv(metrics.det_curve(scores), out_dir / "det.csv")
    return summary


# -- commands --------------------------------------------------------------

def cmd_generate(cfg, verify=False):
    dataset = build_dataset(cfg.subjects, cfg.seed, size=cfg.image_size,
                            morphs_per_subject=cfg.morphs_per_subject, alpha=cfg.alpha)
    write_dataset(dataset, cfg.data_dir)
    for part in ("train", "val", "test"):
        chosen = dataset.select(part)
        n_morph = sum(s.label == MORPH for s in chosen)
        print(f"{part}: {len(getattr(dataset.split, part))} subjects, "
              f"{len(chosen) - n_morph} bona fide, {n_morph} morph")
    if verify:
        problems = verify_disjoint(read_manifest(cfg.data_dir))
        if problems:
            raise InputError("partition leak: " + "; ".join(problems))
        print("verify: partitions are subject-disjoint")
    return dataset


def write_bands(stack, labels, out_dir):
    """16-bit PGM per band, affinely mapped from [min, max]; a flat band becomes mid-gray."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    ranges, names = [], []
    for i, (band, label) in enumerate(zip(stack, labels)):
        lo, hi = float(band.min()), float(band.max())
        if hi > lo:
            levels = np.rint((band - lo) / (hi - lo) * 65535)
        else:
            levels = np.full(band.shape, 32768)
        name = f"band_{i:02d}_{label}.pgm"
        (out_dir / name).write_bytes(encode_levels(levels, 65535))
        ranges.append(f"{name} {lo!r} {hi!r}")
        names.append(f"{i} {label} {name}")
    (out_dir / "ranges.txt").write_text("\n".join(ranges) + "\n")
    (out_dir / "bands.txt").write_text("\n".join(names) + "\n")
    return out_dir


def read_bands(band_dir):
    """Inverse of :func:`write_bands`: ``(labels, stack)`` in the manifest order."""
    band_dir = Path(band_dir)
    ranges = {}
    for line in (band_dir / "ranges.txt").read_text().splitlines():
        name, lo, hi = line.split()
        ranges[name] = (float(lo), float(hi))
    labels, bands = [], []
    for line in (band_dir / "bands.txt").read_text().splitlines():
        _, label, name = line.split()
        lo, hi = ranges[name]
        raster = read_raster(band_dir / name)
        bands.append(np.full(raster.shape, lo) if hi == lo else lo + raster * (hi - lo))
        labels.append(label)
    return labels, np.stack(bands)


def cmd_decompose(cfg, image_path):
    image_path = Path(image_path)
    stack = decompose_image(read_raster(image_path), get_filters(cfg.wavelet))
    out = write_bands(stack, band_labels(), cfg.out_dir / "bands" / image_path.stem)
    print(f"wrote {len(stack)} bands to {out}")
    return out


def cmd_train(cfg):
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    (cfg.out_dir / "run.cfg").write_text(cfg.dumps())
    model, result = _train(cfg, cfg.taps, cfg.out_dir)
    model.save(cfg.checkpoint_path)
    last = result.log[-1] if result.log else None
    print(f"best epoch {result.best_epoch}; checkpoint {cfg.checkpoint_path}"
          + (f"; final train loss {last[1]:.4f}" if last else ""))
    return model, result


def _load_model(cfg):
    if not cfg.checkpoint_path.exists():
        raise InputError(f"checkpoint {cfg.checkpoint_path} not found; run 'train' first")
    return M.MorphDetector.load(cfg.checkpoint_path, backbone_config(cfg))


def cmd_eval(cfg):
    model = _load_model(cfg)
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    summary = _evaluate(cfg, model, cfg.out_dir)
    print(f"{cfg.partition}: D-EER {summary['deer']:.4f}  BPCER5 {summary['bpcer5']:.4f}  "
          f"BPCER10 {summary['bpcer10']:.4f}")
    return summary


def cmd_attmaps(cfg, sample_ids=None):
    """Heatmaps for the given samples, or the first bona fide and first morph of the partition."""
    model = _load_model(cfg)
    ids, x, y = load_stacks(cfg, cfg.partition)
    if not sample_ids:
        picks = [int(np.argmax(y == 0)), int(np.argmax(y == 1))]
    else:
        missing = [s for s in sample_ids if s not in ids]
        if missing:
            raise InputError(f"samples not in partition {cfg.partition!r}: {', '.join(missing)}")
        picks = [ids.index(s) for s in sample_ids]
    written = []
    out_dir = cfg.out_dir / "attmaps"
    for i in picks:
        _, maps = M.forward(model, x[i:i + 1])
        written += write_heatmaps(maps, ids[i], out_dir, (cfg.image_size, cfg.image_size))
    print(f"wrote {len(written)} heatmaps to {out_dir}")
    return written


def cmd_ablate(cfg):
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    (cfg.out_dir / "run.cfg").write_text(cfg.dumps())
    rows = []
    for taps in M.ABLATION_TAPS:
        run_dir = cfg.out_dir / "ablate" / taps_key(taps)
        model, _ = _train(cfg, taps, run_dir)
        model.save(run_dir / "model.ckpt")
        summary = _evaluate(cfg, model, run_dir)
        rows.append((taps_key(taps), summary))
        print(f"{taps_key(taps):>9}: D-EER {summary['deer']:.4f}")
    metrics.write_summary_csv(rows, cfg.out_dir / "ablation_summary.csv", key_column="taps")
    return rows


# -- argument parsing ------------------------------------------------------

def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key = value config file")
    common.add_argument("--seed", help="master seed (required here or in the config file)")
    common.add_argument("--out", help="run directory (default: run)")
    common.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override any config key; repeatable")
    common.add_argument("-v", "--verbose", action="store_true", help="log training progress")

    parser = argparse.ArgumentParser(prog="attnmorph", description="Wavelet-attention morph detection on synthetic faces.")
    sub = parser.add_subparsers(dest="command", required=True)
    gen = sub.add_parser("generate", parents=[common], help="write a synthetic morph dataset")
    gen.add_argument("--subjects", help="number of subjects")
    gen.add_argument("--verify", action="store_true", help="check subject disjointness after writing")
    dec = sub.add_parser("decompose", parents=[common], help="write the 48 sub-bands of one image")
    dec.add_argument("image")
    sub.add_parser("train", parents=[common], help="train a detector on <data>/train, select on val")
    for name, text in (("eval", "score a partition with a checkpoint"), ("attmaps", "export attention heatmaps")):
        p = sub.add_parser(name, parents=[common], help=text)
        p.add_argument("--checkpoint", help="checkpoint path (default <out>/model.ckpt)")
        p.add_argument("--partition", help="train, val or test (default test)")
        if name == "attmaps":
            p.add_argument("samples", nargs="*", help="sample ids (default: first bona fide and first morph)")
    sub.add_parser("ablate", parents=[common], help="train and evaluate tap sets L3, L2+L3, L1+L2+L3")
    return parser


def _overrides(args):
    overrides = {"seed": args.seed, "out": args.out}
    for key in ("subjects", "checkpoint", "partition"):
        overrides[key] = getattr(args, key, None)
    for item in args.set:
        key, sep, value = item.partition("=")
        if not sep:
            raise InputError(f"--set expects KEY=VALUE, got {item!r}")
        overrides[key.strip()] = value.strip()
    return overrides


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(name)s: %(message)s")
    try:
        cfg = load_config(args.config, _overrides(args))
        if args.command == "generate":
            cmd_generate(cfg, verify=args.verify)
        elif args.command == "decompose":
            cmd_decompose(cfg, args.image)
        elif args.command == "train":
            cmd_train(cfg)
        elif args.command == "eval":
            cmd_eval(cfg)
        elif args.command == "attmaps":
            cmd_attmaps(cfg, args.samples)
        elif args.command == "ablate":
            cmd_ablate(cfg)
    except (AttnMorphError, OSError) as exc:
        print(f"attnmorph {args.command}: error: {exc}", file=sys.stderr)
        return 1
    return 0
