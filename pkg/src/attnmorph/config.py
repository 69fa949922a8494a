"""Run configuration: a closed ``key = value`` schema with layered sources.

Precedence is command-line flags over the config file over built-in
defaults. ``seed`` has no default and must come from the file or a flag.

Example file::

    # desk-scale run
    seed = 7
    subjects = 100
    taps = L1,L2,L3
"""

from dataclasses import dataclass, fields
from pathlib import Path

from .attention import LAYER_IDS
from .errors import ConfigError


def _int(text):
    return int(text)


def _float(text):
    return float(text)


def _ints(text):
    return tuple(int(t) for t in text.split(",") if t.strip())


def _taps(text):
    taps = tuple(t.strip() for t in text.replace("+", ",").split(",") if t.strip())
    if not taps or any(t not in LAYER_IDS for t in taps):
        raise ValueError(f"taps must be drawn from {','.join(LAYER_IDS)}")
    return taps


def _str(text):
    return text


@dataclass(frozen=True)
class RunConfig:
    seed: int
    out: str = "run"
    data_root: str = ""             # empty: <out>/data
    checkpoint: str = ""            # empty: <out>/model.ckpt
    subjects: int = 100
    image_size: int = 32
    morphs_per_subject: int = 1
    alpha: float = 0.5
    wavelet: str = "haar"
    widths: tuple = (16, 32, 64)
    blocks: tuple = (1, 1, 1)
    attention_width: int = 64
    taps: tuple = LAYER_IDS
    input_scale: float = 0.25
    dtype: str = "float64"
    epochs: int = 20
    batch_size: int = 8
    lr: float = 1e-3
    partition: str = "test"

    @property
    def out_dir(self):
        return Path(self.out)

    @property
    def data_dir(self):
        return Path(self.data_root) if self.data_root else self.out_dir / "data"

    @property
    def checkpoint_path(self):
        return Path(self.checkpoint) if self.checkpoint else self.out_dir / "model.ckpt"

    def dumps(self):
        """Render as config-file text that parses back to an equal config."""
        lines = []
        for f in fields(self):
            value = getattr(self, f.name)
            if isinstance(value, tuple):
                value = ",".join(str(v) for v in value)
            lines.append(f"{f.name} = {value}")
        return "\n".join(lines) + "\n"


PARSERS = {
    "seed": _int, "out": _str, "data_root": _str, "checkpoint": _str,
    "subjects": _int, "image_size": _int, "morphs_per_subject": _int, "alpha": _float,
    "wavelet": _str, "widths": _ints, "blocks": _ints, "attention_width": _int,
    "taps": _taps, "input_scale": _float, "dtype": _str,
    "epochs": _int, "batch_size": _int, "lr": _float, "partition": _str,
}


def parse_text(text, source="<config>"):
    """``key = value`` lines to a dict of raw strings; ``#`` starts a comment."""
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if not sep or not key:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {raw.strip()!r}")
        if key in values:
            raise ConfigError(f"{source}:{lineno}: duplicate key {key!r}")
        values[key] = value
    return values


def _typed(key, value, source):
    if key not in PARSERS:
        raise ConfigError(f"{source}: unknown config key {key!r}")
    if not isinstance(value, str):
        return value
    try:
        return PARSERS[key](value)
    except ValueError as exc:
        raise ConfigError(f"{source}: bad value for {key!r}: {value!r} ({exc})") from None


def load_config(path=None, overrides=None):
    """Build a :class:`RunConfig` from defaults, an optional file and flag overrides.

    ``overrides`` maps keys to strings or already-typed values; ``None`` values
    are ignored so unset argparse options fall through.
    """
    merged = {}
    if path is not None:
        path = Path(path)
        try:
            text = path.read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config file {path}: {exc.strerror}") from None
        for key, value in parse_text(text, str(path)).items():
            merged[key] = _typed(key, value, str(path))
    for key, value in (overrides or {}).items():
        if value is not None:
            merged[key] = _typed(key, value, "command line")
    if "seed" not in merged:
        raise ConfigError("a seed is required (set 'seed' in the config file or pass --seed)")
    config = RunConfig(**merged)
    _validate(config)
    return config


def _validate(c):
    if c.subjects < 1 or c.image_size < 8 or c.image_size % 8:
        raise ConfigError("subjects must be positive and image_size a positive multiple of 8")
    if c.morphs_per_subject < 1 or not 0.0 <= c.alpha <= 1.0:
        raise ConfigError("morphs_per_subject must be >= 1 and alpha within [0, 1]")
    if c.epochs < 0 or c.batch_size < 1 or c.lr < 0:
        raise ConfigError("epochs must be >= 0, batch_size >= 1 and lr >= 0")
    if c.partition not in ("train", "val", "test"):
        raise ConfigError(f"partition must be train, val or test, got {c.partition!r}")
