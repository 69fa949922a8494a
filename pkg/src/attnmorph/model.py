"""Attention-augmented residual morph detector.

Dataflow for an input stack ``[N, 48, S, S]`` (first multiplied by ``input_scale``)::

    stem 3x3 conv -> stage 1 (S)   -> tap L1
                  -> stage 2 (S/2) -> tap L2
                  -> stage 3 (S/4) -> tap L3
    relu(stage 3) -> global average pool -> dense -> g          (global feature, width D)
    for each active tap: attention_forward(tap, proj_k, g) -> g_a^k   (width D each)
    concat(g_a^L1, g_a^L2, g_a^L3 present) -> dense -> relu -> dense -> 2 logits

Stages are pre-activation residual blocks; the first block of stages 2 and 3
halves the resolution with a 4x4 stride-2 convolution and carries a 2x2
stride-2 projection shortcut (both divide even extents exactly).
"""

import copy
import csv
import logging
from dataclasses import dataclass, field, replace

import numpy as np

from . import metrics
from .attention import LAYER_IDS, attention_forward
from .engine import (
    Adam,
    Tensor,
    add,
    backward,
    concat,
    conv2d,
    cross_entropy_loss,
    dense,
    global_avg_pool,
    load_checkpoint,
    no_grad,
    relu,
    save_checkpoint,
    scale,
)
from .errors import ConfigError, InputError, TrainingError
from .seeding import rng_for

logger = logging.getLogger(__name__)

ABLATION_TAPS = (("L3",), ("L2", "L3"), ("L1", "L2", "L3"))
MORPH_CLASS = 1


@dataclass(frozen=True)
class BackboneConfig:
    input_channels: int = 48
    input_size: int = 32
    widths: tuple = (16, 32, 64)
    blocks: tuple = (1, 1, 1)
    attention_width: int = 64
    taps: tuple = ("L1", "L2", "L3")
    dtype: str = "float64"
    # Haar low pass doubles smooth content; two LL steps at most -> gain 4.
    input_scale: float = 0.25

    def __post_init__(self):
        if self.input_size < 8 or self.input_size % 8:
            raise ConfigError(f"input_size must be a positive multiple of 8, got {self.input_size}")
        if len(self.widths) != 3 or len(self.blocks) != 3:
            raise ConfigError("widths and blocks need exactly three entries")
        if min(self.widths) < 1 or min(self.blocks) < 1 or self.attention_width < 1 or self.input_channels < 1:
            raise ConfigError("widths, blocks, attention_width and input_channels must be positive")
        taps = tuple(self.taps)
        if not taps or len(set(taps)) != len(taps) or any(t not in LAYER_IDS for t in taps):
            raise ConfigError(f"taps must be a non-empty subset of {LAYER_IDS}, got {self.taps}")
        object.__setattr__(self, "taps", tuple(t for t in LAYER_IDS if t in taps))
        if self.dtype not in ("float32", "float64"):
            raise ConfigError(f"dtype must be float32 or float64, got {self.dtype}")
        if not self.input_scale > 0:
            raise ConfigError(f"input_scale must be positive, got {self.input_scale}")


def _block_specs(config):
    """(name, in_ch, out_ch, stride) for every residual block, stage by stage."""
    specs = []
    in_ch = config.widths[0]
    for stage, (width, count) in enumerate(zip(config.widths, config.blocks), start=1):
        for b in range(count):
            stride = 2 if (stage > 1 and b == 0) else 1
            specs.append((f"s{stage}b{b}", in_ch, width, stride, stage))
            in_ch = width
    return specs


def parameter_shapes(config):
    """Ordered ``name -> shape`` for every learned tensor."""
    shapes = {"stem.w": (config.widths[0], config.input_channels, 3, 3), "stem.b": (config.widths[0],)}
    for name, cin, cout, stride, _ in _block_specs(config):
        k = 4 if stride == 2 else 3
        shapes[f"{name}.conv1.w"] = (cout, cin, k, k)
        shapes[f"{name}.conv1.b"] = (cout,)
        shapes[f"{name}.conv2.w"] = (cout, cout, 3, 3)
        shapes[f"{name}.conv2.b"] = (cout,)
        if cin != cout or stride != 1:
            shapes[f"{name}.short.w"] = (cout, cin, stride, stride)
            shapes[f"{name}.short.b"] = (cout,)
    d = config.attention_width
    shapes["global.w"] = (d, config.widths[2])
    shapes["global.b"] = (d,)
    for tap in config.taps:
        shapes[f"proj.{tap}"] = (d, config.widths[LAYER_IDS.index(tap)], 1, 1)
    shapes["fuse.w"] = (d, len(config.taps) * d)
    shapes["fuse.b"] = (d,)
    shapes["head.w"] = (2, d)
    shapes["head.b"] = (2,)
    return shapes


class MorphDetector:
    """Parameters plus the config that gives them meaning."""

    def __init__(self, config, params):
        self.config = config
        self.params = params

    def parameters(self):
        return list(self.params.values())

    def zero_grad(self):
        for p in self.params.values():
            p.zero_grad()

    def parameter_count(self):
        return sum(p.size for p in self.params.values())

    def state_dict(self):
        return {name: p.data.copy() for name, p in self.params.items()}

    def load_state_dict(self, state):
        if list(state) != list(self.params):
            raise InputError("checkpoint parameter names do not match the model configuration")
        for name, p in self.params.items():
            value = np.asarray(state[name])
            if value.shape != p.shape:
                raise InputError(f"{name}: checkpoint shape {value.shape} != model shape {p.shape}")
            p.data[...] = value

    def save(self, path):
        save_checkpoint(path, self.params)

    @classmethod
    def load(cls, path, config):
        model = build(config, seed=0)
        model.load_state_dict(load_checkpoint(path))
        return model


def build(config, seed):
    """Initialize a detector: He-normal weights (std ``sqrt(2 / fan_in)``), zero biases."""
    rng = rng_for(seed, "init")
    dtype = np.dtype(config.dtype)
    params = {}
    for name, shape in parameter_shapes(config).items():
        if name.endswith(".b"):
            values = np.zeros(shape)
        else:
            fan_in = int(np.prod(shape[1:]))
            values = rng.standard_normal(shape) * np.sqrt(2.0 / fan_in)
        params[name] = Tensor(values.astype(dtype), requires_grad=True)
    return MorphDetector(config, params)


def _residual_block(p, name, x, stride):
    h = conv2d(relu(x), p[f"{name}.conv1.w"], p[f"{name}.conv1.b"], stride=stride, padding=1)
    h = conv2d(relu(h), p[f"{name}.conv2.w"], p[f"{name}.conv2.b"], stride=1, padding=1)
    if f"{name}.short.w" in p:
        shortcut = conv2d(x, p[f"{name}.short.w"], p[f"{name}.short.b"], stride=stride)
    else:
        shortcut = x
    return add(h, shortcut)


def forward(model, stacks):
    """Logits ``[N, 2]`` and one AttentionMap per active tap (in L1, L2, L3 order)."""
    cfg, p = model.config, model.params
    x = stacks if isinstance(stacks, Tensor) else Tensor(np.asarray(stacks), dtype=cfg.dtype)
    if x.ndim != 4 or x.shape[1:] != (cfg.input_channels, cfg.input_size, cfg.input_size):
        raise InputError(f"expected [N, {cfg.input_channels}, {cfg.input_size}, {cfg.input_size}] input, got {x.shape}")
    h = conv2d(scale(x, cfg.input_scale), p["stem.w"], p["stem.b"], padding=1)
    taps = {}
    for name, _, _, stride, stage in _block_specs(cfg):
        h = _residual_block(p, name, h, stride)
        taps[LAYER_IDS[stage - 1]] = h
    g = dense(global_avg_pool(relu(taps["L3"])), p["global.w"], p["global.b"])
    attended, maps = [], []
    for tap in cfg.taps:
        g_a, amap = attention_forward(taps[tap], p[f"proj.{tap}"], g, layer_id=tap)
        attended.append(g_a)
        maps.append(amap)
    fused = relu(dense(concat(attended, axis=1), p["fuse.w"], p["fuse.b"]))
    return dense(fused, p["head.w"], p["head.b"]), maps


def morph_probability(logits):
    z = np.asarray(logits, dtype=np.float64)
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e[:, MORPH_CLASS] / e.sum(axis=1)


def score(model, stacks, batch_size=32):
    """Morph-class softmax probability per sample."""
    stacks = np.asarray(stacks)
    out = []
    with no_grad():
        for start in range(0, len(stacks), batch_size):
            logits, _ = forward(model, stacks[start:start + batch_size])
            out.append(morph_probability(logits.data))
    return np.concatenate(out) if out else np.zeros(0)


@dataclass
class TrainHyper:
    epochs: int = 20
    batch_size: int = 8
    lr: float = 1e-3
    seed: int = 0


@dataclass
class TrainResult:
    log: list = field(default_factory=list)     # (epoch, train_loss, val_deer)
    best_state: dict = None
    best_epoch: int = 0

    def write_log(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["epoch", "train_loss", "val_deer"])
            for epoch, loss, deer in self.log:
                writer.writerow([epoch, repr(loss), repr(deer)])


def _check_finite(model, loss, epoch, step):
    if not np.isfinite(loss.item()):
        raise TrainingError(f"non-finite loss {loss.item()} at epoch {epoch}, step {step}")
    for name, p in model.params.items():
        if not np.all(np.isfinite(p.grad)):
            raise TrainingError(f"non-finite gradient in {name} at epoch {epoch}, step {step}")


def _validation(model, x, y):
    with no_grad():
        logits = np.concatenate([forward(model, x[i:i + 32])[0].data for i in range(0, len(x), 32)])
    probs = morph_probability(logits)
    deer = metrics.d_eer(metrics.ScoreSet(probs[y == 0], probs[y == 1]))
    z = logits - logits.max(axis=1, keepdims=True)
    logp = z - np.log(np.exp(z).sum(axis=1, keepdims=True))
    return deer, float(-logp[np.arange(len(y)), y].mean())


def train(model, train_set, val_set, hyper):
    """Mini-batch Adam on softmax cross-entropy.

    Parameters
    ----------
    model : MorphDetector
        Updated in place; on return it holds the best-validation parameters.
    train_set, val_set : (ndarray, ndarray)
        ``(stacks [N, 48, S, S], labels [N])`` with label 1 for morph.
    hyper : TrainHyper

    The checkpoint kept is the one with the lowest validation D-EER; ties go
    to the lower validation cross-entropy, then to the earlier epoch.
    """
    x_tr, y_tr = np.asarray(train_set[0]), np.asarray(train_set[1])
    x_va, y_va = np.asarray(val_set[0]), np.asarray(val_set[1])
    if len(x_tr) == 0 or len(x_va) == 0:
        raise InputError("train and validation sets must be non-empty")
    if len(x_tr) != len(y_tr) or len(x_va) != len(y_va):
        raise InputError("stacks and labels differ in length")
    if set(np.unique(y_va)) != {0, 1}:
        raise InputError("validation set needs both bona fide and morph samples")
    x_tr = x_tr.astype(model.config.dtype)
    x_va = x_va.astype(model.config.dtype)
    rng = rng_for(hyper.seed, "shuffle")
    opt = Adam(model.parameters(), lr=hyper.lr)
    result = TrainResult()
    best_key = None
    for epoch in range(1, hyper.epochs + 1):
        order = rng.permutation(len(x_tr))
        total_loss = 0.0
        for step, start in enumerate(range(0, len(order), hyper.batch_size)):
            idx = order[start:start + hyper.batch_size]
            model.zero_grad()
            logits, _ = forward(model, x_tr[idx])
            loss = cross_entropy_loss(logits, y_tr[idx])
            backward(loss)
            _check_finite(model, loss, epoch, step)
            opt.step()
            total_loss += loss.item() * len(idx)
        train_loss = total_loss / len(order)
        val_deer, val_loss = _validation(model, x_va, y_va)
        result.log.append((epoch, train_loss, val_deer))
        logger.info("epoch %d train_loss %.5f val_deer %.4f", epoch, train_loss, val_deer)
        key = (val_deer, val_loss)
        if best_key is None or key < best_key:
            best_key = key
            result.best_state = model.state_dict()
            result.best_epoch = epoch
    if result.best_state is not None:
        model.load_state_dict(result.best_state)
    return result


def with_taps(config, taps):
    return replace(config, taps=tuple(taps))


def clone(model):
    return MorphDetector(model.config, copy.deepcopy(model.params))
