"""
Training and evaluating the detector
====================================

The desk-scale experiment: 100 subjects, 32x32 faces, D = 64, three
attention taps, 20 epochs of Adam with batch 8. Takes about a minute on
one CPU core. Pass ``--quick`` for a smaller smoke run.
"""

import sys
import time

import numpy as np

from attnmorph import metrics
from attnmorph import model as M
from attnmorph.data import build_dataset, in_memory_partition
from attnmorph.wavelet import decompose_image

quick = "--quick" in sys.argv
seed = 7
subjects, epochs = (40, 3) if quick else (100, 20)

ds = build_dataset(subjects, seed)


def stacks(part):
    _, images, labels = in_memory_partition(ds, part)
    return np.stack([decompose_image(im) for im in images]), labels


train, val, test = stacks("train"), stacks("val"), stacks("test")
print("train", train[0].shape, "val", val[0].shape, "test", test[0].shape)

model = M.build(M.BackboneConfig(), seed)
print("parameters:", model.parameter_count())


def evaluate(m):
    s = M.score(m, test[0])
    return metrics.summary(metrics.ScoreSet(s[test[1] == 0], s[test[1] == 1]))


print("untrained:", evaluate(model))

t0 = time.time()
result = M.train(model, train, val, M.TrainHyper(epochs=epochs, batch_size=8, lr=1e-3, seed=seed))
print(f"trained in {time.time() - t0:.0f}s, best epoch {result.best_epoch}")
for epoch, loss, val_deer in result.log:
    print(f"  epoch {epoch:2d}  train loss {loss:.4f}  val D-EER {val_deer:.3f}")

summary = evaluate(model)
print("test D-EER %.3f  BPCER@APCER=5%% %.3f  BPCER@APCER=10%% %.3f" % (
    summary["deer"], summary["bpcer5"], summary["bpcer10"]))
