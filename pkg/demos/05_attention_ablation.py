"""
One, two or three attention modules
===================================

Runs the ablation through the command line interface: generate a dataset,
then train and evaluate the tap sets L3, L2+L3 and L1+L2+L3, and finally
export heatmaps from the full model. Pass ``--quick`` for fewer epochs.
"""

import sys
from pathlib import Path

from attnmorph.cli import main

quick = "--quick" in sys.argv
out = Path(next((a for a in sys.argv[1:] if not a.startswith("--")), "demo_out")) / "ablation"
common = ["--seed", "7", "--out", str(out)]
if quick:
    common += ["--set", "epochs=3", "--set", "dtype=float32"]

assert main(["generate", "--subjects", "100", "--verify"] + common) == 0
assert main(["ablate"] + common) == 0
print((out / "ablation_summary.csv").read_text())

# Heatmaps need a checkpoint at <out>/model.ckpt; reuse the three-tap run.
full = out / "ablate" / "L1+L2+L3" / "model.ckpt"
assert main(["attmaps", "--checkpoint", str(full)] + common) == 0
for path in sorted((out / "attmaps").glob("*.pgm")):
    print(path.name)
