"""From a CSV of z-values to a list of discoveries.

Simulates a two-group dataset, writes it in the CSV layout the ``analyze``
subcommand reads, then runs the same steps by hand: estimate Lfdr per
group, rank by R, step down the ranking while the cumulative excess error
stays non-positive.

Run:  python demos/03_analyze_a_dataset.py [out_dir]
"""
import sys
from pathlib import Path

import numpy as np

from wfdr import (
    GaussianComponent,
    GroupSpec,
    HypothesisBatch,
    MixtureModel,
    estimate_lfdr,
    generate_batch,
    procedure1,
    read_batch_csv,
    replication_metrics,
    write_batch_csv,
)
from wfdr.cli import main

out_dir = Path(sys.argv[1] if len(sys.argv) > 1 else "demo_output")
out_dir.mkdir(exist_ok=True)
alpha = 0.1

model = MixtureModel((GroupSpec(3000, 0.2, non_null=GaussianComponent(2.0)),
                      GroupSpec(1500, 0.1, non_null=GaussianComponent(2.5))))
sim = generate_batch(model, seed=11)
# group 1 discoveries are worth more than group 2 ones
b = np.where(sim.group == 0, 2.0, 0.5)
batch = HypothesisBatch(x=sim.x, b=b, group=sim.group, theta=sim.theta)
path = out_dir / "scores.csv"
write_batch_csv(batch, path)
print(f"wrote {batch.m} hypotheses to {path}")

# by hand
batch = read_batch_csv(path)
lfdr = estimate_lfdr(batch)
decisions = procedure1(lfdr, batch, alpha)
for g in batch.group_ids:
    in_g = batch.group == g
    print(f"group {g}: {decisions.reject[in_g].sum()} of {in_g.sum()} rejected, "
          f"largest rejected Lfdr {lfdr.values[in_g & (decisions.reject == 1)].max():.3f}")
rm = replication_metrics(decisions, batch)
print(f"realized weighted FDP {rm.weighted_fdp:.3f}, weighted true positives {rm.weighted_true_pos:.1f}")

# the same through the command line; writes decisions and a JSON summary
print("\n$ wfdr analyze --input", path, "--out", out_dir / "decisions.csv")
main(["analyze", "--input", str(path), "--out", str(out_dir / "decisions.csv"), "--alpha", str(alpha)])
