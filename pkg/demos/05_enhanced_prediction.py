"""End-to-end enhancement at reduced scale: anchor + phase prior + flow model.

Runs the full pipeline on a small two-path dataset: train and freeze the
lower-frequency operator, build coarse amplitude anchors and phase-prior
features for the scarce higher-frequency training split, train the
conditional flow-matching enhancer, and compare against direct
extrapolation on the held-out higher-frequency test split.

Expect roughly five minutes of wall time at this scale.
"""
import dataclasses

from wavex import enhancer, operator
from wavex import pipeline as pl

cfg = pl.ExperimentConfig(
    benchmark="simplewave", method="apex", n_per_freq=16,
    gen_seed=3, split_seed=1, eval_seed=0, sample_steps=10,
    operator=operator.OperatorConfig(epochs=20, lr=3e-3, seed=0),
    enhancer=enhancer.EnhancerConfig(epochs=40, lr=3e-3, batch=8, seed=0),
)

print("dataset:", cfg.benchmark, f"({cfg.n_per_freq} environments per value)")
ds = pl.generate_benchmark_dataset(cfg)
split = pl.split_for(cfg, ds)
print("split:", split.describe())

print("\n-- direct lower-to-higher extrapolation --")
rep_lf = pl.run_experiment(dataclasses.replace(cfg, method="fno-lf"),
                           "/tmp/wavex-demo", dataset=ds, write_artifacts=False)
print(pl.report_table(rep_lf))

print("-- anchored + phase-prior-guided enhancement --")
rep = pl.run_experiment(cfg, "/tmp/wavex-demo", dataset=ds, write_artifacts=False)
print(pl.report_table(rep))

a, b = rep.overall(), rep_lf.overall()
print(f"H1: {a.h1_mean:.3f} vs {b.h1_mean:.3f} (lower is better)")
print(f"AWPC: {a.awpc_mean:.3f} vs {b.awpc_mean:.3f} (higher is better)")
print("\nthe enhancer recovers oscillatory structure the frozen operator")
print("cannot extrapolate, while reusing its transferable amplitude.")
