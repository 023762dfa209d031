"""Padding defenses: what they cost and what they hide.

Run: python3 demos/03_defenses.py
"""
# %% one trace before and after BuFLO
import numpy as np

from wfkit.defense import BufloParams, TamarawParams, apply_buflo, defend_dataset
from wfkit.evaluation import Policy, run_experiment
from wfkit.features import Pipeline
from wfkit.neural import TrainConfig
from wfkit.trace import SyntheticConfig, generate_synthetic, split_iterations

ds = generate_synthetic(SyntheticConfig(n_classes=6, n_instances=20, trace_len_mean=150), seed=2)
rec = ds.records[0]
out = apply_buflo(rec, BufloParams(512, 0.02, 2.0))
print(f"{len(rec)} events -> {len(out)} events, {int(out.dummy.sum())} dummies")
print("same-direction gaps:", np.unique(np.round(np.diff(out.times[out.directions == 1]), 9)))

# %% corpus-wide overhead for both defenses
buflo = defend_dataset(ds, BufloParams(512, 0.02, 2.0))
tamaraw = defend_dataset(ds, TamarawParams(0.04, 0.012, 100))
print(f"BuFLO mean overhead {buflo.mean_overhead:.0f}%, Tamaraw {tamaraw.mean_overhead:.0f}%")

# %% the attack before and after
plan = split_iterations(ds, 0.6, 2, seed=0)
for name, data in (("undefended", ds), ("BuFLO", buflo.dataset), ("Tamaraw", tamaraw.dataset)):
    r = run_experiment(data, Pipeline.CELL_DIRECTION, 512, "mlp", plan, Policy(), TrainConfig(epochs=10),
                       model_params={"hidden_units": (128, 128)}, seed=0)
    print(f"{name:<10} accuracy {r.mean['accuracy']:.3f}")
