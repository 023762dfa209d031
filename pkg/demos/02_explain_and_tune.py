"""Which input positions matter, and searching for hyperparameters.

Run: python3 demos/02_explain_and_tune.py
"""
# %% train an MLP on direction features
import numpy as np

from wfkit.explain import aggregate_relevance, lrp_w2, relevance_by_direction
from wfkit.features import Pipeline, extract, feature_matrix
from wfkit.hypertune import holdout_error_objective, mlp_space, optimize
from wfkit.neural import TrainConfig, build_mlp, predict, train
from wfkit.trace import SyntheticConfig, generate_synthetic

ds = generate_synthetic(SyntheticConfig(n_classes=8, n_instances=30, trace_len_mean=120), seed=1)
X, y = feature_matrix(ds, Pipeline.CELL_DIRECTION, 200)
model = train(build_mlp(200, ds.n_classes, (64, 64), seed=0), X, y, TrainConfig(epochs=20))
print("train accuracy", np.mean(predict(model, X) == y))

# %% relevance: decompose the predicted logit onto the 200 inputs, summed over 10 traces
rng = np.random.default_rng(0)
picks = rng.choice(len(y), 10, replace=False)
runs = [lrp_w2(model, X[i]) for i in picks]
agg = aggregate_relevance(runs)
print("most relevant positions", agg.ranking[:10].tolist())

# %% relevance split by what sits at each position (incoming, padding, outgoing)
fv = extract(ds.records[picks[0]], Pipeline.CELL_DIRECTION, 200)
for v, g in relevance_by_direction(runs[0], fv).items():
    print(f"value {v:+d}: n={g.count:3d} mean={g.mean:.4f} std={g.std:.4f}")

# %% a short TPE search (epochs capped so this stays quick)
objective = holdout_error_objective(X, y, "mlp", ds.n_classes, seed=0, max_epochs=3)
best, trials = optimize(objective, mlp_space(), budget=12, seed=0)
print("best validation error", round(best.objective, 3))
print({k: best.params[k] for k in ("optimizer", "learning_rate", "n_layers", "hidden_units", "activation")})
