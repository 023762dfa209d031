"""Predicting from a page's HTML whether its traffic will be easy to fingerprint.

Run: python3 demos/04_fingerprintability.py   (under a minute)
"""
# %% a corpus where sites with many third-party domains get unlearnable traffic
import numpy as np

from wfkit.classic import gini_importance, train_forest
from wfkit.htmlfp import (
    FEATURE_NAMES,
    FpCorpusConfig,
    fp_experiment,
    generate_fp_corpus,
    html_feature_matrix,
    rank_inputs,
    trace_site_accuracy,
)

corpus = generate_fp_corpus(FpCorpusConfig(n_sites=40, n_instances=12), seed=0)
print(len(corpus.documents), "pages from", len(set(corpus.sites)), "sites")

# %% step 1: how well does a traffic attack recognise each site?
acc = trace_site_accuracy(corpus.traces, n_iters=5, seed=0)
vals = np.array(sorted(acc.values()))
print("site accuracy quartiles", np.percentile(vals, [25, 50, 75]).round(2).tolist())

# %% step 2: 65 HTML features per page, rank-transformed per column
F = html_feature_matrix(corpus.documents, corpus.instances)
X = rank_inputs(F)

# %% step 3: train on half the sites, score the rest with class-balanced weights
for r in fp_experiment(X, corpus.sites, acc, [0.1, 0.5, 0.9], seed=0):
    print(f"threshold {r.threshold:.1f}: weighted accuracy {r.weighted_accuracy:.3f}, "
          f"weighted MSE {r.weighted_mse:.3f} ({r.n_less} vs {r.n_greater})")

# %% which HTML features drive fingerprintability?
labels = np.array([int(acc[s] > 0.5) for s in corpus.sites])
imp = gini_importance(train_forest(F, labels, n_trees=50, seed=0))
for i in np.argsort(-imp)[:5]:
    print(f"{FEATURE_NAMES[i]:<22} {imp[i]:.3f}")
