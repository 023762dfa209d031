"""Binary fingerprintability labels derived from per-site attack accuracy."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from ..evaluation import balanced_class_weights

DEFAULT_THRESHOLDS = tuple(round(0.1 * k, 2) for k in range(1, 10))


@dataclass(frozen=True)
class FpLabeling:
    threshold: float
    labels: np.ndarray
    class_weights: dict[int, float]

    @property
    def percent(self) -> int:
        return int(round(self.threshold * 100))

    @property
    def instance_weights(self) -> np.ndarray:
        return np.array([self.class_weights[int(c)] for c in self.labels])

    @property
    def counts(self) -> tuple[int, int]:
        """(instances at or below the threshold, instances above it)."""
        n1 = int(self.labels.sum())
        return self.labels.size - n1, n1


def fp_labels(site_accuracies: Mapping[str, float], instance_sites: Sequence[str],
              threshold: float) -> FpLabeling:
    """Label 1 (fingerprintable) iff the instance's site accuracy exceeds ``threshold``."""
    if not 0.0 < threshold < 1.0:
        raise ValueError("threshold must lie in (0, 1)")
    for site, acc in site_accuracies.items():
        if not 0.0 <= acc <= 1.0:
            raise ValueError(f"accuracy of {site!r} outside [0, 1]")
    missing = sorted({s for s in instance_sites if s not in site_accuracies})
    if missing:
        raise KeyError(f"no accuracy for sites {missing[:5]}")
    labels = np.array([int(site_accuracies[s] > threshold) for s in instance_sites], dtype=np.int64)
    return FpLabeling(float(threshold), labels, balanced_class_weights(labels, 2))
