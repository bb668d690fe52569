"""Reference measures of genuine multipartite entanglement for pure states."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .ergotropy import enumerate_bipartitions
from .hilbert import PureState, purity, schmidt_squared


def ggm(state: PureState) -> float:
    """Generalized geometric measure: 1 - max over cuts of the largest squared Schmidt coefficient."""
    if state.n_subsystems < 2:
        raise ValueError("need at least two subsystems")
    best = max(schmidt_squared(state, cut)[0]
               for cut, _ in enumerate_bipartitions(state.n_subsystems, "all"))
    return max(0.0, 1.0 - float(best))


def gme_concurrence(state: PureState) -> float:
    """min over cuts of sqrt(2 (1 - Tr rho_A^2))."""
    if state.n_subsystems < 2:
        raise ValueError("need at least two subsystems")
    worst = max(purity(state, cut) for cut, _ in enumerate_bipartitions(state.n_subsystems, "all"))
    return math.sqrt(max(0.0, 2.0 * (1.0 - worst)))


def ggm_from_schmidt(classes) -> float:
    """GGM from precomputed squared Schmidt spectra, one array per cut (or cut class)."""
    return max(0.0, 1.0 - max(float(np.max(s)) for s in classes))


def concurrence_from_schmidt(classes) -> float:
    worst = max(float(np.sum(np.asarray(s) ** 2)) for s in classes)
    return math.sqrt(max(0.0, 2.0 * (1.0 - worst)))


def rescale_series(values) -> np.ndarray:
    """Min-max rescale to [0, 1]."""
    v = np.asarray(values, dtype=float)
    lo, hi = float(v.min()), float(v.max())
    if hi - lo <= 0.0:
        raise ValueError("cannot rescale a constant series")
    return (v - lo) / (hi - lo)


@dataclass(frozen=True, eq=False)
class MeasureSeries:
    """Several measures sampled on one ordered parameter sweep."""

    inputs: np.ndarray
    values: dict

    def __post_init__(self):
        inputs = np.asarray(self.inputs, dtype=float)
        values = {k: np.asarray(v, dtype=float) for k, v in self.values.items()}
        for name, v in values.items():
            if v.shape != inputs.shape:
                raise ValueError(f"measure {name!r} has {v.size} values for {inputs.size} inputs")
        object.__setattr__(self, "inputs", inputs)
        object.__setattr__(self, "values", values)

    def rescaled(self) -> "MeasureSeries":
        """Each measure min-max rescaled on its own."""
        return MeasureSeries(self.inputs, {k: rescale_series(v) for k, v in self.values.items()})
