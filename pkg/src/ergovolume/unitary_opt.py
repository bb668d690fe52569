"""Parametrized unitaries and a restarted derivative-free minimizer."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

logger = logging.getLogger(__name__)

ALGORITHM = "nelder-mead (adaptive), seeded restarts"


class OptimizationError(RuntimeError):
    def __init__(self, message: str, best_value: float = math.nan, iterations: int = 0):
        super().__init__(message)
        self.best_value = best_value
        self.iterations = iterations


@dataclass(frozen=True)
class OptimizerConfig:
    restarts: int = 8
    max_iterations: int = 5000
    tolerance: float = 1e-9
    seed: int = 0
    initial_step: float = 0.5
    # iterations over which the simplex-mean value must improve by `tolerance`
    stall_window: int = 50

    def __post_init__(self):
        if self.restarts < 1:
            raise ValueError("restarts must be >= 1")
        if not self.tolerance > 0:
            raise ValueError("tolerance must be > 0")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")

    def as_metadata(self) -> dict:
        return {
            "optimizer": ALGORITHM,
            "restarts": self.restarts,
            "max_iterations": self.max_iterations,
            "tolerance": self.tolerance,
            "seed": self.seed,
            "initial_step": self.initial_step,
        }


@dataclass
class OptResult:
    best_params: np.ndarray
    best_value: float
    iterations_used: int
    converged: bool
    restart_values: list[float] = field(default_factory=list)
    aborted_restarts: int = 0


def n_generator_params(d: int) -> int:
    return d * d


def hermitian_from_params(params, d: int) -> np.ndarray:
    """Hermitian matrix: ``d`` diagonal reals, then (re, im) of each upper-triangle entry."""
    params = np.asarray(params, dtype=float)
    if params.shape != (d * d,):
        raise ValueError(f"expected {d * d} parameters for d={d}, got {params.size}")
    g = np.diag(params[:d]).astype(complex)
    iu = np.triu_indices(d, k=1)
    off = params[d::2] + 1j * params[d + 1::2]
    g[iu] = off
    g[(iu[1], iu[0])] = off.conj()
    return g


def hermitian_exponential_unitary(params, d: int) -> np.ndarray:
    """``exp(iG)`` for the Hermitian generator ``G`` encoded by ``params``."""
    w, v = np.linalg.eigh(hermitian_from_params(params, d))
    return (v * np.exp(1j * w)) @ v.conj().T


def unitary_to_params(u) -> np.ndarray:
    """Inverse of :func:`hermitian_exponential_unitary` (principal logarithm)."""
    u = np.asarray(u, dtype=complex)
    d = u.shape[0]
    # unitary => normal, so the complex Schur form is diagonal
    from scipy.linalg import schur

    t, z = schur(u, output="complex")
    phases = np.angle(np.diag(t))
    g = (z * phases) @ z.conj().T
    g = 0.5 * (g + g.conj().T)
    iu = np.triu_indices(d, k=1)
    out = np.empty(d * d)
    out[:d] = g.diagonal().real
    out[d::2] = g[iu].real
    out[d + 1::2] = g[iu].imag
    return out


class _NonFinite(Exception):
    pass


def _checked(fun, x) -> float:
    f = float(fun(x))
    if not math.isfinite(f):
        raise _NonFinite(f)
    return f


def nelder_mead(fun, x0, step: float, max_iterations: int, tolerance: float,
                stall_window: int) -> tuple[np.ndarray, float, int, bool]:
    """Nelder-Mead from an axis-aligned simplex around ``x0``.

    Uses dimension-adaptive coefficients (Gao and Han) above four parameters.
    A run counts as converged once the mean of the simplex values improves by
    less than ``tolerance`` over ``stall_window`` iterations, or the values
    collapse to a spread below ``tolerance``. Tracking the mean instead of the
    best vertex keeps high-dimensional runs alive while the simplex still moves.
    """
    x0 = np.asarray(x0, dtype=float)
    n = x0.size
    if n > 4:
        alpha, beta, gamma, delta = 1.0, 1.0 + 2.0 / n, 0.75 - 0.5 / n, 1.0 - 1.0 / n
    else:
        alpha, beta, gamma, delta = 1.0, 2.0, 0.5, 0.5
    pts = np.vstack([x0, x0 + step * np.eye(n)])
    vals = np.array([_checked(fun, p) for p in pts])
    means = []
    for it in range(1, max_iterations + 1):
        order = np.argsort(vals, kind="stable")
        pts, vals = pts[order], vals[order]
        means.append(float(vals.mean()))
        if vals[-1] - vals[0] < tolerance:
            return pts[0], float(vals[0]), it, True
        if len(means) > stall_window and means[-stall_window - 1] - means[-1] < tolerance:
            return pts[0], float(vals[0]), it, True
        centroid = pts[:-1].mean(axis=0)
        worst = pts[-1]
        xr = centroid + alpha * (centroid - worst)
        fr = _checked(fun, xr)
        if fr < vals[0]:
            xe = centroid + beta * (xr - centroid)
            fe = _checked(fun, xe)
            pts[-1], vals[-1] = (xe, fe) if fe < fr else (xr, fr)
        elif fr < vals[-2]:
            pts[-1], vals[-1] = xr, fr
        else:
            outside = fr < vals[-1]
            xc = centroid + gamma * ((xr if outside else worst) - centroid)
            fc = _checked(fun, xc)
            if fc < (fr if outside else vals[-1]):
                pts[-1], vals[-1] = xc, fc
            else:
                pts[1:] = pts[0] + delta * (pts[1:] - pts[0])
                vals[1:] = [_checked(fun, p) for p in pts[1:]]
    best = int(np.argmin(vals))
    return pts[best], float(vals[best]), max_iterations, False


def minimize(objective, n_params: int, config: OptimizerConfig, starts=None) -> OptResult:
    """Minimize ``objective`` over R^n_params with seeded random restarts.

    ``starts`` optionally supplies warm-start points; they are used for the first
    restarts, the remaining ones draw uniformly from [-pi, pi]^n.
    """
    rng = np.random.default_rng(config.seed)
    starts = [np.asarray(s, dtype=float) for s in (starts or [])]
    best = None
    values, aborted, total_iters, any_converged = [], 0, 0, False

    for r in range(max(config.restarts, len(starts))):
        # draw for every restart so warm starts do not shift the random schedule
        x0 = rng.uniform(-np.pi, np.pi, size=n_params)
        if r < len(starts):
            x0 = starts[r]
            if x0.shape != (n_params,):
                raise ValueError(f"warm start {r} has shape {x0.shape}, expected ({n_params},)")
        try:
            x, f, iters, converged = nelder_mead(objective, x0, config.initial_step,
                                                 config.max_iterations, config.tolerance,
                                                 config.stall_window)
        except _NonFinite as exc:
            aborted += 1
            logger.warning("restart %d aborted: objective returned %s", r, exc)
            continue
        total_iters += iters
        any_converged |= converged
        values.append(f)
        if best is None or f < best[1]:
            best = (x, f)

    if best is None:
        raise OptimizationError("all restarts aborted on non-finite objective values",
                                iterations=total_iters)
    return OptResult(best[0], best[1], total_iters, any_converged, values, aborted)
