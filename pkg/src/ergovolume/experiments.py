"""Row generators for each experiment, plus the curve post-processing used on their output.

Every generator returns ``(columns, rows, metadata)``; ``rows`` is a list of tuples in
deterministic grid order. Per-point work goes through ``pmap`` so it can be spread
over worker processes without changing the order.
"""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from functools import partial

import numpy as np
from scipy.stats import spearmanr

from .benchmarks import concurrence_from_schmidt, gme_concurrence, ggm, ggm_from_schmidt, rescale_series
from .dicke import (DressedParams, dicke_vector, dressed_marginal, dressed_schmidt_classes,
                    dressed_state_qubits, dressed_volume)
from .ergotropy import ErgotropyReport, combine_all, interacting_gap, quenched_gap, quenched_volume
from .freefermion import DEFAULT_TRUNC, tfim_volume
from .hilbert import Bipartition, PureState, partial_trace
from .models import (CutoffError, build_dicke3, build_tc, build_tfim, dicke3_ground_state,
                     ground_state)
from .qcircuit import NoiseSpec, exact_dynamics, vqa_dynamics
from .unitary_opt import OptimizerConfig

MAX_PHOTONS = 120


def pmap(fn, items, threads: int = 1) -> list:
    items = list(items)
    if threads <= 1 or len(items) < 2:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def parse_grid(text) -> np.ndarray:
    """``start:stop:step`` (inclusive), ``start:stop#count``, a comma list, or a number."""
    if isinstance(text, (int, float)):
        return np.array([float(text)])
    if isinstance(text, (list, tuple)):
        return np.array([float(x) for x in text])
    text = str(text).strip()
    try:
        if "#" in text:
            span, count = text.split("#")
            start, stop = (float(x) for x in span.split(":"))
            return np.linspace(start, stop, int(count))
        if ":" in text:
            start, stop, step = (float(x) for x in text.split(":"))
            if step <= 0 or stop < start:
                raise ValueError
            n = int(math.floor((stop - start) / step + 1e-9)) + 1
            return np.round(start + step * np.arange(n), 12)
        return np.array([float(x) for x in text.split(",")])
    except ValueError:
        raise ValueError(f"bad grid specification {text!r}") from None


# --- analysis of curves ---------------------------------------------------------------------

def inflection(x, y) -> float:
    """Location of the steepest rise, refined by a parabola through the slope maximum.

    This is where the second difference changes sign from positive to negative.
    """
    x, y = np.asarray(x, float), np.asarray(y, float)
    mid = 0.5 * (x[1:] + x[:-1])
    slope = np.diff(y) / np.diff(x)
    k = int(np.argmax(slope))
    if 0 < k < slope.size - 1:
        s0, s1, s2 = slope[k - 1: k + 2]
        denom = s0 - 2 * s1 + s2
        if denom < 0:
            return float(mid[k] + 0.5 * (s0 - s2) / denom * (mid[k + 1] - mid[k]))
    return float(mid[k])


def onset(x, y, fraction: float = 0.01) -> float:
    """First point where ``y`` crosses ``fraction`` of its maximum, linearly interpolated."""
    x, y = np.asarray(x, float), np.asarray(y, float)
    level = fraction * float(y.max())
    above = np.nonzero(y >= level)[0]
    if above.size == 0 or level <= 0:
        return math.nan
    j = int(above[0])
    if j == 0:
        return float(x[0])
    return float(x[j - 1] + (level - y[j - 1]) / (y[j] - y[j - 1]) * (x[j] - x[j - 1]))


def rank_correlation(a, b) -> float:
    return float(spearmanr(a, b).statistic)


# --- tc-dressed -----------------------------------------------------------------------------

def _tc_point(i, spins, nph, omega_c, omega_a, subspace):
    return dressed_volume(DressedParams(spins, nph, int(i), omega_c, omega_a), subspace).volume


def tc_dressed(spins: int = 100, nph: int = 50, omega_c: float = 1.0, omega_a: float = 1.0,
               subspace: bool = False, threads: int = 1):
    grid = range(spins + nph + 1)
    vols = pmap(partial(_tc_point, spins=spins, nph=nph, omega_c=omega_c, omega_a=omega_a,
                        subspace=subspace), grid, threads)
    meta = {"backend": "dicke", "degeneracy": "symmetric-subspace" if subspace else "full-space",
            "cuts": "n spins | cavity + rest, n = 1..N, equal weight"}
    return ("i", "volume"), [(i, v) for i, v in zip(grid, vols)], meta


# --- dicke3-phase ---------------------------------------------------------------------------

def dicke3_volume(atoms: int, g1: float, g2: float, n_max: int = 12, omega_c: float = 1.0,
                  omega_a: float = 1.0) -> tuple[float, int]:
    """Quenched volume of the ground state; ``n_max`` grows until the photon tail is negligible."""
    while True:
        try:
            gs = dicke3_ground_state(atoms, n_max, omega_c, omega_a, g1, g2)
            break
        except CutoffError:
            if n_max >= MAX_PHOTONS:
                raise
            n_max = min(MAX_PHOTONS, n_max + 12)
    spectra = build_dicke3(atoms, n_max, omega_c, omega_a).local_spectra()
    rep = quenched_volume(gs.state, spectra, "symmetry_classes", distinguished=0)
    return rep.volume, n_max


def _dicke3_point(pt, atoms, n_max, omega_c, omega_a):
    return dicke3_volume(atoms, pt[0], pt[1], n_max, omega_c, omega_a)


def dicke3_phase(atoms: int = 5, grid="0:1.3#40", n_max: int = 12, omega_c: float = 1.0,
                 omega_a: float = 1.0, threads: int = 1):
    if n_max < 12:
        raise ValueError("n_max must be at least 12")
    g = parse_grid(grid)
    points = [(a, b) for a in g for b in g]
    out = pmap(partial(_dicke3_point, atoms=atoms, n_max=n_max, omega_c=omega_c,
                       omega_a=omega_a), points, threads)
    rows = [(a, b, v) for (a, b), (v, _) in zip(points, out)]
    meta = {"backend": "exact", "ground_state": "symmetric-subspace diagonalization",
            "cuts": "k atoms | cavity + rest (symmetry classes, weight C(N,k))",
            "n_max_requested": n_max, "n_max_used_max": max(m for _, m in out)}
    return ("g1", "g2", "volume"), rows, meta


# --- tfim-ground ----------------------------------------------------------------------------

def tfim_ed_volume(spins: int, g: float) -> float:
    """ED cross-check with the free-fermion cut set: blocks {0..M-1}, M = 1..N/2."""
    spec = build_tfim(spins, g, "periodic")
    gs = ground_state(spec)
    spectra = spec.local_spectra()
    gaps = {}
    for m in range(1, spins // 2 + 1):
        cut = Bipartition.from_sites(range(m), spins)
        sides = (combine_all(spectra[i] for i in cut.sites_a),
                 combine_all(spectra[i] for i in cut.sites_b))
        gaps[cut] = quenched_gap(gs.state, cut, sides)
    return ErgotropyReport.from_gaps(gaps, "exact").volume


def _tfim_point(g, spins, backend, trunc):
    row = [tfim_volume(spins, g, trunc).volume]
    if backend == "both":
        row.append(tfim_ed_volume(spins, g))
    return row


def tfim_ground(spins: int = 20, g_grid="0:2:0.02", backend: str = "freefermion",
                trunc: float = DEFAULT_TRUNC, threads: int = 1):
    if backend not in ("freefermion", "both"):
        raise ValueError(f"unknown backend {backend!r}")
    if backend == "both" and spins > 14:
        raise ValueError("the exact cross-check is limited to 14 spins")
    grid = parse_grid(g_grid)
    out = pmap(partial(_tfim_point, spins=spins, backend=backend, trunc=trunc), grid, threads)
    cols = ("g", "volume_analytic") + (("volume_numeric",) if backend == "both" else ())
    rows = [(g, *r) for g, r in zip(grid, out)]
    vols = [r[1] for r in rows]
    meta = {"backend": backend, "trunc": trunc, "cuts": "contiguous blocks M = 1..N/2",
            "inflection": inflection(grid, vols) if len(grid) > 3 else None}
    return cols, rows, meta


# --- tfim-dynamics --------------------------------------------------------------------------

def tfim_dynamics(spins: int = 6, g: float = 2.0, t_grid="0:2:0.1", depth: int = 6,
                  opt: OptimizerConfig | None = None, noise: NoiseSpec | None = None,
                  dt: float = 0.02, noise_dt: float = 0.1):
    """Exact, ideal-VQA and (optionally) noisy-VQA volumes along a quench from ``|0...0>``."""
    opt = opt or OptimizerConfig(restarts=2)
    times = parse_grid(t_grid)
    exact, states = exact_dynamics(spins, g, times)
    ideal = vqa_dynamics(spins, g, times, depth, opt, None, dt)
    cols = ["t", "volume_exact", "volume_vqa"]
    noisy = None
    if noise is not None:
        noisy = vqa_dynamics(spins, g, times, depth, opt, noise, noise_dt)
        cols.append("volume_vqa_noisy")
    cols.append("ggm")
    rows = []
    for j, t in enumerate(times):
        row = [t, exact[j].volume, ideal[j].volume]
        if noisy is not None:
            row.append(noisy[j].volume)
        row.append(ggm(states[j]))
        rows.append(tuple(row))
    meta = {"backend": "circuit", "depth": depth, "trotter_dt": dt, "noisy_trotter_dt": noise_dt,
            "noise": None if noise is None else vars(noise), "boundary": "open",
            "iterations": sum(r.metadata["iterations"] for r in ideal), **opt.as_metadata()}
    return tuple(cols), rows, meta


# --- appendix-a -----------------------------------------------------------------------------

def two_party_states(dims) -> dict[str, PureState]:
    """``|01>`` and the singlet ``(|01> - |10>)/sqrt(2)`` embedded in ``dims``."""
    up = PureState.product((0, 1), dims).amplitudes
    down = PureState.product((1, 0), dims).amplitudes
    return {"01": PureState(up, dims), "singlet": PureState.from_vector(up - down, dims)}


def _appendix_point(g, n_max, opt):
    rows = []
    models = {"ising": build_tfim(2, g, "open"), "jc": build_tc(1, n_max, 1.0, 1.0, g)}
    for name, spec in models.items():
        cut = Bipartition(1, 2)
        spectra = spec.local_spectra()
        for label, state in two_party_states(spec.dims).items():
            original = interacting_gap(state, spec, cut, opt)
            quenched = quenched_gap(state, cut, spectra)
            rows.append((g, f"{name}:{label}", original, quenched))
    return rows


def appendix_a(g_grid="0:3:0.1", n_max: int = 4, opt: OptimizerConfig | None = None,
               threads: int = 1):
    """Two-party volumes (one cut, so volume = gap) for the 2-spin Ising chain and JC."""
    opt = opt or OptimizerConfig()
    grid = parse_grid(g_grid)
    out = pmap(partial(_appendix_point, n_max=n_max, opt=opt), grid, threads)
    rows = [r for chunk in out for r in chunk]
    meta = {"models": "ising (open, one bond), jc (n_max photons)", "n_max": n_max,
            **opt.as_metadata()}
    return ("g", "state_label", "volume_original", "volume_quenched"), rows, meta


# --- benchmark-compare ----------------------------------------------------------------------

def _tc_measures(i, spins, nph):
    p = DressedParams(spins, nph, int(i))
    classes = list(dressed_schmidt_classes(p).values())
    return dressed_volume(p).volume, ggm_from_schmidt(classes), concurrence_from_schmidt(classes)


def benchmark_compare(source: str = "tc", spins: int = 10, nph: int = 5, g: float = 2.0,
                      t_grid="0:2:0.1", rescale: bool = False, threads: int = 1):
    """Ergotropic volume next to GGM and GME-concurrence on one parameter sweep."""
    if source == "tc":
        if spins > 12:
            raise ValueError("the benchmark comparison is limited to 12 spins")
        xs = list(range(spins + nph + 1))
        vals = pmap(partial(_tc_measures, spins=spins, nph=nph), xs, threads)
    elif source == "dynamics":
        xs = list(parse_grid(t_grid))
        exact, states = exact_dynamics(spins, g, xs)
        vals = [(r.volume, ggm(s), gme_concurrence(s)) for r, s in zip(exact, states)]
    else:
        raise ValueError(f"unknown benchmark source {source!r}")
    series = np.array(vals, dtype=float).T
    cols = ["x", "erg_volume", "ggm", "gme_concurrence"]
    if rescale:
        series = np.vstack([series, [rescale_series(s) for s in series]])
        cols += ["erg_volume_rescaled", "ggm_rescaled", "gme_concurrence_rescaled"]
    rows = [(x, *series[:, j]) for j, x in enumerate(xs)]
    meta = {"source": source,
            "spearman_ggm": rank_correlation(series[0], series[1]),
            "spearman_gme_concurrence": rank_correlation(series[0], series[2])}
    return tuple(cols), rows, meta


def tc_dense_marginal_check(p: DressedParams) -> float:
    """Largest deviation between closed-form spin marginals and a dense partial trace."""
    state = dressed_state_qubits(p)
    worst = 0.0
    for n in range(1, p.n_spins + 1):
        keep = Bipartition.from_sites(range(1, n + 1), p.n_spins + 1)
        rho = partial_trace(state, keep).matrix
        basis = np.stack([dicke_vector(n, l) for l in range(n + 1)], axis=1)
        dense = np.real(np.einsum("il,ij,jl->l", basis, rho, basis))
        worst = max(worst, float(np.abs(dense - dressed_marginal(p, n).populations).max()))
    return worst

