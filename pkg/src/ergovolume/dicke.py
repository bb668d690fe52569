"""Closed-form Tavis-Cummings dressed states and their Dicke-subspace marginals.

The dressed state with ``i`` excitations is the equal superposition of
``|i - l>_cavity |N/2, l - N/2>`` over every ``l`` with ``0 <= i - l <= N_ph``.
Its ``n``-spin marginal is diagonal in the ``n``-spin Dicke basis, which is what
makes hundreds of spins tractable.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from itertools import combinations

import numpy as np
from scipy.special import gammaln

from .ergotropy import ErgotropyReport, LocalSpectrum, passive_energy_of
from .hilbert import PureState


@dataclass(frozen=True)
class DressedParams:
    n_spins: int
    n_ph: int
    excitations: int
    omega_c: float = 1.0
    omega_a: float = 1.0

    def __post_init__(self):
        if self.n_spins < 1 or self.n_ph < 1:
            raise ValueError("need n_spins >= 1 and n_ph >= 1")
        if not 0 <= self.excitations <= self.n_spins + self.n_ph:
            raise ValueError(
                f"excitation number {self.excitations} outside [0, {self.n_spins + self.n_ph}]"
            )

    def admissible(self) -> np.ndarray:
        """Spin excitation numbers ``l`` with a physical photon number ``i - l``."""
        i = self.excitations
        return np.arange(max(0, i - self.n_ph), min(i, self.n_spins) + 1)


@dataclass(frozen=True)
class DiagonalMarginal:
    populations: np.ndarray   # indexed by collective excitation l = 0..n
    n: int


def dressed_state(p: DressedParams) -> PureState:
    """Dressed state on ``(cavity, collective spin)`` with dims ``(N_ph + 1, N + 1)``."""
    ls = p.admissible()
    if ls.size == 0:
        raise ValueError("empty admissible window")
    amps = np.zeros((p.n_ph + 1, p.n_spins + 1), dtype=complex)
    amps[p.excitations - ls, ls] = 1.0 / math.sqrt(ls.size)
    return PureState(amps.reshape(-1), (p.n_ph + 1, p.n_spins + 1))


def dicke_vector(n_spins: int, excitations: int) -> np.ndarray:
    """Normalized symmetric state of ``n_spins`` qubits with ``excitations`` ones."""
    vec = np.zeros(2 ** n_spins)
    for ones in combinations(range(n_spins), excitations):
        vec[sum(1 << (n_spins - 1 - q) for q in ones)] = 1.0
    return vec / math.sqrt(math.comb(n_spins, excitations))


def dressed_state_qubits(p: DressedParams) -> PureState:
    """The same dressed state written on ``(cavity, qubit_1, ..., qubit_N)``; small N only."""
    if p.n_spins > 12:
        raise ValueError("explicit qubit representation limited to 12 spins")
    ls = p.admissible()
    amps = np.zeros((p.n_ph + 1, 2 ** p.n_spins), dtype=complex)
    for l in ls:
        amps[p.excitations - l] += dicke_vector(p.n_spins, int(l)) / math.sqrt(ls.size)
    return PureState(amps.reshape(-1), (p.n_ph + 1,) + (2,) * p.n_spins)


def _log_comb(n, k):
    n = np.asarray(n, dtype=float)
    k = np.asarray(k, dtype=float)
    return gammaln(n + 1) - gammaln(k + 1) - gammaln(n - k + 1)


def dressed_marginal(p: DressedParams, n: int) -> DiagonalMarginal:
    """Populations of the ``n``-spin marginal in the ``n``-spin Dicke basis."""
    big_n = p.n_spins
    if not 1 <= n <= big_n:
        raise ValueError(f"block size {n} outside [1, {big_n}]")
    big_l = p.admissible()[None, :]        # total spin excitations
    l = np.arange(n + 1)[:, None]           # excitations inside the block
    j = big_l - l                           # excitations in the traced spins
    ok = (j >= 0) & (j <= big_n - n)
    jj = np.where(ok, j, 0)
    logw = _log_comb(big_n - n, jj) + _log_comb(n, l) - _log_comb(big_n, big_l)
    w = np.where(ok, np.exp(logw), 0.0)
    pops = w.sum(axis=1) / big_l.size
    return DiagonalMarginal(pops / pops.sum(), n)


@lru_cache(maxsize=None)
def spin_block_spectrum(n: int, omega_a: float, subspace: bool) -> LocalSpectrum:
    """Quenched ``n``-atom spectrum: levels ``w_a l``; full space degeneracy C(n, l)."""
    return LocalSpectrum.from_levels(
        [(omega_a * l, 1 if subspace else math.comb(n, l)) for l in range(n + 1)]
    )


@lru_cache(maxsize=None)
def cavity_side_spectrum(n_ph: int, n: int, omega_c: float, omega_a: float,
                         subspace: bool) -> LocalSpectrum:
    """Quenched spectrum of the cavity (0..N_ph photons) plus ``n`` atoms."""
    levels = [(omega_c * m + omega_a * l, 1 if subspace else math.comb(n, l))
              for m in range(n_ph + 1) for l in range(n + 1)]
    return LocalSpectrum.from_levels(levels)


def dressed_gaps(p: DressedParams, subspace_mode: bool = False) -> dict[int, float]:
    """Gap of every cut ``n spins | cavity + N - n spins``, n = 1..N."""
    gaps = {}
    for n in range(1, p.n_spins + 1):
        pops = dressed_marginal(p, n).populations
        spins = spin_block_spectrum(n, p.omega_a, subspace_mode)
        rest = cavity_side_spectrum(p.n_ph, p.n_spins - n, p.omega_c, p.omega_a, subspace_mode)
        gaps[n] = passive_energy_of(pops, spins) + passive_energy_of(pops, rest)
    return gaps


def dressed_volume(p: DressedParams, subspace_mode: bool = False) -> ErgotropyReport:
    gaps = dressed_gaps(p, subspace_mode)
    return ErgotropyReport.from_gaps(
        gaps, "dicke", None, N=p.n_spins, N_ph=p.n_ph, i=p.excitations,
        omega_c=p.omega_c, omega_a=p.omega_a,
        degeneracy="symmetric-subspace" if subspace_mode else "full-space",
        cuts="n spins | cavity + remaining spins, n = 1..N",
    )


def dressed_schmidt_classes(p: DressedParams) -> dict[int, np.ndarray]:
    """Squared Schmidt coefficients for each class of cut of the full (cavity + N qubits) state.

    By permutation symmetry of the spins, every cut is equivalent to
    ``k spins | cavity + N - k spins`` for some k = 1..N.
    """
    return {n: np.sort(dressed_marginal(p, n).populations)[::-1]
            for n in range(1, p.n_spins + 1)}
