"""Passive-state energies, ergotropic gaps and the ergotropic volume."""
from __future__ import annotations

import math
from collections.abc import Iterable, Mapping
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from .hilbert import (
    Bipartition,
    DensityOperator,
    DimensionError,
    PureState,
    eig_hermitian,
    schmidt_squared,
)
from .unitary_opt import (
    OptimizationError,
    OptimizerConfig,
    hermitian_exponential_unitary,
    minimize,
)

CLAMP = 1e-10          # gaps at or below this count as zero in the volume
ROUNDOFF = 1e-9        # negative gaps down to -ROUNDOFF are clamped silently
NEGATIVE_LIMIT = 1e-6  # below -NEGATIVE_LIMIT a negative gap is a bug, not round-off
LEVEL_TOL = 1e-9       # energies closer than this are merged into one level

BACKENDS = ("exact", "dicke", "freefermion", "circuit")


class NegativeGapError(ArithmeticError):
    pass


@dataclass(frozen=True, eq=False)
class LocalSpectrum:
    """Ground-shifted local energy levels with explicit degeneracies.

    Multiplicities are Python ints so collective spectra with astronomically
    large degeneracies (hundreds of spins) stay exact.
    """

    energies: tuple[float, ...]
    multiplicity: tuple[int, ...]

    def __post_init__(self):
        e = tuple(float(x) for x in self.energies)
        m = tuple(int(x) for x in self.multiplicity)
        if len(e) != len(m) or not e:
            raise ValueError("energies and multiplicity must be nonempty and equally long")
        if abs(e[0]) > LEVEL_TOL:
            raise ValueError(f"spectrum must be ground-shifted, lowest energy is {e[0]}")
        if any(b <= a for a, b in zip(e, e[1:])):
            raise ValueError("energies must be strictly ascending")
        if any(x < 1 for x in m):
            raise ValueError("multiplicities must be >= 1")
        object.__setattr__(self, "energies", e)
        object.__setattr__(self, "multiplicity", m)

    @property
    def dimension(self) -> int:
        return sum(self.multiplicity)

    @property
    def max_energy(self) -> float:
        return self.energies[-1]

    @classmethod
    def from_levels(cls, levels: Mapping[float, int] | Iterable[tuple[float, int]],
                    tol: float = LEVEL_TOL) -> "LocalSpectrum":
        """Group (energy, multiplicity) pairs, merge near-equal energies, shift the ground to 0."""
        items = sorted(levels.items() if isinstance(levels, Mapping) else levels)
        if not items:
            raise ValueError("empty spectrum")
        e0 = items[0][0]
        energies, mult = [], []
        for e, m in items:
            if m <= 0:
                continue
            if energies and (e - e0) - energies[-1] <= tol:
                mult[-1] += int(m)
            else:
                energies.append(e - e0)
                mult.append(int(m))
        energies[0] = 0.0
        return cls(tuple(energies), tuple(mult))

    @classmethod
    def from_eigenvalues(cls, eigenvalues, tol: float = LEVEL_TOL) -> "LocalSpectrum":
        return cls.from_levels([(float(e), 1) for e in np.sort(np.asarray(eigenvalues).real)], tol)

    @classmethod
    def from_hamiltonian(cls, h, tol: float = LEVEL_TOL) -> "LocalSpectrum":
        w, _ = eig_hermitian(h)
        return cls.from_eigenvalues(w, tol)

    @classmethod
    def uniform(cls, splitting: float, d: int = 2) -> "LocalSpectrum":
        """Equally spaced nondegenerate ladder 0, s, 2s, ... (d levels)."""
        return cls(tuple(k * splitting for k in range(d)), (1,) * d)

    def combine(self, other: "LocalSpectrum", tol: float = LEVEL_TOL) -> "LocalSpectrum":
        """Spectrum of the non-interacting sum H_self + H_other."""
        levels = [(a + b, ma * mb)
                  for a, ma in zip(self.energies, self.multiplicity)
                  for b, mb in zip(other.energies, other.multiplicity)]
        return LocalSpectrum.from_levels(levels, tol)

    def expanded(self, count: int | None = None) -> np.ndarray:
        """Ascending energies repeated by multiplicity, optionally only the first ``count``."""
        count = self.dimension if count is None else count
        out = np.empty(count)
        pos = 0
        for e, m in zip(self.energies, self.multiplicity):
            if pos >= count:
                break
            take = min(m, count - pos)
            out[pos:pos + take] = e
            pos += take
        if pos < count:
            raise DimensionError(f"spectrum has {self.dimension} states, {count} requested")
        return out


def combine_all(spectra: Iterable[LocalSpectrum]) -> LocalSpectrum:
    it = iter(spectra)
    acc = next(it)
    for s in it:
        acc = acc.combine(s)
    return acc


@dataclass(frozen=True, eq=False)
class PassiveSpectrumPair:
    populations: np.ndarray
    spectrum: LocalSpectrum

    def __post_init__(self):
        p = np.sort(np.clip(np.asarray(self.populations, dtype=float).reshape(-1), 0.0, None))[::-1]
        if abs(p.sum() - 1.0) > 1e-10:
            raise ValueError(f"populations sum to {p.sum()!r}, expected 1")
        object.__setattr__(self, "populations", p)


def passive_energy(pair: PassiveSpectrumPair) -> float:
    """Energy of the passive state: largest population on the lowest level, and so on."""
    p = pair.populations
    p = p[: np.flatnonzero(p > 0)[-1] + 1] if np.any(p > 0) else p[:1]
    if p.size > pair.spectrum.dimension:
        raise DimensionError(
            f"{p.size} nonzero populations exceed the {pair.spectrum.dimension}-dimensional local space"
        )
    return float(np.dot(p, pair.spectrum.expanded(p.size)))


def passive_energy_of(populations, spectrum: LocalSpectrum) -> float:
    return passive_energy(PassiveSpectrumPair(populations, spectrum))


def clamp_gap(value: float) -> float:
    if value < -NEGATIVE_LIMIT:
        raise NegativeGapError(f"ergotropic gap {value!r} is negative beyond round-off")
    return max(value, 0.0)


def ergotropy(rho: DensityOperator, h) -> float:
    """Maximum work extractable from ``rho`` by a global unitary under Hamiltonian ``h``."""
    h = np.asarray(h, dtype=complex)
    if h.shape != rho.matrix.shape:
        raise DimensionError(f"Hamiltonian shape {h.shape} vs state shape {rho.matrix.shape}")
    energies, _ = eig_hermitian(h)
    pops = rho.eigenvalues()
    mean = float(np.real(np.vdot(h.conj().T, rho.matrix)))  # Tr[H rho]
    value = mean - float(np.dot(pops, energies))
    if value < -ROUNDOFF * max(1.0, abs(mean)):
        raise NegativeGapError(f"ergotropy {value!r} is negative")
    return max(value, 0.0)


def _check_spectra(state: PureState, cut: Bipartition, spectra) -> tuple[LocalSpectrum, LocalSpectrum]:
    spec_a, spec_b = spectra
    da = int(np.prod([state.dims[i] for i in cut.sites_a]))
    db = int(np.prod([state.dims[i] for i in cut.sites_b]))
    if spec_a.dimension != da or spec_b.dimension != db:
        raise DimensionError(
            f"local spectra of dimensions ({spec_a.dimension}, {spec_b.dimension}) "
            f"do not match the cut {cut} with dimensions ({da}, {db})"
        )
    return spec_a, spec_b


def quenched_gap(state: PureState, cut: Bipartition, local_spectra) -> float:
    """Sum of the marginal passive energies under the quenched (local) Hamiltonian."""
    spec_a, spec_b = _check_spectra(state, cut, local_spectra)
    pops = schmidt_squared(state, cut)
    return clamp_gap(passive_energy_of(pops, spec_a) + passive_energy_of(pops, spec_b))


def _reorder(state: PureState, h: np.ndarray, cut: Bipartition):
    dims = state.dims
    n = len(dims)
    order = cut.sites_a + cut.sites_b
    da = int(np.prod([dims[i] for i in cut.sites_a]))
    db = int(np.prod([dims[i] for i in cut.sites_b]))
    psi = state.amplitudes.reshape(dims).transpose(order).reshape(da, db)
    ht = h.reshape(dims + dims).transpose(order + tuple(n + i for i in order))
    return psi, ht.reshape(da * db, da * db), da, db


def interacting_gap(state: PureState, hamiltonian, cut: Bipartition,
                    opt: OptimizerConfig | None = None, *, require_convergence: bool = True) -> float:
    """Gap between global and local ergotropy under the full interacting Hamiltonian.

    Global ergotropy of a pure state is its energy above the ground energy; local
    ergotropy is found by minimizing the full energy (interaction included) over
    product unitaries ``U_A x U_B``. Their difference is ``min_local E - E_ground``.
    """
    opt = opt or OptimizerConfig()
    h = hamiltonian.assemble() if hasattr(hamiltonian, "assemble") else np.asarray(hamiltonian, complex)
    if h.shape != (state.amplitudes.size,) * 2:
        raise DimensionError(f"Hamiltonian shape {h.shape} does not match the state")
    e_ground = float(eig_hermitian(h)[0][0])
    psi, hr, da, db = _reorder(state, h, cut)
    na, nb = da * da, db * db

    def energy(x):
        ua = hermitian_exponential_unitary(x[:na], da)
        ub = hermitian_exponential_unitary(x[na:], db)
        phi = (ua @ psi @ ub.T).reshape(-1)
        return float(np.real(np.vdot(phi, hr @ phi)))

    res = minimize(energy, na + nb, opt, starts=[np.zeros(na + nb)])
    if require_convergence and not res.converged:
        raise OptimizationError(
            "local-unitary minimization did not converge on any restart",
            best_value=res.best_value, iterations=res.iterations_used,
        )
    value = res.best_value - e_ground
    if value < -NEGATIVE_LIMIT:
        raise NegativeGapError(f"interacting gap {value!r} below the ground energy")
    return max(value, 0.0)


def enumerate_bipartitions(n_subsystems: int, mode: str = "all",
                           distinguished: int | None = 0) -> list[tuple[Bipartition, int]]:
    """Unordered cuts of ``n_subsystems`` parties, each with a multiplicity.

    ``all``: every cut once. ``contiguous``: ring-contiguous blocks of size
    1..n//2. ``symmetry_classes``: classes of cuts under permutations of all
    subsystems except ``distinguished`` (None means fully exchangeable).
    """
    n = n_subsystems
    if n < 2:
        raise ValueError("need at least two subsystems")
    if mode == "all":
        out = []
        for size in range(1, n // 2 + 1):
            for sites in combinations(range(n), size):
                if 2 * size == n and 0 not in sites:
                    continue
                out.append((Bipartition.from_sites(sites, n), 1))
        return out
    if mode == "contiguous":
        seen, out = set(), []
        for size in range(1, n // 2 + 1):
            for start in range(n):
                cut = Bipartition.from_sites([(start + k) % n for k in range(size)], n)
                key = cut.canonical().side_a
                if key not in seen:
                    seen.add(key)
                    out.append((cut, 1))
        return out
    if mode == "symmetry_classes":
        if distinguished is None:
            out = []
            for k in range(1, n // 2 + 1):
                mult = math.comb(n, k) // (2 if 2 * k == n else 1)
                out.append((Bipartition.from_sites(range(k), n), mult))
            return out
        others = [i for i in range(n) if i != distinguished]
        return [(Bipartition.from_sites(others[:k], n), math.comb(n - 1, k))
                for k in range(1, n)]
    raise ValueError(f"unknown bipartition mode {mode!r}")


def ergotropic_volume(gaps) -> float:
    """Weighted geometric mean of gaps; ``gaps`` is a list of (gap, multiplicity)
    pairs or a mapping gap-key -> gap (unit multiplicity)."""
    items = list(gaps.values()) if isinstance(gaps, Mapping) else list(gaps)
    items = [(g, 1) if np.isscalar(g) else tuple(g) for g in items]
    if not items:
        raise ValueError("empty gap set")
    total = sum(m for _, m in items)
    if any(g <= CLAMP for g, _ in items):
        return 0.0
    return math.exp(math.fsum(m * math.log(g) for g, m in items) / total)


@dataclass
class ErgotropyReport:
    gaps: dict
    volume: float
    backend: str
    multiplicities: dict = field(default_factory=dict)
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.backend not in BACKENDS:
            raise ValueError(f"unknown backend {self.backend!r}")

    @classmethod
    def from_gaps(cls, gaps: dict, backend: str, multiplicities: dict | None = None,
                  **metadata) -> "ErgotropyReport":
        mult = multiplicities or {k: 1 for k in gaps}
        vol = ergotropic_volume([(gaps[k], mult[k]) for k in gaps])
        return cls(dict(gaps), vol, backend, dict(mult), metadata)

    def check(self, rtol: float = 1e-9) -> None:
        """Raise if the stored volume is not the geometric mean of the stored gaps."""
        expected = ergotropic_volume([(g, self.multiplicities.get(k, 1)) for k, g in self.gaps.items()])
        if abs(expected - self.volume) > rtol * max(expected, 1e-300) and not (
            expected == 0.0 and self.volume == 0.0
        ):
            raise AssertionError(f"volume {self.volume} != geometric mean {expected}")


def quenched_volume(state: PureState, site_spectra, mode: str = "all",
                    distinguished: int | None = 0) -> ErgotropyReport:
    """Volume from per-site ground-shifted spectra (the quenched Hamiltonian)."""
    site_spectra = list(site_spectra)
    if len(site_spectra) != state.n_subsystems:
        raise DimensionError("one local spectrum per subsystem required")
    cuts = enumerate_bipartitions(state.n_subsystems, mode, distinguished)
    gaps, mult = {}, {}
    cache: dict[tuple[int, ...], LocalSpectrum] = {}

    def side(sites):
        if sites not in cache:
            cache[sites] = combine_all(site_spectra[i] for i in sites)
        return cache[sites]

    for cut, m in cuts:
        gaps[cut] = quenched_gap(state, cut, (side(cut.sites_a), side(cut.sites_b)))
        mult[cut] = m
    return ErgotropyReport.from_gaps(gaps, "exact", mult, mode=mode, clamp=CLAMP)
