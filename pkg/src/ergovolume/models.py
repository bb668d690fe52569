"""Hamiltonian builders (Tavis-Cummings, three-level Dicke, transverse-field Ising)
and an exact ground-state solver.

Basis conventions: level 0 of every atom or spin is its local ground state.
For two-level atoms that means ``(|g>, |e>)`` ordering; for Ising spins level 0
is spin-up along z, the ground state of ``-sigma_z``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from itertools import product
from typing import NamedTuple

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import eigsh

from .ergotropy import LocalSpectrum
from .hilbert import PureState, embed_local

DENSE_THRESHOLD = 4096

SX = np.array([[0, 1], [1, 0]], dtype=complex)
SY = np.array([[0, -1j], [1j, 0]], dtype=complex)
SZ = np.array([[1, 0], [0, -1]], dtype=complex)


class CutoffError(RuntimeError):
    """Cavity Fock-space cutoff is too small for the state found."""


class ConvergenceError(RuntimeError):
    pass


def destroy(n_levels: int) -> np.ndarray:
    return np.diag(np.sqrt(np.arange(1, n_levels)), k=1).astype(complex)


def number(n_levels: int) -> np.ndarray:
    return np.diag(np.arange(n_levels)).astype(complex)


def ket_bra(i: int, j: int, d: int) -> np.ndarray:
    m = np.zeros((d, d), dtype=complex)
    m[i, j] = 1.0
    return m


@dataclass(frozen=True)
class InteractionTerm:
    """``coeff * factors[0] (x) factors[1] (x) ...`` acting on ``sites``."""

    sites: tuple[int, ...]
    factors: tuple[np.ndarray, ...]
    coeff: complex = 1.0

    @property
    def matrix(self) -> np.ndarray:
        out = np.array([[self.coeff]], dtype=complex)
        for f in self.factors:
            out = np.kron(out, f)
        return out


def _sparse_product(dims, factors: dict[int, np.ndarray], coeff=1.0):
    mats = [sp.csr_matrix(factors[i]) if i in factors else sp.identity(d, format="csr")
            for i, d in enumerate(dims)]
    out = mats[0]
    for m in mats[1:]:
        out = sp.kron(out, m, format="csr")
    return coeff * out


@dataclass(frozen=True)
class HamiltonianSpec:
    dims: tuple[int, ...]
    local_terms: tuple[tuple[int, np.ndarray], ...]
    interaction_terms: tuple[InteractionTerm, ...] = ()
    parameters: dict = field(default_factory=dict)
    cavity_site: int | None = None
    cutoff_is_physical: bool = True

    @property
    def dimension(self) -> int:
        return int(np.prod(self.dims))

    def quench(self) -> "HamiltonianSpec":
        """The same system with every interaction term removed."""
        return replace(self, interaction_terms=())

    def site_hamiltonian(self, site: int) -> np.ndarray:
        h = np.zeros((self.dims[site],) * 2, dtype=complex)
        for s, op in self.local_terms:
            if s == site:
                h = h + op
        return h

    def local_shifts(self) -> tuple[float, ...]:
        """Ground energy of each site's local Hamiltonian (subtracted in the spectra)."""
        return tuple(float(np.linalg.eigvalsh(self.site_hamiltonian(i))[0])
                     for i in range(len(self.dims)))

    def local_spectra(self) -> tuple[LocalSpectrum, ...]:
        return tuple(LocalSpectrum.from_hamiltonian(self.site_hamiltonian(i))
                     for i in range(len(self.dims)))

    def assemble_sparse(self) -> sp.csr_matrix:
        dim = self.dimension
        h = sp.csr_matrix((dim, dim), dtype=complex)
        for s, op in self.local_terms:
            h = h + _sparse_product(self.dims, {s: op})
        for term in self.interaction_terms:
            h = h + _sparse_product(self.dims, dict(zip(term.sites, term.factors)), term.coeff)
        return h.tocsr()

    def assemble(self) -> np.ndarray:
        h = self.assemble_sparse().toarray()
        asym = np.max(np.abs(h - h.conj().T)) if h.size else 0.0
        if asym > 1e-10:
            raise ValueError(f"assembled Hamiltonian is not Hermitian (max asymmetry {asym:.2e})")
        return 0.5 * (h + h.conj().T)


def build_tc(n_spins: int, n_max: int, omega_c: float = 1.0, omega_a: float = 1.0,
             g: float = 0.0) -> HamiltonianSpec:
    """Tavis-Cummings: ``w_c a^+a + w_a sum S_z + g/sqrt(N) sum (a s+ + a^+ s-)``.

    Atoms use spin-1/2 operators, so each atom has level splitting ``w_a`` and
    ``s+ = |e><g|``. Subsystems are ``[cavity, atom_1, ..., atom_N]``.
    """
    if n_spins < 1 or n_max < 1:
        raise ValueError("need n_spins >= 1 and n_max >= 1")
    nc = n_max + 1
    a = destroy(nc)
    sz = np.diag([-0.5, 0.5]).astype(complex)
    sp_ = ket_bra(1, 0, 2)
    dims = (nc,) + (2,) * n_spins
    local = [(0, omega_c * number(nc))] + [(k, omega_a * sz) for k in range(1, n_spins + 1)]
    c = g / math.sqrt(n_spins)
    inter = []
    for k in range(1, n_spins + 1):
        inter.append(InteractionTerm((0, k), (a, sp_), c))
        inter.append(InteractionTerm((0, k), (a.conj().T, sp_.conj().T), c))
    return HamiltonianSpec(dims, tuple(local), tuple(inter),
                           dict(model="tc", N=n_spins, n_max=n_max, omega_c=omega_c,
                                omega_a=omega_a, g=g),
                           cavity_site=0, cutoff_is_physical=True)


def excitation_number(spec: HamiltonianSpec) -> np.ndarray:
    """Total excitation operator ``a^+a + sum |e><e|`` of a TC spec."""
    dims = spec.dims
    n_ex = embed_local(number(dims[0]), 0, dims)
    for k in range(1, len(dims)):
        n_ex = n_ex + embed_local(ket_bra(1, 1, 2), k, dims)
    return n_ex


def build_dicke3(n_atoms: int, n_max: int = 12, omega_c: float = 1.0, omega_a: float = 1.0,
                 g1: float = 0.0, g2: float = 0.0) -> HamiltonianSpec:
    """V-shaped three-level Dicke model; subsystems ``[cavity, qutrit_1, ..., qutrit_N]``."""
    if n_atoms < 1 or n_max < 1:
        raise ValueError("need n_atoms >= 1 and n_max >= 1")
    nc = n_max + 1
    a = destroy(nc)
    ad = a.conj().T
    dims = (nc,) + (3,) * n_atoms
    h_atom = omega_a * (ket_bra(1, 1, 3) + ket_bra(2, 2, 3))
    local = [(0, omega_c * number(nc))] + [(k, h_atom) for k in range(1, n_atoms + 1)]
    x01 = ket_bra(0, 1, 3) + ket_bra(1, 0, 3)
    y02 = ket_bra(0, 2, 3) - ket_bra(2, 0, 3)
    s = 1.0 / math.sqrt(n_atoms)
    inter = []
    for k in range(1, n_atoms + 1):
        if g1:
            inter.append(InteractionTerm((0, k), (a - ad, x01), 1j * g1 * s))
        if g2:
            inter.append(InteractionTerm((0, k), (a + ad, y02), 1j * g2 * s))
    return HamiltonianSpec(dims, tuple(local), tuple(inter),
                           dict(model="dicke3", N=n_atoms, n_max=n_max, omega_c=omega_c,
                                omega_a=omega_a, g1=g1, g2=g2),
                           cavity_site=0, cutoff_is_physical=False)


def build_tfim(n_spins: int, g: float, boundary: str = "periodic") -> HamiltonianSpec:
    """``-(sum sigma_z + g sum sigma_x sigma_x)``; periodic closes the ring even for N=2."""
    if n_spins < 2:
        raise ValueError("need at least two spins")
    if boundary not in ("periodic", "open"):
        raise ValueError(f"unknown boundary {boundary!r}")
    dims = (2,) * n_spins
    local = [(k, -SZ) for k in range(n_spins)]
    bonds = [(k, k + 1) for k in range(n_spins - 1)]
    if boundary == "periodic":
        bonds.append((n_spins - 1, 0))
    inter = [InteractionTerm(b, (SX, SX), -g) for b in bonds]
    return HamiltonianSpec(dims, tuple(local), tuple(inter),
                           dict(model="tfim", N=n_spins, g=g, h=1.0, boundary=boundary))


class GroundState(NamedTuple):
    energy: float
    state: PureState
    gap: float
    degenerate: bool


def _photon_tail(state: PureState, site: int, n_max: int) -> float:
    probs = np.sum(np.abs(np.moveaxis(state.amplitudes.reshape(state.dims), site, 0)) ** 2,
                   axis=tuple(range(1, len(state.dims))))
    return float(probs[max(n_max - 1, 0):].sum())


def check_cutoff(state: PureState, site: int, limit: float = 1e-8) -> float:
    n_max = state.dims[site] - 1
    tail = _photon_tail(state, site, n_max)
    if tail >= limit:
        raise CutoffError(
            f"photon population {tail:.2e} above n = {n_max - 2}; increase n_max beyond {n_max}"
        )
    return tail


def ground_state(spec: HamiltonianSpec, tol: float = 1e-9,
                 dense_threshold: int = DENSE_THRESHOLD, tail_limit: float = 1e-8) -> GroundState:
    """Lowest eigenpair; dense below ``dense_threshold``, Lanczos (ARPACK) above."""
    dim = spec.dimension
    if dim <= dense_threshold:
        w, v = np.linalg.eigh(spec.assemble())
        e0, e1, vec = w[0], (w[1] if dim > 1 else np.inf), v[:, 0]
    else:
        h = spec.assemble_sparse()
        v0 = np.full(dim, 1.0 / math.sqrt(dim), dtype=complex)
        try:
            w, v = eigsh(h, k=2, which="SA", v0=v0, tol=1e-12, maxiter=20 * dim)
        except Exception as exc:  # ArpackNoConvergence and friends
            raise ConvergenceError(f"iterative eigensolver failed: {exc}") from exc
        order = np.argsort(w)
        e0, e1, vec = w[order[0]], w[order[1]], v[:, order[0]]
    state = _fix_phase(PureState.from_vector(vec, spec.dims))
    if spec.cavity_site is not None and not spec.cutoff_is_physical:
        check_cutoff(state, spec.cavity_site, tail_limit)
    gap = float(e1 - e0)
    return GroundState(float(e0), state, gap, gap < tol)


def _fix_phase(state: PureState) -> PureState:
    amps = state.amplitudes
    k = int(np.argmax(np.abs(amps)))
    return PureState(amps * (abs(amps[k]) / amps[k]), state.dims)


# --- three-level Dicke model in the permutation-symmetric atomic subspace -----------------

def symmetric_occupations(n_atoms: int, d: int = 3) -> list[tuple[int, ...]]:
    """Occupation tuples (n_0, ..., n_{d-1}) summing to ``n_atoms``, in a fixed order."""
    return [occ for occ in product(range(n_atoms + 1), repeat=d) if sum(occ) == n_atoms][::-1]


def symmetric_isometry(n_atoms: int, d: int = 3) -> sp.csr_matrix:
    """Columns are normalized symmetric states of ``n_atoms`` qudits, in the product basis."""
    occs = symmetric_occupations(n_atoms, d)
    col_of = {o: j for j, o in enumerate(occs)}
    rows, cols = [], []
    for idx, levels in enumerate(product(range(d), repeat=n_atoms)):
        occ = tuple(levels.count(k) for k in range(d))
        rows.append(idx)
        cols.append(col_of[occ])
    counts = np.bincount(cols, minlength=len(occs))
    vals = 1.0 / np.sqrt(counts[cols])
    return sp.csr_matrix((vals, (rows, cols)), shape=(d ** n_atoms, len(occs)))


def _collective(n_atoms: int, i: int, j: int, d: int = 3) -> np.ndarray:
    """Matrix of ``A_ij = sum_k |i_k><j_k|`` on the symmetric subspace (Schwinger bosons)."""
    occs = symmetric_occupations(n_atoms, d)
    idx = {o: k for k, o in enumerate(occs)}
    m = np.zeros((len(occs), len(occs)), dtype=complex)
    for col, occ in enumerate(occs):
        if i == j:
            m[col, col] = occ[i]
            continue
        if occ[j] == 0:
            continue
        new = list(occ)
        new[j] -= 1
        new[i] += 1
        m[idx[tuple(new)], col] = math.sqrt((occ[i] + 1) * occ[j])
    return m


def dicke3_symmetric_hamiltonian(n_atoms: int, n_max: int, omega_c: float = 1.0,
                                 omega_a: float = 1.0, g1: float = 0.0, g2: float = 0.0) -> np.ndarray:
    """The three-level Dicke Hamiltonian restricted to cavity x symmetric atoms."""
    nc = n_max + 1
    a = destroy(nc)
    ad = a.conj().T
    ic = np.eye(nc)
    a_ij = {(i, j): _collective(n_atoms, i, j) for i in range(3) for j in range(3)}
    ia = np.eye(a_ij[0, 0].shape[0])
    s = 1.0 / math.sqrt(n_atoms)
    h = omega_c * np.kron(number(nc), ia) + omega_a * np.kron(ic, a_ij[1, 1] + a_ij[2, 2])
    h = h + 1j * g1 * s * np.kron(a - ad, a_ij[0, 1] + a_ij[1, 0])
    h = h + 1j * g2 * s * np.kron(a + ad, a_ij[0, 2] - a_ij[2, 0])
    return 0.5 * (h + h.conj().T)


def dicke3_ground_state(n_atoms: int, n_max: int = 12, omega_c: float = 1.0,
                        omega_a: float = 1.0, g1: float = 0.0, g2: float = 0.0,
                        tol: float = 1e-9, tail_limit: float = 1e-8) -> GroundState:
    """Ground state from the symmetric subspace, embedded in the full product space.

    The gap reported is the gap within the symmetric subspace.
    """
    h = dicke3_symmetric_hamiltonian(n_atoms, n_max, omega_c, omega_a, g1, g2)
    w, v = np.linalg.eigh(h)
    iso = symmetric_isometry(n_atoms)
    nc = n_max + 1
    sym = v[:, 0].reshape(nc, -1)
    full = (iso @ sym.T).T.reshape(-1)
    state = _fix_phase(PureState.from_vector(full, (nc,) + (3,) * n_atoms))
    check_cutoff(state, 0, tail_limit)
    gap = float(w[1] - w[0])
    return GroundState(float(w[0]), state, gap, gap < tol)
