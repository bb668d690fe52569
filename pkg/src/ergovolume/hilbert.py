"""Dense linear algebra on tensor-product Hilbert spaces.

Subsystem 0 is the slowest-varying tensor factor (leftmost in kets), so a
basis index ``k`` of a space with ``dims = (d0, d1, ..., d_{n-1})`` unpacks as
``np.unravel_index(k, dims)``.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import reduce

import numpy as np

HERMITIAN_TOL = 1e-10
NORM_TOL = 1e-12


class DimensionError(ValueError):
    """Operator or state shape does not match the declared subsystem dims."""


class NotHermitianError(ValueError):
    def __init__(self, asymmetry: float):
        super().__init__(f"matrix is not Hermitian: max |M - M^H| = {asymmetry:.3e}")
        self.asymmetry = asymmetry


def _check_dims(dims) -> tuple[int, ...]:
    dims = tuple(int(d) for d in dims)
    if not dims:
        raise DimensionError("dims must be nonempty")
    if any(d < 2 for d in dims):
        raise DimensionError(f"every local dimension must be >= 2, got {dims}")
    return dims


@dataclass(frozen=True, eq=False)
class PureState:
    amplitudes: np.ndarray
    dims: tuple[int, ...]

    def __post_init__(self):
        dims = _check_dims(self.dims)
        amps = np.asarray(self.amplitudes, dtype=complex).reshape(-1)
        if amps.size != int(np.prod(dims)):
            raise DimensionError(f"{amps.size} amplitudes for dims {dims}")
        norm = np.linalg.norm(amps)
        if abs(norm - 1.0) > NORM_TOL:
            raise ValueError(f"state is not normalized (norm = {norm!r})")
        amps.setflags(write=False)
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "amplitudes", amps)

    @classmethod
    def from_vector(cls, vec, dims) -> "PureState":
        """Build a state from an unnormalized vector."""
        vec = np.asarray(vec, dtype=complex).reshape(-1)
        return cls(vec / np.linalg.norm(vec), dims)

    @classmethod
    def product(cls, levels, dims) -> "PureState":
        """Computational basis ket ``|levels[0] levels[1] ...>``."""
        dims = _check_dims(dims)
        vec = np.zeros(int(np.prod(dims)), dtype=complex)
        vec[np.ravel_multi_index(tuple(levels), dims)] = 1.0
        return cls(vec, dims)

    @property
    def n_subsystems(self) -> int:
        return len(self.dims)

    def density(self) -> "DensityOperator":
        return DensityOperator(np.outer(self.amplitudes, self.amplitudes.conj()), self.dims)


@dataclass(frozen=True, eq=False)
class DensityOperator:
    matrix: np.ndarray
    dims: tuple[int, ...]

    def __post_init__(self):
        dims = _check_dims(self.dims)
        m = np.asarray(self.matrix, dtype=complex)
        dim = int(np.prod(dims))
        if m.shape != (dim, dim):
            raise DimensionError(f"matrix shape {m.shape} does not match dims {dims}")
        asym = float(np.max(np.abs(m - m.conj().T))) if dim else 0.0
        if asym > NORM_TOL:
            raise NotHermitianError(asym)
        tr = np.trace(m).real
        if abs(tr - 1.0) > NORM_TOL:
            raise ValueError(f"density operator trace is {tr!r}, expected 1")
        m = 0.5 * (m + m.conj().T)
        m.setflags(write=False)
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "matrix", m)

    @property
    def n_subsystems(self) -> int:
        return len(self.dims)

    def eigenvalues(self) -> np.ndarray:
        """Spectrum in descending order."""
        return np.linalg.eigvalsh(self.matrix)[::-1]


@dataclass(frozen=True, order=True)
class Bipartition:
    """Side A of a cut, as a bit mask over subsystem indices (bit i = subsystem i)."""

    side_a: int
    n_subsystems: int

    def __post_init__(self):
        full = (1 << self.n_subsystems) - 1
        if self.n_subsystems < 2:
            raise ValueError("a bipartition needs at least two subsystems")
        if self.side_a <= 0 or self.side_a >= full or self.side_a & ~full:
            raise ValueError(
                f"side_a mask {self.side_a:#b} must be a nonempty proper subset "
                f"of {self.n_subsystems} subsystems"
            )

    @classmethod
    def from_sites(cls, sites, n_subsystems: int) -> "Bipartition":
        mask = 0
        for s in sites:
            if not 0 <= s < n_subsystems:
                raise ValueError(f"site {s} out of range for {n_subsystems} subsystems")
            mask |= 1 << int(s)
        return cls(mask, n_subsystems)

    @property
    def sites_a(self) -> tuple[int, ...]:
        return tuple(i for i in range(self.n_subsystems) if self.side_a >> i & 1)

    @property
    def sites_b(self) -> tuple[int, ...]:
        return tuple(i for i in range(self.n_subsystems) if not self.side_a >> i & 1)

    def complement(self) -> "Bipartition":
        return Bipartition(((1 << self.n_subsystems) - 1) ^ self.side_a, self.n_subsystems)

    def canonical(self) -> "Bipartition":
        """The representative of {A, B} whose side A contains subsystem 0."""
        return self if self.side_a & 1 else self.complement()

    def __str__(self) -> str:
        a = ",".join(map(str, self.sites_a))
        b = ",".join(map(str, self.sites_b))
        return f"{{{a}}}|{{{b}}}"


def embed_local(op, site: int, dims) -> np.ndarray:
    """Return ``I x ... x op x ... x I`` with ``op`` acting on ``site``."""
    dims = _check_dims(dims)
    op = np.asarray(op, dtype=complex)
    if not 0 <= site < len(dims):
        raise DimensionError(f"site {site} out of range for dims {dims}")
    if op.shape != (dims[site], dims[site]):
        raise DimensionError(
            f"operator of shape {op.shape} at site {site}: expected dimension {dims[site]}"
        )
    left = int(np.prod(dims[:site], dtype=int))
    right = int(np.prod(dims[site + 1:], dtype=int))
    return np.kron(np.kron(np.eye(left), op), np.eye(right))


def embed_operator(op, sites, dims) -> np.ndarray:
    """Embed an operator on several (not necessarily adjacent) sites.

    ``op`` acts on the tensor product of ``sites`` in the order given.
    """
    dims = _check_dims(dims)
    sites = tuple(int(s) for s in sites)
    if len(set(sites)) != len(sites):
        raise DimensionError(f"repeated sites {sites}")
    sub = tuple(dims[s] for s in sites)
    op = np.asarray(op, dtype=complex)
    dsub = int(np.prod(sub))
    if op.shape != (dsub, dsub):
        raise DimensionError(f"operator of shape {op.shape} on sites {sites}: expected {dsub}")
    rest = tuple(i for i in range(len(dims)) if i not in sites)
    drest = int(np.prod([dims[i] for i in rest], dtype=int))
    full = np.kron(op, np.eye(drest)).reshape(sub + tuple(dims[i] for i in rest)
                                              + sub + tuple(dims[i] for i in rest))
    order = sites + rest
    n = len(dims)
    inv = np.argsort(order)
    full = full.transpose(tuple(inv) + tuple(n + i for i in inv))
    dim = int(np.prod(dims))
    return full.reshape(dim, dim)


def kron_all(*ops) -> np.ndarray:
    return reduce(np.kron, ops)


def _split(amps: np.ndarray, dims: tuple[int, ...], keep: tuple[int, ...]) -> np.ndarray:
    rest = tuple(i for i in range(len(dims)) if i not in keep)
    psi = amps.reshape(dims).transpose(keep + rest)
    dk = int(np.prod([dims[i] for i in keep]))
    return psi.reshape(dk, -1)


def partial_trace(state: PureState | DensityOperator, keep: Bipartition) -> DensityOperator:
    """Reduced operator on the subsystems in ``keep.side_a`` (order preserved)."""
    dims = state.dims
    if keep.n_subsystems != len(dims):
        raise DimensionError(
            f"bipartition over {keep.n_subsystems} subsystems, state has {len(dims)}"
        )
    sites = keep.sites_a
    sub = tuple(dims[i] for i in sites)
    if isinstance(state, PureState):
        m = _split(state.amplitudes, dims, sites)
        rho = m @ m.conj().T
    else:
        n = len(dims)
        rest = tuple(i for i in range(n) if i not in sites)
        t = state.matrix.reshape(dims + dims)
        t = t.transpose(sites + rest + tuple(n + i for i in sites) + tuple(n + i for i in rest))
        dk = int(np.prod(sub))
        dr = int(np.prod([dims[i] for i in rest]))
        rho = np.einsum("arbr->ab", t.reshape(dk, dr, dk, dr))
    rho = 0.5 * (rho + rho.conj().T)
    rho /= np.trace(rho).real
    return DensityOperator(rho, sub)


def eig_hermitian(op, tol: float = HERMITIAN_TOL) -> tuple[np.ndarray, np.ndarray]:
    """Ascending eigenvalues and unitary eigenvectors (columns) of a Hermitian matrix."""
    m = np.asarray(op, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DimensionError(f"expected a square matrix, got shape {m.shape}")
    asym = float(np.max(np.abs(m - m.conj().T))) if m.size else 0.0
    if asym > tol * max(1.0, float(np.max(np.abs(m)))):
        raise NotHermitianError(asym)
    return np.linalg.eigh(0.5 * (m + m.conj().T))


def schmidt_squared(state: PureState, cut: Bipartition) -> np.ndarray:
    """Squared Schmidt coefficients across ``cut``, descending, summing to one."""
    if cut.n_subsystems != state.n_subsystems:
        raise DimensionError(
            f"bipartition over {cut.n_subsystems} subsystems, state has {state.n_subsystems}"
        )
    m = _split(state.amplitudes, state.dims, cut.sites_a)
    s = np.linalg.svd(m, compute_uv=False) ** 2
    return s / s.sum()


def purity(state: PureState, cut: Bipartition) -> float:
    """Tr(rho_A^2) from the smaller marginal, without an eigendecomposition."""
    m = _split(state.amplitudes, state.dims, cut.sites_a)
    if m.shape[0] > m.shape[1]:
        m = m.T
    rho = m @ m.conj().T
    return float(np.real(np.vdot(rho, rho)))


def random_state(dims, rng: np.random.Generator) -> PureState:
    dims = _check_dims(dims)
    dim = int(np.prod(dims))
    return PureState.from_vector(rng.normal(size=dim) + 1j * rng.normal(size=dim), dims)


def haar_unitary(d: int, rng: np.random.Generator) -> np.ndarray:
    z = (rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    ph = np.diag(r) / np.abs(np.diag(r))
    return q * ph


def ghz(n: int) -> PureState:
    vec = np.zeros(2 ** n, dtype=complex)
    vec[0] = vec[-1] = 1.0
    return PureState.from_vector(vec, (2,) * n)


def w_state(n: int) -> PureState:
    vec = np.zeros(2 ** n, dtype=complex)
    for k in range(n):
        vec[1 << k] = 1.0
    return PureState.from_vector(vec, (2,) * n)
