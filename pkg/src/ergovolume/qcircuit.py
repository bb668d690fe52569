"""Statevector circuits, Trotterized Ising evolution, and variational passive-state energies.

Qubit 0 is the leftmost tensor factor, matching :mod:`ergovolume.hilbert`.
Rotations follow ``R_P(theta) = exp(-i theta P / 2)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .ergotropy import ErgotropyReport, clamp_gap
from .hilbert import Bipartition, DimensionError, PureState, schmidt_squared
from .models import build_tfim
from .unitary_opt import OptimizerConfig, OptResult, minimize

GATE_KINDS = ("RX", "RY", "RZ", "H", "CX", "RXX")
PARAMETRIC = ("RX", "RY", "RZ", "RXX")
TWO_QUBIT = ("CX", "RXX")

_I2 = np.eye(2, dtype=complex)
_X = np.array([[0, 1], [1, 0]], dtype=complex)
_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
_Z = np.diag([1.0, -1.0]).astype(complex)
_PAULIS = (_I2, _X, _Y, _Z)
_HADAMARD = np.array([[1, 1], [1, -1]], dtype=complex) / math.sqrt(2)
_CX = np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex)


@dataclass(frozen=True)
class Gate:
    kind: str
    qubits: tuple[int, ...]
    angle: float = 0.0

    def __post_init__(self):
        if self.kind not in GATE_KINDS:
            raise ValueError(f"unknown gate {self.kind!r}")
        qubits = tuple(int(q) for q in self.qubits)
        want = 2 if self.kind in TWO_QUBIT else 1
        if len(qubits) != want or len(set(qubits)) != want:
            raise ValueError(f"{self.kind} needs {want} distinct qubit(s), got {qubits}")
        object.__setattr__(self, "qubits", qubits)

    def matrix(self, angle: float | None = None) -> np.ndarray:
        return gate_matrix(self.kind, self.angle if angle is None else angle)


def gate_matrix(kind: str, angle: float = 0.0) -> np.ndarray:
    c, s = math.cos(angle / 2), math.sin(angle / 2)
    if kind == "RX":
        return np.array([[c, -1j * s], [-1j * s, c]])
    if kind == "RY":
        return np.array([[c, -s], [s, c]], dtype=complex)
    if kind == "RZ":
        return np.diag([c - 1j * s, c + 1j * s])
    if kind == "H":
        return _HADAMARD
    if kind == "CX":
        return _CX
    if kind == "RXX":
        return c * np.eye(4, dtype=complex) - 1j * s * np.kron(_X, _X)
    raise ValueError(f"unknown gate {kind!r}")


@dataclass(frozen=True)
class Circuit:
    n_qubits: int
    gates: tuple[Gate, ...] = ()
    parameter_slots: tuple[int, ...] = ()

    def __post_init__(self):
        for g in self.gates:
            if max(g.qubits) >= self.n_qubits:
                raise ValueError(f"gate {g} outside a {self.n_qubits}-qubit register")
        for s in self.parameter_slots:
            if self.gates[s].kind not in PARAMETRIC:
                raise ValueError(f"parameter slot {s} points at a {self.gates[s].kind} gate")

    @property
    def n_params(self) -> int:
        return len(self.parameter_slots)

    def bound(self, params=()) -> list[tuple[np.ndarray, tuple[int, ...]]]:
        """Gate matrices with ``params`` substituted into the parameter slots."""
        params = np.asarray(params, dtype=float).reshape(-1)
        if params.size != self.n_params:
            raise ValueError(f"circuit has {self.n_params} parameters, got {params.size}")
        angles = {slot: params[j] for j, slot in enumerate(self.parameter_slots)}
        return [(g.matrix(angles.get(k)), g.qubits) for k, g in enumerate(self.gates)]

    def count(self, kind: str) -> int:
        return sum(g.kind == kind for g in self.gates)


@dataclass(frozen=True)
class NoiseSpec:
    """Stochastic depolarizing noise: after each gate, with probability ``p1`` (one-qubit)
    or ``p2`` (two-qubit) a uniformly random non-identity Pauli is applied."""

    p1: float = 0.0
    p2: float = 0.0
    trajectories: int = 32
    seed: int = 0

    def __post_init__(self):
        if not (0 <= self.p1 <= 1 and 0 <= self.p2 <= 1):
            raise ValueError("depolarizing probabilities must lie in [0, 1]")
        if self.trajectories < 1:
            raise ValueError("trajectories must be >= 1")


def apply_gate(psi: np.ndarray, u: np.ndarray, qubits: tuple[int, ...]) -> np.ndarray:
    """Apply ``u`` to ``qubits`` of a tensor of shape ``(2,)*n + batch``."""
    k = len(qubits)
    u = u.reshape((2,) * (2 * k))
    out = np.tensordot(u, psi, axes=(tuple(range(k, 2 * k)), qubits))
    return np.moveaxis(out, tuple(range(k)), qubits)


def _pauli_matrix(index: int, n: int) -> np.ndarray:
    """Pauli string number ``index`` (base 4, qubit 0 most significant) on ``n`` qubits."""
    out = np.array([[1.0 + 0j]])
    for j in range(n):
        out = np.kron(out, _PAULIS[(index // 4 ** (n - 1 - j)) % 4])
    return out


def _draw_error(rng: np.random.Generator, n: int, p: float) -> int:
    """Index of the Pauli error after an ``n``-qubit gate, 0 for none.

    Both variates are drawn for every gate, so realizations at different
    error rates share one random stream and their error sets are nested.
    """
    u, idx = rng.random(), int(rng.integers(1, 4 ** n))
    return idx if u < p else 0


def _noisy_ops(ops, noise: NoiseSpec | None, rng: np.random.Generator | None):
    if noise is None:
        return ops
    out = []
    for u, q in ops:
        out.append((u, q))
        err = _draw_error(rng, len(q), noise.p2 if len(q) == 2 else noise.p1)
        if err:
            out.append((_pauli_matrix(err, len(q)), q))
    return out


def _apply_ops(psi, ops):
    for u, q in ops:
        psi = apply_gate(psi, u, q)
    return psi


def _active(noise: NoiseSpec | None) -> NoiseSpec | None:
    """Treat a noise model with both rates zero exactly like no noise."""
    if noise is None or (noise.p1 == 0 and noise.p2 == 0):
        return None
    return noise


def run(circuit: Circuit, state: PureState | None = None, params=(),
        noise: NoiseSpec | None = None, rng: np.random.Generator | None = None) -> PureState:
    """Apply the circuit (with one noise realization if ``noise`` is given)."""
    n = circuit.n_qubits
    if state is None:
        state = PureState.product((0,) * n, (2,) * n)
    if state.dims != (2,) * n:
        raise DimensionError(f"input dims {state.dims} do not match {n} qubits")
    noise = _active(noise)
    if noise is not None and rng is None:
        rng = np.random.default_rng(noise.seed)
    ops = _noisy_ops(circuit.bound(params), noise, rng)
    psi = _apply_ops(state.amplitudes.reshape((2,) * n), ops).reshape(-1)
    return PureState(psi / np.linalg.norm(psi), state.dims)


def evolve_dense(hamiltonian: np.ndarray, state: PureState, t: float) -> PureState:
    """``exp(-i t H) |psi>`` by dense diagonalization (the oracle for small registers)."""
    w, v = np.linalg.eigh(hamiltonian)
    psi = v @ (np.exp(-1j * t * w) * (v.conj().T @ state.amplitudes))
    return PureState(psi / np.linalg.norm(psi), state.dims)


def trotter_circuit(n_qubits: int, g: float, t: float, steps: int,
                    boundary: str = "open") -> Circuit:
    """First-order Trotter circuit for ``exp(-i t H)``, ``H = -(sum Z + g sum XX)``."""
    if steps < 1:
        raise ValueError("steps must be >= 1")
    if boundary not in ("open", "periodic"):
        raise ValueError(f"unknown boundary {boundary!r}")
    if t == 0:
        return Circuit(n_qubits)
    dt = t / steps
    bonds = [(k, k + 1) for k in range(n_qubits - 1)]
    if boundary == "periodic":
        bonds.append((n_qubits - 1, 0))
    gates = []
    for _ in range(steps):
        gates += [Gate("RZ", (q,), -2.0 * dt) for q in range(n_qubits)]
        gates += [Gate("RXX", b, -2.0 * g * dt) for b in bonds]
    return Circuit(n_qubits, tuple(gates))


def ansatz(partition_qubits, depth: int, n_qubits: int | None = None) -> Circuit:
    """``depth`` x [RY layer, RZ layer, CX ladder] then a final RY + RZ layer."""
    qs = [int(q) for q in partition_qubits]
    if depth < 1 or not qs:
        raise ValueError("need depth >= 1 and a nonempty partition")
    n = n_qubits if n_qubits is not None else max(qs) + 1
    gates, slots = [], []

    def rotations():
        for kind in ("RY", "RZ"):
            for q in qs:
                slots.append(len(gates))
                gates.append(Gate(kind, (q,)))

    for _ in range(depth):
        rotations()
        gates.extend(Gate("CX", (a, b)) for a, b in zip(qs, qs[1:]))
    rotations()
    return Circuit(n, tuple(gates), tuple(slots))


def diagonal_energies(n: int, splitting: float = 2.0) -> np.ndarray:
    """Shifted ``-sum sigma_z`` on n qubits: ``splitting`` times the number of ones."""
    ones = np.array([bin(i).count("1") for i in range(2 ** n)])
    return splitting * ones


def _block_matrix(state: PureState, qubits) -> np.ndarray:
    """The state as a (2^|qubits|, rest) matrix with ``qubits`` as row index."""
    n = state.n_subsystems
    rest = tuple(i for i in range(n) if i not in qubits)
    m = state.amplitudes.reshape((2,) * n).transpose(tuple(qubits) + rest)
    return m.reshape(2 ** len(qubits), -1)


def _reduced_block(states, qubits, weights=None) -> np.ndarray:
    """A square root ``B`` of the weighted mixture of marginals, ``B B^+ = rho``, of minimal width."""
    weights = np.full(len(states), 1.0 / len(states)) if weights is None else weights
    rho = sum(w * (b @ b.conj().T) for w, b in
              zip(weights, (_block_matrix(s, qubits) for s in states)))
    w, v = np.linalg.eigh(rho)
    keep = w > 1e-15
    return v[:, keep] * np.sqrt(w[keep])


@dataclass(frozen=True)
class AnsatzErrors:
    """Pauli errors of one trajectory through the ansatz, keyed by gate position.

    ``rotations[(layer, axis, j)]`` follows the RY (axis 0) or RZ (axis 1) gate on
    partition qubit j; ``ladder[(layer, j)]`` follows the CX on qubits (j, j+1).
    Values are Pauli string indices.
    """

    rotations: dict = field(default_factory=dict)
    ladder: dict = field(default_factory=dict)

    def __bool__(self):
        return bool(self.rotations or self.ladder)

    @classmethod
    def draw(cls, k: int, depth: int, noise: NoiseSpec, rng: np.random.Generator) -> "AnsatzErrors":
        # same gate order as ansatz(): per layer RY row, RZ row, then the ladder
        rot, lad = {}, {}
        for layer in range(depth + 1):
            for axis in (0, 1):
                for j in range(k):
                    err = _draw_error(rng, 1, noise.p1)
                    if err:
                        rot[(layer, axis, j)] = err
            if layer < depth:
                for j in range(k - 1):
                    err = _draw_error(rng, 2, noise.p2)
                    if err:
                        lad[(layer, j)] = err
        return cls(rot, lad)


class _LayeredAnsatz:
    """Fast evaluation of the ansatz on a ``(2^k, r)`` block.

    Each layer's single-qubit rotations are fused into one Kronecker product and
    the CX ladder is a fixed row permutation, so nothing touches the full register.
    """

    def __init__(self, k: int, depth: int):
        self.k, self.depth = k, depth
        idx = np.arange(2 ** k)
        self.cx_source = []
        for j in range(k - 1):
            # CX(j, j+1) permutes basis states; it is an involution, so source == target
            ctrl = (idx >> (k - 1 - j)) & 1
            self.cx_source.append(idx ^ (ctrl << (k - 2 - j)))
        src = idx
        for perm in self.cx_source:
            src = src[perm]
        self.source = src

    def rotations(self, params) -> tuple[np.ndarray, np.ndarray]:
        """RY matrices ``(depth+1, k, 2, 2)`` and RZ diagonals ``(depth+1, k, 2)``."""
        p = np.asarray(params, dtype=float).reshape(self.depth + 1, 2, self.k)
        c, s = np.cos(p[:, 0] / 2), np.sin(p[:, 0] / 2)
        ry = np.empty(c.shape + (2, 2))
        ry[..., 0, 0], ry[..., 0, 1], ry[..., 1, 0], ry[..., 1, 1] = c, -s, s, c
        em = np.exp(-0.5j * p[:, 1])
        return ry, np.stack([em, np.conj(em)], axis=-1)

    @staticmethod
    def kron_rows(m: np.ndarray) -> np.ndarray:
        """Kronecker product along axis -3 of a ``(..., k, 2, 2)`` stack."""
        out = m[..., 0, :, :]
        for j in range(1, m.shape[-3]):
            n = out.shape[-1]
            out = (out[..., :, None, :, None] * m[..., j, None, :, None, :]).reshape(
                out.shape[:-2] + (2 * n, 2 * n))
        return out

    def apply(self, params, block: np.ndarray, errors: AnsatzErrors | None = None) -> np.ndarray:
        ry, rz = self.rotations(params)
        single = rz[..., :, None] * ry
        if errors:
            single = single.copy()
            for layer, j in {(l, j) for l, _, j in errors.rotations}:
                after_ry = _PAULIS[errors.rotations.get((layer, 0, j), 0)]
                after_rz = _PAULIS[errors.rotations.get((layer, 1, j), 0)]
                single[layer, j] = after_rz @ (rz[layer, j][:, None] * (after_ry @ ry[layer, j]))
        mats = self.kron_rows(single)
        out = mats[0] @ block
        for layer in range(self.depth):
            if errors and any(key[0] == layer for key in errors.ladder):
                for j, perm in enumerate(self.cx_source):
                    out = out[perm]
                    e = errors.ladder.get((layer, j))
                    if e:
                        out = self._pair_pauli(e, j) @ out
            else:
                out = out[self.source]
            out = mats[layer + 1] @ out
        return out

    def _pair_pauli(self, index: int, j: int) -> np.ndarray:
        return np.kron(np.kron(np.eye(2 ** j), _pauli_matrix(index, 2)), np.eye(2 ** (self.k - j - 2)))

    def unitary(self, params) -> np.ndarray:
        return self.apply(params, np.eye(2 ** self.k, dtype=complex))


class _Objective:
    """Trajectory-averaged partition energy for a frozen set of error realizations.

    ``groups`` pairs an ansatz error realization (None for error-free) with the
    weighted square-root block of the marginals that run through it; all
    error-free trajectories share one group.
    """

    def __init__(self, lay: _LayeredAnsatz, h: np.ndarray, groups):
        self.lay, self.h, self.groups = lay, h, groups

    def populations(self, params) -> np.ndarray:
        pops = np.zeros(self.h.size)
        for errors, block in self.groups:
            out = self.lay.apply(params, block, errors)
            pops += np.einsum("ij,ij->i", out.real, out.real) + np.einsum("ij,ij->i", out.imag, out.imag)
        return pops

    def __call__(self, params) -> float:
        return float(self.h @ self.populations(params))


@dataclass
class VQAResult:
    energy: float
    opt_result: OptResult

    def __iter__(self):
        return iter((self.energy, self.opt_result))


POLISH_GAIN = 1e-6


def vqa_passive_energy(state: PureState | list[PureState], partition_qubits, local_h, depth: int,
                       opt: OptimizerConfig | None = None, noise: NoiseSpec | None = None,
                       starts=None, shots: int | None = None, polish: int = 4) -> VQAResult:
    """Minimize ``<psi| U(theta)^+ H0 U(theta) |psi>`` over the partition-restricted ansatz.

    ``local_h`` is the diagonal of the ground-shifted partition Hamiltonian
    (length 2^|partition|). Warm ``starts`` are tried first, then the all-zero
    point, then seeded random restarts. After that the best point is re-seeded
    with a fresh simplex up to ``polish`` times while each round gains more than
    ``POLISH_GAIN``.

    With ``noise``, ``state`` may be a list of prepared states (trajectory t uses
    ``state[t % len(state)]``) and the objective is the trajectory average under
    frozen error realizations, so it stays deterministic for the optimizer.
    ``shots`` replaces the reported energy by a multinomial estimate at the
    optimum.
    """
    opt = opt or OptimizerConfig()
    noise = _active(noise)
    qubits = tuple(int(q) for q in partition_qubits)
    k = len(qubits)
    h = np.asarray(local_h, dtype=float).reshape(-1)
    if h.size != 2 ** k:
        raise DimensionError(f"local Hamiltonian diagonal has {h.size} entries, expected {2 ** k}")
    if h.min() < -1e-12:
        raise ValueError("local Hamiltonian must be ground-shifted to zero")
    states = list(state) if isinstance(state, (list, tuple)) else [state]
    lay = _LayeredAnsatz(k, depth)

    if noise is None:
        groups = [(None, _reduced_block(states, qubits))]
    else:
        rng = np.random.default_rng(noise.seed)
        w = 1.0 / noise.trajectories
        clean, groups = [], []
        for t in range(noise.trajectories):
            s = states[t % len(states)]
            errors = AnsatzErrors.draw(k, depth, noise, rng)
            if errors:
                groups.append((errors, math.sqrt(w) * _block_matrix(s, qubits)))
            else:
                clean.append(s)
        if clean:
            groups.insert(0, (None, _reduced_block(clean, qubits, np.full(len(clean), w))))
    objective = _Objective(lay, h, groups)

    n_params = 2 * k * (depth + 1)
    zero = np.zeros(n_params)
    seeds = [np.asarray(x, dtype=float) for x in (starts or [])] + [zero]
    res = minimize(objective, n_params, opt, starts=seeds)
    for r in range(polish):
        again = minimize(objective, n_params, replace(opt, restarts=1, seed=opt.seed + 1 + r),
                         starts=[res.best_params])
        gain = res.best_value - again.best_value
        res = OptResult(
            again.best_params if gain > 0 else res.best_params,
            min(res.best_value, again.best_value),
            res.iterations_used + again.iterations_used,
            res.converged or again.converged,
            res.restart_values + again.restart_values,
            res.aborted_restarts + again.aborted_restarts,
        )
        if gain <= POLISH_GAIN:
            break

    energy = res.best_value
    if shots:
        probs = objective.populations(res.best_params)
        counts = np.random.default_rng(opt.seed).multinomial(shots, probs / probs.sum())
        energy = float(counts @ h) / shots
    return VQAResult(energy, res)


def contiguous_cuts(n_qubits: int) -> list[Bipartition]:
    """Left blocks ``{0..n-1} | {n..N-1}`` for n = 1..N-1."""
    return [Bipartition.from_sites(range(n), n_qubits) for n in range(1, n_qubits)]


def exact_contiguous_gaps(state: PureState, splitting: float = 2.0) -> dict[Bipartition, float]:
    """Exact gaps on the same cuts the circuit protocol measures (ED oracle)."""
    out = {}
    for cut in contiguous_cuts(state.n_subsystems):
        pops = schmidt_squared(state, cut)
        ea = np.sort(diagonal_energies(len(cut.sites_a), splitting))[: pops.size]
        eb = np.sort(diagonal_energies(len(cut.sites_b), splitting))[: pops.size]
        out[cut] = clamp_gap(float(pops @ ea + pops @ eb))
    return out


def _prepared_states(prep, noise: NoiseSpec | None) -> list[PureState]:
    if isinstance(prep, PureState):
        return [prep]
    if noise is None:
        return [run(prep)]
    # the preparation circuit draws from its own stream, offset from the ansatz stream
    rng = np.random.default_rng(noise.seed + 1)
    return [run(prep, None, (), noise, rng) for _ in range(noise.trajectories)]


def vqa_ergotropic_volume(prep: Circuit | PureState, n_qubits: int, g: float, depth: int,
                          opt: OptimizerConfig | None = None, noise: NoiseSpec | None = None,
                          warm: dict | None = None, splitting: float = 2.0) -> ErgotropyReport:
    """Volume over contiguous left blocks from paired variational passive energies.

    Every block ``{0..n-1}`` and every complement ``{n..N-1}`` is optimized once.
    ``warm`` maps partition tuples to parameter vectors tried as warm starts; it
    is updated in place with the new optima, which is how a time sweep carries
    its solution forward.
    """
    opt = opt or OptimizerConfig()
    noise = _active(noise)
    states = _prepared_states(prep, noise)
    if states[0].n_subsystems != n_qubits:
        raise DimensionError("prepared state size does not match n_qubits")
    warm = {} if warm is None else warm
    energies, iterations = {}, 0
    for size in range(1, n_qubits):
        for qubits in (tuple(range(size)), tuple(range(n_qubits - size, n_qubits))):
            prev = warm.get(qubits)
            starts = [prev] if prev is not None and prev.size == 2 * size * (depth + 1) else None
            res = vqa_passive_energy(states, qubits, diagonal_energies(size, splitting), depth,
                                     opt, noise, starts=starts)
            warm[qubits] = res.opt_result.best_params
            energies[qubits] = res.energy
            iterations += res.opt_result.iterations_used
    gaps = {cut: max(energies[cut.sites_a] + energies[cut.sites_b], 0.0)
            for cut in contiguous_cuts(n_qubits)}
    return ErgotropyReport.from_gaps(
        gaps, "circuit", None, N=n_qubits, g=g, depth=depth,
        noise=None if noise is None else vars(noise),
        passive_energies={"".join(map(str, k)): v for k, v in energies.items()},
        iterations=iterations,
        bias="variational passive energies are upper bounds, so gaps are over-estimates",
        **opt.as_metadata(),
    )


def trotter_steps(t: float, dt: float) -> int:
    return max(1, math.ceil(abs(t) / dt - 1e-9))


def vqa_dynamics(n_qubits: int, g: float, times, depth: int, opt: OptimizerConfig | None = None,
                 noise: NoiseSpec | None = None, dt: float = 0.02,
                 boundary: str = "open") -> list[ErgotropyReport]:
    """VQA volume along a time grid, preparing each state with a Trotter circuit.

    Optima are carried from one time point to the next as warm starts.
    """
    warm: dict = {}
    out = []
    for t in times:
        prep = trotter_circuit(n_qubits, g, t, trotter_steps(t, dt), boundary)
        out.append(vqa_ergotropic_volume(prep, n_qubits, g, depth, opt, noise, warm))
    return out


def exact_dynamics(n_qubits: int, g: float, times, boundary: str = "open"):
    """ED oracle: dense time evolution from ``|0...0>`` and exact contiguous-cut volumes."""
    h = build_tfim(n_qubits, g, boundary).assemble()
    psi0 = PureState.product((0,) * n_qubits, (2,) * n_qubits)
    reports, states = [], []
    for t in times:
        st = evolve_dense(h, psi0, t)
        states.append(st)
        reports.append(ErgotropyReport.from_gaps(exact_contiguous_gaps(st), "exact", None,
                                                 N=n_qubits, g=g, t=float(t)))
    return reports, states
