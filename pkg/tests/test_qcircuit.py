import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from ergovolume.ergotropy import LocalSpectrum, combine_all, quenched_gap
from ergovolume.hilbert import (
    Bipartition, DimensionError, PureState, embed_local, ghz, partial_trace, random_state,
)
from ergovolume.models import SZ, build_tfim
from ergovolume.qcircuit import (
    AnsatzErrors, Circuit, Gate, NoiseSpec, _LayeredAnsatz, _block_matrix, ansatz,
    contiguous_cuts, diagonal_energies, evolve_dense, exact_contiguous_gaps, exact_dynamics,
    gate_matrix, run, trotter_circuit, trotter_steps, vqa_ergotropic_volume, vqa_passive_energy,
)
from ergovolume.unitary_opt import OptimizerConfig

BELL = PureState.from_vector([1, 0, 0, 1], (2, 2))
ZERO6 = PureState.product((0,) * 6, (2,) * 6)


def random_qubits(n, rng):
    return random_state((2,) * n, rng)


# --- gates and circuits --------------------------------------------------------------------

def test_gate_validation():
    with pytest.raises(ValueError):
        Gate("CX", (1, 1))
    with pytest.raises(ValueError):
        Gate("RY", (0, 1))
    with pytest.raises(ValueError):
        Gate("SWAP", (0, 1))
    with pytest.raises(ValueError):
        Circuit(2, (Gate("CX", (0, 2)),))
    with pytest.raises(ValueError):
        Circuit(2, (Gate("H", (0,)),), (0,))


@pytest.mark.parametrize("kind", ["RX", "RY", "RZ", "H", "CX", "RXX"])
def test_gate_matrices_unitary(kind):
    u = gate_matrix(kind, 0.731)
    assert np.abs(u @ u.conj().T - np.eye(u.shape[0])).max() < 1e-14


def test_empty_circuit_is_identity(rng):
    s = random_qubits(3, rng)
    # run renormalizes, which may move the last bit
    assert np.abs(run(Circuit(3), s).amplitudes - s.amplitudes).max() < 1e-15


def test_bell_preparation():
    out = run(Circuit(2, (Gate("H", (0,)), Gate("CX", (0, 1)))))
    assert np.allclose(out.amplitudes, BELL.amplitudes)


@given(st.integers(0, 2 ** 31), st.floats(-7.0, 7.0))
def test_rxx_equals_cx_rx_cx(seed, theta):
    s = random_qubits(3, np.random.default_rng(seed))
    direct = run(Circuit(3, (Gate("RXX", (0, 2), theta),)), s).amplitudes
    composed = run(Circuit(3, (Gate("CX", (0, 2)), Gate("RX", (0,), theta),
                               Gate("CX", (0, 2)))), s).amplitudes
    assert np.abs(direct - composed).max() < 1e-12


@given(st.integers(0, 2 ** 31))
def test_run_preserves_norm(seed):
    rng = np.random.default_rng(seed)
    kinds = ["RX", "RY", "RZ", "H", "CX", "RXX"]
    gates = []
    for _ in range(30):
        kind = kinds[rng.integers(len(kinds))]
        qs = tuple(rng.choice(4, 2 if kind in ("CX", "RXX") else 1, replace=False))
        gates.append(Gate(kind, qs, float(rng.normal())))
    out = run(Circuit(4, tuple(gates)), random_qubits(4, rng))
    assert abs(np.linalg.norm(out.amplitudes) - 1) < 1e-12


def test_run_checks_inputs():
    c = ansatz([0, 1], 1)
    with pytest.raises(ValueError):
        run(c, params=np.zeros(3))
    with pytest.raises(DimensionError):
        run(Circuit(2), PureState.product((0,), (2,)))


def test_gate_convention_matches_dense_exponential():
    # RZ(theta) = exp(-i theta Z / 2): check against a dense exponential of -sigma_z dt
    dt = 0.3
    psi = PureState.from_vector([1, 1], (2,))
    out = run(Circuit(1, (Gate("RZ", (0,), -2 * dt),)), psi)
    assert np.allclose(out.amplitudes, evolve_dense(-SZ, psi, dt).amplitudes)


# --- Trotterization ------------------------------------------------------------------------

def test_trotter_zero_time_is_identity():
    c = trotter_circuit(4, 2.0, 0.0, 10)
    assert c.gates == ()


def test_trotter_layer_structure():
    c = trotter_circuit(4, 1.0, 1.0, 3)
    assert c.count("RZ") == 12 and c.count("RXX") == 9
    ring = trotter_circuit(4, 1.0, 1.0, 3, boundary="periodic")
    assert ring.count("RXX") == 12
    with pytest.raises(ValueError):
        trotter_circuit(4, 1.0, 1.0, 0)


def trotter_infidelity(n, g, t, steps, boundary="open"):
    psi0 = PureState.product((0,) * n, (2,) * n)
    exact = evolve_dense(build_tfim(n, g, boundary).assemble(), psi0, t).amplitudes
    approx = run(trotter_circuit(n, g, t, steps, boundary)).amplitudes
    return 1 - abs(np.vdot(exact, approx)) ** 2


def test_trotter_error_order():
    steps = np.array([8, 16, 32])
    deficit = np.array([trotter_infidelity(4, 2.0, 0.5, s) for s in steps])
    slope = -np.polyfit(np.log(steps), np.log(deficit), 1)[0]
    assert 1.7 <= slope <= 2.3


def test_trotter_periodic_ring_converges():
    assert trotter_infidelity(4, 1.0, 0.5, 256, "periodic") < 1e-4


def test_trotter_observable_tracks_exact_dynamics():
    g = 2.0
    h = build_tfim(6, g, "open").assemble()
    sz = sum(embed_local(SZ, k, (2,) * 6) for k in range(6))

    def worst(steps):
        out = 0.0
        for t in np.arange(0.0, 2.0001, 0.1):
            a = run(trotter_circuit(6, g, t, steps)).amplitudes
            b = evolve_dense(h, ZERO6, t).amplitudes
            out = max(out, abs(np.vdot(a, sz @ a).real - np.vdot(b, sz @ b).real))
        return out

    coarse, fine = worst(64), worst(256)
    # the deviation shrinks fourfold per doubling of the step count
    assert coarse == pytest.approx(8.766e-3, rel=1e-3)
    assert 14 < coarse / fine < 18
    assert fine < 1e-3


def test_trotter_steps():
    assert trotter_steps(0.0, 0.02) == 1
    assert trotter_steps(2.0, 0.02) == 100
    assert trotter_steps(0.1, 0.1) == 1


# --- ansatz --------------------------------------------------------------------------------

@pytest.mark.parametrize("k,depth", [(1, 1), (1, 4), (2, 3), (3, 2), (5, 6)])
def test_ansatz_shape(k, depth):
    c = ansatz(range(k), depth)
    assert c.n_params == 2 * k * (depth + 1)
    assert c.count("CX") == depth * (k - 1)


def test_ansatz_acts_only_on_partition(rng):
    c = ansatz([1, 3], 2, n_qubits=4)
    assert {q for g in c.gates for q in g.qubits} == {1, 3}
    with pytest.raises(ValueError):
        ansatz([], 1)


def test_zero_angles_fix_the_reference_state():
    # zero angles leave only the CX ladders, which permute basis states and fix |0...0>
    for k, depth in [(1, 2), (3, 2), (4, 3)]:
        lay = _LayeredAnsatz(k, depth)
        u = lay.unitary(np.zeros(2 * k * (depth + 1)))
        assert np.allclose(np.abs(u), np.abs(u) ** 2)  # a permutation matrix
        assert u[0, 0] == pytest.approx(1.0)
    assert np.allclose(_LayeredAnsatz(1, 3).unitary(np.zeros(8)), np.eye(2))


@given(st.integers(0, 2 ** 31), st.integers(1, 4), st.integers(1, 3))
def test_fast_ansatz_matches_circuit(seed, k, depth):
    rng = np.random.default_rng(seed)
    params = rng.uniform(-np.pi, np.pi, 2 * k * (depth + 1))
    s = random_qubits(k + 1, rng)
    qubits = tuple(range(k))
    expected = _block_matrix(run(ansatz(qubits, depth, k + 1), s, params), qubits)
    got = _LayeredAnsatz(k, depth).apply(params, _block_matrix(s, qubits))
    assert np.abs(got - expected).max() < 1e-12


@given(st.integers(0, 2 ** 31), st.integers(2, 4))
def test_fast_ansatz_matches_circuit_with_errors(seed, k):
    rng = np.random.default_rng(seed)
    depth = 2
    params = rng.uniform(-np.pi, np.pi, 2 * k * (depth + 1))
    noise = NoiseSpec(0.2, 0.5, 1, seed)
    s = random_qubits(k, rng)
    qubits = tuple(range(k))
    circuit_out = run(ansatz(qubits, depth), s, params, noise, np.random.default_rng(seed))
    errors = AnsatzErrors.draw(k, depth, noise, np.random.default_rng(seed))
    fast = _LayeredAnsatz(k, depth).apply(params, s.amplitudes.reshape(-1, 1), errors)
    assert np.abs(fast[:, 0] - circuit_out.amplitudes).max() < 1e-12


# --- variational passive energy ------------------------------------------------------------

def test_bell_marginal_rotated_to_passive_state():
    e, res = vqa_passive_energy(BELL, (0,), [0.0, 1.0], 1)
    assert e == pytest.approx(0.5, abs=1e-6)
    assert res.converged


def test_bell_pair_block_of_a_larger_register():
    # two-qubit partition holding one half of each of two Bell pairs
    state = PureState.from_vector(np.kron(BELL.amplitudes, BELL.amplitudes), (2,) * 4)
    e, _ = vqa_passive_energy(state, (0, 2), diagonal_energies(2, 1.0), 1)
    # marginal is I/4 on levels {0, 1, 1, 2}: passive energy 1
    assert e == pytest.approx(1.0, abs=1e-6)


def test_product_input_discharges_fully():
    s = PureState.product((1, 0, 1), (2, 2, 2))
    e, _ = vqa_passive_energy(s, (0, 2), diagonal_energies(2), 1)
    assert e == pytest.approx(0.0, abs=1e-6)


@pytest.mark.parametrize("depth", [2, 3])
def test_ghz4_two_qubit_partition(depth):
    e, _ = vqa_passive_energy(ghz(4), (0, 1), diagonal_energies(2, 1.0), depth)
    assert e == pytest.approx(0.5, abs=1e-5)


def test_local_h_validation():
    with pytest.raises(DimensionError):
        vqa_passive_energy(BELL, (0,), [0.0, 1.0, 2.0], 1)
    with pytest.raises(ValueError):
        vqa_passive_energy(BELL, (0,), [-1.0, 1.0], 1)


def test_passive_energy_monotone_in_depth(rng):
    opt = OptimizerConfig(restarts=4)
    for _ in range(3):
        s = random_qubits(4, rng)
        for part in [(0,), (0, 1), (0, 1, 2)]:
            h = diagonal_energies(len(part))
            energies = [vqa_passive_energy(s, part, h, d, opt).energy for d in (1, 2, 3)]
            assert all(b <= a + 1e-9 for a, b in zip(energies, energies[1:]))


@pytest.mark.parametrize("n", [2, 3, 4])
def test_measured_gap_is_not_below_exact(n, rng):
    opt = OptimizerConfig(restarts=3)
    for _ in range(2):
        s = random_qubits(n, rng)
        exact = exact_contiguous_gaps(s)
        rep = vqa_ergotropic_volume(s, n, 1.0, 2, opt)
        for cut, gap in rep.gaps.items():
            assert gap >= exact[cut] - 1e-6


def test_variational_energy_is_upper_bound_and_reaches_floor_for_small_blocks(rng):
    s = random_qubits(4, rng)
    for part in [(0,), (0, 1)]:
        pops = partial_trace(s, Bipartition.from_sites(part, 4)).eigenvalues()
        floor = float(pops @ np.sort(diagonal_energies(len(part))))
        e, _ = vqa_passive_energy(s, part, diagonal_energies(len(part)), 3)
        assert floor - 1e-12 <= e < floor + 1e-6


def test_shot_estimate_is_close(rng):
    s = random_qubits(3, rng)
    exact, _ = vqa_passive_energy(s, (0,), [0.0, 2.0], 2)
    shot, _ = vqa_passive_energy(s, (0,), [0.0, 2.0], 2, shots=200_000)
    assert shot == pytest.approx(exact, abs=0.02)
    assert shot != exact


def test_noise_off_is_bitwise_identical(rng):
    s = random_qubits(3, rng)
    opt = OptimizerConfig(restarts=2)
    plain = vqa_passive_energy(s, (0, 1), diagonal_energies(2), 2, opt)
    off = vqa_passive_energy(s, (0, 1), diagonal_energies(2), 2, opt, NoiseSpec(0.0, 0.0, 16, 4))
    assert plain.energy == off.energy
    assert np.array_equal(plain.opt_result.best_params, off.opt_result.best_params)
    c = trotter_circuit(3, 1.0, 0.4, 4)
    assert np.array_equal(run(c).amplitudes, run(c, noise=NoiseSpec(0.0, 0.0)).amplitudes)


def test_noise_raises_passive_energy_of_pure_marginal():
    s = PureState.product((0, 0), (2, 2))
    noisy, _ = vqa_passive_energy(s, (0, 1), diagonal_energies(2), 2,
                                  noise=NoiseSpec(0.05, 0.1, 8, 3))
    assert noisy > 1e-3


def test_noise_realizations_are_nested():
    # error sets at a lower rate are subsets of those at a higher rate
    low = AnsatzErrors.draw(4, 3, NoiseSpec(0.05, 0.1), np.random.default_rng(9))
    high = AnsatzErrors.draw(4, 3, NoiseSpec(0.2, 0.4), np.random.default_rng(9))
    assert set(low.rotations) <= set(high.rotations) and set(low.ladder) <= set(high.ladder)
    for key, idx in low.rotations.items():
        assert high.rotations[key] == idx


# --- protocol ------------------------------------------------------------------------------

def test_contiguous_cuts():
    assert [c.sites_a for c in contiguous_cuts(4)] == [(0,), (0, 1), (0, 1, 2)]


def test_exact_gaps_match_quenched_gap(rng):
    s = random_qubits(4, rng)
    site = LocalSpectrum.uniform(2.0)
    for cut, gap in exact_contiguous_gaps(s).items():
        spectra = (combine_all([site] * len(cut.sites_a)), combine_all([site] * len(cut.sites_b)))
        assert gap == pytest.approx(quenched_gap(s, cut, spectra), abs=1e-12)


def test_product_input_volume_is_zero():
    rep = vqa_ergotropic_volume(trotter_circuit(4, 2.0, 0.0, 1), 4, 2.0, 2,
                                OptimizerConfig(restarts=1))
    assert rep.volume < 1e-4
    rep.check()
    assert rep.backend == "circuit" and "bias" in rep.metadata


def test_short_time_volume_tracks_exact():
    reports, _ = exact_dynamics(4, 2.0, [0.3])
    rep = vqa_ergotropic_volume(trotter_circuit(4, 2.0, 0.3, 15), 4, 2.0, 3,
                                OptimizerConfig(restarts=2))
    assert rep.volume >= reports[0].volume - 1e-6
    assert rep.volume == pytest.approx(reports[0].volume, rel=0.02)
