import numpy as np
import pytest
from hypothesis import given, strategies as st

from ergovolume.dicke import (
    DressedParams, cavity_side_spectrum, dicke_vector, dressed_gaps, dressed_marginal,
    dressed_state, dressed_state_qubits, dressed_volume, spin_block_spectrum,
)
from ergovolume.ergotropy import enumerate_bipartitions, passive_energy_of, quenched_volume
from ergovolume.experiments import tc_dense_marginal_check
from ergovolume.hilbert import Bipartition, partial_trace
from ergovolume.models import build_tc, excitation_number


def test_params_validation():
    with pytest.raises(ValueError):
        DressedParams(2, 1, 4)
    with pytest.raises(ValueError):
        DressedParams(0, 1, 0)
    assert list(DressedParams(3, 2, 4).admissible()) == [2, 3]


def test_dressed_state_endpoints_are_product():
    low = dressed_state(DressedParams(4, 3, 0))
    assert abs(low.amplitudes[0]) == 1.0
    top = dressed_state(DressedParams(4, 3, 7))
    assert abs(top.amplitudes.reshape(4, 5)[3, 4]) == 1.0


def test_dressed_state_two_spins_one_excitation():
    amps = dressed_state(DressedParams(2, 1, 1)).amplitudes.reshape(2, 3)
    expected = np.zeros((2, 3))
    expected[1, 0] = expected[0, 1] = 1 / np.sqrt(2)
    assert np.allclose(amps, expected)


def test_dressed_states_are_eigenvectors_of_excitation_number():
    p = DressedParams(3, 2, 3)
    spec = build_tc(3, 2)
    psi = dressed_state_qubits(p).amplitudes
    assert np.allclose(excitation_number(spec) @ psi, 3 * psi)


def test_marginal_examples():
    assert np.allclose(dressed_marginal(DressedParams(2, 1, 1), 1).populations, [0.75, 0.25])
    assert np.allclose(dressed_marginal(DressedParams(2, 5, 1), 1).populations, [0.75, 0.25])
    for n in (1, 3, 5):
        pops = dressed_marginal(DressedParams(5, 4, 0), n).populations
        assert pops[0] == 1.0 and np.all(pops[1:] == 0)


def test_marginals_match_dense_partial_trace_exhaustively():
    for n_spins in range(1, 9):
        for n_ph in (1, 2, 3):
            for i in range(n_spins + n_ph + 1):
                assert tc_dense_marginal_check(DressedParams(n_spins, n_ph, i)) < 1e-10


@given(st.integers(1, 6), st.integers(1, 4), st.data())
def test_marginals_live_in_the_dicke_subspace(n_spins, n_ph, data):
    i = data.draw(st.integers(0, n_spins + n_ph))
    n = data.draw(st.integers(1, n_spins))
    p = DressedParams(n_spins, n_ph, i)
    rho = partial_trace(dressed_state_qubits(p), Bipartition.from_sites(range(1, n + 1), n_spins + 1))
    ev = rho.eigenvalues()
    pops = np.sort(dressed_marginal(p, n).populations)[::-1]
    assert np.abs(ev[: pops.size] - pops).max() < 1e-10
    assert np.abs(ev[pops.size:]).max(initial=0.0) < 1e-10


@given(st.integers(1, 300), st.integers(1, 300), st.data())
def test_marginals_normalized_at_large_n(n_spins, n_ph, data):
    i = data.draw(st.integers(0, n_spins + n_ph))
    n = data.draw(st.integers(1, n_spins))
    pops = dressed_marginal(DressedParams(n_spins, n_ph, i), n).populations
    assert np.all(pops >= 0) and abs(pops.sum() - 1) < 1e-12


def test_dicke_vector():
    v = dicke_vector(3, 1)
    assert np.allclose(v[[1, 2, 4]], 1 / np.sqrt(3)) and abs(np.linalg.norm(v) - 1) < 1e-15


def test_spectra_degeneracies():
    full = spin_block_spectrum(3, 1.0, False)
    assert full.multiplicity == (1, 3, 3, 1)
    assert spin_block_spectrum(3, 1.0, True).multiplicity == (1, 1, 1, 1)
    rest = cavity_side_spectrum(2, 1, 1.0, 1.0, False)
    # energies m + l with m in 0..2, l in 0..1
    assert rest.energies == (0.0, 1.0, 2.0, 3.0) and rest.multiplicity == (1, 2, 2, 1)


def test_volume_endpoints_zero():
    assert dressed_volume(DressedParams(6, 4, 0)).volume == 0.0
    assert dressed_volume(DressedParams(6, 4, 10)).volume == 0.0


def test_volume_matches_generic_pipeline_on_qubits():
    # the same cut set evaluated by the generic dense route on (cavity, qubits)
    p = DressedParams(4, 3, 3)
    state = dressed_state_qubits(p)
    spec = build_tc(4, 3)
    cuts = enumerate_bipartitions(5, "symmetry_classes", distinguished=0)
    generic = quenched_volume(state, spec.local_spectra(), "symmetry_classes", 0)
    gaps = dressed_gaps(p)
    for cut, _ in cuts:
        assert generic.gaps[cut] == pytest.approx(gaps[len(cut.sites_a)], abs=1e-10)


def test_complementarity(rng):
    for _ in range(10):
        n_spins = int(rng.integers(2, 7))
        n_ph = int(rng.integers(1, 4))
        p = DressedParams(n_spins, n_ph, int(rng.integers(0, n_spins + n_ph + 1)))
        state = dressed_state_qubits(p)
        for n in range(1, n_spins + 1):
            rest = Bipartition.from_sites([0, *range(n + 1, n_spins + 1)], n_spins + 1)
            other = partial_trace(state, rest).eigenvalues()
            other = other[other > 1e-13]
            other /= other.sum()
            spins = spin_block_spectrum(n, p.omega_a, False)
            side = cavity_side_spectrum(p.n_ph, n_spins - n, p.omega_c, p.omega_a, False)
            gap = passive_energy_of(other, spins) + passive_energy_of(other, side)
            assert gap == pytest.approx(dressed_gaps(p)[n], abs=1e-9)


@pytest.mark.parametrize("n_spins", [2, 5, 10, 20])
@pytest.mark.parametrize("subspace", [False, True])
def test_reflection_symmetry_at_equal_photon_number(n_spins, subspace):
    top = 2 * n_spins
    vols = [dressed_volume(DressedParams(n_spins, n_spins, i), subspace).volume
            for i in range(top + 1)]
    for i in range(top + 1):
        assert vols[i] == pytest.approx(vols[top - i], rel=1e-9, abs=1e-12)
