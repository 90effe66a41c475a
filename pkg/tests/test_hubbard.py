import numpy as np
import pytest
from hypothesis import given, strategies as st

from vtne.hubbard import (
    LatticeConfig,
    PauliString,
    QubitLabel,
    Spin,
    build_mpo,
    hopping_strings,
    hubbard_mpo,
    jordan_wigner_terms,
    qubit_index,
    qubit_label,
    species_terms,
)
from vtne.mps import expectation, product_state
from vtne.oracle import exact_ground, pauli_operator, sector_indices

SMALL = [(2, 1), (3, 1), (4, 1), (2, 2), (3, 2), (6, 1)]


def test_first_site_spin_order():
    lat = LatticeConfig(4, 1)
    assert qubit_index(QubitLabel(0, 0, Spin.DOWN), lat) == 0
    assert qubit_index(QubitLabel(0, 0, Spin.UP), lat) == 1


def test_last_up_qubit():
    lat = LatticeConfig(4, 2)
    last = lat.site_at(lat.n_sites - 1)
    assert qubit_index(QubitLabel(*last, Spin.UP), lat) == lat.n_qubits - 1


@pytest.mark.parametrize("nx,ny", [(4, 1), (4, 2), (3, 3), (4, 4)])
def test_labels_are_a_bijection(nx, ny):
    lat = LatticeConfig(nx, ny)
    image = sorted(qubit_index(QubitLabel(i, j, s), lat) for (i, j) in lat.sites() for s in Spin)
    assert image == list(range(lat.n_qubits))
    assert all(qubit_index(qubit_label(q, lat), lat) == q for q in range(lat.n_qubits))


def test_snake_reverses_odd_rows():
    lat = LatticeConfig(4, 2)
    assert [lat.site_position(i, 1) for i in range(4)] == [7, 6, 5, 4]


def test_two_site_term_count():
    terms = jordan_wigner_terms(LatticeConfig(2, 1))
    hop = [t for t in terms if any(p in ("X", "Y") for p in t.factors.values())]
    onsite = [t for t in terms if t not in hop]
    assert len(hop) == 4
    # 2 sites x (-Z_dn, -Z_up, Z_dn Z_up) plus one merged constant
    assert len(onsite) == 7
    assert sum(t.coefficient for t in onsite if t.is_identity) == pytest.approx(2 * 2 / 4)


def test_two_site_ground_energy():
    lat = LatticeConfig(2, 1)
    h = pauli_operator(jordan_wigner_terms(lat), 4).toarray()
    idx = sector_indices(4, n_particles=2)
    assert np.linalg.eigvalsh(h[np.ix_(idx, idx)])[0] == pytest.approx(1 - np.sqrt(5), abs=1e-12)


def test_free_fermion_chain_energy():
    lat = LatticeConfig(4, 1, u=0.0)
    e0, _ = exact_ground(jordan_wigner_terms(lat), 8, n_particles=4)
    assert e0 == pytest.approx(-4 * (np.cos(np.pi / 5) + np.cos(2 * np.pi / 5)), abs=1e-10)
    assert e0 == pytest.approx(-4.472136, abs=1e-6)


def test_hopping_string_matches_fermion_operators():
    # -t (a0^dag a2 + h.c.) on 3 modes, with the JW convention a_p = Z..Z (X + iY)/2
    n = 3
    a = np.array([[0, 1], [0, 0]])
    z = np.diag([1, -1])
    eye = np.eye(2)

    def annihilate(p):
        ops = [z] * p + [a] + [eye] * (n - p - 1)
        out = ops[0]
        for o in ops[1:]:
            out = np.kron(out, o)
        return out

    a0, a2 = annihilate(0), annihilate(2)
    ref = -0.7 * (a0.conj().T @ a2 + a2.conj().T @ a0)
    got = pauli_operator(hopping_strings(0, 2, 0.7), n).toarray()
    np.testing.assert_allclose(got, ref, atol=1e-14)


def test_single_z_expectation():
    assert expectation(product_state([0, 0, 0]), build_mpo([PauliString(1.0, {0: "Z"})], 3)) == pytest.approx(1)


def test_commuting_z_terms_add():
    psi = product_state([0, 1, 1, 0])
    a = PauliString(0.5, {1: "Z"})
    b = PauliString(-2.0, {0: "Z", 3: "Z"})
    e_sum = expectation(psi, build_mpo([a, b], 4))
    assert e_sum == pytest.approx(expectation(psi, build_mpo([a], 4)) + expectation(psi, build_mpo([b], 4)))
    assert e_sum == pytest.approx(-0.5 - 2.0)


def test_mpo_matches_dense_chain():
    lat = LatticeConfig(4, 1)
    dense = pauli_operator(jordan_wigner_terms(lat), 8).toarray()
    assert np.max(np.abs(hubbard_mpo(lat).to_dense() - dense)) <= 1e-10


@pytest.mark.parametrize("nx,ny", SMALL)
def test_hamiltonian_is_hermitian_and_conserves_number(nx, ny):
    lat = LatticeConfig(nx, ny, t=0.8, u=3.0)
    h = pauli_operator(jordan_wigner_terms(lat), lat.n_qubits).toarray()
    assert np.max(np.abs(h - h.conj().T)) <= 1e-12
    counts = np.array([bin(k).count("1") for k in range(2**lat.n_qubits)])
    comm = h * counts[None, :] - counts[:, None] * h
    assert np.max(np.abs(comm)) <= 1e-10


@given(t=st.floats(0.1, 3.0), u=st.floats(0.0, 8.0))
def test_mpo_dense_agreement_random_couplings(t, u):
    lat = LatticeConfig(2, 2, t=t, u=u)
    dense = pauli_operator(jordan_wigner_terms(lat), 8).toarray()
    assert np.max(np.abs(hubbard_mpo(lat).to_dense() - dense)) <= 1e-10


def test_species_register_is_one_qubit_per_site():
    lat = LatticeConfig(4, 2)
    terms = species_terms(lat)
    assert len(terms) == 2 * len(lat.bonds())
    assert max(q for t in terms for q in t.factors) == lat.n_sites - 1
    assert all(p in ("X", "Y", "Z") for t in terms for p in t.factors.values())


def test_invalid_lattice_rejected():
    with pytest.raises(ValueError):
        LatticeConfig(0, 1)


def test_unknown_pauli_rejected():
    with pytest.raises(ValueError):
        PauliString(1.0, {0: "Q"})
