import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import random_state, random_unitary
from vtne.errors import ShapeError
from vtne.hubbard import LatticeConfig, PauliString, build_mpo, hubbard_mpo, jordan_wigner_terms, number_mpo
from vtne.mps import (
    MatrixProductOperator,
    apply_mpo,
    apply_one_qubit_gate,
    apply_two_qubit_gate,
    expectation,
    from_statevector,
    inner_product,
    max_bond_dim,
    normalize,
    product_state,
    to_statevector,
)
from vtne.ansatz import fswap, rz
from vtne.oracle import apply_gate, basis_state, pauli_operator

H = np.array([[1, 1], [1, -1]]) / np.sqrt(2)
CZ = np.diag([1, 1, 1, -1]).astype(complex)


def identity_mpo(n):
    return build_mpo([PauliString(1.0)], n)


def test_product_state_basics():
    psi = product_state([0, 0])
    assert abs(inner_product(psi, psi) - 1) < 1e-14
    assert to_statevector(psi)[0] == 1
    assert max_bond_dim(product_state([1, 0, 1, 1, 0])) == 1


def test_product_state_counts_particles():
    assert expectation(product_state([1, 0, 1, 0]), number_mpo(4)) == pytest.approx(2, abs=1e-12)


def test_qubit_zero_is_most_significant():
    np.testing.assert_array_equal(to_statevector(product_state([1, 0])), [0, 0, 1, 0])


def test_product_state_rejects_non_bits():
    with pytest.raises(ValueError):
        product_state([0, 2])


def test_identity_gate_leaves_state(rng):
    psi = from_statevector(random_state(rng, 4))
    out = apply_two_qubit_gate(psi, np.eye(4), 1, cap=16)
    np.testing.assert_allclose(to_statevector(out), to_statevector(psi), atol=1e-12)


def test_fswap_sign_on_double_occupancy():
    out = apply_two_qubit_gate(product_state([1, 1]), fswap(), 0, cap=4)
    assert to_statevector(out)[3] == pytest.approx(-1)


def test_cz_on_plus_states_matches_oracle():
    psi = product_state([0, 0])
    psi = apply_one_qubit_gate(apply_one_qubit_gate(psi, H, 0), H, 1)
    psi = apply_two_qubit_gate(psi, CZ, 0, cap=2)
    assert max_bond_dim(psi) == 2
    ref = apply_gate(np.full(4, 0.5, dtype=complex), CZ, (0,), 2)
    np.testing.assert_allclose(to_statevector(psi), ref, atol=1e-12)


def test_rz_keeps_probabilities():
    psi = apply_one_qubit_gate(product_state([0]), rz(0.7), 0)
    np.testing.assert_allclose(np.abs(to_statevector(psi)) ** 2, [1, 0], atol=1e-14)


def test_single_qubit_unitary_preserves_norm(rng):
    psi = from_statevector(random_state(rng, 3))
    out = apply_one_qubit_gate(psi, random_unitary(rng, 2), 1)
    assert abs(np.linalg.norm(to_statevector(out)) - 1) < 1e-12


def test_x_flips_single_qubit():
    psi = apply_one_qubit_gate(product_state([0]), np.array([[0, 1], [1, 0]]), 0)
    assert to_statevector(psi)[1] == 1


def test_non_unitary_gate_rejected():
    with pytest.raises(ValueError, match="unitary"):
        apply_two_qubit_gate(product_state([0, 0]), 2 * np.eye(4), 0, cap=4)


def test_wrong_gate_shape_rejected():
    with pytest.raises(ShapeError):
        apply_two_qubit_gate(product_state([0, 0]), np.eye(2), 0, cap=4)


def test_inner_product_of_orthogonal_basis_states():
    assert abs(inner_product(product_state([0, 1, 1]), product_state([1, 1, 1]))) == 0


def test_inner_product_matches_vectors(rng):
    a, b = random_state(rng, 6), random_state(rng, 6)
    val = inner_product(from_statevector(a), from_statevector(b))
    assert abs(val - np.vdot(a, b)) < 1e-10


def test_identity_mpo_is_identity(rng):
    psi = from_statevector(random_state(rng, 5))
    out = apply_mpo(identity_mpo(5), psi, cap=64)
    np.testing.assert_allclose(to_statevector(out), to_statevector(psi), atol=1e-10)


def test_z_on_first_qubit_flips_sign():
    psi = product_state([1, 0, 1])
    out = apply_mpo(build_mpo([PauliString(1.0, {0: "Z"})], 3), psi, cap=4)
    np.testing.assert_allclose(to_statevector(out), -to_statevector(psi), atol=1e-14)


def test_hubbard_mpo_on_random_state_matches_dense(rng):
    lat = LatticeConfig(4, 1)
    v = random_state(rng, 8)
    out = apply_mpo(hubbard_mpo(lat), from_statevector(v), cap=256)
    ref = pauli_operator(jordan_wigner_terms(lat), 8) @ v
    assert np.max(np.abs(to_statevector(out) - ref)) < 1e-8


def test_number_on_checkerboard():
    assert expectation(product_state([0, 1, 1, 0, 0, 1, 1, 0]), number_mpo(8)) == pytest.approx(4, abs=1e-12)


def test_two_site_expectation_matches_dense():
    lat = LatticeConfig(2, 1)

    h = pauli_operator(jordan_wigner_terms(lat), 4)
    v = basis_state([0, 1, 0, 1])
    e = expectation(product_state([0, 1, 0, 1]), hubbard_mpo(lat))
    assert abs(e - np.vdot(v, h @ v).real) < 1e-10
    assert e == pytest.approx(0.0, abs=1e-12)


def test_identity_expectation_is_one(rng):
    psi = from_statevector(random_state(rng, 4))
    assert expectation(psi, identity_mpo(4)) == pytest.approx(1, abs=1e-12)


def test_expectation_divides_by_norm(rng):
    psi = from_statevector(2.0 * random_state(rng, 3))
    assert expectation(psi, identity_mpo(3)) == pytest.approx(1, abs=1e-12)


def test_normalize(rng):
    psi = from_statevector(3.0 * random_state(rng, 5))
    assert inner_product(normalize(psi), normalize(psi)).real == pytest.approx(1, abs=1e-10)


def test_random_circuit_matches_oracle(rng):
    n = 6
    psi = product_state([0] * n)
    vec = basis_state([0] * n)
    for _ in range(30):
        k = int(rng.integers(n - 1))
        u = random_unitary(rng, 4)
        psi = apply_two_qubit_gate(psi, u, k, cap=8)
        vec = apply_gate(vec, u, (k, k + 1), n)
    assert np.max(np.abs(to_statevector(psi) - vec)) < 1e-10
    assert abs(np.linalg.norm(to_statevector(psi)) - 1) < 1e-10


@given(seed=st.integers(0, 2**20), n_gates=st.integers(0, 8), cap=st.integers(1, 8))
def test_bond_dimension_bounds(seed, n_gates, cap):
    r = np.random.default_rng(seed)
    n = 5
    psi = product_state([0] * n)
    for _ in range(n_gates):
        psi = apply_two_qubit_gate(psi, random_unitary(r, 4), int(r.integers(n - 1)), cap=cap)
    assert max_bond_dim(psi) <= min(cap, 2**n_gates)
    if cap >= 4:
        assert abs(inner_product(psi, psi).real - 1) < 1e-10


def test_mpo_shape_checked():
    with pytest.raises(ShapeError):
        MatrixProductOperator((np.zeros((1, 2, 2, 2)), np.zeros((3, 2, 2, 1))))
