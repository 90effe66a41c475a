import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from vtne.ansatz import build_np_ansatz, circuit_to_mps
from vtne.errors import CapacityError, NumericalIntegrityError
from vtne.gradient import energy_chi
from vtne.hubbard import LatticeConfig, hubbard_mpo, jordan_wigner_terms
from vtne.mps import to_statevector
from vtne.oracle import (
    ExactObjective,
    SectorKernel,
    align_phase,
    basis_state,
    cnot_upper_bound,
    exact_energy,
    exact_ground,
    infidelity,
    pauli_operator,
    qsd_cnot_count,
    sector_indices,
    statevector_simulate,
)

E_2SITE = 1 - math.sqrt(5)


def ham(nx, ny, u=2.0):
    lat = LatticeConfig(nx, ny, u=u)
    return lat, jordan_wigner_terms(lat)


# -- state vectors ---------------------------------------------------------------


def test_statevector_at_zero_is_initial_state():
    c = build_np_ansatz(LatticeConfig(4, 1), 2)
    assert np.allclose(statevector_simulate(c, np.zeros(c.n_params)), basis_state(c.initial_bits))


def test_statevector_is_normalized(rng):
    c = build_np_ansatz(LatticeConfig(4, 1), 3)
    vec = statevector_simulate(c, rng.normal(size=c.n_params))
    assert abs(np.linalg.norm(vec) - 1) < 1e-12


@pytest.mark.parametrize("nx,ny,layers", [(4, 1, 4), (2, 2, 3), (3, 2, 1), (2, 3, 1)])
def test_oracle_mps_equivalence(nx, ny, layers):
    c = build_np_ansatz(LatticeConfig(nx, ny), layers)
    rng = np.random.default_rng(nx * 10 + ny)
    for _ in range(20):
        theta = rng.uniform(-np.pi, np.pi, c.n_params)
        a = align_phase(statevector_simulate(c, theta))
        b = align_phase(to_statevector(circuit_to_mps(c, theta, 2 ** (c.n_qubits // 2))))
        assert np.abs(a - b).max() < 1e-8


def test_capacity_limit():
    c = build_np_ansatz(LatticeConfig(11, 1), 1)
    with pytest.raises(CapacityError):
        statevector_simulate(c, np.zeros(c.n_params))


def test_exact_energy_product_state_is_zero():
    lat, terms = ham(4, 1)
    c = build_np_ansatz(lat, 1)
    assert exact_energy(c, np.zeros(c.n_params), pauli_operator(terms, 8)) == pytest.approx(0.0, abs=1e-12)


def test_exact_energy_matches_full_cap_mps(rng):
    lat, terms = ham(2, 2)
    c = build_np_ansatz(lat, 2)
    theta = rng.normal(size=c.n_params)
    e = exact_energy(c, theta, pauli_operator(terms, 8))
    assert abs(e - energy_chi(c, theta, hubbard_mpo(lat), 16)) < 1e-8


# -- sector kernel ---------------------------------------------------------------


def test_sector_indices_counts():
    assert sector_indices(8, n_particles=4).size == math.comb(8, 4)
    assert sector_indices(8, sector=(2, 2)).size == math.comb(4, 2) ** 2


def test_sector_kernel_matches_full_register(rng):
    lat, terms = ham(2, 2)
    c = build_np_ansatz(lat, 2)
    theta = rng.normal(size=c.n_params)
    obj = ExactObjective(c, pauli_operator(terms, 8))
    assert np.allclose(obj.kernel.embed(obj.state(theta)), statevector_simulate(c, theta), atol=1e-12)


def test_sector_kernel_rejects_non_conserving_gate():
    k = SectorKernel(4, 2)
    vec = k.basis([1, 0, 1, 0])
    with pytest.raises(ValueError):
        k.apply(vec, np.array([[0, 1], [1, 0]]), [0])
    with pytest.raises(ValueError):
        k.basis([1, 1, 1, 0])


def test_exact_objective_gradient_matches_finite_differences(rng):
    lat, terms = ham(4, 1)
    c = build_np_ansatz(lat, 2)
    obj = ExactObjective(c, pauli_operator(terms, 8))
    theta = rng.normal(size=c.n_params)
    _, grad = obj(theta)
    step = 1e-5
    for k in rng.choice(c.n_params, 12, replace=False):
        d = np.zeros(c.n_params)
        d[k] = step
        fd = (obj.energy(theta + d) - obj.energy(theta - d)) / (2 * step)
        assert abs(grad[k] - fd) <= 1e-5 * max(abs(fd), 1e-3)


# -- ground states -------------------------------------------------------------


def test_two_site_ground_energy():
    lat, terms = ham(2, 1)
    e, vec = exact_ground(terms, 4, sector=(1, 1))
    assert e == pytest.approx(E_2SITE, abs=1e-10)
    assert abs(np.linalg.norm(vec) - 1) < 1e-12


def test_free_fermion_chain():
    lat, terms = ham(4, 1, u=0.0)
    e, _ = exact_ground(terms, 8, sector=(2, 2))
    assert e == pytest.approx(-4.472136, abs=1e-6)


@pytest.mark.parametrize("nx,ny,ref", [(4, 1, -2.8759428090050583), (2, 2, -2.8284271247461885)])
def test_frozen_ground_energies(nx, ny, ref):
    lat, terms = ham(nx, ny)
    e, _ = exact_ground(terms, lat.n_qubits, n_particles=lat.n_sites)
    assert e == pytest.approx(ref, abs=1e-10)


def test_residual_small_on_lanczos_path():
    lat, terms = ham(6, 1)
    e, vec = exact_ground(terms, 12, n_particles=6)
    h = pauli_operator(terms, 12)
    assert np.linalg.norm(h @ vec - e * vec) <= 1e-8


def test_sector_restriction_agrees_with_global_ground():
    lat, terms = ham(2, 1)
    e_sector, _ = exact_ground(terms, 4, sector=(1, 1))
    e_all = np.linalg.eigvalsh(pauli_operator(terms, 4).toarray())[0]
    assert e_sector == pytest.approx(e_all, abs=1e-10)


def test_global_ground_is_lowest_sector_ground():
    # without a chemical potential the 4x1 global ground is not half filled
    lat, terms = ham(4, 1)
    e_all = np.linalg.eigvalsh(pauli_operator(terms, 8).toarray())[0]
    sectors = [(a, b) for a in range(5) for b in range(5)]
    e_min = min(exact_ground(terms, 8, sector=s)[0] for s in sectors)
    assert e_min == pytest.approx(e_all, abs=1e-10)
    assert exact_ground(terms, 8, sector=(2, 2))[0] > e_all + 0.1


def test_empty_sector_rejected():
    lat, terms = ham(2, 1)
    with pytest.raises(ValueError):
        exact_ground(terms, 4, n_particles=5)


def test_non_convergence_reports_residual():
    lat, terms = ham(2, 1)
    with pytest.raises(NumericalIntegrityError, match="residual"):
        exact_ground(terms, 4, sector=(1, 1), tol=-1.0)


# -- fidelity ------------------------------------------------------------------


def test_infidelity_basic(rng):
    v = rng.normal(size=16) + 1j * rng.normal(size=16)
    v /= np.linalg.norm(v)
    assert infidelity(v, v) == pytest.approx(0, abs=1e-14)
    assert infidelity(basis_state([0, 1]), basis_state([1, 0])) == pytest.approx(1)
    assert infidelity(np.exp(0.4j) * v, v) == pytest.approx(0, abs=1e-14)
    with pytest.raises(ValueError):
        infidelity(v, v[:8])


def test_infidelity_accepts_mps(rng):
    c = build_np_ansatz(LatticeConfig(2, 1), 1)
    theta = rng.normal(size=c.n_params)
    psi = circuit_to_mps(c, theta, 4)
    assert infidelity(psi, statevector_simulate(c, theta)) == pytest.approx(0, abs=1e-12)


# -- CNOT bound ------------------------------------------------------------------


def test_bound_chi_64():
    r = cnot_upper_bound(64)
    assert r.delta == 1.0
    assert r.bound == pytest.approx(5888 - 192 + 4 / 3, abs=1e-9)


def test_bound_chi_2():
    r = cnot_upper_bound(2)
    assert r.delta == 1.0
    assert r.bound == pytest.approx(5.75 - 6 + 4 / 3, abs=1e-12)


def test_qsd_count_gives_7660_at_seven_qubits():
    assert qsd_cnot_count(7) == pytest.approx(7660, abs=1e-9)


@given(st.integers(1, 4096))
def test_bound_delta_range(chi):
    r = cnot_upper_bound(chi)
    assert 1 <= r.delta < 2
    assert r.bound == 23 / 16 * r.delta**2 * chi**2 - 3 * r.delta * chi + 4 / 3
    if (2 * chi) & (2 * chi - 1) == 0:
        assert r.delta == 1.0


def test_bound_rejects_zero():
    with pytest.raises(ValueError):
        cnot_upper_bound(0)
