"""Exact references for small registers.

State-vector simulation of circuits, sparse Pauli-sum Hamiltonians, lowest
eigenpairs by Lanczos (scipy ``eigsh``), fidelities, and the CNOT-count bound
for compiling an MPS into a circuit. Basis ordering matches :mod:`vtne.mps`:
qubit 0 is the most significant bit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .ansatz import Circuit, GateKind, gate_derivative, gate_matrix
from .errors import CapacityError, NumericalIntegrityError
from .hubbard import PauliString
from .mps import MatrixProductState, to_statevector

MAX_SV_QUBITS = 20
MAX_DENSE_H_QUBITS = 16


def _check_sv(n: int) -> None:
    if n > MAX_SV_QUBITS:
        raise CapacityError(f"state-vector simulation limited to {MAX_SV_QUBITS} qubits, got {n}")


def basis_state(bits: Sequence[int]) -> np.ndarray:
    _check_sv(len(bits))
    vec = np.zeros(2 ** len(bits), dtype=np.complex128)
    vec[int("".join(str(int(b)) for b in bits), 2)] = 1.0
    return vec


def apply_gate(vec: np.ndarray, gate: np.ndarray, sites: Sequence[int], n: int) -> np.ndarray:
    """Apply a one- or two-qubit gate on adjacent ``sites`` to a state vector.

    Loops over the gate's nonzero entries, which is much faster than a batched
    matmul for the sparse NP, FSWAP and Rz matrices.
    """
    q = sites[0]
    d = gate.shape[0]
    v = vec.reshape(2**q, d, -1)
    out = np.zeros_like(v)
    for i in range(d):
        for j in np.flatnonzero(gate[i]):
            c = gate[i, j]
            if c == 1:
                out[:, i] += v[:, j]
            else:
                out[:, i] += c * v[:, j]
    return out.reshape(-1)


def statevector_simulate(c: Circuit, theta) -> np.ndarray:
    _check_sv(c.n_qubits)
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (c.n_params,):
        raise ValueError(f"expected {c.n_params} parameters, got {theta.shape}")
    vec = basis_state(c.initial_bits)
    for g in c.gates:
        vec = apply_gate(vec, gate_matrix(g, theta), g.sites, c.n_qubits)
    return vec


def pauli_operator(terms: Sequence[PauliString], n_qubits: int) -> sp.csr_matrix:
    """Sparse matrix of a Pauli sum (identity terms included)."""
    if n_qubits > MAX_DENSE_H_QUBITS:
        raise CapacityError(f"explicit Hamiltonian limited to {MAX_DENSE_H_QUBITS} qubits, got {n_qubits}")
    dim = 2**n_qubits
    cols = np.arange(dim, dtype=np.int64)
    rows_all, cols_all, vals_all = [], [], []
    for term in terms:
        xmask = zmask = 0
        n_y = 0
        for q, p in term.factors.items():
            bit = 1 << (n_qubits - 1 - q)
            if p in ("X", "Y"):
                xmask |= bit
            if p in ("Z", "Y"):
                zmask |= bit
            n_y += p == "Y"
        signs = 1 - 2 * (np.bitwise_count(cols & zmask) & 1).astype(np.int8)
        rows_all.append(cols ^ xmask)
        cols_all.append(cols)
        vals_all.append(term.coefficient * (1j**n_y) * signs)
    mat = sp.coo_matrix(
        (np.concatenate(vals_all), (np.concatenate(rows_all), np.concatenate(cols_all))),
        shape=(dim, dim),
        dtype=np.complex128,
    )
    return mat.tocsr()


def exact_energy(c: Circuit, theta, h) -> float:
    """``<psi(theta)|H|psi(theta)>`` for a sparse or dense ``h``."""
    vec = statevector_simulate(c, theta)
    val = np.vdot(vec, h @ vec)
    if abs(val.imag) > 1e-9 * max(1.0, abs(val.real)):
        raise NumericalIntegrityError(f"energy has imaginary part {val.imag:.3e}")
    return float(val.real)


class SectorKernel:
    """Number-preserving gates applied within a fixed-occupation subspace.

    Amplitudes are stored only for basis states with ``n_particles`` ones,
    ordered by full-register index. Every circuit gate here conserves the
    occupation, so the whole simulation stays inside the subspace.
    """

    def __init__(self, n_qubits: int, n_particles: int):
        self.n_qubits = n_qubits
        self.idx = sector_indices(n_qubits, n_particles=n_particles)
        self._pairs: dict[int, tuple[np.ndarray, ...]] = {}
        self._occ: dict[int, np.ndarray] = {}

    def _bit(self, q: int) -> np.ndarray:
        return (self.idx >> (self.n_qubits - 1 - q)) & 1

    def pair_maps(self, k: int) -> tuple[np.ndarray, ...]:
        """Sector positions with bits ``(k, k+1)`` equal to 00, 01, 10 (partner of 01), 11."""
        if k not in self._pairs:
            a, b = self._bit(k), self._bit(k + 1)
            i00 = np.flatnonzero((a == 0) & (b == 0))
            i01 = np.flatnonzero((a == 0) & (b == 1))
            i11 = np.flatnonzero((a == 1) & (b == 1))
            flip = (1 << (self.n_qubits - 1 - k)) | (1 << (self.n_qubits - 2 - k))
            i10 = np.searchsorted(self.idx, self.idx[i01] ^ flip)
            self._pairs[k] = (i00, i01, i10, i11)
        return self._pairs[k]

    def occupation(self, q: int) -> np.ndarray:
        if q not in self._occ:
            self._occ[q] = self._bit(q).astype(bool)
        return self._occ[q]

    def apply(self, vec: np.ndarray, gate: np.ndarray, sites: Sequence[int]) -> np.ndarray:
        if len(sites) == 1:
            if gate[0, 1] != 0 or gate[1, 0] != 0:
                raise ValueError("one-qubit gate does not conserve occupation")
            return np.where(self.occupation(sites[0]), gate[1, 1], gate[0, 0]) * vec
        mask = np.ones((4, 4), dtype=bool)
        mask[0, 0] = mask[3, 3] = False
        mask[1:3, 1:3] = False
        if np.any(gate[mask] != 0):
            raise ValueError("two-qubit gate does not conserve occupation")
        i00, i01, i10, i11 = self.pair_maps(sites[0])
        out = np.empty_like(vec)
        v01, v10 = vec[i01], vec[i10]
        out[i00] = gate[0, 0] * vec[i00]
        out[i01] = gate[1, 1] * v01 + gate[1, 2] * v10
        out[i10] = gate[2, 1] * v01 + gate[2, 2] * v10
        out[i11] = gate[3, 3] * vec[i11]
        return out

    def basis(self, bits: Sequence[int]) -> np.ndarray:
        full = int("".join(str(int(b)) for b in bits), 2)
        pos = int(np.searchsorted(self.idx, full))
        if pos >= self.idx.size or self.idx[pos] != full:
            raise ValueError("basis state lies outside the sector")
        vec = np.zeros(self.idx.size, dtype=np.complex128)
        vec[pos] = 1.0
        return vec

    def embed(self, vec: np.ndarray) -> np.ndarray:
        full = np.zeros(2**self.n_qubits, dtype=np.complex128)
        full[self.idx] = vec
        return full


class ExactObjective:
    """``theta -> (E, grad)`` of the exact circuit energy, by an adjoint sweep.

    ``h`` is the full-register sparse Hamiltonian; it is restricted once to the
    circuit's occupation sector.
    """

    def __init__(self, c: Circuit, h):
        _check_sv(c.n_qubits)
        self.circuit = c
        self.kernel = SectorKernel(c.n_qubits, c.n_electrons)
        idx = self.kernel.idx
        self.h = sp.csr_matrix(h)[idx][:, idx]
        self.psi0 = self.kernel.basis(c.initial_bits)

    def state(self, theta) -> np.ndarray:
        vec = self.psi0
        for g in self.circuit.gates:
            vec = self.kernel.apply(vec, gate_matrix(g, theta), g.sites)
        return vec

    def energy(self, theta) -> float:
        vec = self.state(np.asarray(theta, dtype=float))
        return float(np.vdot(vec, self.h @ vec).real)

    def __call__(self, theta) -> tuple[float, np.ndarray]:
        theta = np.asarray(theta, dtype=float)
        c, kern = self.circuit, self.kernel
        if theta.shape != (c.n_params,):
            raise ValueError(f"expected {c.n_params} parameters, got {theta.shape}")
        psi = self.state(theta)
        lam = self.h @ psi
        energy = float(np.vdot(psi, lam).real)
        grad = np.zeros(c.n_params)
        for g in reversed(c.gates):
            u_dag = gate_matrix(g, theta).conj().T
            psi = kern.apply(psi, u_dag, g.sites)
            if g.slots:
                params = [theta[s] for s in g.slots]
                for slot, du in zip(g.slots, gate_derivative(g, params)):
                    grad[slot] = 2.0 * np.vdot(lam, kern.apply(psi, du, g.sites)).real
            lam = kern.apply(lam, u_dag, g.sites)
        if not np.all(np.isfinite(grad)):
            raise NumericalIntegrityError("gradient contains NaN or Inf")
        return energy, grad


def exact_energy_and_gradient(c: Circuit, theta, h) -> tuple[float, np.ndarray]:
    """Exact energy and its gradient by a reverse sweep over the state vector."""
    return ExactObjective(c, h)(theta)


def sector_indices(n_qubits: int, sector: tuple[int, int] | None = None, n_particles: int | None = None) -> np.ndarray:
    """Basis indices with fixed occupations.

    ``sector = (n_up, n_down)`` counts odd (up) and even (down) qubits of the
    interleaved Hubbard register separately; ``n_particles`` fixes the total.
    """
    idx = np.arange(2**n_qubits, dtype=np.int64)
    keep = np.ones(idx.size, dtype=bool)
    if sector is not None:
        up_mask = sum(1 << (n_qubits - 1 - q) for q in range(1, n_qubits, 2))
        dn_mask = sum(1 << (n_qubits - 1 - q) for q in range(0, n_qubits, 2))
        keep &= np.bitwise_count(idx & up_mask) == sector[0]
        keep &= np.bitwise_count(idx & dn_mask) == sector[1]
    if n_particles is not None:
        keep &= np.bitwise_count(idx) == n_particles
    return idx[keep]


def exact_ground(
    terms: Sequence[PauliString],
    n_qubits: int,
    sector: tuple[int, int] | None = None,
    n_particles: int | None = None,
    tol: float = 1e-8,
) -> tuple[float, np.ndarray]:
    """Lowest eigenpair ``(E0, psi0)``, optionally within a particle-number sector.

    ``psi0`` is returned on the full register.
    """
    h = pauli_operator(terms, n_qubits)
    idx = sector_indices(n_qubits, sector, n_particles)
    if idx.size == 0:
        raise ValueError("empty sector")
    sub = h[idx][:, idx]
    if idx.size <= 400:
        w, v = np.linalg.eigh(sub.toarray())
        e0, vec = float(w[0]), v[:, 0]
    else:
        rng = np.random.default_rng(0)
        v0 = rng.standard_normal(idx.size) + 0j
        w, v = spla.eigsh(sub, k=1, which="SA", v0=v0, tol=1e-12, maxiter=20 * idx.size)
        e0, vec = float(w[0]), v[:, 0]
    vec = vec / np.linalg.norm(vec)
    residual = float(np.linalg.norm(sub @ vec - e0 * vec))
    if residual > tol:
        raise NumericalIntegrityError(f"eigensolver did not converge: residual {residual:.3e}")
    full = np.zeros(2**n_qubits, dtype=np.complex128)
    full[idx] = vec
    return e0, full


def align_phase(vec: np.ndarray) -> np.ndarray:
    """Rotate the largest-magnitude amplitude onto the positive real axis."""
    k = int(np.argmax(np.abs(vec)))
    if vec[k] == 0:
        return vec
    return vec * (abs(vec[k]) / vec[k])


def infidelity(psi: MatrixProductState | np.ndarray, ref: np.ndarray) -> float:
    """``1 - |<ref|psi>|^2`` after normalizing both states."""
    vec = to_statevector(psi) if isinstance(psi, MatrixProductState) else np.asarray(psi)
    ref = np.asarray(ref)
    if vec.shape != ref.shape:
        raise ValueError("state sizes differ")
    ov = np.vdot(ref, vec) / (np.linalg.norm(ref) * np.linalg.norm(vec))
    return float(max(0.0, 1.0 - abs(ov) ** 2))


@dataclass(frozen=True)
class CnotBoundResult:
    chi: int
    delta: float
    bound: float


def cnot_upper_bound(chi: int) -> CnotBoundResult:
    """``23/16 D^2 chi^2 - 3 D chi + 4/3`` with ``D = 2^(ceil(log2 2chi) - log2 2chi)``.

    The polynomial is evaluated exactly as written. Its 23/16 leading
    coefficient is lower than the quantum Shannon decomposition count of
    :func:`qsd_cnot_count`, which gives 7660 (not 5697.33) at ``chi = 64``.
    """
    if chi < 1:
        raise ValueError("chi must be >= 1")
    log2chi = math.log2(2 * chi)
    delta = 2.0 ** (math.ceil(log2chi - 1e-12) - log2chi)
    bound = 23 / 16 * delta**2 * chi**2 - 3 * delta * chi + 4 / 3
    return CnotBoundResult(chi, delta, bound)


def qsd_cnot_count(n_qubits: int) -> float:
    """CNOTs for a generic ``n``-qubit unitary via quantum Shannon decomposition."""
    return 23 / 48 * 4**n_qubits - 1.5 * 2**n_qubits + 4 / 3
