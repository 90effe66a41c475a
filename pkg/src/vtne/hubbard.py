"""Fermi-Hubbard lattices, their Jordan-Wigner Pauli form, and MPO construction.

Sites are laid on the qubit line in a row-major snake: row 0 left to right,
row 1 right to left, and so on. Each site contributes two adjacent qubits,
spin-down first, so ``(i, j, up)`` always sits directly right of
``(i, j, down)``. Boundaries are open.
"""

from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass, field

import numpy as np

from .mps import MatrixProductOperator
from .tensor import svd_truncate

_PAULI = {
    "I": np.eye(2, dtype=np.complex128),
    "X": np.array([[0, 1], [1, 0]], dtype=np.complex128),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=np.complex128),
    "Z": np.array([[1, 0], [0, -1]], dtype=np.complex128),
}
# raising/lowering pieces: X = P + M, Y = iP - iM, with |1> the occupied state
_LADDER = {
    "P": np.array([[0, 0], [1, 0]], dtype=np.complex128),
    "M": np.array([[0, 1], [0, 0]], dtype=np.complex128),
}
_SPLIT = {"X": (("P", 1.0), ("M", 1.0)), "Y": (("P", 1j), ("M", -1j))}
_LOCAL = {**_PAULI, **_LADDER}


class Spin(str, enum.Enum):
    DOWN = "down"
    UP = "up"


@dataclass(frozen=True)
class LatticeConfig:
    """Rectangular ``nx x ny`` Hubbard lattice with hopping ``t`` and onsite ``u``."""

    nx: int
    ny: int = 1
    t: float = 1.0
    u: float = 2.0

    def __post_init__(self):
        if self.nx < 1 or self.ny < 1:
            raise ValueError("lattice extents must be positive")

    @property
    def n_sites(self) -> int:
        return self.nx * self.ny

    @property
    def n_qubits(self) -> int:
        return 2 * self.n_sites

    @property
    def n_electrons(self) -> int:
        """Electron count at half filling."""
        return self.n_sites

    @property
    def spin_counts(self) -> tuple[int, int]:
        """``(n_up, n_down)`` of the checkerboard reference configuration."""
        n_up = sum(1 for i, j in self.sites() if (i + j) % 2 == 0)
        return n_up, self.n_sites - n_up

    def sites(self) -> list[tuple[int, int]]:
        return [(i, j) for j in range(self.ny) for i in range(self.nx)]

    def site_position(self, i: int, j: int) -> int:
        """Position of site ``(i, j)`` along the snake."""
        if not (0 <= i < self.nx and 0 <= j < self.ny):
            raise ValueError(f"site ({i}, {j}) outside a {self.nx}x{self.ny} lattice")
        return j * self.nx + (i if j % 2 == 0 else self.nx - 1 - i)

    def site_at(self, position: int) -> tuple[int, int]:
        j, k = divmod(position, self.nx)
        return (k if j % 2 == 0 else self.nx - 1 - k), j

    def horizontal_bonds(self, parity: int | None = None) -> list[tuple[tuple[int, int], tuple[int, int]]]:
        """Bonds ``(i, j) - (i + 1, j)``, optionally only those with ``i % 2 == parity``."""
        return [
            ((i, j), (i + 1, j))
            for j in range(self.ny)
            for i in range(self.nx - 1)
            if parity is None or i % 2 == parity
        ]

    def vertical_bonds(self, parity: int | None = None) -> list[tuple[tuple[int, int], tuple[int, int]]]:
        """Bonds ``(i, j) - (i, j + 1)``, optionally only those with ``j % 2 == parity``."""
        return [
            ((i, j), (i, j + 1))
            for j in range(self.ny - 1)
            for i in range(self.nx)
            if parity is None or j % 2 == parity
        ]

    def bonds(self):
        return self.horizontal_bonds() + self.vertical_bonds()


@dataclass(frozen=True)
class QubitLabel:
    i: int
    j: int
    spin: Spin


def qubit_index(label: QubitLabel, lattice: LatticeConfig) -> int:
    pos = lattice.site_position(label.i, label.j)
    return 2 * pos + (1 if Spin(label.spin) is Spin.UP else 0)


def qubit_label(index: int, lattice: LatticeConfig) -> QubitLabel:
    if not 0 <= index < lattice.n_qubits:
        raise ValueError(f"qubit {index} out of range")
    i, j = lattice.site_at(index // 2)
    return QubitLabel(i, j, Spin.UP if index % 2 else Spin.DOWN)


@dataclass(frozen=True)
class PauliString:
    """``coefficient`` times a tensor product of Paulis; identity on unlisted qubits."""

    coefficient: float
    factors: dict[int, str] = field(default_factory=dict)

    def __post_init__(self):
        for q, p in self.factors.items():
            if p not in ("X", "Y", "Z"):
                raise ValueError(f"unknown Pauli {p!r} on qubit {q}")

    @property
    def is_identity(self) -> bool:
        return not self.factors


def hopping_strings(p: int, q: int, t: float) -> list[PauliString]:
    """JW form of ``-t (a_p^dag a_q + a_q^dag a_p)``."""
    if p == q:
        raise ValueError("hopping needs two distinct modes")
    p, q = sorted((p, q))
    between = {k: "Z" for k in range(p + 1, q)}
    return [
        PauliString(-t / 2, {p: "X", **between, q: "X"}),
        PauliString(-t / 2, {p: "Y", **between, q: "Y"}),
    ]


def _merge_identity(terms: list[PauliString]) -> list[PauliString]:
    const = sum(term.coefficient for term in terms if term.is_identity)
    rest = [term for term in terms if not term.is_identity]
    return rest + [PauliString(const)] if const != 0.0 else rest


def jordan_wigner_terms(lattice: LatticeConfig) -> list[PauliString]:
    """Hubbard Hamiltonian as Pauli strings; identity pieces merged into one term."""
    terms: list[PauliString] = []
    for a, b in lattice.bonds():
        for spin in Spin:
            p = qubit_index(QubitLabel(*a, spin), lattice)
            q = qubit_index(QubitLabel(*b, spin), lattice)
            terms += hopping_strings(p, q, lattice.t)
    quarter = lattice.u / 4
    for i, j in lattice.sites():
        dn = qubit_index(QubitLabel(i, j, Spin.DOWN), lattice)
        up = qubit_index(QubitLabel(i, j, Spin.UP), lattice)
        terms += [
            PauliString(quarter),
            PauliString(-quarter, {dn: "Z"}),
            PauliString(-quarter, {up: "Z"}),
            PauliString(quarter, {dn: "Z", up: "Z"}),
        ]
    return _merge_identity(terms)


def species_terms(lattice: LatticeConfig) -> list[PauliString]:
    """Hopping Hamiltonian of one spin species alone.

    The register has one qubit per site, ordered along the same snake.
    """
    terms: list[PauliString] = []
    for a, b in lattice.bonds():
        terms += hopping_strings(lattice.site_position(*a), lattice.site_position(*b), lattice.t)
    return terms


def _compress(tensors: list[np.ndarray], cutoff: float) -> list[np.ndarray]:
    # block-aware SVDs keep every bond index at a definite particle-number change
    n = len(tensors)
    ts = list(tensors)
    for i in range(n - 1):
        l, o, p, r = ts[i].shape
        f = svd_truncate(ts[i].reshape(l * o * p, r), cap=l * o * p * r, cutoff=0.0)
        ts[i] = f.u.reshape(l, o, p, f.rank)
        ts[i + 1] = np.tensordot(f.s[:, None] * f.v, ts[i + 1], axes=(1, 0))
    for i in range(n - 1, 0, -1):
        l, o, p, r = ts[i].shape
        f = svd_truncate(ts[i].reshape(l, o * p * r), cap=l * o * p * r, cutoff=cutoff)
        ts[i] = f.v.reshape(f.rank, o, p, r)
        ts[i - 1] = np.tensordot(ts[i - 1], f.u * f.s[None, :], axes=(3, 0))
    return ts


def _ladder_terms(ops: list[PauliString]) -> list[tuple[complex, dict[int, str]]]:
    """Rewrite X and Y factors as raising/lowering pieces and merge equal strings.

    Each resulting string changes the particle number by a fixed amount, and
    the pieces that do not conserve it cancel exactly for hopping pairs.
    """
    merged: dict[tuple, complex] = {}
    for term in ops:
        sites = sorted(term.factors)
        choices = [_SPLIT.get(term.factors[q], ((term.factors[q], 1.0),)) for q in sites]
        for combo in itertools.product(*choices):
            key = tuple((q, name) for q, (name, _) in zip(sites, combo))
            coef = term.coefficient * np.prod([c for _, c in combo])
            merged[key] = merged.get(key, 0.0) + coef
    scale = max((abs(c) for c in merged.values()), default=0.0)
    return [(c, dict(key)) for key, c in merged.items() if abs(c) > 1e-15 * scale]


def build_mpo(terms: list[PauliString], n_qubits: int, cutoff: float = 1e-12) -> MatrixProductOperator:
    """Sum of Pauli strings as an MPO: direct sum of rank-1 terms, then compression.

    Identity terms become the MPO ``offset``.
    """
    offset = 0.0
    ops = []
    for term in terms:
        for q in term.factors:
            if not 0 <= q < n_qubits:
                raise ValueError(f"term acts on qubit {q}, register has {n_qubits}")
        if term.is_identity:
            offset += term.coefficient
        elif term.coefficient != 0.0:
            ops.append(term)
    if not ops:
        zero = [np.zeros((1, 2, 2, 1), dtype=np.complex128) for _ in range(n_qubits)]
        return MatrixProductOperator(tuple(zero), offset)
    strings = _ladder_terms(ops)
    k = len(strings)
    tensors = []
    for site in range(n_qubits):
        l = 1 if site == 0 else k
        r = 1 if site == n_qubits - 1 else k
        w = np.zeros((l, 2, 2, r), dtype=np.complex128)
        for a, (coef, factors) in enumerate(strings):
            mat = _LOCAL[factors.get(site, "I")]
            if site == 0:
                mat = coef * mat
            w[0 if l == 1 else a, :, :, 0 if r == 1 else a] += mat
        tensors.append(w)
    if n_qubits > 1:
        tensors = _compress(tensors, cutoff)
    return MatrixProductOperator(tuple(tensors), offset)


def number_mpo(n_qubits: int) -> MatrixProductOperator:
    """Total occupation ``sum_i (I - Z_i) / 2``."""
    terms = [PauliString(-0.5, {q: "Z"}) for q in range(n_qubits)]
    terms.append(PauliString(n_qubits / 2))
    return build_mpo(terms, n_qubits)


def hubbard_mpo(lattice: LatticeConfig) -> MatrixProductOperator:
    return build_mpo(jordan_wigner_terms(lattice), lattice.n_qubits)
