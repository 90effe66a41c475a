"""Matrix product states and operators on qubit chains.

Site tensors of a state have index order ``(left, physical, right)``; operator
tensors ``(left, out, in, right)``. Qubit 0 is the most significant bit of a
computational-basis index, both here and in :mod:`vtne.oracle`.

States are treated as immutable values: every public operation returns a new
:class:`MatrixProductState`. The underscore-prefixed helpers work in place on a
plain list of tensors and are what the circuit contraction and gradient sweep
use in their inner loops.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import CapacityError, NumericalIntegrityError, ShapeError
from .tensor import DEFAULT_CUTOFF, block_qr, svd_truncate

MAX_DENSE_QUBITS = 20
UNITARITY_TOL = 1e-8


@dataclass(frozen=True, eq=False)
class MatrixProductState:
    """Open-boundary MPS.

    ``center`` is the orthogonality center: every tensor left of it is
    left-isometric, every tensor right of it right-isometric. ``None`` means no
    canonical form is known. ``discarded_weight`` accumulates the relative
    discarded weight of every truncation that produced this state.
    """

    tensors: tuple[np.ndarray, ...]
    center: int | None = None
    discarded_weight: float = 0.0

    def __post_init__(self):
        ts = self.tensors
        if not ts:
            raise ValueError("an MPS needs at least one site")
        if ts[0].shape[0] != 1 or ts[-1].shape[2] != 1:
            raise ShapeError("boundary bonds must have dimension 1")
        for a, b in zip(ts[:-1], ts[1:]):
            if a.shape[2] != b.shape[0]:
                raise ShapeError(f"bond mismatch {a.shape} / {b.shape}")

    @property
    def n_qubits(self) -> int:
        return len(self.tensors)

    @property
    def bond_dims(self) -> list[int]:
        return [t.shape[2] for t in self.tensors[:-1]]

    @property
    def chi_max(self) -> int:
        """Bond dimension at which no state of this size needs truncation."""
        return 2 ** (self.n_qubits // 2)


@dataclass(frozen=True, eq=False)
class MatrixProductOperator:
    """Open-boundary MPO plus a scalar ``offset`` times the identity."""

    tensors: tuple[np.ndarray, ...]
    offset: float = 0.0

    def __post_init__(self):
        ts = self.tensors
        if not ts:
            raise ValueError("an MPO needs at least one site")
        if ts[0].shape[0] != 1 or ts[-1].shape[3] != 1:
            raise ShapeError("boundary bonds must have dimension 1")
        for a, b in zip(ts[:-1], ts[1:]):
            if a.shape[3] != b.shape[0]:
                raise ShapeError(f"bond mismatch {a.shape} / {b.shape}")

    @property
    def n_qubits(self) -> int:
        return len(self.tensors)

    @property
    def bond_dims(self) -> list[int]:
        return [t.shape[3] for t in self.tensors[:-1]]

    def without_offset(self) -> "MatrixProductOperator":
        return MatrixProductOperator(self.tensors, 0.0)

    def folded(self) -> tuple[np.ndarray, ...]:
        """Site tensors with ``offset * I`` summed in (bond dimension grows by one)."""
        if self.offset == 0.0:
            return self.tensors
        eye = np.eye(2, dtype=np.complex128)
        n = len(self.tensors)
        if n == 1:
            return (self.tensors[0] + self.offset * eye.reshape(1, 2, 2, 1),)
        out = []
        for i, w in enumerate(self.tensors):
            l, _, _, r = w.shape
            if i == 0:
                new = np.zeros((1, 2, 2, r + 1), dtype=np.complex128)
                new[..., :r] = w
                new[0, :, :, r] = self.offset * eye
            elif i == n - 1:
                new = np.zeros((l + 1, 2, 2, 1), dtype=np.complex128)
                new[:l] = w
                new[l, :, :, 0] = eye
            else:
                new = np.zeros((l + 1, 2, 2, r + 1), dtype=np.complex128)
                new[:l, :, :, :r] = w
                new[l, :, :, r] = eye
            out.append(new)
        return tuple(out)

    def to_dense(self) -> np.ndarray:
        """Full ``2^n x 2^n`` matrix (offset included); small systems only."""
        n = self.n_qubits
        if n > 12:
            raise CapacityError(f"dense MPO limited to 12 qubits, got {n}")
        acc = self.tensors[0][0]  # (out, in, r)
        for w in self.tensors[1:]:
            acc = np.tensordot(acc, w, axes=(2, 0))  # (O, I, o, i, r)
            o_, i_, _, _, r = acc.shape
            acc = acc.transpose(0, 2, 1, 3, 4).reshape(o_ * 2, i_ * 2, r)
        mat = acc[:, :, 0]
        return mat + self.offset * np.eye(2**n)


def check_unitary(gate: np.ndarray, tol: float = UNITARITY_TOL) -> None:
    gate = np.asarray(gate)
    d = gate.shape[0]
    if gate.shape != (d, d) or np.linalg.norm(gate.conj().T @ gate - np.eye(d)) > tol:
        raise ValueError("gate is not unitary")


def product_state(bits: Sequence[int]) -> MatrixProductState:
    """Computational basis state ``|bits>`` with bond dimension one."""
    if len(bits) == 0:
        raise ValueError("bits must be non-empty")
    tensors = []
    for b in bits:
        if b not in (0, 1):
            raise ValueError(f"bits must be 0 or 1, got {b!r}")
        t = np.zeros((1, 2, 1), dtype=np.complex128)
        t[0, b, 0] = 1.0
        tensors.append(t)
    return MatrixProductState(tuple(tensors), center=0)


def max_bond_dim(psi: MatrixProductState) -> int:
    return max(psi.bond_dims, default=1)


# -- in-place kernels -------------------------------------------------------


def _shift_right(ts: list, i: int) -> None:
    """QR at site ``i``; the non-isometric factor moves into site ``i + 1``."""
    a = ts[i]
    l, d, r = a.shape
    q, rr = block_qr(a.reshape(l * d, r))
    ts[i] = q.reshape(l, d, q.shape[1])
    ts[i + 1] = np.tensordot(rr, ts[i + 1], axes=(1, 0))


def _shift_left(ts: list, i: int) -> None:
    """LQ at site ``i``; the non-isometric factor moves into site ``i - 1``."""
    a = ts[i]
    l, d, r = a.shape
    q, rr = block_qr(a.reshape(l, d * r).T)
    ts[i] = q.T.reshape(q.shape[1], d, r)
    ts[i - 1] = np.tensordot(ts[i - 1], rr.T, axes=(2, 0))


def _move_center(ts: list, center: int | None, target: int) -> tuple[int, int, int]:
    """Move the orthogonality center to ``target``.

    Returns ``(target, lo, hi)`` where ``lo..hi`` is the inclusive range of
    modified sites (``lo > hi`` when nothing changed).
    """
    n = len(ts)
    if center is None:
        for i in range(target):
            _shift_right(ts, i)
        for i in range(n - 1, target, -1):
            _shift_left(ts, i)
        return target, 0, n - 1
    if center < target:
        for i in range(center, target):
            _shift_right(ts, i)
        return target, center, target
    if center > target:
        for i in range(center, target, -1):
            _shift_left(ts, i)
        return target, target, center
    return target, 1, 0


def _apply_1q(ts: list, gate: np.ndarray, site: int) -> None:
    ts[site] = np.einsum("st,ltr->lsr", gate, ts[site])


def _apply_2q(
    ts: list, center: int | None, gate: np.ndarray, site: int, cap: int, cutoff: float
) -> tuple[int, float, int, int]:
    """Apply a 4x4 gate to sites ``site, site + 1`` and split with truncation.

    Returns ``(new_center, discarded_weight, lo, hi)`` with ``lo..hi`` the range
    of modified sites.
    """
    lo, hi = site, site + 1
    if center is None or center not in (site, site + 1):
        target = site if center is None or center <= site else site + 1
        center, mlo, mhi = _move_center(ts, center, target)
        if mlo <= mhi:
            lo, hi = min(lo, mlo), max(hi, mhi)
    left_first = center == site
    a, b = ts[site], ts[site + 1]
    l, r = a.shape[0], b.shape[2]
    theta = np.tensordot(a, b, axes=(2, 0))  # (l, s1, s2, r)
    theta = np.tensordot(gate.reshape(2, 2, 2, 2), theta, axes=([2, 3], [1, 2]))
    m = theta.transpose(2, 0, 1, 3).reshape(l * 2, 2 * r)
    svd = svd_truncate(m, cap, cutoff)
    k = svd.rank
    if left_first:
        ts[site] = svd.u.reshape(l, 2, k)
        ts[site + 1] = (svd.s[:, None] * svd.v).reshape(k, 2, r)
        new_center = site + 1
    else:
        ts[site] = (svd.u * svd.s[None, :]).reshape(l, 2, k)
        ts[site + 1] = svd.v.reshape(k, 2, r)
        new_center = site
    return new_center, svd.discarded_weight, lo, hi


def _left_env_step(env: np.ndarray, bra: np.ndarray, ket: np.ndarray) -> np.ndarray:
    """Extend ``env[a, b]`` (bra bond, ket bond) by one site."""
    tmp = np.tensordot(env, ket, axes=(1, 0))  # (a, s, b')
    return np.tensordot(bra.conj(), tmp, axes=([0, 1], [0, 1]))  # (a', b')


def _right_env_step(env: np.ndarray, bra: np.ndarray, ket: np.ndarray) -> np.ndarray:
    tmp = np.tensordot(ket, env, axes=(2, 1))  # (b, s, a')
    return np.tensordot(bra.conj(), tmp, axes=([1, 2], [1, 2]))  # (a, b)


# -- public operations ------------------------------------------------------


def apply_one_qubit_gate(psi: MatrixProductState, gate, site: int) -> MatrixProductState:
    gate = np.asarray(gate, dtype=np.complex128)
    if gate.shape != (2, 2):
        raise ShapeError("one-qubit gate must be 2x2")
    if not 0 <= site < psi.n_qubits:
        raise ValueError(f"site {site} out of range")
    check_unitary(gate)
    ts = list(psi.tensors)
    _apply_1q(ts, gate, site)
    return MatrixProductState(tuple(ts), psi.center, psi.discarded_weight)


def apply_two_qubit_gate(
    psi: MatrixProductState,
    gate,
    site: int,
    cap: int,
    cutoff: float = DEFAULT_CUTOFF,
) -> MatrixProductState:
    """TEBD update of the adjacent pair ``(site, site + 1)`` with bond cap ``cap``."""
    gate = np.asarray(gate, dtype=np.complex128)
    if gate.shape != (4, 4):
        raise ShapeError("two-qubit gate must be 4x4")
    if not 0 <= site < psi.n_qubits - 1:
        raise ValueError(f"gate on ({site}, {site + 1}) is outside the chain")
    check_unitary(gate)
    ts = list(psi.tensors)
    center, dw, _, _ = _apply_2q(ts, psi.center, gate, site, cap, cutoff)
    return MatrixProductState(tuple(ts), center, psi.discarded_weight + dw)


def inner_product(phi: MatrixProductState, psi: MatrixProductState) -> complex:
    """``<phi|psi>``."""
    if phi.n_qubits != psi.n_qubits:
        raise ValueError("states have different sizes")
    env = np.ones((1, 1), dtype=np.complex128)
    for a, b in zip(phi.tensors, psi.tensors):
        env = _left_env_step(env, a, b)
    return complex(env[0, 0])


def norm_squared(psi: MatrixProductState) -> float:
    if psi.center is not None:
        c = psi.tensors[psi.center]
        return float(np.vdot(c, c).real)
    return inner_product(psi, psi).real


def normalize(psi: MatrixProductState) -> MatrixProductState:
    nrm2 = norm_squared(psi)
    if not np.isfinite(nrm2) or nrm2 <= 1e-300:
        raise NumericalIntegrityError("cannot normalize a zero-norm state")
    ts = list(psi.tensors)
    i = psi.center if psi.center is not None else 0
    ts[i] = ts[i] / np.sqrt(nrm2)
    return MatrixProductState(tuple(ts), psi.center, psi.discarded_weight)


def apply_mpo(
    op: MatrixProductOperator,
    psi: MatrixProductState,
    cap: int,
    cutoff: float = DEFAULT_CUTOFF,
) -> MatrixProductState:
    """Approximate ``op|psi>`` by zip-up contraction with bond cap ``cap``.

    The zip runs inward from both ends and closes at the middle site, so the
    rank of every intermediate SVD is bounded by the Hilbert-space dimension on
    the zipped side; with ``cap >= 2**(n // 2)`` the product is exact. The
    offset of ``op`` is included.
    """
    if op.n_qubits != psi.n_qubits:
        raise ValueError("operator and state have different sizes")
    ws = op.folded()
    ts = list(psi.tensors)
    n = len(ts)
    mid = n // 2
    _move_center(ts, psi.center, mid)
    out: list = [None] * n
    dw_total = 0.0
    left = np.ones((1, 1, 1), dtype=np.complex128)  # (new, mpo, old)
    for i in range(mid):
        t = np.tensordot(left, ts[i], axes=(2, 0))  # (k, w, t, r)
        t = np.tensordot(t, ws[i], axes=([1, 2], [0, 2]))  # (k, r, s, w')
        k, r, _, wr = t.shape
        t = t.transpose(0, 2, 3, 1).reshape(k * 2, wr * r)
        svd = svd_truncate(t, cap, cutoff)
        dw_total += svd.discarded_weight
        out[i] = svd.u.reshape(k, 2, svd.rank)
        left = (svd.s[:, None] * svd.v).reshape(svd.rank, wr, r)
    right = np.ones((1, 1, 1), dtype=np.complex128)  # (old, mpo, new)
    for i in range(n - 1, mid, -1):
        t = np.tensordot(ts[i], right, axes=(2, 0))  # (b, t, w, k)
        t = np.tensordot(t, ws[i], axes=([1, 2], [2, 3]))  # (b, k, w_l, s)
        b, k, wl, _ = t.shape
        t = t.transpose(0, 2, 3, 1).reshape(b * wl, 2 * k)
        svd = svd_truncate(t, cap, cutoff)
        dw_total += svd.discarded_weight
        out[i] = svd.v.reshape(svd.rank, 2, k)
        right = (svd.u * svd.s[None, :]).reshape(b, wl, svd.rank)
    t = np.tensordot(left, ts[mid], axes=(2, 0))  # (k, w, t, b')
    t = np.tensordot(t, ws[mid], axes=([1, 2], [0, 2]))  # (k, b', s, w')
    t = np.tensordot(t, right, axes=([1, 3], [0, 1]))  # (k, s, k')
    out[mid] = t
    return MatrixProductState(tuple(out), mid, psi.discarded_weight + dw_total)


def sandwich(psi: MatrixProductState, op: MatrixProductOperator, phi: MatrixProductState | None = None) -> complex:
    """``<psi|W|phi>`` for the tensor part ``W`` of ``op`` (offset excluded)."""
    phi = psi if phi is None else phi
    if not psi.n_qubits == op.n_qubits == phi.n_qubits:
        raise ValueError("operator and states have different sizes")
    env = np.ones((1, 1, 1), dtype=np.complex128)  # (bra, mpo, ket)
    for a, w, b in zip(psi.tensors, op.tensors, phi.tensors):
        env = np.tensordot(env, b, axes=(2, 0))  # (a, w, t, b')
        env = np.tensordot(env, w, axes=([1, 2], [0, 2]))  # (a, b', s, w')
        env = np.tensordot(a.conj(), env, axes=([0, 1], [0, 2]))  # (a', b', w')
        env = env.transpose(0, 2, 1)
    return complex(env[0, 0, 0])


def expectation(psi: MatrixProductState, op: MatrixProductOperator) -> float:
    """``<psi|op|psi> / <psi|psi>``; the normalization absorbs truncation drift."""
    nrm2 = norm_squared(psi)
    if not np.isfinite(nrm2) or nrm2 <= 1e-300:
        raise NumericalIntegrityError("expectation of a zero-norm state")
    val = sandwich(psi, op) / nrm2
    if not np.isfinite(val):
        raise NumericalIntegrityError("expectation is not finite")
    if abs(val.imag) > 1e-6 * max(1.0, abs(val.real)):
        raise NumericalIntegrityError(f"expectation has imaginary part {val.imag:.3e}")
    return float(val.real) + op.offset


def to_statevector(psi: MatrixProductState) -> np.ndarray:
    """Dense amplitude vector of length ``2**n``, qubit 0 most significant."""
    n = psi.n_qubits
    if n > MAX_DENSE_QUBITS:
        raise CapacityError(f"state vector limited to {MAX_DENSE_QUBITS} qubits, got {n}")
    v = psi.tensors[0].reshape(2, -1)
    for t in psi.tensors[1:]:
        v = np.tensordot(v, t, axes=(1, 0)).reshape(-1, t.shape[2])
    return v.reshape(-1)


def from_statevector(vec, cap: int | None = None, cutoff: float = DEFAULT_CUTOFF) -> MatrixProductState:
    """Split a dense state into an MPS by successive SVDs (left-canonical)."""
    vec = np.asarray(vec, dtype=np.complex128)
    n = int(round(np.log2(vec.size)))
    if 2**n != vec.size:
        raise ShapeError("length is not a power of two")
    cap = cap or 2**n
    ts = []
    rest = vec.reshape(1, -1)
    dw = 0.0
    for _ in range(n - 1):
        l = rest.shape[0]
        svd = svd_truncate(rest.reshape(l * 2, -1), cap, cutoff)
        dw += svd.discarded_weight
        ts.append(svd.u.reshape(l, 2, svd.rank))
        rest = svd.s[:, None] * svd.v
    ts.append(rest.reshape(rest.shape[0], 2, 1))
    return MatrixProductState(tuple(ts), n - 1, dw)


__all__ = [
    "MatrixProductState",
    "MatrixProductOperator",
    "product_state",
    "apply_one_qubit_gate",
    "apply_two_qubit_gate",
    "inner_product",
    "apply_mpo",
    "expectation",
    "sandwich",
    "to_statevector",
    "from_statevector",
    "max_bond_dim",
    "normalize",
    "norm_squared",
    "check_unitary",
]
