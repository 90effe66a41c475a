"""Bond-capped circuit energy and its reverse-sweep gradient.

The sweep holds two MPSs. ``left`` starts as the contracted circuit state and
``right`` as ``H`` applied to it. Walking the gates from last to first, each gate
is undone on ``left``, the gate's parameter derivatives are contracted between
the two states, and the gate is then undone on ``right`` as well. Both states
are truncated back to the bond cap after every step, so at small caps the
result approximates the gradient of the exact circuit energy. It is not the
derivative of the truncated energy itself.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from . import mps as _mps
from .ansatz import Circuit, gate_derivative, gate_matrix, circuit_to_mps
from .errors import NumericalIntegrityError
from .mps import MatrixProductOperator, MatrixProductState
from .tensor import DEFAULT_CUTOFF


def energy_chi(c: Circuit, theta, h: MatrixProductOperator, cap: int, cutoff: float = DEFAULT_CUTOFF) -> float:
    """Energy of the circuit state contracted at bond cap ``cap``."""
    return _mps.expectation(circuit_to_mps(c, theta, cap, cutoff), h)


class GradientSweepState:
    """Mutable state of one reverse sweep.

    Keeps the site tensors of both MPSs plus cached left/right environments of
    their overlap; the caches are invalidated only over the sites each step
    touches.
    """

    def __init__(
        self,
        left: MatrixProductState,
        right: MatrixProductState,
        cap: int,
        cutoff: float,
        k: int,
        right_cap: int | None = None,
    ):
        self.left = list(left.tensors)
        self.right = list(right.tensors)
        self.c_left = left.center
        self.c_right = right.center
        self.cap = cap
        self.right_cap = cap if right_cap is None else right_cap
        self.cutoff = cutoff
        self.k = k
        n = len(self.left)
        self.n = n
        self._lenv = [np.ones((1, 1), dtype=np.complex128)] + [None] * n
        self._renv = [None] * n + [np.ones((1, 1), dtype=np.complex128)]
        self._lvalid = 0
        self._rvalid = n
        self.discarded_weight = left.discarded_weight + right.discarded_weight

    @property
    def psi_left(self) -> MatrixProductState:
        return MatrixProductState(tuple(self.left), self.c_left)

    @property
    def psi_right(self) -> MatrixProductState:
        return MatrixProductState(tuple(self.right), self.c_right)

    def _touched(self, lo: int, hi: int) -> None:
        if lo <= hi:
            self._lvalid = min(self._lvalid, lo)
            self._rvalid = max(self._rvalid, hi + 1)

    def _left_env(self, k: int) -> np.ndarray:
        while self._lvalid < k:
            i = self._lvalid
            self._lenv[i + 1] = _mps._left_env_step(self._lenv[i], self.right[i], self.left[i])
            self._lvalid += 1
        return self._lenv[k]

    def _right_env(self, k: int) -> np.ndarray:
        """Environment of sites ``>= k``."""
        while self._rvalid > k:
            i = self._rvalid - 1
            self._renv[i] = _mps._right_env_step(self._renv[i + 1], self.right[i], self.left[i])
            self._rvalid -= 1
        return self._renv[k]

    def apply(self, which: str, gate: np.ndarray, sites: Sequence[int]) -> None:
        ts = self.left if which == "left" else self.right
        if len(sites) == 1:
            _mps._apply_1q(ts, gate, sites[0])
            self._touched(sites[0], sites[0])
            return
        center = self.c_left if which == "left" else self.c_right
        cap = self.cap if which == "left" else self.right_cap
        center, dw, lo, hi = _mps._apply_2q(ts, center, gate, sites[0], cap, self.cutoff)
        self.discarded_weight += dw
        if which == "left":
            self.c_left = center
        else:
            self.c_right = center
        self._touched(lo, hi)

    def local_overlap(self, sites: Sequence[int]) -> np.ndarray:
        """``M[s, t] = <right| (|s><t| on sites) |left>`` as a ``d x d`` matrix."""
        k = sites[0]
        w = len(sites)
        lenv = self._left_env(k)
        renv = self._right_env(k + w)
        x = np.tensordot(lenv, self.left[k], axes=(1, 0))  # (a, t, b)
        y = self.right[k].conj()  # (a, s, a')
        for i in range(1, w):
            x = np.tensordot(x, self.left[k + i], axes=(x.ndim - 1, 0))
            y = np.tensordot(y, self.right[k + i].conj(), axes=(y.ndim - 1, 0))
        x = np.tensordot(x, renv, axes=(x.ndim - 1, 1))  # (a, t..., a'')
        m = np.tensordot(y, x, axes=([0, y.ndim - 1], [0, x.ndim - 1]))  # (s..., t...)
        d = 2**w
        return m.reshape(d, d)


def make_objective(
    c: Circuit, h, cap: int, backend: str = "sweep", cutoff: float = DEFAULT_CUTOFF, right_cap: int | None = None
):
    """``theta -> (energy, grad)`` for a minimizer.

    ``backend="sweep"`` uses :func:`gradient_sweep` with MPO ``h`` at bond cap
    ``cap``. ``backend="exact"`` ignores ``cap`` and differentiates the exact
    state-vector energy; ``h`` is then a sparse matrix.
    """
    if backend == "sweep":
        if not isinstance(h, MatrixProductOperator):
            raise TypeError("sweep backend needs an MPO")
        return lambda theta: gradient_sweep(c, theta, h, cap, cutoff, right_cap)
    if backend == "exact":
        from .oracle import ExactObjective

        return ExactObjective(c, h)
    raise ValueError(f"unknown backend {backend!r}")


def gradient_sweep(
    c: Circuit,
    theta,
    h: MatrixProductOperator,
    cap: int,
    cutoff: float = DEFAULT_CUTOFF,
    right_cap: int | None = None,
) -> tuple[float, np.ndarray]:
    """Energy at bond cap ``cap`` and the approximate gradient from one reverse sweep.

    Costs two circuit contractions (forward for the state, then the sweep that
    undoes every gate on both MPSs) plus one MPO application. ``right_cap``
    bounds the bond dimension of ``H|psi>`` and defaults to ``cap``; the
    circuit state itself always stays at ``cap``.
    """
    theta = np.asarray(theta, dtype=float)
    psi = circuit_to_mps(c, theta, cap, cutoff)
    energy = _mps.expectation(psi, h)
    psi = _mps.normalize(psi)
    rcap = cap if right_cap is None else right_cap
    if rcap < cap:
        raise ValueError("right_cap must be at least cap")
    right = _mps.apply_mpo(h.without_offset(), psi, rcap, cutoff)
    state = GradientSweepState(psi, right, cap, cutoff, k=len(c.gates), right_cap=rcap)
    grad = np.zeros(c.n_params)
    for g in reversed(c.gates):
        u_dag = gate_matrix(g, theta).conj().T
        state.apply("left", u_dag, g.sites)
        if g.slots:
            m = state.local_overlap(g.sites)
            params = [theta[s] for s in g.slots]
            for slot, du in zip(g.slots, gate_derivative(g, params)):
                grad[slot] = 2.0 * np.sum(du * m).real
        state.apply("right", u_dag, g.sites)
        state.k -= 1
    if not np.all(np.isfinite(grad)):
        raise NumericalIntegrityError("gradient contains NaN or Inf")
    return energy, grad
