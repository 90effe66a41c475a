"""Number-preserving circuit ansatz for the Hubbard model.

One layer applies an NP gate to every site's (down, up) pair, then the four
commuting sets of same-spin hopping gates in the order even-horizontal,
odd-horizontal, even-vertical, odd-vertical. Before each set a network of
fermionic swaps makes every pair of hopping partners adjacent on the qubit
line; after the set the network is undone. A layer of Rz gates, one per
qubit, precedes all layers.

The same construction with one spin species and no onsite gates gives the
non-interacting circuits used to warm-start the interacting optimization.
"""

from __future__ import annotations

import enum
import hashlib
import json
from collections import deque
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import mps as _mps
from .hubbard import LatticeConfig, QubitLabel, Spin, qubit_index
from .tensor import DEFAULT_CUTOFF

GROUPS = ("h0", "h1", "v0", "v1")


class GateKind(str, enum.Enum):
    NP = "NP"
    FSWAP = "FSWAP"
    RZ = "RZ"


@dataclass(frozen=True)
class GateOp:
    """One gate of a circuit.

    ``slots`` index the flat parameter vector (NP: theta then phi, RZ: theta).
    ``tag`` identifies the gate's structural role, e.g.
    ``("hop", layer, group, site_a, site_b, spin)``; it is what parameter
    embedding matches on.
    """

    kind: GateKind
    sites: tuple[int, ...]
    slots: tuple[int, ...] = ()
    tag: tuple = ()


@dataclass(frozen=True)
class Circuit:
    n_qubits: int
    gates: tuple[GateOp, ...]
    n_params: int
    initial_bits: tuple[int, ...]
    layers: int = 0
    spin: Spin | None = None
    lattice: LatticeConfig | None = field(default=None, compare=False)

    def __post_init__(self):
        seen: set[int] = set()
        for g in self.gates:
            if len(g.sites) == 2 and g.sites[1] != g.sites[0] + 1:
                raise ValueError(f"two-qubit gate on non-adjacent qubits {g.sites}")
            for s in g.slots:
                if s in seen or not 0 <= s < self.n_params:
                    raise ValueError(f"parameter slot {s} reused or out of range")
                seen.add(s)
        if len(seen) != self.n_params:
            raise ValueError("some parameter slots are not used by any gate")
        if len(self.initial_bits) != self.n_qubits:
            raise ValueError("initial_bits length differs from n_qubits")

    @property
    def n_electrons(self) -> int:
        return sum(self.initial_bits)

    def parameterized(self) -> list[GateOp]:
        return [g for g in self.gates if g.slots]

    def to_dict(self) -> dict:
        return {
            "n_qubits": self.n_qubits,
            "n_params": self.n_params,
            "layers": self.layers,
            "initial_bits": list(self.initial_bits),
            "gates": [
                {"kind": g.kind.value, "sites": list(g.sites), "slots": list(g.slots)} for g in self.gates
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))

    @classmethod
    def from_dict(cls, data: dict) -> "Circuit":
        gates = tuple(
            GateOp(GateKind(g["kind"]), tuple(g["sites"]), tuple(g["slots"])) for g in data["gates"]
        )
        return cls(
            n_qubits=data["n_qubits"],
            gates=gates,
            n_params=data["n_params"],
            initial_bits=tuple(data["initial_bits"]),
            layers=data.get("layers", 0),
        )

    def structure_hash(self) -> str:
        return hashlib.sha256(self.to_json().encode()).hexdigest()


# -- gate matrices ------------------------------------------------------------


def np_gate(theta: float, phi: float) -> np.ndarray:
    """Number-preserving gate in the basis |00>, |01>, |10>, |11>."""
    c, s = np.cos(theta), np.sin(theta)
    return np.array(
        [
            [1, 0, 0, 0],
            [0, c, 1j * s, 0],
            [0, 1j * s, c, 0],
            [0, 0, 0, np.exp(1j * phi)],
        ],
        dtype=np.complex128,
    )


_FSWAP = np.array(
    [[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, -1]], dtype=np.complex128
)


def fswap() -> np.ndarray:
    return _FSWAP.copy()


def rz(theta: float) -> np.ndarray:
    return np.diag([np.exp(-0.5j * theta), np.exp(0.5j * theta)])


def gate_matrix(g: GateOp, theta: np.ndarray) -> np.ndarray:
    if g.kind is GateKind.NP:
        return np_gate(theta[g.slots[0]], theta[g.slots[1]])
    if g.kind is GateKind.RZ:
        return rz(theta[g.slots[0]])
    return _FSWAP


def gate_derivative(g: GateOp, params: Sequence[float]) -> list[np.ndarray]:
    """Analytic derivative of the gate matrix with respect to each of its parameters."""
    if g.kind is GateKind.NP:
        th, ph = params
        c, s = np.cos(th), np.sin(th)
        d_th = np.zeros((4, 4), dtype=np.complex128)
        d_th[1:3, 1:3] = [[-s, 1j * c], [1j * c, -s]]
        d_ph = np.zeros((4, 4), dtype=np.complex128)
        d_ph[3, 3] = 1j * np.exp(1j * ph)
        return [d_th, d_ph]
    if g.kind is GateKind.RZ:
        (th,) = params
        return [np.diag([-0.5j * np.exp(-0.5j * th), 0.5j * np.exp(0.5j * th)])]
    raise ValueError("FSWAP has no parameters")


# -- routing --------------------------------------------------------------------


def _count_swaps(block: list[int], target: list[int]) -> int:
    rank = {m: k for k, m in enumerate(target)}
    seq = [rank[m] for m in block]
    return sum(1 for a in range(len(seq)) for b in range(a + 1, len(seq)) if seq[a] > seq[b])


def _sorting_swaps(start: list[int], target: list[int]) -> list[int]:
    """Adjacent transpositions (odd-even transposition sort) taking start to target.

    Returns the left position of each swap, in application order.
    """
    rank = {m: k for k, m in enumerate(target)}
    cur = [rank[m] for m in start]
    swaps: list[int] = []
    parity = 0
    while any(cur[k] > cur[k + 1] for k in range(len(cur) - 1)):
        for k in range(parity, len(cur) - 1, 2):
            if cur[k] > cur[k + 1]:
                cur[k], cur[k + 1] = cur[k + 1], cur[k]
                swaps.append(k)
        parity ^= 1
    return swaps


def _pair_block(block: list[int], columns: list[list[tuple[int, int]]]) -> list[int]:
    """Cheapest arrangement of ``block`` that puts every partner pair side by side.

    ``columns`` groups the partner pairs that travel together (the down pair and
    the up pair of one bond). Candidate orders are compared by swap count.
    """
    best, best_cost = None, None
    for col_order in (columns, columns[::-1]):
        for flip in (False, True):
            target = []
            for col in col_order:
                for a, b in col[::-1] if flip else col:
                    target += [a, b] if block.index(a) < block.index(b) else [b, a]
            cost = _count_swaps(block, target)
            if best_cost is None or cost < best_cost:
                best, best_cost = target, cost
    return best


class _Builder:
    def __init__(self, n_qubits: int):
        self.n_qubits = n_qubits
        self.gates: list[GateOp] = []
        self.n_params = 0

    def rz(self, q: int, tag: tuple) -> None:
        self.gates.append(GateOp(GateKind.RZ, (q,), (self.n_params,), tag))
        self.n_params += 1

    def np(self, k: int, tag: tuple) -> None:
        self.gates.append(GateOp(GateKind.NP, (k, k + 1), (self.n_params, self.n_params + 1), tag))
        self.n_params += 2

    def fswap(self, k: int) -> None:
        self.gates.append(GateOp(GateKind.FSWAP, (k, k + 1)))

    def routed_group(self, pairs: list[tuple[int, int, tuple]], arrangement: list[int]) -> None:
        """Route to ``arrangement``, apply one NP per (mode_a, mode_b, tag), route back."""
        line = list(range(self.n_qubits))
        swaps = _sorting_swaps(line, arrangement)
        for k in swaps:
            self.fswap(k)
        pos = {m: k for k, m in enumerate(arrangement)}
        for a, b, tag in pairs:
            lo, hi = sorted((pos[a], pos[b]))
            if hi != lo + 1:
                raise AssertionError("routing failed to make partners adjacent")
            self.np(lo, tag)
        for k in reversed(swaps):
            self.fswap(k)


def _schedule(gates: list[GateOp], n_qubits: int) -> list[GateOp]:
    """Reorder commuting gates so the MPS orthogonality center travels less.

    Greedy topological order: among gates whose predecessors on every qubit are
    done, take the one nearest the current center (ties by original position).
    The circuit unitary is unchanged.
    """
    queues = [deque() for _ in range(n_qubits)]
    for k, g in enumerate(gates):
        for q in g.sites:
            queues[q].append(k)

    def ready(k: int) -> bool:
        return all(queues[q][0] == k for q in gates[k].sites)

    cand = {k for k in range(len(gates)) if ready(k)}
    out: list[GateOp] = []
    center = 0
    while cand:

        def cost(k: int):
            s = gates[k].sites
            if len(s) == 1:
                return (-1, k)
            a = s[0]
            if center in (a, a + 1):
                return (0, k)
            return (a - center if center < a else center - a - 1, k)

        k = min(cand, key=cost)
        cand.remove(k)
        g = gates[k]
        out.append(g)
        if len(g.sites) == 2:
            # mirror _apply_2q: move next to the pair, then split toward the far side
            a = g.sites[0]
            if center not in (a, a + 1):
                center = a if center < a else a + 1
            center = a + 1 if center == a else a
        for q in g.sites:
            queues[q].popleft()
        for q in g.sites:
            if queues[q] and ready(queues[q][0]):
                cand.add(queues[q][0])
    return out


def _group_bonds(lattice: LatticeConfig, group: str):
    parity = int(group[1])
    if group[0] == "h":
        return lattice.horizontal_bonds(parity)
    return lattice.vertical_bonds(parity)


def _arrangement(n_qubits: int, mode_pairs: list[list[tuple[int, int]]]) -> list[int]:
    """Full-line arrangement making each pair adjacent, touching only the blocks involved."""
    line = list(range(n_qubits))
    involved = sorted({m for col in mode_pairs for pr in col for m in pr})
    if not involved:
        return line
    # split into contiguous blocks so separate row-pairs are routed independently
    blocks: list[tuple[int, int, list]] = []
    for col in sorted(mode_pairs, key=lambda c: min(m for pr in c for m in pr)):
        lo = min(m for pr in col for m in pr)
        hi = max(m for pr in col for m in pr)
        if blocks and lo <= blocks[-1][1]:
            blo, bhi, cols = blocks[-1]
            blocks[-1] = (blo, max(bhi, hi), cols + [col])
        else:
            blocks.append((lo, hi, [col]))
    out = list(line)
    for lo, hi, cols in blocks:
        block = line[lo : hi + 1]
        placed = {m for col in cols for pr in col for m in pr}
        spare = [m for m in block if m not in placed]
        target = _pair_block([m for m in block if m in placed], cols)
        # spare modes inside a block (if any) keep the front
        out[lo : hi + 1] = spare + target
    return out


def build_np_ansatz(lattice: LatticeConfig, layers: int) -> Circuit:
    """Full interacting ansatz on ``2 * nx * ny`` qubits."""
    if layers < 1:
        raise ValueError("layers must be >= 1")
    n = lattice.n_qubits
    b = _Builder(n)
    for q in range(n):
        b.rz(q, ("rz", q))

    def q(site, spin):
        return qubit_index(QubitLabel(site[0], site[1], spin), lattice)

    for layer in range(layers):
        for i, j in lattice.sites():
            dn = q((i, j), Spin.DOWN)
            b.np(dn, ("onsite", layer, i, j))
        for group in GROUPS:
            bonds = _group_bonds(lattice, group)
            if not bonds:
                continue
            pairs, cols = [], []
            for sa, sb in bonds:
                col = []
                for spin in Spin:
                    ma, mb = q(sa, spin), q(sb, spin)
                    pairs.append((ma, mb, ("hop", layer, group, sa, sb, spin.value)))
                    col.append((ma, mb))
                cols.append(col)
            b.routed_group(pairs, _arrangement(n, cols))
    bits = [0] * n
    for i, j in lattice.sites():
        spin = Spin.UP if (i + j) % 2 == 0 else Spin.DOWN
        bits[q((i, j), spin)] = 1
    return Circuit(n, tuple(_schedule(b.gates, n)), b.n_params, tuple(bits), layers, None, lattice)


def build_noninteracting_ansatz(lattice: LatticeConfig, layers: int, spin: Spin | str) -> Circuit:
    """Hopping-only ansatz for one spin species on ``nx * ny`` qubits (snake order).

    Up electrons start on sites with ``i + j`` even, down electrons on the others.
    """
    if layers < 1:
        raise ValueError("layers must be >= 1")
    spin = Spin(spin)
    n = lattice.n_sites
    b = _Builder(n)
    pos = lattice.site_position
    for layer in range(layers):
        for group in GROUPS:
            bonds = _group_bonds(lattice, group)
            if not bonds:
                continue
            pairs = [(pos(*sa), pos(*sb), ("hop", layer, group, sa, sb, spin.value)) for sa, sb in bonds]
            cols = [[(pos(*sa), pos(*sb))] for sa, sb in bonds]
            b.routed_group(pairs, _arrangement(n, cols))
    want = 0 if spin is Spin.UP else 1
    bits = [0] * n
    for i, j in lattice.sites():
        if (i + j) % 2 == want:
            bits[pos(i, j)] = 1
    return Circuit(n, tuple(_schedule(b.gates, n)), b.n_params, tuple(bits), layers, spin, lattice)


def embed_noninteracting_params(up, down, full: Circuit, up_circuit: Circuit, down_circuit: Circuit) -> np.ndarray:
    """Copy the species hopping parameters into the full circuit's parameter vector.

    Gates are matched by their structural tag (layer, group, bond, spin). Onsite
    and Rz slots are zero.
    """
    up = np.asarray(up, dtype=float)
    down = np.asarray(down, dtype=float)
    for vec, circ, spin in ((up, up_circuit, Spin.UP), (down, down_circuit, Spin.DOWN)):
        if circ.spin is not spin:
            raise ValueError(f"expected a {spin.value} species circuit")
        if circ.layers != full.layers:
            raise ValueError(f"layer counts differ: species {circ.layers}, full {full.layers}")
        if vec.shape != (circ.n_params,):
            raise ValueError("parameter vector does not match its circuit")
    target = {g.tag: g.slots for g in full.gates if g.slots}
    out = np.zeros(full.n_params)
    written: set[int] = set()
    for vec, circ in ((up, up_circuit), (down, down_circuit)):
        for g in circ.gates:
            if not g.slots:
                continue
            slots = target.get(g.tag)
            if slots is None:
                raise ValueError(f"no gate in the full circuit matches {g.tag}")
            for src, dst in zip(g.slots, slots):
                if dst in written:
                    raise ValueError(f"slot {dst} written twice")
                written.add(dst)
                out[dst] = vec[src]
    return out


def circuit_to_mps(
    c: Circuit, theta, cap: int, cutoff: float = DEFAULT_CUTOFF
) -> _mps.MatrixProductState:
    """Contract the circuit applied to ``initial_bits`` into an MPS with bond cap ``cap``.

    The returned state carries the accumulated discarded weight.
    """
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (c.n_params,):
        raise ValueError(f"expected {c.n_params} parameters, got {theta.shape}")
    psi = _mps.product_state(c.initial_bits)
    ts = list(psi.tensors)
    center: int | None = psi.center
    dw = 0.0
    for g in c.gates:
        m = gate_matrix(g, theta)
        if len(g.sites) == 1:
            _mps._apply_1q(ts, m, g.sites[0])
        else:
            center, d, _, _ = _mps._apply_2q(ts, center, m, g.sites[0], cap, cutoff)
            dw += d
    return _mps.MatrixProductState(tuple(ts), center, dw)


def table1_layers(nx: int, ny: int) -> int:
    """Layer count of the benchmark presets."""
    try:
        return TABLE1_PRESETS[(nx, ny)]
    except KeyError:
        raise ValueError(f"no preset for a {nx}x{ny} lattice") from None


TABLE1_PRESETS = {
    (4, 1): 4,
    (8, 1): 7,
    (12, 1): 11,
    (16, 1): 14,
    (4, 2): 10,
    (4, 3): 17,
    (4, 4): 24,
}
