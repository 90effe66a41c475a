"""Run configuration, the optimization and warm-start studies, and their files.

A run optimizes the ansatz at bond cap ``chi_b`` and then re-evaluates the
optimized parameters at larger caps ``chi_a``. For registers of at most 16
qubits the exact ground state provides the reference energy and the
infidelity. Larger registers need an explicit ``reference_energy``.
"""

from __future__ import annotations

import csv
import json
import math
import platform
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Sequence

import numpy as np
import scipy

from .ansatz import Circuit, build_np_ansatz, circuit_to_mps, table1_layers
from .errors import CheckpointError, ConfigError
from .gradient import energy_chi
from .hubbard import LatticeConfig, hubbard_mpo, jordan_wigner_terms
from .mps import expectation
from .optimizers import (
    OptimizerConfig,
    OptimizerKind,
    TrajectoryPoint,
    adam_minimize,
    vtne_protocol,
)
from .oracle import MAX_DENSE_H_QUBITS, ExactObjective, exact_ground, infidelity, pauli_operator

__version__ = "0.1.0"

CSV_HEADER = ("step", "n_gradient_calls", "energy", "relative_error", "grad_norm", "wall_time_s")


@dataclass(frozen=True)
class RunConfig:
    """One experiment. ``layers`` is an int or ``"table1"`` for the preset depth."""

    nx: int = 4
    ny: int = 1
    t: float = 1.0
    u: float = 2.0
    layers: int | str = "table1"
    chi_b: int = 16
    chi_a: tuple[int, ...] = ()
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    mode: str = "warm"
    seeds: tuple[int, ...] = (0,)
    reference_energy: float | None = None
    out: str | None = None
    checkpoint: str | None = None

    def __post_init__(self):
        if not (isinstance(self.nx, int) and isinstance(self.ny, int)) or self.nx < 1 or self.ny < 1:
            raise ConfigError(f"field 'nx'/'ny': lattice extents must be positive integers, got {self.nx!r}, {self.ny!r}")
        if self.layers == "table1":
            try:
                table1_layers(self.nx, self.ny)
            except ValueError:
                raise ConfigError(
                    f"field 'layers': no table1 preset for a {self.nx}x{self.ny} lattice; give an explicit layer count"
                ) from None
        elif not isinstance(self.layers, int) or isinstance(self.layers, bool) or self.layers < 1:
            raise ConfigError(f"field 'layers': expected a positive integer or 'table1', got {self.layers!r}")
        if not isinstance(self.chi_b, int) or self.chi_b < 1:
            raise ConfigError(f"field 'chi_b': expected an integer >= 1, got {self.chi_b!r}")
        object.__setattr__(self, "chi_a", tuple(self.chi_a))
        if any(not isinstance(c, int) or c < 1 for c in self.chi_a):
            raise ConfigError(f"field 'chi_a': expected integers >= 1, got {self.chi_a!r}")
        if self.mode not in ("warm", "direct"):
            raise ConfigError(f"field 'mode': expected 'warm' or 'direct', got {self.mode!r}")
        object.__setattr__(self, "seeds", tuple(self.seeds))
        if not self.seeds or any(not isinstance(s, int) for s in self.seeds):
            raise ConfigError(f"field 'seeds': expected a non-empty list of integers, got {self.seeds!r}")

    @property
    def lattice(self) -> LatticeConfig:
        return LatticeConfig(self.nx, self.ny, self.t, self.u)

    @property
    def n_layers(self) -> int:
        return table1_layers(self.nx, self.ny) if self.layers == "table1" else int(self.layers)

    @property
    def eval_caps(self) -> tuple[int, ...]:
        """Evaluation caps; defaults to ``min(512, 2 ** (nx * ny))``."""
        return self.chi_a or (min(512, 2 ** (self.nx * self.ny)),)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["optimizer"]["kind"] = self.optimizer.kind.value
        d["chi_a"] = list(self.chi_a)
        d["seeds"] = list(self.seeds)
        return d

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"unknown field(s) {', '.join(map(repr, unknown))}")
        data = dict(data)
        if "optimizer" in data:
            opt = data["optimizer"]
            if isinstance(opt, OptimizerConfig):
                pass
            elif isinstance(opt, dict):
                ok = {f.name for f in fields(OptimizerConfig)}
                bad = sorted(set(opt) - ok)
                if bad:
                    raise ConfigError(f"unknown field(s) in 'optimizer': {', '.join(map(repr, bad))}")
                try:
                    data["optimizer"] = OptimizerConfig(**opt)
                except ValueError as exc:
                    raise ConfigError(f"field 'optimizer': {exc}") from None
            else:
                raise ConfigError("field 'optimizer' must be an object")
        for key in ("t", "u"):
            if key in data and not isinstance(data[key], (int, float)):
                raise ConfigError(f"field {key!r}: expected a number, got {data[key]!r}")
            if key in data:
                data[key] = float(data[key])
        return cls(**data)

    @classmethod
    def from_json(cls, text: str) -> "RunConfig":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc.msg} at line {exc.lineno}, column {exc.colno}") from None
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        return cls.from_dict(data)


@dataclass
class RunRecord:
    config: dict
    seed: int
    theta: np.ndarray
    energy_chi_b: float
    energy_chi_a: dict[int, float]
    reference_energy: float | None
    exact_energy: float | None
    relative_error: float | None
    relative_error_chi_a: dict[int, float | None]
    infidelity: float | None
    trajectory: list[TrajectoryPoint]
    discarded_weight: float
    status: str
    n_gradient_calls: int
    circuit_hash: str
    versions: dict[str, str]
    label: str = ""

    def summary(self) -> dict[str, Any]:
        """Scalar fields only (no parameters or trajectory)."""
        return {
            "label": self.label,
            "seed": self.seed,
            "energy_chi_b": self.energy_chi_b,
            "energy_chi_a": {str(k): v for k, v in self.energy_chi_a.items()},
            "reference_energy": self.reference_energy,
            "exact_energy": self.exact_energy,
            "relative_error": self.relative_error,
            "relative_error_chi_a": {str(k): v for k, v in self.relative_error_chi_a.items()},
            "infidelity": self.infidelity,
            "discarded_weight": self.discarded_weight,
            "status": self.status,
            "n_gradient_calls": self.n_gradient_calls,
        }


def versions() -> dict[str, str]:
    return {
        "vtne": __version__,
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "python": platform.python_version(),
    }


def relative_error(energy: float | None, reference: float | None) -> float | None:
    """Signed ``(E - E_ref) / |E_ref|``."""
    if energy is None or reference is None:
        return None
    return (energy - reference) / abs(reference)


@dataclass(frozen=True)
class Reference:
    energy: float | None
    state: np.ndarray | None = None


_REFERENCE_CACHE: dict[tuple, Reference] = {}


def reference_for(lattice: LatticeConfig, override: float | None = None) -> Reference:
    """Exact ground state in the half-filled sector when the register allows it."""
    if override is not None:
        return Reference(float(override))
    if lattice.n_qubits > MAX_DENSE_H_QUBITS:
        return Reference(None)
    key = (lattice.nx, lattice.ny, lattice.t, lattice.u)
    if key not in _REFERENCE_CACHE:
        e0, psi0 = exact_ground(jordan_wigner_terms(lattice), lattice.n_qubits, n_particles=lattice.n_electrons)
        _REFERENCE_CACHE[key] = Reference(e0, psi0)
    return _REFERENCE_CACHE[key]


def evaluate_parameters(
    cfg: RunConfig, circuit: Circuit, theta: np.ndarray, ref: Reference | None = None
) -> dict[str, Any]:
    """Energies of ``theta`` at ``chi_b`` and every ``chi_a``, plus exact quantities when available."""
    lattice = cfg.lattice
    h = hubbard_mpo(lattice)
    ref = ref or reference_for(lattice, cfg.reference_energy)
    psi_b = circuit_to_mps(circuit, theta, cfg.chi_b)
    e_b = expectation(psi_b, h)
    e_a = {}
    for chi in cfg.eval_caps:
        e_a[chi] = e_b if chi == cfg.chi_b else energy_chi(circuit, theta, h, chi)
    exact = fid = None
    if lattice.n_qubits <= MAX_DENSE_H_QUBITS:
        obj = ExactObjective(circuit, pauli_operator(jordan_wigner_terms(lattice), lattice.n_qubits))
        state = obj.state(theta)
        exact = float(np.vdot(state, obj.h @ state).real)
        if ref.state is not None:
            fid = infidelity(obj.kernel.embed(state), ref.state)
    return {
        "energy_chi_b": e_b,
        "energy_chi_a": e_a,
        "exact_energy": exact,
        "infidelity": fid,
        "discarded_weight": psi_b.discarded_weight,
        "reference_energy": ref.energy,
        "relative_error": relative_error(e_b, ref.energy),
        "relative_error_chi_a": {k: relative_error(v, ref.energy) for k, v in e_a.items()},
    }


def run_vtne(cfg: RunConfig, seed: int | None = None) -> RunRecord:
    """Optimize at ``chi_b`` for one seed (default: the first of ``cfg.seeds``) and evaluate."""
    seed = cfg.seeds[0] if seed is None else seed
    opt = replace(cfg.optimizer, seed=seed)
    if opt.kind is not OptimizerKind.BFGS:
        raise ConfigError("field 'optimizer.kind': the optimization stage uses BFGS")
    lattice = cfg.lattice
    result = vtne_protocol(lattice, cfg.n_layers, cfg.chi_b, opt, cfg.mode)
    circuit = build_np_ansatz(lattice, cfg.n_layers)
    ev = evaluate_parameters(cfg, circuit, result.theta)
    offset = result.n_gradient_calls - result.trajectory[-1].n_gradient_calls
    traj = [replace(p, n_gradient_calls=p.n_gradient_calls + offset) for p in result.trajectory]
    return RunRecord(
        config=cfg.to_dict(),
        seed=seed,
        theta=result.theta,
        trajectory=traj,
        status=result.status.value,
        n_gradient_calls=result.n_gradient_calls,
        circuit_hash=circuit.structure_hash(),
        versions=versions(),
        label=f"chi{cfg.chi_b}",
        **ev,
    )


def adam_run(
    cfg: RunConfig, circuit: Circuit, objective, theta0, n_steps: int, label: str, seed: int, ref: Reference
) -> RunRecord:
    opt = replace(cfg.optimizer, kind=OptimizerKind.ADAM)
    res = adam_minimize(objective, theta0, opt, n_steps)
    return RunRecord(
        config=cfg.to_dict(),
        seed=seed,
        theta=res.theta,
        energy_chi_b=res.energy,
        energy_chi_a={},
        reference_energy=ref.energy,
        exact_energy=res.energy,
        relative_error=relative_error(res.energy, ref.energy),
        relative_error_chi_a={},
        infidelity=None,
        trajectory=res.trajectory,
        discarded_weight=0.0,
        status=res.status.value,
        n_gradient_calls=res.n_gradient_calls,
        circuit_hash=circuit.structure_hash(),
        versions=versions(),
        label=label,
    )


def run_warmstart_comparison(
    cfg: RunConfig,
    warm_starts: dict[str, np.ndarray],
    n_seeds: int = 10,
    n_steps: int = 1000,
    cold_sigma: float = 1e-3,
    direct_caps: Sequence[int] = (),
    seeds: Sequence[int] | None = None,
) -> list[RunRecord]:
    """Exact-energy Adam runs from random and from pre-optimized parameters.

    Cold runs start from ``N(0, cold_sigma)`` draws, one per seed ``0..n_seeds-1``
    (or per entry of ``seeds``).
    Each entry of ``warm_starts`` (label -> parameters) gives one warm run.
    For every cap in ``direct_caps`` and every seed, the cold draw is first
    optimized with BFGS at that cap (direct mode) and Adam continues from there.
    """
    lattice = cfg.lattice
    if lattice.n_qubits > MAX_DENSE_H_QUBITS:
        raise ConfigError(f"the comparison needs exact energies; {lattice.n_qubits} qubits exceeds {MAX_DENSE_H_QUBITS}")
    circuit = build_np_ansatz(lattice, cfg.n_layers)
    ref = reference_for(lattice, cfg.reference_energy)
    obj = ExactObjective(circuit, pauli_operator(jordan_wigner_terms(lattice), lattice.n_qubits))
    records = []
    for seed in range(n_seeds) if seeds is None else seeds:
        theta0 = np.random.default_rng(seed).normal(0.0, cold_sigma, circuit.n_params)
        records.append(adam_run(cfg, circuit, obj, theta0, n_steps, "cold", seed, ref))
        for cap in direct_caps:
            pre = vtne_protocol(lattice, cfg.n_layers, cap, replace(cfg.optimizer, seed=seed), "direct", theta0)
            records.append(adam_run(cfg, circuit, obj, pre.theta, n_steps, f"direct{cap}", seed, ref))
    for label, theta in warm_starts.items():
        theta = np.asarray(theta, dtype=float)
        if theta.shape != (circuit.n_params,):
            raise ConfigError(f"warm start {label!r} has {theta.size} parameters, circuit needs {circuit.n_params}")
        records.append(adam_run(cfg, circuit, obj, theta, n_steps, label, 0, ref))
    return records


def mean_trajectory(records: Sequence[RunRecord]) -> list[TrajectoryPoint]:
    """Step-wise mean over runs of equal length."""
    lengths = {len(r.trajectory) for r in records}
    if len(lengths) != 1:
        raise ValueError("trajectories differ in length")
    out = []
    for pts in zip(*(r.trajectory for r in records)):
        out.append(
            TrajectoryPoint(
                step=pts[0].step,
                energy=float(np.mean([p.energy for p in pts])),
                grad_norm=float(np.mean([p.grad_norm for p in pts])),
                n_gradient_calls=int(round(np.mean([p.n_gradient_calls for p in pts]))),
                wall_time_seconds=float(np.mean([p.wall_time_seconds for p in pts])),
            )
        )
    return out


def calls_to_reach(trajectory: Sequence[TrajectoryPoint], target: float) -> int | None:
    """Gradient calls at the first point with energy ``<= target`` (None if never)."""
    for p in trajectory:
        if p.energy <= target:
            return p.n_gradient_calls
    return None


def gradient_call_savings(
    cold: Sequence[TrajectoryPoint], warm: Sequence[TrajectoryPoint], at_step: int = 1000
) -> float:
    """How many fewer calls ``warm`` needs to reach ``cold``'s energy at ``at_step``.

    ``-inf`` when the warm trajectory never gets there.
    """
    target_point = next((p for p in cold if p.step == at_step), None)
    if target_point is None:
        raise ValueError(f"cold trajectory has no step {at_step}")
    reached = calls_to_reach(warm, target_point.energy)
    if reached is None:
        return -math.inf
    return float(target_point.n_gradient_calls - reached)


# -- files -------------------------------------------------------------------------


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x), ".17g")


def emit_csv(trajectory: Sequence[TrajectoryPoint], path, reference_energy: float | None = None) -> Path:
    """Write one row per trajectory point with the fixed header; LF line endings."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for p in trajectory:
            rel = relative_error(p.energy, reference_energy)
            w.writerow(
                [
                    _fmt(p.step),
                    _fmt(p.n_gradient_calls),
                    _fmt(p.energy),
                    _fmt(rel),
                    _fmt(p.grad_norm),
                    _fmt(p.wall_time_seconds),
                ]
            )
    return path


def read_csv(path) -> list[TrajectoryPoint]:
    with Path(path).open(encoding="utf-8", newline="") as fh:
        rows = list(csv.DictReader(fh))
    return [
        TrajectoryPoint(
            step=int(r["step"]),
            energy=float(r["energy"]),
            grad_norm=float(r["grad_norm"]),
            n_gradient_calls=int(r["n_gradient_calls"]),
            wall_time_seconds=float(r["wall_time_s"]),
        )
        for r in rows
    ]


_CHECKPOINT_KEYS = ("lattice", "layers", "chi_b", "seed", "params", "energy", "circuit_hash")


def save_checkpoint(record: RunRecord, path) -> Path:
    cfg = record.config
    data = {
        "lattice": {"nx": cfg["nx"], "ny": cfg["ny"], "t": cfg["t"], "u": cfg["u"]},
        "layers": table1_layers(cfg["nx"], cfg["ny"]) if cfg["layers"] == "table1" else cfg["layers"],
        "chi_b": cfg["chi_b"],
        "seed": record.seed,
        "params": [float(x) for x in record.theta],
        "energy": float(record.energy_chi_b),
        "circuit_hash": record.circuit_hash,
    }
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(data, indent=1) + "\n", encoding="utf-8")
    return path


@dataclass(frozen=True)
class Checkpoint:
    lattice: LatticeConfig
    layers: int
    chi_b: int
    seed: int
    params: np.ndarray
    energy: float
    circuit_hash: str


def read_checkpoint(path) -> Checkpoint:
    raw = Path(path).read_bytes()
    try:
        text = raw.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise CheckpointError(f"{path}: not UTF-8", offset=exc.start) from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        offset = len(text[: exc.pos].encode("utf-8"))
        raise CheckpointError(f"{path}: {exc.msg}", offset=offset) from None
    if not isinstance(data, dict):
        raise CheckpointError(f"{path}: expected a JSON object", offset=0)
    missing = [k for k in _CHECKPOINT_KEYS if k not in data]
    if missing:
        raise CheckpointError(f"{path}: missing field(s) {', '.join(missing)}")
    try:
        lat = data["lattice"]
        lattice = LatticeConfig(int(lat["nx"]), int(lat["ny"]), float(lat["t"]), float(lat["u"]))
        params = np.array(data["params"], dtype=float)
        ck = Checkpoint(
            lattice, int(data["layers"]), int(data["chi_b"]), int(data["seed"]), params, float(data["energy"]), str(data["circuit_hash"])
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise CheckpointError(f"{path}: malformed field ({exc})") from None
    if params.ndim != 1 or not np.all(np.isfinite(params)):
        raise CheckpointError(f"{path}: params must be a flat list of finite numbers")
    return ck


def load_checkpoint(path, expected: RunConfig | None = None) -> tuple[Circuit, np.ndarray]:
    """Rebuild the circuit a checkpoint was made with and return it with its parameters.

    Raises :class:`CheckpointError` when the stored circuit hash does not match
    the rebuilt circuit (or the circuit of ``expected``, when given).
    """
    ck = read_checkpoint(path)
    if expected is not None:
        lattice, layers = expected.lattice, expected.n_layers
    else:
        lattice, layers = ck.lattice, ck.layers
    circuit = build_np_ansatz(lattice, layers)
    if circuit.structure_hash() != ck.circuit_hash:
        raise CheckpointError(f"{path}: circuit hash does not match the configured circuit")
    if ck.params.shape != (circuit.n_params,):
        raise CheckpointError(f"{path}: {ck.params.size} parameters for a circuit with {circuit.n_params}")
    return circuit, ck.params


def write_record_json(record: RunRecord, path) -> Path:
    """Scalar summary of a run next to its CSV and checkpoint."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    data = {"config": record.config, "versions": record.versions, "circuit_hash": record.circuit_hash}
    data.update(record.summary())
    path.write_text(json.dumps(data, indent=1, sort_keys=True) + "\n", encoding="utf-8")
    return path
