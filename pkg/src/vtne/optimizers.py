"""BFGS and Adam minimizers plus the two-stage warm-start protocol.

Every minimizer takes ``f_and_grad(theta) -> (f, grad)``. Each call counts as
one gradient call; that count is the currency the warm-start comparison is
measured in, so the minimizers never evaluate ``f`` without its gradient.
"""

from __future__ import annotations

import enum
import logging
import time
import warnings
from dataclasses import dataclass, field
from typing import Callable, Iterator

import numpy as np
from scipy.optimize import line_search

from .errors import ConfigError, NumericalIntegrityError

log = logging.getLogger(__name__)

FAndGrad = Callable[[np.ndarray], tuple[float, np.ndarray]]


class OptimizerKind(str, enum.Enum):
    BFGS = "bfgs"
    ADAM = "adam"


class Status(str, enum.Enum):
    FTOL = "ftol"
    GTOL = "gtol"
    MAX_ITERS = "max_iters"
    LINE_SEARCH_FAILED = "line_search_failed"
    STEPS_DONE = "steps_done"


_DEFAULT_ITERS = {OptimizerKind.BFGS: 5000, OptimizerKind.ADAM: 20000}


@dataclass(frozen=True)
class OptimizerConfig:
    kind: OptimizerKind = OptimizerKind.BFGS
    ftol: float = 1e-7
    gtol: float = 1e-6
    alpha: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    max_iters: int | None = None
    seed: int = 0
    init_sigma: float = 1e-5

    def __post_init__(self):
        object.__setattr__(self, "kind", OptimizerKind(self.kind))
        for name in ("ftol", "gtol", "alpha", "eps", "init_sigma"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive, got {getattr(self, name)!r}")
        for name in ("beta1", "beta2"):
            if not 0 < getattr(self, name) < 1:
                raise ConfigError(f"{name} must lie in (0, 1), got {getattr(self, name)!r}")
        if self.max_iters is not None and self.max_iters < 0:
            raise ConfigError("max_iters must be non-negative")

    @property
    def iterations(self) -> int:
        return _DEFAULT_ITERS[self.kind] if self.max_iters is None else self.max_iters


@dataclass(frozen=True)
class TrajectoryPoint:
    step: int
    energy: float
    grad_norm: float
    n_gradient_calls: int
    wall_time_seconds: float


@dataclass(frozen=True)
class MinimizeResult:
    """Final parameters and the per-step trajectory.

    Unpacks as ``theta, trajectory = result``.
    """

    theta: np.ndarray
    trajectory: list[TrajectoryPoint]
    status: Status
    n_gradient_calls: int

    @property
    def energy(self) -> float:
        return self.trajectory[-1].energy

    def __iter__(self) -> Iterator:
        return iter((self.theta, self.trajectory))


class CountingObjective:
    """Wraps ``f_and_grad``: counts calls, checks finiteness, caches the last point."""

    def __init__(self, f_and_grad: FAndGrad):
        self._fg = f_and_grad
        self.calls = 0
        self._last_x: bytes | None = None
        self._last: tuple[float, np.ndarray] | None = None

    def __call__(self, x: np.ndarray) -> tuple[float, np.ndarray]:
        x = np.asarray(x, dtype=float)
        key = x.tobytes()
        if key == self._last_x:
            return self._last
        f, g = self._fg(x)
        self.calls += 1
        f = float(f)
        g = np.asarray(g, dtype=float)
        if not np.isfinite(f):
            raise NumericalIntegrityError(f"objective returned {f} at call {self.calls}")
        if not np.all(np.isfinite(g)):
            raise NumericalIntegrityError(f"gradient contains NaN or Inf at call {self.calls}")
        self._last_x, self._last = key, (f, g)
        return f, g


def _wolfe_step(obj: CountingObjective, x, p, f, g, f_old):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")  # failures are reported through the status flag
        alpha, *_ = line_search(
            lambda z: obj(z)[0],
            lambda z: obj(z)[1],
            x,
            p,
            gfk=g,
            old_fval=f,
            old_old_fval=f_old,
            c1=1e-4,
            c2=0.9,
        )
    return alpha


def _backtrack(obj: CountingObjective, x, p, f, g, max_halvings: int = 40):
    """Armijo backtracking; used when the energy is too rough for the Wolfe search."""
    slope = float(g @ p)
    alpha = min(1.0, 1.0 / float(np.linalg.norm(p)))
    for _ in range(max_halvings):
        if obj(x + alpha * p)[0] <= f + 1e-4 * alpha * slope:
            return alpha
        alpha *= 0.5
    return None


def bfgs_minimize(f_and_grad: FAndGrad, theta0, cfg: OptimizerConfig | None = None) -> MinimizeResult:
    """Dense-inverse-Hessian BFGS with a strong Wolfe line search.

    Stops when ``|grad| <= gtol``, after ``max_iters`` iterations, or when one
    accepted step changes ``f`` by at most ``ftol``. The ftol test is armed only
    after the first step that changes ``f`` by more than ``ftol``: runs started
    next to a stationary point (the usual small-noise initialization) begin with
    tiny decreases and would otherwise stop at once.

    When the Wolfe search fails (truncated energies are only piecewise smooth)
    the inverse Hessian is reset and the step is retried along steepest
    descent, first with the Wolfe search and then with Armijo backtracking.
    Only if no decrease is found at all does the run end at the current point
    with status ``LINE_SEARCH_FAILED``.
    """
    cfg = cfg or OptimizerConfig()
    obj = CountingObjective(f_and_grad)
    x = np.array(theta0, dtype=float)
    n = x.size
    t0 = time.perf_counter()
    f, g = obj(x)
    gnorm = float(np.linalg.norm(g))
    traj = [TrajectoryPoint(0, f, gnorm, obj.calls, time.perf_counter() - t0)]
    if gnorm <= cfg.gtol:
        return MinimizeResult(x, traj, Status.GTOL, obj.calls)
    eye = np.eye(n)
    hinv = eye.copy()
    scaled = False
    armed = False
    f_old = f + gnorm / 2  # first trial step of length min(|g|, 1), as in scipy
    status = Status.MAX_ITERS
    for it in range(1, cfg.iterations + 1):
        p = -hinv @ g
        if g @ p >= 0:
            hinv, scaled = eye.copy(), False
            p = -g
        path = "wolfe"
        alpha = _wolfe_step(obj, x, p, f, g, f_old)
        if alpha is None and scaled:
            hinv, scaled = eye.copy(), False
            p = -g
            path = "wolfe-sd"
            alpha = _wolfe_step(obj, x, p, f, g, f + gnorm / 2)
        if alpha is None:
            hinv, scaled = eye.copy(), False
            p = -g
            path = "armijo-sd"
            alpha = _backtrack(obj, x, p, f, g)
        if alpha is None:
            status = Status.LINE_SEARCH_FAILED
            break
        s = alpha * p
        f_new, g_new = obj(x + s)
        if f_new > f:
            status = Status.LINE_SEARCH_FAILED
            break
        y = g_new - g
        f_old, f = f, f_new
        x, g = x + s, g_new
        gnorm = float(np.linalg.norm(g))
        traj.append(TrajectoryPoint(it, f, gnorm, obj.calls, time.perf_counter() - t0))
        log.debug("iter %d f=%.10g df=%.3g |g|=%.3g step=%.3g %s calls=%d", it, f, f - f_old, gnorm, alpha * np.linalg.norm(p), path, obj.calls)
        if gnorm <= cfg.gtol:
            status = Status.GTOL
            break
        if abs(f_old - f) > cfg.ftol:
            armed = True
        elif armed:
            status = Status.FTOL
            break
        sy = float(s @ y)
        if sy <= 1e-12 * np.linalg.norm(s) * np.linalg.norm(y):
            continue  # no usable curvature along this step
        if not scaled:
            hinv = eye * (sy / float(y @ y))
            scaled = True
        rho = 1.0 / sy
        hy = hinv @ y
        hinv += (rho * rho * float(y @ hy) + rho) * np.outer(s, s) - rho * (np.outer(hy, s) + np.outer(s, hy))
    return MinimizeResult(x, traj, status, obj.calls)


def adam_minimize(
    f_and_grad: FAndGrad, theta0, cfg: OptimizerConfig | None = None, n_steps: int | None = None
) -> MinimizeResult:
    """Bias-corrected Adam for ``n_steps`` updates.

    The trajectory has ``n_steps + 1`` points, one per evaluated parameter
    vector, starting with ``theta0``.
    """
    cfg = cfg or OptimizerConfig(kind=OptimizerKind.ADAM)
    steps = cfg.iterations if n_steps is None else n_steps
    obj = CountingObjective(f_and_grad)
    x = np.array(theta0, dtype=float)
    m = np.zeros_like(x)
    v = np.zeros_like(x)
    t0 = time.perf_counter()
    traj: list[TrajectoryPoint] = []
    for k in range(steps + 1):
        f, g = obj(x)
        traj.append(TrajectoryPoint(k, f, float(np.linalg.norm(g)), obj.calls, time.perf_counter() - t0))
        if k == steps:
            break
        m = cfg.beta1 * m + (1 - cfg.beta1) * g
        v = cfg.beta2 * v + (1 - cfg.beta2) * g * g
        m_hat = m / (1 - cfg.beta1 ** (k + 1))
        v_hat = v / (1 - cfg.beta2 ** (k + 1))
        x = x - cfg.alpha * m_hat / (np.sqrt(v_hat) + cfg.eps)
    return MinimizeResult(x, traj, Status.STEPS_DONE, obj.calls)


def minimize(f_and_grad: FAndGrad, theta0, cfg: OptimizerConfig) -> MinimizeResult:
    if cfg.kind is OptimizerKind.BFGS:
        return bfgs_minimize(f_and_grad, theta0, cfg)
    return adam_minimize(f_and_grad, theta0, cfg)


# -- two-stage protocol ---------------------------------------------------------


@dataclass
class ProtocolResult:
    """Outcome of :func:`vtne_protocol`.

    ``stages`` maps a stage name (``"up"``, ``"down"``, ``"full"``) to its
    minimizer result; ``trajectory`` is the final stage's.
    """

    theta: np.ndarray
    energy: float
    trajectory: list[TrajectoryPoint]
    status: Status
    seed: int
    n_gradient_calls: int
    stages: dict[str, MinimizeResult] = field(default_factory=dict)
    theta_initial: np.ndarray | None = None
    discarded_weight: float = 0.0


def vtne_protocol(
    lattice,
    layers: int,
    cap: int,
    cfg: OptimizerConfig | None = None,
    mode: str = "warm",
    theta0_override=None,
    backend: str = "sweep",
    right_cap: int | None = None,
) -> ProtocolResult:
    """Optimize the interacting ansatz at bond cap ``cap``.

    ``right_cap`` is the bond cap of ``H|psi>`` inside the gradient sweep
    (default ``cap``).

    ``mode="warm"``: minimize each spin species' hopping-only circuit from
    ``N(0, init_sigma)`` draws, embed both into the full circuit (onsite and Rz
    slots zero) and minimize the full energy from there.
    ``mode="direct"``: minimize the full energy from ``theta0_override``, or
    from a ``N(0, init_sigma)`` draw when none is given.
    """
    from dataclasses import replace

    from .ansatz import build_noninteracting_ansatz, build_np_ansatz, embed_noninteracting_params
    from .gradient import make_objective
    from .hubbard import Spin, build_mpo, jordan_wigner_terms, species_terms

    def hamiltonian(terms, n):
        if backend == "exact":
            from .oracle import pauli_operator

            return pauli_operator(terms, n)
        return build_mpo(terms, n)

    cfg = cfg or OptimizerConfig()
    if cap < 1:
        raise ConfigError("bond cap must be >= 1")
    full = build_np_ansatz(lattice, layers)
    rng = np.random.default_rng(cfg.seed)
    stages: dict[str, MinimizeResult] = {}
    calls = 0
    if mode == "warm":
        h_free = hamiltonian(species_terms(replace(lattice, u=0.0)), lattice.n_sites)
        species = {}
        for spin in (Spin.UP, Spin.DOWN):
            circ = build_noninteracting_ansatz(lattice, layers, spin)
            th0 = rng.normal(0.0, cfg.init_sigma, circ.n_params)
            res = minimize(make_objective(circ, h_free, cap, backend, right_cap=right_cap), th0, cfg)
            stages[spin.value] = res
            species[spin] = (circ, res.theta)
            calls += res.n_gradient_calls
        (c_up, th_up), (c_dn, th_dn) = species[Spin.UP], species[Spin.DOWN]
        theta0 = embed_noninteracting_params(th_up, th_dn, full, c_up, c_dn)
        # The embedded point is an exact stationary point of the interacting
        # energy (real amplitudes, fixed S_z, uniform density), so the slots the
        # embedding leaves at zero get the same small noise as stage 1.
        filled = np.zeros(full.n_params, dtype=bool)
        for g in full.gates:
            if g.tag and g.tag[0] == "hop":
                filled[list(g.slots)] = True
        theta0[~filled] = rng.normal(0.0, cfg.init_sigma, int((~filled).sum()))
    elif mode == "direct":
        if theta0_override is None:
            theta0 = rng.normal(0.0, cfg.init_sigma, full.n_params)
        else:
            theta0 = np.array(theta0_override, dtype=float)
            if theta0.shape != (full.n_params,):
                raise ConfigError(f"theta0_override has {theta0.size} entries, circuit needs {full.n_params}")
    else:
        raise ConfigError(f"mode must be 'warm' or 'direct', got {mode!r}")
    obj = make_objective(full, hamiltonian(jordan_wigner_terms(lattice), lattice.n_qubits), cap, backend, right_cap=right_cap)
    res = minimize(obj, theta0, cfg)
    stages["full"] = res
    calls += res.n_gradient_calls
    return ProtocolResult(
        theta=res.theta,
        energy=res.energy,
        trajectory=res.trajectory,
        status=res.status,
        seed=cfg.seed,
        n_gradient_calls=calls,
        stages=stages,
        theta_initial=np.asarray(theta0, dtype=float),
    )
