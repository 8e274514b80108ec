"""Markovian data process and model assumptions.

The observed input X lives in R^d, the hidden coordinate Z in R; the pair
evolves through a Lipschitz map plus bounded zero-mean noise, and the target
Y is a Lipschitz readout of the pair plus bounded zero-mean noise.  A
contraction factor q0 < 1 derived from the Lipschitz constant and the
activation bound controls geometric mixing of the coupled data/memory chain.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .core import Activation, ConfigError, DomainError

Sampler = Callable[[np.random.Generator], np.ndarray]


@dataclass(frozen=True)
class DynamicsSpec:
    """One data-generating process.

    g_map maps the stacked state (x, z) in R^(d+1) to the next noiseless
    state; f_map maps (x, z) to the noiseless target.  Noise samplers may be
    None for noise-free components; bounds are recorded for validation.
    """

    name: str
    d: int
    g_map: Callable[[np.ndarray], np.ndarray]
    f_map: Callable[[np.ndarray], float]
    lipschitz: float
    init_sampler: Sampler
    eps_sampler: Sampler | None = None
    eps_bound: float = 0.0
    eta_sampler: Callable[[np.random.Generator], float] | None = None
    eta_bound: float = 0.0
    y_bound: float = 1.0

    def __post_init__(self) -> None:
        if self.d < 1:
            raise ConfigError(f"input dimension must be >= 1, got {self.d}")
        if not (0.0 < self.lipschitz < 1.0):
            raise ConfigError(
                f"joint Lipschitz constant must lie in (0, 1), got {self.lipschitz}")
        if self.eps_bound < 0 or self.eta_bound < 0 or self.y_bound <= 0:
            raise ConfigError("noise and target bounds must be non-negative")


@dataclass(frozen=True)
class DataState:
    """State of the data chain at step k."""

    x: np.ndarray
    z: float
    y: float
    k: int

    @property
    def xz(self) -> np.ndarray:
        return np.concatenate([self.x, [self.z]])


def _check_state(s: np.ndarray, y: float, spec: DynamicsSpec) -> None:
    if float(np.linalg.norm(s)) > 1.0 + 1e-9:
        raise DomainError(
            f"data state left the unit ball: |(x, z)| = {np.linalg.norm(s):.6f}")
    if abs(y) > spec.y_bound + 1e-9:
        raise DomainError(f"target left its bound: |y| = {abs(y):.6f} > {spec.y_bound}")


def initial_state(spec: DynamicsSpec, rng: np.random.Generator) -> DataState:
    """Draw the initial (x, z) and its target.

    The unit-ball constraint is enforced from step 1 on; the initial draw may
    sit slightly outside it (the built-in process starts from U[0, 1]
    coordinates and contracts into the ball after one step).
    """
    s = np.asarray(spec.init_sampler(rng), dtype=float)
    if s.shape != (spec.d + 1,):
        raise ConfigError(f"init sampler must return shape ({spec.d + 1},), got {s.shape}")
    eta = spec.eta_sampler(rng) if spec.eta_sampler is not None else 0.0
    y = float(spec.f_map(s)) + float(eta)
    if abs(y) > spec.y_bound + 1e-9:
        raise DomainError(f"target left its bound: |y| = {abs(y):.6f} > {spec.y_bound}")
    return DataState(x=s[:-1].copy(), z=float(s[-1]), y=y, k=0)


def step_data(state: DataState, spec: DynamicsSpec,
              rng: np.random.Generator) -> DataState:
    """Advance the chain one step: (x, z) <- g(x, z) + eps, y <- f(x, z) + eta."""
    s = np.asarray(spec.g_map(state.xz), dtype=float)
    if spec.eps_sampler is not None:
        s = s + np.asarray(spec.eps_sampler(rng), dtype=float)
    eta = spec.eta_sampler(rng) if spec.eta_sampler is not None else 0.0
    y = float(spec.f_map(s)) + float(eta)
    _check_state(s, y, spec)
    return DataState(x=s[:-1].copy(), z=float(s[-1]), y=y, k=state.k + 1)


# ---------------------------------------------------------------------------
# built-in process: damped tanh of a rotated diagonal contraction

def rotation_contraction_matrix() -> np.ndarray:
    """P diag(1, 1/2) P^-1 for the rotation P by -30 degrees (exact arithmetic)."""
    c, s = math.sqrt(3.0) / 2.0, -0.5
    p = np.array([[c, -s], [s, c]])
    return p @ np.diag([1.0, 0.5]) @ p.T


def make_builtin(f_map: Callable[[np.ndarray], float] | None = None,
                 eta_half_width: float = 0.05) -> DynamicsSpec:
    """Two-dimensional noise-free state dynamics with a noisy linear readout.

    (x, z) <- 0.5 * tanh(A (x, z)) with A = P diag(1, 1/2) P^-1, started from
    independent U[0, 1] coordinates; by default y = (x + z) / 4 + eta with
    eta ~ U[-0.05, 0.05].  The state map is a global 1/2-contraction, so the
    recorded joint Lipschitz constant is 0.5.
    """
    a = rotation_contraction_matrix()
    half = float(eta_half_width)
    if f_map is None:
        f_map = lambda s: float((s[0] + s[1]) / 4.0)
        f_sup = 0.5
    else:
        f_sup = 1.0
    eta_sampler = None
    if half > 0:
        eta_sampler = lambda rng: float(rng.uniform(-half, half))
    return DynamicsSpec(
        name="rotation-tanh",
        d=1,
        g_map=lambda s: 0.5 * np.tanh(a @ s),
        f_map=f_map,
        lipschitz=0.5,
        init_sampler=lambda rng: rng.uniform(0.0, 1.0, size=2),
        eps_sampler=None,
        eps_bound=0.0,
        eta_sampler=eta_sampler,
        eta_bound=half,
        y_bound=f_sup + half,
    )


# ---------------------------------------------------------------------------
# assumption validation

@dataclass(frozen=True)
class AssumptionReport:
    """Outcome of checking a process/activation pair against the standing assumptions."""

    q0: float
    lipschitz: float
    c_sigma: float
    checks: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return all(self.checks.values())


def validate_assumptions(spec: DynamicsSpec, act: Activation,
                         beta: float | None = None,
                         gamma: float | None = None) -> AssumptionReport:
    """Check contraction, activation-bound, and exponent-window conditions.

    The mixing factor is q0 = sqrt(L^2 + 8 C_sigma^2); the activation bound
    requires C_sigma^2 < min(1/2, (1 - L^2) / 8), which makes q0 < 1.
    """
    ell = spec.lipschitz
    cs = act.c_sigma
    q0 = math.sqrt(ell ** 2 + 8.0 * cs ** 2)
    checks = {
        "lipschitz_lt_1": 0.0 < ell < 1.0,
        "activation_bound": cs ** 2 < min(0.5, (1.0 - ell ** 2) / 8.0),
        "q0_lt_1": q0 < 1.0,
        "noise_bounded": spec.eps_bound < math.inf and spec.eta_bound < math.inf,
    }
    if beta is not None:
        checks["beta_window"] = 0.5 < beta < 1.0
    if gamma is not None and beta is not None:
        checks["gamma_window"] = 0.0 < gamma < (1.0 - beta) / 2.0
        checks["beta_gamma_sum"] = beta + 2.0 * gamma < 1.0
    return AssumptionReport(q0=q0, lipschitz=ell, c_sigma=cs, checks=checks)


def mixing_burn_in(q0: float, tol: float = 1e-6) -> int:
    """Smallest k with q0**k <= tol, from the geometric mixing bound."""
    if not (0.0 < q0 < 1.0):
        raise DomainError(f"mixing factor must lie in (0, 1), got {q0}")
    if not (0.0 < tol < 1.0):
        raise DomainError(f"tolerance must lie in (0, 1), got {tol}")
    return int(math.ceil(math.log(tol) / math.log(q0)))
