"""Shared numerical primitives.

Bounded smooth activations with exact derivatives, a smooth saturating
clipping family with compactly supported derivative, Monte-Carlo sampling of
the parameter measure, ridge test functions with Sobolev (H^1) distances, and
log-log rate fitting for convergence studies.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.integrate import quad
from scipy.special import expit


class DomainError(ValueError):
    """Input lies outside an operation's documented domain."""


class ConfigError(ValueError):
    """Inconsistent or inadmissible configuration."""


# ---------------------------------------------------------------------------
# activation

@dataclass(frozen=True)
class Activation:
    """Logistic activation scaled by ``scale`` in (0, 1].

    sigma(z) = scale / (1 + exp(-z)), so the output stays in [0, scale]
    and sup|sigma'| = scale / 4.
    """

    scale: float = 1.0

    def __post_init__(self) -> None:
        if not (0.0 < self.scale <= 1.0):
            raise ConfigError(f"activation scale must be in (0, 1], got {self.scale}")

    @property
    def c_sigma(self) -> float:
        """Common bound on |sigma'| and |sigma''|.

        For the scaled logistic, sup|sigma'| = scale/4 while
        sup|sigma''| = scale/(6*sqrt(3)) < scale/4, so scale/4 bounds both.
        """
        return self.scale / 4.0

    def sigma(self, z):
        return self.scale * expit(z)

    def sigma_d1(self, z):
        e = expit(z)
        return self.scale * e * (1.0 - e)

    def sigma_d2(self, z):
        e = expit(z)
        return self.scale * e * (1.0 - e) * (1.0 - 2.0 * e)


def act_eval(z: float, act: Activation) -> tuple[float, float, float]:
    """Value, first and second derivative of the activation at a scalar z."""
    z = float(z)
    if not math.isfinite(z):
        raise DomainError(f"activation argument must be finite, got {z}")
    return float(act.sigma(z)), float(act.sigma_d1(z)), float(act.sigma_d2(z))


# ---------------------------------------------------------------------------
# smooth clipping
#
# psi is odd, equals the identity on [-A, A] with A = n**gamma, saturates at
# 1.5*A beyond 2*A, and its derivative is the smooth plateau bump
# rho(x) = step(2 - |x|/A) built from the standard mollifier
# step(u) = f(u) / (f(u) + f(1-u)), f(u) = exp(-1/u) for u > 0.

def _mollifier_step(u: float) -> float:
    """C-infinity monotone step: 0 for u <= 0, 1 for u >= 1."""
    if u <= 0.0:
        return 0.0
    if u >= 1.0:
        return 1.0
    fu = math.exp(-1.0 / u)
    fv = math.exp(-1.0 / (1.0 - u))
    return fu / (fu + fv)


@lru_cache(maxsize=4096)
def _ramp_excess(r: float) -> float:
    """integral_1^r step(2 - u) du for r in [1, 2], by adaptive quadrature."""
    val, _ = quad(lambda u: _mollifier_step(2.0 - u), 1.0, r, epsabs=1e-12)
    return val


@dataclass(frozen=True)
class ClipSpec:
    """Width/exponent pair selecting one member of the clipping family."""

    n: int
    gamma: float

    def __post_init__(self) -> None:
        if self.n < 1:
            raise ConfigError(f"clip width parameter must be >= 1, got {self.n}")
        if not (0.0 < self.gamma < 0.25):
            raise ConfigError(f"clip exponent must be in (0, 0.25), got {self.gamma}")

    @property
    def threshold(self) -> float:
        """Half-width A of the identity region."""
        return float(self.n) ** self.gamma


def clip_deriv(x: float, spec: ClipSpec) -> float:
    """Derivative of the clipping map: 1 on |x| <= A, 0 beyond 2A, smooth between."""
    x = float(x)
    if not math.isfinite(x):
        raise DomainError(f"clip argument must be finite, got {x}")
    a = spec.threshold
    r = abs(x) / a
    if r <= 1.0:
        return 1.0
    if r >= 2.0:
        return 0.0
    return _mollifier_step(2.0 - r)


def clip_eval(x: float, spec: ClipSpec) -> float:
    """Smooth clip of x: identity on [-A, A], saturating at +-1.5*A."""
    x = float(x)
    if not math.isfinite(x):
        raise DomainError(f"clip argument must be finite, got {x}")
    a = spec.threshold
    r = abs(x) / a
    if r <= 1.0:
        return x
    # by symmetry of the step, integral_1^2 step(2-u) du = 1/2 exactly
    excess = 0.5 if r >= 2.0 else _ramp_excess(round(min(r, 2.0), 12))
    return math.copysign(a * (1.0 + excess), x)


# ---------------------------------------------------------------------------
# parameter measure

@dataclass(frozen=True)
class MeasureSample:
    """Monte-Carlo sample (c_i, w_i, b_i) from the parameter measure."""

    c: np.ndarray
    w: np.ndarray
    b: np.ndarray
    source: str
    seed: int

    def __post_init__(self) -> None:
        if self.c.ndim != 1 or self.b.ndim != 1 or self.w.ndim != 2:
            raise ConfigError("measure sample must have c, b of shape (M,) and w of shape (M, d)")
        m = self.c.shape[0]
        if self.b.shape[0] != m or self.w.shape[0] != m:
            raise ConfigError("measure sample components must share the leading dimension")
        if m == 0:
            raise DomainError("measure sample must be non-empty")

    def __len__(self) -> int:
        return self.c.shape[0]

    @property
    def d(self) -> int:
        return self.w.shape[1]


def sample_lambda(m: int, d: int, seed: int) -> MeasureSample:
    """Draw m i.i.d. triples: c ~ U[-1,1], b ~ U[0,1], w ~ N(0, I/d)."""
    if m < 1 or d < 1:
        raise ConfigError(f"sample size and dimension must be positive, got m={m}, d={d}")
    rng = np.random.default_rng(seed)
    c = rng.uniform(-1.0, 1.0, size=m)
    b = rng.uniform(0.0, 1.0, size=m)
    w = rng.normal(0.0, 1.0 / math.sqrt(d), size=(m, d))
    return MeasureSample(c=c, w=w, b=b, source="default", seed=seed)


# ---------------------------------------------------------------------------
# ridge test functions

@dataclass(frozen=True)
class FuncH:
    """Ridge function w -> sigma(w . a + b); a of None encodes the zero function."""

    a: np.ndarray | None = None
    b: float = 0.0

    @staticmethod
    def zero() -> "FuncH":
        return FuncH(a=None, b=0.0)

    @staticmethod
    def ridge(a: np.ndarray, b: float) -> "FuncH":
        a = np.asarray(a, dtype=float)
        return FuncH(a=a, b=float(b))

    @property
    def is_zero(self) -> bool:
        return self.a is None

    def value(self, w: np.ndarray, act: Activation) -> np.ndarray:
        """Evaluate at rows of w, shape (M, d) -> (M,)."""
        w = np.atleast_2d(np.asarray(w, dtype=float))
        if self.a is None:
            return np.zeros(w.shape[0])
        return act.sigma(w @ self.a + self.b)

    def grad(self, w: np.ndarray, act: Activation) -> np.ndarray:
        """Gradient in w at rows of w, shape (M, d) -> (M, d)."""
        w = np.atleast_2d(np.asarray(w, dtype=float))
        if self.a is None:
            return np.zeros_like(w)
        d1 = act.sigma_d1(w @ self.a + self.b)
        return d1[:, None] * self.a[None, :]


def feedback_integral(x: np.ndarray, m: float, measure: MeasureSample,
                      act: Activation) -> float:
    """Monte-Carlo estimate of <b sigma(w . x + m), measure>."""
    x = np.asarray(x, dtype=float)
    if x.shape != (measure.d,):
        raise DomainError(f"input must have shape ({measure.d},), got {x.shape}")
    return float(np.mean(measure.b * act.sigma(measure.w @ x + float(m))))


def measure_feedback(h: FuncH, measure: MeasureSample, act: Activation) -> float:
    """Monte-Carlo estimate of <b h(w), measure> for a ridge function h."""
    return float(np.mean(measure.b * h.value(measure.w, act)))


def h1_distance_sq(h_a: FuncH, h_b: FuncH, measure: MeasureSample,
                   act: Activation) -> float:
    """Monte-Carlo H^1 distance squared: E_w[(hA-hB)^2 + |grad hA - grad hB|^2]."""
    dv = h_a.value(measure.w, act) - h_b.value(measure.w, act)
    dg = h_a.grad(measure.w, act) - h_b.grad(measure.w, act)
    return float(np.mean(dv ** 2 + np.sum(dg ** 2, axis=1)))


# ---------------------------------------------------------------------------
# rate fitting

@dataclass(frozen=True)
class RateFit:
    """Least-squares fit of log(value) against log(size)."""

    slope: float
    intercept: float
    r_squared: float


def fit_rate(sizes, values) -> RateFit:
    """Fit value ~ const * size**slope through log-log least squares."""
    sizes = np.asarray(sizes, dtype=float)
    values = np.asarray(values, dtype=float)
    if sizes.shape != values.shape or sizes.ndim != 1:
        raise DomainError("sizes and values must be 1-d arrays of equal length")
    if sizes.size < 2:
        raise DomainError("rate fit needs at least two points")
    if np.any(sizes <= 0) or np.any(values <= 0):
        raise DomainError("rate fit needs strictly positive sizes and values")
    lx, ly = np.log(sizes), np.log(values)
    slope, intercept = np.polyfit(lx, ly, 1)
    resid = ly - (slope * lx + intercept)
    ss_tot = float(np.sum((ly - ly.mean()) ** 2))
    r2 = 1.0 if ss_tot == 0.0 else 1.0 - float(np.sum(resid ** 2)) / ss_tot
    return RateFit(slope=float(slope), intercept=float(intercept), r_squared=r2)
