"""Kernel gradient-flow limit of the trained readout.

The infinite-width, long-run limit of the readout evolves by a linear
integro-differential flow against the stationary law of the coupled
data/memory chain.  Discretized over an M-point stationary sample the flow
is du/dt = -(alpha / M) K (u - y) with u(0) = 0, where K is the tangent-
kernel Gram matrix.  An explicit eigendecomposition solution
u(t) = (I - exp(-(alpha/M) K t)) y serves as the oracle for the RK4 path.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import Activation, ConfigError, DomainError, FuncH, MeasureSample
from .dynamics import DynamicsSpec, initial_state, mixing_burn_in, step_data, validate_assumptions
from .meanfield import MemoryChainState, chain_start, step_h


class StepSizeError(ValueError):
    """Requested time step violates the stability guard."""


@dataclass(frozen=True)
class StationarySample:
    """M draws (x_j, z_j, y_j, m_j) from the coupled data/memory chain.

    m_j is the feedback scalar of the memory function at the harvested step,
    so the state's ridge lift is w -> sigma(w . x_j + m_j).
    """

    x: np.ndarray
    z: np.ndarray
    y: np.ndarray
    m: np.ndarray
    burn_in: int
    stride: int
    seed: int

    def __len__(self) -> int:
        return self.y.shape[0]


def sample_mu(spec: DynamicsSpec, measure: MeasureSample, act: Activation,
              m_points: int, seed: int, stride: int | None = None,
              burn_in: int | None = None, tol: float = 1e-6) -> StationarySample:
    """Harvest a stationary sample from one long chain.

    Runs the coupled data/memory chain past a mixing burn-in derived from the
    geometric contraction factor, then records every ``stride``-th state.
    Single-chain harvesting trades independence for speed; the stride is
    chosen so consecutive records are decorrelated to the same tolerance.
    """
    report = validate_assumptions(spec, act)
    if not report.checks["q0_lt_1"]:
        raise ConfigError(f"mixing factor q0 = {report.q0:.4f} >= 1; cannot certify burn-in")
    k_mix = mixing_burn_in(report.q0, tol)
    if burn_in is None:
        burn_in = k_mix
    elif burn_in < k_mix:
        raise ConfigError(f"burn-in {burn_in} below the certified mixing time {k_mix}")
    if stride is None:
        stride = max(1, k_mix // 4)
    if m_points < 1:
        raise ConfigError(f"sample size must be positive, got {m_points}")

    rng = np.random.default_rng(seed)
    data = initial_state(spec, rng)
    h = chain_start("h")
    xs, zs, ys, ms = [], [], [], []
    total = burn_in + m_points * stride
    for k in range(total):
        h = step_h(h, data.x, measure, act)
        data = step_data(data, spec, rng)
        if k >= burn_in and (k - burn_in) % stride == 0:
            xs.append(data.x.copy())
            zs.append(data.z)
            ys.append(data.y)
            ms.append(h.m)
        if len(ys) == m_points:
            break
    return StationarySample(x=np.asarray(xs), z=np.asarray(zs), y=np.asarray(ys),
                            m=np.asarray(ms), burn_in=burn_in, stride=stride, seed=seed)


@dataclass(frozen=True)
class KernelGram:
    """Tangent-kernel Gram matrix over a stationary sample."""

    k: np.ndarray
    y: np.ndarray
    sample: StationarySample

    @property
    def m_points(self) -> int:
        return self.y.shape[0]


def build_gram(sample: StationarySample, measure: MeasureSample,
               act: Activation) -> KernelGram:
    """Gram matrix K[i, j] = <sigma_i sigma_j + c^2 sigma'_i sigma'_j x_i.x_j, measure>.

    Built from one shared measure sample, which keeps the matrix symmetric
    positive semi-definite by construction.
    """
    pre = measure.w @ sample.x.T + sample.m[None, :]
    f = act.sigma(pre)
    df = act.sigma_d1(pre)
    m_lam = len(measure)
    gram_x = sample.x @ sample.x.T
    k = (f.T @ f) / m_lam + ((df * measure.c[:, None] ** 2).T @ df) / m_lam * gram_x
    k = 0.5 * (k + k.T)
    return KernelGram(k=k, y=sample.y.copy(), sample=sample)


@dataclass(frozen=True)
class LimitTrajectory:
    """Readout values u_j(t) at the sample points along the flow."""

    times: np.ndarray
    u: np.ndarray
    alpha: float

    def at(self, t: float) -> np.ndarray:
        """Linear interpolation of the trajectory at time t."""
        if t < self.times[0] - 1e-12 or t > self.times[-1] + 1e-12:
            raise DomainError(f"time {t} outside the integrated range")
        out = np.empty(self.u.shape[1])
        for j in range(self.u.shape[1]):
            out[j] = np.interp(t, self.times, self.u[:, j])
        return out


def max_stable_dt(gram: KernelGram, alpha: float) -> float:
    """Stability guard: dt must stay below 0.1 / (alpha lambda_max(K) / M)."""
    lam_max = float(np.linalg.eigvalsh(gram.k)[-1])
    if lam_max <= 0:
        return math.inf
    return 0.1 / (alpha * lam_max / gram.m_points)


def integrate(gram: KernelGram, alpha: float, horizon: float,
              dt: float | None = None) -> LimitTrajectory:
    """Integrate du/dt = -(alpha/M) K (u - y) from u(0) = 0 by classical RK4."""
    if horizon <= 0:
        raise ConfigError(f"horizon must be positive, got {horizon}")
    guard = max_stable_dt(gram, alpha)
    if dt is None:
        dt = min(0.5 * guard, horizon / 10.0)
    if dt > guard:
        raise StepSizeError(f"dt = {dt} exceeds the stability guard {guard:.6g}")
    a = -(alpha / gram.m_points) * gram.k
    y = gram.y

    def rhs(u):
        return a @ (u - y)

    n_steps = int(math.ceil(horizon / dt))
    dt = horizon / n_steps
    times = np.linspace(0.0, horizon, n_steps + 1)
    u = np.zeros((n_steps + 1, y.shape[0]))
    for i in range(n_steps):
        ui = u[i]
        k1 = rhs(ui)
        k2 = rhs(ui + 0.5 * dt * k1)
        k3 = rhs(ui + 0.5 * dt * k2)
        k4 = rhs(ui + dt * k3)
        u[i + 1] = ui + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
    return LimitTrajectory(times=times, u=u, alpha=alpha)


def closed_form(gram: KernelGram, alpha: float, times) -> LimitTrajectory:
    """Oracle solution u(t) = (I - exp(-(alpha/M) K t)) y via eigendecomposition."""
    times = np.atleast_1d(np.asarray(times, dtype=float))
    evals, vecs = np.linalg.eigh(gram.k)
    coeff = vecs.T @ gram.y
    u = np.empty((times.shape[0], gram.m_points))
    for i, t in enumerate(times):
        decay = 1.0 - np.exp(-(alpha / gram.m_points) * evals * t)
        u[i] = vecs @ (decay * coeff)
    return LimitTrajectory(times=times, u=u, alpha=alpha)


def loss_curve(traj: LimitTrajectory, gram: KernelGram) -> tuple[np.ndarray, bool]:
    """Mean-square loss along the flow and a monotone-decrease flag.

    The flag tolerates increases up to 1e-10 of the initial loss.
    """
    losses = 0.5 * np.mean((traj.u - gram.y[None, :]) ** 2, axis=1)
    monotone = bool(np.all(np.diff(losses) <= 1e-10 * max(losses[0], 1e-300)))
    return losses, monotone


def g_limit_eval(traj: LimitTrajectory, gram: KernelGram, h_test: FuncH,
                 measure: MeasureSample, act: Activation,
                 t: float | None = None) -> np.ndarray:
    """Limit readout g_t(h) = -alpha int_0^t mean_j[(u_j - y_j) K_j(h)] ds.

    K_j(h) is the tangent pairing of the test function with sample point j;
    the time integral is a trapezoid rule over the trajectory grid.  Returns
    the value at every grid time up to t (all grid times if t is None).
    """
    sample = gram.sample
    pre = measure.w @ sample.x.T + sample.m[None, :]
    hv = h_test.value(measure.w, act)
    hg = h_test.grad(measure.w, act)
    cols = (act.sigma(pre) * hv[:, None]
            + (measure.c[:, None] ** 2) * act.sigma_d1(pre) * (hg @ sample.x.T))
    k_cols = cols.mean(axis=0)

    integrand = -traj.alpha * np.mean((traj.u - gram.y[None, :]) * k_cols[None, :], axis=1)
    times = traj.times
    if t is not None:
        if t > times[-1] + 1e-12:
            raise DomainError(f"time {t} outside the integrated range")
        mask = times <= t + 1e-12
        times = times[mask]
        integrand = integrand[mask]
    out = np.concatenate([[0.0], np.cumsum(0.5 * (integrand[1:] + integrand[:-1])
                                           * np.diff(times))])
    return out
