"""Finite-width recurrent network and its online training loop.

N hidden units share a mean-field memory feedback: the next memory state is
S_{k+1}[i] = sigma(W[i] . X_k + (1/N) sum_j B[j] S_k[j]) and the prediction
is N**(-beta) sum_i C[i] S_{k+1}[i] with beta in (1/2, 1).  Training is
online SGD with gradients truncated to one step of the recursion, a clipped
residual, and layer-specific rate scalings so that the effective rate is
alpha / N**(2 - 2 beta).
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from .core import (Activation, ClipSpec, ConfigError, DomainError, FuncH,
                   MeasureSample, clip_deriv, clip_eval, sample_lambda)
from .dynamics import DataState, DynamicsSpec, initial_state, step_data


@dataclass(frozen=True)
class ModelConfig:
    """Width, exponents, and learning rate of one model instance."""

    n: int
    d: int = 1
    beta: float = 0.75
    gamma: float = 0.1
    alpha: float = 1.0
    seed: int = 0
    c_update_index: str = "own"

    def __post_init__(self) -> None:
        if self.n < 1 or self.d < 1:
            raise ConfigError(f"width and dimension must be positive, got n={self.n}, d={self.d}")
        if not (0.5 < self.beta < 1.0):
            raise ConfigError(f"output exponent must lie in (1/2, 1), got {self.beta}")
        if not (0.0 < self.gamma < (1.0 - self.beta) / 2.0):
            raise ConfigError(
                f"clip exponent must lie in (0, {(1.0 - self.beta) / 2.0}), got {self.gamma}")
        if self.alpha <= 0:
            raise ConfigError(f"learning rate must be positive, got {self.alpha}")
        if self.c_update_index not in ("own", "mean"):
            raise ConfigError("c_update_index must be 'own' or 'mean'")

    @property
    def effective_rate(self) -> float:
        return self.alpha / float(self.n) ** (2.0 - 2.0 * self.beta)

    @property
    def clip_spec(self) -> ClipSpec:
        return ClipSpec(n=self.n, gamma=self.gamma)


@dataclass
class ParamSet:
    """Live parameters plus a frozen copy of their initial values."""

    c: np.ndarray
    w: np.ndarray
    b: np.ndarray
    c0: np.ndarray
    w0: np.ndarray
    b0: np.ndarray

    def copy(self) -> "ParamSet":
        return ParamSet(self.c.copy(), self.w.copy(), self.b.copy(),
                        self.c0, self.w0, self.b0)


def init_params(cfg: ModelConfig, measure: MeasureSample | None = None) -> ParamSet:
    """Draw (C, W, B) i.i.d. from the parameter measure (or reuse a sample)."""
    if measure is None:
        measure = sample_lambda(cfg.n, cfg.d, cfg.seed)
    if len(measure) != cfg.n or measure.d != cfg.d:
        raise ConfigError("measure sample shape does not match model config")
    c, w, b = measure.c.copy(), measure.w.copy(), measure.b.copy()
    return ParamSet(c=c, w=w, b=b, c0=c.copy(), w0=w.copy(), b0=b.copy())


@dataclass(frozen=True)
class HiddenState:
    """Memory vector of the N units at step k (S_0 = 0)."""

    s: np.ndarray
    k: int


def zero_hidden(cfg: ModelConfig) -> HiddenState:
    return HiddenState(s=np.zeros(cfg.n), k=0)


def memory_step(p: ParamSet, hidden: HiddenState, x: np.ndarray,
                act: Activation) -> HiddenState:
    """S_{k+1} = sigma(W x + mean(B * S_k)); O(N d) work."""
    m = float(p.b @ hidden.s) / hidden.s.shape[0]
    return HiddenState(s=act.sigma(p.w @ x + m), k=hidden.k + 1)


def predict(p: ParamSet, hidden: HiddenState, cfg: ModelConfig) -> float:
    """Scaled readout N**(-beta) sum_i C_i S_i."""
    return float(p.c @ hidden.s) / float(cfg.n) ** cfg.beta


def drift(p: ParamSet) -> tuple[np.ndarray, float]:
    """Per-unit |C - C0| + |W - W0| + |B - B0| and its maximum."""
    per_unit = (np.abs(p.c - p.c0)
                + np.linalg.norm(p.w - p.w0, axis=1)
                + np.abs(p.b - p.b0))
    return per_unit, float(per_unit.max())


@dataclass(frozen=True)
class StepInfo:
    """Quantities read during one SGD step, at pre-update parameter values."""

    x: np.ndarray
    y: float
    y_hat: float
    residual: float
    s_prev: np.ndarray
    s_next: np.ndarray
    ds_next: np.ndarray
    c_before: np.ndarray
    w_before: np.ndarray


def sgd_tbptt_step(p: ParamSet, hidden: HiddenState, data: DataState,
                   cfg: ModelConfig, act: Activation) -> tuple[ParamSet, HiddenState, StepInfo]:
    """One online SGD step with one-step-truncated gradients.

    All right-hand sides are read at the pre-update parameters.  The residual
    is clip(y_hat) - y; the C update uses each unit's own new memory state
    (set c_update_index='mean' for the layer-averaged variant); the B update
    applies the shared sum over units sum_l C_l S_k[l] sigma'_l, identical
    across units.
    """
    n = cfg.n
    x = data.x
    m = float(p.b @ hidden.s) / n
    pre = p.w @ x + m
    s_next = act.sigma(pre)
    ds_next = act.sigma_d1(pre)
    y_hat = float(p.c @ s_next) / float(n) ** cfg.beta
    residual = clip_eval(y_hat, cfg.clip_spec) - data.y

    rate = cfg.alpha / float(n) ** (2.0 - cfg.beta)
    if cfg.c_update_index == "own":
        c_dir = s_next
    else:
        c_dir = np.full(n, float(s_next.mean()))
    c_new = p.c - rate * residual * c_dir
    w_new = p.w - rate * residual * (p.c * ds_next)[:, None] * x[None, :]
    shared = float(p.c @ (hidden.s * ds_next))
    b_new = p.b - cfg.alpha / float(n) ** (3.0 - cfg.beta) * residual * shared

    info = StepInfo(x=x.copy(), y=data.y, y_hat=y_hat, residual=residual,
                    s_prev=hidden.s.copy(), s_next=s_next, ds_next=ds_next,
                    c_before=p.c.copy(), w_before=p.w.copy())
    p_new = ParamSet(c=c_new, w=w_new, b=b_new, c0=p.c0, w0=p.w0, b0=p.b0)
    return p_new, HiddenState(s=s_next, k=hidden.k + 1), info


# ---------------------------------------------------------------------------
# training loop

@dataclass
class TrainLog:
    """Per-step scalars plus snapshot readout values on a sparser schedule."""

    k: np.ndarray
    t: np.ndarray
    y_hat: np.ndarray
    y: np.ndarray
    loss: np.ndarray
    mean_feedback: np.ndarray
    max_drift: np.ndarray
    snap_k: np.ndarray
    snap_values: np.ndarray
    params: ParamSet
    n: int


def g_readout(p: ParamSet, h: FuncH, cfg: ModelConfig, act: Activation) -> float:
    """Test-function readout N**(-beta) sum_i C_i h(W_i) at live parameters."""
    return float(p.c @ h.value(p.w, act)) / float(cfg.n) ** cfg.beta


def run_training(cfg: ModelConfig, spec: DynamicsSpec, horizon: float,
                 data_seed: int, act: Activation,
                 test_functions: Sequence[FuncH] = (),
                 snapshot_every: int | None = None,
                 measure: MeasureSample | None = None,
                 on_step: Callable[[int, ParamSet, ParamSet, StepInfo], None] | None = None,
                 ) -> TrainLog:
    """Train for floor(N * horizon) steps along a fresh data path."""
    steps = int(math.floor(cfg.n * horizon))
    if steps < 1:
        raise ConfigError(f"horizon {horizon} gives no steps at width {cfg.n}")
    if snapshot_every is None:
        snapshot_every = max(1, int(math.ceil(cfg.n / 50)))
    rng = np.random.default_rng(data_seed)
    p = init_params(cfg, measure)
    hidden = zero_hidden(cfg)
    data = initial_state(spec, rng)

    rec = {name: np.empty(steps) for name in
           ("t", "y_hat", "y", "loss", "mean_feedback", "max_drift")}
    ks = np.arange(steps)
    snap_k, snap_vals = [], []
    for k in range(steps):
        m = float(p.b @ hidden.s) / cfg.n
        p_new, hidden, info = sgd_tbptt_step(p, hidden, data, cfg, act)
        if on_step is not None:
            on_step(k, p, p_new, info)
        p = p_new
        rec["t"][k] = (k + 1) / cfg.n
        rec["y_hat"][k] = info.y_hat
        rec["y"][k] = info.y
        rec["loss"][k] = 0.5 * (info.y_hat - info.y) ** 2
        rec["mean_feedback"][k] = m
        rec["max_drift"][k] = drift(p)[1]
        if test_functions and (k % snapshot_every == 0 or k == steps - 1):
            snap_k.append(k)
            snap_vals.append([g_readout(p, h, cfg, act) for h in test_functions])
        data = step_data(data, spec, rng)

    return TrainLog(
        k=ks, t=rec["t"], y_hat=rec["y_hat"], y=rec["y"], loss=rec["loss"],
        mean_feedback=rec["mean_feedback"], max_drift=rec["max_drift"],
        snap_k=np.asarray(snap_k, dtype=int),
        snap_values=np.asarray(snap_vals) if snap_vals else np.empty((0, len(test_functions))),
        params=p, n=cfg.n)


# ---------------------------------------------------------------------------
# finite-difference gradient check

def grad_check(cfg: ModelConfig, act: Activation, seed: int = 0,
               fd_step: float = 1e-4) -> float:
    """Compare the SGD update directions against central finite differences.

    Builds a random small instance, runs a few warm-up memory steps, then
    checks the C and W directions against d/d(theta) of the one-step
    truncated loss 0.5 * (y_hat - y)^2 (memory input held fixed), and the B
    direction against the derivative along the shared diagonal-feedback
    perturbation sigma(W_i x + m + kappa * S_k[i]), which carries the shared
    sum over units.  Returns the maximum relative error.

    The default step balances central-difference truncation (~ h^2) against
    roundoff amplification (~ eps / h) for a loss of order-one scale.
    """
    rng = np.random.default_rng(seed)
    from .dynamics import make_builtin
    spec = make_builtin()
    p = init_params(cfg, sample_lambda(cfg.n, cfg.d, seed))
    hidden = zero_hidden(cfg)
    data = initial_state(spec, rng)
    for _ in range(3):
        hidden = memory_step(p, hidden, data.x, act)
        data = step_data(data, spec, rng)
    if abs(predict(p, memory_step(p, hidden, data.x, act), cfg)) >= cfg.clip_spec.threshold:
        raise DomainError("prediction saturates the clip; gradient check needs the identity region")

    n, x, y = cfg.n, data.x, data.y
    s_prev = hidden.s

    def loss_at(c, w, kappa=0.0):
        m = float(p.b @ s_prev) / n
        s_next = act.sigma(w @ x + m + kappa * s_prev)
        y_hat = float(c @ s_next) / float(n) ** cfg.beta
        return 0.5 * (y_hat - y) ** 2

    _, _, info = sgd_tbptt_step(p, hidden, data, cfg, act)
    scale = float(n) ** cfg.beta
    eps = fd_step
    worst = 0.0

    # C direction: analytic gradient is residual-free form (y_hat - y) s_next / N^beta
    grad_c = (info.y_hat - y) * info.s_next / scale
    for i in range(n):
        cp, cm = p.c.copy(), p.c.copy()
        cp[i] += eps
        cm[i] -= eps
        fd = (loss_at(cp, p.w) - loss_at(cm, p.w)) / (2 * eps)
        worst = max(worst, _rel_err(grad_c[i], fd))

    # W direction
    grad_w = (info.y_hat - y) * (p.c * info.ds_next)[:, None] * x[None, :] / scale
    for i in range(n):
        for j in range(cfg.d):
            wp, wm = p.w.copy(), p.w.copy()
            wp[i, j] += eps
            wm[i, j] -= eps
            fd = (loss_at(p.c, wp) - loss_at(p.c, wm)) / (2 * eps)
            worst = max(worst, _rel_err(grad_w[i, j], fd))

    # B direction: shared sum over units, checked along kappa
    grad_kappa = (info.y_hat - y) * float(p.c @ (s_prev * info.ds_next)) / scale
    fd = (loss_at(p.c, p.w, eps) - loss_at(p.c, p.w, -eps)) / (2 * eps)
    worst = max(worst, _rel_err(grad_kappa, fd))
    return worst


def _rel_err(a: float, b: float) -> float:
    return abs(a - b) / max(abs(a), abs(b), 1e-8)


# ---------------------------------------------------------------------------
# timing probe

def time_memory_step(cfg: ModelConfig, act: Activation, repeats: int = 200) -> float:
    """Best-of-repeats wall time of one memory step, in seconds."""
    p = init_params(cfg)
    hidden = HiddenState(s=np.random.default_rng(0).uniform(0, 1, cfg.n), k=0)
    x = np.full(cfg.d, 0.3)
    best = math.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        memory_step(p, hidden, x, act)
        best = min(best, time.perf_counter() - t0)
    return best
