"""Mean-field memory chains, coupling diagnostics, and tangent kernels.

Every memory process here is an order-preserving recursion on ridge
functions: the function at step k+1 is w -> sigma(w . X_k + m_k) where m_k
is a scalar feedback read against some measure.  Three variants share this
shape and differ only in the measure behind the feedback scalar:

* the limit chain h uses the fixed parameter measure,
* the empirical chain hN uses the network's frozen initial parameters,
* the trained chain v uses the live (B, W) parameters along the SGD path,
  and reproduces the trained memory states exactly at the W rows.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import (Activation, DomainError, FuncH, MeasureSample,
                   feedback_integral, h1_distance_sq, measure_feedback)
from .dynamics import DataState
from .network import ModelConfig, ParamSet, StepInfo, g_readout


@dataclass(frozen=True)
class MemoryChainState:
    """State of one ridge-function memory chain.

    ``m`` is the current feedback scalar (the measure paired with the current
    function), ``x_prev`` and ``m_prev`` are the input and scalar baked into
    the current function, so the represented function at step k >= 1 is
    exactly w -> sigma(w . x_prev + m_prev); at k = 0 it is the zero function.
    """

    m: float
    x_prev: np.ndarray | None
    m_prev: float
    k: int
    tag: str

    @property
    def func(self) -> FuncH:
        if self.k == 0 or self.x_prev is None:
            return FuncH.zero()
        return FuncH.ridge(self.x_prev, self.m_prev)


def chain_start(tag: str) -> MemoryChainState:
    """Chain at step 0: zero function, zero feedback."""
    return MemoryChainState(m=0.0, x_prev=None, m_prev=0.0, k=0, tag=tag)


def step_h(state: MemoryChainState, x: np.ndarray, measure: MeasureSample,
           act: Activation) -> MemoryChainState:
    """Limit chain: m_{k+1} = <b sigma(w . X_k + m_k), measure>."""
    m_new = feedback_integral(np.asarray(x, dtype=float), state.m, measure, act)
    return MemoryChainState(m=m_new, x_prev=np.asarray(x, dtype=float).copy(),
                            m_prev=state.m, k=state.k + 1, tag=state.tag)


def step_hn(state: MemoryChainState, x: np.ndarray, p: ParamSet,
            act: Activation) -> MemoryChainState:
    """Frozen-parameter chain: feedback read against the initial (B0, W0) sample."""
    x = np.asarray(x, dtype=float)
    m_new = float(np.mean(p.b0 * act.sigma(p.w0 @ x + state.m)))
    return MemoryChainState(m=m_new, x_prev=x.copy(), m_prev=state.m,
                            k=state.k + 1, tag=state.tag)


def step_v(state: MemoryChainState, x: np.ndarray, b_next: np.ndarray,
           w_cur: np.ndarray, act: Activation) -> MemoryChainState:
    """Trained-parameter chain along the SGD path.

    Uses the post-update B and the pre-update W of the step that consumed
    input X_k, so that evaluating the represented function at the pre-update
    W rows reproduces the trained memory states exactly.
    """
    x = np.asarray(x, dtype=float)
    m_new = float(np.mean(b_next * act.sigma(w_cur @ x + state.m)))
    return MemoryChainState(m=m_new, x_prev=x.copy(), m_prev=state.m,
                            k=state.k + 1, tag=state.tag)


# ---------------------------------------------------------------------------
# coupling diagnostics

@dataclass(frozen=True)
class ErrorDiag:
    """Feedback-scalar gaps and function-level H^1 gaps between the chains."""

    k: int
    e1: float
    e2: float
    gamma1_h1_sq: float
    gamma2_h1_sq: float


def error_diag(h: MemoryChainState, hn: MemoryChainState, v: MemoryChainState,
               measure: MeasureSample, act: Activation) -> ErrorDiag:
    """Gaps at a common step k.

    e1 = feedback(hN) - feedback(h): finite-sample error of the frozen
    initial parameters against the limit measure.  e2 = feedback(v) -
    feedback(hN): training-drift error.  The H^1 gaps compare the
    represented ridge functions under the given measure sample.
    """
    if not (h.k == hn.k == v.k):
        raise DomainError(f"chains must sit at a common step, got {h.k}, {hn.k}, {v.k}")
    e1 = hn.m - h.m
    e2 = v.m - hn.m
    g1 = h1_distance_sq(hn.func, h.func, measure, act)
    g2 = h1_distance_sq(v.func, hn.func, measure, act)
    return ErrorDiag(k=h.k, e1=e1, e2=e2, gamma1_h1_sq=g1, gamma2_h1_sq=g2)


def varsigma(x: np.ndarray, h: FuncH, measure: MeasureSample,
             act: Activation) -> FuncH:
    """Lift a memory function to the next ridge function given input x."""
    return FuncH.ridge(np.asarray(x, dtype=float), measure_feedback(h, measure, act))


# ---------------------------------------------------------------------------
# tangent kernels

def kernel_k(x: np.ndarray, m: float, h_test: FuncH, measure: MeasureSample,
             act: Activation) -> float:
    """Tangent pairing of a test function with the state (x, m).

    K = <sigma(w.x + m) h(w) + c^2 sigma'(w.x + m) grad h(w) . x, measure>.
    """
    x = np.asarray(x, dtype=float)
    pre = measure.w @ x + float(m)
    val = act.sigma(pre) * h_test.value(measure.w, act)
    val = val + measure.c ** 2 * act.sigma_d1(pre) * (h_test.grad(measure.w, act) @ x)
    return float(np.mean(val))


def kernel_tilde(x_i: np.ndarray, m_i: float, x_j: np.ndarray, m_j: float,
                 measure: MeasureSample, act: Activation) -> float:
    """Symmetric tangent kernel between two states, over a shared sample."""
    x_i = np.asarray(x_i, dtype=float)
    x_j = np.asarray(x_j, dtype=float)
    pre_i = measure.w @ x_i + float(m_i)
    pre_j = measure.w @ x_j + float(m_j)
    val = act.sigma(pre_i) * act.sigma(pre_j)
    val = val + measure.c ** 2 * act.sigma_d1(pre_i) * act.sigma_d1(pre_j) * float(x_i @ x_j)
    return float(np.mean(val))


# ---------------------------------------------------------------------------
# one-step increment and its linearization

def increment_delta1(info: StepInfo, h_test: FuncH, cfg: ModelConfig,
                     act: Activation) -> float:
    """First-order prediction of the readout increment over one SGD step.

    delta1 = -(alpha / N^2) * residual *
             sum_i [ S_next[i] h(W_i) + C_i^2 sigma'_i grad h(W_i) . x ],
    with everything read at the pre-update parameters.
    """
    hv = h_test.value(info.w_before, act)
    hg = h_test.grad(info.w_before, act) @ info.x
    total = float(info.s_next @ hv + (info.c_before ** 2 * info.ds_next) @ hg)
    return -cfg.alpha / float(cfg.n) ** 2 * info.residual * total


def increment_actual(p_before: ParamSet, p_after: ParamSet, h_test: FuncH,
                     cfg: ModelConfig, act: Activation) -> float:
    """Exact readout increment g(theta_{k+1}) - g(theta_k)."""
    return (g_readout(p_after, h_test, cfg, act)
            - g_readout(p_before, h_test, cfg, act))


def default_test_functions(d: int, scale: float = 0.9) -> list[FuncH]:
    """Eight ridge test functions: directions +-scale * e1, offsets in a small grid."""
    out = []
    for sign in (1.0, -1.0):
        a = np.zeros(d)
        a[0] = sign * scale
        for b in (-1.0, -0.25, 0.25, 1.0):
            out.append(FuncH.ridge(a, b))
    return out
