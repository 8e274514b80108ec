"""Acceptance suite: one test per acceptance criterion, at the stated scales.

Run with ``pytest -v tests/test_acceptance.py`` to get one pass/fail line per
criterion.  The desk-scale experiments take a few minutes each; results are
cached per module so each command runs once.
"""
import math
import time

import numpy as np
import pytest

import mflab as mf
from mflab.harness import (HarnessConfig, cmd_drift, cmd_ergodicity,
                           cmd_gamma_rates, cmd_increment, cmd_ntk, cmd_ode,
                           cmd_validate)

ACT = mf.Activation()


def _report(name, ok, detail=""):
    print(f"\nACCEPTANCE {name}: {'PASS' if ok else 'FAIL'} {detail}")
    assert ok, f"{name}: {detail}"


# ---------------------------------------------------------------------------
# 1. assumption validation on the built-in process

def test_acceptance_01_assumption_validation():
    report = mf.validate_assumptions(mf.make_builtin(), ACT, beta=0.75, gamma=0.1)
    q0_exact = math.sqrt(0.5 ** 2 + 8 * 0.25 ** 2)
    ok = (report.ok
          and report.q0 == pytest.approx(q0_exact, abs=1e-15)
          and report.q0 == pytest.approx(0.8660254037844386, abs=1e-12)
          and mf.mixing_burn_in(report.q0, 1e-6) == 97)
    _report("01 assumption validation", ok, f"q0={report.q0:.12f}")


# ---------------------------------------------------------------------------
# 2. clipping family, 1000 random cases in under five seconds

def test_acceptance_02_clipping_suite():
    rng = np.random.default_rng(7)
    t0 = time.perf_counter()
    worst_fd = 0.0
    for _ in range(1000):
        n = int(rng.integers(1, 10 ** 6))
        gamma = float(rng.uniform(0.02, 0.24))
        spec = mf.ClipSpec(n=n, gamma=gamma)
        a = spec.threshold
        x = float(rng.uniform(-3 * a, 3 * a))
        val = mf.clip_eval(x, spec)
        der = mf.clip_deriv(x, spec)
        assert val == -mf.clip_eval(-x, spec)
        assert abs(val) <= 2 * a + 1e-12
        assert 0.0 <= der <= 1.0
        if abs(x) <= a:
            assert val == x and der == 1.0
        if min(abs(abs(x) - a), abs(abs(x) - 2 * a)) > 1e-3:
            h = 1e-4 * a  # scale-aware step: roundoff in psi is relative to a
            fd = (mf.clip_eval(x + h, spec) - mf.clip_eval(x - h, spec)) / (2 * h)
            worst_fd = max(worst_fd, abs(fd - der))
    elapsed = time.perf_counter() - t0
    ok = worst_fd < 1e-5 and elapsed < 5.0
    _report("02 clipping suite", ok, f"max fd gap={worst_fd:.2e}, {elapsed:.2f}s")


# ---------------------------------------------------------------------------
# 3. gradient check across fifty random small instances

def test_acceptance_03_gradient_check():
    rng = np.random.default_rng(11)
    worst = 0.0
    for i in range(50):
        n = int(rng.integers(2, 21))
        beta = float(rng.uniform(0.55, 0.95))
        gamma = float(rng.uniform(0.2, 0.8) * (1 - beta) / 2)
        cfg = mf.ModelConfig(n=n, d=1, beta=beta, gamma=gamma, seed=i)
        worst = max(worst, mf.grad_check(cfg, ACT, seed=i))
    _report("03 gradient check", worst < 1e-5, f"max rel err={worst:.2e}")


# ---------------------------------------------------------------------------
# 4. exact chain identities at machine precision

def test_acceptance_04_chain_identities():
    worst_v = worst_hn = 0.0
    for seed in range(5):
        cfg = mf.ModelConfig(n=50, d=1, seed=seed)
        spec = mf.make_builtin()
        rng = np.random.default_rng(seed + 500)
        p = mf.init_params(cfg)
        p_frozen = mf.init_params(cfg)
        hidden = mf.zero_hidden(cfg)
        hidden_frozen = mf.zero_hidden(cfg)
        data = mf.initial_state(spec, rng)
        v = mf.chain_start("v")
        hn = mf.chain_start("hn")
        for k in range(500):
            x = data.x
            w_before = p.w.copy()
            p, hidden, _ = mf.sgd_tbptt_step(p, hidden, data, cfg, ACT)
            v = mf.step_v(v, x, p.b, w_before, ACT)
            worst_v = max(worst_v, float(np.max(np.abs(
                ACT.sigma(w_before @ np.atleast_1d(v.x_prev) + v.m_prev) - hidden.s))))
            hidden_frozen = mf.memory_step(p_frozen, hidden_frozen, x, ACT)
            hn = mf.step_hn(hn, x, p_frozen, ACT)
            worst_hn = max(worst_hn, float(np.max(np.abs(
                hn.func.value(p_frozen.w, ACT) - hidden_frozen.s))))
            data = mf.step_data(data, spec, rng)
    ok = worst_v <= 1e-12 and worst_hn <= 1e-12
    _report("04 chain identities", ok, f"v gap={worst_v:.2e}, hn gap={worst_hn:.2e}")


# ---------------------------------------------------------------------------
# desk-scale commands, one run each

@pytest.fixture(scope="module")
def ergodicity_result(tmp_path_factory):
    cfg = HarnessConfig(n_grid=(100, 1000, 10000), paths=20, steps=5000,
                        out_dir=str(tmp_path_factory.mktemp("erg")))
    return cmd_ergodicity(cfg)


def test_acceptance_05_ergodicity(ergodicity_result):
    res = ergodicity_result
    _report("05 ergodicity desk run", res.ok,
            f"w1={['%.3e' % v for v in res.details['w1']]}")


@pytest.fixture(scope="module")
def gamma_rates_result(tmp_path_factory):
    cfg = HarnessConfig(n_grid=(100, 400, 1600, 6400), seeds=50, horizon=0.5,
                        out_dir=str(tmp_path_factory.mktemp("gamma")))
    return cmd_gamma_rates(cfg)


def test_acceptance_06_coupling_rates(gamma_rates_result):
    res = gamma_rates_result
    _report("06 coupling-error rates", res.ok,
            f"e1 slope={res.details['e1_slope']:.3f} (<= -0.7), "
            f"e2 slope={res.details['e2_slope']:.3f} (<= 0.0)")


@pytest.fixture(scope="module")
def drift_result(tmp_path_factory):
    cfg = HarnessConfig(n_grid=(200, 800, 3200), seeds=10, horizon=1.0,
                        out_dir=str(tmp_path_factory.mktemp("drift")))
    return cmd_drift(cfg)


def test_acceptance_07_drift_envelope(drift_result):
    res = drift_result
    _report("07 drift envelope", res.ok,
            f"slope={res.details['slope']:.3f} (<= {res.details['bound']})")


def test_acceptance_08_increment_linearization(tmp_path):
    cfg = HarnessConfig(n_grid=(100, 1000), seeds=5, horizon=0.5,
                        out_dir=str(tmp_path))
    res = cmd_increment(cfg)
    _report("08 increment linearization", res.ok,
            f"ratio={res.details['ratio']:.1f} (>= {10 ** 1.5:.1f})")


def test_acceptance_09_limit_flow(tmp_path):
    res_big = cmd_ode(HarnessConfig(m_points=256,
                                    out_dir=str(tmp_path / "m256")))
    res_small = cmd_ode(HarnessConfig(m_points=32,
                                      out_dir=str(tmp_path / "m32")))
    ok = (res_big.checks["gram_psd"] and res_big.checks["loss_monotone"]
          and res_small.checks["oracle_gap"])
    _report("09 limit flow vs closed form", ok,
            f"min eig={res_big.details['min_eig']:.2e} (M=256), "
            f"oracle gap={res_small.details['sup_gap']:.2e} (M=32)")


@pytest.fixture(scope="module")
def ntk_result(tmp_path_factory):
    cfg = HarnessConfig(n_grid=(500, 2000, 8000), seeds=20, horizon=0.5,
                        out_dir=str(tmp_path_factory.mktemp("ntk")))
    return cmd_ntk(cfg)


def test_acceptance_10_readout_limit(ntk_result):
    res = ntk_result
    _report("10 trained readout vs limit", res.ok,
            f"gaps={['%.3e' % v for v in res.details['mean_gaps']]}, "
            f"init slope={res.details['init_slope']:.3f} (-0.25 +- 0.1)")
