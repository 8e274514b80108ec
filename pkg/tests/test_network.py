"""Finite-width network: forward pass, SGD step, drift, gradient checks."""
import math

import numpy as np
import pytest

import mflab as mf
from mflab.network import time_memory_step

ACT = mf.Activation()


def _tiny_setup(n=6, seed=0):
    cfg = mf.ModelConfig(n=n, d=1, seed=seed)
    spec = mf.make_builtin()
    rng = np.random.default_rng(seed + 100)
    p = mf.init_params(cfg)
    hidden = mf.zero_hidden(cfg)
    data = mf.initial_state(spec, rng)
    for _ in range(4):
        hidden = mf.memory_step(p, hidden, data.x, ACT)
        data = mf.step_data(data, spec, rng)
    return cfg, spec, rng, p, hidden, data


def test_model_config_windows():
    with pytest.raises(mf.ConfigError):
        mf.ModelConfig(n=10, beta=0.4)
    with pytest.raises(mf.ConfigError):
        mf.ModelConfig(n=10, beta=0.75, gamma=0.2)
    cfg = mf.ModelConfig(n=16, beta=0.75)
    assert cfg.effective_rate == pytest.approx(1.0 / 16 ** 0.5)


def test_memory_step_matches_loop_oracle():
    cfg, spec, rng, p, hidden, data = _tiny_setup()
    new = mf.memory_step(p, hidden, data.x, ACT)
    for i in range(cfg.n):
        m = sum(p.b[j] * hidden.s[j] for j in range(cfg.n)) / cfg.n
        expected = 1.0 / (1.0 + math.exp(-(p.w[i, 0] * data.x[0] + m)))
        assert new.s[i] == pytest.approx(expected, rel=1e-12)


def test_predict_scaling():
    cfg, spec, rng, p, hidden, data = _tiny_setup()
    oracle = sum(p.c[i] * hidden.s[i] for i in range(cfg.n)) / cfg.n ** cfg.beta
    assert mf.predict(p, hidden, cfg) == pytest.approx(oracle, rel=1e-12)


def test_sgd_step_matches_loop_oracle():
    """Every update line re-derived with plain Python loops."""
    cfg, spec, rng, p, hidden, data = _tiny_setup(n=5, seed=3)
    n, beta, alpha = cfg.n, cfg.beta, cfg.alpha
    p_new, hid_new, info = mf.sgd_tbptt_step(p, hidden, data, cfg, ACT)

    m = sum(p.b[j] * hidden.s[j] for j in range(n)) / n
    s_next = [1.0 / (1.0 + math.exp(-(p.w[i, 0] * data.x[0] + m))) for i in range(n)]
    ds_next = [s * (1 - s) for s in s_next]
    y_hat = sum(p.c[i] * s_next[i] for i in range(n)) / n ** beta
    resid = mf.clip_eval(y_hat, cfg.clip_spec) - data.y
    assert info.y_hat == pytest.approx(y_hat, rel=1e-12)
    assert info.residual == pytest.approx(resid, rel=1e-12)
    rate = alpha / n ** (2 - beta)
    shared = sum(p.c[l] * hidden.s[l] * ds_next[l] for l in range(n))
    for i in range(n):
        assert p_new.c[i] == pytest.approx(p.c[i] - rate * resid * s_next[i], rel=1e-12)
        assert p_new.w[i, 0] == pytest.approx(
            p.w[i, 0] - rate * resid * p.c[i] * ds_next[i] * data.x[0], rel=1e-12)
        assert p_new.b[i] == pytest.approx(
            p.b[i] - alpha / n ** (3 - beta) * resid * shared, rel=1e-12)
    assert np.allclose(hid_new.s, s_next, rtol=1e-12)
    # initial values stay frozen
    assert np.array_equal(p_new.c0, p.c0)


def test_c_update_layer_mean_variant():
    cfg, spec, rng, p, hidden, data = _tiny_setup(n=5, seed=3)
    cfg_mean = mf.ModelConfig(n=5, d=1, seed=3, c_update_index="mean")
    p_own, _, info = mf.sgd_tbptt_step(p, hidden, data, cfg, ACT)
    p_mean, _, _ = mf.sgd_tbptt_step(p, hidden, data, cfg_mean, ACT)
    rate = cfg.alpha / cfg.n ** (2 - cfg.beta)
    expected = p.c - rate * info.residual * info.s_next.mean()
    assert np.allclose(p_mean.c, expected, rtol=1e-12)
    assert not np.allclose(p_own.c, p_mean.c)
    assert np.allclose(p_own.w, p_mean.w)


def test_per_step_c_increment_bound():
    """|C update| <= rate * (clip ceiling + target bound) at every step."""
    cfg = mf.ModelConfig(n=64, d=1, seed=1)
    spec = mf.make_builtin()
    bound = cfg.alpha / cfg.n ** (2 - cfg.beta) * (2 * cfg.n ** cfg.gamma + spec.y_bound)
    prev_c = None
    log = None

    def on_step(k, p_before, p_after, info):
        inc = np.max(np.abs(p_after.c - p_before.c))
        assert inc <= bound + 1e-12

    mf.run_training(cfg, spec, 2.0, data_seed=5, act=ACT, on_step=on_step)


def test_initial_readout_second_moment_bound():
    """E[g_0^2] <= N^(1-2 beta), estimated over many parameter draws."""
    n, beta = 256, 0.75
    vals = []
    h = mf.FuncH.ridge(np.array([0.9]), 0.25)
    for seed in range(400):
        cfg = mf.ModelConfig(n=n, beta=beta, seed=seed)
        p = mf.init_params(cfg)
        vals.append(mf.g_readout(p, h, cfg, ACT))
    assert np.mean(np.square(vals)) <= n ** (1 - 2 * beta)


def test_run_training_is_deterministic_and_logged():
    cfg = mf.ModelConfig(n=32, seed=9)
    spec = mf.make_builtin()
    tests = mf.default_test_functions(1)
    log1 = mf.run_training(cfg, spec, 1.5, data_seed=11, act=ACT, test_functions=tests)
    log2 = mf.run_training(cfg, spec, 1.5, data_seed=11, act=ACT, test_functions=tests)
    steps = int(32 * 1.5)
    assert log1.k.shape == (steps,)
    assert np.array_equal(log1.y_hat, log2.y_hat)
    assert np.array_equal(log1.snap_values, log2.snap_values)
    assert np.all(log1.loss >= 0)
    assert np.all(log1.max_drift >= 0)
    assert log1.snap_k[-1] == steps - 1


def test_drift_measures_distance_from_frozen_init():
    cfg = mf.ModelConfig(n=16, seed=2)
    p = mf.init_params(cfg)
    per_unit, worst = mf.drift(p)
    assert worst == 0.0
    p.c = p.c + 0.5
    per_unit, worst = mf.drift(p)
    assert worst == pytest.approx(0.5)


def test_grad_check_small_instance():
    assert mf.grad_check(mf.ModelConfig(n=8, d=1), ACT, seed=1) < 1e-5


def test_memory_step_scales_linearly_in_width():
    # compare compute-bound widths one decade apart; a factor near 10 checks O(N d)
    t_small = time_memory_step(mf.ModelConfig(n=10_000), ACT, repeats=300)
    t_large = time_memory_step(mf.ModelConfig(n=100_000), ACT, repeats=60)
    assert 6.0 <= t_large / t_small <= 14.0
