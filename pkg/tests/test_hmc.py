import math

import numpy as np
import pytest

from empost.hmc import (HmcConfig, _State, accept_probability, hamiltonian, leapfrog, load_chain, mh_step,
                        sample_posterior, save_chain, tune_step_size)


def gauss(theta):
    theta = np.asarray(theta, dtype=float)
    return 0.5 * float(theta @ theta), theta.copy()


def test_hamiltonian():
    assert hamiltonian(3.0, np.zeros(4)) == 3.0
    assert hamiltonian(3.0, np.array([2.0, 0.0])) == 5.0
    assert hamiltonian(0.0, np.array([2.0]), mass=[4.0]) == 0.5


def test_leapfrog_hand_example():
    th, r = leapfrog(np.array([1.0]), np.array([0.0]), lambda t: t, 0.1, 1)
    assert th[0] == pytest.approx(0.995, abs=1e-15)
    assert r[0] == pytest.approx(-0.09975, abs=1e-15)


def test_leapfrog_reversible(rng):
    a = rng.normal(size=6)
    grad = lambda t: a * t + np.sin(t)  # noqa: E731
    th0, r0 = rng.normal(size=6), rng.normal(size=6)
    th1, r1 = leapfrog(th0, r0, grad, 0.05, 40)
    th2, r2 = leapfrog(th1, -r1, grad, 0.05, 40)
    assert np.max(np.abs(th2 - th0)) < 1e-10
    assert np.max(np.abs(-r2 - r0)) < 1e-10


def test_energy_error_second_order():
    th0, r0 = np.array([1.0, -0.5]), np.array([0.3, 0.8])
    h0 = hamiltonian(gauss(th0)[0], r0)
    eps = np.array([0.1, 0.05, 0.025, 0.0125])
    dh = []
    for e in eps:
        th, r = leapfrog(th0, r0, lambda t: t, e, int(round(1.0 / e)))
        dh.append(abs(hamiltonian(gauss(th)[0], r) - h0))
    slope = np.polyfit(np.log(eps), np.log(dh), 1)[0]
    assert slope == pytest.approx(2.0, abs=0.2)


def test_accept_probability():
    assert accept_probability(1.0, 1.0) == 1.0
    assert accept_probability(1.0, 0.0) == 1.0
    assert accept_probability(0.0, math.log(2.0)) == pytest.approx(0.5)


def test_mh_step_tiny_step_always_accepts(rng):
    cfg = HmcConfig(step_size=1e-4, leapfrog_steps=5, jitter=0.0)
    state = _State(np.ones(3), *gauss(np.ones(3)))
    acc = [mh_step(state, gauss, cfg, rng, 1e-4)[1] for _ in range(50)]
    assert all(acc)


def test_mh_step_rejects_divergence(rng):
    def bad(theta):
        return math.inf, np.full_like(theta, np.nan)

    cfg = HmcConfig(leapfrog_steps=50, jitter=0.0)
    state = _State(np.array([1.0]), *gauss(np.array([1.0])))
    new, acc, _, div = mh_step(state, bad, cfg, np.random.default_rng(0), 0.5)
    assert div and not acc and new is state


def test_tuning_direction():
    # one window each: near-certain acceptance grows the step, near-certain rejection shrinks it
    high = HmcConfig(step_size=1e-3, burn_in=20, tune_window=20, leapfrog_steps=3)
    with pytest.warns(RuntimeWarning):
        eps, _, _ = tune_step_size(gauss, np.ones(2), high)
    assert eps == pytest.approx(2e-3)
    low = HmcConfig(step_size=2.1, burn_in=20, tune_window=20, leapfrog_steps=7, jitter=0.0)
    with pytest.warns(RuntimeWarning):
        eps, _, _ = tune_step_size(gauss, np.ones(2), low)
    assert eps == pytest.approx(1.05)


def test_gaussian_moments_small():
    chain, diag = sample_posterior(np.zeros(3), gauss, HmcConfig(step_size=0.3, n_samples=1500, burn_in=300, seed=1))
    assert np.all(np.abs(chain.samples.mean(axis=0)) < 0.12)
    assert np.all(np.abs(chain.samples.var(axis=0) - 1.0) < 0.25)
    assert 0.6 <= diag.acceptance_rate <= 0.95


def test_seed_determinism():
    cfg = HmcConfig(step_size=0.3, n_samples=50, burn_in=50, seed=11, tune=False)
    a, _ = sample_posterior(np.zeros(2), gauss, cfg)
    b, _ = sample_posterior(np.zeros(2), gauss, cfg)
    assert np.array_equal(a.samples, b.samples)


def test_thinning():
    chain, _ = sample_posterior(np.zeros(1), gauss, HmcConfig(n_samples=20, thin=3, burn_in=0, tune=False))
    assert len(chain) == 20
    assert chain.accept_flags.size == 60


def test_chain_round_trip(tmp_path):
    chain, diag = sample_posterior(np.zeros(2), gauss, HmcConfig(n_samples=10, burn_in=0, tune=False))
    save_chain(chain, diag, tmp_path, {"note": "x"})
    header, again, d2 = load_chain(tmp_path)
    assert header == {"note": "x"}
    assert np.array_equal(again.samples, chain.samples)
    assert d2.acceptance_rate == diag.acceptance_rate and d2.step_size == diag.step_size
    assert math.isnan(d2.burn_in_acceptance)
    assert "NaN" not in (tmp_path / "diagnostics.json").read_text()


@pytest.mark.parametrize("kw", [dict(step_size=0.0), dict(leapfrog_steps=0), dict(jitter=1.0),
                                dict(target_accept=(0.9, 0.6)), dict(mass=(1.0, -1.0))])
def test_config_validation(kw):
    with pytest.raises(ValueError):
        HmcConfig(**kw)


def test_tuning_falls_back_to_last_in_band_step():
    # this seed doubles into the unstable regime (eps > 2) on the final window
    cfg = HmcConfig(step_size=0.05, leapfrog_steps=20, burn_in=500, seed=3)
    eps, _, _ = tune_step_size(gauss, np.zeros(1), cfg)
    assert eps == pytest.approx(1.6)
