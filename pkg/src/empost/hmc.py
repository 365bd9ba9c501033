"""Hamiltonian Monte Carlo on flat parameter vectors.

The target is exp(-U(theta)).  Callers supply ``fn(theta) -> (U, grad U)``.
Momenta are drawn from N(0, M) with identity or diagonal mass M, trajectories
use the leapfrog integrator, and a Metropolis-Hastings test corrects the
discretisation error.  During burn-in the step size is doubled or halved
until the windowed acceptance rate falls inside the target band; it is
frozen afterwards so the retained samples come from a fixed kernel.
"""

from __future__ import annotations

import json
import math
import os
import warnings
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np

from .io import atomic_write_text

PotentialFn = Callable[[np.ndarray], tuple[float, np.ndarray]]


class Divergence(FloatingPointError):
    """Raised when a trajectory produces non-finite values."""


@dataclass(frozen=True)
class HmcConfig:
    step_size: float = 0.05
    leapfrog_steps: int = 20
    n_samples: int = 30
    burn_in: int = 500
    seed: int = 0
    mass: tuple[float, ...] | None = None  # diagonal; None is the identity
    jitter: float = 0.2  # step size drawn from eps * U(1 - jitter, 1 + jitter)
    thin: int = 1
    tune: bool = True
    target_accept: tuple[float, float] = (0.6, 0.9)
    tune_window: int = 50
    divergence: float = 1000.0

    def __post_init__(self):
        if not (self.step_size > 0 and math.isfinite(self.step_size)):
            raise ValueError("step_size must be positive")
        if self.leapfrog_steps < 1 or self.n_samples < 1 or self.burn_in < 0 or self.thin < 1:
            raise ValueError("need leapfrog_steps >= 1, n_samples >= 1, burn_in >= 0, thin >= 1")
        if not 0 <= self.jitter < 1:
            raise ValueError("jitter must lie in [0, 1)")
        lo, hi = self.target_accept
        if not 0 < lo < hi < 1:
            raise ValueError("target_accept must be an increasing pair inside (0, 1)")
        if self.mass is not None and not all(m > 0 for m in self.mass):
            raise ValueError("mass entries must be positive")


@dataclass
class HmcChain:
    samples: np.ndarray  # (n_samples, dim)
    energies: np.ndarray  # potential U of each retained sample
    accept_flags: np.ndarray  # every post-burn-in transition
    delta_h: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def __len__(self):
        return len(self.samples)


@dataclass
class HmcDiagnostics:
    acceptance_rate: float
    mean_abs_delta_h: float
    step_size: float
    burn_in_acceptance: float = float("nan")
    divergences: int = 0
    tuned: bool = False


def hamiltonian(u: float, r, mass=None) -> float:
    """H = U + r^T M^-1 r / 2 for identity or diagonal M."""
    r = np.asarray(r, dtype=float)
    inv = 1.0 if mass is None else 1.0 / np.asarray(mass, dtype=float)
    return float(u + 0.5 * np.sum(r * r * inv))


def leapfrog(theta, r, grad_fn: Callable[[np.ndarray], np.ndarray], eps: float, steps: int, mass=None):
    """``steps`` rounds of half kick, drift, half kick; returns (theta', r')."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    theta = np.array(theta, dtype=float)
    r = np.array(r, dtype=float)
    inv = 1.0 if mass is None else 1.0 / np.asarray(mass, dtype=float)
    g = np.asarray(grad_fn(theta), dtype=float)
    for _ in range(steps):
        r = r - 0.5 * eps * g
        theta = theta + eps * inv * r
        g = np.asarray(grad_fn(theta), dtype=float)
        r = r - 0.5 * eps * g
        if not (np.all(np.isfinite(theta)) and np.all(np.isfinite(r))):
            raise Divergence("non-finite state in leapfrog trajectory")
    return theta, r


def _trajectory(theta, r, grad, fn: PotentialFn, eps, steps, inv):
    u = math.nan
    for _ in range(steps):
        r = r - 0.5 * eps * grad
        theta = theta + eps * inv * r
        u, grad = fn(theta)
        r = r - 0.5 * eps * grad
        if not (math.isfinite(u) and np.all(np.isfinite(r))):
            raise Divergence("non-finite state in leapfrog trajectory")
    return theta, r, u, grad


@dataclass
class _State:
    theta: np.ndarray
    u: float
    grad: np.ndarray


def accept_probability(h_old: float, h_new: float) -> float:
    """min(1, exp(H_old - H_new))."""
    return 1.0 if h_new <= h_old else math.exp(h_old - h_new)


def mh_step(state: _State, fn: PotentialFn, cfg: HmcConfig, rng: np.random.Generator, eps: float):
    """One HMC transition; returns (state', accepted, delta_h, divergent)."""
    mass = None if cfg.mass is None else np.asarray(cfg.mass, dtype=float)
    inv = 1.0 if mass is None else 1.0 / mass
    r0 = rng.standard_normal(state.theta.shape) * (1.0 if mass is None else np.sqrt(mass))
    step = eps * (1.0 + cfg.jitter * (2.0 * rng.random() - 1.0)) if cfg.jitter else eps
    h_old = hamiltonian(state.u, r0, mass)
    u_draw = rng.random()
    try:
        # a diverging trajectory overflows before it is caught and rejected below
        with np.errstate(over="ignore", invalid="ignore"):
            theta, r, u, grad = _trajectory(state.theta, r0, state.grad, fn, step, cfg.leapfrog_steps, inv)
    except Divergence:
        return state, False, math.inf, True
    dh = hamiltonian(u, r, mass) - h_old
    if not math.isfinite(dh) or abs(dh) > cfg.divergence:
        return state, False, dh, True
    if u_draw < accept_probability(0.0, dh):
        return _State(theta, u, grad), True, dh, False
    return state, False, dh, False


def tune_step_size(fn: PotentialFn, theta0, cfg: HmcConfig, rng: np.random.Generator | None = None):
    """Burn-in with windowed doubling/halving of the step size.

    Returns ``(eps, state, burn_in_acceptance)``.  The multiplier starts at 2
    and is square-rooted whenever the adjustment direction flips, so the
    step size settles instead of oscillating between two bad values.  If the
    last window lands outside the band, the most recent step size whose
    window was inside it is used instead, since the final adjustment is
    never tested.
    """
    rng = np.random.default_rng(cfg.seed) if rng is None else rng
    u, g = fn(np.asarray(theta0, dtype=float))
    state = _State(np.array(theta0, dtype=float), u, g)
    eps, factor, last_dir = cfg.step_size, 2.0, 0
    lo, hi = cfg.target_accept
    window: list[bool] = []
    flags: list[bool] = []
    in_band = False
    last_good = None
    for _ in range(cfg.burn_in):
        state, acc, _, _ = mh_step(state, fn, cfg, rng, eps)
        window.append(acc)
        flags.append(acc)
        if cfg.tune and len(window) == cfg.tune_window:
            rate = float(np.mean(window))
            window = []
            direction = 1 if rate > hi else -1 if rate < lo else 0
            in_band = direction == 0
            if in_band:
                last_good = eps
            if direction:
                if last_dir and direction != last_dir:
                    factor = math.sqrt(factor)
                eps = eps * factor if direction > 0 else eps / factor
                last_dir = direction
    if cfg.tune and not in_band and last_good is not None:
        eps = last_good
    elif cfg.tune and cfg.burn_in >= cfg.tune_window and not in_band:
        warnings.warn(f"step size tuning ended outside the target band; using eps = {eps:.3g}", RuntimeWarning)
    return eps, state, (float(np.mean(flags)) if flags else math.nan)


def sample_posterior(init, fn: PotentialFn, cfg: HmcConfig) -> tuple[HmcChain, HmcDiagnostics]:
    """Run burn-in (with tuning) and collect ``n_samples`` states, keeping every ``thin``-th."""
    rng = np.random.default_rng(cfg.seed)
    eps, state, burn_acc = tune_step_size(fn, init, cfg, rng)
    samples, energies, flags, dhs = [], [], [], []
    divergences = 0
    for i in range(cfg.n_samples * cfg.thin):
        state, acc, dh, div = mh_step(state, fn, cfg, rng, eps)
        flags.append(acc)
        dhs.append(dh)
        divergences += div
        if (i + 1) % cfg.thin == 0:
            samples.append(state.theta.copy())
            energies.append(state.u)
    flags_arr = np.array(flags, dtype=bool)
    dh_arr = np.array(dhs, dtype=float)
    chain = HmcChain(np.array(samples), np.array(energies), flags_arr, dh_arr)
    finite = dh_arr[np.isfinite(dh_arr)]
    diag = HmcDiagnostics(float(flags_arr.mean()), float(np.mean(np.abs(finite))) if finite.size else math.inf,
                          eps, burn_acc, divergences, cfg.tune)
    if not flags_arr.any():
        warnings.warn("every HMC proposal was rejected; the chain is stuck at its initial state", RuntimeWarning)
    return chain, diag


# ---------------------------------------------------------------------------
# Persistence
# ---------------------------------------------------------------------------


def save_chain(chain: HmcChain, diag: HmcDiagnostics, directory, header: dict | None = None) -> None:
    """Write ``chain.jsonl`` (header line, then one record per sample) and ``diagnostics.json``."""
    lines = [json.dumps(header or {})]
    for k, (theta, u) in enumerate(zip(chain.samples, chain.energies)):
        lines.append(json.dumps({"index": k, "potential": float(u), "values": [float(v) for v in theta]}))
    d = {k: (None if isinstance(v, float) and not math.isfinite(v) else v) for k, v in asdict(diag).items()}
    d["accept_flags"] = [bool(a) for a in chain.accept_flags]
    d["delta_h"] = [float(v) if math.isfinite(v) else None for v in chain.delta_h]
    os.makedirs(directory, exist_ok=True)
    atomic_write_text(os.path.join(directory, "chain.jsonl"), "\n".join(lines) + "\n")
    atomic_write_text(os.path.join(directory, "diagnostics.json"), json.dumps(d, indent=2) + "\n")


def load_chain(directory) -> tuple[dict, HmcChain, HmcDiagnostics]:
    with open(os.path.join(directory, "chain.jsonl")) as fh:
        header = json.loads(fh.readline())
        records = [json.loads(line) for line in fh if line.strip()]
    with open(os.path.join(directory, "diagnostics.json")) as fh:
        d = json.load(fh)
    flags = np.array(d.pop("accept_flags"), dtype=bool)
    dh = np.array([math.inf if v is None else v for v in d.pop("delta_h")], dtype=float)
    chain = HmcChain(np.array([r["values"] for r in records]), np.array([r["potential"] for r in records]), flags, dh)
    d = {k: (math.nan if v is None else v) for k, v in d.items()}
    return header, chain, HmcDiagnostics(**d)
