"""Closed-form post-void stress on single segments.

The stress in a segment obeys the diffusion equation with prescribed end
gradients ``phi-(t)``, ``phi+(t)`` (or a zero-stress void end).  By Duhamel's
principle the solution is the sum of

* the response to the initial stress ``h``,
* ``phi(0)`` times a unit-gradient response kernel,
* the convolution of ``dphi/dt`` with the same kernel.

The kernels are the image sums over ``g(zeta_i(p, x, L), t)``.  For
``kappa*t/L**2`` below ``SeriesConfig.switch_ratio`` the truncated image sum
(``p <= p_max``) is used directly; above it the same function is evaluated
from its equivalent eigenfunction expansion (``m <= m_max`` modes), where
the image sum would need many more terms.  The initial-stress response uses
the same split: Gaussian images for short times, the cosine series for long
times.

Resolved sign conventions (checked against the finite-difference solver):

voidless:  sigma = IC_N[h] - (phi-(0) S-  + dphi-/dt * S-) + (phi+(0) S+ + dphi+/dt * S+)
void at L: sigma = IC_V[h] + (phi-(0) V  + dphi-/dt * V)

with ``S-(x) = sum_p g(zeta1) + g(zeta3)``, ``S+(x) = sum_p g(zeta2) + g(zeta4)``
and ``V(x) = sum_p (-1)^p (g(zeta1) - g(zeta3))``.  A void at x = 0 is
solved on the reflected segment.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np
from scipy.special import erf, erfc, erfcx

from .core import InitialStressProfile, SegmentModel, StressField

RateLike = Callable[[np.ndarray], np.ndarray] | float | None


@dataclass(frozen=True)
class SeriesConfig:
    """Truncation orders: ``p_max`` images, ``m_max`` eigenmodes, Gauss-Legendre nodes.

    ``switch_ratio`` is the value of kappa*t/L^2 where kernels switch from the
    image form to the eigen form; ``None`` keeps the image form at all times.
    """

    p_max: int = 2
    m_max: int = 5
    quad_order: int = 16
    switch_ratio: float | None = 0.25

    def __post_init__(self):
        if self.p_max < 0 or self.m_max < 1 or self.quad_order < 2:
            raise ValueError(f"invalid series configuration {self}")


@dataclass(frozen=True)
class BoundaryFluxSpec:
    """End gradients phi(0) (Pa/m) and their time derivatives (Pa/(m s)).

    Rates may be callables of time (vectorised), constants, or ``None`` for zero.
    """

    phi_minus_0: float = 0.0
    phi_plus_0: float = 0.0
    rate_minus: RateLike = None
    rate_plus: RateLike = None

    def phi_minus(self, t) -> np.ndarray:
        return self.phi_minus_0 + integrate_rate(self.rate_minus, t)

    def phi_plus(self, t) -> np.ndarray:
        return self.phi_plus_0 + integrate_rate(self.rate_plus, t)


def rate_values(rate: RateLike, tau) -> np.ndarray:
    tau = np.asarray(tau, dtype=float)
    if rate is None:
        return np.zeros_like(tau)
    if callable(rate):
        return np.broadcast_to(np.asarray(rate(tau), dtype=float), tau.shape)
    return np.full_like(tau, float(rate))


def integrate_rate(rate: RateLike, t, order: int = 16) -> np.ndarray:
    """Integral of the rate from 0 to t."""
    t = np.asarray(t, dtype=float)
    if rate is None:
        return np.zeros_like(t)
    if not callable(rate):
        return float(rate) * t
    xi, w = gauss_legendre(order)
    tau = 0.5 * t[..., None] * (xi + 1.0)
    return 0.5 * t * np.sum(w * rate_values(rate, tau), axis=-1)


# ---------------------------------------------------------------------------
# Kernels
# ---------------------------------------------------------------------------


def _g(x, t, kappa):
    # g = 2 sqrt(kt) exp(-z^2) (1/sqrt(pi) - z erfcx(z)),  z = x / (2 sqrt(kt)); t > 0
    root = np.sqrt(kappa * t)
    z = x / (2.0 * root)
    return 2.0 * root * np.exp(-z * z) * (1.0 / math.sqrt(math.pi) - z * erfcx(z))


def g_kernel(x, t, kappa):
    """g(x, t) = 2 sqrt(kappa t / pi) exp(-x^2 / (4 kappa t)) - x erfc(x / (2 sqrt(kappa t)))."""
    t = np.asarray(t, dtype=float)
    if np.any(t <= 0):
        raise ValueError("g_kernel needs t > 0")
    if kappa <= 0:
        raise ValueError("g_kernel needs kappa > 0")
    out = _g(np.asarray(x, dtype=float), t, kappa)
    return float(out) if np.ndim(out) == 0 else out


def zeta(variant: int, p, x, length):
    """Image distances: (2p+2)L - x, (2p+1)L - x, 2pL + x, (2p+1)L + x."""
    if variant == 1:
        return (2 * p + 2) * length - x
    if variant == 2:
        return (2 * p + 1) * length - x
    if variant == 3:
        return 2 * p * length + x
    if variant == 4:
        return (2 * p + 1) * length + x
    raise ValueError("zeta variant must be 1..4")


@lru_cache(maxsize=32)
def gauss_legendre(order: int) -> tuple[np.ndarray, np.ndarray]:
    return np.polynomial.legendre.leggauss(order)


def convolve_gl(a: Callable, b: Callable, t: float, order: int = 16) -> float:
    """Gauss-Legendre approximation of (a * b)(t) = int_0^t a(tau) b(t - tau) dtau."""
    if t < 0:
        raise ValueError("convolution needs t >= 0")
    if order < 2:
        raise ValueError("quadrature order must be >= 2")
    if t == 0:
        return 0.0
    xi, w = gauss_legendre(order)
    tau = 0.5 * t * (xi + 1.0)
    return float(0.5 * t * np.sum(w * np.asarray(a(tau), dtype=float) * np.asarray(b(t - tau), dtype=float)))


def _use_images(s, length, kappa, cfg: SeriesConfig):
    if cfg.switch_ratio is None:
        return np.ones(np.shape(s), dtype=bool)
    return kappa * s / length ** 2 < cfg.switch_ratio


def neumann_kernel(x, s, length, kappa, cfg: SeriesConfig):
    """S-(x, s) = sum_p g(zeta1) + g(zeta3): response to a unit gradient drop at x = 0 (s > 0)."""
    x, s = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(s, dtype=float))
    short = _use_images(s, length, kappa, cfg)
    out = np.empty(x.shape)
    if np.any(short):
        xs, ss = x[short], s[short]
        acc = np.zeros(xs.shape)
        for p in range(cfg.p_max + 1):
            acc += _g(zeta(1, p, xs, length), ss, kappa) + _g(zeta(3, p, xs, length), ss, kappa)
        out[short] = acc
    long_ = ~short
    if np.any(long_):
        xl, sl = x[long_], s[long_]
        acc = kappa * sl / length + (length - xl) ** 2 / (2 * length) - length / 6
        for n in range(1, cfg.m_max + 1):
            k = n * math.pi / length
            acc -= 2 * length / (n * math.pi) ** 2 * np.cos(k * xl) * np.exp(-kappa * k * k * sl)
        out[long_] = acc
    return out


def void_kernel(x, s, length, kappa, cfg: SeriesConfig):
    """V(x, s) = sum_p (-1)^p (g(zeta1) - g(zeta3)): unit gradient at x = 0, zero stress at x = L."""
    x, s = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(s, dtype=float))
    short = _use_images(s, length, kappa, cfg)
    out = np.empty(x.shape)
    if np.any(short):
        xs, ss = x[short], s[short]
        acc = np.zeros(xs.shape)
        for p in range(cfg.p_max + 1):
            acc += (-1) ** p * (_g(zeta(1, p, xs, length), ss, kappa) - _g(zeta(3, p, xs, length), ss, kappa))
        out[short] = acc
    long_ = ~short
    if np.any(long_):
        xl, sl = x[long_], s[long_]
        acc = xl - length
        for m in range(1, cfg.m_max + 1):
            lam = (m - 0.5) * math.pi / length
            acc = acc + 2.0 / (length * lam * lam) * np.cos(lam * xl) * np.exp(-kappa * lam * lam * sl)
        out[long_] = acc
    return out


# ---------------------------------------------------------------------------
# Initial-stress response
# ---------------------------------------------------------------------------


def _cos_integral(h: InitialStressProfile, length: float, k: float) -> float:
    """int_0^L h(u) cos(k u) du in closed form."""
    if h.kind == "cosine_mode":
        w = h.wavenumber * math.pi / length
        total = h.offset * (math.sin(k * length) / k if k else length)
        for c in (w - k, w + k):
            total += 0.5 * h.amplitude * (math.sin(c * length) / c if abs(c) > 1e-14 / length else length)
        return total
    total = 0.0
    for u0, u1, a, b in h.pieces(length):
        for u, sign in ((u1, 1.0), (u0, -1.0)):
            total += sign * ((a + b * u) * math.sin(k * u) / k + b * math.cos(k * u) / (k * k))
    return total


def ic_projection_voidless(h: InitialStressProfile, length, kappa, m_max, x, t):
    """Mean of h plus the first ``m_max`` decaying cosine modes (both ends zero-gradient)."""
    x, t = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(t, dtype=float))
    out = np.full(x.shape, h.mean(length))
    for m in range(1, m_max + 1):
        k = m * math.pi / length
        out = out + 2.0 / length * _cos_integral(h, length, k) * np.cos(k * x) * np.exp(-kappa * k * k * t)
    return out


def ic_projection_void(h: InitialStressProfile, length, kappa, m_max, x, t, void_at: str = "plus"):
    """First ``m_max`` decaying modes with zero gradient at the far end and zero stress at the void."""
    if void_at == "minus":
        if h.kind == "cosine_mode":
            raise ValueError("reflection of cosine_mode profiles is not supported")
        return ic_projection_void(h.reflected(length), length, kappa, m_max, length - np.asarray(x, dtype=float), t)
    if void_at != "plus":
        raise ValueError("void_at must be 'minus' or 'plus'")
    x, t = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(t, dtype=float))
    out = np.zeros(x.shape)
    for m in range(1, m_max + 1):
        lam = (m - 0.5) * math.pi / length
        out = out + 2.0 / length * _cos_integral(h, length, lam) * np.cos(lam * x) * np.exp(-kappa * lam * lam * t)
    return out


def _erf_diff(z0, z1, root):
    """0.5*(erf(z1/(2 root)) - erf(z0/(2 root))) without cancellation in the tails."""
    a, b = z0 / (2 * root), z1 / (2 * root)
    pos = (a >= 0) & (b >= 0)
    neg = (a <= 0) & (b <= 0)
    return np.where(pos, 0.5 * (erfc(a) - erfc(b)),
                    np.where(neg, 0.5 * (erfc(-b) - erfc(-a)), 0.5 * (erf(b) - erf(a))))


def _gauss(z, d):
    return np.exp(-z * z / (4 * d)) / np.sqrt(4 * math.pi * d)


def _linear_gauss_integral(c0, c1, z0, z1, d):
    """int_{z0}^{z1} (c0 + c1 z) Phi(z) dz for the heat kernel Phi with variance 2d."""
    return c0 * _erf_diff(z0, z1, np.sqrt(d)) - c1 * 2 * d * (_gauss(z1, d) - _gauss(z0, d))


def _ic_images(h: InitialStressProfile, length, kappa, x, t, n_images: int, alternating: bool):
    # sum_n (+/-1)^n int h(u) [Phi(x - u + 2nL) + Phi(x + u + 2nL)] du, t > 0
    d = kappa * t
    out = np.zeros(np.broadcast(x, t).shape)
    for n in range(-n_images, n_images + 1):
        sign = (-1.0) ** n if alternating else 1.0
        c = 2 * n * length
        for u0, u1, a, b in h.pieces(length):
            term = _linear_gauss_integral(a + b * (x + c), -b, x - u1 + c, x - u0 + c, d)
            term = term + _linear_gauss_integral(a - b * (x + c), b, x + u0 + c, x + u1 + c, d)
            out = out + sign * term
    return out


def initial_response(h: InitialStressProfile, length, kappa, x, t, cfg: SeriesConfig, void: bool):
    """Evolution of the initial stress with zero end gradients (``void``: zero stress at x = L)."""
    x, t = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(t, dtype=float))
    if void:
        out = ic_projection_void(h, length, kappa, cfg.m_max, x, t)
    else:
        out = ic_projection_voidless(h, length, kappa, cfg.m_max, x, t)
    if h.kind == "cosine_mode":
        return out
    short = _use_images(t, length, kappa, cfg) & (t > 0)
    if np.any(short):
        out = out.copy()
        out[short] = _ic_images(h, length, kappa, x[short], t[short], cfg.p_max + 1, alternating=void)
    at_zero = t == 0
    if np.any(at_zero):
        out = out.copy()
        out[at_zero] = h.evaluate(x[at_zero], length)
        if void:
            # the void pins sigma(L) = 0 from t = 0 on
            out[at_zero & (x >= length)] = 0.0
    return out


# ---------------------------------------------------------------------------
# Affine boundary response
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FluxResponse:
    """Affine map from one end's (phi(0), rate nodes) to stress on an (x, t) grid.

    stress[i, k] = phi0 * phi0_coeff[i, k] + sum_j rate_coeff[i, k, j] * rate(rate_times[k, j])
    """

    phi0_coeff: np.ndarray
    rate_coeff: np.ndarray
    rate_times: np.ndarray

    def apply(self, phi0: float, rate: RateLike) -> np.ndarray:
        r = rate_values(rate, self.rate_times)
        return phi0 * self.phi0_coeff + np.einsum("ikj,kj->ik", self.rate_coeff, r)


def quadrature_times(t_grid, order: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Lag and source times for int_0^t r(tau) K(t - tau) dtau with lag s = t v^2.

    Returns ``(lags, taus, weights)`` each of shape (len(t), order); the
    substitution removes the sqrt(s) behaviour of the kernels at s = 0.
    """
    t = np.asarray(t_grid, dtype=float)
    xi, w = gauss_legendre(order)
    v = 0.5 * (xi + 1.0)
    lags = t[:, None] * v[None, :] ** 2
    taus = t[:, None] - lags
    weights = (0.5 * w)[None, :] * 2.0 * t[:, None] * v[None, :]
    return lags, taus, weights


def flux_response(kernel: str, x_grid, t_grid, length, kappa, cfg: SeriesConfig) -> FluxResponse:
    """Unsigned response of ``kernel`` in {'minus', 'plus', 'void'} on the grid."""
    x = np.asarray(x_grid, dtype=float)
    t = np.asarray(t_grid, dtype=float)
    if kernel == "minus":
        fn, xe = neumann_kernel, x
    elif kernel == "plus":
        fn, xe = neumann_kernel, length - x
    elif kernel == "void":
        fn, xe = void_kernel, x
    else:
        raise ValueError(kernel)
    pos = t > 0
    phi0 = np.zeros((x.size, t.size))
    if np.any(pos):
        phi0[:, pos] = fn(xe[:, None], t[None, pos], length, kappa, cfg)
    lags, taus, weights = quadrature_times(t, cfg.quad_order)
    rate = np.zeros((x.size, t.size, cfg.quad_order))
    if np.any(pos):
        kv = fn(xe[:, None, None], lags[None, pos, :], length, kappa, cfg)
        rate[:, pos, :] = kv * weights[None, pos, :]
    return FluxResponse(phi0, rate, taus)


def _check_grids(x_grid, t_grid, length):
    x = np.asarray(x_grid, dtype=float)
    t = np.asarray(t_grid, dtype=float)
    if x.ndim != 1 or t.ndim != 1 or x.size == 0 or t.size == 0:
        raise ValueError("grids must be nonempty 1-D arrays")
    if np.any(x < -1e-12 * length) or np.any(x > length * (1 + 1e-12)):
        raise ValueError("x grid must lie inside [0, L]")
    if np.any(t < 0):
        raise ValueError("t grid must be nonnegative")
    return np.clip(x, 0.0, length), t


@dataclass(frozen=True)
class SegmentOperators:
    """Signed affine pieces of one segment's solution on an (x, t) grid.

    stress = ic + sum over driven ends e of (phi_e(0) * phi[e] + sum_j rate[e][..., j] * dphi_e/dt(taus[:, j]))

    Only non-void ends appear in ``phi`` and ``rate``.
    """

    ic: np.ndarray
    phi: dict
    rate: dict
    taus: np.ndarray

    def evaluate(self, phi0: dict, rates: dict) -> np.ndarray:
        """``phi0[end]`` is a float and ``rates[end]`` a rate-like or an array on ``taus``."""
        out = self.ic.copy()
        for end, coeff in self.phi.items():
            out += phi0.get(end, 0.0) * coeff
            r = rates.get(end)
            if r is None:
                continue
            r = np.asarray(r, dtype=float) if not callable(r) and np.ndim(r) else rate_values(r, self.taus)
            out += np.einsum("ikj,kj->ik", self.rate[end], np.broadcast_to(r, self.taus.shape))
        return out


def segment_operators(seg: SegmentModel, cfg: SeriesConfig, x_grid, t_grid) -> SegmentOperators:
    """Initial-stress response and signed end responses for ``seg`` on the grid."""
    x, t = _check_grids(x_grid, t_grid, seg.length)
    L, k = seg.length, seg.kappa
    h = seg.initial_stress
    if seg.void_end == "none":
        ic = initial_response(h, L, k, x[:, None], t[None, :], cfg, void=False)
        minus = flux_response("minus", x, t, L, k, cfg)
        plus = flux_response("plus", x, t, L, k, cfg)
        phi = {"minus": -minus.phi0_coeff, "plus": plus.phi0_coeff}
        rate = {"minus": -minus.rate_coeff, "plus": plus.rate_coeff}
        taus = minus.rate_times
    elif seg.void_end == "at_plus":
        ic = initial_response(h, L, k, x[:, None], t[None, :], cfg, void=True)
        resp = flux_response("void", x, t, L, k, cfg)
        phi, rate, taus = {"minus": resp.phi0_coeff}, {"minus": resp.rate_coeff}, resp.rate_times
    elif seg.void_end == "at_minus":
        xr = L - x
        if h.kind == "cosine_mode":
            ic = ic_projection_void(h, L, k, cfg.m_max, x[:, None], t[None, :], void_at="minus")
        else:
            ic = initial_response(h.reflected(L), L, k, xr[:, None], t[None, :], cfg, void=True)
        resp = flux_response("void", xr, t, L, k, cfg)
        phi, rate, taus = {"plus": -resp.phi0_coeff}, {"plus": -resp.rate_coeff}, resp.rate_times
    else:
        raise ValueError(f"unknown void_end {seg.void_end!r}")
    return SegmentOperators(ic, phi, rate, taus)


def solve_voidless_segment(seg: SegmentModel, flux: BoundaryFluxSpec, cfg: SeriesConfig, x_grid, t_grid,
                           scaled: bool = False) -> StressField:
    """Stress on a segment without void under end gradients phi-(t), phi+(t)."""
    if seg.void_end != "none":
        raise ValueError(f"segment {seg.id} carries a void; use solve_void_segment")
    ops = segment_operators(seg, cfg, x_grid, t_grid)
    sigma = ops.evaluate({"minus": flux.phi_minus_0, "plus": flux.phi_plus_0},
                         {"minus": flux.rate_minus, "plus": flux.rate_plus})
    return StressField(seg.id, _check_grids(x_grid, t_grid, seg.length)[0], t_grid, sigma, scaled)


def solve_void_segment(seg: SegmentModel, flux_nonvoid_end: tuple[float, RateLike], cfg: SeriesConfig,
                       x_grid, t_grid, scaled: bool = False) -> StressField:
    """Stress on a segment with zero stress at its void end.

    ``flux_nonvoid_end`` is ``(phi(0), dphi/dt)`` at the other end, in the
    segment's own coordinate.  A void at x = 0 is solved on the reflected
    segment x' = L - x, where the far-end gradient changes sign.
    """
    if seg.void_end not in ("at_minus", "at_plus"):
        raise ValueError(f"segment {seg.id} has no void end")
    end = "minus" if seg.void_end == "at_plus" else "plus"
    phi0, rate = flux_nonvoid_end
    ops = segment_operators(seg, cfg, x_grid, t_grid)
    sigma = ops.evaluate({end: phi0}, {end: rate})
    return StressField(seg.id, _check_grids(x_grid, t_grid, seg.length)[0], t_grid, sigma, scaled)


def solve_segment(seg: SegmentModel, flux: BoundaryFluxSpec, cfg: SeriesConfig, x_grid, t_grid,
                  scaled: bool = False) -> StressField:
    """Dispatch on ``seg.void_end``; the void end's entries of ``flux`` are ignored."""
    if seg.void_end == "none":
        return solve_voidless_segment(seg, flux, cfg, x_grid, t_grid, scaled)
    if seg.void_end == "at_plus":
        return solve_void_segment(seg, (flux.phi_minus_0, flux.rate_minus), cfg, x_grid, t_grid, scaled)
    return solve_void_segment(seg, (flux.phi_plus_0, flux.rate_plus), cfg, x_grid, t_grid, scaled)
