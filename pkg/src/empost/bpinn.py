"""Physics glue between the network and the closed-form segment solutions.

One shared network is evaluated at every interior junction.  Its input is
the scaled time and the four slot current densities of that junction; its
three outputs are the flux rates of the U, R and D slots.  The L slot rate
follows from atomic flux conservation, so every junction balances exactly.

Each rate is ``d phi / dt`` at the segment end facing the slot, where
``phi`` is the stress gradient in the segment's own coordinate.  With
``n = +1`` at a segment's minus end and ``-1`` at its plus end, conservation
at a junction reads ``sum_k n_k (phi_k + G_k) = 0`` for equal diffusivities.
In slot terms this is ``F_L = F_U + F_R + F_D`` with ``rate_L = F_L``,
``rate_U = F_U``, ``rate_R = F_R`` and ``rate_D = -F_D``.

Boundary stresses are affine in the network outputs at the quadrature
nodes, so the potential and its gradient reuse one precomputed map.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Mapping, Sequence

import numpy as np
from scipy.optimize import minimize

from .analytic import BoundaryFluxSpec, SeriesConfig, segment_operators, solve_segment
from .bnn import (NetArchitecture, NetParams, PriorSpec, backward_flat, forward_flat, grad_log_prior, init_prior,
                  log_prior)
from .core import (SLOTS, EvaluationPoint, InterconnectTree, Junction, drive_force, require_valid, tree_model)
from .hmc import HmcChain, HmcConfig, HmcDiagnostics, sample_posterior

# sign that turns the slot flux F into d(phi)/dt at the facing segment end
SLOT_SIGN = {"L": 1.0, "U": 1.0, "R": 1.0, "D": -1.0}
# position of U, R, D in the network output
OUTPUT_INDEX = {"U": 0, "R": 1, "D": 2}


# ---------------------------------------------------------------------------
# Configuration and normalization
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BpinnConfig:
    """Training setup of the physics-informed network.

    ``var_l`` is the noise variance of each continuity observation and
    ``target`` its observed value.  Continuity is checked at
    ``n_eval_times`` times spread uniformly over (0, t_end] for each of
    ``n_train_draws`` current draws.
    """

    arch: NetArchitecture = field(default_factory=NetArchitecture)
    prior: PriorSpec | None = None
    series: SeriesConfig = field(default_factory=lambda: SeriesConfig(quad_order=8))
    var_l: float = 1e-2
    target: float = 0.0
    n_eval_times: int = 20
    t_end: float = 1e8
    n_train_draws: int = 16
    map_iterations: int = 3000

    def __post_init__(self):
        if not (self.var_l > 0 and math.isfinite(self.var_l)):
            raise ValueError("var_l must be positive")
        if self.n_eval_times < 1 or self.n_train_draws < 1:
            raise ValueError("need at least one evaluation time and one training draw")
        if not self.t_end > 0:
            raise ValueError("t_end must be positive")
        if self.arch.input_dim != 5 or self.arch.output_dim != 3:
            raise ValueError("the junction network maps 5 inputs to 3 flux rates")
        self.prior_spec.check(self.arch)

    @property
    def prior_spec(self) -> PriorSpec:
        return self.prior if self.prior is not None else PriorSpec.default(self.arch)

    @property
    def eval_times(self) -> np.ndarray:
        return self.t_end * np.arange(1, self.n_eval_times + 1) / self.n_eval_times


@dataclass(frozen=True)
class Normalization:
    """Input and output scales of the junction network.

    Inputs are ``(k_t * t, J_L / current_scale, ..., J_D / current_scale)``;
    outputs times ``flux_scale`` are gradient rates in Pa/(m s).
    """

    k_t: float
    current_scale: float
    flux_scale: float

    def to_dict(self) -> dict:
        return {"k_t": self.k_t, "current_scale": self.current_scale, "flux_scale": self.flux_scale}

    @classmethod
    def from_dict(cls, d: Mapping) -> "Normalization":
        return cls(float(d["k_t"]), float(d["current_scale"]), float(d["flux_scale"]))


def make_normalization(tree: InterconnectTree, train_currents, t_end: float) -> Normalization:
    """Root-mean-square current over occupied junction slots, and drive force over ``t_end`` for the outputs."""
    train_currents = np.atleast_2d(np.asarray(train_currents, dtype=float))
    idx = [tree.segment_index(j.slots[s]) for j in tree.interior_junctions for s in j.occupied]
    occ = train_currents[:, idx] if idx else train_currents
    current_scale = float(np.sqrt(np.mean(occ ** 2))) or 1.0
    g = drive_force(np.asarray(tree.currents), tree.material)
    flux_scale = float(np.sqrt(np.mean(g ** 2))) / t_end or 1.0 / t_end
    return Normalization(tree.scaling.k_t, current_scale, flux_scale)


# ---------------------------------------------------------------------------
# Junction flux assembly
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FluxAssembly:
    """Slot fluxes of one junction; ``fluxes[slot]`` is zero for empty slots."""

    junction_id: str
    raw: np.ndarray
    fluxes: dict
    mask: dict

    def balance(self) -> np.ndarray:
        """F_L - (F_U + F_R + F_D); zero by construction."""
        f = self.fluxes
        return f["L"] - (f["U"] + f["R"] + f["D"])


def slot_coefficients(junction: Junction) -> dict[str, np.ndarray]:
    """Row vectors c with F_slot = c . (F_U, F_R, F_D) for every occupied slot.

    Unoccupied U, R, D outputs are masked to zero.  When L is occupied it
    carries F_U + F_R + F_D.  Otherwise the first occupied slot among U, R,
    D takes minus the sum of the others so that F_U + F_R + F_D = 0 = F_L.
    """
    occ = junction.occupied
    if len(occ) < 2:
        raise ValueError(f"junction {junction.id} has fewer than two segments")
    rows = {}
    free = [s for s in occ if s != "L"]
    if "L" not in occ:
        derived, free = free[0], free[1:]
    for s in free:
        rows[s] = np.eye(3)[OUTPUT_INDEX[s]]
    if "L" in occ:
        rows["L"] = sum(rows.values())
    else:
        rows[derived] = -sum(rows.values())
    return {s: rows[s] for s in occ}


def assemble_junction(junction: Junction, raw) -> FluxAssembly:
    """Map raw network outputs (..., 3) to conserving slot fluxes."""
    raw = np.asarray(raw, dtype=float)
    coeff = slot_coefficients(junction)
    zero = np.zeros(raw.shape[:-1])
    fluxes = {s: (raw @ coeff[s] if s in coeff else zero) for s in SLOTS}
    return FluxAssembly(junction.id, raw, fluxes, {s: s in coeff for s in SLOTS})


def junction_inputs(tree: InterconnectTree, junction: Junction | str, t, currents=None,
                    norm: Normalization | None = None) -> np.ndarray:
    """Network input rows ``(k_t t, J_L, J_U, J_R, J_D)`` for time(s) ``t``.

    Currents are divided by ``norm.current_scale`` when ``norm`` is given;
    empty slots contribute 0.  Returns shape (5,) for scalar ``t``.
    """
    if isinstance(junction, str):
        junction = tree.junction(junction)
    if junction.kind != "interior":
        raise ValueError(f"junction {junction.id} is a terminal; only interior junctions have network inputs")
    currents = tree.currents if currents is None else np.asarray(currents, dtype=float)
    scale = 1.0 if norm is None else norm.current_scale
    k_t = tree.scaling.k_t if norm is None else norm.k_t
    j = np.array([currents[tree.segment_index(junction.slots[s])] / scale if junction.slots[s] else 0.0
                  for s in SLOTS])
    t = np.asarray(t, dtype=float)
    out = np.empty(t.shape + (5,))
    out[..., 0] = k_t * t
    out[..., 1:] = j
    return out


def initial_gradients(tree: InterconnectTree, currents=None) -> dict[tuple[str, str], float]:
    """phi(0) at every non-void segment end, keyed by (segment id, end).

    Blocked terminals get -G (zero atomic flux).  Interior ends start from
    the slope of h, shifted by a common ``n_k * lambda`` per junction so
    that flux balances at t = 0 under the given currents.
    """
    currents = tree.currents if currents is None else np.asarray(currents, dtype=float)
    g = {s.id: drive_force(float(c), tree.material) for s, c in zip(tree.segments, currents)}
    out: dict[tuple[str, str], float] = {}
    for j in tree.junctions:
        ends = []
        for slot in j.occupied:
            seg = tree.segment(j.slots[slot])
            end = "minus" if seg.node_minus == j.id and seg.slot_at("minus") == slot else "plus"
            ends.append((seg, end))
        if j.kind == "blocked_terminal":
            seg, end = ends[0]
            out[(seg.id, end)] = -g[seg.id]
        elif j.kind == "interior":
            slopes = [seg.initial_stress.slope_at(end, seg.length) for seg, end in ends]
            n = [1.0 if end == "minus" else -1.0 for _, end in ends]
            lam = -sum(nk * (sk + g[seg.id]) for nk, sk, (seg, _) in zip(n, slopes, ends)) / len(ends)
            for (seg, end), nk, sk in zip(ends, n, slopes):
                out[(seg.id, end)] = sk + nk * lam
    return out


@dataclass(frozen=True)
class _End:
    """A segment end sitting at an interior junction."""

    junction: int
    segment: int
    end: str
    slot: str
    coeff: np.ndarray  # sign * slot coefficient row


def _junction_ends(tree: InterconnectTree) -> list[_End]:
    ends = []
    for ji, j in enumerate(tree.interior_junctions):
        coeff = slot_coefficients(j)
        for slot in j.occupied:
            seg = tree.segment(j.slots[slot])
            end = "minus" if seg.node_minus == j.id and seg.slot_at("minus") == slot else "plus"
            ends.append(_End(ji, tree.segment_index(seg.id), end, slot, SLOT_SIGN[slot] * coeff[slot]))
    return ends


def assemble_segment_fluxes(tree: InterconnectTree, params: NetParams, currents=None,
                            norm: Normalization | None = None) -> dict[str, BoundaryFluxSpec]:
    """Per-segment end gradients: phi(0) from :func:`initial_gradients`, rates from the network.

    Rates are callables of physical time.  Blocked ends have zero rate;
    void ends get no entry (``phi0 = 0``, ``rate = None``).
    """
    currents = tree.currents if currents is None else np.asarray(currents, dtype=float)
    if norm is None:
        norm = make_normalization(tree, currents[None, :], 1.0 / tree.scaling.k_t)
    phi0 = initial_gradients(tree, currents)
    rates: dict[tuple[str, str], object] = {}
    interior = tree.interior_junctions
    for e in _junction_ends(tree):
        j = interior[e.junction]

        def rate(tau, j=j, c=e.coeff):
            x = junction_inputs(tree, j, tau, currents, norm)
            y = forward_flat(params.arch, params.flat(), x.reshape(-1, 5))
            return norm.flux_scale * (y @ c).reshape(np.shape(tau))

        rates[(tree.segments[e.segment].id, e.end)] = rate
    for key in phi0:
        rates.setdefault(key, 0.0)
    out = {}
    for s in tree.segments:
        out[s.id] = BoundaryFluxSpec(phi0.get((s.id, "minus"), 0.0), phi0.get((s.id, "plus"), 0.0),
                                     rates.get((s.id, "minus")), rates.get((s.id, "plus")))
    return out


def boundary_stress(tree: InterconnectTree, fluxes: Mapping[str, BoundaryFluxSpec], seg_id: str, endpoint: str,
                    t, cfg: SeriesConfig = SeriesConfig(), currents=None) -> np.ndarray:
    """Stress (Pa) at the ``minus`` or ``plus`` end of one segment at time(s) ``t``."""
    model = tree_model(tree, currents).segment(seg_id)
    t_arr = np.atleast_1d(np.asarray(t, dtype=float))
    order = np.argsort(t_arr)
    ts = t_arr[order]
    uniq, inv = np.unique(ts, return_inverse=True)
    x = [0.0] if endpoint == "minus" else [model.length]
    vals = solve_segment(model, fluxes[seg_id], cfg, x, uniq).values[0][inv]
    out = np.empty_like(t_arr)
    out[order] = vals
    return out.reshape(np.shape(t))


# ---------------------------------------------------------------------------
# Loss and likelihood
# ---------------------------------------------------------------------------


def junction_mismatch(boundary: Sequence[Sequence[float]]) -> float:
    """Continuity loss from boundary stresses grouped per junction.

    ``boundary[J]`` lists the stresses of the segments at junction J in
    (L, U, R, D) slot order.  Returns
    ``(1/N_I) sum_J (1/K_J) sum_{i>=2} (s_i - s_{i-1})**2``.
    """
    if not boundary:
        raise ValueError("no interior junctions")
    total = 0.0
    for stresses in boundary:
        s = np.asarray(stresses, dtype=float)
        if s.size < 2:
            raise ValueError("a junction needs at least two segments")
        total += float(np.sum(np.diff(s) ** 2)) / s.size
    return total / len(boundary)


def log_likelihood(losses, targets, var_l: float) -> float:
    """Sum of Gaussian log-densities of ``losses`` around ``targets`` with variance ``var_l``."""
    if not var_l > 0:
        raise ValueError("var_l must be positive")
    losses = np.asarray(losses, dtype=float)
    targets = np.broadcast_to(np.asarray(targets, dtype=float), losses.shape)
    r = losses - targets
    return float(np.sum(-0.5 * math.log(2 * math.pi * var_l) - r * r / (2 * var_l)))


@dataclass(frozen=True)
class ContinuityDataset:
    """Observed continuity losses: one per (current draw, evaluation time)."""

    times: np.ndarray
    currents: np.ndarray  # (n_draws, n_segments)
    targets: np.ndarray  # (n_draws, n_times)
    var_l: float

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        cur = np.atleast_2d(np.asarray(self.currents, dtype=float))
        tg = np.broadcast_to(np.asarray(self.targets, dtype=float), (cur.shape[0], times.size)).copy()
        if times.ndim != 1 or times.size < 1 or np.any(times <= 0) or np.any(np.diff(times) <= 0):
            raise ValueError("evaluation times must be positive and strictly increasing")
        if not (self.var_l > 0 and math.isfinite(self.var_l)):
            raise ValueError("var_l must be positive")
        if not (np.all(np.isfinite(tg)) and np.all(np.isfinite(cur))):
            raise ValueError("targets and currents must be finite")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "currents", cur)
        object.__setattr__(self, "targets", tg)

    @property
    def n_observations(self) -> int:
        return self.targets.size

    def evaluation_points(self, tree: InterconnectTree) -> list[EvaluationPoint]:
        """Every segment end at an interior junction, at every evaluation time."""
        pts = []
        for e in _junction_ends(tree):
            sid = tree.segments[e.segment].id
            pts += [EvaluationPoint(sid, e.end, float(t)) for t in self.times]
        return pts


def make_dataset(tree: InterconnectTree, cfg: BpinnConfig, train_currents) -> ContinuityDataset:
    cur = np.atleast_2d(np.asarray(train_currents, dtype=float))
    return ContinuityDataset(cfg.eval_times, cur, np.full((cur.shape[0], cfg.n_eval_times), cfg.target), cfg.var_l)


# ---------------------------------------------------------------------------
# Potential energy via the precomputed affine map
# ---------------------------------------------------------------------------


class Potential:
    """U(theta) = -log likelihood - log prior, with its exact gradient.

    Boundary stresses (scaled by k_sigma) at the junction ends are
    ``base[d, e, k] + sum_{e', j} B[e, e', k, j] * rate[d, e', k, j]``
    where ``rate`` is the network output at the quadrature nodes mapped
    through the conserving slot coefficients.  ``base`` collects the
    initial-stress response and the phi(0) terms for each current draw.
    """

    def __init__(self, tree: InterconnectTree, dataset: ContinuityDataset, cfg: BpinnConfig,
                 norm: Normalization | None = None):
        require_valid(tree)
        if not tree.interior_junctions:
            raise ValueError("tree has no interior junction; nothing to learn")
        self.tree, self.dataset, self.cfg = tree, dataset, cfg
        self.arch, self.prior = cfg.arch, cfg.prior_spec
        self.norm = norm or make_normalization(tree, dataset.currents, cfg.t_end)
        ksig = tree.scaling.k_sigma
        model = tree_model(tree)
        self.ends = ends = _junction_ends(tree)
        interior = tree.interior_junctions
        times = dataset.times
        ops = {}
        for e in ends:
            if e.segment not in ops:
                seg = model.segments[e.segment]
                ops[e.segment] = segment_operators(seg, cfg.series, [0.0, seg.length], times)
        taus = next(iter(ops.values())).taus
        n_e, n_t, q = len(ends), times.size, taus.shape[1]
        self.taus = taus

        # sensitivity of the boundary stress at e to the rate at e' (same segment only)
        B = np.zeros((n_e, n_e, n_t, q))
        for a, ea in enumerate(ends):
            xi = 0 if ea.end == "minus" else 1
            for b, eb in enumerate(ends):
                if eb.segment == ea.segment:
                    B[a, b] = ksig * ops[ea.segment].rate[eb.end][xi]
        self.B = B
        self._Bk = np.ascontiguousarray(B.transpose(2, 0, 1, 3).reshape(n_t, n_e, n_e * q))

        # base for every training draw
        n_d = dataset.currents.shape[0]
        base = np.zeros((n_d, n_e, n_t))
        for d in range(n_d):
            phi0 = initial_gradients(tree, dataset.currents[d])
            sid = {i: s.id for i, s in enumerate(tree.segments)}
            for a, ea in enumerate(ends):
                op = ops[ea.segment]
                xi = 0 if ea.end == "minus" else 1
                val = op.ic[xi].copy()
                for end, coeff in op.phi.items():
                    val += phi0.get((sid[ea.segment], end), 0.0) * coeff[xi]
                base[d, a] = ksig * val
        self.base = base

        # network inputs (n_d, n_junctions, n_t, q, 5)
        n_j = len(interior)
        X = np.empty((n_d, n_j, n_t, q, 5))
        for d in range(n_d):
            for ji, j in enumerate(interior):
                X[d, ji] = junction_inputs(tree, j, taus, dataset.currents[d], self.norm)
        self.X = X.reshape(-1, 5)
        self._xshape = (n_d, n_j, n_t, q)

        # end -> junction gather and output coefficients
        self.gather = np.array([e.junction for e in ends])
        self.R = self.norm.flux_scale * np.stack([e.coeff for e in ends])  # (n_e, 3)
        self.select = np.zeros((n_j, n_e))
        self.select[self.gather, np.arange(n_e)] = 1.0

        # adjacent differences per junction with weights 1/(N_I K_J)
        rows, weights = [], []
        for ji in range(n_j):
            members = [a for a, e in enumerate(ends) if e.junction == ji]
            for a, b in zip(members, members[1:]):
                r = np.zeros(n_e)
                r[b], r[a] = 1.0, -1.0
                rows.append(r)
                weights.append(1.0 / (n_j * len(members)))
        self.diff = np.array(rows)
        self.weights = np.array(weights)

    # -- forward pieces -------------------------------------------------------

    def rates(self, theta: np.ndarray, keep: bool = False):
        out = forward_flat(self.arch, theta, self.X, keep=keep)
        y, acts = out if keep else (out, None)
        y = y.reshape(self._xshape + (3,))
        rate = (y[:, self.gather] * self.R[None, :, None, None, :]).sum(axis=-1)
        return (rate, acts) if keep else rate

    def _apply_b(self, rate: np.ndarray) -> np.ndarray:
        """sum_{e', j} B[e, e', k, j] rate[d, e', k, j] as (n_draws, n_ends, n_times)."""
        n_d, n_e, n_t, q = rate.shape
        r = rate.transpose(2, 1, 3, 0).reshape(n_t, n_e * q, n_d)
        return (self._Bk @ r).transpose(2, 1, 0)

    def _apply_bt(self, g: np.ndarray) -> np.ndarray:
        n_d, n_e, n_t = g.shape
        out = self._Bk.transpose(0, 2, 1) @ g.transpose(2, 1, 0)
        return out.reshape(n_t, n_e, -1, n_d).transpose(3, 1, 0, 2)

    def boundary(self, theta: np.ndarray) -> np.ndarray:
        """Scaled boundary stresses (n_draws, n_ends, n_times)."""
        return self.base + self._apply_b(self.rates(theta))

    def losses(self, theta: np.ndarray) -> np.ndarray:
        """Continuity loss per (draw, time)."""
        m = np.einsum("pa,dak->dpk", self.diff, self.boundary(theta))
        return np.einsum("p,dpk->dk", self.weights, m * m)

    def energy(self, theta) -> float:
        theta = np.asarray(theta, dtype=float)
        ll = log_likelihood(self.losses(theta), self.dataset.targets, self.dataset.var_l)
        return -ll - log_prior(theta, self.prior, self.arch)

    def __call__(self, theta) -> tuple[float, np.ndarray]:
        theta = np.asarray(theta, dtype=float)
        rate, acts = self.rates(theta, keep=True)
        b = self.base + self._apply_b(rate)
        m = np.einsum("pa,dak->dpk", self.diff, b)
        loss = np.einsum("p,dpk->dk", self.weights, m * m)
        var = self.dataset.var_l
        resid = loss - self.dataset.targets
        u = float(np.sum(resid * resid) / (2 * var) + 0.5 * resid.size * math.log(2 * math.pi * var))
        u -= log_prior(theta, self.prior, self.arch)
        g_loss = resid / var
        g_m = 2.0 * self.weights[None, :, None] * m * g_loss[:, None, :]
        g_b = np.einsum("pa,dpk->dak", self.diff, g_m)
        g_rate = self._apply_bt(g_b)
        g_y = np.tensordot(self.select, g_rate[..., None] * self.R[None, :, None, None, :], axes=([1], [1]))
        g_y = g_y.transpose(1, 0, 2, 3, 4)
        grad = backward_flat(self.arch, theta, acts, g_y.reshape(-1, 3))
        grad -= grad_log_prior(theta, self.prior, self.arch)
        return u, grad

    def gradient(self, theta) -> np.ndarray:
        return self(theta)[1]


def potential_energy(tree: InterconnectTree, params: NetParams, dataset: ContinuityDataset, prior: PriorSpec,
                     cfg: BpinnConfig = BpinnConfig(), norm: Normalization | None = None) -> float:
    pot = Potential(tree, dataset, replace(cfg, arch=params.arch, prior=prior), norm)
    return pot.energy(params.flat())


def grad_potential(tree: InterconnectTree, params: NetParams, dataset: ContinuityDataset, prior: PriorSpec,
                   cfg: BpinnConfig = BpinnConfig(), norm: Normalization | None = None) -> NetParams:
    pot = Potential(tree, dataset, replace(cfg, arch=params.arch, prior=prior), norm)
    return NetParams.from_flat(params.arch, pot.gradient(params.flat()))


def continuity_loss(tree: InterconnectTree, params: NetParams, dataset: ContinuityDataset,
                    cfg: BpinnConfig = BpinnConfig(), norm: Normalization | None = None) -> np.ndarray:
    """Loss per (draw, evaluation time) for the given parameters."""
    pot = Potential(tree, dataset, replace(cfg, arch=params.arch), norm)
    return pot.losses(params.flat())


def junction_mismatch_samples(tree: InterconnectTree, thetas, draws, cfg: BpinnConfig,
                              norm: Normalization) -> np.ndarray:
    """|stress difference| in Pa of adjacent segments at every junction, per (sample, pair, time).

    Sample i uses parameter vector ``thetas[i]`` with current draw ``draws[i]``;
    times are ``cfg.eval_times``.
    """
    thetas = np.atleast_2d(np.asarray(thetas, dtype=float))
    draws = np.atleast_2d(np.asarray(draws, dtype=float))
    if len(draws) < len(thetas):
        raise ValueError("need one current draw per parameter sample")
    pot = Potential(tree, make_dataset(tree, cfg, draws[:len(thetas)]), cfg, norm)
    out = [np.abs(pot.diff @ pot.boundary(th)[i]) for i, th in enumerate(thetas)]
    return np.array(out) / tree.scaling.k_sigma


# ---------------------------------------------------------------------------
# Fitting
# ---------------------------------------------------------------------------


@dataclass
class BpinnFit:
    params_map: NetParams
    chain: HmcChain
    diagnostics: HmcDiagnostics
    norm: Normalization
    dataset: ContinuityDataset
    map_energy: float
    map_iterations: int

    def samples(self) -> list[NetParams]:
        return [NetParams.from_flat(self.params_map.arch, s) for s in self.chain.samples]


def find_map(potential: Potential, theta0, max_iter: int) -> tuple[np.ndarray, float, int]:
    """Minimize U with L-BFGS; returns (theta, U, iterations)."""
    # trial steps of the line search may overflow; those points are simply rejected
    with np.errstate(over="ignore", invalid="ignore"):
        res = minimize(potential, np.asarray(theta0, dtype=float), jac=True, method="L-BFGS-B",
                       options={"maxiter": max_iter, "maxfun": 2 * max_iter, "ftol": 1e-15, "gtol": 1e-10})
    if not np.all(np.isfinite(res.x)):
        raise FloatingPointError("MAP search produced non-finite parameters")
    return res.x, float(res.fun), int(res.nit)


def fit(tree: InterconnectTree, train_currents, cfg: BpinnConfig = BpinnConfig(),
        hmc: HmcConfig = HmcConfig(), seed: int = 0) -> BpinnFit:
    """Find the MAP network for continuity, then sample the posterior with HMC from there."""
    dataset = make_dataset(tree, cfg, train_currents)
    pot = Potential(tree, dataset, cfg)
    theta0 = init_prior(cfg.arch, cfg.prior_spec, seed).flat()
    theta, u_map, nit = find_map(pot, theta0, cfg.map_iterations)
    chain, diag = sample_posterior(theta, pot, hmc)
    return BpinnFit(NetParams.from_flat(cfg.arch, theta), chain, diag, pot.norm, dataset, u_map, nit)
