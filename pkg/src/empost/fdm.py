"""Finite-difference reference solver for the stress diffusion equation.

Each segment carries a uniform node grid; a junction is a single shared
node whose control volume is the union of the half cells of every attached
segment.  The flux balance at that node is therefore

    V_J dsigma_J/dt = sum_k kappa*(sigma_nb_k - sigma_J)/dx_k + kappa*(sum_minus G - sum_plus G),

which is the ghost-node Neumann treatment extended to several segments.
Stress continuity is built in and total stress is conserved exactly by the
discrete scheme when no void is present.  A blocked terminal is a junction
with one segment, which reproduces the zero atomic flux condition
dsigma/dx = -G.

Time stepping uses the theta scheme (theta = 1 is implicit Euler).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy import sparse
from scipy.linalg import solve_banded
from scipy.sparse.linalg import splu

from .analytic import BoundaryFluxSpec, gauss_legendre, rate_values
from .core import (InterconnectTree, ScalingConstants, SegmentModel, StressField, TreeModel, require_valid,
                   tree_model)


@dataclass(frozen=True)
class FdmConfig:
    """Grid and time-stepping options.

    ``dx`` is a target spacing in metres; when ``None`` every segment gets
    ``cells_per_segment`` cells.  ``dt`` defaults to ``t_end / n_steps``.
    Output times that do not fall on the step grid are reached by evenly
    subdividing each output interval.
    """

    t_end: float = 1e8
    dx: float | None = None
    cells_per_segment: int = 64
    dt: float | None = None
    n_steps: int = 1000
    void_bc: str = "dirichlet_zero"
    theta: float = 1.0
    delta: float | None = None

    def __post_init__(self):
        if not (math.isfinite(self.t_end) and self.t_end > 0):
            raise ValueError("t_end must be positive")
        if self.dx is not None and not (math.isfinite(self.dx) and self.dx > 0):
            raise ValueError("dx must be positive")
        if self.dt is not None:
            if not (math.isfinite(self.dt) and self.dt > 0):
                raise ValueError("dt must be positive")
            if self.dt > self.t_end:
                raise ValueError("dt exceeds t_end")
        if self.cells_per_segment < 8 or self.n_steps < 1:
            raise ValueError("need at least 8 cells per segment and one step")
        if self.void_bc not in ("dirichlet_zero", "robin_delta"):
            raise ValueError(f"unknown void_bc {self.void_bc!r}")
        if not 0.5 <= self.theta <= 1.0:
            raise ValueError("theta must lie in [0.5, 1]")
        if self.delta is not None and not self.delta > 0:
            raise ValueError("delta must be positive")

    @property
    def step(self) -> float:
        return self.dt if self.dt is not None else self.t_end / self.n_steps

    def scaled(self, sc: ScalingConstants) -> "FdmConfig":
        return replace(self, t_end=self.t_end * sc.k_t,
                       dx=None if self.dx is None else self.dx * sc.k_x,
                       dt=None if self.dt is None else self.dt * sc.k_t,
                       delta=None if self.delta is None else self.delta * sc.k_x)


def _n_cells(length: float, cfg: FdmConfig, x_grid) -> int:
    if cfg.dx is not None:
        if cfg.dx > length / 8 * (1 + 1e-12):
            raise ValueError(f"dx = {cfg.dx:g} exceeds L/8 for a segment of length {length:g}")
        n = max(8, math.ceil(length / cfg.dx - 1e-9))
    else:
        n = cfg.cells_per_segment
    if x_grid is not None and len(x_grid) > 1:
        x = np.asarray(x_grid, dtype=float)
        uniform = np.allclose(np.diff(x), x[1] - x[0], rtol=1e-9, atol=0.0)
        if uniform and abs(x[0]) <= 1e-12 * length and abs(x[-1] - length) <= 1e-9 * length:
            k = len(x) - 1
            n = k * math.ceil(n / k)
    return n


def _step_plan(t_grid: np.ndarray, dt: float) -> list[tuple[int, float]]:
    """(substeps, h) for each interval between consecutive output times, starting at t = 0."""
    edges = np.concatenate([[0.0], t_grid]) if t_grid[0] > 0 else t_grid
    plan = []
    for a, b in zip(edges[:-1], edges[1:]):
        n = max(1, math.ceil((b - a) / dt - 1e-9))
        plan.append((n, (b - a) / n))
    return plan


class _System:
    """Mass and stiffness assembly for segments whose end nodes may be shared."""

    def __init__(self, segs: Sequence[SegmentModel], nodes: Sequence[np.ndarray], size: int):
        self.segs = list(segs)
        self.nodes = [np.asarray(idx) for idx in nodes]
        self.n_cells = [len(idx) - 1 for idx in self.nodes]
        self.size = size
        self.mass = np.zeros(self.size)
        rows, cols, vals = [], [], []
        for seg, n, idx in zip(self.segs, self.n_cells, self.nodes):
            dx = seg.length / n
            w = np.full(n + 1, dx)
            w[0] = w[-1] = 0.5 * dx
            np.add.at(self.mass, idx, w)
            c = seg.kappa / dx
            a, b = idx[:-1], idx[1:]
            rows += [a, b, a, b]
            cols += [a, b, b, a]
            vals += [np.full(n, c), np.full(n, c), np.full(n, -c), np.full(n, -c)]
        self.stiff = sparse.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                                       shape=(self.size, self.size)).tocsr()
        self.robin = np.zeros(self.size)
        self.dirichlet: list[int] = []

    def initial(self) -> np.ndarray:
        u = np.zeros(self.size)
        for seg, n, idx in zip(self.segs, self.n_cells, self.nodes):
            u[idx] = seg.initial_stress.evaluate(np.linspace(0.0, seg.length, n + 1), seg.length)
        u[self.dirichlet] = 0.0
        return u

    def operator(self, h: float, theta: float):
        k = self.stiff + sparse.diags(self.robin)
        lhs = (sparse.diags(self.mass) + theta * h * k).tolil()
        rhs = (sparse.diags(self.mass) - (1 - theta) * h * k).tolil()
        for i in self.dirichlet:
            lhs.rows[i], lhs.data[i] = [i], [1.0]
            rhs.rows[i], rhs.data[i] = [], []
        return lhs.tocsc(), rhs.tocsr()


@dataclass(frozen=True)
class FdmSolution:
    """Nodal solution of a tree or segment solve at the output times."""

    segment_ids: tuple[str, ...]
    node_x: tuple[np.ndarray, ...]
    node_values: tuple[np.ndarray, ...]  # per segment, shape (n_nodes, n_t)
    mass: np.ndarray
    state: np.ndarray  # global state, shape (size, n_t)
    t_grid: np.ndarray
    scaled: bool

    def total_stress(self) -> np.ndarray:
        """Integral of stress over the whole structure at each output time (conserved without voids)."""
        return self.mass @ self.state

    def fields(self, x_grids: Mapping[str, Sequence[float]] | None = None) -> list[StressField]:
        out = []
        for sid, xn, vals in zip(self.segment_ids, self.node_x, self.node_values):
            if x_grids is None or sid not in x_grids:
                out.append(StressField(sid, xn, self.t_grid, vals, self.scaled))
                continue
            x = np.asarray(x_grids[sid], dtype=float)
            pos = np.interp(x, xn, np.arange(len(xn)))
            idx = np.rint(pos).astype(int)
            if np.allclose(pos, idx, atol=1e-7):
                v = vals[idx]
            else:
                v = np.stack([np.interp(x, xn, vals[:, k]) for k in range(vals.shape[1])], axis=1)
            out.append(StressField(sid, x, self.t_grid, v, self.scaled))
        return out


def _march(system: _System, cfg: FdmConfig, t_grid: np.ndarray, source, banded: bool) -> np.ndarray:
    """Theta-scheme time marching; ``source(t)`` returns the load vector."""
    u = system.initial()
    out = np.empty((system.size, t_grid.size))
    col = 0
    if t_grid[0] == 0:
        out[:, 0] = u
        col = 1
    cache: dict[float, tuple] = {}
    t = 0.0
    f_old = source(0.0)
    for n_sub, h in _step_plan(t_grid, cfg.step):
        key = round(h / cfg.t_end, 12)
        if key not in cache:
            lhs, rhs = system.operator(h, cfg.theta)
            if banded:
                ab = np.zeros((3, system.size))
                ab[0, 1:] = lhs.diagonal(1)
                ab[1] = lhs.diagonal(0)
                ab[2, :-1] = lhs.diagonal(-1)
                solve = (lambda ab_: lambda b: solve_banded((1, 1), ab_, b))(ab)
            else:
                try:
                    lu = splu(lhs)
                except RuntimeError as exc:
                    raise np.linalg.LinAlgError(f"singular FDM system: {exc}") from exc
                solve = lu.solve
            cache[key] = (rhs, solve)
        rhs, solve = cache[key]
        for _ in range(n_sub):
            t_new = t + h
            f_new = source(t_new)
            b = rhs @ u + h * (cfg.theta * f_new + (1 - cfg.theta) * f_old)
            b[system.dirichlet] = 0.0
            u = solve(b)
            t, f_old = t_new, f_new
        out[:, col] = u
        col += 1
    if not np.all(np.isfinite(out)):
        raise FloatingPointError("FDM solution became non-finite")
    return out


def _check_t_grid(t_grid) -> np.ndarray:
    t = np.asarray(t_grid, dtype=float)
    if t.ndim != 1 or t.size == 0 or np.any(t < 0) or np.any(np.diff(t) <= 0) or not np.all(np.isfinite(t)):
        raise ValueError("t grid must be a strictly increasing nonnegative 1-D array")
    return t


def _phi_path(phi0: float, rate):
    """phi(t) = phi0 + int_0^t rate, accumulated step by step with Gauss-Legendre."""
    if rate is None or not callable(rate):
        r = 0.0 if rate is None else float(rate)
        return lambda t: phi0 + r * t
    xi, w = gauss_legendre(8)
    state = {"t": 0.0, "phi": phi0}

    def phi(t):
        a = state["t"]
        if t < a:
            a, state["phi"] = 0.0, phi0
        tau = a + 0.5 * (t - a) * (xi + 1.0)
        state["phi"] += 0.5 * (t - a) * float(np.sum(w * rate_values(rate, tau)))
        state["t"] = t
        return state["phi"]

    return phi


def solve_segment_fdm(seg: SegmentModel, flux: BoundaryFluxSpec | str, cfg: FdmConfig, t_grid=None,
                      x_grid=None, scaled: bool = False) -> StressField:
    """Single-segment reference solve.

    ``flux`` is a BoundaryFluxSpec (end gradients phi(t)) or ``"blocked"``
    (phi = -G at both ends).  A void end ignores its flux entry and applies
    ``cfg.void_bc``.
    """
    if not (math.isfinite(seg.length) and seg.length > 0 and math.isfinite(seg.kappa) and seg.kappa > 0
            and math.isfinite(seg.drive)):
        raise ValueError(f"segment {seg.id} has invalid length, kappa or drive")
    if flux == "blocked":
        flux = BoundaryFluxSpec(-seg.drive, -seg.drive)
    if not isinstance(flux, BoundaryFluxSpec):
        raise TypeError("flux must be a BoundaryFluxSpec or 'blocked'")
    t = _check_t_grid(np.linspace(0.0, cfg.t_end, 101) if t_grid is None else t_grid)
    n = _n_cells(seg.length, cfg, x_grid)
    system = _System([seg], [np.arange(n + 1)], n + 1)

    ends = {"minus": 0, "plus": n}
    void = {"at_minus": "minus", "at_plus": "plus"}.get(seg.void_end)
    phi_m = _phi_path(flux.phi_minus_0, flux.rate_minus)
    phi_p = _phi_path(flux.phi_plus_0, flux.rate_plus)
    if void is not None:
        _apply_void(system, ends[void], cfg)

    def source(time):
        f = np.zeros(system.size)
        if void != "minus":
            f[0] -= seg.kappa * phi_m(time)
        if void != "plus":
            f[n] += seg.kappa * phi_p(time)
        return f

    state = _march(system, cfg, t, source, banded=True)
    sol = FdmSolution((seg.id,), (np.linspace(0.0, seg.length, n + 1),), (state[system.nodes[0]],),
                      system.mass, state, t, scaled)
    return sol.fields(None if x_grid is None else {seg.id: x_grid})[0]


def _apply_void(system: _System, node: int, cfg: FdmConfig, delta: float | None = None,
                kappa: float | None = None):
    if cfg.void_bc == "dirichlet_zero":
        system.dirichlet.append(node)
        return
    d = cfg.delta if cfg.delta is not None else delta
    if d is None:
        raise ValueError("robin_delta needs a void interface thickness (FdmConfig.delta or material.delta_void)")
    k = kappa if kappa is not None else system.segs[0].kappa
    system.robin[node] += k / d


def tree_fdm_solution(model: TreeModel, cfg: FdmConfig, t_grid=None,
                      x_grids: Mapping[str, Sequence[float]] | None = None) -> FdmSolution:
    """Coupled solve of every segment of ``model`` on shared junction nodes."""
    tree = model.tree
    t = _check_t_grid(np.linspace(0.0, cfg.t_end, 101) if t_grid is None else t_grid)
    jindex = {j.id: i for i, j in enumerate(tree.junctions)}
    n_cells = [_n_cells(s.length, cfg, None if x_grids is None else x_grids.get(s.id))
               for s in model.segments]
    ends = [(jindex[s.node_minus], jindex[s.node_plus]) for s in tree.segments]
    nodes, nxt = [], len(tree.junctions)
    for n, (a, b) in zip(n_cells, ends):
        nodes.append(np.concatenate([[a], np.arange(nxt, nxt + n - 1), [b]]))
        nxt += n - 1
    system = _System(model.segments, nodes, nxt)
    load = np.zeros(system.size)
    for s, m, (a, b) in zip(tree.segments, model.segments, ends):
        load[a] += m.kappa * m.drive
        load[b] -= m.kappa * m.drive
    for j in tree.junctions:
        if j.kind != "void_node":
            continue
        node = jindex[j.id]
        load[node] = 0.0
        seg = model.segment(j.slots[j.occupied[0]])
        _apply_void(system, node, cfg, model.delta_void, seg.kappa)
    state = _march(system, cfg, t, lambda _t: load, banded=False)
    return FdmSolution(tuple(s.id for s in model.segments),
                       tuple(np.linspace(0.0, s.length, n + 1) for s, n in zip(model.segments, n_cells)),
                       tuple(state[idx] for idx in system.nodes), system.mass, state, t, model.scaled)


def solve_tree_fdm(tree: InterconnectTree | TreeModel, currents: Sequence[float] | None = None,
                   cfg: FdmConfig = FdmConfig(), t_grid=None,
                   x_grids: Mapping[str, Sequence[float]] | None = None) -> list[StressField]:
    """Reference solve of a whole tree for one current sample; one StressField per segment."""
    if isinstance(tree, TreeModel):
        if currents is not None:
            raise ValueError("currents are already fixed in a TreeModel")
        model = tree
    else:
        require_valid(tree)
        model = tree_model(tree, currents)
    return tree_fdm_solution(model, cfg, t_grid, x_grids).fields(x_grids)


def write_fields_csv(fields: Iterable[StressField], path, columns=("segment_id", "x", "t", "sigma")) -> None:
    """Dump fields as long-format CSV (one row per segment, x, t)."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(columns)
        for f in fields:
            for i, x in enumerate(f.x_grid):
                for k, t in enumerate(f.t_grid):
                    w.writerow([f.segment_id, repr(float(x)), repr(float(t)), repr(float(f.values[i, k]))])
