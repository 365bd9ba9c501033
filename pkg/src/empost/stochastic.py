"""Stress statistics under random branch currents.

Two estimators share one interface.  :func:`mc_reference` runs the
finite-difference tree solver once per current draw.  :func:`bpinn_estimate`
pairs posterior network samples with current draws and evaluates the
closed-form segment solutions with the network's junction fluxes.  Both
report the pointwise mean and population standard deviation.
"""

from __future__ import annotations

import csv
import io
import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .analytic import SeriesConfig, segment_operators
from .bnn import NetArchitecture, NetParams, forward_flat
from .bpinn import Normalization, _junction_ends, initial_gradients, junction_inputs
from .core import InterconnectTree, StressField, require_valid, tree_model, uniform_x_grids
from .fdm import FdmConfig, tree_fdm_solution
from .io import atomic_write_text


@dataclass(frozen=True)
class CurrentVariationSpec:
    """Independent Gaussian current densities, ``N(mean_j, (relative_std * |mean_j|)^2)`` per segment."""

    mean_j: tuple[float, ...]
    relative_std: float = 0.15
    n_samples: int = 30
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "mean_j", tuple(float(j) for j in self.mean_j))
        if not (self.relative_std >= 0 and math.isfinite(self.relative_std)):
            raise ValueError("relative_std must be nonnegative")
        if self.n_samples < 1:
            raise ValueError("n_samples must be at least 1")

    @classmethod
    def for_tree(cls, tree: InterconnectTree, **kw) -> "CurrentVariationSpec":
        return cls(tuple(tree.currents), **kw)


def sample_currents(spec: CurrentVariationSpec) -> np.ndarray:
    """Draws of shape (n_samples, n_segments); deterministic under ``spec.seed``."""
    rng = np.random.default_rng(spec.seed)
    mean = np.asarray(spec.mean_j)
    z = rng.standard_normal((spec.n_samples, mean.size))
    return mean + spec.relative_std * np.abs(mean) * z


def default_t_grid(t_end: float = 1e8, n_t: int = 100) -> np.ndarray:
    return np.linspace(0.0, t_end, n_t)


@dataclass
class VariationalResult:
    """Pointwise mean and population std of stress, per segment."""

    mean: list[StressField]
    std: list[StressField]
    n_samples: int
    provenance: str
    wall_time: float = float("nan")
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        for m, s in zip(self.mean, self.std):
            if m.values.shape != s.values.shape or not np.array_equal(m.x_grid, s.x_grid) \
                    or not np.array_equal(m.t_grid, s.t_grid):
                raise ValueError(f"mean and std grids differ for segment {m.segment_id}")
            if np.any(s.values < 0):
                raise ValueError("standard deviation must be nonnegative")

    def stress_range(self) -> float:
        vals = np.concatenate([m.values.ravel() for m in self.mean])
        return float(vals.max() - vals.min())


def _aggregate(samples: list[list[np.ndarray]], ids, x_grids, t, provenance, wall) -> VariationalResult:
    means, stds = [], []
    for k, sid in enumerate(ids):
        stack = np.stack([s[k] for s in samples])
        means.append(StressField(sid, x_grids[sid], t, stack.mean(axis=0)))
        stds.append(StressField(sid, x_grids[sid], t, stack.std(axis=0)))
    return VariationalResult(means, stds, len(samples), provenance, wall)


def _grids(tree, x_grids, t_grid, t_end):
    x_grids = dict(uniform_x_grids(tree, 30)) if x_grids is None else {k: np.asarray(v, dtype=float)
                                                                       for k, v in x_grids.items()}
    t = default_t_grid(t_end) if t_grid is None else np.asarray(t_grid, dtype=float)
    return x_grids, t


def mc_reference(tree: InterconnectTree, spec: CurrentVariationSpec, cfg: FdmConfig = FdmConfig(),
                 x_grids: Mapping[str, Sequence[float]] | None = None, t_grid=None,
                 threads: int = 1) -> VariationalResult:
    """Finite-difference tree solve for every current draw, then pointwise statistics."""
    require_valid(tree)
    x_grids, t = _grids(tree, x_grids, t_grid, cfg.t_end)
    draws = sample_currents(spec)
    ids = [s.id for s in tree.segments]
    start = time.perf_counter()

    def solve(i):
        try:
            fields = tree_fdm_solution(tree_model(tree, draws[i]), cfg, t, x_grids).fields(x_grids)
        except Exception as exc:
            raise RuntimeError(f"reference solve failed for current sample {i}: {exc}") from exc
        return [f.values for f in fields]

    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            samples = list(pool.map(solve, range(len(draws))))
    else:
        samples = [solve(i) for i in range(len(draws))]
    return _aggregate(samples, ids, x_grids, t, "fdm_mc", time.perf_counter() - start)


def bpinn_fields(tree: InterconnectTree, thetas: np.ndarray, arch: NetArchitecture, draws: np.ndarray,
                 norm: Normalization, cfg: SeriesConfig, x_grids: Mapping[str, np.ndarray],
                 t: np.ndarray) -> list[list[np.ndarray]]:
    """Stress fields for each (parameter vector, current draw) pair."""
    model = tree_model(tree)
    ops = {s.id: segment_operators(m, cfg, x_grids[s.id], t) for s, m in zip(tree.segments, model.segments)}
    taus = next(iter(ops.values())).taus
    interior = tree.interior_junctions
    ends = _junction_ends(tree)
    out = []
    for theta, cur in zip(thetas, draws):
        phi0 = initial_gradients(tree, cur)
        rates = {}
        if interior:
            x = np.stack([junction_inputs(tree, j, taus, cur, norm) for j in interior])
            y = forward_flat(arch, theta, x.reshape(-1, 5)).reshape(x.shape[:-1] + (3,))
            for e in ends:
                rates[(tree.segments[e.segment].id, e.end)] = norm.flux_scale * (y[e.junction] @ e.coeff)
        fields = []
        for s in tree.segments:
            op = ops[s.id]
            v = op.ic.copy()
            for end, coeff in op.phi.items():
                v += phi0.get((s.id, end), 0.0) * coeff
                r = rates.get((s.id, end))
                if r is not None:
                    v += np.einsum("ikj,kj->ik", op.rate[end], r)
            fields.append(v)
        out.append(fields)
    return out


def bpinn_estimate(tree: InterconnectTree, samples: Sequence[NetParams] | np.ndarray, spec: CurrentVariationSpec,
                   norm: Normalization, cfg: SeriesConfig = SeriesConfig(), arch: NetArchitecture | None = None,
                   x_grids: Mapping[str, Sequence[float]] | None = None, t_grid=None, t_end: float = 1e8,
                   pairing: str = "paired") -> VariationalResult:
    """Stress statistics from posterior network samples.

    With ``pairing='paired'`` sample i uses current draw i of ``spec``;
    with ``'fixed-mean-currents'`` every sample sees the mean currents.
    """
    require_valid(tree)
    if len(samples) == 0:
        raise ValueError("need at least one posterior sample")
    if isinstance(samples, np.ndarray):
        if arch is None:
            raise ValueError("flat sample arrays need an architecture")
        thetas = np.atleast_2d(samples)
    else:
        arch = samples[0].arch
        thetas = np.stack([p.flat() for p in samples])
    x_grids, t = _grids(tree, x_grids, t_grid, t_end)
    start = time.perf_counter()
    if pairing == "paired":
        draws = sample_currents(spec)
        if len(draws) < len(thetas):
            raise ValueError(f"{len(thetas)} posterior samples but only {len(draws)} current draws")
        draws = draws[:len(thetas)]
    elif pairing == "fixed-mean-currents":
        draws = np.tile(np.asarray(spec.mean_j), (len(thetas), 1))
    else:
        raise ValueError(f"unknown pairing {pairing!r}")
    fields = bpinn_fields(tree, thetas, arch, draws, norm, cfg, x_grids, t)
    ids = [s.id for s in tree.segments]
    return _aggregate(fields, ids, x_grids, t, "bpinn", time.perf_counter() - start)


def rmse_compare(a: VariationalResult, b: VariationalResult) -> tuple[float, float, float]:
    """(RMSE of means, RMSE of stds, their average) over every grid point of every segment."""
    if [f.segment_id for f in a.mean] != [f.segment_id for f in b.mean]:
        raise ValueError("results cover different segments")
    dm, ds = [], []
    for ma, sa, mb, sb in zip(a.mean, a.std, b.mean, b.std):
        if ma.values.shape != mb.values.shape or not (np.allclose(ma.x_grid, mb.x_grid, rtol=1e-12)
                                                      and np.allclose(ma.t_grid, mb.t_grid, rtol=1e-12)):
            raise ValueError(f"grid mismatch for segment {ma.segment_id}")
        dm.append((ma.values - mb.values).ravel())
        ds.append((sa.values - sb.values).ravel())
    rm = float(np.sqrt(np.mean(np.concatenate(dm) ** 2)))
    rs = float(np.sqrt(np.mean(np.concatenate(ds) ** 2)))
    return rm, rs, 0.5 * (rm + rs)


# ---------------------------------------------------------------------------
# Output files
# ---------------------------------------------------------------------------

RESULT_COLUMNS = ("segment_id", "x", "t", "mean_sigma", "std_sigma")


def result_csv_text(result: VariationalResult) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(RESULT_COLUMNS)
    for m, s in zip(result.mean, result.std):
        for i, x in enumerate(m.x_grid):
            for k, t in enumerate(m.t_grid):
                w.writerow([m.segment_id, repr(float(x)), repr(float(t)), repr(float(m.values[i, k])),
                            repr(float(s.values[i, k]))])
    return buf.getvalue()


def write_result_csv(result: VariationalResult, path) -> None:
    atomic_write_text(path, result_csv_text(result))


def read_result_csv(path, provenance: str = "file") -> VariationalResult:
    rows: dict[str, list] = {}
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        header = next(r)
        if tuple(header) != RESULT_COLUMNS:
            raise ValueError(f"{path}: expected columns {', '.join(RESULT_COLUMNS)}")
        for sid, x, t, m, s in r:
            rows.setdefault(sid, []).append((float(x), float(t), float(m), float(s)))
    means, stds = [], []
    for sid, vals in rows.items():
        arr = np.array(vals)
        xs, ts = np.unique(arr[:, 0]), np.unique(arr[:, 1])
        if len(arr) != xs.size * ts.size:
            raise ValueError(f"{path}: segment {sid} is not on a full (x, t) grid")
        order = np.lexsort((arr[:, 1], arr[:, 0]))
        arr = arr[order]
        means.append(StressField(sid, xs, ts, arr[:, 2].reshape(xs.size, ts.size)))
        stds.append(StressField(sid, xs, ts, arr[:, 3].reshape(xs.size, ts.size)))
    return VariationalResult(means, stds, 0, provenance)


def comparison_summary(reference: VariationalResult, estimate: VariationalResult) -> dict:
    rm, rs, comb = rmse_compare(reference, estimate)
    rng = reference.stress_range()
    return {"rmse_mean": rm, "rmse_std": rs, "combined": comb, "stress_range": rng,
            "combined_relative": comb / rng if rng > 0 else float("nan"),
            "wall_time_reference": reference.wall_time, "wall_time_estimate": estimate.wall_time}


def write_summary(summary: dict, path) -> None:
    clean = {k: (None if isinstance(v, float) and not math.isfinite(v) else v) for k, v in summary.items()}
    atomic_write_text(path, json.dumps(clean, indent=2, sort_keys=True) + "\n")
