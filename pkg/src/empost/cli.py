"""Command-line interface.

``empost <command> --config CONFIG [--seed N] [--threads N] [--out DIR]``

Commands: segment-solve, tree-fdm, bpinn-fit, bpinn-predict, mc-reference
and compare.  CONFIG is a JSON file (see ``data/run_config.schema.json``)
or ``bundled:NAME`` for one of the packaged configs.  Every command reads
and validates all inputs before writing, and each output file is written
atomically.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time
from dataclasses import dataclass, replace
from importlib import resources
from typing import Sequence

import numpy as np

from . import __version__
from .analytic import BoundaryFluxSpec, SeriesConfig, solve_segment
from .bnn import NetArchitecture, PriorSpec, params_to_json, snapshot_header
from .bpinn import BpinnConfig, Normalization, fit, initial_gradients, junction_mismatch_samples
from .core import InterconnectTree, StressField, TreeValidationError, tree_model
from .fdm import FdmConfig, tree_fdm_solution
from .hmc import HmcConfig, load_chain, save_chain
from .io import SchemaError, atomic_write_text, check_schema, fixture_path, load_schema, load_tree
from .stochastic import (CurrentVariationSpec, bpinn_estimate, comparison_summary, mc_reference, read_result_csv,
                         result_csv_text, sample_currents)


class CliError(Exception):
    """Reported as ``error: ...`` with exit status 2."""


@dataclass
class RunConfig:
    tree: InterconnectTree
    tree_path: str
    out: str
    seed: int
    threads: int
    n_x: int
    n_t: int
    t_end: float
    series: SeriesConfig
    fdm: FdmConfig
    bpinn: BpinnConfig
    pairing: str
    hmc: HmcConfig
    variation: CurrentVariationSpec

    @property
    def x_grids(self) -> dict[str, np.ndarray]:
        return {s.id: np.linspace(0.0, s.length, self.n_x) for s in self.tree.segments}

    @property
    def t_grid(self) -> np.ndarray:
        return np.linspace(0.0, self.t_end, self.n_t)


def _resolve_config(path: str) -> tuple[dict, str]:
    if path.startswith("bundled:"):
        name = path.split(":", 1)[1]
        res = resources.files("empost").joinpath("data", "configs", name + ".json")
        if not res.is_file():
            raise CliError(f"no bundled config named {name!r}")
        return json.loads(res.read_text()), str(resources.files("empost").joinpath("data"))
    if not os.path.isfile(path):
        raise CliError(f"config file not found: {path}")
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise CliError(f"{path}: invalid JSON: {exc}") from exc
    return doc, os.path.dirname(os.path.abspath(path))


def _resolve_tree(name: str, base: str) -> str:
    candidate = name if os.path.isabs(name) else os.path.join(base, name)
    if os.path.isfile(candidate):
        return candidate
    if os.sep not in name:
        bundled = fixture_path(name)
        if os.path.isfile(bundled):
            return bundled
    raise CliError(f"tree file not found: {name}")


def load_run_config(path: str, seed: int | None = None, threads: int | None = None,
                    out: str | None = None) -> RunConfig:
    """Read, schema-check and assemble a run configuration; flags win over file values."""
    doc, base = _resolve_config(path)
    check_schema(doc, load_schema("run_config.schema.json"), path)
    tree_path = _resolve_tree(doc["tree"], base)
    tree = load_tree(tree_path)
    seed = doc.get("seed", 0) if seed is None else seed
    grid = doc.get("grid", {})
    t_end = float(grid.get("t_end", 1e8))
    series = SeriesConfig(**doc.get("series", {}))
    fdm = FdmConfig(t_end=t_end, **doc.get("fdm", {}))
    b = dict(doc.get("bpinn", {}))
    arch = NetArchitecture(hidden_widths=tuple(b.pop("hidden_widths", (32, 32))))
    prior = None
    if "var_w" in b or "var_b" in b:
        default = PriorSpec.default(arch)
        prior = PriorSpec(tuple(b.pop("var_w", default.var_w)), tuple(b.pop("var_b", default.var_b)))
    train_q = b.pop("train_quad_order", 8)
    pairing = b.pop("pairing", "paired")
    bcfg = BpinnConfig(arch=arch, prior=prior, series=replace(series, quad_order=train_q), t_end=t_end, **b)
    hmc = HmcConfig(seed=seed, **doc.get("hmc", {}))
    var = doc.get("variation", {})
    variation = CurrentVariationSpec.for_tree(tree, relative_std=var.get("relative_std", 0.15),
                                              n_samples=var.get("n_samples", 30), seed=seed)
    out_dir = out or doc.get("out") or "empost-out"
    return RunConfig(tree, tree_path, out_dir, seed, threads or doc.get("threads", 1), grid.get("n_x", 30),
                     grid.get("n_t", 100), t_end, series, fdm, bcfg, pairing, hmc, variation)


def _check_out(out: str) -> None:
    if os.path.exists(out) and not os.path.isdir(out):
        raise CliError(f"output path exists and is not a directory: {out}")
    parent = os.path.dirname(os.path.abspath(out))
    while not os.path.exists(parent):
        parent = os.path.dirname(parent)
    if not os.access(parent if not os.path.isdir(out) else out, os.W_OK):
        raise CliError(f"output directory is not writable: {out}")


def _fields_csv(columns: Sequence[str], fields: Sequence[Sequence[StressField]]) -> str:
    lines = [",".join(columns)]
    for group in zip(*fields):
        f0 = group[0]
        for i, x in enumerate(f0.x_grid):
            for k, t in enumerate(f0.t_grid):
                vals = ",".join(repr(float(f.values[i, k])) for f in group)
                lines.append(f"{f0.segment_id},{float(x)!r},{float(t)!r},{vals}")
    return "\n".join(lines) + "\n"


def _write(out: str, files: dict[str, str]) -> None:
    os.makedirs(out, exist_ok=True)
    for name, text in files.items():
        atomic_write_text(os.path.join(out, name), text)


def _json(obj) -> str:
    def clean(v):
        if isinstance(v, float) and not math.isfinite(v):
            return None
        if isinstance(v, dict):
            return {k: clean(x) for k, x in v.items()}
        if isinstance(v, (list, tuple)):
            return [clean(x) for x in v]
        return v
    return json.dumps(clean(obj), indent=2, sort_keys=True) + "\n"


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def cmd_segment_solve(rc: RunConfig, args) -> dict:
    tree = rc.tree
    if len(tree.segments) != 1:
        raise CliError("segment-solve needs a tree with exactly one segment")
    seg = tree.segments[0]
    model = tree_model(tree).segments[0]
    # a lone segment has no junction, so both ends keep their initial gradient
    phi0 = initial_gradients(tree)
    flux = BoundaryFluxSpec(phi0.get((seg.id, "minus"), 0.0), phi0.get((seg.id, "plus"), 0.0), 0.0, 0.0)
    x, t = rc.x_grids[seg.id], rc.t_grid
    start = time.perf_counter()
    analytic = solve_segment(model, flux, rc.series, x, t)
    wall = time.perf_counter() - start
    summary = {"segment_id": seg.id, "void_end": seg.void_end, "wall_time_analytic": wall,
               "n_x": int(x.size), "n_t": int(t.size)}
    groups = [[analytic]]
    columns = ["segment_id", "x", "t", "sigma"]
    if args.with_oracle:
        start = time.perf_counter()
        oracle = tree_fdm_solution(tree_model(tree), rc.fdm, t, rc.x_grids).fields(rc.x_grids)[0]
        summary["wall_time_fdm"] = time.perf_counter() - start
        diff = analytic.values - oracle.values
        span = float(oracle.values.max() - oracle.values.min())
        rmse = float(np.sqrt(np.mean(diff ** 2)))
        summary.update(rmse=rmse, stress_range=span, relative_rmse=rmse / span if span > 0 else float("nan"))
        groups.append([oracle])
        columns.append("sigma_fdm")
        print(f"relative RMSE vs FDM: {summary['relative_rmse']:.3e} (RMSE {rmse:.4g} Pa, range {span:.4g} Pa)")
    _write(rc.out, {"segment.csv": _fields_csv(columns, groups), "segment_summary.json": _json(summary)})
    return summary


def cmd_tree_fdm(rc: RunConfig, args) -> dict:
    start = time.perf_counter()
    fields = tree_fdm_solution(tree_model(rc.tree), rc.fdm, rc.t_grid, rc.x_grids).fields(rc.x_grids)
    wall = time.perf_counter() - start
    summary = {"wall_time": wall, "segments": [f.segment_id for f in fields]}
    _write(rc.out, {"tree_fdm.csv": _fields_csv(["segment_id", "x", "t", "sigma"], [fields]),
                    "tree_fdm_summary.json": _json(summary)})
    print(f"tree FDM solve: {len(fields)} segments in {wall:.3f} s")
    return summary


def _train_spec(rc: RunConfig) -> CurrentVariationSpec:
    # training draws are independent of the draws used for prediction and reference
    return replace(rc.variation, n_samples=rc.bpinn.n_train_draws, seed=rc.seed + 1)


def cmd_bpinn_fit(rc: RunConfig, args) -> dict:
    if not rc.tree.interior_junctions:
        raise CliError("tree has no interior junction; there is nothing for the network to learn")
    train = sample_currents(_train_spec(rc))
    start = time.perf_counter()
    result = fit(rc.tree, train, rc.bpinn, rc.hmc, seed=rc.seed)
    wall = time.perf_counter() - start
    mism = junction_mismatch_samples(rc.tree, result.chain.samples, train, rc.bpinn, result.norm)
    header = {**snapshot_header(rc.bpinn.arch), "prior": rc.bpinn.prior_spec.to_dict(),
              "normalization": result.norm.to_dict(), "tree": os.path.basename(rc.tree_path),
              "seed": rc.seed, "var_l": rc.bpinn.var_l, "wall_time_fit": wall}
    fit_dir = os.path.join(rc.out, "fit")
    save_chain(result.chain, result.diagnostics, fit_dir, header)
    summary = {"wall_time_fit": wall, "map_energy": result.map_energy, "map_iterations": result.map_iterations,
               "acceptance_rate": result.diagnostics.acceptance_rate, "step_size": result.diagnostics.step_size,
               "train_max_mismatch": float(mism.max())}
    _write(fit_dir, {"map_params.json": params_to_json(result.params_map) + "\n", "fit_summary.json": _json(summary)})
    print(f"fit done in {wall:.1f} s; acceptance {result.diagnostics.acceptance_rate:.2f}")
    return summary


def _load_fit(rc: RunConfig, chain_dir: str):
    if not os.path.isfile(os.path.join(chain_dir, "chain.jsonl")):
        raise CliError(f"no chain found in {chain_dir}; run bpinn-fit first")
    header, chain, diag = load_chain(chain_dir)
    arch = NetArchitecture.from_dict(header["architecture"])
    if arch.n_params != chain.samples.shape[1]:
        raise CliError("chain samples do not match the stored architecture")
    return arch, Normalization.from_dict(header["normalization"]), chain


def cmd_bpinn_predict(rc: RunConfig, args) -> dict:
    chain_dir = args.chain or os.path.join(rc.out, "fit")
    arch, norm, chain = _load_fit(rc, chain_dir)
    result = bpinn_estimate(rc.tree, chain.samples, rc.variation, norm, rc.series, arch, rc.x_grids, rc.t_grid,
                            rc.t_end, rc.pairing)
    summary = {"wall_time": result.wall_time, "n_samples": result.n_samples, "pairing": rc.pairing}
    _write(rc.out, {"bpinn.csv": result_csv_text(result), "bpinn_summary.json": _json(summary)})
    print(f"BPINN estimate from {result.n_samples} samples in {result.wall_time:.3f} s")
    return summary


def cmd_mc_reference(rc: RunConfig, args) -> dict:
    result = mc_reference(rc.tree, rc.variation, rc.fdm, rc.x_grids, rc.t_grid, threads=rc.threads)
    summary = {"wall_time": result.wall_time, "n_samples": result.n_samples}
    _write(rc.out, {"mc.csv": result_csv_text(result), "mc_summary.json": _json(summary)})
    print(f"Monte Carlo reference from {result.n_samples} FDM solves in {result.wall_time:.3f} s")
    return summary


def _wall(path: str) -> float:
    try:
        with open(path) as fh:
            v = json.load(fh).get("wall_time")
        return float("nan") if v is None else float(v)
    except (OSError, ValueError):
        return float("nan")


def cmd_compare(rc: RunConfig, args) -> dict:
    a_path = args.reference or os.path.join(rc.out, "mc.csv")
    b_path = args.estimate or os.path.join(rc.out, "bpinn.csv")
    for p in (a_path, b_path):
        if not os.path.isfile(p):
            raise CliError(f"result file not found: {p}")
    a = read_result_csv(a_path, "reference")
    b = read_result_csv(b_path, "estimate")
    a.wall_time = _wall(a_path.removesuffix(".csv") + "_summary.json")
    b.wall_time = _wall(b_path.removesuffix(".csv") + "_summary.json")
    try:
        summary = comparison_summary(a, b)
    except ValueError as exc:
        raise CliError(str(exc)) from exc
    summary["reference"], summary["estimate"] = a_path, b_path
    _write(rc.out, {"compare.json": _json(summary)})
    print(f"combined RMSE {summary['combined']:.4g} Pa ({100 * summary['combined_relative']:.3f}% of range); "
          f"reference {summary['wall_time_reference']:.3f} s, estimate {summary['wall_time_estimate']:.3f} s")
    return summary


COMMANDS = {
    "segment-solve": cmd_segment_solve,
    "tree-fdm": cmd_tree_fdm,
    "bpinn-fit": cmd_bpinn_fit,
    "bpinn-predict": cmd_bpinn_predict,
    "mc-reference": cmd_mc_reference,
    "compare": cmd_compare,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="empost", description="Post-void EM stress statistics for interconnect trees.")
    p.add_argument("--version", action="version", version=f"empost {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", required=True, help="run config JSON file or bundled:NAME")
        sp.add_argument("--seed", type=int, help="overrides the config seed")
        sp.add_argument("--threads", type=int, help="worker threads for Monte Carlo solves")
        sp.add_argument("--out", help="output directory (overrides the config)")
        if name == "segment-solve":
            sp.add_argument("--with-oracle", action="store_true", help="add the FDM solution and report RMSE")
        if name == "bpinn-predict":
            sp.add_argument("--chain", help="directory holding chain.jsonl (default OUT/fit)")
        if name == "compare":
            sp.add_argument("--reference", help="reference result CSV (default OUT/mc.csv)")
            sp.add_argument("--estimate", help="estimate result CSV (default OUT/bpinn.csv)")
    return p


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.seed is not None and args.seed < 0:
            raise CliError("--seed must be nonnegative")
        if args.threads is not None and args.threads < 1:
            raise CliError("--threads must be at least 1")
        rc = load_run_config(args.config, args.seed, args.threads, args.out)
        _check_out(rc.out)
        COMMANDS[args.command](rc, args)
    except SchemaError as exc:
        for pointer, msg in exc.errors:
            print(f"error: {pointer or '/'}: {msg}", file=sys.stderr)
        return 2
    except (CliError, TreeValidationError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
