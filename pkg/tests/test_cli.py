import json

import pytest

from empost.cli import main

PIPELINE = {
    "tree": "three_segment.json",
    "seed": 3,
    "grid": {"n_x": 8, "n_t": 10},
    "fdm": {"cells_per_segment": 24, "n_steps": 100},
    "bpinn": {"hidden_widths": [6], "var_l": 1e-6, "n_eval_times": 5, "n_train_draws": 4, "train_quad_order": 4,
              "map_iterations": 60},
    "hmc": {"step_size": 1e-4, "leapfrog_steps": 3, "n_samples": 4, "burn_in": 4, "tune_window": 4},
    "variation": {"relative_std": 0.15, "n_samples": 4},
}


def _config(tmp_path, doc, name="run.json"):
    p = tmp_path / name
    p.write_text(json.dumps(doc))
    return str(p)


def test_segment_solve_with_oracle(tmp_path, capsys):
    out = tmp_path / "seg"
    assert main(["segment-solve", "--config", "bundled:single_void", "--out", str(out), "--with-oracle"]) == 0
    assert "relative RMSE vs FDM" in capsys.readouterr().out
    lines = (out / "segment.csv").read_text().splitlines()
    assert lines[0] == "segment_id,x,t,sigma,sigma_fdm"
    assert len(lines) == 1 + 30 * 100
    summary = json.loads((out / "segment_summary.json").read_text())
    assert summary["relative_rmse"] < 5e-3


def test_segment_solve_needs_single_segment(tmp_path, capsys):
    cfg = _config(tmp_path, {"tree": "three_segment.json"})
    assert main(["segment-solve", "--config", cfg, "--out", str(tmp_path / "o")]) == 2
    assert "exactly one segment" in capsys.readouterr().err


def test_missing_config_leaves_no_output(tmp_path, capsys):
    out = tmp_path / "o"
    assert main(["tree-fdm", "--config", str(tmp_path / "nope.json"), "--out", str(out)]) == 2
    assert "not found" in capsys.readouterr().err
    assert not out.exists()


def test_schema_error_pointer(tmp_path, capsys):
    cfg = _config(tmp_path, {"tree": "three_segment.json", "grid": {"n_x": 1}})
    assert main(["tree-fdm", "--config", cfg]) == 2
    assert "error: /grid/n_x:" in capsys.readouterr().err


def test_bad_tree_reports_pointer(tmp_path, capsys):
    tree = {"segments": [{"id": "a", "length": -1.0}]}
    (tmp_path / "t.json").write_text(json.dumps(tree))
    cfg = _config(tmp_path, {"tree": "t.json"})
    assert main(["tree-fdm", "--config", cfg]) == 2
    assert "error: /" in capsys.readouterr().err


def test_flag_validation(tmp_path, capsys):
    assert main(["tree-fdm", "--config", "bundled:three_segment", "--seed", "-1"]) == 2
    assert main(["tree-fdm", "--config", "bundled:three_segment", "--threads", "0"]) == 2
    assert main(["tree-fdm", "--config", "bundled:nothing"]) == 2


def test_tree_fdm_rerun_is_identical(tmp_path):
    cfg = _config(tmp_path, PIPELINE)
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["tree-fdm", "--config", cfg, "--out", str(a)]) == 0
    assert main(["tree-fdm", "--config", cfg, "--out", str(b)]) == 0
    assert (a / "tree_fdm.csv").read_bytes() == (b / "tree_fdm.csv").read_bytes()


def test_compare_identical(tmp_path):
    cfg = _config(tmp_path, PIPELINE)
    out = tmp_path / "o"
    assert main(["mc-reference", "--config", cfg, "--out", str(out)]) == 0
    mc = str(out / "mc.csv")
    assert main(["compare", "--config", cfg, "--out", str(out), "--reference", mc, "--estimate", mc]) == 0
    summary = json.loads((out / "compare.json").read_text())
    assert summary["rmse_mean"] == 0.0 and summary["rmse_std"] == 0.0 and summary["combined"] == 0.0


def test_compare_missing_files(tmp_path, capsys):
    cfg = _config(tmp_path, PIPELINE)
    assert main(["compare", "--config", cfg, "--out", str(tmp_path / "o")]) == 2
    assert "result file not found" in capsys.readouterr().err


def test_predict_without_fit(tmp_path, capsys):
    cfg = _config(tmp_path, PIPELINE)
    assert main(["bpinn-predict", "--config", cfg, "--out", str(tmp_path / "o")]) == 2
    assert "run bpinn-fit first" in capsys.readouterr().err


# four burn-in steps are too few for the tuner to settle
@pytest.mark.filterwarnings("ignore:step size tuning")
def test_small_pipeline(tmp_path):
    cfg = _config(tmp_path, PIPELINE)
    runs = []
    for name in ("a", "b"):
        out = str(tmp_path / name)
        for cmd in ("bpinn-fit", "bpinn-predict", "mc-reference", "compare"):
            assert main([cmd, "--config", cfg, "--out", out]) == 0, cmd
        runs.append(tmp_path / name)
    a, b = runs
    for f in ("fit/map_params.json", "bpinn.csv", "mc.csv"):
        assert (a / f).read_bytes() == (b / f).read_bytes(), f
    # the chain header records the wall time; the samples must match exactly
    chains = [(d / "fit" / "chain.jsonl").read_text().splitlines() for d in runs]
    assert chains[0][1:] == chains[1][1:]
    summary = json.loads((a / "compare.json").read_text())
    assert summary["combined"] >= 0 and summary["wall_time_reference"] > 0 and summary["wall_time_estimate"] > 0
    fit = json.loads((a / "fit" / "fit_summary.json").read_text())
    assert "train_max_mismatch" in fit
    assert "NaN" not in (a / "fit" / "diagnostics.json").read_text()
