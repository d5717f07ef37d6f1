import json
import shutil
import subprocess
import sys

import numpy as np
import pytest

from hardylab.cli import DEFAULTS, config_hash, load_config, main
from hardylab.kernels import GaussianKernel, TabulatedKernel


def write(tmp_path, name, doc):
    p = tmp_path / name
    p.write_text(json.dumps(doc))
    return str(p)


def run(tmp_path, command, doc, *extra, tag="run"):
    cfg = write(tmp_path, f"{tag}.json", doc)
    out = tmp_path / tag
    code = main([command, "--config", cfg, "--out", str(out), *extra])
    report = out / "report.json"
    return code, (report.read_text() if report.exists() else None)


@pytest.fixture(scope="module")
def tabulated_csvs(tmp_path_factory):
    d = tmp_path_factory.mktemp("tab")
    k = TabulatedKernel.from_kernel(GaussianKernel(1), [0.25, 0.5, 1.0], np.geomspace(1e-3, 20.0, 400))
    good, bad = d / "good.csv", d / "bad.csv"
    k.to_csv(good)
    k.with_scaled_slice(1, 1.3).to_csv(bad)
    return str(good), str(bad)


# --- config handling ----------------------------------------------------------

def test_defaults_and_hash_are_stable(tmp_path):
    for command in DEFAULTS:
        cfg = load_config(command, None)
        assert config_hash(cfg) == config_hash(load_config(command, None))
        assert len(config_hash(cfg)) == 16


def test_unknown_field_is_config_error(tmp_path, capsys):
    code, report = run(tmp_path, "verify-hardy", {"tolerances": {"equalty_rel": 0.1}})
    assert code == 1 and report is None
    assert "equalty_rel" in capsys.readouterr().err


def test_missing_command_and_bad_jobs(capsys):
    assert main([]) == 1
    assert main(["verify-kernel", "--jobs", "0"]) == 1


def test_bad_choice_exits_one():
    with pytest.raises(SystemExit) as exc:
        main(["no-such-command"])
    assert exc.value.code == 1


def test_list_batteries(capsys):
    assert main(["--list-batteries"]) == 0
    out = capsys.readouterr().out
    for name in ("standard", "annular", "gaussian_bump", "smoothed_power", "hat", "annular_bump"):
        assert name in out


# --- verify-kernel ------------------------------------------------------------

def test_verify_kernel_default_passes(tmp_path):
    code, report = run(tmp_path, "verify-kernel", {})
    assert code == 0
    doc = json.loads(report)
    assert doc["pass"] is True and doc["command"] == "verify-kernel"


def test_verify_kernel_stable(tmp_path):
    assert run(tmp_path, "verify-kernel", {"kernel": {"kind": "stable", "alpha": 1.0, "d": 1}})[0] == 0


def test_verify_kernel_tabulated(tmp_path, tabulated_csvs):
    good, bad = tabulated_csvs
    doc = {"kernel": {"kind": "tabulated", "d": 1, "csv": good}, "radii": [0.1, 1.0],
           "tolerances": {"ck": 1e-2, "mass": 1e-3}}
    assert run(tmp_path, "verify-kernel", doc, tag="good")[0] == 0
    doc["kernel"]["csv"] = bad
    assert run(tmp_path, "verify-kernel", doc, tag="bad")[0] == 2


def test_tabulated_without_csv_is_config_error(tmp_path):
    assert run(tmp_path, "verify-kernel", {"kernel": {"kind": "tabulated", "d": 1}})[0] == 1


def test_report_is_byte_identical(tmp_path):
    _, a = run(tmp_path, "verify-kernel", {}, tag="a")
    _, b = run(tmp_path, "verify-kernel", {}, tag="b")
    assert a == b


# --- verify-supermedian -------------------------------------------------------

def test_supermedian_power_admissible(tmp_path):
    assert run(tmp_path, "verify-supermedian", {"kernel": {"kind": "stable", "alpha": 1.0, "d": 3}, "r": 1.0})[0] == 0


def test_supermedian_hypothesis_violation(tmp_path, capsys):
    code, _ = run(tmp_path, "verify-supermedian", {"kernel": {"kind": "stable", "alpha": 1.0, "d": 3}, "r": 2.5})
    assert code == 1
    assert "hypothesis" in capsys.readouterr().err


def test_supermedian_pair(tmp_path):
    doc = {"kernel": {"kind": "stable", "alpha": 1.0, "d": 3}, "mode": "pair", "beta": 1.0}
    assert run(tmp_path, "verify-supermedian", doc)[0] == 0


# --- verify-hardy -------------------------------------------------------------

def test_hardy_default_and_jobs_agree(tmp_path):
    c1, a = run(tmp_path, "verify-hardy", {}, tag="serial")
    c2, b = run(tmp_path, "verify-hardy", {}, "--jobs", "2", tag="threads")
    assert c1 == c2 == 0
    assert a == b


def test_hardy_gaussian_annular(tmp_path):
    code, report = run(tmp_path, "verify-hardy", {"kernel": {"kind": "gaussian", "d": 3}, "gamma": 0.5,
                                                  "battery": "annular"})
    assert code == 0
    assert json.loads(report)["pass"] is True


@pytest.mark.slow
def test_hardy_levy_inequality(tmp_path):
    doc = {"kernel": {"kind": "levy", "d": 3, "symbol": "log_perturbed"}, "beta": 0.5, "mode": "inequality",
           "battery": "annular", "weight_grid": {"r_min": 0.2, "r_max": 3.0, "n": 7}}
    assert run(tmp_path, "verify-hardy", doc, "--jobs", "3")[0] == 0


# --- perturbation -------------------------------------------------------------

def test_perturbation_constant_oracle(tmp_path):
    code, report = run(tmp_path, "perturbation", {"dump_csv": True})
    assert code == 0
    assert (tmp_path / "run" / "series.csv").exists()


@pytest.mark.parametrize("doc", [
    {"setup": "killed_gaussian", "grid": {"half_width": 12.0, "n_cells": 120, "t_max": 1.0, "n_times": 16}},
    {"setup": "stable_radial", "grid": {"r_min": 0.01, "r_max": 100.0, "n_cells": 80, "t_max": 1.0, "n_times": 16}},
    {"setup": "zero_potential", "grid": {"n_cells": 60}},
], ids=["killed_gaussian", "stable_radial", "zero_potential"])
def test_perturbation_setups_pass(tmp_path, doc):
    assert run(tmp_path, "perturbation", doc)[0] == 0


def test_perturbation_supercritical_fails(tmp_path):
    doc = {"setup": "stable_radial", "q_scale": 4.0,
           "grid": {"r_min": 0.01, "r_max": 100.0, "n_cells": 80, "t_max": 1.0, "n_times": 16}}
    assert run(tmp_path, "perturbation", doc)[0] == 2


# --- scaling-report -----------------------------------------------------------

def test_scaling_default_passes(tmp_path):
    code, report = run(tmp_path, "scaling-report", {})
    assert code == 0
    assert json.loads(report)["biconditional_counterexamples"] == 0


def test_scaling_symbol_profile(tmp_path):
    doc = {"profile": {"kind": "symbol", "d": 3}, "search_wusc_exponent": 1.5, "beta": 0.5,
           "kernel_estimate_consts": [0.05, 5.0]}
    assert run(tmp_path, "scaling-report", doc)[0] == 0


def test_scaling_false_declaration_fails(tmp_path):
    doc = {"profile": {"kind": "power", "alpha": 1.5, "d": 3}, "declared": {"phi_wusc": [1.2, 1.0]}}
    assert run(tmp_path, "scaling-report", doc)[0] == 2


def test_scaling_beta_out_of_range(tmp_path):
    assert run(tmp_path, "scaling-report", {"profile": {"kind": "power", "alpha": 1.0, "d": 3}, "beta": 5.0})[0] == 1


@pytest.mark.skipif(shutil.which("hardy-lab") is None, reason="console script not installed")
def test_console_script(tmp_path):
    cfg = write(tmp_path, "c.json", {"profile": {"kind": "power", "alpha": 1.0, "d": 3}, "beta": 1.0,
                                     "kernel_estimate_consts": [1 / (4 * np.pi**2), 1 / np.pi**2]})
    res = subprocess.run(["hardy-lab", "scaling-report", "--config", cfg], capture_output=True, text=True)
    assert res.returncode == 0
    assert "scaling-report: PASS" in res.stdout
    res = subprocess.run([sys.executable, "-m", "hardylab.cli", "--list-batteries"], capture_output=True, text=True)
    assert res.returncode == 0
