import csv
import json
from pathlib import Path

import numpy as np
import pytest

from frac_volterra.cli import main
from frac_volterra.core.special_functions import mittag_leffler
from frac_volterra.errors import ConfigError, DivergenceError, DomainError, MittagLefflerOverflow
from frac_volterra.scenario.runner import exit_code_for

ML_PROBLEM = {
    "kind": "integral",
    "alpha": 0.5,
    "f": {"family": "affine", "scale": 0.0, "coupling": 1.0, "forcing": {"kind": "const", "value": 1.0}},
    "k": {"family": "linear", "lipschitz": 0.5},
}

CONTRACTIVE_PROBLEM = {
    "kind": "integral",
    "alpha": 0.5,
    "f": {"family": "affine", "scale": 0.3, "coupling": 0.2, "forcing": {"kind": "const", "value": 1.0}},
    "k": {"family": "linear", "lipschitz": 0.5},
}


def _write_config(path: Path, document: dict) -> str:
    path.write_text(json.dumps(document), encoding="utf-8")
    return str(path)


def _read_csv(path: Path):
    lines = path.read_text(encoding="utf-8").splitlines()
    assert lines[0].startswith("# config_hash=")
    reader = csv.DictReader(lines[1:])
    return list(reader)


def test_ml_eval_prints_fifteen_digits(capsys) -> None:
    assert main(["ml-eval", "--alpha", "1", "--z", "1"]) == 0
    assert capsys.readouterr().out.strip() == "2.71828182845905"


def test_ml_eval_error_codes(capsys) -> None:
    assert main(["ml-eval", "--alpha", "-1", "--z", "1"]) == 2
    assert main(["ml-eval", "--alpha", "1", "--z", "800"]) == 4
    assert "✗" in capsys.readouterr().err


def test_exit_code_mapping() -> None:
    assert exit_code_for(ConfigError("grid.n", "bad")) == 2
    assert exit_code_for(DomainError("bad")) == 2
    assert exit_code_for(DivergenceError(3)) == 3
    assert exit_code_for(MittagLefflerOverflow(1.0, 800.0)) == 4
    assert exit_code_for(RuntimeError("other")) == 1


def test_verify_writes_residuals(tmp_path: Path) -> None:
    out = tmp_path / "verify"
    code = main(["verify", "--check", "ml-integral", "--alpha", "0.5", "--n", "2048", "--out-dir", str(out)])
    assert code == 0
    rows = _read_csv(out / "verify.csv")
    assert rows[0]["check"] == "ml-integral"
    assert rows[0]["n"] == "2048"
    assert float(rows[0]["residual"]) <= 1e-4
    summary = json.loads((out / "summary.json").read_text(encoding="utf-8"))
    assert summary["exit_code"] == 0
    assert summary["checks"] == {"ml-integral": True}


def test_verify_composition_of_mittag_leffler_samples(tmp_path: Path) -> None:
    out = tmp_path / "composition"
    code = main(["verify", "--check", "composition", "--function", "ml", "--alpha", "0.6", "--beta", "1",
                 "--n", "2048", "--out-dir", str(out)])
    assert code == 0
    rows = _read_csv(out / "verify.csv")
    assert [row["check"] for row in rows] == ["derivative-of-integral", "integral-of-derivative"]
    assert all(float(row["residual"]) <= 1e-2 for row in rows)


def test_named_check_alias(tmp_path: Path) -> None:
    out = tmp_path / "alias"
    assert main(["verify", "--check", "lemma1", "--alpha", "0.8", "--n", "2048", "--out-dir", str(out)]) == 0
    assert _read_csv(out / "verify.csv")[0]["check"] == "ml-integral"


def test_configuration_error_names_the_field(tmp_path: Path, capsys) -> None:
    config = _write_config(tmp_path / "bad.json",
                           {"pipeline": "solve", "space": {"delta": 1.0}, "problem": ML_PROBLEM})
    assert main(["solve", "--config", config, "--out-dir", str(tmp_path / "out")]) == 2
    assert "space.delta" in capsys.readouterr().err


def test_missing_config_file(tmp_path: Path) -> None:
    assert main(["solve", "--config", str(tmp_path / "absent.json")]) == 2


def test_solve_recovers_mittag_leffler_solution(tmp_path: Path) -> None:
    config = _write_config(tmp_path / "ml.json",
                           {"pipeline": "solve", "grid": {"n": 1024}, "problem": ML_PROBLEM})
    out = tmp_path / "ml"
    assert main(["solve", "--config", config, "--out-dir", str(out)]) == 0

    rows = _read_csv(out / "trace.csv")
    t = np.array([float(row["t"]) for row in rows])
    x = np.array([float(row["x_1"]) for row in rows])
    np.testing.assert_allclose(x, mittag_leffler(0.5, 0.5 * t**0.5), rtol=1e-3)

    history = [float(row["d_xi_inf"]) for row in _read_csv(out / "convergence.csv")]
    assert history[-1] <= 1e-10


def test_solve_outputs_are_reproducible(tmp_path: Path) -> None:
    config = _write_config(tmp_path / "ml.json",
                           {"pipeline": "solve", "grid": {"n": 128}, "problem": ML_PROBLEM})
    for name in ("first", "second"):
        assert main(["solve", "--config", config, "--out-dir", str(tmp_path / name)]) == 0
    for artifact in ("trace.csv", "convergence.csv", "summary.json"):
        assert (tmp_path / "first" / artifact).read_bytes() == (tmp_path / "second" / artifact).read_bytes()


def test_command_line_overrides_config(tmp_path: Path) -> None:
    config = _write_config(tmp_path / "ml.json",
                           {"pipeline": "solve", "grid": {"n": 1024}, "problem": ML_PROBLEM})
    out = tmp_path / "small"
    assert main(["solve", "--config", config, "--n", "32", "--out-dir", str(out)]) == 0
    assert len(_read_csv(out / "trace.csv")) == 33


def test_bounds_pipeline(tmp_path: Path) -> None:
    config = _write_config(tmp_path / "b.json",
                           {"pipeline": "bounds", "grid": {"n": 128}, "problem": CONTRACTIVE_PROBLEM})
    out = tmp_path / "bounds"
    assert main(["bounds", "--config", config, "--estimate", "apriori-integral", "--out-dir", str(out)]) == 0
    rows = _read_csv(out / "bounds.csv")
    assert {row["estimate"] for row in rows} == {"apriori-integral"}
    assert all(float(row["margin"]) <= 1.0 + 1e-9 for row in rows)


def test_bounds_by_number_with_problem_and_out(tmp_path: Path) -> None:
    config = _write_config(tmp_path / "b.json",
                           {"pipeline": "bounds", "grid": {"n": 128}, "problem": CONTRACTIVE_PROBLEM})
    target = tmp_path / "results" / "estimate.csv"
    code = main(["bounds", "--theorem", "3", "--problem", config, "--out", str(target)])
    assert code == 0
    rows = _read_csv(target)
    assert {row["estimate"] for row in rows} == {"apriori-integral"}
    assert (tmp_path / "results" / "summary.json").exists()


@pytest.mark.parametrize("mode", ["ml", "nested"])
def test_gronwall_random_instances(tmp_path: Path, mode: str) -> None:
    out = tmp_path / mode
    code = main(["gronwall", "--mode", mode, "--profile-kind", "random", "--instances", "5",
                 "--n", "64", "--seed", "7", "--out-dir", str(out)])
    assert code == 0
    rows = _read_csv(out / "gronwall.csv")
    assert len(rows) == 5
    assert all(row["violations"] == "0" for row in rows)
    assert {row["status"] for row in rows} <= {"checked", "overflow"}


def test_batch_runs_each_scenario_in_its_own_directory(tmp_path: Path, capsys) -> None:
    first = _write_config(tmp_path / "low.json",
                          {"pipeline": "verify", "grid": {"n": 2048}, "verify": {"alpha": 0.5}})
    second = _write_config(tmp_path / "high.json",
                           {"pipeline": "verify", "grid": {"n": 2048}, "verify": {"alpha": 0.8}})
    out = tmp_path / "runs"
    assert main(["batch", first, second, "--out-dir", str(out), "--workers", "2"]) == 0
    assert (out / "low" / "verify.csv").exists()
    assert (out / "high" / "verify.csv").exists()
    printed = capsys.readouterr().out
    assert printed.index("low.json") < printed.index("high.json")


def test_no_command_prints_help(capsys) -> None:
    assert main([]) == 1
    assert "usage" in capsys.readouterr().out.lower()


def test_depend_pipeline_scales_linearly(tmp_path: Path) -> None:
    config = _write_config(tmp_path / "d.json",
                           {"pipeline": "depend", "grid": {"n": 64}, "problem": CONTRACTIVE_PROBLEM})
    out = tmp_path / "depend"
    code = main(["depend", "--config", config, "--perturb", "0.1", "--perturb", "0.01", "--out-dir", str(out)])
    assert code == 0
    rows = _read_csv(out / "depend.csv")
    assert {row["epsilon"] for row in rows} == {"0.10000000000000001", "0.01"}
    summary = json.loads((out / "summary.json").read_text(encoding="utf-8"))
    assert summary["summary"]["linear_scaling"] is True
    assert summary["checks"]["parameter-integral"] is True
