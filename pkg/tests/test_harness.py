"""Tests for experiment specs, the dispatcher, run manifests and the CLI."""

from pathlib import Path
from unittest.mock import patch

import pytest
import yaml

from thermolimit import config as config_module
from thermolimit.config import Config
from thermolimit.exceptions import (
    ElectrostaticsError,
    OutputError,
    SpecValidationError,
)
from thermolimit.harness import (
    ExperimentSpec,
    error_report,
    load_spec,
    read_manifest,
    read_spec_file,
    run,
    validate_spec,
)
from thermolimit.main import main

SPECS_DIR = Path(__file__).parent.parent / "specs"

SAMPLE = {
    "kind": "sample",
    "seed": 11,
    "model": {"displacement": {"kind": "point_mass"}},
    "window": {"lo": [0, 0, 0], "hi": [8, 8, 8]},
}

MOMENTS = {
    "kind": "moments",
    "seed": 3,
    "model": {"displacement": {"kind": "gaussian", "sigma": 0.3, "tail_sigmas": 6.0}},
    "statistics": ["X0", "X1"],
    "exponents": [1.0, 2.0],
    "replicas": 60,
}

ENERGY = {
    "kind": "energy",
    "seed": 5,
    "model": {"displacement": {"kind": "uniform_ball", "radius": 0.2}},
    "domain": {"kind": "cube", "side": 3, "transform": {"translation": [-0.5, -0.5, -0.5]}},
    "cone_epsilon": 0.5,
}


@pytest.fixture(autouse=True)
def isolated_config(tmp_path, monkeypatch):
    """Fresh settings per test; logs go to the test directory."""
    config_dir = tmp_path / "config"
    config_dir.mkdir()
    (config_dir / "settings.yaml").write_text(yaml.safe_dump({"log_dir": str(tmp_path / "logs")}))
    monkeypatch.setenv("THERMOLIMIT_CONFIG_DIR", str(config_dir))
    monkeypatch.delenv("THERMOLIMIT_THREADS", raising=False)
    monkeypatch.setattr(config_module, "_config", Config(config_dir))


def _spec_file(tmp_path: Path, data: dict, name: str = "spec.yaml") -> Path:
    path = tmp_path / name
    path.write_text(yaml.safe_dump(data))
    return path


# ---------------------------------------------------------------------------
# Spec validation
# ---------------------------------------------------------------------------

class TestValidateSpec:
    """Schema and precondition checks report every violation."""

    def test_valid_spec(self):
        spec, violations = validate_spec(SAMPLE)
        assert violations == []
        assert isinstance(spec, ExperimentSpec)
        assert spec.window.hi == (8.0, 8.0, 8.0)

    def test_all_schema_violations_reported(self):
        data = dict(MOMENTS, replicas=0, colour="blue",
                    model={"displacement": {"kind": "gaussian", "sigma": -1.0}})
        spec, violations = validate_spec(data)
        assert spec is None
        assert len(violations) >= 3
        assert any("sigma" in v for v in violations)
        assert any("colour" in v for v in violations)
        assert any(v.startswith("replicas") for v in violations)

    def test_too_few_replicas_cites_minimum(self):
        _, violations = validate_spec(dict(MOMENTS, replicas=5))
        assert len(violations) == 1
        assert "30" in violations[0]

    def test_missing_inputs_for_kind(self):
        _, violations = validate_spec({"kind": "sample"})
        assert violations == ["window: required for a sample run"]
        _, violations = validate_spec({"kind": "thermo", "replicas": 30})
        assert any(v.startswith("sequence") for v in violations)

    def test_per_nucleus_statistic_with_vacancies(self):
        data = dict(MOMENTS, statistics=["delta_at_origin"],
                    model={"charge": {"kind": "vacancy", "p_vac": 0.2, "z": 1.0}})
        _, violations = validate_spec(data)
        assert any("vacancies" in v for v in violations)

    def test_unknown_statistic(self):
        _, violations = validate_spec(dict(MOMENTS, statistics=["X9"]))
        assert any("X9" in v for v in violations)

    def test_not_a_mapping(self):
        assert validate_spec(["kind", "sample"]) == (None, ["<spec>: expected a mapping"])

    def test_collar_grid_range(self):
        data = {"kind": "geometry", "domain": {"kind": "ball", "radius": 2.0}, "t_grid": [0.5]}
        _, violations = validate_spec(data)
        assert any(v.startswith("t_grid") for v in violations)


class TestBundledSpecs:
    """The example specs shipped in specs/ are valid."""

    @pytest.mark.parametrize("path", sorted(SPECS_DIR.glob("*.yaml")), ids=lambda p: p.stem)
    def test_spec_is_valid(self, path):
        _, violations = validate_spec(read_spec_file(path))
        assert violations == []


class TestLoadSpec:
    """Spec files, overrides and kind checks."""

    def test_override_seed(self, tmp_path):
        spec = load_spec(_spec_file(tmp_path, SAMPLE), {"seed": 99, "out": None})
        assert spec.seed == 99

    def test_kind_is_filled_in(self, tmp_path):
        data = {k: v for k, v in SAMPLE.items() if k != "kind"}
        assert load_spec(_spec_file(tmp_path, data), kind="sample").kind == "sample"

    def test_kind_mismatch_is_a_schema_violation(self, tmp_path):
        with pytest.raises(SpecValidationError) as info:
            load_spec(_spec_file(tmp_path, SAMPLE), kind="energy")
        assert info.value.exit_code == 2
        assert "kind" in info.value.violations[0]

    def test_missing_file(self, tmp_path):
        with pytest.raises(OutputError) as info:
            load_spec(tmp_path / "nope.yaml")
        assert info.value.exit_code == 4

    def test_invalid_yaml(self, tmp_path):
        path = tmp_path / "bad.yaml"
        path.write_text("kind: [sample\n")
        with pytest.raises(SpecValidationError):
            read_spec_file(path)


# ---------------------------------------------------------------------------
# Runs and manifests
# ---------------------------------------------------------------------------

class TestRun:
    """Dispatch, outputs and reproducibility."""

    def test_sample_writes_window_nuclei(self, tmp_path):
        out = tmp_path / "sample"
        manifest = run(ExperimentSpec.model_validate(SAMPLE), out)
        lines = (out / "nuclei.csv").read_text().splitlines()
        assert len(lines) == 513
        assert manifest.summary["nuclei"] == 512
        assert set(manifest.outputs) == {"nuclei.csv"}
        assert (out / "manifest.yaml").exists()

    def test_rerun_is_byte_identical(self, tmp_path):
        spec = ExperimentSpec.model_validate(MOMENTS)
        first = run(spec, tmp_path / "a")
        second = run(spec, tmp_path / "b")
        assert first.outputs == second.outputs
        assert (tmp_path / "a" / "moments.csv").read_bytes() == \
            (tmp_path / "b" / "moments.csv").read_bytes()

    def test_outputs_do_not_depend_on_threads(self, tmp_path):
        spec = ExperimentSpec.model_validate(MOMENTS)
        one = run(spec, tmp_path / "one", threads=1)
        four = run(spec, tmp_path / "four", threads=4)
        assert one.outputs == four.outputs
        assert one.threads == 1

    def test_manifest_records_replica_seeds(self, tmp_path):
        manifest = run(ExperimentSpec.model_validate(MOMENTS), tmp_path / "m")
        (seeds,) = manifest.replica_seeds
        assert seeds.count == 60
        assert len(seeds.first) == 8
        assert len(seeds.sha256) == 64
        assert manifest.master_seed == 3
        assert "numpy" in manifest.environment

    def test_manifest_reruns_as_spec(self, tmp_path):
        first = run(ExperimentSpec.model_validate(ENERGY), tmp_path / "first")
        again = load_spec(tmp_path / "first" / "manifest.yaml")
        second = run(again, tmp_path / "second")
        assert second.outputs == first.outputs
        assert read_manifest(tmp_path / "second" / "manifest.yaml").summary == first.summary

    def test_energy_outputs(self, tmp_path):
        manifest = run(ExperimentSpec.model_validate(ENERGY), tmp_path / "e")
        assert set(manifest.outputs) == {"energy_cells.csv", "energy.csv"}
        assert manifest.summary["nuclei_in_domain"] == 27
        header = (tmp_path / "e" / "energy_cells.csv").read_text().splitlines()[0]
        assert header == "i,j,k,kinetic [energy],boundary [energy],attraction [energy]"

    def test_preconditions_rechecked(self, tmp_path):
        spec = ExperimentSpec.model_validate({"kind": "sample"})
        with pytest.raises(SpecValidationError):
            run(spec, tmp_path / "x")


class TestErrorReport:
    """YAML failure reports."""

    def test_library_error(self):
        report = yaml.safe_load(error_report(SpecValidationError("bad", violations=["a: b"])))
        assert report["status"] == "error"
        assert report["category"] == "schema"
        assert report["violations"] == ["a: b"]

    def test_unexpected_error_is_numerical(self):
        report = yaml.safe_load(error_report(FloatingPointError("overflow")))
        assert report["category"] == "numerical"
        assert report["error"] == "FloatingPointError"


# ---------------------------------------------------------------------------
# Command line
# ---------------------------------------------------------------------------

class TestCli:
    """Exit codes and YAML output of the thermolimit command."""

    @pytest.fixture(autouse=True)
    def quiet_logging(self):
        with patch("thermolimit.main.setup_logging"):
            yield

    def test_run_kind(self, tmp_path, capsys):
        path = _spec_file(tmp_path, SAMPLE)
        code = main(["sample", "--spec", str(path), "--out", str(tmp_path / "out")])
        assert code == 0
        result = yaml.safe_load(capsys.readouterr().out)
        assert result["status"] == "ok"
        assert result["kind"] == "sample"
        assert "nuclei.csv" in result["outputs"]

    def test_seed_override(self, tmp_path):
        path = _spec_file(tmp_path, SAMPLE)
        assert main(["run", "--spec", str(path), "--out", str(tmp_path / "o"),
                     "--seed", "42"]) == 0
        assert read_manifest(tmp_path / "o" / "manifest.yaml").master_seed == 42

    def test_schema_violation_exits_2(self, tmp_path, capsys):
        path = _spec_file(tmp_path, dict(SAMPLE, replicas=-3))
        assert main(["validate", "--spec", str(path)]) == 2
        report = yaml.safe_load(capsys.readouterr().err)
        assert report["category"] == "schema"
        assert any(v.startswith("replicas") for v in report["violations"])

    def test_validate_ok(self, tmp_path, capsys):
        assert main(["validate", "--spec", str(_spec_file(tmp_path, SAMPLE))]) == 0
        assert yaml.safe_load(capsys.readouterr().out)["status"] == "ok"

    def test_wrong_subcommand_exits_2(self, tmp_path):
        path = _spec_file(tmp_path, SAMPLE)
        assert main(["energy", "--spec", str(path), "--out", str(tmp_path / "o")]) == 2

    def test_missing_spec_exits_4(self, tmp_path, capsys):
        assert main(["run", "--spec", str(tmp_path / "missing.yaml")]) == 4
        assert yaml.safe_load(capsys.readouterr().err)["category"] == "io"

    def test_precondition_failure_exits_3(self, tmp_path):
        path = _spec_file(tmp_path, ENERGY)
        with patch("thermolimit.harness.runner.trial_energy",
                   side_effect=ElectrostaticsError("coincident charge positions")):
            assert main(["energy", "--spec", str(path), "--out", str(tmp_path / "o")]) == 3

    def test_numerical_failure_exits_3(self, tmp_path, capsys):
        path = _spec_file(tmp_path, ENERGY)
        with patch("thermolimit.harness.runner.trial_energy",
                   side_effect=FloatingPointError("overflow")):
            assert main(["energy", "--spec", str(path), "--out", str(tmp_path / "o")]) == 3
        assert yaml.safe_load(capsys.readouterr().err)["category"] == "numerical"

    def test_diagnose(self, capsys):
        code = main(["diagnose"])
        result = yaml.safe_load(capsys.readouterr().out)
        assert code in (0, 1)
        assert result["python"]["ok"] is True
        assert {"numpy", "scipy", "host"} <= set(result)
