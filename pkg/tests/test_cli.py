import io
import json
import math

import pytest

from entroflow import ParseError, ValidationError
from entroflow.cli import (
    build_system,
    catalog_names,
    catalog_path,
    main,
    parse_config,
    run_scenario,
)
from entroflow.coupled import CompositeSystem
from entroflow.family import BernoulliFamily, TabulatedFamily


def write_config(tmp_path, doc, name="scenario.json"):
    path = tmp_path / name
    path.write_text(json.dumps(doc, indent=1))
    return path


MINIMAL = {
    "name": "b",
    "mode": "single",
    "family": {"closed_form": "bernoulli"},
    "A0": [0.25],
    "integrator": {"tau_max": 2.0},
}


class TestParseConfig:
    def test_minimal_with_defaults(self, tmp_path):
        cfg = parse_config(write_config(tmp_path, MINIMAL))
        assert cfg.name == "b"
        assert cfg.mode == "single"
        assert cfg.h == 1e-3
        assert cfg.tau_max == 2.0
        assert cfg.sigma_eq == 1e-8
        assert cfg.record_every == 1
        assert cfg.outputs.trajectory_csv == "b.csv"
        assert cfg.outputs.summary_json == "b-summary.json"
        assert isinstance(build_system(cfg), BernoulliFamily)

    def test_unknown_integrator_key_is_parse_error(self, tmp_path):
        doc = dict(MINIMAL, integrator={"taumax": 2.0})
        with pytest.raises(ParseError, match="taumax"):
            parse_config(write_config(tmp_path, doc))

    def test_unknown_top_level_key(self, tmp_path):
        doc = dict(MINIMAL, extra=1)
        with pytest.raises(ParseError, match="extra"):
            parse_config(write_config(tmp_path, doc))

    def test_unknown_family_key(self, tmp_path):
        doc = dict(MINIMAL, family={"closed_form": "bernoulli", "volum": 1.0})
        with pytest.raises(ParseError, match="volum"):
            parse_config(write_config(tmp_path, doc))

    def test_coupled_missing_total_is_validation_error(self, tmp_path):
        doc = {
            "name": "c",
            "mode": "coupled",
            "families": [{"closed_form": "bernoulli"}, {"closed_form": "bernoulli"}],
            "A0": [0.25],
            "integrator": {"tau_max": 2.0},
        }
        with pytest.raises(ValidationError, match="A_total"):
            parse_config(write_config(tmp_path, doc))

    def test_all_violations_reported_together(self, tmp_path):
        doc = {
            "name": "",
            "mode": "coupled",
            "families": [{"closed_form": "bernoulli"}],
            "A0": [0.25],
            "integrator": {"tau_max": -1.0, "h": 0.0},
        }
        with pytest.raises(ValidationError) as err:
            parse_config(write_config(tmp_path, doc))
        text = str(err.value)
        assert "name" in text
        assert "families" in text
        assert "A_total" in text
        assert "tau_max" in text
        assert "integrator.h" in text

    def test_json_syntax_error_reports_line(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text('{"name": "x",\n  "mode": }')
        with pytest.raises(ParseError, match="line 2"):
            parse_config(path)

    def test_inline_tabulated_family(self, tmp_path):
        doc = dict(
            MINIMAL,
            family={"points": [0, 1], "weights": [1.0, 1.0], "stats": [[0.0, 1.0]]},
        )
        cfg = parse_config(write_config(tmp_path, doc))
        assert isinstance(build_system(cfg), TabulatedFamily)

    def test_tabulated_path_resolved_relative_to_config(self, tmp_path):
        fam_doc = {"points": [0, 1], "weights": [1.0, 1.0], "stats": [[0.0, 1.0]]}
        (tmp_path / "fam.json").write_text(json.dumps(fam_doc))
        doc = dict(MINIMAL, family={"tabulated": "fam.json"})
        cfg = parse_config(write_config(tmp_path, doc))
        assert isinstance(build_system(cfg), TabulatedFamily)

    def test_coupled_config_builds_composite(self, tmp_path):
        doc = {
            "name": "pair",
            "mode": "coupled",
            "families": [
                {"closed_form": "ideal-gas", "volume": 1.0},
                {"closed_form": "ideal-gas", "volume": 1.0},
            ],
            "A0": [1.0, 0.5],
            "A_total": [4.0, 2.0],
            "integrator": {"tau_max": 10.0},
        }
        cfg = parse_config(write_config(tmp_path, doc))
        assert isinstance(build_system(cfg), CompositeSystem)

    def test_nonfinite_numbers_rejected(self, tmp_path):
        path = tmp_path / "inf.json"
        path.write_text(
            '{"name": "x", "mode": "single", "family": {"closed_form": "bernoulli"},'
            ' "A0": [Infinity], "integrator": {"tau_max": 1.0}}'
        )
        with pytest.raises(ValidationError, match="A0"):
            parse_config(path)


class TestRunScenario:
    def test_artifacts_and_exit_code(self, tmp_path):
        cfg = parse_config(write_config(tmp_path, MINIMAL))
        log = io.StringIO()
        status = run_scenario(cfg, output_dir=tmp_path / "out", log=log)
        assert status == 0
        csv_text = (tmp_path / "out" / "b.csv").read_text()
        summary = json.loads((tmp_path / "out" / "b-summary.json").read_text())
        assert summary["terminal_status"] == "equilibrium-reached"
        assert summary["terminal_tau"] == pytest.approx(math.pi / 6.0, abs=1e-3)
        assert summary["terminal_A"][0] == pytest.approx(0.5, abs=1e-4)
        # summary equals the last CSV row
        last = csv_text.strip().splitlines()[-1].split(",")
        assert float(last[0]) == summary["terminal_tau"]
        assert float(last[1]) == summary["terminal_A"][0]
        assert float(last[3]) == summary["terminal_S"]

    def test_budget_exhaustion_still_exits_0(self, tmp_path):
        doc = dict(MINIMAL, name="short", integrator={"tau_max": 0.05})
        cfg = parse_config(write_config(tmp_path, doc))
        log = io.StringIO()
        assert run_scenario(cfg, output_dir=tmp_path / "out", log=log) == 0
        summary = json.loads((tmp_path / "out" / "short-summary.json").read_text())
        assert summary["terminal_status"] == "tau-budget-exhausted"
        assert summary["terminal_tau"] == pytest.approx(0.05, abs=1e-12)

    def test_equilibrium_start_exits_2(self, tmp_path):
        doc = dict(MINIMAL, A0=[0.5])
        cfg = parse_config(write_config(tmp_path, doc))
        log = io.StringIO()
        assert run_scenario(cfg, output_dir=tmp_path / "out", log=log) == 2
        assert "AtEquilibriumError" in log.getvalue()

    def test_determinism_byte_identical(self, tmp_path):
        doc = dict(
            MINIMAL,
            name="det",
            analyses=[{"kind": "entropy_production_check"}],
        )
        cfg = parse_config(write_config(tmp_path, doc))
        for sub in ("a", "b"):
            assert run_scenario(cfg, output_dir=tmp_path / sub, log=io.StringIO()) == 0
        for artifact in ("det.csv", "det-summary.json"):
            first = (tmp_path / "a" / artifact).read_bytes()
            second = (tmp_path / "b" / artifact).read_bytes()
            assert first == second

    def test_onsager_analysis_writes_report(self, tmp_path):
        doc = {
            "name": "eonly",
            "mode": "coupled",
            "families": [
                {"closed_form": "ideal-gas", "volume": 1.0, "fixed_n": 1.0},
                {"closed_form": "ideal-gas", "volume": 1.0, "fixed_n": 1.0},
            ],
            "A0": [1.0],
            "A_total": [4.0],
            "integrator": {"tau_max": 6.0},
            "analyses": [{"kind": "onsager", "clock_rate": 2.0}],
        }
        cfg = parse_config(write_config(tmp_path, doc))
        assert run_scenario(cfg, output_dir=tmp_path / "out", log=io.StringIO()) == 0
        report = json.loads((tmp_path / "out" / "eonly-onsager.json").read_text())
        assert report["asymmetry"] == 0.0
        assert report["empirical_L"] is not None

    def test_tabulated_scenario_end_to_end(self, tmp_path):
        fam_doc = {
            "points": [0, 1, 2],
            "weights": [1.0, 2.0, 1.0],
            "stats": [[0.0, 1.0, 2.0]],
        }
        (tmp_path / "three.json").write_text(json.dumps(fam_doc))
        doc = {
            "name": "three-state",
            "mode": "single",
            "family": {"tabulated": "three.json"},
            "A0": [0.4],
            "integrator": {"tau_max": 4.0},
        }
        cfg = parse_config(write_config(tmp_path, doc))
        assert run_scenario(cfg, output_dir=tmp_path / "out", log=io.StringIO()) == 0
        summary = json.loads((tmp_path / "out" / "three-state-summary.json").read_text())
        assert summary["terminal_status"] == "equilibrium-reached"
        # entropy maximum of the weighted three-state chain sits at lam = 0
        fam = build_system(cfg)
        target = fam.mean_parameters([0.0])[0]
        assert summary["terminal_A"][0] == pytest.approx(target, abs=1e-6)

    def test_geometry_probe_analysis(self, tmp_path):
        doc = dict(
            MINIMAL,
            name="probe",
            analyses=[{"kind": "geometry_probe", "points": [[0.25], [0.4]]}],
        )
        cfg = parse_config(write_config(tmp_path, doc))
        assert run_scenario(cfg, output_dir=tmp_path / "out", log=io.StringIO()) == 0
        summary = json.loads((tmp_path / "out" / "probe-summary.json").read_text())
        probes = summary["analyses"]["geometry_probe"]
        assert len(probes) == 2
        assert probes[0]["metric"][0][0] == pytest.approx(16.0 / 3.0, rel=1e-10)


class TestMain:
    def test_run_and_validate(self, tmp_path, capsys):
        path = write_config(tmp_path, MINIMAL)
        assert main(["validate", str(path)]) == 0
        assert "valid scenario" in capsys.readouterr().out
        assert main(["run", str(path), "--output-dir", str(tmp_path / "out")]) == 0
        assert (tmp_path / "out" / "b.csv").exists()

    def test_validate_rejects_typo(self, tmp_path, capsys):
        path = write_config(tmp_path, dict(MINIMAL, integrator={"taumax": 1.0}))
        assert main(["validate", str(path)]) == 1
        assert "taumax" in capsys.readouterr().err

    def test_probe_prints_geometry(self, tmp_path, capsys):
        path = write_config(tmp_path, MINIMAL)
        assert main(["probe", str(path), "--point", "0.25"]) == 0
        out = capsys.readouterr().out
        assert "lambda" in out and "sigma" in out and "Gamma[0][0]" in out
        sigma_line = next(l for l in out.splitlines() if l.startswith("sigma"))
        assert float(sigma_line.split("=")[1]) == pytest.approx(0.4757130754, abs=1e-9)

    def test_probe_coupled_point(self, capsys):
        assert main(
            ["probe", str(catalog_path("two-vessel-gas-EN")), "--point", "1.2", "0.7"]
        ) == 0
        out = capsys.readouterr().out
        assert "g[1]" in out and "Gamma[1][1]" in out

    def test_probe_infeasible_point_exits_2(self, tmp_path, capsys):
        path = write_config(tmp_path, MINIMAL)
        assert main(["probe", str(path), "--point", "1.5"]) == 2
        assert "InfeasibleMeanError" in capsys.readouterr().err

    def test_version(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["--version"])
        assert exc.value.code == 0
        assert "entroflow" in capsys.readouterr().out

    def test_jobs_batch_mode(self, tmp_path):
        p1 = write_config(tmp_path, dict(MINIMAL, name="j1"), "one.json")
        p2 = write_config(tmp_path, dict(MINIMAL, name="j2", A0=[0.75]), "two.json")
        out = tmp_path / "out"
        assert main(["run", str(p1), str(p2), "--output-dir", str(out), "--jobs", "2"]) == 0
        assert (out / "j1.csv").exists() and (out / "j2.csv").exists()


class TestCatalog:
    def test_names(self):
        assert catalog_names() == [
            "bernoulli-coupled",
            "bernoulli-relax",
            "gaussian-mean",
            "two-vessel-gas-E-only",
            "two-vessel-gas-EN",
        ]

    def test_all_parse_and_validate(self):
        for name in catalog_names():
            cfg = parse_config(catalog_path(name))
            build_system(cfg)
