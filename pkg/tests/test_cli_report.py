import csv
import json

import pytest

from kaehlertwist.cli import main
from kaehlertwist.report import check_filename, emit_csv, to_json
from kaehlertwist.scenario import (
    ConfigError,
    bundled_scenarios,
    load_config,
    parse_config,
    run,
)

SMALL = """
[scenario]
checks = inputs, weinstein
samples = 6
seed = 5

[base]
model = FLAT_DISK_C
alpha = xdy

[fiber]
model = FLAT_DISK_C
"""


def write(tmp_path, text, name="case.cfg"):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_bundled_scenarios_listed():
    assert {"csck_s2", "product", "balanced_n2", "balanced_n1", "flat_flat", "s2_flat", "multi_ruled",
            "nonholomorphic"} <= set(bundled_scenarios())


@pytest.mark.parametrize("name", bundled_scenarios())
def test_bundled_scenario_passes(name):
    result = run(load_config(name).with_overrides(samples=12))
    assert result.passed, [(r.check_id, r.statistic) for r in result.report.failures()]


def test_config_defaults():
    cfg = parse_config(SMALL, "small")
    assert cfg.name == "small" and cfg.samples == 6 and cfg.seed == 5
    assert cfg.splitting == "canonical" and cfg.profile == "Z_INV" and cfg.tol_scale == 1.0
    assert cfg.base.params == {"alpha": "xdy"}


@pytest.mark.parametrize("patch, message", [
    (("model = FLAT_DISK_C\nalpha", "model = KLEIN\nalpha"), "unknown model"),
    (("samples = 6", "samples = 0"), "samples"),
    (("checks = inputs, weinstein", "checks = inputs, astrology"), "unknown checks"),
    (("seed = 5", "seed = -1"), "seed"),
    (("[scenario]", "[tolerances]\nweinstein = -1\n[scenario]"), "positive"),
    (("[scenario]", "[splitting]\nkind = enlarged\n[scenario]"), "base_split"),
    (("[scenario]", "[hermitian]\nprofile = sin(z)\n[scenario]"), "unsupported"),
])
def test_config_validation(patch, message):
    with pytest.raises(ConfigError, match=message):
        parse_config(SMALL.replace(*patch))


def test_missing_config_file():
    with pytest.raises(ConfigError, match="no such config"):
        load_config("/nonexistent/thing.cfg")


def test_report_is_byte_identical_for_fixed_seed():
    cfg = parse_config(SMALL)
    assert to_json(run(cfg)) == to_json(run(cfg))
    assert to_json(run(cfg)) != to_json(run(cfg.with_overrides(seed=6)))


def test_json_layout():
    doc = json.loads(to_json(run(parse_config(SMALL))))
    assert doc["passed"] is True and doc["failures"] == []
    meta = doc["metadata"]
    assert meta["seed"] == 5 and meta["samples"] == 6 and meta["kappa"] == 1.0 and meta["iota_sign"] == 1
    assert "d*d" in meta["laplacian_convention"]
    assert {"id", "anchor", "statistic", "tolerance", "passed"} <= set(doc["checks"][0])


def test_floats_use_seventeen_digits():
    text = to_json(run(parse_config(SMALL)))
    assert '"tolerance": 1.0000000000000001e-09' in text


def test_tolerance_override_and_scale():
    cfg = parse_config(SMALL.replace("[scenario]", "[tolerances]\nweinstein.kaehler = 0.5\n[scenario]"))
    rep = run(cfg.with_overrides(tol_scale=2.0)).report
    assert rep["weinstein.kaehler.nijenhuis"].tolerance == 1.0
    assert rep["weinstein.D_minus_projector"].tolerance == pytest.approx(2e-9)


def test_csv_per_check_and_summary(tmp_path):
    result = run(load_config("csck_s2").with_overrides(samples=20))
    files = emit_csv(result, tmp_path)
    assert tmp_path / "summary.csv" in files
    with (tmp_path / check_filename("csck.scal_constant")).open() as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 20
    assert all(abs(float(r["value"]) - 6.0) <= 1e-5 for r in rows)
    assert sum(int(r["witness"]) for r in rows) == 1


def test_empty_check_list_gives_summary_only(tmp_path):
    cfg = parse_config(SMALL.replace("checks = inputs, weinstein", "checks ="))
    result = run(cfg)
    assert result.passed and not result.report.records
    assert [p.name for p in emit_csv(result, tmp_path)] == ["summary.csv"]


def test_cli_exit_codes(tmp_path, capsys):
    good = write(tmp_path, SMALL)
    report = tmp_path / "out.json"
    assert main(["run", str(good), "--report", str(report), "--csv", str(tmp_path / "csv")]) == 0
    assert json.loads(report.read_text())["passed"]
    assert main(["run", str(good), "--tol-scale", "1e-30", "--report", str(tmp_path / "f.json")]) == 1
    failed = json.loads((tmp_path / "f.json").read_text())
    failing = {c["id"]: c for c in failed["checks"] if not c["passed"]}
    assert failed["failures"] and all("witness" in failing[k] for k in failed["failures"])
    assert main(["run", str(write(tmp_path, SMALL.replace("samples = 6", "samples = x"), "bad.cfg"))]) == 2
    negative = SMALL.replace("[fiber]\nmodel = FLAT_DISK_C", "[fiber]\nmodel = FLAT_DISK_C\nc0 = -3")
    assert main(["run", str(write(tmp_path, negative, "neg.cfg"))]) == 2
    assert "build error" in capsys.readouterr().err
    assert main(["run", str(write(tmp_path, SMALL + "colour = red\n", "kw.cfg"))]) == 2


def test_cli_failure_flags_witness_row(tmp_path):
    assert main(["run", str(write(tmp_path, SMALL)), "--tol-scale", "1e-30", "--report", str(tmp_path / "r.json"),
                 "--csv", str(tmp_path / "csv")]) == 1
    with (tmp_path / "csv" / "summary.csv").open() as fh:
        summary = {r["check_id"]: r for r in csv.DictReader(fh)}
    failing = [k for k, r in summary.items() if r["passed"] == "0"]
    assert failing
    with (tmp_path / "csv" / check_filename(failing[0])).open() as fh:
        rows = list(csv.DictReader(fh))
    flagged = [r for r in rows if r["witness"] == "1"]
    assert len(flagged) == 1
    assert float(flagged[0]["residual"]) == max(float(r["residual"]) for r in rows)


def test_list_commands(capsys):
    assert main(["list-models"]) == 0
    assert "ROUND_S2" in capsys.readouterr().out.split()
    assert main(["list-scenarios"]) == 0
    assert "csck_s2" in capsys.readouterr().out
