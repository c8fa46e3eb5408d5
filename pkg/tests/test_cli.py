import csv
import io

import pytest

from tetra_aoi.cli import (EXIT_CONFIG, EXIT_FAIL, EXIT_OK, RUN_COLUMNS, VALIDATE_COLUMNS, ValidationPoint,
                           fmt, main, parse_values, validate_point)
from tetra_aoi.scenario import ConfigError


def rows_of(path):
    return list(csv.DictReader(open(path, encoding="utf-8")))


def write_cfg(tmp_path, text, name="c.yaml"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def test_float_format_has_nine_digits():
    assert fmt(1 / 3) == "0.333333333"
    assert fmt(True) == "1" and fmt(None) == "" and fmt(7) == "7"


def test_parse_values():
    assert parse_values("0.1,0.2, 0.5") == [0.1, 0.2, 0.5]
    assert parse_values("0.1:0.5:0.2") == pytest.approx([0.1, 0.3, 0.5])
    assert parse_values("3") == [3]
    for bad in ("", " , ", "0.1:0.5:0"):
        with pytest.raises(ConfigError):
            parse_values(bad)


def test_small_validate_grid_passes(tmp_path, capsys):
    out = tmp_path / "v.csv"
    code = main(["validate", "--deliveries", "200000", "--lambdas", "0.1,0.9", "--alphas", "0.1",
                 "--out", str(out)])
    assert code == EXIT_OK
    rows = rows_of(out)
    assert list(rows[0]) == VALIDATE_COLUMNS
    assert len(rows) == 6 and all(r["status"] == "PASS" for r in rows)
    assert capsys.readouterr().out.splitlines()[-1].startswith("PASS")


def test_alpha_zero_pr_and_prrt_rows_match(tmp_path):
    out = tmp_path / "v.csv"
    main(["validate", "--deliveries", "20000", "--lambdas", "0.3", "--alphas", "0",
          "--disciplines", "PR,PRRT", "--out", str(out)])
    pr, prrt = rows_of(out)
    assert pr["analytic"] == prrt["analytic"]


def test_tiny_run_warns_not_fails():
    row = validate_point(ValidationPoint("PR", 0.5, 1.0, 0.1), deliveries=100, seed=0)
    assert row["status"] == "WARN"


def test_wrong_formula_would_fail(monkeypatch):
    import tetra_aoi.cli as cli
    exact = cli.paoi

    class Off:
        def __init__(self, p):
            self.paoi = 1.1 * exact(p).paoi
    monkeypatch.setattr(cli, "paoi", Off)
    assert main(["validate", "--deliveries", "100000", "--lambdas", "0.5", "--alphas", "0.1",
                 "--disciplines", "NPR"]) == EXIT_FAIL


def test_sweep_csv_is_byte_identical(tmp_path):
    cfg = write_cfg(tmp_path, "n_c: 50\nhorizon_s: 200\nwarmup_s: 20\n")
    outs = []
    for k in range(2):
        out = tmp_path / f"s{k}.csv"
        assert main(["sweep", "--config", cfg, "--values", "0.2,0.6", "--replications", "2",
                     "--seed", "4", "--out", str(out)]) == EXIT_OK
        outs.append(out.read_bytes())
    assert outs[0] == outs[1]
    rows = rows_of(tmp_path / "s0.csv")
    assert list(rows[0]) == RUN_COLUMNS
    assert [(r["value"], r["replication"]) for r in rows] == [("0.2", "0"), ("0.2", "1"), ("0.6", "0"), ("0.6", "1")]
    assert all(r["csv_version"] == "1" for r in rows)


def test_sweep_nested_param(tmp_path):
    cfg = write_cfg(tmp_path, "mode: DMO\nn_c: 0\nhorizon_s: 100\nwarmup_s: 10\n")
    out = tmp_path / "s.csv"
    assert main(["sweep", "--config", cfg, "--param", "dmo.dn316", "--values", "0,2",
                 "--out", str(out)]) == EXIT_OK
    assert [r["value"] for r in rows_of(out)] == ["0", "2"]


@pytest.mark.parametrize("text,argv_extra,key", [
    ("bogus: 1\n", [], "bogus"),
    ("tmo:\n  wt: 99\n", [], "tmo.wt"),
    ("setting: 2\n", [], "setting"),
    ("n_c: 0\n", ["--values", ""], "values"),
])
def test_config_errors_exit_two(tmp_path, capsys, text, argv_extra, key):
    cfg = write_cfg(tmp_path, text)
    argv = ["sweep", "--config", cfg] + (argv_extra or ["--values", "0.1"])
    assert main(argv) == EXIT_CONFIG
    assert key in capsys.readouterr().err


def test_missing_config_file_exit_two(tmp_path):
    assert main(["run", "--config", str(tmp_path / "nope.yaml")]) == EXIT_CONFIG


def test_run_trace_and_header(tmp_path, capsys):
    cfg = write_cfg(tmp_path, "mode: DMO\nsetting: 3\nn_c: 20\nhorizon_s: 100\nwarmup_s: 10\n")
    trace = tmp_path / "t.log"
    out = tmp_path / "r.csv"
    assert main(["run", "--config", cfg, "--trace", str(trace), "--out", str(out)]) == EXIT_OK
    header = capsys.readouterr().out.splitlines()[0]
    assert "gw_discipline=REPLACE2" in header and "fr_discipline=PRRT" in header
    lines = trace.read_text().splitlines()
    assert len(lines) > 100 and any(l.endswith(" DSB") for l in lines)
    assert rows_of(out)[0]["gw_discipline"] == "REPLACE2"


def test_run_csv_is_byte_identical(tmp_path):
    cfg = write_cfg(tmp_path, "n_c: 100\nhorizon_s: 200\nwarmup_s: 20\nlambda_f: 0.5\n")
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    main(["run", "--config", cfg, "--seed", "9", "--out", str(a)])
    main(["run", "--config", cfg, "--seed", "9", "--out", str(b)])
    assert a.read_bytes() == b.read_bytes()


def test_event_budget_exhaustion_is_reported(tmp_path, capsys):
    cfg = write_cfg(tmp_path, "horizon_s: 200\nwarmup_s: 20\n")
    assert main(["run", "--config", cfg, "--max-events", "50"]) == EXIT_FAIL
    assert "EventBudgetExceeded" in capsys.readouterr().err
