import json

import numpy as np
import pytest

from activity_hmm import cli, report
from activity_hmm.series import load_series


@pytest.fixture(scope="module")
def series_csv(tmp_path_factory):
    out = tmp_path_factory.mktemp("sim")
    assert cli.main(["simulate", "--days", "3000", "--seed", "1", "--out", str(out)]) == 0
    return out / "series.csv"


def test_simulate_bundle(tmp_path):
    assert cli.main(["simulate", "--days", "400", "--seed", "5", "--out", str(tmp_path)]) == 0
    gen = json.loads((tmp_path / "generator.json").read_text())
    assert gen["seed"] == 5 and gen["model"]["type"] == "HmmModel"
    assert load_series(tmp_path / "series.csv").n_days <= 400
    man = json.loads((tmp_path / "manifest.json").read_text())
    assert {"config", "config_hash", "inputs", "seed", "versions", "artifacts"} <= set(man)
    assert set(man["artifacts"]) == {"series.csv", "generator.json", "states.csv"}


def test_simulate_equal_rates_give_marginal_rate(tmp_path):
    params = json.dumps({"gamma0": 0.2, "gamma1": 0.2})
    assert cli.main(["simulate", "--days", "1000000", "--params", params, "--out", str(tmp_path)]) == 0
    counts = np.loadtxt(tmp_path / "series.csv", delimiter=",", skiprows=1, usecols=1)
    assert (counts > 0).mean() == pytest.approx(0.2, rel=0.01)


def test_simulate_sehm_without_excitation(tmp_path):
    params = json.dumps({"alpha": 0.0, "b": 0.3})
    assert cli.main(["simulate", "--generator", "sehm", "--days", "100000", "--params", params,
                     "--out", str(tmp_path)]) == 0
    counts = np.loadtxt(tmp_path / "series.csv", delimiter=",", skiprows=1, usecols=1)
    ind = (counts > 0) - (counts > 0).mean()
    rho = np.dot(ind[:-1], ind[1:]) / np.dot(ind, ind)
    assert abs(rho) < 4 / np.sqrt(ind.size)


def test_classify_two_deltas(series_csv, tmp_path):
    assert cli.main(["classify", "--input", str(series_csv), "--delta", "10", "15", "--out", str(tmp_path)]) == 0
    rows = report.read_csv(tmp_path / "summary.csv")
    assert [r["delta"] for r in rows] == [10, 15]
    assert rows[0]["f"] == pytest.approx(rows[0]["N_spurt"] * 10 / 3000)
    states = report.read_csv(tmp_path / "states_d15.csv")
    assert len(states) == 200 and set(states[0]) >= {"window", "start_day", "X", "Y", "state", "p_active"}


def test_classify_all_zero(tmp_path, capsys):
    src = tmp_path / "zero.csv"
    src.write_text("date,count\n2000-01-01,0\n2000-04-09,0\n")
    assert cli.main(["classify", "--input", str(src), "--out", str(tmp_path / "o")]) == 0
    (row,) = report.read_csv(tmp_path / "o" / "summary.csv")
    assert row["N_spurt"] == 0 and "degenerate" in row["warnings"]
    assert "degenerate" in capsys.readouterr().err


def test_json_format(series_csv, tmp_path):
    assert cli.main(["classify", "--input", str(series_csv), "--format", "json", "--out", str(tmp_path)]) == 0
    rows = json.loads((tmp_path / "summary.json").read_text())
    assert rows[0]["delta"] == 15


def test_diagnose_without_bands(series_csv, tmp_path):
    assert cli.main(["diagnose", "--input", str(series_csv), "--resamples", "0", "--h-max", "10",
                     "--out", str(tmp_path)]) == 0
    rows = report.read_csv(tmp_path / "ripley_full.csv")
    assert len(rows) == 10 and all(r["ci_lo"] is None for r in rows)
    ks = json.loads((tmp_path / "ks.json").read_text())
    for res in ks.values():
        assert {"n", "statistic", "critical", "p_value", "alpha"} <= set(res)
    aic = report.read_csv(tmp_path / "aic.csv")
    assert len(aic) == 12 and {"obs_0", "exp_>4", "aic"} <= set(aic[0])


def test_diagnose_complete_randomness(tmp_path):
    rng = np.random.default_rng(0)
    days = np.sort(rng.choice(5000, 500, replace=False))
    src = tmp_path / "csr.csv"
    counts = np.zeros(5000, dtype=int)
    counts[days] = 1
    from activity_hmm.series import EventSeries, write_csv
    write_csv(EventSeries("2000-01-01", counts), src)
    assert cli.main(["diagnose", "--input", str(src), "--resamples", "300", "--out", str(tmp_path / "o")]) == 0
    rows = [r for r in report.read_csv(tmp_path / "o" / "ripley_full.csv") if r["h"] >= 5]
    inside = [r["ci_lo"] - r["2h"] <= 0 <= r["ci_hi"] - r["2h"] for r in rows]
    assert np.mean(inside) >= 0.9


def test_compare_baseline_only(series_csv, tmp_path):
    assert cli.main(["compare", "--input", str(series_csv), "--horizons", "100", "--estimators", "baseline",
                     "--out", str(tmp_path)]) == 0
    (row,) = report.read_csv(tmp_path / "comparison.csv")
    assert set(row) == {"n", "aic_baseline", "smape_baseline"} and row["smape_baseline"] > 0


def test_tables_round_trip_losslessly(series_csv, tmp_path):
    assert cli.main(["compare", "--input", str(series_csv), "--horizons", "100", "300",
                     "--estimators", "hmm", "baseline", "--out", str(tmp_path)]) == 0
    for name in ("comparison.csv", "trace.csv"):
        rows = report.read_csv(tmp_path / name)
        assert report.csv_text(rows) == (tmp_path / name).read_text()
    models = json.loads((tmp_path / "models.json").read_text())
    assert report.dumps(models) == (tmp_path / "models.json").read_text()


def test_robustness_and_merge(series_csv, tmp_path):
    extra = tmp_path / "extra.csv"
    extra.write_text("date\n2000-01-05\n2001-03-03\n2001-04-04\n")
    assert cli.main(["merge", "--input", str(series_csv), "--extra", str(extra), "--out", str(tmp_path / "m")]) == 0
    steps = report.read_csv(tmp_path / "m" / "steps.csv")
    assert [r["step"] for r in steps] == [1, 2]
    assert load_series(tmp_path / "m" / "merged_step2.csv").total == load_series(series_csv).total + 3
    assert cli.main(["robustness", "--input", str(series_csv), "--extra", str(extra),
                     "--out", str(tmp_path / "r")]) == 0
    rows = report.read_csv(tmp_path / "r" / "robustness.csv")
    assert len(rows) == 2 and all(0 <= r["frac_changes"] <= 1 for r in rows)


def test_exit_codes(series_csv, tmp_path, capsys):
    out = str(tmp_path / "o")
    assert cli.main(["classify", "--input", str(tmp_path / "missing.csv"), "--out", out]) == 3
    bad = tmp_path / "bad.csv"
    bad.write_text("date,count\n2000-01-01,x\n")
    assert cli.main(["classify", "--input", str(bad), "--out", out]) == 3
    assert cli.main(["classify", "--input", str(series_csv), "--alpha", "1.5", "--out", out]) == 2
    assert cli.main(["classify", "--out", out]) == 2
    assert cli.main(["simulate", "--params", "{not json", "--out", out]) == 2
    assert cli.main(["simulate", "--params", '{"gamma0": 2}', "--out", out]) == 2
    assert cli.main(["compare", "--input", str(series_csv), "--horizons", "100000", "--out", out]) == 3
    with pytest.raises(SystemExit) as exc:
        cli.main(["classify", "--family", "lognormal"])
    assert exc.value.code == 2


def test_nonconvergence_keeps_outputs(series_csv, tmp_path):
    assert cli.main(["classify", "--input", str(series_csv), "--max-iter", "2", "--out", str(tmp_path)]) == 4
    assert (tmp_path / "summary.csv").exists() and (tmp_path / "manifest.json").exists()


def test_manifest_tracks_config_and_input(series_csv, tmp_path):
    cli.main(["classify", "--input", str(series_csv), "--out", str(tmp_path / "a")])
    cli.main(["classify", "--input", str(series_csv), "--seed", "9", "--out", str(tmp_path / "b")])
    a = json.loads((tmp_path / "a" / "manifest.json").read_text())
    b = json.loads((tmp_path / "b" / "manifest.json").read_text())
    assert a["inputs"] == b["inputs"] and a["config_hash"] != b["config_hash"]
    assert a["inputs"]["series.csv"] == report.sha256_file(series_csv)
