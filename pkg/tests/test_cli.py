import csv
import hashlib

import numpy as np
import pytest

from explogistic import cli
from explogistic.data import read_weighted_csv, synthetic_ciss_tables, write_table
from explogistic.errors import QuadratureError
from explogistic.imputation import n_new, read_manifest
from explogistic.inference import read_draws_csv

from conftest import TRUTH

FAST = ["--chains", "2", "--warmup", "200", "--draws", "200"]


def _digest(path):
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _rows(path):
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


@pytest.fixture
def sim_csv(tmp_path):
    out = tmp_path / "sim.csv"
    assert cli.main(["simulate", "--out", str(out)]) == 0
    return out


@pytest.fixture
def draws_csv(tmp_path, sim_csv):
    out = tmp_path / "draws.csv"
    code = cli.main(["fit", "--data", str(sim_csv), *FAST, "--out-draws", str(out),
                     "--out-summary", str(tmp_path / "summary.csv")])
    assert code == 0
    return out


def test_simulate_defaults(sim_csv):
    rows = _rows(sim_csv)
    assert len(rows) == 250
    assert list(rows[0]) == ["value", "weight"]


def test_simulate_is_deterministic(tmp_path, sim_csv):
    again = tmp_path / "again.csv"
    cli.main(["simulate", "--out", str(again)])
    assert _digest(again) == _digest(sim_csv)


def test_simulate_usage_errors(tmp_path, capsys):
    out = str(tmp_path / "x.csv")
    assert cli.main(["simulate", "--n-pool", "10", "--n-obs", "11", "--out", out]) == 1
    assert cli.main(["simulate", "--lambda", "-1", "--out", out]) == 1
    assert cli.main(["simulate"]) == 1
    assert cli.main([]) == 1
    assert "error" in capsys.readouterr().err


def test_fit_defaults_cover_truth(tmp_path, sim_csv):
    summary = tmp_path / "summary.csv"
    code = cli.main(["fit", "--data", str(sim_csv), "--out-draws", str(tmp_path / "d.csv"),
                     "--out-summary", str(summary)])
    assert code == 0
    for row, truth in zip(_rows(summary), TRUTH):
        assert float(row["q2.5"]) <= truth <= float(row["q97.5"])


def test_fit_writes_draws(draws_csv):
    post = read_draws_csv(draws_csv)
    assert len(post) == 400
    assert _rows(draws_csv)[0].keys() == {"chain", "iter", "lambda", "mu_bias", "sigma_bias"}


def test_fit_prior_presets(tmp_path, sim_csv, monkeypatch):
    seen = []
    real = cli.mcmc_fit

    def spy(data, prior, cfg):
        seen.append(prior)
        return real(data, prior, cfg)

    monkeypatch.setattr(cli, "mcmc_fit", spy)
    for preset in ("eq4", "listing6"):
        cli.main(["fit", "--data", str(sim_csv), *FAST, "--prior-preset", preset,
                  "--out-draws", str(tmp_path / "d.csv"), "--out-summary", str(tmp_path / "s.csv")])
    assert seen[0].scale == (10.0, 10.0, 10.0)
    assert seen[1].scale == (5.0, 5.0, 1.0)


def test_fit_usage_and_data_errors(tmp_path, sim_csv):
    assert cli.main(["fit"]) == 1
    assert cli.main(["fit", "--data", str(sim_csv), "--chains", "1"]) == 1
    assert cli.main(["fit", "--data", str(sim_csv), "--prior-preset", "nope"]) == 1
    assert cli.main(["fit", "--data", str(tmp_path / "missing.csv")]) == 2
    bad = tmp_path / "bad.csv"
    bad.write_text("value,weight\n1.0,0\n", encoding="utf-8")
    assert cli.main(["fit", "--data", str(bad)]) == 2


def test_fit_warns_but_succeeds(tmp_path, sim_csv, capsys):
    code = cli.main(["fit", "--data", str(sim_csv), "--chains", "2", "--warmup", "0",
                     "--draws", "20", "--out-draws", str(tmp_path / "d.csv"),
                     "--out-summary", str(tmp_path / "s.csv")])
    assert code == 0
    assert "warning: poor convergence" in capsys.readouterr().err


def test_numerical_failure_exit_code(tmp_path, sim_csv, monkeypatch):
    def boom(*a, **k):
        raise QuadratureError("did not converge", 0.0, 1.0)

    monkeypatch.setattr(cli, "mcmc_fit", boom)
    assert cli.main(["fit", "--data", str(sim_csv), "--out-draws", str(tmp_path / "d.csv")]) == 3


def test_impute_multiple(tmp_path, sim_csv, draws_csv):
    prefix = tmp_path / "imp" / "rep"
    code = cli.main(["impute", "--data", str(sim_csv), "--draws", str(draws_csv),
                     "--out-prefix", str(prefix)])
    assert code == 0
    man = read_manifest(f"{prefix}_manifest.txt")
    assert man["n_datasets"] == "5"
    for i in range(1, 6):
        rows = _rows(man[f"dataset.{i}.file"])
        n = int(man[f"dataset.{i}.n_new"])
        assert n == n_new(250, float(man[f"dataset.{i}.k"]))
        assert sum(r["origin"] == "imputed" for r in rows) == n
        assert len(rows) == 250 + n


def test_impute_average(tmp_path, sim_csv, draws_csv):
    prefix = tmp_path / "avg"
    code = cli.main(["impute", "--data", str(sim_csv), "--draws", str(draws_csv),
                     "--mode", "average", "--out-prefix", str(prefix)])
    assert code == 0
    assert sorted(p.name for p in tmp_path.glob("avg*")) == ["avg_average.csv", "avg_manifest.txt"]
    assert read_manifest(f"{prefix}_manifest.txt")["dataset.1.draw_id"] == "-1"


def test_impute_errors(tmp_path, sim_csv, draws_csv):
    bad = tmp_path / "bad_draws.csv"
    bad.write_text("chain,iter,lambda\n0,0,0.5\n", encoding="utf-8")
    prefix = str(tmp_path / "x")
    assert cli.main(["impute", "--data", str(sim_csv), "--draws", str(bad), "--out-prefix", prefix]) == 2
    assert cli.main(["impute", "--data", str(sim_csv), "--draws", str(draws_csv),
                     "--m", "100000", "--out-prefix", prefix]) == 1


def test_inputs_are_not_modified(tmp_path, sim_csv, draws_csv):
    before = (_digest(sim_csv), _digest(draws_csv))
    cli.main(["impute", "--data", str(sim_csv), "--draws", str(draws_csv),
              "--out-prefix", str(tmp_path / "r")])
    cli.main(["ppc", "--draws", str(draws_csv), "--data", str(sim_csv), "--out", str(tmp_path / "p.csv")])
    assert (_digest(sim_csv), _digest(draws_csv)) == before


def test_ppc_tables(tmp_path, sim_csv, draws_csv):
    out = tmp_path / "ppc.csv"
    code = cli.main(["ppc", "--draws", str(draws_csv), "--data", str(sim_csv),
                     "--curves", "3", "--grid-points", "64", "--out", str(out)])
    assert code == 0
    rows = _rows(out)
    assert len(rows) == 3 * 64
    assert list(rows[0]) == ["draw_id", "x", "explogistic_pdf", "exponential_pdf", "logistic_cdf"]
    hist = _rows(tmp_path / "ppc_hist.csv")
    assert list(hist[0]) == ["bin_left", "bin_right", "weighted_density"]


def test_ppc_constant_draws_deterministic(tmp_path):
    draws = tmp_path / "const.csv"
    draws.write_text("chain,iter,lambda,mu_bias,sigma_bias\n"
                     "0,0,0.5,2.0,0.5\n0,1,0.5,2.0,0.5\n1,0,0.5,2.0,0.5\n1,1,0.5,2.0,0.5\n",
                     encoding="utf-8")
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert cli.main(["ppc", "--draws", str(draws), "--curves", "1", "--out", str(a)]) == 0
    assert cli.main(["ppc", "--draws", str(draws), "--curves", "1", "--out", str(b)]) == 0
    assert _digest(a) == _digest(b)
    assert not (tmp_path / "a_hist.csv").exists()


def test_ppc_usage_errors(tmp_path, draws_csv):
    assert cli.main(["ppc", "--out", str(tmp_path / "p.csv")]) == 1
    assert cli.main(["ppc", "--draws", str(draws_csv), "--curves", "100000",
                     "--out", str(tmp_path / "p.csv")]) == 1


def test_ciss_filter(tmp_path, capsys):
    gv, occ = synthetic_ciss_tables(np.random.default_rng(23))
    write_table(tmp_path / "gv.csv", gv)
    write_table(tmp_path / "occ.csv", occ)
    out = tmp_path / "ciss.csv"
    args = ["ciss-filter", "--gv", str(tmp_path / "gv.csv"), "--occ", str(tmp_path / "occ.csv")]
    assert cli.main([*args, "--out", str(out)]) == 0
    sample = read_weighted_csv(out, "value", "weight")
    assert len(sample) == 572
    assert sample.n_effective == pytest.approx(1.2e6)
    assert "kept" in capsys.readouterr().err
    assert cli.main([*args, "--strict-case", "--out", str(out)]) == 0
    assert len(_rows(out)) == 571


def test_ciss_filter_missing_columns(tmp_path):
    write_table(tmp_path / "gv.csv", [{"CASEID": "1", "VEHNO": "1"}])
    write_table(tmp_path / "occ.csv", [{"CASEID": "1", "VEHNO": "1", "MAIS": "0"}])
    code = cli.main(["ciss-filter", "--gv", str(tmp_path / "gv.csv"), "--occ",
                     str(tmp_path / "occ.csv"), "--out", str(tmp_path / "o.csv")])
    assert code == 2
