import csv
import io
import json
import math
import subprocess
import sys

import pytest

from voltarget import bs_price
from voltarget.cli import (
    CONVERGENCE_HEADER,
    GREEKS_HEADER,
    MC_HEADER,
    PATH_HEADER,
    PRICE_HEADER,
    main,
)

BASE = {
    "market": {"r": 0.05, "t0": 0.0, "T": 1.0},
    "strategy": {"sigma_hat": 0.2, "leverage_cap": 2.0},
    "option": {"strike": 10.0, "kind": "call"},
    "portfolio": {"v": 12.0, "s": 10.0, "b": 1.0},
    "sigma": 0.08,
}
HESTON = {"kappa": 0.6067, "theta": 0.2207, "xi": 0.2928, "rho": -0.75, "nu0": 0.2154, "mu": 0.0824, "s0": 100.0}


def run(*argv):
    out, err = io.StringIO(), io.StringIO()
    code = main(list(argv), out, err)
    return code, out.getvalue(), err.getvalue()


def rows(text):
    return list(csv.DictReader(io.StringIO(text)))


@pytest.fixture
def scenario(tmp_path):
    def write(**extra):
        path = tmp_path / f"scenario_{len(list(tmp_path.iterdir()))}.json"
        path.write_text(json.dumps({**BASE, **extra}))
        return str(path)

    return write


class TestPrice:
    def test_vts(self, scenario):
        code, out, _ = run("price", "--scenario", scenario())
        assert code == 0
        price = float(out.split("price=")[1].split()[0])
        assert price == pytest.approx(2.6169043946847315, rel=1e-12)

    def test_mlvts_cap_binding(self, scenario, tmp_path):
        target = tmp_path / "out" / "price.csv"
        code, _, _ = run("price", "--scenario", scenario(), "--strategy", "mlvts", "--out", str(target))
        assert code == 0
        (row,) = rows(target.read_text())
        assert list(row) == list(PRICE_HEADER)
        assert float(row["price"]) == pytest.approx(bs_price(12, 10, 0.05, 0.16, 1.0).price, rel=1e-12)

    def test_put_override(self, scenario):
        _, call_out, _ = run("price", "--scenario", scenario())
        _, put_out, _ = run("price", "--scenario", scenario(), "--option", "put")
        c = float(call_out.split("price=")[1].split()[0])
        p = float(put_out.split("price=")[1].split()[0])
        assert c - p == pytest.approx(12 - 10 * math.exp(-0.05), abs=1e-12)

    def test_sweep_rows(self, scenario):
        code, out, _ = run("price", "--scenario", scenario(), "--sweep", "strike:5:15:11")
        assert code == 0
        table = rows(out)
        assert [float(r["strike"]) for r in table] == [5.0 + i for i in range(11)]
        prices = [float(r["price"]) for r in table]
        assert prices == sorted(prices, reverse=True)

    def test_floats_round_trip(self, scenario):
        _, out, _ = run("price", "--scenario", scenario(), "--sweep", "v:11:13:3")
        assert float(rows(out)[1]["price"]) == bs_price(12, 10, 0.05, 0.2, 1.0).price


class TestErrors:
    def test_malformed_json(self, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text('{"market": {"r": 0.05,,}')
        code, out, err = run("price", "--scenario", str(bad))
        assert code == 2 and out == ""
        assert "line 1" in err

    def test_missing_file(self, tmp_path):
        assert run("price", "--scenario", str(tmp_path / "nope.json"))[0] == 2

    def test_unknown_key(self, scenario):
        code, _, err = run("price", "--scenario", scenario(extra=1))
        assert code == 2 and "extra" in err

    def test_invalid_value(self, scenario):
        code, _, err = run("price", "--scenario", scenario(market={"r": 0.05, "t0": 1.0, "T": 0.5}))
        assert code == 2 and "T >= t0" in err

    def test_bad_sweep(self, scenario):
        assert run("price", "--scenario", scenario(), "--sweep", "kappa:1:2:3")[0] == 2
        assert run("price", "--scenario", scenario(), "--sweep", "v:1:2")[0] == 2

    def test_missing_heston(self, scenario):
        code, _, err = run("simulate", "--scenario", scenario(), "--steps", "10")
        assert code == 2 and "heston" in err

    def test_zero_paths(self, scenario):
        code, _, err = run("simulate", "--scenario", scenario(heston=HESTON), "--steps", "10", "--paths", "0")
        assert code == 2 and "n_paths" in err

    def test_mlvts_without_cap(self, scenario):
        code, _, _ = run("price", "--scenario", scenario(strategy={"sigma_hat": 0.2}), "--strategy", "mlvts")
        assert code == 2

    def test_gamma_at_expiry(self, scenario):
        code, _, err = run("greeks", "--scenario", scenario(market={"r": 0.05, "t0": 1.0, "T": 1.0}))
        assert code == 1 and "numerical" in err


class TestGreeks:
    def test_vts_vega_column_zero(self, scenario):
        code, out, _ = run("greeks", "--scenario", scenario(), "--sweep", "sigma:0.05:0.5:10")
        assert code == 0
        table = rows(out)
        assert list(table[0]) == list(GREEKS_HEADER)
        assert all(float(r["vega"]) == 0.0 for r in table)
        assert {r["branch"] for r in table} == {"plain_vts"}

    def test_capped_vega_by_branch(self, scenario):
        _, out, _ = run("greeks", "--scenario", scenario(), "--strategy", "mlvts", "--sweep", "sigma:0.02:0.4:39")
        for r in rows(out):
            sigma, vega = float(r["sigma"]), float(r["vega"])
            if sigma <= 0.1:
                assert vega > 0 and r["branch"] == "cap_binding"
            else:
                assert vega == 0.0 and r["branch"] == "cap_slack"

    def test_vega_peaks_near_argmax(self, scenario):
        _, out, _ = run("greeks", "--scenario", scenario(), "--strategy", "mlvts", "--sweep", "v:5:15:1001")
        table = rows(out)
        best = max(table, key=lambda r: float(r["vega"]))
        assert float(best["v"]) == pytest.approx(10 * math.exp(-(0.05 - 0.0128)), abs=0.011)

    def test_sigma_flag_overrides(self, scenario):
        _, out, _ = run("greeks", "--scenario", scenario(), "--strategy", "mlvts", "--sigma", "0.3")
        (row,) = rows(out)
        assert float(row["sigma"]) == 0.3 and row["branch"] == "cap_slack"


class TestSimulate:
    def test_single_path_stdout(self, scenario):
        sc = scenario(heston=HESTON)
        code, out, err = run("simulate", "--scenario", sc, "--steps", "100", "--seed", "7", "--strategy", "mlvts")
        assert code == 0
        table = rows(out)
        assert list(table[0]) == list(PATH_HEADER)
        assert len(table) == 101
        assert float(table[0]["V"]) == 12.0 and float(table[0]["S"]) == 100.0
        assert "variance_truncations=" in err

    def test_deterministic(self, scenario):
        sc = scenario(heston=HESTON)
        first = run("simulate", "--scenario", sc, "--steps", "50", "--seed", "3")[1]
        again = run("simulate", "--scenario", sc, "--steps", "50", "--seed", "3")[1]
        other = run("simulate", "--scenario", sc, "--steps", "50", "--seed", "4")[1]
        assert first == again and first != other

    def test_directory_output(self, scenario, tmp_path):
        sc = scenario(heston=HESTON)
        target = tmp_path / "paths"
        code, _, _ = run("simulate", "--scenario", sc, "--steps", "20", "--paths", "3", "--out", str(target))
        assert code == 0
        assert sorted(p.name for p in target.iterdir()) == [f"path_0000{i}.csv" for i in range(3)]

    def test_many_paths_need_out(self, scenario):
        assert run("simulate", "--scenario", scenario(heston=HESTON), "--steps", "20", "--paths", "3")[0] == 2

    def test_missing_sim(self, scenario):
        assert run("simulate", "--scenario", scenario(heston=HESTON))[0] == 2


class TestMcPrice:
    def test_vts_row(self, scenario):
        sc = scenario(heston=HESTON, portfolio={"v": 100.0, "s": 100.0, "b": 1.0}, option={"strike": 100.0})
        code, out, _ = run("mcprice", "--scenario", sc, "--steps", "100", "--paths", "4000", "--seed", "1")
        assert code == 0
        (row,) = rows(out)
        assert list(row) == list(MC_HEADER)
        assert abs(float(row["z_score"])) < 3
        assert int(row["n_paths"]) == 4000 and int(row["seed"]) == 1

    def test_capped_without_closed_form(self, scenario):
        sc = scenario(heston=HESTON)
        _, out, _ = run("mcprice", "--scenario", sc, "--steps", "20", "--paths", "100", "--strategy", "mlvts")
        (row,) = rows(out)
        assert row["closed_form"] == "" and row["z_score"] == ""

    def test_capped_constant_variance(self, scenario):
        flat = {**HESTON, "xi": 0.0, "theta": 0.0025, "nu0": 0.0025}
        sc = scenario(heston=flat)
        _, out, _ = run("mcprice", "--scenario", sc, "--steps", "50", "--paths", "4000", "--strategy", "mlvts")
        (row,) = rows(out)
        assert float(row["closed_form"]) == pytest.approx(bs_price(12, 10, 0.05, 0.1, 1.0).price, rel=1e-12)
        assert abs(float(row["z_score"])) < 3


class TestConverge:
    def test_table(self, scenario):
        flat = {**HESTON, "xi": 0.0, "theta": 0.16, "nu0": 0.16}
        sc = scenario(heston=flat)
        code, out, _ = run("converge", "--scenario", sc, "--paths", "500", "--ladder", "0.0625,0.03125,0.015625")
        assert code == 0
        lines = out.strip().splitlines()
        assert lines[0] == ",".join(CONVERGENCE_HEADER)
        assert len(lines) == 5
        label, order, halfwidth = lines[-1].split(",")
        assert label == "fitted_order"
        assert 0.2 < float(order) < 0.8 and float(halfwidth) >= 0

    def test_bad_ladder(self, scenario):
        sc = scenario(heston=HESTON)
        assert run("converge", "--scenario", sc, "--ladder", "0.01")[0] == 2
        assert run("converge", "--scenario", sc, "--ladder", "0.5,0.3333333333333333")[0] == 2


def test_module_entry_point(scenario):
    proc = subprocess.run(
        [sys.executable, "-m", "voltarget", "price", "--scenario", scenario()],
        capture_output=True, text=True, check=False,
    )
    assert proc.returncode == 0
    assert proc.stdout.startswith("vts call: price=2.61690439")
