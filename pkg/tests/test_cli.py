import csv
import io
import json
import subprocess
import sys

import numpy as np
import pytest

from multibinom.cli import main

SPREAD_MARKET = {
    "growth_factor": 1.02,
    "num_steps": 2,
    "assets": [
        {"initial_price": 100, "up_ratio": 1.2, "down_ratio": 0.8},
        {"initial_price": 90, "up_ratio": 1.15, "down_ratio": 0.9},
    ],
}
CALL = {"kind": "basket_call", "weights": [0.5, 0.5], "strike": 100}
SPREAD = {"kind": "spread", "weights": [0.5, 0.5], "strikes": [100, 110]}


def small_b_market(n=2):
    # b = (0.3, 0.2, 0.1) with R = 1
    return {"growth_factor": 1.0, "num_steps": n, "assets": [
        {"initial_price": 100, "up_ratio": 1.0 + 0.7 * 0.3, "down_ratio": 1.0 - 0.3 * 0.3},
        {"initial_price": 90, "up_ratio": 1.0 + 0.8 * 0.3, "down_ratio": 1.0 - 0.2 * 0.3},
        {"initial_price": 80, "up_ratio": 1.0 + 0.9 * 0.3, "down_ratio": 1.0 - 0.1 * 0.3},
    ]}


def run(tmp_path, capsys, cfg, *args):
    path = tmp_path / "run.json"
    path.write_text(json.dumps(cfg))
    code = main([args[0], "--config", str(path), *args[1:]])
    out, err = capsys.readouterr()
    return code, out, err


def rows(text):
    return list(csv.DictReader(io.StringIO(text)))


def test_crr_all_methods_give_a_point(tmp_path, capsys):
    market = {"growth_factor": 1.01, "num_steps": 3,
              "assets": [{"initial_price": 100, "up_ratio": 1.1, "down_ratio": 0.9}]}
    for method in ("lp", "closed", "auto"):
        code, out, _ = run(tmp_path, capsys, {"market": market, "payoff": {
            "kind": "basket_put", "weights": [1.0], "strike": 100}}, "price", "--method", method,
            "--nodes", "all")
        assert code == 0
        table = rows(out)
        assert len(table) == 1 + 2 + 3 + 4
        assert all(float(r["c_min"]) == pytest.approx(float(r["c_max"]), abs=1e-10) for r in table)


def test_spread_auto_uses_lp(tmp_path, capsys):
    code, out, _ = run(tmp_path, capsys, {"market": SPREAD_MARKET, "payoff": SPREAD}, "price")
    assert code == 0
    table = rows(out)
    assert out.splitlines()[0] == "level,up_counts,c_min,c_max,method_used"
    assert table == [{"level": "0", "up_counts": "0-0", "c_min": "2.60217103998",
                      "c_max": "4.51047553825", "method_used": "lp"}]


def test_both_methods_agree_for_basket_call(tmp_path, capsys):
    cfg = {"market": dict(SPREAD_MARKET, num_steps=4), "payoff": CALL}
    code, out, _ = run(tmp_path, capsys, cfg, "price", "--method", "both", "--nodes", "all")
    assert code == 0
    diffs = [r for r in rows(out) if r["method_used"] == "absdiff"]
    assert len(diffs) == sum((k + 1) ** 2 for k in range(5))
    assert max(max(float(r["c_min"]), float(r["c_max"])) for r in diffs) <= 1e-8


def test_path_dependent_rows_carry_prefix(tmp_path, capsys):
    cfg = {"market": SPREAD_MARKET, "payoff": {"kind": "asian_call", "weights": [0.5, 0.5], "strike": 95}}
    code, out, _ = run(tmp_path, capsys, cfg, "price", "--method", "both", "--nodes", "all")
    assert code == 0
    table = rows(out)
    assert list(table[0]) == ["level", "up_counts", "c_min", "c_max", "method_used", "prefix"]
    lp = [r for r in table if r["method_used"] == "lp"]
    assert len(lp) == 1 + 4 + 16
    assert lp[4]["prefix"] == "4" and lp[4]["up_counts"] == "0-0"
    assert lp[8]["prefix"] == "1-4" and lp[8]["up_counts"] == "1-1"


def test_closed_refuses_uncertified(tmp_path, capsys):
    code, out, err = run(tmp_path, capsys, {"market": SPREAD_MARKET, "payoff": SPREAD}, "price",
                         "--method", "closed")
    assert code == 2 and out == "" and "Neither" in err
    # a certified claim whose lower measure is not a product also fails fast
    big_b = dict(small_b_market(), growth_factor=1.0)
    big_b["assets"] = [dict(a, down_ratio=0.75) for a in big_b["assets"]]
    code, out, err = run(tmp_path, capsys, {"market": big_b, "payoff": {
        "kind": "basket_call", "weights": [0.3, 0.3, 0.4], "strike": 90}}, "price", "--method", "closed")
    assert code == 2 and out == ""
    code, out, _ = run(tmp_path, capsys, {"market": big_b, "payoff": {
        "kind": "basket_call", "weights": [0.3, 0.3, 0.4], "strike": 90}}, "price")
    assert code == 0 and rows(out)[0]["method_used"] == "lp"


def test_config_errors(tmp_path, capsys):
    code, out, err = run(tmp_path, capsys, {"market": SPREAD_MARKET}, "price")
    assert code == 1 and out == ""
    bad = dict(SPREAD_MARKET, growth_factor=1.3)
    assert run(tmp_path, capsys, {"market": bad, "payoff": CALL}, "price")[0] == 1
    assert run(tmp_path, capsys, {"market": SPREAD_MARKET, "payoff": CALL, "method": "magic"}, "price")[0] == 1
    assert main(["price", "--config", str(tmp_path / "missing.json")]) == 1


def test_budget_exceeded(tmp_path, capsys):
    cfg = {"market": dict(SPREAD_MARKET, num_steps=13),
           "payoff": {"kind": "asian_call", "weights": [0.5, 0.5], "strike": 95}}
    code, out, err = run(tmp_path, capsys, cfg, "price", "--method", "lp")
    assert code == 3 and out == "" and "budget" in err
    code, out, _ = run(tmp_path, capsys, {"market": small_b_market(1), "budgets": {"max_vertices": 3}},
                       "vertices")
    assert code == 3 and out == ""


def test_output_is_deterministic(tmp_path, capsys):
    cfg = {"market": dict(SPREAD_MARKET, num_steps=3), "payoff": CALL, "nodes": "all", "method": "both"}
    first = run(tmp_path, capsys, cfg, "price")[1]
    second = run(tmp_path, capsys, cfg, "price", "--threads", "2")[1]
    assert first == second


def test_certify_reports(tmp_path, capsys):
    code, out, _ = run(tmp_path, capsys, {"market": SPREAD_MARKET, "payoff": CALL}, "certify")
    assert code == 0 and out.splitlines()[0] == "Supermodular"
    code, out, _ = run(tmp_path, capsys, {"market": SPREAD_MARKET, "payoff": SPREAD}, "certify")
    lines = out.splitlines()
    assert lines[0] == "Neither"
    assert "other_up_counts=1-1" in lines and "fibre=10,10,7.5125,0" in lines
    assert "S={0}" in lines and "T={1}" in lines
    const = {"kind": "table_terminal", "values": [1.0] * 9}
    assert run(tmp_path, capsys, {"market": SPREAD_MARKET, "payoff": const}, "certify")[1] == "Modular\n"


def test_vertices(tmp_path, capsys):
    code, out, _ = run(tmp_path, capsys, {"market": dict(SPREAD_MARKET, num_steps=1)}, "vertices")
    table = rows(out)
    assert code == 0 and len(table) == 2
    assert [r["flag"] for r in table] == ["lower", "upper"]
    assert [float(table[1][f"p{j}"]) for j in range(1, 5)] == pytest.approx([0.48, 0.07, 0, 0.45])
    one = {"growth_factor": 1.0, "num_steps": 1,
           "assets": [{"initial_price": 1, "up_ratio": 1.2, "down_ratio": 0.9}]}
    table = rows(run(tmp_path, capsys, {"market": one}, "vertices")[1])
    assert len(table) == 1 and table[0]["flag"] == "upper+lower"
    table = rows(run(tmp_path, capsys, {"market": small_b_market(1)}, "vertices")[1])
    flags = [r["flag"] for r in table]
    assert flags.count("upper") == 1 and flags.count("lower") == 1
    for r in table:
        p = np.array([float(r[f"p{j}"]) for j in range(1, 9)])
        assert p.sum() == pytest.approx(1.0)


def test_table_payoff_from_csv(tmp_path, capsys):
    from multibinom.market_core import MarketParams, level_grid
    from multibinom.payoffs import PayoffFn

    params = MarketParams.from_mapping(SPREAD_MARKET)
    ups = level_grid(2, 2)
    values = PayoffFn.basket_call([0.5, 0.5], 100).terminal_values(params, ups)
    with open(tmp_path / "table.csv", "w") as fh:
        fh.write("up_counts,value\n")
        for u, v in reversed(list(zip(ups.tolist(), values))):
            fh.write(f"{u[0]}-{u[1]},{float(v)!r}\n")
    table_cfg = {"market": SPREAD_MARKET, "payoff": {"kind": "table_terminal", "csv": "table.csv"},
                 "nodes": "all", "method": "lp"}
    via_table = run(tmp_path, capsys, table_cfg, "price")[1]
    direct = run(tmp_path, capsys, {"market": SPREAD_MARKET, "payoff": CALL, "nodes": "all",
                                    "method": "lp"}, "price")[1]
    assert via_table == direct


def test_module_entry_point(tmp_path):
    path = tmp_path / "run.json"
    path.write_text(json.dumps({"market": SPREAD_MARKET, "payoff": CALL}))
    res = subprocess.run([sys.executable, "-m", "multibinom", "price", "--config", str(path)],
                         capture_output=True, text=True, check=True)
    assert res.stdout.splitlines()[1].endswith(",closed")
