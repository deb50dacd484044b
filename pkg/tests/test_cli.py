import csv
import io
import json
import subprocess
import sys

import numpy as np
import pytest

from reslab import cli
from reslab.metric import FiniteMetricSpace, MeasuredFiniteMetricSpace, dump_space
from reslab.network import ResistanceNetwork, dump_network
from reslab.realtree import random_pair, write_excursion_csv


def run(*argv):
    out, err = io.StringIO(), io.StringIO()
    code = cli.run(list(argv), out, err)
    return code, out.getvalue(), err.getvalue()


def csv_body(text):
    lines = text.splitlines()
    assert lines[0].startswith("# ")
    head = json.loads(lines[0][2:])
    return head, list(csv.DictReader(lines[1:]))


def test_exponents_json():
    code, out, _ = run("exponents", "--s0", "1", "--s1", "1", "--theta", "1", "--kappa", "1")
    assert code == 0
    doc = json.loads(out)
    assert doc["result"]["E_sg_A2"] == pytest.approx(1 / 13, abs=1e-15)
    assert doc["header"]["command"] == "exponents"


def test_bad_flag_names_flag():
    code, _, err = run("exponents", "--s0", "1", "--s1", "1", "--theta", "1", "--kappa", "1", "--bogus", "2")
    assert code == 1
    assert "--bogus" in err


def test_bad_value_exits_one():
    code, _, err = run("sg-rate", "--levels", "2..99")
    assert code == 1 and "levels" in err
    code, _, _ = run("btm-quenched", "--alpha", "-3", "--n", "10")
    assert code == 1


def test_out_of_domain_exponents_are_reported():
    code, out, _ = run("exponents", "--s0", "1", "--s1", "1", "--theta", "1", "--kappa", "5")
    assert code == 0
    assert json.loads(out)["result"]["E_sg_A2"].startswith("undefined")


def test_missing_subcommand():
    assert run()[0] == 1


def test_sg_rate_csv_monotone_and_reproducible(tmp_path):
    code, out, _ = run("sg-rate", "--levels", "2..5")
    assert code == 0
    head, rows = csv_body(out)
    assert head["config"]["levels"] == [2, 3, 4, 5]
    errs = [float(r["err"]) for r in rows]
    assert [int(r["n"]) for r in rows] == [2, 3, 4]
    assert all(a > b for a, b in zip(errs, errs[1:]))
    target = tmp_path / "a.csv"
    assert run("sg-rate", "--levels", "2..5", "--output", str(target))[0] == 0
    first = target.read_bytes()
    run("sg-rate", "--levels", "2..5", "--output", str(target))
    assert target.read_bytes() == first == out.encode()


def test_sg_hk_rate_json():
    code, out, _ = run("sg-hk-rate", "--levels", "1..4", "--t", "0.1", "--out", "json")
    assert code == 0
    assert len(json.loads(out)["result"]["rows"]) == 3


def test_noncontiguous_levels():
    assert run("sg-rate", "--levels", "2,4")[0] == 1


def test_btm_quenched_reproducible():
    args = ("btm-quenched", "--alpha", "3", "--n", "20,40", "--seed", "3")
    a = run(*args)
    b = run(*args)
    assert a[0] == 0 and a[1] == b[1]
    _, rows = csv_body(a[1])
    assert list(rows[0]) == ["n", "seed", "cdf_err", "bl_err", "hk_err"]
    assert float(rows[0]["bl_err"]) > 0


def test_btm_annealed_json():
    code, out, _ = run("btm-annealed", "--alpha", "10", "--n", "20,40", "--trials", "2", "--no-bl", "--out", "json")
    assert code == 0
    res = json.loads(out)["result"]
    assert res["theory_sup"] == pytest.approx([1 / 14, 1 / 42])
    assert len(res["rows"]) == 4


def test_resistance_and_spectral_export(tmp_path):
    net = ResistanceNetwork.from_edges(3, [(0, 1, 1.0), (1, 2, 1.0), (0, 2, 1.0)])
    doc = tmp_path / "net.json"
    doc.write_text(dump_network(net, [1.0, 1.0, 1.0]))
    spec = tmp_path / "spec.csv"
    code, out, _ = run("resistance", "--network", str(doc), "--spectral-csv", str(spec))
    assert code == 0
    R = np.array(json.loads(out)["result"]["R"])
    assert R[0, 1] == pytest.approx(2 / 3)
    assert spec.read_text().startswith("eigenvalue,")


def test_resistance_rejects_bad_document(tmp_path):
    doc = tmp_path / "net.json"
    doc.write_text('{"n": 3, "edges": [[0, 1, 1.0]]}')
    code, _, err = run("resistance", "--network", str(doc))
    assert code == 1 and "disconnected" in err
    assert run("resistance", "--network", str(tmp_path / "missing.json"))[0] == 1


def test_bl_dist(tmp_path):
    space = FiniteMetricSpace(["a", "b"], [[0, 1], [1, 0]])
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    a.write_text(dump_space(MeasuredFiniteMetricSpace(space, [1, 0])))
    b.write_text(dump_space(MeasuredFiniteMetricSpace(space, [0, 1])))
    code, out, _ = run("bl-dist", "--space", str(a), "--other", str(b))
    assert code == 0
    assert json.loads(out)["result"]["bl"] == pytest.approx(2 / 3, abs=1e-12)


def test_checks_pass():
    code, out, _ = run("green-check", "--graphs", "10")
    assert code == 0
    assert all(v["pass"] for v in json.loads(out)["result"].values())
    assert run("resolvent-check", "--graphs", "10")[0] == 0


def test_invariants_command():
    code, out, _ = run("invariants", "--graphs", "5", "--spaces", "10")
    assert code == 0
    assert set(json.loads(out)["result"]) >= {"green", "ball_inequality", "mcshane"}


def test_failed_check_exits_two(monkeypatch):
    monkeypatch.setitem(cli.NETWORK_CHECKS, "resolvent", lambda corpus: (1.0, 0.0))
    code, _, err = run("resolvent-check", "--graphs", "3")
    assert code == 2 and "resolvent" in err


def test_tree_bound(tmp_path):
    f, g = random_pair(1)
    pf, pg = tmp_path / "f.csv", tmp_path / "g.csv"
    pf.write_text(write_excursion_csv(f))
    pg.write_text(write_excursion_csv(g))
    code, out, _ = run("tree-bound", "--f", str(pf), "--g", str(pg), "--kappa", "1")
    assert code == 0
    res = json.loads(out)["result"]
    assert res["achieved"] <= res["bound"] + 2 * res["epsilon"]


def test_console_entry_point():
    proc = subprocess.run([sys.executable, "-m", "reslab.cli", "--version"], capture_output=True, text=True)
    assert proc.returncode == 0 and proc.stdout.strip() == "0.1.0"
