import csv
import io
import math
import subprocess
import sys

import pytest

from fblbc import bounds, cli
from fblbc.model import ConfigError, PowerAllocation, parse_config, validate


def run(argv, capsys):
    code = cli.main(argv)
    cap = capsys.readouterr()
    return code, cap.out, cap.err


def rows_of(text):
    return list(csv.DictReader(io.StringIO(text)))


def test_sweep_spec():
    assert cli.parse_sweep("n:70:2000:10").values()[:3] == [70, 80, 90]
    assert len(cli.parse_sweep("n:70:2000:10").values()) == 194
    assert cli.parse_sweep("rho:0:0.95:0.05").values()[-1] == 0.95
    assert cli.parse_sweep("n:5:5:1").values() == [5]
    for bad in ("n:1:2", "x:0:1:1", "n:2:1:1", "n:0:1:0", "n:a:1:1"):
        with pytest.raises(ConfigError):
            cli.parse_sweep(bad)


def test_fmt_round_trip():
    for x in (0.1, 1 / 3, 1e-300, 123456789.123):
        assert float(cli.fmt(x)) == x
    assert cli.fmt(True) == "1" and cli.fmt(7) == "7" and cli.fmt(math.nan) == "nan"


def test_p2p_default_grid(capsys):
    code, out, _ = run(["p2p"], capsys)
    rows = rows_of(out)
    assert code == 0 and len(rows) == 194
    assert list(rows[0]) == ["n", "thm2_rate", "na_zero", "na_half", "na_klog", "feasible"]
    row = next(r for r in rows if r["n"] == "1000")
    direct = bounds.theorem2_rate(1000, 1.0, 1e-3, 1.0)
    assert row["feasible"] == ("1" if direct.feasible else "0")
    assert float(row["na_half"]) == bounds.normal_approx(1000, 1.0, 1e-3, "half_log")
    if direct.feasible:
        assert float(row["thm2_rate"]) == direct.rate
    else:
        assert row["thm2_rate"] == "nan"


def test_p2p_single_point(capsys):
    _, out, _ = run(["p2p", "--sweep", "n:300:300:10"], capsys)
    assert len(rows_of(out)) == 1


def test_parallel_grid(capsys):
    code, out, _ = run(["parallel", "--sweep", "n:20:200:10", "--nu", "0.5,1"], capsys)
    rows = rows_of(out)
    assert code == 0 and len(rows) == 2 * 19
    r = next(x for x in rows if x["n"] == "200" and x["nu"] == "0.5")
    assert float(r["na_zero"]) == bounds.parallel_normal_approx((100.0, 100.0), (100.0, 200.0), 1e-6)


def test_broadcast_rows_and_coincidence(capsys):
    code, out, _ = run(["broadcast", "--bound", "prop1"], capsys)
    rows = rows_of(out)
    assert code == 0 and [r["n12"] for r in rows][::2] == ["200", "150", "100", "50", "0"]
    ours = {r["n12"]: r for r in rows if r["scheme"] == "ours"}
    ts = {r["n12"]: r for r in rows if r["scheme"] == "timesharing"}
    assert float(ours["0"]["R1"]) == pytest.approx(float(ts["0"]["R1"]), rel=1e-12)
    assert float(ours["0"]["R2"]) == pytest.approx(float(ts["0"]["R2"]), rel=1e-12)
    rc = cli.read_config("staggered_n300")
    for n12, r in ours.items():
        if r["feasible"] != "1":
            continue
        cfg = cli._partition(rc.system, int(n12))
        pa = PowerAllocation(*(float(r[k]) for k in ("beta11", "betac", "beta22", "beta12", "beta21", "rho")))
        assert validate(pa, cfg) == []


def test_timeshare_rows(capsys):
    code, out, _ = run(["timeshare", "--bound", "prop1", "--sweep", "n12_partition:100:100:1"], capsys)
    (row,) = rows_of(out)
    assert code == 0 and row["scheme"] == "timesharing" and row["eta"] == "0.5"


def test_sweep_rho_endpoints(capsys):
    code, out, _ = run(["sweep-rho", "--config", "rho_overlap_small"], capsys)
    rows = rows_of(out)
    assert code == 0
    assert rows[0]["rho"] == "0.0" and rows[-1]["rho"] == "0.95" and len(rows) == 20


def test_sweep_rho_needs_overlap_only(capsys):
    code, _, err = run(["sweep-rho", "--config", "staggered_n300"], capsys)
    assert code == 2 and "n11 = n22 = 0" in err


def test_sweep_lambda_rows(capsys):
    code, out, _ = run(["sweep-lambda", "--bound", "prop1", "--sweep", "lambda:0:1:0.5"], capsys)
    rows = rows_of(out)
    assert code == 0 and [r["lambda"] for r in rows] == ["0.0", "0.5", "1.0"]


def test_point(capsys):
    code, out, _ = run(["point", "--bound", "prop1"], capsys)
    rows = rows_of(out)
    assert code == 0 and [r["receiver"] for r in rows] == ["1", "2"]


def test_bad_config_names_key(tmp_path, capsys):
    p = tmp_path / "bad.cfg"
    p.write_text("n11 = 1\nn12 = 1\nn22 = 1\nP = 1\nfoo = 3\n")
    code, out, err = run(["p2p", "--config", str(p)], capsys)
    assert code == 2 and "unknown key 'foo'" in err and out == ""
    code, _, err = run(["p2p", "--config", "no-such-config"], capsys)
    assert code == 2 and "not found" in err


def test_out_file(tmp_path, capsys):
    dest = tmp_path / "o.csv"
    code, out, _ = run(["p2p", "--sweep", "n:100:120:10", "--out", str(dest)], capsys)
    assert code == 0 and out == "" and len(rows_of(dest.read_text())) == 3


def test_csv_reproducible(capsys):
    a = run(["broadcast", "--bound", "prop1", "--sweep", "n12_partition:50:100:50"], capsys)[1]
    b = run(["broadcast", "--bound", "prop1", "--sweep", "n12_partition:50:100:50"], capsys)[1]
    assert a == b


def test_verify_deterministic_and_exit_code(capsys):
    argv = ["verify", "--trials", "10000", "--e2e-trials", "200", "--seed", "3"]
    code1, out1, _ = run(argv, capsys)
    code2, out2, _ = run(argv, capsys)
    assert out1 == out2
    lines = out1.strip().splitlines()
    assert len(lines) == 3 + 9 + 3 + 2
    assert all(line.startswith(("PASS ", "FAIL ")) for line in lines)
    assert code1 == (0 if all(line.startswith("PASS") for line in lines) else 1)


def test_module_entry_point():
    out = subprocess.run([sys.executable, "-m", "fblbc", "p2p", "--sweep", "n:100:100:1"],
                         capture_output=True, text=True)
    assert out.returncode == 0 and out.stdout.startswith("n,thm2_rate")


def test_bundled_configs_listed():
    names = cli.bundled_configs()
    for name in ("p2p", "parallel", "rho_overlap_10db", "rho_overlap_0db", "staggered_n300", "asym_n60", "asym_n180", "verify"):
        assert name in names
        parse_config(cli.resources.files("fblbc").joinpath("configs", f"{name}.cfg").read_text())
