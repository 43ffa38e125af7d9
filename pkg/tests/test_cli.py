import json
import subprocess
import sys

import numpy as np
import pytest
from scipy import stats as sps

from qfmct.cli import (EXIT_CONFIG, EXIT_DATA, EXIT_OK, RunRecord, main, read_dataset,
                       result_csv_parse)
from qfmct.hypotheses import partition_to_dict, per_component_equality
from qfmct.simharness import PowerTable


def write_csv(path, groups, names=None):
    d = groups[0][1].shape[1]
    names = names or [f"x{j + 1}" for j in range(d)]
    lines = ["group," + ",".join(names)]
    for label, X in groups:
        lines += [label + "," + ",".join(repr(float(v)) for v in row) for row in X]
    path.write_text("\n".join(lines) + "\n")
    return path


@pytest.fixture
def shifted_csv(tmp_path):
    rng = np.random.default_rng(0)
    g = [rng.standard_normal((15, 3)) for _ in range(3)]
    g[2][:, 0] += 5.0
    return write_csv(tmp_path / "d.csv", list(zip(["A", "B", "C"], g)))


def test_read_dataset_orders_groups_by_first_appearance(tmp_path):
    p = tmp_path / "x.csv"
    p.write_text("g,u,v\nz,1,2\na,3,4\nz,5,6\na,7,9\n")
    data, names = read_dataset(p)
    assert data.labels == ("z", "a") and names == ["u", "v"]
    np.testing.assert_array_equal(data.groups[0], [[1, 2], [5, 6]])


def test_test_command_text_and_record(shifted_csv, tmp_path, capsys):
    out = tmp_path / "res" / "run.json"
    rc = main(["test", str(shifted_csv), "--partition", "pairs", "--alpha", "0.01",
               "--reps", "500", "--seed", "3", "--threads", "1", "--out", str(out)])
    assert rc == EXIT_OK
    text = capsys.readouterr().out
    assert "(A,C)" in text and "REJECTED" in text
    rec = RunRecord.from_json(out.read_text())
    res = rec.payload
    assert list(res.local_reject) == [False, True, True]
    assert rec.seed == 3 and rec.input_digest.startswith("sha256:")
    assert RunRecord.from_json(rec.to_json()).to_dict() == rec.to_dict()
    rows = result_csv_parse((tmp_path / "res" / "run.csv").read_text())
    assert [r[0] for r in rows] == list(res.labels)
    np.testing.assert_array_equal([r[3] for r in rows], res.adjusted_p)
    np.testing.assert_array_equal([r[1] for r in rows], res.statistics)
    # percent with two decimals
    assert f"{100 * res.adjusted_p[0]:.2f}" in text


def test_threads_do_not_change_results(shifted_csv, tmp_path):
    outs = []
    for t in ("1", "4"):
        o = tmp_path / f"t{t}"
        assert main(["test", str(shifted_csv), "--method", "wb", "--wild-weights", "rademacher",
                     "--reps", "300", "--threads", t, "--out", str(o)]) == 0
        outs.append((tmp_path / f"t{t}.csv").read_text())
    assert outs[0] == outs[1]


def test_identical_groups(tmp_path, capsys):
    X = np.random.default_rng(1).standard_normal((10, 2))
    p = write_csv(tmp_path / "same.csv", [("a", X), ("b", X)])
    assert main(["test", str(p), "--reps", "200", "--out", str(tmp_path / "o")]) == 0
    res = RunRecord.from_json((tmp_path / "o.json").read_text()).payload
    assert not res.global_reject and np.all(res.adjusted_p > 0.9)


def test_two_groups_match_squared_welch_t(tmp_path):
    rng = np.random.default_rng(2)
    x, y = rng.standard_normal((12, 3)), rng.standard_normal((9, 3)) + 0.3
    p = write_csv(tmp_path / "two.csv", [("x", x), ("y", y)])
    assert main(["test", str(p), "--reps", "200", "--out", str(tmp_path / "o")]) == 0
    res = RunRecord.from_json((tmp_path / "o.json").read_text()).payload
    t = sps.ttest_ind(x, y, equal_var=False).statistic
    np.testing.assert_allclose(res.statistics * np.sqrt(2), t ** 2, rtol=1e-10)


def test_partition_file(shifted_csv, tmp_path):
    pf = tmp_path / "part.json"
    pf.write_text(json.dumps(partition_to_dict(per_component_equality(3, 3))))
    assert main(["test", str(shifted_csv), "--partition", f"file:{pf}", "--reps", "200",
                 "--statistic", "wts", "--out", str(tmp_path / "o")]) == 0
    res = RunRecord.from_json((tmp_path / "o.json").read_text()).payload
    assert res.labels == ("component 1", "component 2", "component 3")
    assert res.local_reject[0]


@pytest.mark.parametrize("body,needle", [
    ("g,x\nA,1\nA,2\nB,3\n", "singleton group"),
    ("g,x\nA,1\nA,oops\nB,3\nB,4\n", "non-numeric cell"),
    ("g,x\nA,1,2\nA,2\nB,3\nB,4\n", "malformed CSV"),
    ("g,x\nA,1\nA,2\n", "invalid input"),
    ("g,x\nA,1\nA,\nB,3\nB,4\n", "non-numeric cell"),
])
def test_input_errors_have_distinct_diagnostics(tmp_path, capsys, body, needle):
    p = tmp_path / "bad.csv"
    p.write_text(body)
    assert main(["test", str(p)]) == EXIT_DATA
    assert needle in capsys.readouterr().err


def test_missing_file_and_bad_flags(tmp_path, capsys):
    assert main(["test", str(tmp_path / "nope.csv")]) != 0
    with pytest.raises(SystemExit) as exc:
        main(["test", "x.csv", "--partition", "rows"])
    assert exc.value.code == 2


def test_diag_dumps_replicates(shifted_csv, tmp_path):
    out = tmp_path / "reps.csv"
    assert main(["diag", str(shifted_csv), "--reps", "40", "--method", "mc", "--out", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert len(lines) == 41 and lines[0] == '"x1","x2","x3"'


CFG = """[design]
N = 25
deltas = 0, 1
[simulation]
nsim = 4
B = 50
mc_draws = 100
seed = 9
tests = mct-eq, qfmct-pb-ats
"""


def test_simulate_is_byte_identical(tmp_path, capsys):
    cfg = tmp_path / "s.cfg"
    cfg.write_text(CFG)
    for k in (1, 2):
        assert main(["simulate", str(cfg), "--threads", "1", "--out", str(tmp_path / f"r{k}")]) == 0
    a, b = (tmp_path / "r1.csv").read_text(), (tmp_path / "r2.csv").read_text()
    assert a == b
    table = RunRecord.from_json((tmp_path / "r1.json").read_text()).payload
    assert PowerTable.from_csv(a) == table
    assert "mct-eq" in capsys.readouterr().out


def test_simulate_config_error(tmp_path, capsys):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("[simulation]\nB = 1\n")
    assert main(["simulate", str(cfg)]) == EXIT_CONFIG
    assert "simulation.B" in capsys.readouterr().err
    assert main(["simulate", "no_such.cfg"]) == EXIT_CONFIG


def test_module_entry_point(shifted_csv):
    proc = subprocess.run([sys.executable, "-m", "qfmct", "test", str(shifted_csv), "--reps", "100"],
                          capture_output=True, text=True)
    assert proc.returncode == 0 and "adj. p (%)" in proc.stdout
