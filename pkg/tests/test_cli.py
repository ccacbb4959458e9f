import numpy as np
import pytest

from kacanov_afem import audit, cli
from kacanov_afem.driver import CSV_COLUMNS, read_csv
from kacanov_afem.mesh import loads_mesh


def run(argv, capsys):
    code = cli.main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


def test_run_writes_increasing_dofs(tmp_path, capsys):
    code, out, _ = run(["run", "--problem", "ex1", "--mark", "max:0.7", "--max-iters", "12",
                        "--out", str(tmp_path)], capsys)
    assert code == 0 and "records.csv" in out
    recs = read_csv(tmp_path / "records.csv")
    assert len(recs) == 12
    assert all(b.dofs > a.dofs for a, b in zip(recs, recs[1:]))


def test_run_stops_on_dofs(tmp_path, capsys):
    code, _, _ = run(["run", "--problem", "ex1", "--mark", "global", "--max-dofs", "1000",
                      "--out", str(tmp_path)], capsys)
    recs = read_csv(tmp_path / "records.csv")
    assert code == 0 and recs[-1].dofs > 1000


def test_curvature_has_no_error_column_values(tmp_path, capsys):
    code, _, _ = run(["run", "--problem", "curvature", "--mark", "doerfler:0.5", "--max-iters", "5",
                      "--dump-at", "2,4", "--out", str(tmp_path)], capsys)
    assert code == 0
    lines = (tmp_path / "records.csv").read_text().splitlines()
    col = CSV_COLUMNS.index("h1_error")
    assert all(line.split(",")[col] == "" for line in lines[1:])
    mesh = loads_mesh((tmp_path / "mesh_004.txt").read_text())
    assert mesh.n_elements == read_csv(tmp_path / "records.csv")[3].elements


@pytest.mark.parametrize("argv", [
    ["run", "--problem", "ex9"],
    ["run", "--problem", "ex1", "--mark", "max:2"],
    ["run", "--problem", "ex1", "--mark", "sometimes"],
    ["run", "--problem", "ex1", "--eta-tol", "-1"],
    ["run", "--problem", "ex1", "--n-bisect", "0"],
    ["run", "--problem", "ex1", "--dump-at", "a,b"],
    ["audit", "--only", "nothing"],
    ["dump-mesh", "--uniform", "-1"],
    ["frobnicate"],
    [],
])
def test_usage_errors_exit_64(argv, capsys):
    with pytest.raises(SystemExit) as err:
        code = cli.main(argv)
        raise SystemExit(code)
    assert err.value.code == 64


def test_solver_failure_exits_2(tmp_path, capsys):
    code, _, err = run(["run", "--problem", "ex1", "--cg-tol", "1e-300", "--max-iters", "5",
                        "--out", str(tmp_path)], capsys)
    assert code == 2 and "solver failure" in err
    assert (tmp_path / "records.csv").exists()


def test_rates_on_synthetic_csv(tmp_path, capsys):
    dofs = np.unique(np.logspace(1, 5, 15).astype(int))
    rows = [",".join(CSV_COLUMNS)]
    for k, d in enumerate(dofs, 1):
        rows.append(f"{k},{d},{2 * d},1.0,0.0,{0.7 / float(d)!r},0.0,3,0.5")
    p = tmp_path / "records.csv"
    p.write_text("\n".join(rows) + "\n")
    code, out, _ = run(["rates", str(p)], capsys)
    assert code == 0
    slopes = [float(line.rsplit(":", 1)[1]) for line in out.splitlines() if line.startswith("slope")]
    assert len(slopes) == 2
    assert all(abs(s + 1.0) <= 1e-9 for s in slopes)
    code, out, _ = run(["rates", str(p), "--window", "4", "--column", "eta"], capsys)
    assert code == 0 and "last 4 records: 0.000000" in out


@pytest.mark.parametrize("text", ["k,dofs\n1,2\n", ",".join(CSV_COLUMNS) + "\n1,x,2,3,4,5,6,7,8\n"])
def test_rates_on_malformed_csv_exits_65(tmp_path, capsys, text):
    p = tmp_path / "bad.csv"
    p.write_text(text)
    code, _, err = run(["rates", str(p)], capsys)
    assert code == 65 and "malformed" in err


def test_rates_on_missing_file_exits_65(tmp_path, capsys):
    assert run(["rates", str(tmp_path / "none.csv")], capsys)[0] == 65


def test_rates_without_enough_records_exits_65(tmp_path, capsys):
    p = tmp_path / "short.csv"
    p.write_text(",".join(CSV_COLUMNS) + "\n1,10,20,1.0,0.0,0.1,0.0,1,0.1\n")
    assert run(["rates", str(p)], capsys)[0] == 65


def test_audit_subset_passes(capsys):
    code, out, _ = run(["audit", "--only", "lemma-key-property", "--samples", "50"], capsys)
    assert code == 0
    lines = out.splitlines()
    assert [line.split()[0] for line in lines] == ["PASS", "PASS", "SKIP", "PASS"]
    assert "lemma-key-property[ex3]" in lines[2]


def test_audit_ellipticity_reports_example_two(capsys):
    code, out, _ = run(["audit", "--only", "ellipticity"], capsys)
    assert code == 0
    ex2 = next(line for line in out.splitlines() if "ellipticity[ex2]" in line)
    assert "VIOLATED" in ex2


def test_audit_failure_exits_1(monkeypatch, capsys):
    def broken(samples, seed):
        return [audit.CheckResult("broken", "demo", audit.FAIL, "counterexample x=1")]
    monkeypatch.setitem(audit.CHECKS, "broken", broken)
    monkeypatch.setitem(cli.CHECKS, "broken", broken)
    code, out, _ = run(["audit", "--only", "broken"], capsys)
    assert code == 1 and "first failure: broken[demo]: counterexample x=1" in out


def test_dump_mesh(tmp_path, capsys):
    code, out, _ = run(["dump-mesh", "--domain", "square", "--uniform", "1"], capsys)
    assert code == 0 and loads_mesh(out).n_elements == 8
    target = tmp_path / "mesh.txt"
    assert run(["dump-mesh", "--problem", "ex1", "--out", str(target)], capsys)[0] == 0
    assert loads_mesh(target.read_text()).n_elements == 6
