import csv
import subprocess
import sys
import textwrap

import pytest

from htpoisson.cli import SWEEP_COLUMNS, SpecError, main, parse_spec, run_spec


def write_spec(tmp_path, body):
    p = tmp_path / "exp.ini"
    p.write_text(textwrap.dedent(body))
    return p


def read_csv(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


def test_thresholds_command(capsys):
    assert main(["thresholds", "--law", "lomax(alpha=2.5)", "--rho", "0.9", "--k", "1.5"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "rho,x_rho,x_tilde,x_rho_star,a_rho_star"
    cells = lines[1].split(",")
    assert cells[0] == "0.9"
    assert float(cells[1]) == pytest.approx(103.616, abs=1e-3)
    assert float(cells[2]) == pytest.approx(23.026, abs=1e-3)


def test_bad_law_message(capsys):
    assert main(["thresholds", "--law", "lomax(alpha=1.5)", "--rho", "0.9"]) == 2
    assert "alpha must exceed 2" in capsys.readouterr().err


def test_grid_error_surfaced(capsys):
    assert main(["exact", "--law", "lomax(alpha=2.5)", "--rho", "0.9", "--x", "5", "--h", "3"]) == 2
    assert "too coarse" in capsys.readouterr().err


def test_exact_command(capsys, tmp_path):
    table = tmp_path / "table.csv"
    assert main(["exact", "--law", "exp(mean=1)", "--rho", "0.5", "--x", "2", "--h", "0.01",
                 "--table", str(table)]) == 0
    out = capsys.readouterr().out.splitlines()
    assert out[0] == "rho,x,sup_cdf,sup_density,sup_local,mtau_tail,bmax_tail"
    assert float(out[1].split(",")[2]) == pytest.approx(0.8160603, abs=1e-6)
    assert table.read_text().splitlines()[1] == "x,cdf,density,w,logw"


def test_simulate_command(capsys, tmp_path):
    raw = tmp_path / "raw.csv"
    args = ["simulate", "--law", "lomax(alpha=2.5)", "--rho", "0.5", "--reps", "2000", "--seed", "3",
            "--x", "2", "--raw", str(raw), "--a", "1.5"]
    assert main(args) == 0
    first = capsys.readouterr().out
    assert first.splitlines()[0] == "rho,statistic,mean,ci_half_width,n"
    assert len(first.splitlines()) == 5
    assert raw.read_text().splitlines()[0] == "rep,tau,m_tau,b_tau,n_jumps,sigma_a"
    main(args)
    assert capsys.readouterr().out == first


def test_bmax_command(capsys):
    assert main(["bmax", "--law", "lomax(alpha=2.5)", "--rho", "0.8", "--x", "5", "1"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[1] == "x,p,residual,iterations"
    assert float(lines[3].split(",")[1]) == pytest.approx(0.0331656615, abs=1e-10)


def test_thresholds_only_spec(tmp_path, monkeypatch):
    monkeypatch.setenv("HTPOISSON_OUTPUT_DIR", str(tmp_path))
    spec = write_spec(tmp_path, """\
        [experiment]
        law = lomax(alpha=2.5)
        rho = 0.9
        output = out

        [sweep th]
        quantity = thresholds
        k = 1.5
        """)
    run_spec(parse_spec(spec))
    rows = read_csv(tmp_path / "out" / "th.csv")
    assert float(rows[0]["x_rho"]) == pytest.approx(103.616, abs=1e-3)
    assert float(rows[0]["x_tilde"]) == pytest.approx(23.026, abs=1e-3)


SWEEP_SPEC = """\
    [experiment]
    law = lomax(alpha=2.5)
    rho = 0.5, 0.8
    seed = 11
    output = out

    [engine]
    h = 0.02

    [simulation]
    replications = 20000

    [sweep sup]
    quantity = sup
    x = abs 2, 5, 10

    [sweep mtau]
    quantity = mtau
    x = threshold x_rho k=1.5 n=3 span=2

    [sweep bmax]
    quantity = bmax
    x = scaled 1, 2
    """


def test_sweep_outputs_are_consistent_and_reproducible(tmp_path, monkeypatch, capsys):
    monkeypatch.setenv("HTPOISSON_OUTPUT_DIR", str(tmp_path))
    spec = write_spec(tmp_path, SWEEP_SPEC)
    paths = run_spec(parse_spec(spec))
    summary = capsys.readouterr()
    first = {p.name: p.read_bytes() for p in paths}
    for p in paths:
        rows = read_csv(p)
        assert list(rows[0].keys()) == SWEEP_COLUMNS
        for r in rows:
            if r["exact"] and r["asymptotic"]:
                assert float(r["ratio_exact_asym"]) == pytest.approx(float(r["exact"]) / float(r["asymptotic"]),
                                                                     rel=1e-9)
            if r["simulated"] and r["asymptotic"]:
                assert float(r["ratio_sim_asym"]) == pytest.approx(float(r["simulated"]) / float(r["asymptotic"]),
                                                                   rel=1e-9)
    assert "mtau: rho=0.8 max|ratio-1| over x >=" in summary.out
    run_spec(parse_spec(spec))
    assert {p.name: p.read_bytes() for p in paths} == first


@pytest.mark.parametrize("body,needle", [
    ("[experiment]\nlaw = lomax(alpha=1.5)\nrho = 0.9\n[sweep a]\nquantity = sup\nx = abs 1\n",
     "line 2: [experiment] law: alpha must exceed 2"),
    ("[experiment]\nlaw = lomax(alpha=2.5)\nrho = 0.9\n[sweep a]\nquantity = nope\nx = abs 1\n",
     "line 5: [sweep a] quantity: unknown quantity"),
    ("[experiment]\nlaw = lomax(alpha=2.5)\nrho = 0.9, 1.2\n[sweep a]\nquantity = sup\nx = abs 1\n",
     "line 3: [experiment] rho"),
    ("[experiment]\nlaw = lomax(alpha=2.5)\nrho = 0.9\n[sweep a]\nquantity = sup\nx = bogus 1\n",
     "line 6: [sweep a] x: level mode"),
    ("[experiment]\nlaw = lomax(alpha=2.5)\nrho = 0.9\n", "no [sweep"),
])
def test_spec_errors_carry_line_numbers(tmp_path, body, needle):
    p = tmp_path / "bad.ini"
    p.write_text(body)
    with pytest.raises(SpecError) as exc:
        parse_spec(p)
    assert needle in str(exc.value)


def test_console_script_entry(tmp_path):
    r = subprocess.run([sys.executable, "-m", "htpoisson.cli", "thresholds", "--law", "lomax(alpha=2.5)",
                        "--rho", "0.8", "--kstar", "2.5"], capture_output=True, text=True, check=True)
    assert float(r.stdout.splitlines()[1].split(",")[3]) == pytest.approx(82.154, abs=1e-3)
