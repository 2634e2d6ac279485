import csv
import io

import numpy as np
import pytest

from hssloewner.cli import main
from hssloewner.data import generate_synthetic, load_dataset, load_system, sample_system, save_dataset
from hssloewner.model import ReducedModel, h2_error, save_model


def _read_csv(path_or_text, from_text=False):
    text = path_or_text if from_text else open(path_or_text).read()
    lines = text.splitlines()
    assert lines[0].startswith("# hssloewner-")
    return lines[0], list(csv.DictReader(io.StringIO("\n".join(lines[1:]))))


def _generate(tmp_path, *extra, name="d.csv"):
    out = tmp_path / name
    argv = ["generate", "--n", "50", "--p", "1", "--N", "1000", "--fmin", "1591.5", "--fmax", "1591549",
            "--snr", "100", "--seed", "7", "--out", str(out), *extra]
    assert main(argv) == 0
    return out


def test_generate_range(tmp_path):
    d = load_dataset(_generate(tmp_path))
    assert d.N == 1000
    assert d.omega[0] == pytest.approx(1e4, rel=1e-4)
    assert d.omega[-1] == pytest.approx(1e7, rel=1e-4)
    sys_ = load_system(str(tmp_path / "d.csv") + ".system.json")
    assert sys_.order == 50


def test_generate_odd_order(tmp_path, capsys):
    assert main(["generate", "--n", "3", "--N", "10", "--out", str(tmp_path / "x.csv")]) == 2
    assert "even" in capsys.readouterr().err


def test_generate_deterministic(tmp_path):
    a = _generate(tmp_path, name="a.csv")
    b = _generate(tmp_path, name="b.csv")
    assert a.read_bytes() == b.read_bytes()


def test_fit_hss_vs_dense(tmp_path):
    data = _generate(tmp_path)
    errs = {}
    for method in ("dense-svd", "hss"):
        rep = tmp_path / f"{method}.csv"
        argv = ["fit", "--data", str(data), "--method", method, "--partition", "odd-even-real",
                "--order", "50", "--report", str(rep), "--model-out", str(tmp_path / f"{method}.model")]
        assert main(argv) == 0
        header, rows = _read_csv(rep)
        assert header == "# hssloewner-fit-report v1"
        errs[method] = float(rows[0]["h2_error"])
        for col in ("construction_s", "reduction_s", "storage_entries", "hss_rank", "n"):
            assert col in rows[0]
    assert 0.1 <= errs["hss"] / errs["dense-svd"] <= 10


def test_fit_dense_refused_at_100000(tmp_path, capsys):
    s = generate_synthetic(50, 1, seed=7)
    path = tmp_path / "big.csv"
    save_dataset(sample_system(s, 100_000, 1591.5, 1591549), path)
    assert main(["fit", "--data", str(path), "--method", "dense-svd", "--report", str(tmp_path / "r.csv")]) == 2
    assert "dense limit" in capsys.readouterr().err


def test_fit_auto_order(tmp_path):
    data = tmp_path / "d.csv"
    assert main(["generate", "--n", "10", "--N", "400", "--seed", "1", "--out", str(data)]) == 0
    rep = tmp_path / "r.csv"
    assert main(["fit", "--data", str(data), "--order", "auto", "--report", str(rep)]) == 0
    _, rows = _read_csv(rep)
    row = rows[0]
    assert row["order_auto"] == "True"
    assert int(row["n"]) == min(4 * 2 * int(row["hss_rank"]), int(row["M"]))


def test_eval_exact_model(tmp_path):
    data = tmp_path / "d.csv"
    assert main(["generate", "--n", "10", "--N", "300", "--seed", "3", "--out", str(data)]) == 0
    sys_ = load_system(str(data) + ".system.json")
    m = ReducedModel(E=np.eye(10), A=np.diag(sys_.poles), B=sys_.residues[:, :, 0], C=np.ones((1, 10)),
                     D=np.zeros((1, 1)))
    save_model(m, tmp_path / "m.txt")
    out = tmp_path / "e.csv"
    assert main(["eval", "--model", str(tmp_path / "m.txt"), "--data", str(data), "--out", str(out)]) == 0
    header, rows = _read_csv(out)
    assert len(rows) == 300
    scale = max(float(r["data_fro"]) for r in rows)
    assert max(float(r["error_fro"]) for r in rows) <= 1e-10 * scale
    h2 = float(header.split("h2_error=")[1])
    err = np.array([float(r["error_fro"]) for r in rows])
    ref = np.array([float(r["data_fro"]) for r in rows])
    recomputed = np.sqrt(np.sum(err**2) / np.sum(ref**2))
    assert abs(h2 - recomputed) <= 1e-12
    assert h2 == pytest.approx(h2_error(m, load_dataset(data)), rel=1e-12, abs=1e-15)


def test_eval_dimension_mismatch(tmp_path):
    data = tmp_path / "d.csv"
    assert main(["generate", "--n", "4", "--p", "2", "--N", "20", "--out", str(data)]) == 0
    m = ReducedModel(E=np.eye(1), A=-np.eye(1), B=np.ones((1, 1)), C=np.ones((1, 1)), D=np.zeros((1, 1)))
    save_model(m, tmp_path / "m.txt")
    assert main(["eval", "--model", str(tmp_path / "m.txt"), "--data", str(data)]) == 2


def test_bench_skips_dense(tmp_path):
    out = tmp_path / "b.csv"
    assert main(["bench", "--grid", "30000", "--methods", "dense-svd", "--out", str(out)]) == 0
    header, rows = _read_csv(out)
    assert header == "# hssloewner-bench v1"
    assert rows[0]["status"] == "skipped" and rows[0]["N"] == "30000"


def test_bench_columns(tmp_path):
    out = tmp_path / "b.csv"
    assert main(["bench", "--grid", "300", "600", "--methods", "hss", "dense-svd", "--system-order", "10",
                 "--order", "10", "--out", str(out)]) == 0
    _, rows = _read_csv(out)
    assert [r["method"] for r in rows] == ["hss", "dense-svd"] * 2
    assert all(r["status"] == "ok" and float(r["total_s"]) > 0 for r in rows)
    assert all(r["h2_error"] not in ("", "nan") for r in rows)


def test_numerical_failure_exit(tmp_path, capsys):
    data = tmp_path / "d.csv"
    assert main(["generate", "--n", "10", "--N", "400", "--snr", "20", "--seed", "2", "--out", str(data)]) == 0
    argv = ["fit", "--data", str(data), "--order", "40", "--conv-tol", "1e-300", "--max-restarts", "0",
            "--report", str(tmp_path / "r.csv")]
    assert main(argv) == 3
    assert "did not converge" in capsys.readouterr().err


def test_missing_file(tmp_path):
    assert main(["fit", "--data", str(tmp_path / "nope.csv")]) == 2


def test_bad_order_argument(tmp_path):
    with pytest.raises(SystemExit) as exc:
        main(["fit", "--data", "x.csv", "--order", "zero"])
    assert exc.value.code == 2
