"""CLI contracts: exit codes, file outputs, reproducibility."""

import csv
import json

import numpy as np
import pytest

import randghep as rg
from randghep.cli import main


def _write_eye(path, n=5):
    rg.save_matrix_market(path, np.eye(n))
    return str(path)


def _read_report(outdir):
    return json.loads((outdir / "report.json").read_text())


def _read_csv(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


class TestSolve:
    def test_identity_pencil(self, tmp_path):
        eye = _write_eye(tmp_path / "eye.mtx")
        out = tmp_path / "run"
        code = main(["solve", "--A", eye, "--B", eye, "--k", "2", "--p", "2",
                     "--seed", "3", "--save-modes", "--out", str(out)])
        assert code == 0
        rep = _read_report(out)
        np.testing.assert_allclose(rep["eigenvalues"], [1.0, 1.0], atol=1e-12)
        rows = _read_csv(out / "spectrum.csv")
        assert [r["index"] for r in rows] == ["0", "1"]
        assert rg.load_matrix_market(out / "modes.mtx").shape == (5, 2)

    def test_oracle_columns_and_bounds(self, tmp_path):
        rng = np.random.default_rng(7)
        G = rng.standard_normal((12, 12))
        Bd = G @ G.T + 12 * np.eye(12)
        U0 = rng.standard_normal((12, 3))
        C = np.linalg.cholesky(U0.T @ (Bd @ U0))
        U0 = np.linalg.solve(C, U0.T).T
        BU = Bd @ U0
        Ad = (BU * np.array([9.0, 4.0, 1.0])) @ BU.T
        a_path = tmp_path / "a.mtx"
        b_path = tmp_path / "b.mtx"
        rg.save_matrix_market(a_path, Ad)
        rg.save_matrix_market(b_path, Bd)
        out = tmp_path / "run"
        code = main(["solve", "--A", str(a_path), "--B", str(b_path), "--k", "3",
                     "--p", "4", "--seed", "5", "--oracle", "--out", str(out)])
        assert code == 0
        rows = _read_csv(out / "spectrum.csv")
        assert all(float(r["abs_err"]) <= 1e-10 for r in rows)
        assert all(r["lambda_bound_ok"] == "True" for r in rows)
        assert all(r["sine_bound_ok"] == "True" for r in rows)

    def test_methods_differ_only_in_reported_fields(self, tmp_path):
        eye = _write_eye(tmp_path / "eye.mtx", 8)
        out1, out2 = tmp_path / "r1", tmp_path / "r2"
        main(["solve", "--A", eye, "--B", eye, "--k", "2", "--p", "2", "--seed", "9",
              "--method", "two-pass", "--out", str(out1)])
        main(["solve", "--A", eye, "--B", eye, "--k", "2", "--p", "2", "--seed", "9",
              "--method", "single-pass", "--out", str(out2)])
        r1, r2 = _read_report(out1), _read_report(out2)
        assert r1["method"] == "two_pass" and r2["method"] == "single_pass"
        assert r1["seed"] == r2["seed"]
        assert r1["counts"]["a_applies"] == 2 * r2["counts"]["a_applies"]

    def test_bitwise_reproducibility(self, tmp_path):
        eye = _write_eye(tmp_path / "eye.mtx", 9)
        out1, out2 = tmp_path / "r1", tmp_path / "r2"
        for out in (out1, out2):
            main(["solve", "--A", eye, "--B", eye, "--k", "3", "--p", "2",
                  "--seed", "7", "--out", str(out)])
        r1, r2 = _read_report(out1), _read_report(out2)
        r1.pop("wall_time_s"), r2.pop("wall_time_s")
        assert r1 == r2
        assert (out1 / "spectrum.csv").read_text() == (out2 / "spectrum.csv").read_text()

    def test_exit_2_on_bad_config(self, tmp_path):
        eye = _write_eye(tmp_path / "eye.mtx", 4)
        # sketch larger than the matrix
        assert main(["solve", "--A", eye, "--B", eye, "--k", "4", "--p", "4",
                     "--out", str(tmp_path / "x")]) == 2

    def test_exit_2_on_missing_file(self, tmp_path):
        assert main(["solve", "--A", str(tmp_path / "none.mtx"), "--B",
                     str(tmp_path / "none.mtx"), "--k", "2", "--out", str(tmp_path)]) == 2

    def test_exit_3_on_indefinite_b(self, tmp_path):
        a_path = tmp_path / "a.mtx"
        b_path = tmp_path / "b.mtx"
        rg.save_matrix_market(a_path, np.eye(4))
        rg.save_matrix_market(b_path, np.diag([1.0, 1.0, 1.0, -1.0]))
        assert main(["solve", "--A", str(a_path), "--B", str(b_path), "--k", "2",
                     "--p", "1", "--out", str(tmp_path / "x")]) == 3

    def test_seed_zero_draws_from_entropy(self, tmp_path):
        eye = _write_eye(tmp_path / "eye.mtx", 6)
        out = tmp_path / "run"
        code = main(["solve", "--A", eye, "--B", eye, "--k", "2", "--p", "2",
                     "--seed", "0", "--out", str(out)])
        assert code == 0
        rep = _read_report(out)
        assert rep["seed_derived_from_entropy"] is True
        assert rep["seed"] != 0


class TestQrBench:
    def test_table_layout_and_quality(self, tmp_path, capsys):
        out = tmp_path / "qb"
        code = main(["qr-bench", "--seed", "2", "--out", str(out)])
        assert code == 0
        rows = _read_csv(out / "qr_bench.csv")
        assert len(rows) == 9
        assert {r["alg"] for r in rows} == {"MGS", "MGS-R", "PreCholQR"}
        by = {(r["alg"], r["kernel"]): r for r in rows}
        # reconstruction at machine precision for every algorithm and kernel
        assert all(float(r["m1"]) <= 1e-13 for r in rows)
        # re-orthogonalized MGS stays orthogonal on the roughest kernel
        assert float(by[("MGS-R", "0.5")]["m2"]) <= 1e-13
        # plain MGS degrades visibly on the smoothest kernel
        assert float(by[("MGS", "2.5")]["m2"]) >= 1e-8

    def test_single_kernel_selection(self, tmp_path):
        out = tmp_path / "qb"
        code = main(["qr-bench", "--nu", "1.5", "--n", "101", "--cols", "30",
                     "--seed", "4", "--out", str(out)])
        assert code == 0
        rows = _read_csv(out / "qr_bench.csv")
        assert len(rows) == 3
        assert {r["kernel"] for r in rows} == {"1.5"}


class TestKle:
    def test_outputs(self, tmp_path):
        out = tmp_path / "kle"
        code = main(["kle", "--nu", "2.5", "--n", "101", "--k", "10", "--p", "5",
                     "--seed", "3", "--out", str(out)])
        assert code == 0
        rep = _read_report(out)
        assert rep["rel_eigenvalue_error"] <= 1e-4
        rows = _read_csv(out / "spectrum.csv")
        assert len(rows) == 10
        assert float(rows[0]["abs_err"]) >= 0.0
        modes = rg.load_matrix_market(out / "modes.mtx")
        assert modes.shape == (101, 10)

    def test_method_flag(self, tmp_path):
        out = tmp_path / "kle"
        code = main(["kle", "--nu", "0.5", "--n", "81", "--k", "6", "--method", "nystrom",
                     "--seed", "2", "--out", str(out)])
        assert code == 0
        assert _read_report(out)["method"] == "nystrom"


class TestEstimate:
    def test_loose_tolerance_no_growth(self, tmp_path):
        out = tmp_path / "est"
        code = main(["estimate", "--nu", "2.5", "--n", "101", "--k", "8",
                     "--tol", "1e9", "--grow", "--seed", "4", "--out", str(out)])
        assert code == 0
        rep = _read_report(out)
        assert rep["converged"] is True
        assert rep["sketch_columns"] == 8
        assert len(rep["trajectory"]) == 1

    def test_crude_source_reported(self, tmp_path):
        out = tmp_path / "est"
        code = main(["estimate", "--nu", "1.5", "--n", "101", "--k", "10",
                     "--seed", "4", "--out", str(out)])
        assert code == 0
        rep = _read_report(out)
        assert rep["binv_source"] == "crude_lower_bound"
        assert rep["probability_floor"] == pytest.approx(1 - 2.0**-5)

    def test_growth_trajectory_and_oracle(self, tmp_path):
        out = tmp_path / "est"
        code = main(["estimate", "--nu", "2.5", "--n", "201", "--k", "5", "--tol", "1e-4",
                     "--grow", "--oracle", "--seed", "11", "--out", str(out)])
        assert code == 0
        rep = _read_report(out)
        assert rep["converged"] is True
        cols = [t["columns"] for t in rep["trajectory"]]
        assert cols == sorted(cols)
        assert rep["range_error_exact"] <= rep["e"]

    def test_requires_some_pencil(self, tmp_path):
        assert main(["estimate", "--k", "5", "--out", str(tmp_path)]) == 2

    def test_file_pencil_route(self, tmp_path):
        rng = np.random.default_rng(9)
        G = rng.standard_normal((20, 20))
        Bd = G @ G.T + 20 * np.eye(20)
        Ad = rng.standard_normal((20, 20))
        Ad = (Ad + Ad.T) / 2.0
        rg.save_matrix_market(tmp_path / "a.mtx", Ad)
        rg.save_matrix_market(tmp_path / "b.mtx", Bd)
        out = tmp_path / "est"
        code = main(["estimate", "--A", str(tmp_path / "a.mtx"), "--B", str(tmp_path / "b.mtx"),
                     "--k", "6", "--oracle", "--seed", "3", "--out", str(out)])
        assert code == 0
        rep = _read_report(out)
        assert np.isfinite(rep["e"]) and rep["e"] >= 0.0
        assert np.isfinite(rep["range_error_exact"])
        assert rep["config"]["A"].endswith("a.mtx")


class TestGsvdCommand:
    def test_json_output(self, tmp_path):
        rng = np.random.default_rng(5)
        Ad = rng.standard_normal((10, 8))
        Sd = np.eye(10)
        Td = np.diag(rng.uniform(1, 3, 8))
        for name, M in (("a", Ad), ("s", Sd), ("t", Td)):
            rg.save_matrix_market(tmp_path / f"{name}.mtx", M)
        out = tmp_path / "g"
        code = main(["gsvd", "--A", str(tmp_path / "a.mtx"), "--S", str(tmp_path / "s.mtx"),
                     "--T", str(tmp_path / "t.mtx"), "--k", "4", "--p", "4",
                     "--seed", "6", "--out", str(out)])
        assert code == 0
        rep = _read_report(out)
        assert len(rep["singular_values"]) == 4
        assert rep["orthogonality_residual_U"] <= 1e-10
        assert rep["orthogonality_residual_V"] <= 1e-10


class TestSvdCommand:
    def test_singular_values(self, tmp_path):
        Ad = np.diag([5.0, 3.0, 1.0, 0.0, 0.0])
        rg.save_matrix_market(tmp_path / "a.mtx", Ad)
        out = tmp_path / "s"
        code = main(["svd", "--A", str(tmp_path / "a.mtx"), "--k", "3", "--p", "2",
                     "--seed", "2", "--out", str(out)])
        assert code == 0
        np.testing.assert_allclose(_read_report(out)["singular_values"], [5, 3, 1], atol=1e-11)

    def test_evd_modes(self, tmp_path):
        Ad = np.diag([4.0, 2.0, 1.0, 0.0, 0.0, 0.0])
        rg.save_matrix_market(tmp_path / "a.mtx", Ad)
        out = tmp_path / "s"
        code = main(["svd", "--A", str(tmp_path / "a.mtx"), "--k", "3", "--p", "3",
                     "--mode", "evd-two-pass", "--seed", "2", "--out", str(out)])
        assert code == 0
        np.testing.assert_allclose(_read_report(out)["eigenvalues"], [4, 2, 1], atol=1e-11)
