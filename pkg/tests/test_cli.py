import json

import numpy as np
import pytest

from gclust.cli import main
from gclust.evaluation import (
    MonteCarloConfig,
    adjusted_rand_index,
    pamk,
    pairwise_frobenius,
)
from gclust.ingest import load_data_matrix, save_data_matrix, devectorize
from gclust.model_selection import gclust as gclust_op
from gclust.nmf import compare_solvers


EVENTS = "0.10\t0\t1\tA\n0.40\t1\t2\tA\n0.60\t2\t0\tB\n0.90\t0\t1\tB\n"


def run(args):
    return main([str(a) for a in args])


def read_bytes(path):
    return path.read_bytes()


class TestIngestCommand:
    def test_writes_matrix_and_meta(self, tmp_path):
        events = tmp_path / "events.tsv"
        events.write_text(EVENTS, encoding="utf-8")
        out = tmp_path / "out"
        assert run(["ingest", "--events", events, "--bins", 2, "--out-dir", out]) == 0
        dm = load_data_matrix(out / "X.csv")
        assert dm.T == 2
        assert dm.X.sum() == 4
        meta = json.loads((out / "X.meta.json").read_text())
        assert meta["n"] == 3
        assert "indexing" in meta

    def test_missing_input_exits_2_with_json_error(self, tmp_path, capsys):
        code = run(["ingest", "--events", tmp_path / "nope.tsv", "--out-dir", tmp_path / "o"])
        assert code == 2
        err = json.loads(capsys.readouterr().err.strip())
        assert "not found" in err["error"]

    def test_contraction_map_shrinks_vertex_set(self, tmp_path):
        events = tmp_path / "events.tsv"
        events.write_text(EVENTS, encoding="utf-8")
        cmap = tmp_path / "map.txt"
        cmap.write_text("0 0\n1 0\n2 1\n", encoding="utf-8")
        out = tmp_path / "out"
        assert run(["ingest", "--events", events, "--bins", 2,
                    "--map", cmap, "--out-dir", out]) == 0
        dm = load_data_matrix(out / "X.csv")
        assert dm.n == 2
        assert dm.X.sum() == 4  # mass preserved

    def test_strict_parse_failure(self, tmp_path, capsys):
        events = tmp_path / "events.tsv"
        events.write_text("bad\tline\n", encoding="utf-8")
        assert run(["ingest", "--events", events, "--out-dir", tmp_path / "o"]) == 2
        assert "line 1" in json.loads(capsys.readouterr().err.strip())["error"]


class TestSimulateCommand:
    def test_two_pattern_preset(self, tmp_path):
        out = tmp_path / "fixture"
        assert run(["simulate", "--preset", "two-pattern", "--out-dir", out]) == 0
        dm = load_data_matrix(out / "X.csv")
        assert dm.X.shape == (36, 10)
        truth = json.loads((out / "truth.json").read_text())["labels"]
        assert truth == [1] * 5 + [2] * 5

    def test_swimmer_preset(self, tmp_path):
        out = tmp_path / "swimmer"
        assert run(["simulate", "--preset", "swimmer", "--out-dir", out]) == 0
        dm = load_data_matrix(out / "X.csv")
        assert dm.X.shape == (220, 256)

    def test_block_preset_reproducible(self, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        for out in (a, b):
            assert run(["simulate", "--preset", "block", "--rho", 0.5,
                        "--seed", 9, "--out-dir", out]) == 0
        assert read_bytes(a / "X.csv") == read_bytes(b / "X.csv")
        assert read_bytes(a / "truth.json") == read_bytes(b / "truth.json")


class TestGclustCommand:
    @pytest.fixture()
    def fixture_dir(self, tmp_path):
        out = tmp_path / "fixture"
        run(["simulate", "--preset", "two-pattern", "--out-dir", out])
        return out

    def test_fixed_r_writes_single_row_table(self, tmp_path):
        rng = np.random.default_rng(0)
        X = np.outer(rng.uniform(0.5, 1.5, 16), rng.uniform(0.5, 1.5, 6))
        from gclust.ingest import DataMatrix
        save_data_matrix(DataMatrix(X), tmp_path / "X.csv")
        out = tmp_path / "out"
        assert run(["gclust", "--x", tmp_path / "X.csv", "--r", 1,
                    "--restarts", 3, "--out-dir", out]) == 0
        lines = (out / "scores.csv").read_text().strip().splitlines()
        assert len(lines) == 2
        labels = json.loads((out / "labels.json").read_text())["labels"]
        assert set(labels) == {1}

    def test_select_dim_picks_two_on_fixture(self, fixture_dir, tmp_path):
        out = tmp_path / "out"
        assert run(["gclust", "--x", fixture_dir / "X.csv", "--select-dim",
                    "--r-max", 4, "--restarts", 10, "--out-dir", out]) == 0
        assert json.loads((out / "selection.json").read_text())["r_hat"] == 2
        labels = json.loads((out / "labels.json").read_text())["labels"]
        truth = json.loads((fixture_dir / "truth.json").read_text())["labels"]
        assert adjusted_rand_index(labels, truth) == 1.0

    def test_invalid_r_exits_2(self, fixture_dir, tmp_path, capsys):
        code = run(["gclust", "--x", fixture_dir / "X.csv", "--r", 99,
                    "--out-dir", tmp_path / "o"])
        assert code == 2
        assert "invalid r" in json.loads(capsys.readouterr().err.strip())["error"]

    def test_byte_identical_reruns(self, fixture_dir, tmp_path):
        outs = [tmp_path / "r1", tmp_path / "r2"]
        for out in outs:
            assert run(["gclust", "--x", fixture_dir / "X.csv", "--r", 2,
                        "--restarts", 5, "--seed", 3, "--out-dir", out]) == 0
        for name in ("scores.csv", "labels.json", "W.csv", "H.csv", "factorization.json"):
            assert read_bytes(outs[0] / name) == read_bytes(outs[1] / name)

    def test_parity_with_library_call(self, fixture_dir, tmp_path):
        out = tmp_path / "out"
        run(["gclust", "--x", fixture_dir / "X.csv", "--r", 2, "--restarts", 5,
             "--seed", 3, "--out-dir", out])
        dm = load_data_matrix(fixture_dir / "X.csv")
        res = gclust_op(dm, 2, restarts=5, seed=3)
        got = json.loads((out / "labels.json").read_text())
        assert got["labels"] == [int(x) for x in res.labels]
        scores = (out / "scores.csv").read_text().strip().splitlines()[1].split(",")
        assert float(scores[3]) == res.score.aicc


class TestDiagnoseCommand:
    def _block_fixture(self, tmp_path, m=8):
        # strong two-block structure so the usvt mean estimate stays positive
        rng = np.random.default_rng(1)
        n = 2 * m
        mean = np.full((n, n), 20.0)
        mean[:m, :m] = 60.0
        mean[m:, m:] = 50.0
        slices = rng.poisson(mean, size=(3, n, n)).astype(float)
        from gclust.ingest import DataMatrix, GraphSequence, vectorize
        dm = vectorize(GraphSequence(slices))
        save_data_matrix(dm, tmp_path / "X.csv")
        return tmp_path / "X.csv"

    def test_full_selection_default(self, tmp_path):
        x = self._block_fixture(tmp_path)
        out = tmp_path / "out"
        assert run(["diagnose", "--x", x, "--baseline-reps", 2000,
                    "--cache-dir", tmp_path / "cache", "--out-dir", out]) == 0
        report = (out / "residual_report.csv").read_text().strip().splitlines()
        assert report[0] == "t,l,sigma_hat,sigma_bar"
        assert len(report) == 1 + 3 * 16  # T slices x p rows
        mse = json.loads((out / "residual_mse.json").read_text())["mse"]
        assert set(mse) == {"0", "1", "2"}

    def test_subset_selection_and_single_slice(self, tmp_path):
        x = self._block_fixture(tmp_path)
        out = tmp_path / "out"
        assert run(["diagnose", "--x", x, "--select", "0,3,5", "--t", 1,
                    "--baseline-reps", 2000, "--cache-dir", tmp_path / "cache",
                    "--out-dir", out]) == 0
        report = (out / "residual_report.csv").read_text().strip().splitlines()
        assert len(report) == 1 + 3

    def test_bad_selection_dims_exit_2(self, tmp_path, capsys):
        x = self._block_fixture(tmp_path)
        code = run(["diagnose", "--x", x, "--select", "0,99",
                    "--baseline-reps", 2000, "--cache-dir", tmp_path / "cache",
                    "--out-dir", tmp_path / "o"])
        assert code == 2
        capsys.readouterr()


class TestBenchmarkCommand:
    def test_report_matches_library_run(self, tmp_path):
        cfg = MonteCarloConfig(rho_grid=(1.0,), contraction_levels=("blocks",),
                               replicates=2, seed=5, methods=("pamk_dist",))
        cfg_path = tmp_path / "config.json"
        cfg.to_json(cfg_path)
        out = tmp_path / "out"
        assert run(["benchmark", "--config", cfg_path, "--out-dir", out]) == 0
        lines = (out / "report.csv").read_text().strip().splitlines()
        assert lines[0] == "rho,contraction,method,mean_ari,stderr,reps"
        from gclust.evaluation import run_monte_carlo
        direct = run_monte_carlo(cfg)
        cells = lines[1].split(",")
        assert float(cells[3]) == direct.rows[0].mean_ari

    def test_single_replicate_reproducible(self, tmp_path):
        cfg = MonteCarloConfig(rho_grid=(0.5,), contraction_levels=("blocks",),
                               replicates=1, seed=11, methods=("pamk_dist", "gmm_pca"))
        cfg_path = tmp_path / "config.json"
        cfg.to_json(cfg_path)
        a, b = tmp_path / "a", tmp_path / "b"
        for out in (a, b):
            assert run(["benchmark", "--config", cfg_path, "--out-dir", out]) == 0
        assert read_bytes(a / "report.csv") == read_bytes(b / "report.csv")


class TestNmfCompareCommand:
    def test_trace_schema_and_parity(self, tmp_path):
        out_fix = tmp_path / "fixture"
        run(["simulate", "--preset", "two-pattern", "--out-dir", out_fix])
        out = tmp_path / "out"
        assert run(["nmf-compare", "--x", out_fix / "X.csv", "--r", 2,
                    "--restarts", 4, "--iter-grid", "0,50", "--seed", 2,
                    "--out-dir", out]) == 0
        lines = (out / "nmf_compare.csv").read_text().strip().splitlines()
        assert lines[0] == "solver,iteration,objective,eps_w,eps_h"
        assert len(lines) == 1 + 4  # 2 solvers x 2 checkpoints
        dm = load_data_matrix(out_fix / "X.csv")
        rows = compare_solvers(dm.X, 2, restarts=4, iter_grid=(0, 50), base_seed=2)
        got = [line.split(",") for line in lines[1:]]
        assert float(got[0][2]) == rows[0].objective
        assert float(got[-1][4]) == rows[-1].eps_H

    def test_init_only_grid(self, tmp_path):
        out_fix = tmp_path / "fixture"
        run(["simulate", "--preset", "two-pattern", "--out-dir", out_fix])
        out = tmp_path / "out"
        assert run(["nmf-compare", "--x", out_fix / "X.csv", "--r", 2,
                    "--restarts", 3, "--iter-grid", "0", "--out-dir", out]) == 0
        lines = (out / "nmf_compare.csv").read_text().strip().splitlines()
        assert len(lines) == 1 + 2
        assert all(line.split(",")[1] == "0" for line in lines[1:])


class TestHelp:
    def test_every_subcommand_lists_defaults(self, capsys):
        for sub in ("ingest", "gclust", "diagnose", "simulate", "benchmark", "nmf-compare"):
            with pytest.raises(SystemExit) as exc:
                main([sub, "--help"])
            assert exc.value.code == 0
            text = capsys.readouterr().out
            assert "default" in text
