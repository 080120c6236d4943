import csv

import numpy as np
import pytest

from monotone_peridynamics.app import main
from monotone_peridynamics.integrations.checkpoint_store import load_checkpoint, save_checkpoint
from monotone_peridynamics.integrations.dataset_store import decode_field, read_dataset
from monotone_peridynamics.schemas.enums import SplitName
from monotone_peridynamics.services.constitutive import ground_truth_model

"""
End-to-end runs of the mpno command line on small synthetic datasets.
"""

GENERATE_FLAGS = ["--n", "8", "--split", "4,2,2", "--nx", "17", "--fine-dx", "0.03125", "--J", "5", "--seed", "3"]


def _rows(path):
    with path.open() as handle:
        return list(csv.reader(handle))


class TestCommandLine:

    @pytest.fixture()
    def dataset_dir(self, tmp_path):
        """ Ex-II dataset on dx = 1/16 generated through the CLI """
        directory = tmp_path / "data"
        assert main(["generate", "--example", "ex2", "--out", str(directory)] + GENERATE_FLAGS) == 0
        return directory

    @pytest.fixture()
    def truth_checkpoint(self, tmp_path):
        return save_checkpoint(ground_truth_model("ex2", 1.0, 0.25), tmp_path / "truth.ckpt")

    def test_generate_writes_a_readable_dataset(self, dataset_dir):
        dataset = read_dataset(dataset_dir)

        assert [dataset.count(name) for name in SplitName] == [4, 2, 2]
        assert dataset.grids[SplitName.TRAIN].counts == (25,)
        assert len(list(dataset_dir.glob("*.f64"))) == 16

    def test_generate_is_idempotent(self, dataset_dir, tmp_path):
        again = tmp_path / "again"
        assert main(["generate", "--example", "ex2", "--out", str(again)] + GENERATE_FLAGS) == 0

        for path in sorted(dataset_dir.iterdir()):
            assert path.read_bytes() == (again / path.name).read_bytes()

    def test_train_eval_solve_pipeline(self, dataset_dir, truth_checkpoint, tmp_path):
        run = tmp_path / "run"
        assert main(["train", "--data", str(dataset_dir), "--out", str(run),
                     "--case", "1", "--epochs", "2", "--lr", "0.01", "--seed", "1"]) == 0

        history = _rows(run / "history.csv")
        assert history[0] == ["epoch", "train_loss", "valid_Eb", "lr"]
        assert [row[0] for row in history[1:]] == ["0", "1"]
        model = load_checkpoint(run / "model.ckpt")
        assert model.trainable == {"k"}

        assert main(["eval", "--data", str(dataset_dir), "--checkpoint", str(run / "model.ckpt"),
                     "--out", str(run / "eval"), "--no-solve"]) == 0
        metrics = _rows(run / "eval" / "metrics.csv")
        assert metrics[0] == ["metric", "split", "dx", "value"]
        names = [row[0] for row in metrics[1:]]
        assert names == ["E_b", "E_b", "E_k", "E_g", "E_gk", "normalization"]

        solved = tmp_path / "solved"
        assert main(["solve", "--data", str(dataset_dir), "--checkpoint", str(truth_checkpoint),
                     "--out", str(solved), "--index", "1"]) == 0
        u = decode_field((solved / "u_solved.f64").read_bytes())
        expected = read_dataset(dataset_dir).u[SplitName.TEST][1]
        assert u.shape == (25, 1)
        assert np.array_equal(u[:4], expected[:4])
        diagnostics = _rows(solved / "diagnostics.csv")
        assert diagnostics[0] == ["phase", "iteration", "residual_norm", "damping", "accepted"]
        assert {row[0] for row in diagnostics[1:]} == {"small", "full"}

    def test_eval_with_solves(self, dataset_dir, truth_checkpoint, tmp_path):
        assert main(["--threads", "2", "eval", "--data", str(dataset_dir), "--checkpoint", str(truth_checkpoint),
                     "--out", str(tmp_path)]) == 0

        metrics = {row[0]: row for row in _rows(tmp_path / "metrics.csv")[1:]}
        assert float(metrics["solver_failure_rate"][3]) == 0.0
        assert 0.0 <= float(metrics["E_u"][3]) < 0.2
        assert float(metrics["E_k"][3]) == 0.0

    def test_same_seed_training_is_byte_identical(self, dataset_dir, tmp_path):
        outputs = []
        for name in ("first", "second"):
            run = tmp_path / name
            assert main(["train", "--data", str(dataset_dir), "--out", str(run),
                         "--case", "3", "--epochs", "2", "--lr", "0.01", "--seed", "7"]) == 0
            outputs.append(((run / "model.ckpt").read_bytes(), (run / "history.csv").read_bytes()))

        assert outputs[0] == outputs[1]

    def test_config_file_settings_and_flag_precedence(self, dataset_dir, tmp_path):
        config_file = tmp_path / "run.cfg"
        config_file.write_text("# short run\nepochs = 3\ncase = 1\nkernel_hidden = 8\n")

        assert main(["--config", str(config_file), "train", "--data", str(dataset_dir),
                     "--out", str(tmp_path / "run"), "--epochs", "1"]) == 0
        assert len(_rows(tmp_path / "run" / "history.csv")) == 2
        assert load_checkpoint(tmp_path / "run" / "model.ckpt").kernel.hidden_widths == [8]

    def test_architecture_comparison(self, dataset_dir, tmp_path):
        config_file = tmp_path / "small.cfg"
        config_file.write_text("stretch_width = 4\nstretch_layers = 2\nmlp_hidden = 6,6\n")

        assert main(["--config", str(config_file), "compare", "--data", str(dataset_dir),
                     "--out", str(tmp_path / "compare"), "--epochs", "1"]) == 0

        rows = _rows(tmp_path / "compare" / "comparison.csv")
        assert rows[0] == ["architecture", "metric", "value"]
        assert [row[1] for row in rows[1:3]] == ["stretch_min", "stretch_max"]
        assert float(rows[1][2]) < 1.0 < float(rows[2][2])
        metrics = ["parameters", "best_valid_E_b", "E_b_test", "E_g", "E_u", "solver_failures"]
        assert [(row[0], row[1]) for row in rows[3:]] == [(arch, m) for arch in ("mgn", "mlp") for m in metrics]
        counts = {row[0]: int(row[2]) for row in rows[3:] if row[1] == "parameters"}
        assert counts["mgn"] < counts["mlp"]

    def test_sweep_ranks_grid_points(self, dataset_dir, tmp_path):
        assert main(["sweep", "--data", str(dataset_dir), "--out", str(tmp_path), "--case", "1", "--epochs", "1",
                     "--widths", "4", "--depths", "1,2", "--lrs", "0.01"]) == 0

        rows = _rows(tmp_path / "sweep.csv")
        assert rows[0] == ["rank", "width", "depth", "learning_rate", "best_valid_E_b", "best_epoch", "parameters"]
        assert [row[0] for row in rows[1:]] == ["1", "2"]
        assert sorted(row[2] for row in rows[1:]) == ["1", "2"]
        assert float(rows[1][4]) <= float(rows[2][4])

    @pytest.mark.parametrize("argv", [
        ["generate", "--example", "ex1"],
        ["frobnicate"],
        [],
        ["generate", "--example", "ex1", "--out", "unused", "--split", "1,1,1", "--n", "4"],
        ["convergence", "--example", "ex1", "--out", "unused", "--dx", "0.0625"],
        ["train", "--data", "does-not-exist", "--out", "unused"],
    ])
    def test_usage_errors_exit_with_one(self, argv, tmp_path, monkeypatch):
        monkeypatch.chdir(tmp_path)
        assert main(argv) == 1

    def test_sample_index_out_of_range(self, dataset_dir, truth_checkpoint, tmp_path):
        assert main(["solve", "--data", str(dataset_dir), "--checkpoint", str(truth_checkpoint),
                     "--out", str(tmp_path / "solved"), "--index", "99"]) == 1

    def test_corrupt_dataset_exits_with_two(self, dataset_dir, tmp_path):
        target = dataset_dir / "u_train_2.f64"
        data = bytearray(target.read_bytes())
        data[40] ^= 0xFF
        target.write_bytes(bytes(data))

        assert main(["train", "--data", str(dataset_dir), "--out", str(tmp_path / "run"), "--epochs", "1"]) == 2

    def test_unconverged_solve_exits_with_three(self, dataset_dir, truth_checkpoint, tmp_path):
        config_file = tmp_path / "solver.cfg"
        config_file.write_text("tolerance = 1e-300\nmax_iterations = 1\n")

        assert main(["--config", str(config_file), "solve", "--data", str(dataset_dir),
                     "--checkpoint", str(truth_checkpoint), "--out", str(tmp_path / "solved")]) == 3
        assert (tmp_path / "solved" / "diagnostics.csv").is_file()

    def test_convergence_study_outputs(self, tmp_path):
        assert main(["convergence", "--example", "ex1", "--out", str(tmp_path), "--dx", "0.125,0.0625,0.03125",
                     "--fine-dx", "0.015625", "--n", "8", "--J", "5"]) == 0

        errors = _rows(tmp_path / "errors.csv")
        assert errors[0] == ["metric", "dx", "error"]
        assert {row[0] for row in errors[1:]} == {"E_k", "E_b"}
        assert len(errors) == 1 + 2 * 3
        orders = _rows(tmp_path / "orders.csv")
        assert [row[0] for row in orders[1:]] == ["E_k", "E_b"]
        assert (tmp_path / "errors.svg").read_text().count("<polyline") == 2


@pytest.mark.slow
class TestConvergenceOrders:
    """ Least-squares kernel recovery under mesh refinement on the default levels 2^-5..2^-8 """

    @pytest.mark.parametrize("example, low, high", [("ex1", 0.5, 1.5), ("ex2", 1.5, 2.5)])
    def test_least_squares_kernel_order(self, example, low, high, tmp_path):
        assert main(["convergence", "--example", example, "--out", str(tmp_path)]) == 0

        orders = {row[0]: row[1] for row in _rows(tmp_path / "orders.csv")[1:]}
        assert low <= float(orders["E_k"]) <= high
