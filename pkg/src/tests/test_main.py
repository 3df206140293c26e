from unittest.mock import MagicMock, patch

import pytest

from app.dataset import VALIDATION_COUNT
from main import main, parse_arguments, run_workflow


def test_parse_gen_arguments():
    """Gen flags and their defaults."""
    args = parse_arguments(
        ["gen", "--problem", "burgers2d", "--traj", "10", "--out", "d", "--n", "32,32"]
    )
    assert args.command == "gen"
    assert args.n == (32, 32)
    assert args.noise == 0.0
    assert args.seed == 0
    assert args.validation == VALIDATION_COUNT


def test_parse_gen_without_grid():
    """The grid defaults to the problem's own."""
    args = parse_arguments(["gen", "--problem", "kpp", "--traj", "1", "--out", "d"])
    assert args.n is None


def test_parse_eval_times():
    """Snapshot times parse from a list, an empty string or nothing."""
    base = ["eval", "--checkpoint", "c", "--problem", "euler", "--tfinal", "0.2"]
    args = parse_arguments(base + ["--out", "r", "--times", "[0.1, 0.2]"])
    assert args.tfinal == 0.2
    assert args.times == [0.1, 0.2]
    assert parse_arguments(base + ["--out", "r"]).times is None
    assert parse_arguments(base + ["--out", "r", "--times", ""]).times == []


def test_missing_subcommand():
    """Running without a subcommand is a usage error."""
    with pytest.raises(SystemExit) as excinfo:
        parse_arguments([])
    assert excinfo.value.code == 2


@patch("main.save_dataset")
@patch("main.make_dataset")
def test_gen_dispatch(mock_make_dataset, mock_save_dataset):
    """Gen builds and saves a dataset."""
    args = parse_arguments(
        ["gen", "--problem", "euler", "--traj", "4", "--noise", "0.1", "--out", "d"]
    )
    assert run_workflow(args) == 0
    mock_make_dataset.assert_called_once_with(
        "euler", 4, 0.1, 0, n=None, validation_count=VALIDATION_COUNT
    )
    mock_save_dataset.assert_called_once_with(mock_make_dataset.return_value, "d")


@patch("main.train")
@patch("main.load_dataset")
def test_train_dispatch(mock_load_dataset, mock_train):
    """Train loads the dataset and applies extra arguments."""
    mock_train.return_value = MagicMock(best_val_loss=0.5)
    args = parse_arguments(
        ["train", "--data", "d", "--out", "o", "--extra_args", '{"epochs": 3}']
    )
    assert run_workflow(args) == 0
    mock_load_dataset.assert_called_once_with("d")
    dataset, cfg, out = mock_train.call_args.args
    assert dataset is mock_load_dataset.return_value
    assert cfg.epochs == 3
    assert out == "o"


@patch("main.emit_report")
@patch("main.evaluate")
def test_eval_dispatch(mock_evaluate, mock_emit_report):
    """Eval evaluates the checkpoint and emits the report."""
    report = MagicMock()
    report.data = {"error": MagicMock(values=[0.0, 0.25])}
    mock_evaluate.return_value = report
    args = parse_arguments(
        ["eval", "--checkpoint", "c", "--problem", "kpp", "--tfinal", "1", "--out", "r"]
    )
    assert run_workflow(args) == 0
    mock_evaluate.assert_called_once_with("c", "kpp", 1.0, None)
    mock_emit_report.assert_called_once_with(report, "r")


@patch("main.run_selftest", return_value=False)
def test_selftest_failure_exit_code(mock_run_selftest, capsys):
    """A failing self-test exits with status 1."""
    assert main(["selftest"]) == 1
    assert "failed" in capsys.readouterr().err


@patch("main.run_selftest", return_value=True)
def test_selftest_success(mock_run_selftest):
    """A passing self-test exits with status 0."""
    assert main(["selftest"]) == 0


@patch("main.load_dataset")
def test_errors_exit_with_message(mock_load_dataset, capsys):
    """Known errors print one line and exit with status 1."""
    mock_load_dataset.side_effect = FileNotFoundError("Dataset manifest not found")
    assert main(["train", "--data", "missing", "--out", "o"]) == 1
    err = capsys.readouterr().err
    assert err.startswith("train: FileNotFoundError")
    assert "manifest not found" in err
