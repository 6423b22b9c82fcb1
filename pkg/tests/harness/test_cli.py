"""Define tests for the command-line interface."""
import pytest

from cgrlpy.cli import main
from cgrlpy.harness.report import parse_table

from tests.common import fixture_path


def _write_config(tmp_path):
    path = tmp_path / "tiny.ini"
    path.write_text(
        "\n".join(
            [
                "[scenario]",
                "n_human_vehicles = 2",
                "horizon = 5",
                "[policy]",
                "hidden_dim = 8",
                "gat_heads = 2",
                "[trainer]",
                "batch_size = 4",
                "target_update = 5",
                "replay_capacity = 100",
                "[cdrl]",
                "batch_size = 4",
                "hidden_dim = 8",
                "latent_dim = 4",
                "[experiment]",
                "eval_episodes = 2",
                "n_max = 6",
                "",
            ]
        ),
        encoding="utf-8",
    )
    return path


def test_train_eval_report(tmp_path, capsys):
    """Test a train, eval and report round through the command line."""
    config = _write_config(tmp_path)
    out = tmp_path / "run"
    assert (
        main(
            [
                "train",
                "--config",
                str(config),
                "--model",
                "gcn-dqn",
                "--episodes",
                "1",
                "--seed",
                "4",
                "--out",
                str(out),
            ]
        )
        == 0
    )
    checkpoint = out / "checkpoint.ckpt"
    assert capsys.readouterr().out.strip() == str(checkpoint)

    assert main(["eval", "--checkpoint", str(checkpoint), "--seed", "2"]) == 0
    assert capsys.readouterr().out.startswith("gcn-dqn straight: C.R. ")
    assert (out / "eval-gcn-dqn-straight-2.json").exists()

    assert main(["report", "--in", str(out)]) == 0
    cells = parse_table(capsys.readouterr().out)
    assert list(cells) == [("gcn-dqn", "straight")]


def test_random_eval_needs_a_source(capsys):
    """Test that eval without a checkpoint asks for one."""
    assert main(["eval"]) == 1
    assert capsys.readouterr().err.startswith("error: eval needs --checkpoint")


def test_missing_config(tmp_path, capsys):
    """Test that a domain failure exits with status 1."""
    code = main(["train", "--config", str(tmp_path / "absent.ini"), "--out", "x"])
    assert code == 1
    assert capsys.readouterr().err.startswith("error: ")


def test_render_missing_log(tmp_path, capsys):
    """Test rendering a trajectory that does not exist."""
    code = main(["render", "--log", str(tmp_path / "absent.json"), "--out", "x"])
    assert code == 1
    assert "error: Cannot read trajectory" in capsys.readouterr().err


def test_usage_errors():
    """Test that argument errors exit through the parser."""
    with pytest.raises(SystemExit) as err:
        main(["fly"])
    assert err.value.code == 2
    with pytest.raises(SystemExit):
        main(["train", "--model", "transformer", "--out", "x"])


def test_mi_estimate(capsys):
    """Test entropies and information estimates of a sample table."""
    assert main(["mi-estimate", "--input", str(fixture_path("mi_samples.csv"))]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert [line.split(" = ")[0] for line in lines] == [
        "S(zc)",
        "S(zs)",
        "S(action)",
        "I(zc; zs)",
        "I(zc; zs | action)",
    ]
    for line in lines[:3]:
        assert 0.0 <= float(line.split(" = ")[1]) <= 2.585


def test_mi_estimate_bad_input(tmp_path, capsys):
    """Test unreadable and malformed sample tables."""
    assert main(["mi-estimate", "--input", str(tmp_path / "absent.csv")]) == 1
    path = tmp_path / "samples.csv"
    path.write_text("u,v\n1\n", encoding="utf-8")
    assert main(["mi-estimate", "--input", str(path)]) == 1
    assert capsys.readouterr().err.count("error: ") == 2
