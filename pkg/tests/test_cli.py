import os

import numpy as np
import pytest

from pamdp.cli import main
from pamdp.harness import read_csv

MINI_CONF = """
env = bandit
algorithm = pdqn-multipass
episodes = 5
seeds = 0
eval_episodes = 2
batch_size = 4
initial_fill = 4
replay_capacity = 32
hidden = 8
epsilon_horizon = 2
ou_sigma = 0.1
"""


@pytest.fixture
def trained(tmp_path):
    conf = tmp_path / "run.conf"
    conf.write_text(MINI_CONF + f"out_dir = {tmp_path / 'run'}\n")
    main(["train", "--config", str(conf)])
    return tmp_path


class TestTrainCommand:
    def test_writes_csv_and_checkpoint(self, trained):
        run = trained / "run"
        assert (run / "train_seed0.csv").exists()
        assert (run / "checkpoint_seed0.ckpt").exists()

    def test_seed_and_out_overrides(self, tmp_path):
        conf = tmp_path / "run.conf"
        conf.write_text(MINI_CONF + f"out_dir = {tmp_path / 'ignored'}\n")
        main(["train", "--config", str(conf), "--seeds", "7", "--out",
              str(tmp_path / "override")])
        assert (tmp_path / "override" / "train_seed7.csv").exists()


class TestEvalCommand:
    def test_eval_writes_csv(self, trained, capsys):
        ckpt = trained / "run" / "checkpoint_seed0.ckpt"
        out = trained / "eval.csv"
        main(["eval", "--checkpoint", str(ckpt), "--episodes", "3", "--out", str(out)])
        rows = read_csv(str(out))
        assert len(rows) == 3
        assert list(rows[0].keys()) == ["seed", "episode", "return", "steps"]
        assert "return" in capsys.readouterr().out


class TestDiagnoseCommand:
    def test_sensitivity_csv_schema(self, trained):
        ckpt = trained / "run" / "checkpoint_seed0.ckpt"
        out = trained / "sweep.csv"
        main(["diagnose-sensitivity", "--checkpoint", str(ckpt), "--action", "1",
              "--points", "11", "--out", str(out)])
        rows = read_csv(str(out))
        assert len(rows) == 11
        assert list(rows[0].keys()) == ["sweep_value", "q_1", "q_2"]
        values = [float(r["sweep_value"]) for r in rows]
        assert values[0] == -1.0 and values[-1] == 1.0
        # multipass: only the swept action's column varies
        q1 = {r["q_1"] for r in rows}
        q2 = {r["q_2"] for r in rows}
        assert len(q1) == 1 and len(q2) > 1

    def test_target_network_flag(self, trained, capsys):
        ckpt = trained / "run" / "checkpoint_seed0.ckpt"
        main(["diagnose-sensitivity", "--checkpoint", str(ckpt), "--action", "0",
              "--points", "3", "--use-target"])
        out = capsys.readouterr().out
        assert out.startswith("sweep_value,q_1,q_2")


class TestSweepCommands:
    def test_sweep_and_report(self, tmp_path, capsys):
        conf = tmp_path / "sweep.conf"
        conf.write_text(
            MINI_CONF
            + f"out_dir = {tmp_path / 'sweep'}\n"
            + "sweep.lr_q = 1e-2,1e-3\nsweep.seeds = 1\n"
        )
        main(["sweep", "--config", str(conf)])
        assert (tmp_path / "sweep" / "sweep_results.csv").exists()
        main(["sweep-report", "--dir", str(tmp_path / "sweep")])
        out = capsys.readouterr().out
        assert "#1" in out and "#2" in out
