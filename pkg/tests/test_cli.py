import numpy as np
import pytest

from wavex import cli
from wavex.dataio import read_dataset
from wavex.images import read_pgm


TINY_CONFIG = """\
# desk config for exercising the command surface
benchmark = simplewave
method = fno-lf
n_per_freq = 5
grid = 16
gen_seed = 0
split_seed = 1
eval_seed = 0
hf_ratio = 2/8
sample_steps = 2
operator.layers = 2
operator.modes = 4
operator.width = 8
operator.lift_width = 8
operator.epochs = 2
operator.batch = 4
enhancer.base_width = 8
enhancer.time_dim = 8
enhancer.epochs = 2
enhancer.batch = 4
"""


@pytest.fixture()
def workspace(tmp_path):
    cfg = tmp_path / "desk.cfg"
    cfg.write_text(TINY_CONFIG)
    return tmp_path, cfg


class TestCli:
    def test_gen_data_and_heatmap(self, workspace, capsys):
        tmp, _ = workspace
        data = tmp / "toy.wfd"
        cli.main(["gen-data", "--benchmark", "simplewave", "--n-per-freq", "2",
                  "--grid", "16", "--seed", "3", "--out", str(data)])
        ds = read_dataset(data)
        assert len(ds) == 14  # 7 frequencies x 2

        cli.main(["heatmap", "--data", str(data), "--index", "1",
                  "--out", str(tmp / "panel")])
        img = read_pgm(tmp / "panel_amp.pgm")
        assert img.shape == (16, 16)

    def test_split_command(self, workspace):
        tmp, cfg = workspace
        data = tmp / "toy.wfd"
        cli.main(["gen-data", "--n-per-freq", "5", "--grid", "16", "--seed", "0",
                  "--out", str(data)])
        out = tmp / "split.kv"
        cli.main(["split", "--data", str(data), "--config", str(cfg),
                  "--out", str(out)])
        from wavex.pipeline import parse_kv
        kv = parse_kv(out.read_text())
        lf_train = [int(v) for v in kv["lf_train"].split(",")]
        hf_test = [int(v) for v in kv["hf_test"].split(",")]
        assert len(lf_train) == 16  # floor(5 * 0.8) * 4 freqs
        assert len(hf_test) == 12

    def test_run_and_report(self, workspace, capsys):
        tmp, cfg = workspace
        cli.main(["run", "--config", str(cfg), "--out", str(tmp / "exp")])
        shown = capsys.readouterr().out
        assert "Overall" in shown
        run_dirs = list((tmp / "exp" / "runs").iterdir())
        assert len(run_dirs) == 1
        cli.main(["report", "--run", str(run_dirs[0])])
        assert "Overall" in capsys.readouterr().out

    def test_train_operator_writes_checkpoint(self, workspace):
        tmp, cfg = workspace
        data = tmp / "toy.wfd"
        cli.main(["gen-data", "--n-per-freq", "5", "--grid", "16", "--seed", "0",
                  "--out", str(data)])
        out = tmp / "op"
        cli.main(["train-operator", "--data", str(data), "--config", str(cfg),
                  "--out", str(out)])
        assert (out / "operator.wxck").exists()
        assert (out / "operator.kv").exists()
        from wavex.pipeline import load_operator
        model = load_operator(out)
        assert model.frozen

    def test_similarity_command(self, workspace, capsys):
        tmp, _ = workspace
        data = tmp / "toy.wfd"
        cli.main(["gen-data", "--n-per-freq", "3", "--grid", "16", "--seed", "1",
                  "--out", str(data)])
        cli.main(["similarity", "--data", str(data), "--max-envs", "2",
                  "--out", str(tmp / "sim")])
        assert (tmp / "sim_samp.pgm").exists()
        assert (tmp / "sim_similarity.txt").exists()

    def test_unknown_config_key_rejected(self, workspace):
        tmp, _ = workspace
        bad = tmp / "bad.cfg"
        bad.write_text("nonsense_key = 1\n")
        with pytest.raises(SystemExit):
            cli.main(["run", "--config", str(bad), "--out", str(tmp / "x")])
