import pytest

from intht.cli import build_parser, config_from_args, main
from intht.harness import ORDER3_DEFAULTS, read_csv


def test_run_and_determinism(tmp_path):
    out = tmp_path / "a.csv"
    argv = ["run", "--p", "12", "--big-k", "3", "--m", "100", "--iters", "4", "--b", "64", "--out", str(out)]
    assert main(argv) == 0
    first = out.read_bytes()
    assert main(argv) == 0
    assert out.read_bytes() == first
    _, rows = read_csv(out)
    assert len(rows) == 5


def test_exit_codes(tmp_path, capsys):
    assert main(["run", "--m", "0"]) == 2
    assert "config error" in capsys.readouterr().err
    assert main(["run", "--p", "12", "--big-k", "3", "--m", "100", "--iters", "1",
                 "--out", str(tmp_path / "missing" / "x.csv")]) == 3
    assert "i/o error" in capsys.readouterr().err
    assert main(["run", "--config", str(tmp_path / "nope.cfg")]) == 2
    with pytest.raises(SystemExit) as exc:
        main(["run", "--mode", "bogus"])
    assert exc.value.code == 2


def test_config_precedence(tmp_path):
    cfg_file = tmp_path / "c.cfg"
    cfg_file.write_text("# defaults for a small run\np = 12\nm = 50\nb = 32  # buckets\nhash-reuse = yes\n")
    args = build_parser().parse_args(["run", "--config", str(cfg_file), "--b", "64"])
    cfg = config_from_args(args)
    assert (cfg.p, cfg.m, cfg.b, cfg.hash_reuse) == (12, 50, 64, True)
    args = build_parser().parse_args(["run", "--config", str(cfg_file), "--no-hash-reuse"])
    assert config_from_args(args).hash_reuse is False
    cfg_file.write_text("colour = blue\n")
    assert main(["run", "--config", str(cfg_file)]) == 2


def test_order3_defaults():
    args = build_parser().parse_args(["order3"])
    cfg = config_from_args(args, ORDER3_DEFAULTS)
    assert (cfg.p, cfg.K, cfg.order) == (30, 20, 3)
    args = build_parser().parse_args(["order3", "--p", "10", "--big-k", "4"])
    assert config_from_args(args, ORDER3_DEFAULTS).p == 10


def test_validate_params_output(tmp_path):
    out = tmp_path / "v.csv"
    assert main(["validate-params", "--b", "100", "--delta", "0.5", "--grad-norm", "1", "--out", str(out)]) == 0
    _, (row,) = read_csv(out)
    assert row["min_b"] == 1728 and row["b_ok"] == 0
    assert main(["validate-params", "--big-k", "20", "--k", "20", "--d", "3", "--delta", "1",
                 "--grad-norm", "1", "--out", str(out)]) == 0
    _, (row,) = read_csv(out)
    assert row["min_d_ktop"] == 277


def test_log_level_after_subcommand(tmp_path):
    assert main(["run", "--p", "12", "--big-k", "2", "--m", "50", "--iters", "1",
                 "--log-level", "warning", "--out", str(tmp_path / "x.csv")]) == 0
