import numpy as np
import pytest

from zsol.cli import main, parse_config
from zsol.errors import DataError
from zsol.fileio import read_history_csv, read_points, read_tensor, write_points
from zsol.grid import PointSet


@pytest.fixture(scope="module")
def synth_dir(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli_synth")
    code = main(
        [
            "synth",
            str(root),
            "--scenes",
            "6",
            "--count-min",
            "2",
            "--count-max",
            "4",
            "--seed",
            "7",
        ]
    )
    assert code == 0
    return root


@pytest.fixture(scope="module")
def trained_dir(synth_dir, tmp_path_factory):
    out = tmp_path_factory.mktemp("cli_train")
    cfg = out / "train.cfg"
    cfg.write_text(
        "contrastive_epochs = 2\n"
        "mse_epochs = 5  # short smoke run\n"
        "lr = 0.01\n"
    )
    code = main(
        ["train", str(synth_dir / "manifest.json"), str(out), "--config", str(cfg), "--seed", "7"]
    )
    assert code == 0
    return out


def test_parse_config_values():
    cfg = parse_config("lr = 0.5\nmse_epochs=3\n# comment only\n\nseed = 4 # trailing\n")
    assert cfg == {"lr": 0.5, "mse_epochs": 3, "seed": 4}


def test_parse_config_errors():
    with pytest.raises(DataError):
        parse_config("no_such_key = 1\n")
    with pytest.raises(DataError):
        parse_config("just words\n")
    with pytest.raises(DataError):
        parse_config("lr = fast\n")


def test_unknown_subcommand_exits_2():
    with pytest.raises(SystemExit) as e:
        main(["frobnicate"])
    assert e.value.code == 2


def test_gen_density(tmp_path, capsys):
    pts = tmp_path / "p.zspt"
    write_points(pts, PointSet(points=np.array([[20.0, 12.0]])))
    out = tmp_path / "d.zsol"
    code = main(
        ["gen-density", str(pts), str(out), "--height", "32", "--width", "48", "--sigma", "2.0"]
    )
    assert code == 0
    density = read_tensor(out)
    assert density.shape == (32, 48)
    # truncated kernel support loses a little mass
    assert 0.99 < float(density.sum()) <= 1.0 + 1e-6
    assert "mass" in capsys.readouterr().out


def test_gen_density_malformed_input_exits_3(tmp_path, capsys):
    bad = tmp_path / "bad.zspt"
    bad.write_bytes(b"garbage")
    assert main(["gen-density", str(bad), str(tmp_path / "d.zsol"), "--height", "8", "--width", "8"]) == 3
    assert "error:" in capsys.readouterr().err


def test_train_writes_model_and_history(trained_dir):
    assert (trained_dir / "model.zsmd").is_file()
    rows = read_history_csv(trained_dir / "history.csv")
    assert len(rows) == 7
    assert [s for _, s, _ in rows] == ["contrastive"] * 2 + ["mse"] * 5


def test_train_is_deterministic(synth_dir, trained_dir, tmp_path):
    out = tmp_path / "again"
    cfg = tmp_path / "train.cfg"
    cfg.write_text("contrastive_epochs = 2\nmse_epochs = 5\nlr = 0.01\n")
    code = main(
        ["train", str(synth_dir / "manifest.json"), str(out), "--config", str(cfg), "--seed", "7"]
    )
    assert code == 0
    assert (out / "model.zsmd").read_bytes() == (trained_dir / "model.zsmd").read_bytes()
    assert (out / "history.csv").read_bytes() == (trained_dir / "history.csv").read_bytes()


def test_localize_and_evaluate_round_trip(synth_dir, trained_dir, tmp_path, capsys):
    pred_dir = tmp_path / "preds"
    code = main(
        [
            "localize",
            str(synth_dir / "manifest.json"),
            str(trained_dir / "model.zsmd"),
            str(pred_dir),
            "--regime",
            "dense",
        ]
    )
    assert code == 0
    out = capsys.readouterr().out
    assert "regime=dense alpha=0.019608 beta=0.060000" in out
    pred_files = sorted(pred_dir.glob("*.zspt"))
    assert len(pred_files) == 6

    gt_dir = tmp_path / "gts"
    gt_dir.mkdir()
    for pf in pred_files:
        pts = read_points(synth_dir / f"{pf.stem}_points.zspt")
        write_points(gt_dir / pf.name, pts)

    report_dir = tmp_path / "report"
    code = main(
        [
            "evaluate",
            str(pred_dir),
            str(gt_dir),
            "--preset",
            "fsc147",
            "--out",
            str(report_dir),
        ]
    )
    assert code == 0
    out = capsys.readouterr().out
    assert "F1" in out and "MAE" in out
    assert (report_dir / "report.csv").is_file()
    assert (report_dir / "report.txt").is_file()
    assert (report_dir / "per_image.csv").is_file()
    per_image = (report_dir / "per_image.csv").read_text().strip().splitlines()
    assert len(per_image) == 7  # header + six images


def test_evaluate_self_is_perfect(synth_dir, tmp_path, capsys):
    gt_dir = tmp_path / "gt"
    gt_dir.mkdir()
    for pf in sorted(synth_dir.glob("*_points.zspt")):
        pts = read_points(pf)
        conf = PointSet(points=pts.points, confidences=np.ones(len(pts)))
        write_points(gt_dir / pf.name, conf)
    code = main(["evaluate", str(gt_dir), str(gt_dir), "--preset", "carpk"])
    assert code == 0
    out = capsys.readouterr().out
    assert "1.0000" in out
    assert "MAE 0.0000" in out


def test_evaluate_unknown_preset_exits_2(tmp_path):
    with pytest.raises(SystemExit) as e:
        main(["evaluate", str(tmp_path), str(tmp_path), "--preset", "voc"])
    assert e.value.code == 2


def test_evaluate_empty_dir_exits_3(tmp_path, capsys):
    (tmp_path / "empty").mkdir()
    code = main(
        ["evaluate", str(tmp_path / "empty"), str(tmp_path / "empty"), "--preset", "fsc147"]
    )
    assert code == 3
    assert "error:" in capsys.readouterr().err


def test_localize_zero_model_empty_predictions(synth_dir, tmp_path, capsys):
    from zsol.align import ProjectionModel
    from zsol.fileio import write_model

    ckpt = tmp_path / "zero.zsmd"
    write_model(ckpt, ProjectionModel(np.zeros((32, 32)), np.zeros(32)))
    pred_dir = tmp_path / "preds"
    code = main(["localize", str(synth_dir / "manifest.json"), str(ckpt), str(pred_dir)])
    assert code == 0
    for pf in pred_dir.glob("*.zspt"):
        assert len(read_points(pf)) == 0
    assert ": 0 points" in capsys.readouterr().out


def test_localize_threads_match_serial(synth_dir, trained_dir, tmp_path, monkeypatch):
    serial = tmp_path / "serial"
    threaded = tmp_path / "threaded"
    argv = ["localize", str(synth_dir / "manifest.json"), str(trained_dir / "model.zsmd")]
    assert main(argv + [str(serial)]) == 0
    monkeypatch.setenv("ZSOL_THREADS", "4")
    assert main(argv + [str(threaded)]) == 0
    for pf in sorted(serial.glob("*.zspt")):
        assert pf.read_bytes() == (threaded / pf.name).read_bytes()


def test_bad_threads_env_exits_3(synth_dir, trained_dir, tmp_path, monkeypatch, capsys):
    monkeypatch.setenv("ZSOL_THREADS", "many")
    code = main(
        [
            "localize",
            str(synth_dir / "manifest.json"),
            str(trained_dir / "model.zsmd"),
            str(tmp_path / "x"),
        ]
    )
    assert code == 3
    assert "ZSOL_THREADS" in capsys.readouterr().err


def test_tssm_inspect_title(capsys):
    assert main(["tssm-inspect", "--title", "apples"]) == 0
    out = capsys.readouterr().out
    assert "W = " in out
    assert "support_norm = " in out
    # marker, A, photo, of, apples -> title occupies position 4
    assert "title_span = [4, 5)" in out


def test_tssm_inspect_tokens_requires_embeddings(tmp_path, capsys):
    from zsol.fileio import write_tokens
    from zsol.tssm import MockTokenizer

    tok = tmp_path / "t.zstk"
    write_tokens(tok, MockTokenizer().encode("apples"))
    assert main(["tssm-inspect", "--tokens", str(tok)]) == 3
    assert "embeddings" in capsys.readouterr().err


def test_tssm_inspect_from_files(synth_dir, capsys):
    code = main(
        [
            "tssm-inspect",
            "--tokens",
            str(synth_dir / "tokens.zstk"),
            "--embeddings",
            str(synth_dir / "token_embeddings.zsol"),
        ]
    )
    assert code == 0
    assert "W = " in capsys.readouterr().out
