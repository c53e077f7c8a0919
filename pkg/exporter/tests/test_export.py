import numpy as np
import pytest
from PIL import Image

from zsol.fileio import read_tensor, read_tokens
from zsol.manifest import load_manifest, load_samples
from zsol_export import ExportError, ExportJob, ImageRecord, StubEncoder, run_export
from zsol_export.cli import main
from zsol_export.export import export_image, export_text, load_image
from zsol_export.windows import plan


def paint_image(path, width, height, blobs, seed=0):
    """Gray background with bright square blobs at the given centers."""
    rng = np.random.default_rng(seed)
    arr = rng.integers(90, 110, size=(height, width, 3), dtype=np.uint8)
    for cx, cy in blobs:
        x0, y0 = int(cx) - 8, int(cy) - 8
        arr[max(0, y0) : y0 + 16, max(0, x0) : x0 + 16] = (250, 60, 60)
    Image.fromarray(arr).save(path)
    return arr


def make_records(root, sizes, seed=0):
    records = []
    for i, (w, h) in enumerate(sizes):
        blobs = [(w // 2, h // 2), (w // 4, h // 4)]
        path = root / f"img_{i}.png"
        paint_image(path, w, h, blobs, seed=seed + i)
        records.append(
            ImageRecord(
                image_id=f"img_{i}",
                image_path=path,
                points=np.asarray(blobs, dtype=np.float64),
                category="toy",
            )
        )
    return records


def test_export_text_women_and_kids(tmp_path):
    enc = StubEncoder(dim=16, seed=0)
    files = export_text(enc, "women and kids", tmp_path, "wk")
    seq = read_tokens(tmp_path / files["token_file"])
    assert seq.title_length <= 3
    emb = read_tensor(tmp_path / files["token_embedding_file"])
    assert emb.shape == (77, 16)
    sent = read_tensor(tmp_path / "wk_sentence.zsol")
    assert sent.shape == (1, 16)
    # sentence vector rides in the end-marker row
    np.testing.assert_array_equal(emb[seq.end_index], sent[0])


def test_export_text_empty_title_errors(tmp_path):
    with pytest.raises(ExportError):
        export_text(StubEncoder(), "   ", tmp_path, "bad")


def test_export_text_deterministic(tmp_path):
    enc = StubEncoder(dim=16, seed=4)
    for sub in ("a", "b"):
        (tmp_path / sub).mkdir()
        export_text(enc, "apples", tmp_path / sub, "t")
    for name in ("t_tokens.zstk", "t_token_embeddings.zsol", "t_sentence.zsol"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_export_image_single_window_grid(tmp_path):
    arr = paint_image(tmp_path / "i.png", 384, 384, [(100, 100)])
    placements = plan(384, 384)
    assert len(placements) == 1
    stacked = export_image(StubEncoder(dim=8), arr, placements)
    assert stacked.shape == (1, 24, 24, 8)


def test_export_image_three_windows(tmp_path):
    arr = paint_image(tmp_path / "i.png", 640, 384, [(100, 100)])
    placements = plan(640, 384)
    stacked = export_image(StubEncoder(dim=8), arr, placements)
    assert stacked.shape == (3, 24, 24, 8)


def test_load_image_corrupt_errors(tmp_path):
    bad = tmp_path / "corrupt.png"
    bad.write_bytes(b"\x89PNG but not really")
    with pytest.raises(ExportError) as err:
        load_image(bad)
    assert "corrupt.png" in str(err.value)


def test_run_export_round_trips_in_consumer(tmp_path):
    records = make_records(tmp_path, [(128, 128), (384, 384), (500, 384)])
    job = ExportJob(
        dataset="custom",
        split="val",
        out_dir=tmp_path / "out",
        records=records,
        encoder_name="stub",
        dim=16,
        seed=0,
    )
    manifest_path = run_export(job)
    man = load_manifest(manifest_path)
    samples = load_samples(man)
    assert [s.image_id for s in samples] == ["img_0", "img_1", "img_2"]
    assert len(samples[2].windows) == len(plan(500, 384))
    for s in samples:
        assert s.gt_points is not None
        assert s.text_embedding.shape == (16,)


def test_run_export_is_deterministic(tmp_path):
    records = make_records(tmp_path, [(128, 128)])
    out_a = run_export(
        ExportJob("custom", "val", tmp_path / "a", records=records, encoder_name="stub")
    )
    out_b = run_export(
        ExportJob("custom", "val", tmp_path / "b", records=records, encoder_name="stub")
    )
    for pa in sorted(out_a.parent.iterdir()):
        assert pa.read_bytes() == (out_b.parent / pa.name).read_bytes(), pa.name


def test_run_export_parallel_matches_serial(tmp_path):
    records = make_records(tmp_path, [(128, 128), (160, 128), (192, 160)])
    serial = run_export(
        ExportJob("custom", "val", tmp_path / "s", records=records, encoder_name="stub")
    )
    parallel = run_export(
        ExportJob("custom", "val", tmp_path / "p", records=records, encoder_name="stub", workers=3)
    )
    for pa in sorted(serial.parent.iterdir()):
        assert pa.read_bytes() == (parallel.parent / pa.name).read_bytes(), pa.name


def test_run_export_pads_odd_sizes(tmp_path):
    records = make_records(tmp_path, [(130, 70)])
    manifest_path = run_export(
        ExportJob("custom", "val", tmp_path / "out", records=records, encoder_name="stub")
    )
    man = load_manifest(manifest_path)
    assert (man.records[0].width, man.records[0].height) == (144, 80)
    load_samples(man)


def test_run_export_empty_errors(tmp_path):
    with pytest.raises(ExportError):
        run_export(ExportJob("custom", "val", tmp_path, records=[], encoder_name="stub"))


def test_cli_stub_export(tmp_path, capsys):
    from test_datasets import make_carpk_tree

    make_carpk_tree(tmp_path, {"lot_1": [(10, 10, 42, 42), (60, 60, 92, 92)]})
    img = tmp_path / "CARPK_devkit" / "data" / "Images" / "lot_1.png"
    paint_image(img, 128, 96, [(26, 26), (76, 76)])
    code = main(
        [
            "--dataset",
            "carpk",
            "--split",
            "train",
            "--out",
            str(tmp_path / "export"),
            "--data-root",
            str(tmp_path),
            "--encoder",
            "stub",
        ]
    )
    assert code == 0
    assert "manifest.json" in capsys.readouterr().out
    man = load_manifest(tmp_path / "export" / "manifest.json")
    assert man.records[0].category == "cars"
    np.testing.assert_array_equal(load_samples(man)[0].gt_points, [[26.0, 26.0], [76.0, 76.0]])


def test_cli_missing_dataset_exits_3(tmp_path, capsys):
    code = main(
        [
            "--dataset",
            "fsc147",
            "--split",
            "val",
            "--out",
            str(tmp_path / "o"),
            "--data-root",
            str(tmp_path),
            "--encoder",
            "stub",
        ]
    )
    assert code == 3
    assert "error:" in capsys.readouterr().err


def test_cli_bad_dataset_exits_2(tmp_path):
    with pytest.raises(SystemExit) as e:
        main(["--dataset", "voc", "--split", "val", "--out", "x", "--data-root", "y"])
    assert e.value.code == 2
