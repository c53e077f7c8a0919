import json

import numpy as np
import pytest
from scipy.io import savemat

from zsol_export import ExportError, load_carpk, load_dataset, load_fsc147, load_shanghaitech


def make_fsc_tree(root, names_points, split="val"):
    ann = {
        name: {"points": [list(p) for p in pts], "box_examples_coordinates": []}
        for name, pts in names_points.items()
    }
    (root / "annotation_FSC147_384.json").write_text(json.dumps(ann))
    (root / "Train_Test_Val_FSC_147.json").write_text(
        json.dumps({"train": [], "val": list(names_points), "test": []})
    )
    (root / "ImageClasses_FSC147.txt").write_text(
        "".join(f"{name}\tsea shells\n" for name in names_points)
    )
    (root / "images_384_VarV2").mkdir()
    return root


def test_fsc147_loader(tmp_path):
    make_fsc_tree(tmp_path, {"7.jpg": [(1.0, 2.0), (3.0, 4.0)], "8.jpg": []})
    records = load_fsc147(tmp_path, "val")
    assert [r.image_id for r in records] == ["7", "8"]
    assert records[0].category == "sea shells"
    np.testing.assert_array_equal(records[0].points, [[1.0, 2.0], [3.0, 4.0]])
    assert records[1].points.shape == (0, 2)
    # count equals the annotation length
    assert len(records[0].points) == 2


def test_fsc147_unknown_split(tmp_path):
    make_fsc_tree(tmp_path, {"7.jpg": []})
    with pytest.raises(ExportError):
        load_fsc147(tmp_path, "minival")


def test_fsc147_missing_annotation_file(tmp_path):
    with pytest.raises(ExportError):
        load_fsc147(tmp_path, "val")


def make_shtech_tree(root, part, split, points_by_image):
    base = root / f"part_{part}" / f"{split}_data"
    (base / "images").mkdir(parents=True)
    (base / "ground-truth").mkdir()
    for name, pts in points_by_image.items():
        (base / "images" / f"{name}.jpg").write_bytes(b"\xff\xd8fake")
        location = np.asarray(pts, dtype=np.float64).reshape(-1, 2)
        struct = np.zeros((1, 1), dtype=[("location", "O"), ("number", "O")])
        struct[0, 0] = (location, np.array([[len(location)]]))
        cell = np.zeros((1, 1), dtype=object)
        cell[0, 0] = struct
        savemat(base / "ground-truth" / f"GT_{name}.mat", {"image_info": cell})


def test_shanghaitech_loader(tmp_path):
    make_shtech_tree(tmp_path, "A", "train", {"IMG_1": [(10.0, 20.0), (30.0, 40.0)]})
    records = load_shanghaitech(tmp_path, "A", "train")
    assert len(records) == 1
    assert records[0].image_id == "IMG_1"
    assert records[0].category == "people"
    np.testing.assert_array_equal(records[0].points, [[10.0, 20.0], [30.0, 40.0]])


def test_shanghaitech_no_val_split(tmp_path):
    with pytest.raises(ExportError):
        load_shanghaitech(tmp_path, "A", "val")


def test_shanghaitech_missing_gt(tmp_path):
    make_shtech_tree(tmp_path, "B", "test", {"IMG_1": [(1.0, 1.0)]})
    (tmp_path / "part_B" / "test_data" / "ground-truth" / "GT_IMG_1.mat").unlink()
    with pytest.raises(ExportError):
        load_shanghaitech(tmp_path, "B", "test")


def make_carpk_tree(root, boxes_by_image, split="train"):
    data = root / "CARPK_devkit" / "data"
    for sub in ("Images", "Annotations", "ImageSets"):
        (data / sub).mkdir(parents=True)
    (data / "ImageSets" / f"{split}.txt").write_text(
        "".join(f"{name}\n" for name in boxes_by_image)
    )
    for name, boxes in boxes_by_image.items():
        (data / "Images" / f"{name}.png").write_bytes(b"\x89PNGfake")
        (data / "Annotations" / f"{name}.txt").write_text(
            "".join(f"{x1} {y1} {x2} {y2} 1\n" for x1, y1, x2, y2 in boxes)
        )


def test_carpk_loader_converts_boxes(tmp_path):
    make_carpk_tree(tmp_path, {"20160331_NTU_00001": [(0, 0, 10, 10), (4, 6, 8, 10)]})
    records = load_carpk(tmp_path, "train")
    assert records[0].category == "cars"
    np.testing.assert_array_equal(records[0].points, [[5.0, 5.0], [6.0, 8.0]])


def test_carpk_empty_annotation(tmp_path):
    make_carpk_tree(tmp_path, {"empty_lot": []})
    records = load_carpk(tmp_path, "train")
    assert records[0].points.shape == (0, 2)


def test_carpk_bad_box_line(tmp_path):
    make_carpk_tree(tmp_path, {"bad": [(0, 0, 10, 10)]})
    ann = tmp_path / "CARPK_devkit" / "data" / "Annotations" / "bad.txt"
    ann.write_text("1 2 3\n")
    with pytest.raises(ExportError):
        load_carpk(tmp_path, "train")


def test_load_dataset_dispatch(tmp_path):
    make_carpk_tree(tmp_path, {"a": [(0, 0, 2, 2)]})
    assert load_dataset("carpk", tmp_path, "train")[0].image_id == "a"
    with pytest.raises(ExportError):
        load_dataset("voc", tmp_path, "train")
