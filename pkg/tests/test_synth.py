import numpy as np
import pytest

from zsol.fileio import read_points, read_tensor
from zsol.manifest import load_manifest
from zsol.synth import SyntheticSceneSpec, _place_cells, gen_synthetic


def tree_bytes(manifest_path):
    root = manifest_path.parent
    return {p.name: p.read_bytes() for p in sorted(root.iterdir())}


def test_generation_is_byte_identical(tmp_path):
    spec = SyntheticSceneSpec(n_scenes=4, seed=9)
    a = gen_synthetic(spec, tmp_path / "a")
    b = gen_synthetic(spec, tmp_path / "b")
    ta, tb = tree_bytes(a), tree_bytes(b)
    assert ta.keys() == tb.keys()
    for name in ta:
        assert ta[name] == tb[name], name


def test_seed_changes_output(tmp_path):
    a = gen_synthetic(SyntheticSceneSpec(n_scenes=2, seed=0), tmp_path / "a")
    b = gen_synthetic(SyntheticSceneSpec(n_scenes=2, seed=1), tmp_path / "b")
    assert tree_bytes(a) != tree_bytes(b)


def test_points_interior_and_separated(tmp_path):
    spec = SyntheticSceneSpec(n_scenes=6, count_range=(3, 6), image_size=128, seed=5)
    man = load_manifest(gen_synthetic(spec, tmp_path))
    grid = 128 // 16
    for rec in man.records:
        pts = read_points(man.resolve(rec.points_file)).points
        assert spec.count_range[0] <= len(pts) <= spec.count_range[1]
        cells = [(int((y - 7.5) / 16), int((x - 7.5) / 16)) for x, y in pts]
        for r, c in cells:
            assert 0 < r < grid - 1 and 0 < c < grid - 1
        for i, (r1, c1) in enumerate(cells):
            for r2, c2 in cells[i + 1 :]:
                assert max(abs(r1 - r2), abs(c1 - c2)) >= 2


def test_points_align_with_patch_cells(tmp_path):
    # at high SNR the planted patches correlate with the text vector far
    # more than background noise does
    spec = SyntheticSceneSpec(n_scenes=3, snr=100.0, seed=1)
    man = load_manifest(gen_synthetic(spec, tmp_path))
    token_emb = read_tensor(man.resolve("token_embeddings.zsol")).astype(np.float64)
    from zsol.fileio import read_tokens

    seq = read_tokens(man.resolve("tokens.zstk"))
    sentence = token_emb[seq.end_index]
    for rec in man.records:
        patches = read_tensor(man.resolve(rec.patch_file)).astype(np.float64)[0]
        gh, gw, dim = patches.shape
        flat = patches.reshape(-1, dim)
        cos = flat @ sentence / (np.linalg.norm(flat, axis=1) * np.linalg.norm(sentence))
        pts = read_points(man.resolve(rec.points_file)).points
        planted = {int((y - 7.5) / 16) * gw + int((x - 7.5) / 16) for x, y in pts}
        background = [c for i, c in enumerate(cos) if i not in planted]
        lowest_planted = min(cos[i] for i in planted)
        assert lowest_planted > 0.9
        assert lowest_planted > max(background) + 0.2


def test_place_cells_overflow():
    rng = np.random.default_rng(0)
    with pytest.raises(ValueError):
        _place_cells(rng, grid=4, count=5)  # only 4 interior cells exist


def test_place_cells_zero():
    assert _place_cells(np.random.default_rng(0), grid=8, count=0) == []


def test_spec_validation():
    with pytest.raises(ValueError):
        SyntheticSceneSpec(n_scenes=0)
    with pytest.raises(ValueError):
        SyntheticSceneSpec(count_range=(5, 2))
    with pytest.raises(ValueError):
        SyntheticSceneSpec(image_size=100)  # not a multiple of the patch size
    with pytest.raises(ValueError):
        SyntheticSceneSpec(snr=0.0)
