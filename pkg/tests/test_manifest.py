import json

import numpy as np
import pytest

from zsol.errors import DataError
from zsol.manifest import load_manifest, load_sample, load_samples
from zsol.synth import SyntheticSceneSpec, gen_synthetic


@pytest.fixture(scope="module")
def manifest_path(tmp_path_factory):
    root = tmp_path_factory.mktemp("synth")
    spec = SyntheticSceneSpec(n_scenes=3, count_range=(2, 4), image_size=128, seed=3)
    return gen_synthetic(spec, root)


def rewrite(manifest_path, mutate, name="mutants.json"):
    """Copy the manifest JSON through ``mutate`` into the same directory."""
    data = json.loads(manifest_path.read_text())
    mutate(data)
    out = manifest_path.parent / name
    out.write_text(json.dumps(data))
    return out


def test_manifest_loads(manifest_path):
    man = load_manifest(manifest_path)
    assert len(man.records) == 3
    rec = man.records[0]
    assert rec.width == 128 and rec.height == 128
    assert man.resolve(rec.patch_file).exists()
    assert rec.category == "widget"


def test_load_sample_shapes(manifest_path):
    man = load_manifest(manifest_path)
    sample = load_sample(man, man.records[0])
    assert sample.width == 128 and sample.height == 128
    assert len(sample.windows) == 1
    win = sample.windows[0]
    assert win.grid == (8, 8)
    assert win.patches.shape == (64, 32)
    assert sample.text_embedding.shape == (32,)
    assert np.isfinite(sample.text_embedding).all()
    assert sample.gt_points is not None and sample.gt_points.shape[1] == 2


def test_load_samples_order(manifest_path):
    man = load_manifest(manifest_path)
    samples = load_samples(man)
    assert [s.image_id for s in samples] == [r.id for r in man.records]


def test_manifest_missing_file(manifest_path):
    def mutate(data):
        data["samples"][0]["patch_file"] = "nonexistent.zsol"

    with pytest.raises(DataError, match="missing file"):
        load_manifest(rewrite(manifest_path, mutate))


def test_manifest_missing_key(manifest_path):
    def mutate(data):
        del data["samples"][0]["width"]

    with pytest.raises(DataError, match="missing keys"):
        load_manifest(rewrite(manifest_path, mutate))


def test_manifest_unknown_key(manifest_path):
    def mutate(data):
        data["samples"][0]["surprise"] = 1

    with pytest.raises(DataError, match="unknown keys"):
        load_manifest(rewrite(manifest_path, mutate))


def test_manifest_wrong_version(manifest_path):
    def mutate(data):
        data["version"] = 99

    with pytest.raises(DataError, match="version"):
        load_manifest(rewrite(manifest_path, mutate))


def test_manifest_malformed_json(tmp_path):
    bad = tmp_path / "manifest.json"
    bad.write_text("{not json")
    with pytest.raises(DataError):
        load_manifest(bad)


def test_manifest_absent_file(tmp_path):
    with pytest.raises(DataError):
        load_manifest(tmp_path / "absent.json")
