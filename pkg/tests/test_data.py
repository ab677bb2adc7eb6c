"""
Pruebas del índice del dataset, del muestreo de pares y del generador sintético
"""

import logging
from pathlib import Path

import numpy as np
import pytest
from PIL import Image

from src.data.data_processor import ImageProcessor
from src.data.dataset_index import (
    DatasetIndex,
    ImageRecord,
    load_index,
    sample_pair,
    sample_pair_records,
)
from src.data.densepose_atlas import DenseBodyMap, decode_iuv, render_texture
from src.data.synthetic import (
    SyntheticSpec,
    identity_atlas,
    make_synthetic_dataset,
    part_palette,
    render_body_map,
    sample_pose,
)
from src.utils.errors import ConfigError, DatasetError


def _write_record(root: Path, identity: str, frame: str, value: float = 0.5) -> None:
    part_index = np.zeros((8, 8), dtype=np.int64)
    part_index[2:6, 2:6] = 1
    body_map = DenseBodyMap(part_index, np.where(part_index > 0, 0.5, 0.0), np.zeros((8, 8)), num_parts=6)
    ImageProcessor.save_image(np.full((8, 8, 3), value), root / identity / f"{frame}.img.png")
    ImageProcessor.save_iuv(body_map, root / identity / f"{frame}.iuv.png")


def _fake_index(counts) -> DatasetIndex:
    records = [
        ImageRecord(identity, f"{j:03d}", Path(f"{identity}/{j:03d}.img.png"), Path(f"{identity}/{j:03d}.iuv.png"))
        for identity, n in counts.items()
        for j in range(n)
    ]
    return DatasetIndex(Path("."), records, num_parts=6)


# Test 1: índice

def test_index_of_fabricated_dataset(tmp_path):
    for identity, frames in {"ana": 3, "bea": 2, "carl": 1}.items():
        for j in range(frames):
            _write_record(tmp_path, identity, f"{j:03d}")
    index = load_index(tmp_path, num_parts=6)
    assert len(index) == 6
    assert index.identities() == ["ana", "bea", "carl"]
    assert index.pairable_identities() == ["ana", "bea"]
    assert [r.frame for r in index.records_for("carl")] == ["000"]
    assert len(index.records_in()) == 6


def test_index_drops_images_without_iuv(tmp_path, caplog):
    _write_record(tmp_path, "ana", "000")
    _write_record(tmp_path, "ana", "001")
    ImageProcessor.save_image(np.zeros((8, 8, 3)), tmp_path / "ana" / "002.img.png")
    with caplog.at_level(logging.WARNING):
        index = load_index(tmp_path, num_parts=6)
    assert len(index) == 2
    assert "1 imágenes descartadas" in caplog.text


def test_index_errors_on_missing_or_empty_dir(tmp_path):
    with pytest.raises(DatasetError):
        load_index(tmp_path / "nope")
    with pytest.raises(DatasetError):
        load_index(tmp_path)


def test_index_reads_splits_and_metadata(tmp_path):
    _write_record(tmp_path, "ana", "000")
    _write_record(tmp_path, "bea", "000")
    (tmp_path / "train.txt").write_text("ana\n")
    (tmp_path / "test.txt").write_text("bea\n\n")
    (tmp_path / "dataset.yaml").write_text("num_parts: 6\n")
    index = load_index(tmp_path)
    assert index.num_parts == 6
    assert index.identities("train") == ["ana"]
    assert index.identities("test") == ["bea"]
    assert index.identities("val") == ["ana", "bea"]


def test_loaded_rasters_are_cached(tmp_path):
    _write_record(tmp_path, "ana", "000", value=0.2)
    index = load_index(tmp_path, num_parts=6)
    record = index.records[0]
    assert index.load_image(record) is index.load_image(record)
    np.testing.assert_allclose(index.load_image(record), np.rint(0.2 * 255) / 255)
    assert index.load_map(record).parts_present().tolist() == [1]


def test_raster_cache_is_bounded_lru(tmp_path):
    for frame in ("000", "001", "002"):
        _write_record(tmp_path, "ana", frame)
    index = load_index(tmp_path, num_parts=6)
    index.cache_size = 2
    first, second, third = index.records
    kept = index.load_image(first)
    index.load_image(second)
    assert index.load_image(first) is kept
    index.load_image(third)
    assert len(index._cache) == 2
    assert first.image_path in index._cache
    assert second.image_path not in index._cache


def test_raster_cache_can_be_disabled(tmp_path):
    _write_record(tmp_path, "ana", "000")
    index = load_index(tmp_path, num_parts=6)
    index.cache_size = 0
    record = index.records[0]
    assert index.load_image(record) is not index.load_image(record)
    assert not index._cache


# Test 2: muestreo de pares

def test_identity_with_two_records_always_yields_that_pair():
    index = _fake_index({"ana": 2, "solo": 1})
    rng = np.random.default_rng(0)
    for _ in range(50):
        first, second = sample_pair_records(index, rng)
        assert first.identity == second.identity == "ana"
        assert {first.frame, second.frame} == {"000", "001"}


def test_pair_sampling_is_uniform_over_identities():
    index = _fake_index({"ana": 2, "bea": 5})
    rng = np.random.default_rng(1)
    draws = 10_000
    hits = sum(sample_pair_records(index, rng)[0].identity == "ana" for _ in range(draws))
    sigma = np.sqrt(0.25 / draws)
    assert abs(hits / draws - 0.5) < 3 * sigma


def test_pair_sampling_is_seeded():
    index = _fake_index({"ana": 3, "bea": 4, "carl": 2})
    first, second = np.random.default_rng(7), np.random.default_rng(7)
    a = [sample_pair_records(index, first) for _ in range(20)]
    b = [sample_pair_records(index, second) for _ in range(20)]
    assert a == b


def test_pair_sampling_without_pairs_raises():
    with pytest.raises(DatasetError):
        sample_pair_records(_fake_index({"ana": 1, "bea": 1}), np.random.default_rng(0))


def test_sample_pair_loads_rasters(tiny_dataset):
    sample = sample_pair(tiny_dataset, np.random.default_rng(0), "train")
    assert sample.source_image.shape == (32, 32, 3)
    assert sample.target_map.shape == (32, 32)
    assert sample.identity in tiny_dataset.identities("train")


# Test 3: dataset sintético

def test_synthetic_layout_and_splits(tiny_dataset):
    assert len(tiny_dataset) == 6
    assert tiny_dataset.identities("train") == ["id0000", "id0001"]
    assert tiny_dataset.identities("test") == ["id0002"]
    assert tiny_dataset.num_parts == 6
    for record in tiny_dataset.records:
        body_map = tiny_dataset.load_map(record)
        assert set(body_map.parts_present().tolist()) <= set(range(1, 7))
        assert 1 in body_map.parts_present() and 2 in body_map.parts_present()


def test_synthetic_is_byte_identical_for_same_seed(tmp_path):
    spec = SyntheticSpec(num_identities=2, poses_per_identity=2, test_identities=1, image_size=16, atlas_size=12)
    make_synthetic_dataset(tmp_path / "a", spec, rng=5)
    make_synthetic_dataset(tmp_path / "b", spec, rng=5)
    files_a = sorted(p.relative_to(tmp_path / "a") for p in (tmp_path / "a").rglob("*") if p.is_file())
    files_b = sorted(p.relative_to(tmp_path / "b") for p in (tmp_path / "b").rglob("*") if p.is_file())
    assert files_a == files_b
    for rel in files_a:
        assert (tmp_path / "a" / rel).read_bytes() == (tmp_path / "b" / rel).read_bytes()


def test_identity_colors_persist_across_poses(tiny_dataset):
    torso_colors = {}
    for identity in tiny_dataset.identities():
        colors = set()
        for record in tiny_dataset.records_for(identity):
            image = np.rint(tiny_dataset.load_image(record) * 255).astype(int)
            torso = tiny_dataset.load_map(record).part_index == 2
            colors |= {tuple(c) for c in image[torso]}
        # color base + color de raya
        assert 1 <= len(colors) <= 2
        torso_colors[identity] = colors
    assert torso_colors["id0000"] != torso_colors["id0001"]


def test_rendered_pixels_come_from_the_identity_palette():
    rng = np.random.default_rng(3)
    atlas = identity_atlas(rng, 24, 6)
    body_map = render_body_map(sample_pose(rng), 32, 6)
    image = render_texture(atlas, body_map)
    for k in body_map.parts_present():
        palette = {tuple(c) for c in np.rint(part_palette(atlas, int(k)) * 255).astype(int)}
        pixels = {tuple(c) for c in np.rint(image[body_map.part_index == k] * 255).astype(int)}
        assert pixels <= palette


def test_body_maps_survive_png_encoding(tmp_path):
    for num_parts in (6, 24):
        body_map = render_body_map(sample_pose(np.random.default_rng(num_parts)), 48, num_parts)
        path = ImageProcessor.save_iuv(body_map, tmp_path / f"m{num_parts}.iuv.png")
        again = ImageProcessor.load_iuv(path, num_parts)
        np.testing.assert_array_equal(again.part_index, body_map.part_index)
        np.testing.assert_array_equal(again.u, body_map.u)


def test_twenty_four_part_mannequin_uses_many_parts():
    body_map = render_body_map(sample_pose(np.random.default_rng(4)), 96, 24)
    present = set(body_map.parts_present().tolist())
    assert {1, 2, 23, 24} <= present
    assert len(present) >= 16


def test_synthetic_spec_validation():
    with pytest.raises(ConfigError):
        SyntheticSpec(num_parts=12)
    with pytest.raises(ConfigError):
        SyntheticSpec(num_identities=2, test_identities=2)
    spec = SyntheticSpec.from_dict({"num_identities": "3", "unknown": 1})
    assert spec.num_identities == 3


def test_decode_accepts_every_synthetic_raster(tiny_dataset):
    for record in tiny_dataset.records:
        raster = np.asarray(Image.open(record.iuv_path).convert("RGB"))
        decode_iuv(raster, num_parts=6)
