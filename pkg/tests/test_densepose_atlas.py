"""
Pruebas de mapas IUV y del atlas de textura
"""

import numpy as np
import pytest

from src.data.densepose_atlas import (
    ATLAS_COLS,
    DenseBodyMap,
    TextureAtlas,
    atlas_layout,
    cell_size,
    decode_iuv,
    encode_iuv,
    extract_texture,
    load_atlas,
    part_mask,
    render_texture,
    save_atlas,
)
from src.utils.errors import InvalidBodyMapError, InvalidPartError, ShapeMismatchError


def _random_map(rng, height=8, width=8, num_parts=24) -> DenseBodyMap:
    raster = np.zeros((height, width, 3), dtype=np.uint8)
    raster[..., 0] = rng.integers(0, num_parts + 1, size=(height, width))
    raster[..., 1:] = rng.integers(0, 256, size=(height, width, 2))
    return decode_iuv(raster, num_parts)


def _collision_free_map(num_parts=4, size=4, atlas_size=60):
    """Cada píxel de primer plano cae en un texel distinto"""
    cell = cell_size(atlas_size)
    part_index = np.zeros((size, size), dtype=np.int64)
    u = np.zeros((size, size))
    v = np.zeros((size, size))
    for i in range(size):
        for j in range(size):
            if (i + j) % 5 == 4:
                continue
            part_index[i, j] = (i * size + j) % num_parts + 1
            u[i, j] = j / (cell - 1)
            v[i, j] = i / (cell - 1)
    return DenseBodyMap(part_index, u, v, num_parts)


# Test 1: decodificación IUV

def test_decode_all_zero_is_background():
    body_map = decode_iuv(np.zeros((3, 5, 3), dtype=np.uint8))
    assert body_map.shape == (3, 5)
    assert not body_map.foreground.any()
    assert np.all(body_map.u == 0) and np.all(body_map.v == 0)


def test_decode_scales_channels():
    raster = np.zeros((2, 2, 3), dtype=np.uint8)
    raster[0, 0] = (3, 255, 0)
    body_map = decode_iuv(raster)
    assert body_map.part_index[0, 0] == 3
    assert body_map.u[0, 0] == 1.0
    assert body_map.v[0, 0] == 0.0


def test_decode_rejects_part_above_m():
    raster = np.zeros((1, 1, 3), dtype=np.uint8)
    raster[0, 0] = (25, 0, 0)
    with pytest.raises(InvalidBodyMapError):
        decode_iuv(raster, num_parts=24)


def test_decode_forces_background_uv_to_zero():
    raster = np.zeros((1, 2, 3), dtype=np.uint8)
    raster[0, 0] = (0, 120, 80)
    body_map = decode_iuv(raster)
    assert body_map.u[0, 0] == 0.0 and body_map.v[0, 0] == 0.0


def test_decode_rejects_non_uint8_and_empty():
    with pytest.raises(InvalidBodyMapError):
        decode_iuv(np.zeros((2, 2, 3), dtype=np.float32))
    with pytest.raises(InvalidBodyMapError):
        decode_iuv(np.zeros((0, 2, 3), dtype=np.uint8))


def test_encode_decode_is_bit_exact():
    rng = np.random.default_rng(3)
    for _ in range(20):
        body_map = _random_map(rng)
        raster = encode_iuv(body_map)
        again = decode_iuv(raster)
        np.testing.assert_array_equal(again.part_index, body_map.part_index)
        np.testing.assert_array_equal(again.u, body_map.u)
        np.testing.assert_array_equal(again.v, body_map.v)
        np.testing.assert_array_equal(encode_iuv(again), raster)


def test_body_map_invariants_are_checked():
    part_index = np.array([[0, 1]])
    with pytest.raises(InvalidBodyMapError):
        DenseBodyMap(part_index, np.array([[0.3, 0.5]]), np.zeros((1, 2)), num_parts=24)
    with pytest.raises(InvalidBodyMapError):
        DenseBodyMap(part_index, np.array([[0.0, 1.5]]), np.zeros((1, 2)), num_parts=24)
    with pytest.raises(InvalidBodyMapError):
        DenseBodyMap(part_index, np.zeros((1, 3)), np.zeros((1, 2)), num_parts=24)


# Test 2: máscaras de partes

def test_part_mask_direct_definition():
    body_map = DenseBodyMap(
        np.array([[1, 2], [0, 1]]), np.zeros((2, 2)), np.zeros((2, 2)), num_parts=24
    )
    mask = part_mask(body_map, {1})
    np.testing.assert_array_equal(mask.bits, [[True, False], [False, True]])
    assert mask.count == 2


def test_part_mask_all_and_empty():
    body_map = _random_map(np.random.default_rng(0))
    np.testing.assert_array_equal(part_mask(body_map, range(1, 25)).bits, body_map.foreground)
    assert not part_mask(body_map, set()).bits.any()


def test_part_mask_counts_sum_to_foreground():
    body_map = _random_map(np.random.default_rng(1), 16, 16)
    total = sum(part_mask(body_map, {k}).count for k in range(1, 25))
    assert total == int(body_map.foreground.sum())


@pytest.mark.parametrize("bad", [0, 25])
def test_part_mask_rejects_invalid_parts(bad):
    body_map = _random_map(np.random.default_rng(2))
    with pytest.raises(InvalidPartError):
        part_mask(body_map, {bad})


# Test 3: layout del atlas

def test_layout_cells_are_disjoint_and_on_grid():
    atlas_size = 256
    cell = cell_size(atlas_size)
    layout = atlas_layout(atlas_size, 24)
    assert cell == atlas_size // ATLAS_COLS
    assert layout[1] == (0, 0)
    assert layout[7] == (cell, 0)
    assert layout[24] == (3 * cell, 5 * cell)
    occupied = np.zeros((atlas_size, atlas_size), dtype=int)
    for r0, c0 in layout.values():
        occupied[r0:r0 + cell, c0:c0 + cell] += 1
    assert occupied.max() == 1


# Test 4: extracción y renderizado

def test_extract_background_only_is_empty():
    body_map = decode_iuv(np.zeros((4, 4, 3), dtype=np.uint8))
    atlas = extract_texture(np.ones((4, 4, 3)), body_map, atlas_size=60)
    assert not atlas.filled.any()
    assert np.all(atlas.texels == 0)


def test_extract_single_pixel_lands_on_cell_origin():
    part_index = np.zeros((3, 3), dtype=np.int64)
    part_index[1, 2] = 1
    body_map = DenseBodyMap(part_index, np.zeros((3, 3)), np.zeros((3, 3)), num_parts=24)
    image = np.zeros((3, 3, 3))
    image[1, 2] = (0.2, 0.4, 0.6)
    atlas = extract_texture(image, body_map, atlas_size=60)
    assert atlas.filled.sum() == 1
    assert atlas.filled[0, 0]
    np.testing.assert_allclose(atlas.texels[0, 0], (0.2, 0.4, 0.6))


def test_extract_averages_collisions():
    part_index = np.array([[2, 2]])
    u = np.array([[0.5, 0.5]])
    v = np.array([[0.25, 0.25]])
    body_map = DenseBodyMap(part_index, u, v, num_parts=24)
    image = np.array([[[0.1, 0.2, 0.3], [0.5, 0.6, 0.9]]])
    atlas = extract_texture(image, body_map, atlas_size=60)
    assert atlas.filled.sum() == 1
    texel = atlas.texels[atlas.filled][0]
    np.testing.assert_allclose(texel, [0.3, 0.4, 0.6])


def test_extract_matches_bruteforce_accumulator():
    rng = np.random.default_rng(5)
    body_map = _random_map(rng, 12, 12, num_parts=6)
    image = rng.random((12, 12, 3))
    atlas_size = 30
    cell = cell_size(atlas_size)
    layout = atlas_layout(atlas_size, 6)
    sums, counts = {}, {}
    for i in range(12):
        for j in range(12):
            k = body_map.part_index[i, j]
            if k == 0:
                continue
            r = layout[k][0] + int(np.floor(body_map.v[i, j] * (cell - 1) + 1e-9))
            c = layout[k][1] + int(np.floor(body_map.u[i, j] * (cell - 1) + 1e-9))
            sums[(r, c)] = sums.get((r, c), 0) + image[i, j]
            counts[(r, c)] = counts.get((r, c), 0) + 1
    atlas = extract_texture(image, body_map, atlas_size)
    assert int(atlas.filled.sum()) == len(sums)
    for (r, c), total in sums.items():
        np.testing.assert_allclose(atlas.texels[r, c], total / counts[(r, c)], rtol=1e-12)


def test_unfilled_texels_are_zero_and_writes_stay_in_present_cells():
    rng = np.random.default_rng(6)
    body_map = _random_map(rng, 10, 10, num_parts=6)
    atlas = extract_texture(rng.random((10, 10, 3)), body_map, atlas_size=30)
    assert np.all(atlas.texels[~atlas.filled] == 0)
    cell = cell_size(30)
    allowed = np.zeros_like(atlas.filled)
    for k in body_map.parts_present():
        r0, c0 = atlas.part_layout[int(k)]
        allowed[r0:r0 + cell, c0:c0 + cell] = True
    assert not np.any(atlas.filled & ~allowed)


def test_round_trip_is_exact_on_collision_free_maps():
    body_map = _collision_free_map()
    image = np.random.default_rng(7).random((4, 4, 3))
    rendered = render_texture(extract_texture(image, body_map, 60), body_map)
    fg = body_map.foreground
    np.testing.assert_array_equal(rendered[fg], image[fg])
    assert np.all(rendered[~fg] == 0)


def test_render_empty_and_constant_atlas():
    body_map = _random_map(np.random.default_rng(8), num_parts=24)
    empty = TextureAtlas.empty(60, 24)
    assert np.all(render_texture(empty, body_map) == 0)
    constant = TextureAtlas.empty(60, 24)
    constant.texels[:] = (0.25, 0.5, 0.75)
    constant.filled[:] = True
    rendered = render_texture(constant, body_map)
    np.testing.assert_array_equal(rendered[body_map.foreground], np.tile([0.25, 0.5, 0.75], (int(body_map.foreground.sum()), 1)))


def test_extract_rejects_mismatched_image():
    body_map = _random_map(np.random.default_rng(9))
    with pytest.raises(ShapeMismatchError):
        extract_texture(np.zeros((4, 4, 3)), body_map, 60)


def test_atlas_save_load(tmp_path):
    rng = np.random.default_rng(10)
    body_map = _random_map(rng, 8, 8, num_parts=6)
    image = np.round(rng.random((8, 8, 3)) * 255) / 255
    atlas = extract_texture(image, body_map, 30)
    atlas_path, mask_path = save_atlas(atlas, tmp_path / "atlas.png")
    assert mask_path.name == "atlas.filled.png"
    loaded = load_atlas(atlas_path, num_parts=6)
    np.testing.assert_array_equal(loaded.filled, atlas.filled)
    np.testing.assert_allclose(loaded.texels, atlas.texels, atol=0.5 / 255 + 1e-12)
    assert np.all(loaded.texels[~loaded.filled] == 0)
