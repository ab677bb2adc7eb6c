"""
Pruebas de las métricas de evaluación
"""

import itertools
import logging

import numpy as np
import pytest
from scipy.signal import convolve2d

from src.analysis.metrics import (
    fid,
    fid_from_features,
    frechet_distance,
    pairwise_perceptual_diversity,
    per_pose_diversity,
    perceptual_distance,
    pooled_features,
    ssim,
    variation_part,
    variation_rest,
)
from src.models.losses import IdentityFeatures, RandomConvFeatures
from src.utils.errors import InsufficientSamplesError, ShapeMismatchError


def _images(n, seed=0, size=16):
    rng = np.random.default_rng(seed)
    return [rng.random((size, size, 3)) for _ in range(n)]


def _textbook_ssim(a, b):
    """SSIM con ventana gaussiana 11×11 aplicada solo en posiciones válidas"""
    axis = np.arange(-5, 6)
    g = np.exp(-(axis ** 2) / (2 * 1.5 ** 2))
    g /= g.sum()
    window = np.outer(g, g)
    c1, c2 = 0.01 ** 2, 0.03 ** 2
    values = []
    for ch in range(a.shape[2]):
        x, y = a[..., ch], b[..., ch]

        def filt(img):
            return convolve2d(img, window, mode="valid")

        mx, my = filt(x), filt(y)
        vx, vy, cxy = filt(x * x) - mx ** 2, filt(y * y) - my ** 2, filt(x * y) - mx * my
        values.append((((2 * mx * my + c1) * (2 * cxy + c2)) / ((mx ** 2 + my ** 2 + c1) * (vx + vy + c2))).mean())
    return float(np.mean(values))


# Test 1: diversidad perceptual

def test_identical_samples_have_zero_diversity():
    image = _images(1)[0]
    assert per_pose_diversity([[image, image.copy(), image.copy()]], RandomConvFeatures()) == pytest.approx([0.0], abs=1e-12)
    assert perceptual_distance(image, image, RandomConvFeatures()) == pytest.approx(0.0, abs=1e-12)


def test_two_samples_give_the_single_pair_distance():
    a, b = _images(2, seed=1)
    fx = IdentityFeatures()
    assert per_pose_diversity([[a, b]], fx)[0] == pytest.approx(perceptual_distance(a, b, fx), abs=1e-12)


def test_four_samples_average_six_pairs():
    samples = _images(4, seed=2)
    fx = IdentityFeatures()
    brute = [perceptual_distance(samples[i], samples[j], fx) for i, j in itertools.combinations(range(4), 2)]
    assert len(brute) == 6
    assert per_pose_diversity([samples], fx)[0] == pytest.approx(np.mean(brute), abs=1e-9)


def test_diversity_with_stub_extractor():
    samples = _images(3, seed=3)
    fx = RandomConvFeatures()
    brute = np.mean([perceptual_distance(samples[i], samples[j], fx) for i, j in itertools.combinations(range(3), 2)])
    assert per_pose_diversity([samples], fx)[0] == pytest.approx(brute, rel=1e-5)
    assert pairwise_perceptual_diversity([samples, samples[:2]], fx) > 0


def test_diversity_needs_two_samples():
    with pytest.raises(InsufficientSamplesError):
        per_pose_diversity([_images(1)], IdentityFeatures())
    with pytest.raises(InsufficientSamplesError):
        pairwise_perceptual_diversity([], IdentityFeatures())


def test_perceptual_distance_rejects_mismatched_shapes():
    with pytest.raises(ShapeMismatchError):
        perceptual_distance(np.zeros((8, 8, 3)), np.zeros((4, 4, 3)), IdentityFeatures())


# Test 2: FID

def test_fid_of_identical_sets_is_zero():
    features = np.random.default_rng(4).normal(size=(200, 5))
    assert fid_from_features(features, features.copy()) <= 1e-6


def test_fid_of_scalar_gaussians():
    assert fid_from_features(np.array([-1.0, 0.0, 1.0]), np.array([0.0, 1.0, 2.0])) == pytest.approx(1.0, abs=1e-6)
    assert frechet_distance(np.array([0.0]), np.array([[1.0]]), np.array([1.0]), np.array([[1.0]])) == pytest.approx(1.0, abs=1e-12)


def test_fid_is_symmetric():
    rng = np.random.default_rng(5)
    a = rng.normal(size=(60, 4))
    b = rng.normal(loc=0.5, scale=2.0, size=(80, 4))
    assert fid_from_features(a, b) == pytest.approx(fid_from_features(b, a), abs=1e-6)
    assert fid_from_features(a, b) > 0


def test_fid_closed_form_for_diagonal_gaussians():
    mu1, mu2 = np.zeros(3), np.array([1.0, 2.0, 0.0])
    s1, s2 = np.diag([1.0, 4.0, 9.0]), np.diag([4.0, 1.0, 1.0])
    # ‖Δμ‖² + Σ (σ1 − σ2)²
    expected = 5.0 + (1 + 1 + 4)
    assert frechet_distance(mu1, s1, mu2, s2) == pytest.approx(expected, abs=1e-9)


def test_fid_needs_two_samples():
    with pytest.raises(InsufficientSamplesError):
        fid_from_features(np.zeros((1, 3)), np.zeros((5, 3)))
    with pytest.raises(InsufficientSamplesError):
        fid(_images(1), _images(3), RandomConvFeatures())


def test_fid_of_images_uses_pooled_last_layer():
    fx = RandomConvFeatures(channels=(4, 6))
    generated, reference = _images(8, seed=6), _images(8, seed=7)
    assert pooled_features(generated, fx, batch_size=3).shape == (8, 6)
    assert fid(generated, generated, fx) <= 1e-6
    assert fid(generated, reference, fx) >= 0


# Test 3: SSIM

def test_ssim_self_similarity_is_one():
    image = _images(1, size=24)[0]
    assert ssim(image, image) == pytest.approx(1.0, abs=1e-12)


def test_ssim_of_inverted_image_is_lower():
    image = _images(1, seed=8, size=24)[0]
    assert ssim(image, 1.0 - image) < 1.0


def test_ssim_matches_textbook_implementation():
    a, b = _images(2, seed=9, size=32)
    assert ssim(a, b) == pytest.approx(_textbook_ssim(a, b), abs=1e-4)


def test_ssim_rejects_small_or_mismatched_images():
    with pytest.raises(ShapeMismatchError):
        ssim(np.zeros((8, 8, 3)), np.zeros((8, 8, 3)))
    with pytest.raises(ShapeMismatchError):
        ssim(np.zeros((16, 16, 3)), np.zeros((16, 12, 3)))


# Test 4: localidad por partes

def test_identical_samples_have_no_variation(toy_map):
    image = np.full((4, 4, 3), 0.3)
    assert variation_part([image, image], toy_map, [1]) == 0.0
    assert variation_rest([image, image], toy_map, [1]) == 0.0


def test_variation_inside_part_only(toy_map):
    a = np.zeros((4, 4, 3))
    b = a.copy()
    b[toy_map.part_index == 1] += 0.5
    assert variation_part([a, b], toy_map, [1]) == pytest.approx(1.5)
    assert variation_rest([a, b], toy_map, [1]) == 0.0
    assert variation_part([a, b], toy_map, [2]) == 0.0
    assert variation_rest([a, b], toy_map, [2]) == pytest.approx(1.5)


def test_variation_rest_ignores_background(toy_map):
    a = np.zeros((4, 4, 3))
    b = a.copy()
    b[toy_map.part_index == 0] = 1.0
    assert variation_rest([a, b], toy_map, [1]) == 0.0
    assert variation_rest([a, b], toy_map, [1, 2]) == 0.0


def test_variation_averages_pairs(toy_map):
    a = np.zeros((4, 4, 3))
    b, c = a.copy(), a.copy()
    b[toy_map.part_index == 1] = 0.5
    c[toy_map.part_index == 1] = 1.0
    # pares: 1.5, 3.0, 1.5
    assert variation_part([a, b, c], toy_map, [1]) == pytest.approx(2.0)


def test_empty_mask_gives_zero_with_warning(toy_map, caplog):
    samples = [np.zeros((4, 4, 3)), np.ones((4, 4, 3))]
    with caplog.at_level(logging.WARNING):
        assert variation_part(samples, toy_map, []) == 0.0
    assert "máscara vacía" in caplog.text


def test_variation_needs_two_samples(toy_map):
    with pytest.raises(InsufficientSamplesError):
        variation_part([np.zeros((4, 4, 3))], toy_map, [1])
