"""
Métricas de evaluación: diversidad perceptual, FID, SSIM y localidad por partes

Las distancias perceptuales y las características de FID dependen del
extractor usado (stub aleatorio por defecto): los valores solo son
comparables entre ejecuciones con el mismo extractor.
"""

import itertools
import logging
from typing import List, Sequence

import numpy as np
import torch
from scipy import linalg
from scipy.ndimage import gaussian_filter

from ..data.data_processor import ImageProcessor
from ..data.densepose_atlas import DenseBodyMap, part_mask
from ..models.losses import FeatureExtractor
from ..utils.config import complement_parts
from ..utils.errors import InsufficientSamplesError, ShapeMismatchError

logger = logging.getLogger(__name__)

# SSIM estándar: ventana gaussiana 11×11, sigma 1.5, rango dinámico 1
SSIM_SIGMA = 1.5
SSIM_TRUNCATE = 3.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03

_NORM_EPS = 1e-10


def _to_batch(images: Sequence[np.ndarray]) -> torch.Tensor:
    return torch.stack([ImageProcessor.to_tensor(image) for image in images])


@torch.no_grad()
def _normalized_features(images: Sequence[np.ndarray], fx: FeatureExtractor) -> List[torch.Tensor]:
    """Activaciones por capa normalizadas a norma unitaria en el eje de canales"""
    normalized = []
    for feat in fx(_to_batch(images)):
        feat = feat.double()
        norm = feat.pow(2).sum(dim=1, keepdim=True).sqrt()
        normalized.append(feat / (norm + _NORM_EPS))
    return normalized


def _pair_distance(features: List[torch.Tensor], i: int, j: int) -> float:
    total = 0.0
    for feat in features:
        total += float((feat[i] - feat[j]).pow(2).sum(dim=0).mean())
    return total


def perceptual_distance(a: np.ndarray, b: np.ndarray, fx: FeatureExtractor) -> float:
    """
    Distancia perceptual tipo LPIPS (sin calibrar) entre dos imágenes

    Σ_capas media_espacial Σ_canales (f̂(a) − f̂(b))², con f̂ normalizada por canal.

    Args:
        a, b: Imágenes H×W×3 en [0, 1]
        fx: Extractor de activaciones

    Returns:
        Distancia ≥ 0 (0 si las imágenes son iguales)
    """
    if a.shape != b.shape:
        raise ShapeMismatchError(f"{a.shape} frente a {b.shape}")
    return _pair_distance(_normalized_features([a, b], fx), 0, 1)


def per_pose_diversity(samples_per_pose: Sequence[Sequence[np.ndarray]], fx: FeatureExtractor) -> List[float]:
    """
    Media de la distancia perceptual sobre todos los pares no ordenados de cada pose

    Returns:
        Un valor por pose
    """
    values = []
    for samples in samples_per_pose:
        if len(samples) < 2:
            raise InsufficientSamplesError("cada pose necesita al menos 2 muestras")
        features = _normalized_features(samples, fx)
        pairs = list(itertools.combinations(range(len(samples)), 2))
        values.append(float(np.mean([_pair_distance(features, i, j) for i, j in pairs])))
    return values


def pairwise_perceptual_diversity(samples_per_pose: Sequence[Sequence[np.ndarray]], fx: FeatureExtractor) -> float:
    """
    Diversidad: media por pose de las distancias entre pares, promediada sobre poses

    Args:
        samples_per_pose: Lista (poses) de listas de imágenes
        fx: Extractor de la distancia perceptual

    Returns:
        Escalar ≥ 0
    """
    if not samples_per_pose:
        raise InsufficientSamplesError("no hay poses que evaluar")
    return float(np.mean(per_pose_diversity(samples_per_pose, fx)))


@torch.no_grad()
def pooled_features(images: Sequence[np.ndarray], fx: FeatureExtractor, batch_size: int = 32) -> np.ndarray:
    """
    Características globales: average pooling espacial de la última capa del extractor

    Returns:
        Matriz n×C float64
    """
    rows = []
    for start in range(0, len(images), batch_size):
        last = fx(_to_batch(images[start:start + batch_size]))[-1]
        rows.append(last.double().mean(dim=(2, 3)).cpu().numpy())
    return np.concatenate(rows, axis=0) if rows else np.zeros((0, 0))


def _sqrtm_psd(matrix: np.ndarray) -> np.ndarray:
    """Raíz cuadrada simétrica de una matriz semidefinida positiva"""
    values, vectors = linalg.eigh(matrix)
    return (vectors * np.sqrt(np.clip(values, 0.0, None))) @ vectors.T


def frechet_distance(
    mu1: np.ndarray, sigma1: np.ndarray, mu2: np.ndarray, sigma2: np.ndarray, eps: float = 1e-6
) -> float:
    """
    ‖mu1 − mu2‖² + Tr(S1 + S2 − 2 (S1 S2)^{1/2})

    La traza de (S1 S2)^{1/2} se calcula como Tr((S1^{1/2} S2 S1^{1/2})^{1/2}),
    que es simétrica; si aparece un valor no finito se regulariza con eps·I.
    """
    mu1, mu2 = np.atleast_1d(mu1).astype(np.float64), np.atleast_1d(mu2).astype(np.float64)
    sigma1, sigma2 = np.atleast_2d(sigma1).astype(np.float64), np.atleast_2d(sigma2).astype(np.float64)
    if mu1.shape != mu2.shape or sigma1.shape != sigma2.shape:
        raise ShapeMismatchError("estadísticas de dimensiones distintas")

    def trace_sqrt_product(s1: np.ndarray, s2: np.ndarray) -> float:
        root = _sqrtm_psd(s1)
        inner = root @ s2 @ root
        inner = (inner + inner.T) / 2.0
        return float(np.sqrt(np.clip(linalg.eigvalsh(inner), 0.0, None)).sum())

    tr_covmean = trace_sqrt_product(sigma1, sigma2)
    if not np.isfinite(tr_covmean):
        logger.warning("⚠️ raíz cuadrada no finita; se añade %g a la diagonal", eps)
        offset = np.eye(sigma1.shape[0]) * eps
        tr_covmean = trace_sqrt_product(sigma1 + offset, sigma2 + offset)

    diff = mu1 - mu2
    value = float(diff @ diff + np.trace(sigma1) + np.trace(sigma2) - 2.0 * tr_covmean)
    return max(value, 0.0)


def fid_from_features(features1: np.ndarray, features2: np.ndarray) -> float:
    """
    FID entre dos matrices de características n×C (covarianza insesgada)
    """
    features1, features2 = np.asarray(features1, dtype=np.float64), np.asarray(features2, dtype=np.float64)
    if features1.ndim == 1:
        features1, features2 = features1[:, None], features2[:, None]
    if len(features1) < 2 or len(features2) < 2:
        raise InsufficientSamplesError("FID necesita al menos 2 muestras por conjunto")
    stats = []
    for features in (features1, features2):
        stats.append((features.mean(axis=0), np.atleast_2d(np.cov(features, rowvar=False, ddof=1))))
    (mu1, sigma1), (mu2, sigma2) = stats
    return frechet_distance(mu1, sigma1, mu2, sigma2)


def fid(generated: Sequence[np.ndarray], reference: Sequence[np.ndarray], fx: FeatureExtractor) -> float:
    """
    Fréchet distance entre imágenes generadas y de referencia con el extractor dado
    """
    if len(generated) < 2 or len(reference) < 2:
        raise InsufficientSamplesError("FID necesita al menos 2 imágenes por conjunto")
    return fid_from_features(pooled_features(generated, fx), pooled_features(reference, fx))


def ssim(a: np.ndarray, b: np.ndarray, data_range: float = 1.0) -> float:
    """
    SSIM con ventana gaussiana (11×11, sigma 1.5), media sobre ventanas válidas y canales

    Args:
        a, b: Imágenes H×W×3 (o H×W) con el mismo rango
        data_range: Rango dinámico (1 para imágenes en [0, 1])

    Returns:
        Valor en [−1, 1]; ssim(a, a) = 1
    """
    a, b = np.asarray(a, dtype=np.float64), np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ShapeMismatchError(f"{a.shape} frente a {b.shape}")
    if a.ndim == 2:
        a, b = a[..., None], b[..., None]
    radius = int(SSIM_TRUNCATE * SSIM_SIGMA + 0.5)
    if min(a.shape[:2]) < 2 * radius + 1:
        raise ShapeMismatchError(f"SSIM necesita imágenes de al menos {2 * radius + 1} píxeles")

    c1 = (SSIM_K1 * data_range) ** 2
    c2 = (SSIM_K2 * data_range) ** 2

    def blur(x):
        return gaussian_filter(x, sigma=SSIM_SIGMA, truncate=SSIM_TRUNCATE, mode="reflect")

    values = []
    for ch in range(a.shape[2]):
        x, y = a[..., ch], b[..., ch]
        mu_x, mu_y = blur(x), blur(y)
        var_x = blur(x * x) - mu_x ** 2
        var_y = blur(y * y) - mu_y ** 2
        cov = blur(x * y) - mu_x * mu_y
        index = ((2 * mu_x * mu_y + c1) * (2 * cov + c2)) / ((mu_x ** 2 + mu_y ** 2 + c1) * (var_x + var_y + c2))
        values.append(index[radius:-radius, radius:-radius].mean())
    return float(np.mean(values))


def _masked_pairwise_l1(samples: Sequence[np.ndarray], mask: np.ndarray, what: str) -> float:
    if len(samples) < 2:
        raise InsufficientSamplesError("se necesitan al menos 2 muestras")
    count = int(mask.sum())
    if count == 0:
        logger.warning("⚠️ máscara vacía para %s; se devuelve 0", what)
        return 0.0
    values = np.stack([np.asarray(s, dtype=np.float64)[mask] for s in samples])
    distances = [
        np.abs(values[i] - values[j]).sum() / count
        for i, j in itertools.combinations(range(len(samples)), 2)
    ]
    return float(np.mean(distances))


def variation_part(samples: Sequence[np.ndarray], body_map: DenseBodyMap, parts: Sequence[int]) -> float:
    """
    L1 medio entre pares de muestras dentro de la máscara de ``parts``

    Suma sobre los 3 canales y divide por el número de píxeles de la máscara.
    """
    return _masked_pairwise_l1(samples, part_mask(body_map, parts).bits, "variation_part")


def variation_rest(samples: Sequence[np.ndarray], body_map: DenseBodyMap, parts: Sequence[int]) -> float:
    """
    Igual que ``variation_part`` sobre el resto del cuerpo (primer plano sin ``parts``)
    """
    rest = part_mask(body_map, complement_parts(parts, body_map.num_parts)).bits
    return _masked_pairwise_l1(samples, rest, "variation_rest")
