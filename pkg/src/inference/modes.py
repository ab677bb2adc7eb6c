"""
Modos de inferencia: muestreo de apariencia, transferencia de pose, muestreo
por partes, transferencia de prendas e interpolación

Todos los modos son deterministas dado (bundle, entradas, generador con
semilla) y no modifican el bundle. Cada código latente se decodifica por
separado, de modo que dos códigos iguales producen imágenes idénticas bit a
bit aunque se generen en llamadas distintas.
"""

import logging
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np
import torch

from ..data.data_processor import ImageProcessor
from ..data.densepose_atlas import DenseBodyMap, extract_texture
from ..models.checkpoint import ModelBundle
from ..models.latent_core import (
    GaussianParams,
    interpolate,
    merge_latents,
    resample_parts,
    sample_reparam,
    warp_for_mode,
)
from ..utils.errors import ShapeMismatchError

logger = logging.getLogger(__name__)


@dataclass
class PosedImage:
    """Imagen H×W×3 en [0, 1] con su mapa denso"""

    image: np.ndarray
    body_map: DenseBodyMap


@dataclass
class GeneratedSet:
    """Imágenes generadas y los códigos M×N que las produjeron"""

    images: List[np.ndarray]
    latents: List[torch.Tensor]
    ts: List[float] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.images)


def _check_map(body_map: DenseBodyMap, bundle: ModelBundle) -> None:
    size = bundle.config.image_size
    if body_map.shape != (size, size):
        raise ShapeMismatchError(f"mapa {body_map.shape}; el modelo genera {size}×{size}")
    if body_map.num_parts != bundle.config.num_parts:
        raise ShapeMismatchError(f"mapa con M={body_map.num_parts}, modelo con M={bundle.config.num_parts}")


@torch.no_grad()
def decode(z: torch.Tensor, body_map: DenseBodyMap, bundle: ModelBundle) -> np.ndarray:
    """
    G(W(z, P)) para un único código

    Args:
        z: Código M×N
        body_map: Pose destino
        bundle: Modelo

    Returns:
        Imagen H×W×3 en [0, 1]
    """
    _check_map(body_map, bundle)
    config = bundle.config
    if z.shape != (config.num_parts, config.latent_dim):
        raise ShapeMismatchError(f"z {tuple(z.shape)}; se esperaba {config.num_parts}×{config.latent_dim}")
    device = bundle.device
    part_index = ImageProcessor.map_to_tensor(body_map).to(device).unsqueeze(0)
    noise = warp_for_mode(z.to(device=device, dtype=torch.float32).unsqueeze(0), part_index, config.mode)
    return ImageProcessor.to_image(bundle.generator(noise)[0])


def _decode_all(latents: Sequence[torch.Tensor], body_maps: Sequence[DenseBodyMap], bundle: ModelBundle) -> GeneratedSet:
    images = [decode(z, body_map, bundle) for z, body_map in zip(latents, body_maps)]
    return GeneratedSet(images=images, latents=[z.detach().cpu() for z in latents])


def _latent_shape(bundle: ModelBundle):
    return (bundle.config.num_parts, bundle.config.latent_dim)


def sample_appearance(
    body_map: DenseBodyMap,
    bundle: ModelBundle,
    n: int,
    generator: Optional[torch.Generator] = None,
) -> GeneratedSet:
    """
    n apariencias aleatorias z ~ N(0, I) sobre una pose fija

    Args:
        body_map: Pose
        bundle: Modelo
        n: Número de muestras (0 → conjunto vacío)
        generator: Fuente aleatoria con semilla

    Returns:
        GeneratedSet con n imágenes
    """
    if n < 0:
        raise ValueError("n no puede ser negativo")
    latents = [torch.randn(_latent_shape(bundle), generator=generator) for _ in range(n)]
    return _decode_all(latents, [body_map] * n, bundle)


@torch.no_grad()
def encode_appearance(
    image: np.ndarray,
    body_map: DenseBodyMap,
    bundle: ModelBundle,
    use_mean: bool = True,
    generator: Optional[torch.Generator] = None,
) -> torch.Tensor:
    """
    Codifica la apariencia de una imagen

    Args:
        image: Imagen H×W×3 en [0, 1]
        body_map: Su mapa denso
        bundle: Modelo
        use_mean: True → media de la posterior; False → muestra z ~ N(mu, sigma)
        generator: Fuente aleatoria cuando ``use_mean`` es False

    Returns:
        Código M×N (CPU, float32)
    """
    if body_map.num_parts != bundle.config.num_parts:
        raise ShapeMismatchError(f"mapa con M={body_map.num_parts}, modelo con M={bundle.config.num_parts}")
    atlas = extract_texture(image, body_map, bundle.config.atlas_size)
    params = bundle.encoder(ImageProcessor.atlas_to_tensor(atlas).unsqueeze(0).to(bundle.device))
    if use_mean:
        return params.mu[0].detach().cpu()
    cpu_params = GaussianParams(params.mu[0].detach().cpu(), params.log_var[0].detach().cpu())
    return sample_reparam(cpu_params, generator)


def pose_transfer(
    source: PosedImage,
    target_maps: Sequence[DenseBodyMap],
    bundle: ModelBundle,
    use_mean: bool = True,
    generator: Optional[torch.Generator] = None,
) -> GeneratedSet:
    """
    Re-renderiza la apariencia de ``source`` en cada pose destino

    Un único código z se reutiliza para todas las salidas.
    """
    if not target_maps:
        return GeneratedSet(images=[], latents=[])
    z = encode_appearance(source.image, source.body_map, bundle, use_mean, generator)
    return _decode_all([z] * len(target_maps), list(target_maps), bundle)


def part_sample(
    body_map: DenseBodyMap,
    z: torch.Tensor,
    parts: Sequence[int],
    bundle: ModelBundle,
    n: int,
    generator: Optional[torch.Generator] = None,
) -> GeneratedSet:
    """
    Remuestrea solo las filas de ``parts`` manteniendo el resto de z

    Args:
        body_map: Pose
        z: Código base M×N
        parts: Índices elementales del grupo (vacío → n imágenes idénticas)
        bundle: Modelo
        n: Número de muestras
        generator: Fuente aleatoria con semilla

    Returns:
        GeneratedSet; las filas fuera de ``parts`` son idénticas bit a bit
    """
    if n < 0:
        raise ValueError("n no puede ser negativo")
    latents = [resample_parts(z, parts, generator) for _ in range(n)]
    return _decode_all(latents, [body_map] * n, bundle)


def garment_transfer(
    body: PosedImage,
    garment: PosedImage,
    garment_parts: Sequence[int],
    target_map: DenseBodyMap,
    bundle: ModelBundle,
) -> GeneratedSet:
    """
    Viste el cuerpo de ``body`` con las partes ``garment_parts`` de ``garment``

    Returns:
        GeneratedSet con una imagen sobre ``target_map``
    """
    z_body = encode_appearance(body.image, body.body_map, bundle)
    z_garment = encode_appearance(garment.image, garment.body_map, bundle)
    z = merge_latents(z_body, z_garment, garment_parts)
    return _decode_all([z], [target_map], bundle)


def interpolation_grid(steps: int) -> List[float]:
    """t uniformes en [0, 1]; un solo paso → [0]"""
    if steps < 1:
        raise ValueError("steps debe ser ≥ 1")
    if steps == 1:
        return [0.0]
    return [float(t) for t in np.linspace(0.0, 1.0, steps)]


def interpolate_images(
    first: PosedImage,
    second: PosedImage,
    display_map: DenseBodyMap,
    steps: int,
    bundle: ModelBundle,
) -> GeneratedSet:
    """
    Decodifica z1·t + z2·(1 − t) a lo largo de una rejilla uniforme de t

    t = 0 reproduce la apariencia de ``second`` y t = 1 la de ``first``.
    """
    z1 = encode_appearance(first.image, first.body_map, bundle)
    z2 = encode_appearance(second.image, second.body_map, bundle)
    ts = interpolation_grid(steps)
    result = _decode_all([interpolate(z1, z2, t) for t in ts], [display_map] * len(ts), bundle)
    result.ts = ts
    return result
