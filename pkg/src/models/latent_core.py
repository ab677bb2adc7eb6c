"""
Álgebra del espacio latente por partes

Un código de apariencia ``z`` es una matriz M×N (una fila por parte). Todas
las funciones aceptan además una dimensión de lote delante (B×M×N) y los
mapas de partes como tensores long H×W o B×H×W. Las imágenes de ruido
resultantes se devuelven en formato de canales primero (N×H×W / B×N×H×W).
"""

import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional

import numpy as np
import torch

from ..utils.errors import InvalidPartError, ShapeMismatchError


@dataclass
class GaussianParams:
    """
    Parámetros de la posterior diagonal por parte

    ``log_var`` es el logaritmo de la varianza; sigma = exp(log_var / 2).
    """

    mu: torch.Tensor
    log_var: torch.Tensor

    def __post_init__(self):
        if self.mu.shape != self.log_var.shape:
            raise ShapeMismatchError(f"mu {tuple(self.mu.shape)} y log_var {tuple(self.log_var.shape)}")


def sample_reparam(params: GaussianParams, generator: Optional[torch.Generator] = None) -> torch.Tensor:
    """
    Muestra z = mu + sigma ⊙ eps con el truco de reparametrización

    Args:
        params: mu y log_var (…×M×N)
        generator: Fuente aleatoria con semilla

    Returns:
        z con la forma de mu, diferenciable respecto a mu y log_var
    """
    eps = torch.randn(
        params.mu.shape,
        generator=generator,
        dtype=params.mu.dtype,
        device=params.mu.device,
    )
    return params.mu + torch.exp(0.5 * params.log_var) * eps


def kl_to_standard_normal(params: GaussianParams) -> torch.Tensor:
    """
    KL cerrada entre la posterior diagonal y N(0, I)

    0.5 · Σ (mu² + sigma² − log sigma² − 1), sumada sobre M×N. Con lote, se
    promedia sobre la dimensión de lote.
    """
    terms = 0.5 * (params.mu.pow(2) + params.log_var.exp() - params.log_var - 1.0)
    if terms.dim() <= 2:
        return terms.sum()
    return terms.flatten(1).sum(dim=1).mean()


def _pad_background(z: torch.Tensor) -> torch.Tensor:
    """Antepone la fila del fondo (ceros) para indexar con part_index"""
    zeros = torch.zeros(z.shape[:-2] + (1, z.shape[-1]), dtype=z.dtype, device=z.device)
    return torch.cat([zeros, z], dim=-2)


def warp_broadcast(z: torch.Tensor, part_index: torch.Tensor) -> torch.Tensor:
    """
    Escribe el vector latente de cada parte en todos sus píxeles

    El gradiente de z[k] es la suma de los gradientes de su región.

    Args:
        z: Código M×N o B×M×N
        part_index: Mapa de partes H×W o B×H×W (0 = fondo)

    Returns:
        Imagen de ruido N×H×W o B×N×H×W con el fondo a 0
    """
    batched = z.dim() == 3
    if not batched:
        z = z.unsqueeze(0)
        part_index = part_index.unsqueeze(0)
    if part_index.dim() != 3 or part_index.shape[0] != z.shape[0]:
        raise ShapeMismatchError(f"lote de z {tuple(z.shape)} y mapas {tuple(part_index.shape)}")
    if int(part_index.max()) > z.shape[1] or int(part_index.min()) < 0:
        raise InvalidPartError(f"el mapa usa partes fuera de 0..{z.shape[1]}")

    padded = _pad_background(z)
    batch_idx = torch.arange(z.shape[0], device=z.device).view(-1, 1, 1)
    field = padded[batch_idx, part_index.long()]
    field = field.permute(0, 3, 1, 2).contiguous()
    return field if batched else field[0]


def warp_broadcast_noparts(z_flat: torch.Tensor, part_index: torch.Tensor) -> torch.Tensor:
    """
    Variante sin partes: difunde el vector concatenado por toda la silueta

    Args:
        z_flat: Vector de longitud M·N (o B×M·N)
        part_index: Mapa de partes H×W o B×H×W

    Returns:
        Imagen de ruido (B×)M·N×H×W, cero en el fondo
    """
    batched = z_flat.dim() == 2
    if not batched:
        z_flat = z_flat.unsqueeze(0)
        part_index = part_index.unsqueeze(0)
    if part_index.shape[0] != z_flat.shape[0]:
        raise ShapeMismatchError("lote de z y de mapas distinto")
    mask = (part_index > 0).to(z_flat.dtype).unsqueeze(1)
    field = z_flat[:, :, None, None] * mask
    return field if batched else field[0]


def warp_for_mode(z: torch.Tensor, part_index: torch.Tensor, mode: str = "parts") -> torch.Tensor:
    """
    Imagen de ruido según el modo del modelo

    Args:
        z: Código (B×)M×N
        part_index: Mapa(s) de partes
        mode: 'parts' (un vector por parte) o 'noparts' (vector global M·N)
    """
    if mode == "noparts":
        return warp_broadcast_noparts(z.flatten(-2), part_index)
    return warp_broadcast(z, part_index)


def _check_parts(parts: Iterable[int], num_parts: int) -> list:
    parts = sorted(set(int(k) for k in parts))
    for k in parts:
        if k < 1 or k > num_parts:
            raise InvalidPartError(f"parte {k} fuera de 1..{num_parts}")
    return parts


def resample_parts(
    z: torch.Tensor,
    parts: Iterable[int],
    generator: Optional[torch.Generator] = None,
) -> torch.Tensor:
    """
    Sustituye las filas de ``parts`` por nuevas muestras de N(0, I)

    Args:
        z: Código M×N (o B×M×N)
        parts: Índices 1-based de las partes a remuestrear
        generator: Fuente aleatoria con semilla

    Returns:
        Copia de z; las demás filas quedan idénticas bit a bit
    """
    parts = _check_parts(parts, z.shape[-2])
    out = z.clone()
    if not parts:
        return out
    rows = [k - 1 for k in parts]
    fresh_shape = z.shape[:-2] + (len(rows), z.shape[-1])
    fresh = torch.randn(fresh_shape, generator=generator, dtype=z.dtype, device=z.device)
    out[..., rows, :] = fresh
    return out


def merge_latents(z_body: torch.Tensor, z_garment: torch.Tensor, garment_parts: Iterable[int]) -> torch.Tensor:
    """
    Compone un código con las filas de prenda de ``z_garment`` y el resto de ``z_body``

    Returns:
        Código M×N combinado
    """
    if z_body.shape != z_garment.shape:
        raise ShapeMismatchError(f"{tuple(z_body.shape)} frente a {tuple(z_garment.shape)}")
    parts = _check_parts(garment_parts, z_body.shape[-2])
    out = z_body.clone()
    if parts:
        rows = [k - 1 for k in parts]
        out[..., rows, :] = z_garment[..., rows, :]
    return out


def interpolate(z1: torch.Tensor, z2: torch.Tensor, t: float) -> torch.Tensor:
    """
    z = z1·t + z2·(1 − t)

    Ojo con la convención: t = 0 devuelve z2 y t = 1 devuelve z1 (al revés
    que un lerp habitual).
    """
    if not 0.0 <= t <= 1.0:
        raise ValueError(f"t = {t} fuera de [0, 1]")
    if z1.shape != z2.shape:
        raise ShapeMismatchError(f"{tuple(z1.shape)} frente a {tuple(z2.shape)}")
    if t == 1.0:
        return z1.clone()
    if t == 0.0:
        return z2.clone()
    return z1 * t + z2 * (1.0 - t)


def save_latent(z: torch.Tensor, path: Path) -> Path:
    """
    Serializa un código M×N: cabecera int32 (M, N) + float64 fila a fila
    """
    if z.dim() != 2:
        raise ShapeMismatchError("solo se serializan códigos M×N")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    values = z.detach().cpu().double().numpy()
    with open(path, "wb") as handle:
        handle.write(struct.pack("<ii", *values.shape))
        handle.write(values.astype("<f8").tobytes(order="C"))
    return path


def load_latent(path: Path) -> torch.Tensor:
    """Lee un código guardado con ``save_latent``"""
    with open(path, "rb") as handle:
        rows, cols = struct.unpack("<ii", handle.read(8))
        values = np.frombuffer(handle.read(), dtype="<f8")
    if values.size != rows * cols:
        raise ShapeMismatchError(f"{path}: cabecera {rows}×{cols} y {values.size} valores")
    return torch.from_numpy(values.reshape(rows, cols).copy())
