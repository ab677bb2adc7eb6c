"""
Mapas densos de partes (IUV) y atlas de textura UV normalizado

El atlas es una rejilla de 4 filas × 6 columnas de celdas cuadradas de lado
``A // 6`` dentro de una imagen A×A; la parte k ocupa la celda
((k-1) // 6, (k-1) % 6). Las celdas sobrantes y el margen inferior/derecho
nunca se escriben.
"""

from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, Tuple

import numpy as np
from PIL import Image

from ..utils.errors import InvalidBodyMapError, InvalidPartError, ShapeMismatchError

ATLAS_ROWS = 4
ATLAS_COLS = 6
MAX_PARTS = ATLAS_ROWS * ATLAS_COLS
DEFAULT_NUM_PARTS = 24
DEFAULT_ATLAS_SIZE = 256

# Evita que u*(c-1) = 2.9999999 caiga en el texel anterior
_ADDRESS_EPS = 1e-9


@dataclass(frozen=True)
class DenseBodyMap:
    """
    Imagen de correspondencia densa: índice de parte y coordenadas (u, v)

    Args:
        part_index: Enteros H×W en 0..M (0 = fondo)
        u: Reales H×W en [0, 1]
        v: Reales H×W en [0, 1]
        num_parts: M, número de partes del esquema
    """

    part_index: np.ndarray
    u: np.ndarray
    v: np.ndarray
    num_parts: int = DEFAULT_NUM_PARTS

    def __post_init__(self):
        if self.part_index.ndim != 2 or self.part_index.size == 0:
            raise InvalidBodyMapError("part_index debe ser una rejilla H×W no vacía")
        if self.u.shape != self.part_index.shape or self.v.shape != self.part_index.shape:
            raise InvalidBodyMapError("part_index, u y v deben tener la misma forma")
        if not 1 <= self.num_parts <= MAX_PARTS:
            raise InvalidBodyMapError(f"num_parts debe estar en 1..{MAX_PARTS}")
        if self.part_index.min() < 0 or self.part_index.max() > self.num_parts:
            raise InvalidBodyMapError(f"índice de parte fuera de 0..{self.num_parts}")
        for name, grid in (("u", self.u), ("v", self.v)):
            if not np.all(np.isfinite(grid)) or grid.min() < 0.0 or grid.max() > 1.0:
                raise InvalidBodyMapError(f"{name} fuera de [0, 1]")
        background = self.part_index == 0
        if np.any(self.u[background] != 0) or np.any(self.v[background] != 0):
            raise InvalidBodyMapError("el fondo debe tener u = v = 0")

    @property
    def shape(self) -> Tuple[int, int]:
        return self.part_index.shape

    @property
    def foreground(self) -> np.ndarray:
        return self.part_index > 0

    def parts_present(self) -> np.ndarray:
        """Índices de parte (>0) que aparecen en el mapa"""
        present = np.unique(self.part_index)
        return present[present > 0]


@dataclass(frozen=True)
class BinaryMask:
    """Máscara booleana H×W derivada de un DenseBodyMap"""

    bits: np.ndarray

    @property
    def count(self) -> int:
        return int(self.bits.sum())

    def __len__(self) -> int:
        return self.count


@dataclass
class TextureAtlas:
    """
    Atlas de textura normalizado de un sujeto

    Args:
        texels: Reales A×A×3 en [0, 1]
        filled: Booleanos A×A, texeles escritos
        num_parts: M usado para construir el layout
    """

    texels: np.ndarray
    filled: np.ndarray
    num_parts: int = DEFAULT_NUM_PARTS
    part_layout: Dict[int, Tuple[int, int]] = field(init=False)

    def __post_init__(self):
        size = self.texels.shape[0]
        if self.texels.shape != (size, size, 3) or self.filled.shape != (size, size):
            raise ShapeMismatchError("el atlas debe ser A×A×3 con máscara A×A")
        self.part_layout = atlas_layout(size, self.num_parts)

    @property
    def size(self) -> int:
        return self.texels.shape[0]

    @classmethod
    def empty(cls, atlas_size: int, num_parts: int = DEFAULT_NUM_PARTS) -> "TextureAtlas":
        return cls(
            texels=np.zeros((atlas_size, atlas_size, 3), dtype=np.float64),
            filled=np.zeros((atlas_size, atlas_size), dtype=bool),
            num_parts=num_parts,
        )


def cell_size(atlas_size: int) -> int:
    """Lado de la celda cuadrada de cada parte"""
    cell = atlas_size // ATLAS_COLS
    if cell < 1:
        raise ShapeMismatchError(f"atlas de {atlas_size} px demasiado pequeño para la rejilla 4×6")
    return cell


def atlas_layout(atlas_size: int, num_parts: int = DEFAULT_NUM_PARTS) -> Dict[int, Tuple[int, int]]:
    """
    Origen (fila, columna) de la celda de cada parte

    Args:
        atlas_size: Lado A del atlas
        num_parts: M

    Returns:
        Diccionario {k: (fila0, col0)} para k = 1..M
    """
    if not 1 <= num_parts <= MAX_PARTS:
        raise InvalidPartError(f"num_parts debe estar en 1..{MAX_PARTS}")
    cell = cell_size(atlas_size)
    return {
        k: (((k - 1) // ATLAS_COLS) * cell, ((k - 1) % ATLAS_COLS) * cell)
        for k in range(1, num_parts + 1)
    }


def decode_iuv(image: np.ndarray, num_parts: int = DEFAULT_NUM_PARTS) -> DenseBodyMap:
    """
    Decodifica un raster IUV de 8 bits (canales parte, U, V)

    Args:
        image: Raster H×W×3 uint8
        num_parts: M; valores de parte mayores se rechazan

    Returns:
        DenseBodyMap con u = U/255 y v = V/255 (fondo forzado a 0)
    """
    image = np.asarray(image)
    if image.ndim != 3 or image.shape[2] < 3 or image.shape[0] == 0 or image.shape[1] == 0:
        raise InvalidBodyMapError("se esperaba un raster H×W×3 no vacío")
    if image.dtype != np.uint8:
        raise InvalidBodyMapError(f"se esperaba un raster de 8 bits, llegó {image.dtype}")

    part_index = image[..., 0].astype(np.int64)
    if part_index.max() > num_parts:
        raise InvalidBodyMapError(
            f"valor de parte {int(part_index.max())} > M={num_parts} (mapa corrupto)"
        )
    background = part_index == 0
    u = image[..., 1].astype(np.float64) / 255.0
    v = image[..., 2].astype(np.float64) / 255.0
    u[background] = 0.0
    v[background] = 0.0
    return DenseBodyMap(part_index=part_index, u=u, v=v, num_parts=num_parts)


def encode_iuv(body_map: DenseBodyMap) -> np.ndarray:
    """Inversa de ``decode_iuv``: raster H×W×3 uint8"""
    raster = np.zeros(body_map.shape + (3,), dtype=np.uint8)
    raster[..., 0] = body_map.part_index.astype(np.uint8)
    raster[..., 1] = np.rint(body_map.u * 255.0).astype(np.uint8)
    raster[..., 2] = np.rint(body_map.v * 255.0).astype(np.uint8)
    return raster


def part_mask(body_map: DenseBodyMap, parts: Iterable[int]) -> BinaryMask:
    """
    Máscara de los píxeles cuyas partes están en ``parts``

    Args:
        body_map: Mapa denso
        parts: Subconjunto de {1..M}

    Returns:
        BinaryMask con la misma forma que el mapa
    """
    parts = sorted(set(int(k) for k in parts))
    for k in parts:
        if k < 1 or k > body_map.num_parts:
            raise InvalidPartError(f"parte {k} fuera de 1..{body_map.num_parts}")
    return BinaryMask(bits=np.isin(body_map.part_index, parts))


def _texel_coordinates(
    body_map: DenseBodyMap, atlas_size: int
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Filas/columnas del atlas (nearest) para cada píxel de primer plano"""
    cell = cell_size(atlas_size)
    layout = atlas_layout(atlas_size, body_map.num_parts)
    fg = body_map.foreground
    parts = body_map.part_index[fg]

    origin_rows = np.zeros(body_map.num_parts + 1, dtype=np.int64)
    origin_cols = np.zeros(body_map.num_parts + 1, dtype=np.int64)
    for k, (r0, c0) in layout.items():
        origin_rows[k] = r0
        origin_cols[k] = c0

    offset_rows = np.floor(body_map.v[fg] * (cell - 1) + _ADDRESS_EPS).astype(np.int64)
    offset_cols = np.floor(body_map.u[fg] * (cell - 1) + _ADDRESS_EPS).astype(np.int64)
    return fg, origin_rows[parts] + offset_rows, origin_cols[parts] + offset_cols


def extract_texture(
    image: np.ndarray,
    body_map: DenseBodyMap,
    atlas_size: int = DEFAULT_ATLAS_SIZE,
) -> TextureAtlas:
    """
    Lleva los píxeles de la imagen al espacio UV del atlas

    Los píxeles que caen en el mismo texel se promedian (suma / cuenta),
    así que el resultado no depende del orden de recorrido.

    Args:
        image: Imagen H×W×3 real en [0, 1]
        body_map: Mapa denso de la misma imagen
        atlas_size: Lado A del atlas

    Returns:
        TextureAtlas con los texeles escritos marcados en ``filled``
    """
    image = np.asarray(image, dtype=np.float64)
    if image.shape[:2] != body_map.shape or image.ndim != 3 or image.shape[2] != 3:
        raise ShapeMismatchError(
            f"imagen {image.shape} y mapa {body_map.shape} no comparten H×W"
        )

    fg, rows, cols = _texel_coordinates(body_map, atlas_size)
    accum = np.zeros((atlas_size, atlas_size, 3), dtype=np.float64)
    counts = np.zeros((atlas_size, atlas_size), dtype=np.int64)
    np.add.at(accum, (rows, cols), image[fg])
    np.add.at(counts, (rows, cols), 1)

    filled = counts > 0
    texels = np.zeros_like(accum)
    texels[filled] = accum[filled] / counts[filled][:, None]
    return TextureAtlas(texels=texels, filled=filled, num_parts=body_map.num_parts)


def render_texture(atlas: TextureAtlas, body_map: DenseBodyMap) -> np.ndarray:
    """
    Lookup inverso: pinta cada píxel de primer plano con su texel

    Args:
        atlas: Atlas con el mismo M y layout que el mapa
        body_map: Mapa denso destino

    Returns:
        Imagen H×W×3 real; el fondo queda a 0
    """
    if atlas.num_parts != body_map.num_parts:
        raise ShapeMismatchError(
            f"atlas con M={atlas.num_parts} y mapa con M={body_map.num_parts}"
        )
    fg, rows, cols = _texel_coordinates(body_map, atlas.size)
    out = np.zeros(body_map.shape + (3,), dtype=np.float64)
    out[fg] = atlas.texels[rows, cols]
    return out


def save_atlas(atlas: TextureAtlas, path: Path) -> Tuple[Path, Path]:
    """
    Guarda el atlas como PNG de 8 bits y la máscara ``filled`` como sidecar

    Returns:
        Rutas (atlas, máscara)
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    mask_path = path.with_name(path.stem + ".filled.png")
    texels = np.clip(np.rint(atlas.texels * 255.0), 0, 255).astype(np.uint8)
    Image.fromarray(texels).save(path)
    Image.fromarray(atlas.filled.astype(np.uint8) * 255).save(mask_path)
    return path, mask_path


def load_atlas(path: Path, num_parts: int = DEFAULT_NUM_PARTS) -> TextureAtlas:
    """Lee un atlas guardado con ``save_atlas``"""
    path = Path(path)
    mask_path = path.with_name(path.stem + ".filled.png")
    texels = np.asarray(Image.open(path).convert("RGB"), dtype=np.float64) / 255.0
    filled = np.asarray(Image.open(mask_path).convert("L")) > 127
    texels[~filled] = 0.0
    return TextureAtlas(texels=texels, filled=filled, num_parts=num_parts)
