"""
Emisor de rejillas: teselas PNG, imagen compuesta y manifiesto CSV
"""

import logging
import math
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import List, Optional, Sequence

import numpy as np
import pandas as pd

from ..data.data_processor import ImageProcessor
from .modes import GeneratedSet

logger = logging.getLogger(__name__)

MANIFEST_COLUMNS = ["tile", "file", "row", "col", "mode", "seed", "t", "group", "pose"]
GRID_GAP = 2


@dataclass
class GridTile:
    """Una imagen con los parámetros que la generaron"""

    image: np.ndarray
    mode: str
    seed: Optional[int] = None
    t: Optional[float] = None
    group: Optional[str] = None
    pose: Optional[str] = None


def tiles_from(
    generated: GeneratedSet,
    mode: str,
    seed: Optional[int] = None,
    group: Optional[str] = None,
    poses: Optional[Sequence[str]] = None,
) -> List[GridTile]:
    """
    Convierte un GeneratedSet en teselas etiquetadas

    Args:
        generated: Salida de un modo de inferencia
        mode: Nombre del modo ('sample', 'transfer', ...)
        seed: Semilla usada
        group: Grupo de partes (muestreo por partes / prendas)
        poses: Etiqueta de pose por imagen (o una sola repetida)
    """
    tiles = []
    for i, image in enumerate(generated.images):
        pose = None
        if poses:
            pose = poses[i] if len(poses) == len(generated.images) else poses[0]
        t = generated.ts[i] if i < len(generated.ts) else None
        tiles.append(GridTile(image=image, mode=mode, seed=seed, t=t, group=group, pose=pose))
    return tiles


def compose_grid(images: Sequence[np.ndarray], columns: int, gap: int = GRID_GAP) -> np.ndarray:
    """
    Une imágenes del mismo tamaño en una rejilla con fondo blanco

    Returns:
        Imagen H×W×3 en [0, 1]
    """
    if not images:
        raise ValueError("no hay imágenes que componer")
    height, width = images[0].shape[:2]
    columns = max(1, min(columns, len(images)))
    rows = math.ceil(len(images) / columns)
    canvas = np.ones((rows * height + (rows - 1) * gap, columns * width + (columns - 1) * gap, 3))
    for i, image in enumerate(images):
        r, c = divmod(i, columns)
        y, x = r * (height + gap), c * (width + gap)
        canvas[y:y + height, x:x + width] = image
    return canvas


def emit_grid(tiles: Sequence[GridTile], out_dir: Path, columns: Optional[int] = None) -> pd.DataFrame:
    """
    Escribe ``tiles/tile_XXXX.png``, ``grid.png`` y ``manifest.csv``

    Args:
        tiles: Teselas en orden de lectura
        out_dir: Directorio de salida
        columns: Columnas de la rejilla (por defecto, casi cuadrada)

    Returns:
        Manifiesto como DataFrame (una fila por tesela)
    """
    out_dir = Path(out_dir)
    (out_dir / "tiles").mkdir(parents=True, exist_ok=True)
    if columns is None:
        columns = max(1, math.ceil(math.sqrt(len(tiles))))

    rows = []
    for i, tile in enumerate(tiles):
        file = Path("tiles") / f"tile_{i:04d}.png"
        ImageProcessor.save_image(tile.image, out_dir / file)
        r, c = divmod(i, columns)
        meta = {k: v for k, v in asdict(tile).items() if k != "image"}
        rows.append({"tile": i, "file": file.as_posix(), "row": r, "col": c, **meta})

    manifest = pd.DataFrame(rows, columns=MANIFEST_COLUMNS)
    manifest.to_csv(out_dir / "manifest.csv", index=False)
    if tiles:
        ImageProcessor.save_image(compose_grid([t.image for t in tiles], columns), out_dir / "grid.png")
    logger.info("🖼️ %d teselas escritas en %s", len(tiles), out_dir)
    return manifest


def read_manifest(out_dir: Path) -> pd.DataFrame:
    """Lee el manifiesto de una salida anterior (etiquetas como texto)"""
    return pd.read_csv(Path(out_dir) / "manifest.csv", dtype={"file": str, "mode": str, "group": str, "pose": str})
