"""
Módulo para convertir rasters entre disco, numpy y tensores
"""

from pathlib import Path
from typing import Sequence

import numpy as np
import torch
from PIL import Image

from .densepose_atlas import DenseBodyMap, TextureAtlas, decode_iuv, encode_iuv


class ImageProcessor:
    """
    Clase con utilidades de conversión de imágenes

    Convención: en disco y en numpy las imágenes son H×W×3 en [0, 1]; en
    las redes son tensores 3×H×W en [-1, 1].
    """

    @staticmethod
    def load_image(path: Path) -> np.ndarray:
        """
        Lee una imagen RGB

        Args:
            path: Ruta del PNG/JPG

        Returns:
            Array H×W×3 float64 en [0, 1]
        """
        with Image.open(path) as img:
            return np.asarray(img.convert("RGB"), dtype=np.float64) / 255.0

    @staticmethod
    def save_image(image: np.ndarray, path: Path) -> Path:
        """
        Guarda una imagen H×W×3 en [0, 1] como PNG de 8 bits

        Returns:
            Ruta escrita
        """
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        raster = np.clip(np.rint(np.asarray(image) * 255.0), 0, 255).astype(np.uint8)
        Image.fromarray(raster).save(path)
        return path

    @staticmethod
    def load_iuv(path: Path, num_parts: int) -> DenseBodyMap:
        """
        Lee y valida un raster IUV

        Args:
            path: Ruta del PNG (canales parte, U, V)
            num_parts: M del esquema

        Returns:
            DenseBodyMap
        """
        with Image.open(path) as img:
            raster = np.asarray(img.convert("RGB"), dtype=np.uint8)
        return decode_iuv(raster, num_parts=num_parts)

    @staticmethod
    def save_iuv(body_map: DenseBodyMap, path: Path) -> Path:
        """Guarda un mapa como raster IUV (PNG sin pérdidas)"""
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        Image.fromarray(encode_iuv(body_map)).save(path)
        return path

    @staticmethod
    def to_tensor(image: np.ndarray) -> torch.Tensor:
        """H×W×3 en [0, 1] → 3×H×W float32 en [-1, 1]"""
        array = np.ascontiguousarray(np.asarray(image, dtype=np.float32).transpose(2, 0, 1))
        return torch.from_numpy(array) * 2.0 - 1.0

    @staticmethod
    def to_image(tensor: torch.Tensor) -> np.ndarray:
        """3×H×W en [-1, 1] → H×W×3 float64 en [0, 1]"""
        array = tensor.detach().cpu().double().numpy().transpose(1, 2, 0)
        return np.clip((array + 1.0) / 2.0, 0.0, 1.0)

    @staticmethod
    def atlas_to_tensor(atlas: TextureAtlas) -> torch.Tensor:
        """
        Atlas → entrada del encoder (3×A×A en [-1, 1], texeles vacíos a 0)
        """
        texels = atlas.texels * 2.0 - 1.0
        texels[~atlas.filled] = 0.0
        array = np.ascontiguousarray(texels.astype(np.float32).transpose(2, 0, 1))
        return torch.from_numpy(array)

    @staticmethod
    def map_to_tensor(body_map: DenseBodyMap) -> torch.Tensor:
        """Índices de parte H×W como tensor long"""
        return torch.from_numpy(np.ascontiguousarray(body_map.part_index)).long()

    @staticmethod
    def stack_maps(maps: Sequence[DenseBodyMap]) -> torch.Tensor:
        """Lista de mapas → tensor B×H×W long"""
        return torch.stack([ImageProcessor.map_to_tensor(m) for m in maps])
