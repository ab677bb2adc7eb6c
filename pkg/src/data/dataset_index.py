"""
Módulo para indexar y muestrear pares imagen/IUV agrupados por identidad

Estructura en disco::

    root/
      dataset.yaml            metadatos opcionales (num_parts, image_size, ...)
      train.txt, test.txt     una identidad por línea
      {identidad}/{frame}.img.png
      {identidad}/{frame}.iuv.png
"""

import logging
from collections import OrderedDict
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from omegaconf import OmegaConf

from ..utils.errors import DatasetError
from .data_processor import ImageProcessor
from .densepose_atlas import DEFAULT_NUM_PARTS, DenseBodyMap

logger = logging.getLogger(__name__)

IMAGE_SUFFIX = ".img.png"
IUV_SUFFIX = ".iuv.png"
SPLITS = ("train", "test")
DEFAULT_CACHE_SIZE = 2048


@dataclass(frozen=True)
class ImageRecord:
    """Una imagen de una identidad con su mapa IUV"""

    identity: str
    frame: str
    image_path: Path
    iuv_path: Path


@dataclass
class TrainSample:
    """Par fuente/destino de la misma identidad en poses distintas"""

    source_image: np.ndarray
    source_map: DenseBodyMap
    target_image: np.ndarray
    target_map: DenseBodyMap
    identity: str


class DatasetIndex:
    """
    Índice inmutable de registros con caché LRU de rasters decodificados
    """

    def __init__(
        self,
        root: Path,
        records: Sequence[ImageRecord],
        splits: Optional[Dict[str, List[str]]] = None,
        num_parts: int = DEFAULT_NUM_PARTS,
        metadata: Optional[Dict] = None,
        cache_size: int = DEFAULT_CACHE_SIZE,
    ):
        """
        Args:
            root: Directorio raíz del dataset
            records: Registros ordenados
            splits: {split: [identidades]}
            num_parts: M de los mapas IUV
            metadata: Contenido de dataset.yaml
            cache_size: Máximo de rasters (imágenes y mapas) en memoria; 0 desactiva la caché
        """
        self.root = Path(root)
        self.records = tuple(records)
        self.num_parts = num_parts
        self.metadata = dict(metadata or {})
        by_identity: Dict[str, List[ImageRecord]] = {}
        for record in self.records:
            by_identity.setdefault(record.identity, []).append(record)
        self._by_identity = {k: tuple(v) for k, v in by_identity.items()}
        self.splits = {k: list(v) for k, v in (splits or {}).items()}
        self.cache_size = cache_size
        self._cache: "OrderedDict[Path, object]" = OrderedDict()

    def __len__(self) -> int:
        return len(self.records)

    def identities(self, split: Optional[str] = None) -> List[str]:
        """Identidades (opcionalmente de un split) con al menos un registro"""
        if split is None or split not in self.splits:
            return sorted(self._by_identity)
        return [i for i in self.splits[split] if i in self._by_identity]

    def records_for(self, identity: str) -> Tuple[ImageRecord, ...]:
        return self._by_identity.get(identity, ())

    def pairable_identities(self, split: Optional[str] = None) -> List[str]:
        """Identidades con ≥ 2 registros (las únicas válidas para formar pares)"""
        return [i for i in self.identities(split) if len(self._by_identity[i]) >= 2]

    def records_in(self, split: Optional[str] = None) -> List[ImageRecord]:
        """Registros de un split, en orden estable (sirven como poses de condición)"""
        chosen = set(self.identities(split))
        return [r for r in self.records if r.identity in chosen]

    def load_image(self, record: ImageRecord) -> np.ndarray:
        return self._cached(record.image_path, ImageProcessor.load_image)

    def load_map(self, record: ImageRecord) -> DenseBodyMap:
        return self._cached(record.iuv_path, lambda path: ImageProcessor.load_iuv(path, self.num_parts))

    def _cached(self, key: Path, loader: Callable[[Path], object]):
        if key in self._cache:
            self._cache.move_to_end(key)
            return self._cache[key]
        value = loader(key)
        if self.cache_size > 0:
            self._cache[key] = value
            while len(self._cache) > self.cache_size:
                self._cache.popitem(last=False)
        return value


def load_index(root: Path, num_parts: Optional[int] = None) -> DatasetIndex:
    """
    Recorre la estructura documentada y construye el índice

    Los registros sin fichero IUV se descartan (igual que las imágenes sin
    DensePose) y se informa del número descartado.

    Args:
        root: Directorio raíz
        num_parts: M; si es None se lee de dataset.yaml (24 por defecto)

    Returns:
        DatasetIndex
    """
    root = Path(root)
    if not root.is_dir():
        raise DatasetError(f"no existe el directorio de datos {root}")

    metadata: Dict = {}
    meta_path = root / "dataset.yaml"
    if meta_path.is_file():
        metadata = OmegaConf.to_container(OmegaConf.load(meta_path), resolve=True)
    if num_parts is None:
        num_parts = int(metadata.get("num_parts", DEFAULT_NUM_PARTS))

    records: List[ImageRecord] = []
    dropped = 0
    for identity_dir in sorted(p for p in root.iterdir() if p.is_dir()):
        for image_path in sorted(identity_dir.glob(f"*{IMAGE_SUFFIX}")):
            frame = image_path.name[: -len(IMAGE_SUFFIX)]
            iuv_path = identity_dir / f"{frame}{IUV_SUFFIX}"
            if not iuv_path.is_file():
                dropped += 1
                continue
            records.append(ImageRecord(identity_dir.name, frame, image_path, iuv_path))

    if dropped:
        logger.warning("⚠️ %d imágenes descartadas por no tener mapa IUV", dropped)
    if not records:
        raise DatasetError(f"el dataset {root} no contiene pares imagen/IUV")

    splits = {}
    for split in SPLITS:
        manifest = root / f"{split}.txt"
        if manifest.is_file():
            splits[split] = [line.strip() for line in manifest.read_text().splitlines() if line.strip()]

    index = DatasetIndex(root, records, splits=splits, num_parts=num_parts, metadata=metadata)
    logger.info(
        "📂 %d registros, %d identidades (%d con pares) en %s",
        len(index), len(index.identities()), len(index.pairable_identities()), root,
    )
    return index


def sample_pair_records(
    index: DatasetIndex, rng: np.random.Generator, split: Optional[str] = None
) -> Tuple[ImageRecord, ImageRecord]:
    """
    Identidad uniforme y dos registros distintos de ella

    Returns:
        (registro fuente, registro destino)
    """
    candidates = index.pairable_identities(split)
    if not candidates:
        raise DatasetError("ninguna identidad tiene al menos dos imágenes")
    identity = candidates[int(rng.integers(len(candidates)))]
    records = index.records_for(identity)
    first, second = rng.choice(len(records), size=2, replace=False)
    return records[int(first)], records[int(second)]


def sample_pair(
    index: DatasetIndex, rng: np.random.Generator, split: Optional[str] = None
) -> TrainSample:
    """
    Muestra un par de entrenamiento (misma persona, poses distintas)

    Args:
        index: Índice del dataset
        rng: Generador numpy con semilla
        split: Split del que muestrear (None = todos)

    Returns:
        TrainSample con rasters cargados
    """
    source, target = sample_pair_records(index, rng, split)
    return TrainSample(
        source_image=index.load_image(source),
        source_map=index.load_map(source),
        target_image=index.load_image(target),
        target_map=index.load_map(target),
        identity=source.identity,
    )
