"""
Dataset sintético de "maniquíes" para entrenar y probar a escala de escritorio

Cada identidad tiene un atlas de textura propio (color base + rayas por
parte, cuantizado a 8 bits) y cada pose se pinta con ``render_texture`` sobre
un mapa IUV construido con segmentos rígidos (rectángulos y una elipse para la
cabeza). Así el color de una parte es el mismo en todas las poses de la
identidad y la extracción de textura recupera exactamente los píxeles.
"""

import logging
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Dict, List, Sequence, Tuple, Union

import numpy as np
from omegaconf import OmegaConf

from ..utils.errors import ConfigError
from .data_processor import ImageProcessor
from .dataset_index import IMAGE_SUFFIX, IUV_SUFFIX, DatasetIndex, load_index
from .densepose_atlas import DenseBodyMap, TextureAtlas, atlas_layout, cell_size, decode_iuv, render_texture

logger = logging.getLogger(__name__)

LAYOUTS = (6, 24)

# Partes por segmento (una o dos mitades izquierda/derecha)
SEGMENT_PARTS = {
    6: {
        "head": (1,), "torso": (2,),
        "arm_l": (3,), "arm_r": (4,),
        "leg_l": (5,), "leg_r": (6,),
    },
    24: {
        "torso": (1, 2), "head": (23, 24),
        "hand_r": (3,), "hand_l": (4,), "foot_l": (5,), "foot_r": (6,),
        "upper_leg_r": (7, 9), "upper_leg_l": (8, 10),
        "lower_leg_r": (11, 13), "lower_leg_l": (12, 14),
        "upper_arm_l": (15, 17), "upper_arm_r": (16, 18),
        "lower_arm_l": (19, 21), "lower_arm_r": (20, 22),
    },
}

# Medidas en fracciones del lado de la imagen
BODY = {
    "torso_half_w": 0.12,
    "torso_half_h": 0.16,
    "head_half_w": 0.07,
    "head_half_h": 0.085,
    "arm_half_w": 0.035,
    "upper_arm": 0.15,
    "lower_arm": 0.13,
    "leg_half_w": 0.05,
    "upper_leg": 0.16,
    "lower_leg": 0.14,
    "extremity": 0.035,
}


@dataclass(frozen=True)
class SyntheticSpec:
    """Parámetros del dataset sintético"""

    num_identities: int = 20
    poses_per_identity: int = 4
    test_identities: int = 4
    image_size: int = 64
    num_parts: int = 6
    atlas_size: int = 64

    def __post_init__(self):
        if self.num_parts not in LAYOUTS:
            raise ConfigError(f"num_parts={self.num_parts}; los maniquíes existen para {LAYOUTS}")
        if self.num_identities < 1 or self.poses_per_identity < 1:
            raise ConfigError("se necesita al menos una identidad y una pose")
        if not 0 <= self.test_identities < self.num_identities:
            raise ConfigError("test_identities debe dejar identidades de entrenamiento")
        if self.image_size < 16:
            raise ConfigError("image_size mínimo: 16")
        cell_size(self.atlas_size)

    @classmethod
    def from_dict(cls, values: Dict) -> "SyntheticSpec":
        known = {f.name for f in fields(cls)}
        return cls(**{k: int(v) for k, v in dict(values).items() if k in known})


@dataclass(frozen=True)
class Segment:
    """Segmento rígido en coordenadas fraccionarias de la imagen"""

    name: str
    center: Tuple[float, float]
    angle: float
    half_width: float
    half_length: float
    ellipse: bool = False


def sample_pose(rng: np.random.Generator) -> Dict[str, float]:
    """
    Parámetros articulares aleatorios (ángulos en radianes, 0 = hacia abajo)
    """
    return {
        "shift_x": float(rng.uniform(-0.06, 0.06)),
        "shift_y": float(rng.uniform(-0.04, 0.04)),
        "arm_l": float(rng.uniform(0.15, 1.9)),
        "arm_r": float(rng.uniform(0.15, 1.9)),
        "elbow_l": float(rng.uniform(-0.6, 0.6)),
        "elbow_r": float(rng.uniform(-0.6, 0.6)),
        "leg_l": float(rng.uniform(0.0, 0.4)),
        "leg_r": float(rng.uniform(0.0, 0.4)),
        "knee_l": float(rng.uniform(-0.3, 0.3)),
        "knee_r": float(rng.uniform(-0.3, 0.3)),
    }


def _direction(angle: float) -> np.ndarray:
    return np.array([np.sin(angle), np.cos(angle)])


def _limb(name: str, joint: np.ndarray, angle: float, length: float, half_width: float) -> Tuple[Segment, np.ndarray]:
    """Segmento que sale de ``joint``; devuelve también su extremo"""
    direction = _direction(angle)
    center = joint + direction * length / 2.0
    segment = Segment(name, (float(center[0]), float(center[1])), angle, half_width, length / 2.0)
    return segment, joint + direction * length


def mannequin_segments(pose: Dict[str, float], num_parts: int) -> List[Segment]:
    """
    Segmentos del maniquí en orden de pintado (lo posterior tapa lo anterior)

    Args:
        pose: Salida de ``sample_pose``
        num_parts: 6 (extremidades enteras) o 24 (brazo/antebrazo, muslo/pierna, manos y pies)

    Returns:
        Lista de Segment
    """
    b = BODY
    cx, cy = 0.5 + pose["shift_x"], 0.47 + pose["shift_y"]
    top, bottom = cy - b["torso_half_h"], cy + b["torso_half_h"]
    torso = Segment("torso", (cx, cy), 0.0, b["torso_half_w"], b["torso_half_h"])
    head = Segment("head", (cx, top - b["head_half_h"]), 0.0, b["head_half_w"], b["head_half_h"], ellipse=True)

    shoulders = {
        "l": np.array([cx - b["torso_half_w"] - b["arm_half_w"], top + b["arm_half_w"]]),
        "r": np.array([cx + b["torso_half_w"] + b["arm_half_w"], top + b["arm_half_w"]]),
    }
    hips = {
        "l": np.array([cx - b["torso_half_w"] / 2.0, bottom]),
        "r": np.array([cx + b["torso_half_w"] / 2.0, bottom]),
    }
    # lado izquierdo de la imagen = ángulos negativos
    sign = {"l": -1.0, "r": 1.0}

    legs: List[Segment] = []
    arms: List[Segment] = []
    for side in ("l", "r"):
        arm_angle = sign[side] * pose[f"arm_{side}"]
        leg_angle = sign[side] * pose[f"leg_{side}"]
        if num_parts == 6:
            arm, _ = _limb(f"arm_{side}", shoulders[side], arm_angle, b["upper_arm"] + b["lower_arm"], b["arm_half_w"])
            leg, _ = _limb(f"leg_{side}", hips[side], leg_angle, b["upper_leg"] + b["lower_leg"], b["leg_half_w"])
            arms.append(arm)
            legs.append(leg)
            continue
        upper_arm, elbow = _limb(f"upper_arm_{side}", shoulders[side], arm_angle, b["upper_arm"], b["arm_half_w"])
        forearm_angle = arm_angle + sign[side] * pose[f"elbow_{side}"]
        lower_arm, wrist = _limb(f"lower_arm_{side}", elbow, forearm_angle, b["lower_arm"], b["arm_half_w"])
        hand, _ = _limb(f"hand_{side}", wrist, forearm_angle, 2 * b["extremity"], b["extremity"])
        upper_leg, knee = _limb(f"upper_leg_{side}", hips[side], leg_angle, b["upper_leg"], b["leg_half_w"])
        shin_angle = leg_angle + sign[side] * pose[f"knee_{side}"]
        lower_leg, ankle = _limb(f"lower_leg_{side}", knee, shin_angle, b["lower_leg"], b["leg_half_w"])
        foot, _ = _limb(f"foot_{side}", ankle, shin_angle, 2 * b["extremity"], b["extremity"] * 1.4)
        arms += [upper_arm, lower_arm, hand]
        legs += [upper_leg, lower_leg, foot]
    return legs + [torso, head] + arms


def render_body_map(pose: Dict[str, float], image_size: int, num_parts: int) -> DenseBodyMap:
    """
    Rasteriza el maniquí a un mapa IUV cuantizado a 8 bits

    El mapa devuelto es exactamente el que se obtiene al decodificar el PNG
    escrito en disco.
    """
    coords = (np.arange(image_size, dtype=np.float64) + 0.5) / image_size
    xs, ys = np.meshgrid(coords, coords)
    part_index = np.zeros((image_size, image_size), dtype=np.int64)
    u = np.zeros_like(xs)
    v = np.zeros_like(xs)

    parts_of = SEGMENT_PARTS[num_parts]
    for seg in mannequin_segments(pose, num_parts):
        dx, dy = xs - seg.center[0], ys - seg.center[1]
        along = dx * np.sin(seg.angle) + dy * np.cos(seg.angle)
        across = dx * np.cos(seg.angle) - dy * np.sin(seg.angle)
        if seg.ellipse:
            inside = (across / seg.half_width) ** 2 + (along / seg.half_length) ** 2 <= 1.0
        else:
            inside = (np.abs(along) <= seg.half_length) & (np.abs(across) <= seg.half_width)
        seg_u = np.clip((across + seg.half_width) / (2.0 * seg.half_width), 0.0, 1.0)
        seg_v = np.clip((along + seg.half_length) / (2.0 * seg.half_length), 0.0, 1.0)

        parts = parts_of[seg.name]
        if len(parts) == 1:
            part_index[inside] = parts[0]
            u[inside] = seg_u[inside]
        else:
            first = inside & (seg_u < 0.5)
            second = inside & (seg_u >= 0.5)
            part_index[first] = parts[0]
            part_index[second] = parts[1]
            u[first] = np.clip(2.0 * seg_u[first], 0.0, 1.0)
            u[second] = np.clip(2.0 * seg_u[second] - 1.0, 0.0, 1.0)
        v[inside] = seg_v[inside]

    raster = np.zeros((image_size, image_size, 3), dtype=np.uint8)
    raster[..., 0] = part_index.astype(np.uint8)
    raster[..., 1] = np.rint(u * 255.0).astype(np.uint8)
    raster[..., 2] = np.rint(v * 255.0).astype(np.uint8)
    raster[part_index == 0] = 0
    return decode_iuv(raster, num_parts=num_parts)


def identity_atlas(rng: np.random.Generator, atlas_size: int, num_parts: int) -> TextureAtlas:
    """
    Atlas de una identidad: por parte, rayas de dos colores (múltiplos de 1/255)
    """
    cell = cell_size(atlas_size)
    atlas = TextureAtlas.empty(atlas_size, num_parts)
    for k, (r0, c0) in atlas_layout(atlas_size, num_parts).items():
        base = rng.integers(40, 231, size=3) / 255.0
        stripe = rng.integers(40, 231, size=3) / 255.0
        period = int(rng.integers(2, max(3, cell // 3) + 1))
        vertical = bool(rng.integers(2))
        ii, jj = np.meshgrid(np.arange(cell), np.arange(cell), indexing="ij")
        pattern = ((jj if vertical else ii) // period) % 2 == 1
        block = np.where(pattern[..., None], stripe, base)
        atlas.texels[r0:r0 + cell, c0:c0 + cell] = block
        atlas.filled[r0:r0 + cell, c0:c0 + cell] = True
    return atlas


def part_palette(atlas: TextureAtlas, part: int) -> np.ndarray:
    """Colores distintos (K×3) que usa una parte en el atlas"""
    cell = cell_size(atlas.size)
    r0, c0 = atlas.part_layout[part]
    block = atlas.texels[r0:r0 + cell, c0:c0 + cell].reshape(-1, 3)
    return np.unique(block, axis=0)


def make_synthetic_dataset(
    root: Path,
    spec: SyntheticSpec,
    rng: Union[np.random.Generator, int] = 0,
) -> DatasetIndex:
    """
    Genera el dataset en disco con la estructura de ``load_index``

    Args:
        root: Directorio destino (se crea)
        spec: Parámetros del dataset
        rng: Generador numpy o semilla; misma semilla ⇒ ficheros idénticos byte a byte

    Returns:
        DatasetIndex del dataset generado
    """
    if not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(int(rng))
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)

    identities: List[str] = []
    for i in range(spec.num_identities):
        identity = f"id{i:04d}"
        identities.append(identity)
        atlas = identity_atlas(rng, spec.atlas_size, spec.num_parts)
        for j in range(spec.poses_per_identity):
            body_map = render_body_map(sample_pose(rng), spec.image_size, spec.num_parts)
            frame = f"{j:03d}"
            ImageProcessor.save_image(render_texture(atlas, body_map), root / identity / f"{frame}{IMAGE_SUFFIX}")
            ImageProcessor.save_iuv(body_map, root / identity / f"{frame}{IUV_SUFFIX}")

    split_at = spec.num_identities - spec.test_identities
    _write_manifest(root / "train.txt", identities[:split_at])
    _write_manifest(root / "test.txt", identities[split_at:])
    OmegaConf.save(OmegaConf.create(asdict(spec)), root / "dataset.yaml")

    logger.info(
        "✅ Dataset sintético: %d identidades × %d poses (M=%d) en %s",
        spec.num_identities, spec.poses_per_identity, spec.num_parts, root,
    )
    return load_index(root)


def _write_manifest(path: Path, identities: Sequence[str]) -> None:
    path.write_text("".join(f"{identity}\n" for identity in identities))
