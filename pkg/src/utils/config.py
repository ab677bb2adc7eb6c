"""
Configuración de la aplicación

Valores por defecto como diccionarios de módulo y carga de la configuración
jerárquica (defaults ← YAML ← ``--set clave=valor`` ← flags de la CLI).
"""

import os
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence

from dotenv import load_dotenv
from omegaconf import DictConfig, OmegaConf

from .errors import ConfigError, UnknownPartGroupError

# Configuración general
APP_SETTINGS = {
    "project_name": "Part-Latent Human Generator",
    "env_data_root": "PARTGEN_DATA_ROOT",
    "env_device": "PARTGEN_DEVICE",
    "default_data_root": "data/synthetic",
    "default_device": "cpu",
    "log_level": "INFO",
}

# Presets de red: tamaño de imagen H=W, atlas A, partes M, dimensión latente N
NET_PRESETS = {
    "full": {
        "image_size": 512,
        "atlas_size": 256,
        "num_parts": 24,
        "latent_dim": 16,
        "base_channels": 64,
        "max_channels": 512,
        "encoder_res_blocks": 5,
        "encoder_downsamples": 4,
        "gen_downsamples": 3,
        "gen_res_blocks": 6,
        "disc_scales": 2,
        "disc_layers": 3,
        "mode": "parts",
    },
    "desk": {
        "image_size": 64,
        "atlas_size": 64,
        "num_parts": 6,
        "latent_dim": 4,
        "base_channels": 16,
        "max_channels": 128,
        "encoder_res_blocks": 5,
        "encoder_downsamples": 4,
        "gen_downsamples": 3,
        "gen_res_blocks": 6,
        "disc_scales": 2,
        "disc_layers": 3,
        "mode": "parts",
    },
    # Solo para tests rápidos
    "tiny": {
        "image_size": 32,
        "atlas_size": 32,
        "num_parts": 6,
        "latent_dim": 2,
        "base_channels": 4,
        "max_channels": 16,
        "encoder_res_blocks": 5,
        "encoder_downsamples": 4,
        "gen_downsamples": 3,
        "gen_res_blocks": 6,
        "disc_scales": 2,
        "disc_layers": 2,
        "mode": "parts",
    },
}

# Pesos de la función objetivo total
LOSS_WEIGHTS = {
    "vgg": 10.0,
    "face": 5.0,
    "d": 1.0,
    "fm": 10.0,
    "kl": 0.01,
}

# Extractores fijos (stubs deterministas por defecto)
LOSS_SETTINGS = {
    "extractor": "stub",
    "extractor_seed": 1234,
    "extractor_channels": [8, 16, 32],
    "perceptual_layers": [0, 1, 2, 3],
    "face_embedder": "stub",
    "face_seed": 4321,
    "face_input_size": 32,
    "face_embed_dim": 64,
    "head_margin": 0.2,
}

# Entrenamiento (Adam sin weight decay)
TRAIN_DEFAULTS = {
    "lr": 2.0e-4,
    "beta1": 0.5,
    "beta2": 0.999,
    "eps": 1.0e-8,
    "batch_size": 4,
    "total_steps": 2000,
    "checkpoint_every": 500,
    "log_every": 50,
}

# Protocolos de evaluación (versión de escritorio)
EVAL_DEFAULTS = {
    "split": "test",
    "num_poses": 5,
    "samples_per_pose": 16,
    "fid_reference": 64,
    "transfer_pairs": 8,
    "locality_poses": 5,
    "locality_samples": 16,
    "groups": ["head", "torso", "upper_body", "lower_body"],
}

# Dataset sintético de maniquíes
SYNTH_DEFAULTS = {
    "num_identities": 20,
    "poses_per_identity": 4,
    "test_identities": 4,
    "image_size": 64,
    "num_parts": 6,
    "atlas_size": 64,
}

# Grupos lógicos de partes → índices elementales, por número de partes M
PART_GROUPS = {
    6: {
        "head": [1],
        "torso": [2],
        "upper_body": [2, 3, 4],
        "lower_body": [5, 6],
        "arms": [3, 4],
    },
    24: {
        "head": [23, 24],
        "torso": [1, 2],
        "upper_body": [1, 2, 3, 4, 15, 16, 17, 18, 19, 20, 21, 22],
        "lower_body": [5, 6, 7, 8, 9, 10, 11, 12, 13, 14],
        "arms": [3, 4, 15, 16, 17, 18, 19, 20, 21, 22],
    },
}

# Colores para gráficos
CHART_COLORS = {
    "primary": "#1f77b4",
    "secondary": "#ff7f0e",
    "success": "#2ca02c",
    "danger": "#d62728",
    "warning": "#ff9800",
    "info": "#17a2b8",
    "part": "#26a69a",
    "rest": "#ef5350",
    "disc": "#78909c",
}


def default_tree() -> Dict:
    """
    Árbol de configuración por defecto (antes de aplicar preset de red)

    Returns:
        Diccionario anidado con todas las secciones
    """
    load_dotenv()
    return {
        "seed": 0,
        "device": os.getenv(APP_SETTINGS["env_device"], APP_SETTINGS["default_device"]),
        "data": {
            "root": os.getenv(APP_SETTINGS["env_data_root"], APP_SETTINGS["default_data_root"]),
        },
        "net": {"preset": "desk"},
        "loss": {"weights": dict(LOSS_WEIGHTS), **LOSS_SETTINGS},
        "train": dict(TRAIN_DEFAULTS),
        "eval": dict(EVAL_DEFAULTS),
        "synth": dict(SYNTH_DEFAULTS),
    }


def load_config(
    path: Optional[str] = None,
    overrides: Optional[Sequence[str]] = None,
    **flags,
) -> DictConfig:
    """
    Construye la configuración resuelta de una ejecución

    Precedencia (de menor a mayor): defaults, fichero YAML, lista
    ``clave=valor`` de ``--set`` y flags explícitos (``seed=7`` ...).

    Args:
        path: Fichero YAML opcional
        overrides: Lista de asignaciones con puntos ('train.lr=1e-4')
        **flags: Claves de primer nivel que sobreescriben todo lo anterior

    Returns:
        DictConfig con la sección ``net`` ya expandida desde su preset
    """
    cfg = OmegaConf.create(default_tree())

    if path is not None:
        file_path = Path(path)
        if not file_path.is_file():
            raise ConfigError(f"no existe el fichero de configuración {file_path}")
        cfg = OmegaConf.merge(cfg, OmegaConf.load(file_path))

    if overrides:
        try:
            cfg = OmegaConf.merge(cfg, OmegaConf.from_dotlist(list(overrides)))
        except Exception as exc:
            raise ConfigError(f"override inválido: {exc}") from exc

    explicit = {k: v for k, v in flags.items() if v is not None}
    if explicit:
        cfg = OmegaConf.merge(cfg, OmegaConf.create(explicit))

    preset = cfg.net.get("preset", "desk")
    if preset not in NET_PRESETS:
        raise ConfigError(f"preset de red desconocido: {preset}")
    cfg.net = OmegaConf.merge(OmegaConf.create(NET_PRESETS[preset]), cfg.net)
    return cfg


def save_config(cfg: DictConfig, out_dir: Path) -> Path:
    """Copia la configuración resuelta en el directorio de salida"""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    target = out_dir / "config.yaml"
    OmegaConf.save(cfg, target)
    return target


def part_groups_for(num_parts: int) -> Dict[str, List[int]]:
    """
    Tabla de grupos lógicos para un número de partes

    Args:
        num_parts: M del modelo

    Returns:
        Diccionario {grupo: [índices]}; vacío si no hay tabla para M
    """
    return {name: list(parts) for name, parts in PART_GROUPS.get(num_parts, {}).items()}


def resolve_part_group(name: str, num_parts: int) -> List[int]:
    """
    Traduce un grupo lógico ('head', 'torso', ...) a índices elementales

    También acepta listas explícitas separadas por comas ("3,4") y
    "all" / "none".

    Args:
        name: Nombre del grupo
        num_parts: M del modelo

    Returns:
        Lista ordenada de índices de parte
    """
    key = name.strip().lower().replace("-", "_").replace(" ", "_")
    if key == "all":
        return list(range(1, num_parts + 1))
    if key in ("none", ""):
        return []
    groups = part_groups_for(num_parts)
    if key in groups:
        return sorted(groups[key])
    if all(token.strip().isdigit() for token in key.split(",")):
        parts = sorted({int(token) for token in key.split(",")})
        if parts and (parts[0] < 1 or parts[-1] > num_parts):
            raise UnknownPartGroupError(f"partes fuera de 1..{num_parts}: {name}")
        return parts
    known = ", ".join(sorted(groups)) or "(ninguno)"
    raise UnknownPartGroupError(f"grupo '{name}' desconocido para M={num_parts}; disponibles: {known}")


def complement_parts(parts: Iterable[int], num_parts: int) -> List[int]:
    """Partes de {1..M} que no están en ``parts``"""
    chosen = set(parts)
    return [k for k in range(1, num_parts + 1) if k not in chosen]
