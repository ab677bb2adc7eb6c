"""
ModelBundle y contenedor de checkpoints
"""

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Optional

import torch

from ..utils.errors import CheckpointError, CheckpointMismatchError
from .networks import AppearanceEncoder, Generator, MultiscaleDiscriminator, NetConfig, build_networks

logger = logging.getLogger(__name__)

CHECKPOINT_FORMAT = "partgen-checkpoint/2"


@dataclass
class ModelBundle:
    """
    Las tres redes, su configuración y el contador de pasos
    """

    encoder: AppearanceEncoder
    generator: Generator
    discriminator: MultiscaleDiscriminator
    config: NetConfig
    step: int = 0
    extra: Dict[str, Any] = field(default_factory=dict)

    @classmethod
    def initialize(cls, config: NetConfig, seed: int = 0) -> "ModelBundle":
        """
        Crea un bundle con pesos iniciales reproducibles

        Args:
            config: Arquitectura
            seed: Semilla de inicialización

        Returns:
            ModelBundle en el paso 0
        """
        with torch.random.fork_rng(devices=[]):
            torch.manual_seed(seed)
            encoder, generator, discriminator = build_networks(config)
        return cls(encoder=encoder, generator=generator, discriminator=discriminator, config=config)

    def to(self, device: str) -> "ModelBundle":
        for net in (self.encoder, self.generator, self.discriminator):
            net.to(device)
        return self

    def eval(self) -> "ModelBundle":
        for net in (self.encoder, self.generator, self.discriminator):
            net.eval()
        return self

    def train(self) -> "ModelBundle":
        for net in (self.encoder, self.generator, self.discriminator):
            net.train()
        return self

    @property
    def device(self) -> torch.device:
        return next(self.generator.parameters()).device

    def all_finite(self) -> bool:
        """True si ningún parámetro contiene NaN/inf"""
        for net in (self.encoder, self.generator, self.discriminator):
            for param in net.parameters():
                if not torch.isfinite(param).all():
                    return False
        return True


def save_checkpoint(bundle: ModelBundle, path: Path, state: Optional[Dict[str, Any]] = None) -> Path:
    """
    Guarda el bundle en un contenedor autodescriptivo

    Args:
        bundle: Redes + configuración
        path: Fichero destino (.pt)
        state: Estado adicional de entrenamiento (optimizadores, RNG, ...)

    Returns:
        Ruta escrita
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = {
        "format": CHECKPOINT_FORMAT,
        "net_config": bundle.config.to_dict(),
        "step": bundle.step,
        "encoder": bundle.encoder.state_dict(),
        "generator": bundle.generator.state_dict(),
        "discriminator": bundle.discriminator.state_dict(),
        "state": state or {},
    }
    tmp_path = path.with_suffix(path.suffix + ".tmp")
    torch.save(payload, tmp_path)
    tmp_path.replace(path)
    logger.debug("checkpoint guardado en %s (paso %d)", path, bundle.step)
    return path


def load_checkpoint(
    path: Path,
    expected: Optional[NetConfig] = None,
    device: str = "cpu",
) -> ModelBundle:
    """
    Carga un checkpoint y reconstruye el bundle

    Args:
        path: Fichero .pt
        expected: Configuración que debe coincidir exactamente (opcional)
        device: Dispositivo destino

    Returns:
        ModelBundle con ``extra['state']`` conteniendo el estado de entrenamiento
    """
    path = Path(path)
    if not path.is_file():
        raise CheckpointError(f"no existe el checkpoint {path}")
    try:
        payload = torch.load(path, map_location=device, weights_only=False)
    except Exception as exc:
        raise CheckpointError(f"checkpoint ilegible {path}: {exc}") from exc
    if not isinstance(payload, dict) or payload.get("format") != CHECKPOINT_FORMAT:
        raise CheckpointError(f"{path} no es un checkpoint de este proyecto")

    config = NetConfig.from_dict(payload["net_config"])
    if expected is not None and expected != config:
        diffs = {
            key: (value, getattr(expected, key))
            for key, value in config.to_dict().items()
            if getattr(expected, key) != value
        }
        raise CheckpointMismatchError(f"configuración distinta (checkpoint, pedida): {diffs}")

    with torch.random.fork_rng(devices=[]):
        bundle = ModelBundle.initialize(config)
    try:
        bundle.encoder.load_state_dict(payload["encoder"])
        bundle.generator.load_state_dict(payload["generator"])
        bundle.discriminator.load_state_dict(payload["discriminator"])
    except RuntimeError as exc:
        raise CheckpointMismatchError(f"parámetros incompatibles con la configuración: {exc}") from exc
    bundle.step = int(payload["step"])
    bundle.extra["state"] = payload.get("state", {})
    return bundle.to(device)
