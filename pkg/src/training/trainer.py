"""
Entrenamiento extremo a extremo de (E, G) contra D sobre pares de la misma persona

Cada paso: extraer la textura de la fuente, codificarla, muestrear z con
reparametrización, deformar z a la pose destino, generar y comparar con la
imagen destino. Se actualiza primero D y después E+G.
"""

import logging
import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
import torch
from omegaconf import DictConfig, OmegaConf
from tqdm import trange

from ..data.data_processor import ImageProcessor
from ..data.dataset_index import DatasetIndex, TrainSample, sample_pair
from ..data.densepose_atlas import extract_texture
from ..models.checkpoint import ModelBundle, load_checkpoint, save_checkpoint
from ..models.latent_core import kl_to_standard_normal, sample_reparam, warp_for_mode
from ..models.losses import (
    LossComponents,
    LossWeights,
    build_face_embedder,
    build_feature_extractor,
    face_identity_loss,
    feature_matching_loss,
    gan_losses,
    lsgan_loss,
    perceptual_loss,
    total_loss,
)
from ..models.networks import NetConfig
from ..utils.config import part_groups_for
from ..utils.errors import ConfigError, DatasetError, NonFiniteLossError, ShapeMismatchError
from ..visualization.charts import ChartBuilder

logger = logging.getLogger(__name__)

METRIC_COLUMNS = [
    "step",
    "loss_vgg",
    "loss_face",
    "loss_g_adv",
    "loss_fm",
    "loss_kl",
    "loss_d",
    "gen_enc_objective",
    "disc_objective",
    "grad_norm_encoder",
    "grad_norm_generator",
    "grad_norm_discriminator",
]


@dataclass(frozen=True)
class TrainConfig:
    """Hiperparámetros de una ejecución de entrenamiento"""

    net: NetConfig
    weights: LossWeights = field(default_factory=LossWeights)
    lr: float = 2.0e-4
    beta1: float = 0.5
    beta2: float = 0.999
    eps: float = 1.0e-8
    batch_size: int = 4
    total_steps: int = 2000
    checkpoint_every: int = 500
    log_every: int = 50
    seed: int = 0

    def __post_init__(self):
        if not self.lr > 0:
            raise ConfigError(f"lr = {self.lr} debe ser > 0")
        if not 0.0 <= self.beta1 < 1.0 or not 0.0 <= self.beta2 < 1.0:
            raise ConfigError("beta1 y beta2 deben estar en [0, 1)")
        if self.batch_size < 1:
            raise ConfigError("batch_size debe ser ≥ 1")
        if self.total_steps < 0 or self.checkpoint_every < 0:
            raise ConfigError("total_steps y checkpoint_every no pueden ser negativos")

    @classmethod
    def from_config(cls, cfg: DictConfig) -> "TrainConfig":
        """Construye la configuración desde el árbol resuelto por ``load_config``"""
        train = OmegaConf.to_container(cfg.train, resolve=True)
        return cls(
            net=NetConfig.from_dict(OmegaConf.to_container(cfg.net, resolve=True)),
            weights=LossWeights.from_dict(OmegaConf.to_container(cfg.loss.weights, resolve=True)),
            lr=float(train["lr"]),
            beta1=float(train["beta1"]),
            beta2=float(train.get("beta2", 0.999)),
            eps=float(train.get("eps", 1.0e-8)),
            batch_size=int(train["batch_size"]),
            total_steps=int(train["total_steps"]),
            checkpoint_every=int(train["checkpoint_every"]),
            log_every=int(train.get("log_every", 50)),
            seed=int(cfg.seed),
        )


@dataclass
class LossContext:
    """Redes fijas y parámetros que necesitan las pérdidas"""

    extractor: torch.nn.Module
    face_embedder: torch.nn.Module
    weights: LossWeights
    head_parts: List[int]
    head_margin: float = 0.2

    @classmethod
    def from_settings(cls, settings: Dict, weights: LossWeights, num_parts: int) -> "LossContext":
        """
        Args:
            settings: Sección ``loss`` de la configuración
            weights: Pesos λ
            num_parts: M, para localizar la cabeza
        """
        return cls(
            extractor=build_feature_extractor(settings),
            face_embedder=build_face_embedder(settings),
            weights=weights,
            head_parts=part_groups_for(num_parts).get("head", []),
            head_margin=float(settings.get("head_margin", 0.2)),
        )

    def to(self, device) -> "LossContext":
        self.extractor.to(device)
        self.face_embedder.to(device)
        return self


@dataclass
class Optimizers:
    """Adam para E+G y Adam para D (sin weight decay)"""

    gen_enc: torch.optim.Adam
    disc: torch.optim.Adam

    @classmethod
    def create(cls, bundle: ModelBundle, config: TrainConfig) -> "Optimizers":
        kwargs = dict(lr=config.lr, betas=(config.beta1, config.beta2), eps=config.eps, weight_decay=0.0)
        gen_enc = torch.optim.Adam(
            list(bundle.encoder.parameters()) + list(bundle.generator.parameters()), **kwargs
        )
        return cls(gen_enc=gen_enc, disc=torch.optim.Adam(bundle.discriminator.parameters(), **kwargs))

    def state_dict(self) -> Dict:
        return {"gen_enc": self.gen_enc.state_dict(), "disc": self.disc.state_dict()}

    def load_state_dict(self, state: Dict) -> None:
        self.gen_enc.load_state_dict(state["gen_enc"])
        self.disc.load_state_dict(state["disc"])


@dataclass
class FitResult:
    """Bundle entrenado y log de métricas (una fila por paso)"""

    bundle: ModelBundle
    log: pd.DataFrame


def collate(batch: Sequence[TrainSample], config: NetConfig, device) -> Tuple[torch.Tensor, torch.Tensor, torch.Tensor]:
    """
    Convierte un lote de pares en tensores

    Returns:
        (atlas fuente B×3×A×A, imagen destino B×3×H×W, mapa destino B×H×W)
    """
    if not batch:
        raise DatasetError("lote vacío")
    expected = (config.image_size, config.image_size)
    atlases, images = [], []
    for sample in batch:
        if sample.target_image.shape[:2] != expected or sample.target_map.shape != expected:
            raise ShapeMismatchError(
                f"muestra de {sample.identity} con tamaño {sample.target_map.shape}; la red espera {expected}"
            )
        if sample.source_map.num_parts != config.num_parts or sample.target_map.num_parts != config.num_parts:
            raise ShapeMismatchError(f"mapas con M distinto de {config.num_parts}")
        atlas = extract_texture(sample.source_image, sample.source_map, config.atlas_size)
        atlases.append(ImageProcessor.atlas_to_tensor(atlas))
        images.append(ImageProcessor.to_tensor(sample.target_image))
    maps = ImageProcessor.stack_maps([s.target_map for s in batch])
    return torch.stack(atlases).to(device), torch.stack(images).to(device), maps.to(device)


def _grad_norm(parameters) -> float:
    norms = [p.grad.detach().norm(2) for p in parameters if p.grad is not None]
    if not norms:
        return 0.0
    return float(torch.stack(norms).norm(2))


def _check_finite(values: Dict[str, torch.Tensor], step: int) -> None:
    for term, value in values.items():
        number = float(value.detach())
        if not math.isfinite(number):
            raise NonFiniteLossError(term, number, step)


def train_step(
    batch: Sequence[TrainSample],
    bundle: ModelBundle,
    optimizers: Optimizers,
    generator: torch.Generator,
    losses: LossContext,
    step: int = 0,
) -> Dict[str, float]:
    """
    Un paso de optimización: actualización de D y después de E+G

    Args:
        batch: Pares de la misma identidad
        bundle: Redes a entrenar
        optimizers: Estados de Adam
        generator: Fuente aleatoria del muestreo latente
        losses: Extractores fijos y pesos
        step: Índice del paso (para diagnósticos)

    Returns:
        Escalares de todos los términos, objetivos y normas de gradiente
    """
    config = bundle.config
    weights = losses.weights
    atlases, targets, maps = collate(batch, config, bundle.device)

    params = bundle.encoder(atlases)
    z = sample_reparam(params, generator)
    noise = warp_for_mode(z, maps, config.mode)
    fake = bundle.generator(noise)

    # Todos los términos se calculan con el D actual antes de tocar ningún peso
    bundle.discriminator.requires_grad_(True)
    d_real = bundle.discriminator(targets, noise.detach())
    d_fake_detached = bundle.discriminator(fake.detach(), noise.detach())
    loss_d, _ = gan_losses([logits for logits, _ in d_real], [logits for logits, _ in d_fake_detached])
    try:
        bundle.discriminator.requires_grad_(False)
        feats_real = [[f.detach() for f in features] for _, features in d_real]
        d_fake = bundle.discriminator(fake, noise)
        parts = LossComponents(
            vgg=perceptual_loss(fake, targets, losses.extractor),
            face=face_identity_loss(fake, targets, maps, losses.face_embedder, losses.head_parts, losses.head_margin),
            g_adv=lsgan_loss([logits for logits, _ in d_fake], 1.0),
            fm=feature_matching_loss(feats_real, [features for _, features in d_fake]),
            kl=kl_to_standard_normal(params),
            d=loss_d,
        )
        gen_enc, disc = total_loss(parts, weights)
        _check_finite(
            {"d": parts.d, "vgg": parts.vgg, "face": parts.face, "g_adv": parts.g_adv, "fm": parts.fm, "kl": parts.kl},
            step,
        )

        # el grafo de g_adv/fm se construyó con D congelado y no llega a sus pesos
        bundle.discriminator.requires_grad_(True)
        optimizers.disc.zero_grad(set_to_none=True)
        disc.backward()
        grad_norm_d = _grad_norm(bundle.discriminator.parameters())
        optimizers.gen_enc.zero_grad(set_to_none=True)
        gen_enc.backward()
        grad_norm_e = _grad_norm(bundle.encoder.parameters())
        grad_norm_g = _grad_norm(bundle.generator.parameters())

        # Los dos backward van antes de cualquier step; D se actualiza primero
        optimizers.disc.step()
        optimizers.gen_enc.step()
    finally:
        bundle.discriminator.requires_grad_(True)

    values = parts.as_floats()
    return {
        "loss_vgg": values["vgg"],
        "loss_face": values["face"],
        "loss_g_adv": values["g_adv"],
        "loss_fm": values["fm"],
        "loss_kl": values["kl"],
        "loss_d": values["d"],
        "gen_enc_objective": float(gen_enc.detach()),
        "disc_objective": float(disc.detach()),
        "grad_norm_encoder": grad_norm_e,
        "grad_norm_generator": grad_norm_g,
        "grad_norm_discriminator": grad_norm_d,
    }


class Trainer:
    """
    Bucle de entrenamiento con checkpoints, reanudación y log CSV
    """

    def __init__(
        self,
        dataset: DatasetIndex,
        config: TrainConfig,
        losses: LossContext,
        out_dir: Optional[Path] = None,
        device: str = "cpu",
        split: Optional[str] = "train",
    ):
        """
        Args:
            dataset: Índice con al menos una identidad emparejable
            config: Hiperparámetros
            losses: Extractores fijos y pesos
            out_dir: Directorio de checkpoints y logs (None = no escribir nada)
            device: Dispositivo torch
            split: Split del que se muestrean pares
        """
        if not dataset.pairable_identities(split):
            raise DatasetError("el dataset no tiene identidades con al menos dos imágenes")
        if dataset.num_parts != config.net.num_parts:
            raise ConfigError(f"dataset con M={dataset.num_parts} y red con M={config.net.num_parts}")
        self.dataset = dataset
        self.config = config
        self.losses = losses.to(device)
        self.out_dir = Path(out_dir) if out_dir is not None else None
        self.device = device
        self.split = split

        self.bundle = ModelBundle.initialize(config.net, config.seed).to(device)
        self.optimizers = Optimizers.create(self.bundle, config)
        self.data_rng = np.random.default_rng(config.seed)
        self.latent_rng = torch.Generator(device=device).manual_seed(config.seed + 1)
        self.rows: List[Dict[str, float]] = []
        self._flushed = 0

    def resume(self, path: Path) -> None:
        """
        Restaura redes, optimizadores y generadores aleatorios desde un checkpoint

        Las filas previas del log se leen del metrics.csv de la ejecución que
        escribió el checkpoint (``<run>/checkpoints/*.pt``), recortadas a su paso.
        """
        path = Path(path)
        bundle = load_checkpoint(path, expected=self.config.net, device=self.device)
        state = bundle.extra.pop("state", {})
        self.bundle = bundle
        self.optimizers = Optimizers.create(bundle, self.config)
        if "optimizers" in state:
            self.optimizers.load_state_dict(state["optimizers"])
        if "data_rng" in state:
            self.data_rng.bit_generator.state = state["data_rng"]
        if "latent_rng" in state:
            self.latent_rng.set_state(state["latent_rng"].cpu())
        self.rows = self._previous_rows(path.parent.parent / "metrics.csv", bundle.step)
        self._reset_logs(keep_before=bundle.step)
        logger.info("🔁 Reanudando desde %s (paso %d)", path, bundle.step)

    @staticmethod
    def _previous_rows(metrics: Path, step: int) -> List[Dict[str, float]]:
        if not metrics.is_file():
            if step:
                logger.warning("⚠️ no existe %s; el log empieza en el paso %d", metrics, step)
            return []
        frame = pd.read_csv(metrics, float_precision="round_trip")
        frame = frame[frame["step"] < step]
        if len(frame) != step:
            logger.warning("⚠️ %s tiene %d de las %d filas previas al checkpoint", metrics, len(frame), step)
        return frame[METRIC_COLUMNS].to_dict("records")

    def _state(self) -> Dict:
        return {
            "optimizers": self.optimizers.state_dict(),
            "data_rng": self.data_rng.bit_generator.state,
            "latent_rng": self.latent_rng.get_state(),
        }

    def _reset_logs(self, keep_before: int = 0) -> None:
        """Reescribe metrics.csv desde las filas en memoria y recorta timings.csv"""
        self._flushed = 0
        if self.out_dir is None:
            return
        metrics = self.out_dir / "metrics.csv"
        if metrics.is_file():
            metrics.unlink()
        timings = self.out_dir / "timings.csv"
        if timings.is_file():
            kept = pd.read_csv(timings)
            kept = kept[kept["step"] < keep_before]
            if kept.empty:
                timings.unlink()
            else:
                kept.to_csv(timings, index=False)

    def _flush(self, timings: List[Dict[str, float]]) -> None:
        if self.out_dir is None:
            return
        self.out_dir.mkdir(parents=True, exist_ok=True)
        new_rows = self.rows[self._flushed:]
        if new_rows:
            path = self.out_dir / "metrics.csv"
            pd.DataFrame(new_rows, columns=METRIC_COLUMNS).to_csv(
                path, mode="a", header=not path.is_file(), index=False
            )
            self._flushed = len(self.rows)
        if timings:
            path = self.out_dir / "timings.csv"
            pd.DataFrame(timings, columns=["step", "wall_time"]).to_csv(
                path, mode="a", header=not path.is_file(), index=False
            )
            timings.clear()

    def _checkpoint(self) -> None:
        if self.out_dir is None:
            return
        checkpoints = self.out_dir / "checkpoints"
        path = save_checkpoint(self.bundle, checkpoints / f"step_{self.bundle.step:08d}.pt", self._state())
        save_checkpoint(self.bundle, checkpoints / "latest.pt", self._state())
        logger.info("💾 Checkpoint en %s", path)

    def log_frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.rows, columns=METRIC_COLUMNS)

    def fit(self, progress: bool = True) -> FitResult:
        """
        Ejecuta los pasos que faltan hasta ``total_steps``

        Returns:
            FitResult con el bundle y el log completo
        """
        config = self.config
        timings: List[Dict[str, float]] = []
        self.bundle.train()
        if self.bundle.step == 0:
            self._reset_logs()
        bar = trange(self.bundle.step, config.total_steps, desc="train", disable=not progress)
        for step in bar:
            started = time.perf_counter()
            batch = [sample_pair(self.dataset, self.data_rng, self.split) for _ in range(config.batch_size)]
            metrics = train_step(batch, self.bundle, self.optimizers, self.latent_rng, self.losses, step)
            self.rows.append({"step": step, **metrics})
            timings.append({"step": step, "wall_time": time.perf_counter() - started})
            self.bundle.step = step + 1

            if config.log_every and self.bundle.step % config.log_every == 0:
                bar.set_postfix(vgg=f"{metrics['loss_vgg']:.3f}", d=f"{metrics['loss_d']:.3f}")
                logger.debug("paso %d: %s", step, metrics)
            last = self.bundle.step == config.total_steps
            if last or (config.checkpoint_every and self.bundle.step % config.checkpoint_every == 0):
                self._flush(timings)
                self._checkpoint()
        self._flush(timings)
        return FitResult(bundle=self.bundle, log=self.log_frame())


def fit(
    dataset: DatasetIndex,
    config: TrainConfig,
    losses: Optional[LossContext] = None,
    out_dir: Optional[Path] = None,
    resume: Optional[Path] = None,
    device: str = "cpu",
    progress: bool = True,
) -> FitResult:
    """
    Entrena el modelo completo

    Args:
        dataset: Índice de pares
        config: Hiperparámetros
        losses: Extractores y pesos (por defecto, stubs deterministas)
        out_dir: Directorio para checkpoints, metrics.csv y training_curves.html
        resume: Checkpoint desde el que continuar
        device: Dispositivo torch
        progress: Mostrar barra de progreso

    Returns:
        FitResult (bundle + log de métricas)
    """
    was_deterministic = torch.are_deterministic_algorithms_enabled()
    was_warn_only = torch.is_deterministic_algorithms_warn_only_enabled()
    torch.use_deterministic_algorithms(True, warn_only=True)
    try:
        if losses is None:
            losses = LossContext.from_settings({}, config.weights, config.net.num_parts)
        trainer = Trainer(dataset, config, losses, out_dir=out_dir, device=device)
        if resume is not None:
            trainer.resume(resume)
        result = trainer.fit(progress=progress)
    finally:
        torch.use_deterministic_algorithms(was_deterministic, warn_only=was_warn_only)

    if out_dir is not None and not result.log.empty:
        figure = ChartBuilder(result.log, title="Entrenamiento").create_loss_curves()
        figure.write_html(Path(out_dir) / "training_curves.html")
    if len(result.log):
        logger.info("✅ Entrenamiento terminado en el paso %d", result.bundle.step)
    return result
