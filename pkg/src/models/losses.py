"""
Pérdidas: reconstrucción (perceptual + identidad facial), GAN (LSGAN +
feature matching), prior KL y su combinación ponderada

Los extractores fijos (VGG, SphereFace) son interfaces intercambiables; por
defecto se usan redes convolucionales aleatorias con semilla fija, de modo que
los números solo son comparables con el mismo extractor.
"""

import math
from dataclasses import asdict, dataclass, fields
from typing import Dict, Iterable, List, Optional, Protocol, Sequence, Tuple

import torch
import torch.nn as nn
import torch.nn.functional as F

from ..utils.errors import ConfigError, ShapeMismatchError

# (logit_map, [activaciones]) por escala del discriminador
ScaleOutput = Tuple[torch.Tensor, List[torch.Tensor]]


@dataclass(frozen=True)
class LossWeights:
    """λ de cada término de la función objetivo"""

    vgg: float = 10.0
    face: float = 5.0
    d: float = 1.0
    fm: float = 10.0
    kl: float = 0.01

    def __post_init__(self):
        for name, value in asdict(self).items():
            if not math.isfinite(value) or value < 0:
                raise ConfigError(f"peso λ_{name} = {value} debe ser finito y ≥ 0")

    @classmethod
    def from_dict(cls, values: Dict) -> "LossWeights":
        return cls(**{k: float(v) for k, v in dict(values).items()})


@dataclass
class LossComponents:
    """Términos individuales de un paso (sin ponderar)"""

    vgg: torch.Tensor
    face: torch.Tensor
    g_adv: torch.Tensor
    fm: torch.Tensor
    kl: torch.Tensor
    d: torch.Tensor

    def as_floats(self) -> Dict[str, float]:
        return {f.name: float(getattr(self, f.name).detach()) for f in fields(self)}


class FeatureExtractor(Protocol):
    """Imagen B×3×H×W en [-1, 1] → lista de activaciones por capa"""

    def __call__(self, images: torch.Tensor) -> List[torch.Tensor]: ...


class FaceEmbedder(Protocol):
    """Recorte de cabeza B×3×S×S → embedding B×D"""

    input_size: int

    def __call__(self, crops: torch.Tensor) -> torch.Tensor: ...


def _freeze(module: nn.Module) -> nn.Module:
    module.eval()
    for param in module.parameters():
        param.requires_grad_(False)
    return module


def _seeded_init(module: nn.Module, seed: int) -> None:
    """Pesos aleatorios deterministas sin tocar el RNG global"""
    generator = torch.Generator().manual_seed(seed)
    with torch.no_grad():
        for param in module.parameters():
            if param.dim() > 1:
                fan_in = param[0].numel()
                param.copy_(torch.randn(param.shape, generator=generator) * math.sqrt(2.0 / fan_in))
            else:
                param.zero_()


class IdentityFeatures(nn.Module):
    """Una sola "capa": los píxeles en bruto"""

    def forward(self, images: torch.Tensor) -> List[torch.Tensor]:
        return [images]


class RandomConvFeatures(nn.Module):
    """
    Stub determinista de VGG: convoluciones aleatorias fijas

    La capa 0 son los píxeles; la capa i>0 es la salida del bloque i.
    """

    def __init__(self, channels: Sequence[int] = (8, 16, 32), seed: int = 1234, layers: Optional[Iterable[int]] = None):
        super().__init__()
        blocks = []
        in_ch = 3
        for i, out_ch in enumerate(channels):
            stride = 1 if i == 0 else 2
            blocks.append(nn.Sequential(
                nn.Conv2d(in_ch, out_ch, kernel_size=3, stride=stride, padding=1),
                nn.LeakyReLU(0.2),
            ))
            in_ch = out_ch
        self.blocks = nn.ModuleList(blocks)
        self.layers = sorted(layers) if layers is not None else list(range(len(blocks) + 1))
        if self.layers and (self.layers[0] < 0 or self.layers[-1] > len(blocks)):
            raise ConfigError(f"capas {self.layers} fuera de 0..{len(blocks)}")
        _seeded_init(self, seed)
        _freeze(self)

    def forward(self, images: torch.Tensor) -> List[torch.Tensor]:
        activations = [images]
        x = images
        for block in self.blocks:
            x = block(x)
            activations.append(x)
        return [activations[i] for i in self.layers]


class VGGFeatures(nn.Module):
    """
    Backbone VGG19 de torchvision como extractor perceptual

    Con ``pretrained=True`` descarga los pesos de ImageNet; sin ellos queda
    una red aleatoria (útil para comprobar la interfaz).
    """

    LAYER_ENDS = (2, 7, 12, 21, 30)  # relu1_1, relu2_1, relu3_1, relu4_1, relu5_1

    def __init__(self, pretrained: bool = False, layers: Optional[Iterable[int]] = None):
        super().__init__()
        from torchvision.models import VGG19_Weights, vgg19

        weights = VGG19_Weights.IMAGENET1K_V1 if pretrained else None
        features = vgg19(weights=weights).features
        self.slices = nn.ModuleList()
        start = 0
        for end in self.LAYER_ENDS:
            self.slices.append(nn.Sequential(*[features[i] for i in range(start, end)]))
            start = end
        self.layers = sorted(layers) if layers is not None else list(range(len(self.LAYER_ENDS)))
        self.register_buffer("mean", torch.tensor([0.485, 0.456, 0.406]).view(1, 3, 1, 1))
        self.register_buffer("std", torch.tensor([0.229, 0.224, 0.225]).view(1, 3, 1, 1))
        _freeze(self)

    def forward(self, images: torch.Tensor) -> List[torch.Tensor]:
        x = ((images + 1.0) / 2.0 - self.mean) / self.std
        activations = []
        for block in self.slices:
            x = block(x)
            activations.append(x)
        return [activations[i] for i in self.layers]


class RandomConvEmbedder(nn.Module):
    """Stub determinista de SphereFaceNet: convnet aleatoria fija → embedding"""

    def __init__(self, input_size: int = 32, embed_dim: int = 64, seed: int = 4321):
        super().__init__()
        self.input_size = input_size
        self.net = nn.Sequential(
            nn.Conv2d(3, 16, kernel_size=3, stride=2, padding=1),
            nn.LeakyReLU(0.2),
            nn.Conv2d(16, 32, kernel_size=3, stride=2, padding=1),
            nn.LeakyReLU(0.2),
            nn.AdaptiveAvgPool2d(1),
            nn.Flatten(),
            nn.Linear(32, embed_dim),
        )
        _seeded_init(self, seed)
        _freeze(self)

    def forward(self, crops: torch.Tensor) -> torch.Tensor:
        return self.net(crops)


def build_feature_extractor(settings: Dict) -> nn.Module:
    """
    Construye el extractor perceptual según la sección ``loss`` de la configuración
    """
    kind = settings.get("extractor", "stub")
    layers = settings.get("perceptual_layers")
    if kind == "stub":
        return RandomConvFeatures(
            channels=tuple(settings.get("extractor_channels", (8, 16, 32))),
            seed=int(settings.get("extractor_seed", 1234)),
            layers=layers,
        )
    if kind in ("vgg19", "vgg19_pretrained"):
        return VGGFeatures(pretrained=kind == "vgg19_pretrained", layers=layers)
    if kind == "pixels":
        return IdentityFeatures()
    raise ConfigError(f"extractor '{kind}' desconocido")


def build_face_embedder(settings: Dict) -> nn.Module:
    """Construye el embedder facial (solo stub determinista incluido)"""
    kind = settings.get("face_embedder", "stub")
    if kind != "stub":
        raise ConfigError(f"embedder facial '{kind}' desconocido")
    return RandomConvEmbedder(
        input_size=int(settings.get("face_input_size", 32)),
        embed_dim=int(settings.get("face_embed_dim", 64)),
        seed=int(settings.get("face_seed", 4321)),
    )


def perceptual_loss(gen: torch.Tensor, gt: torch.Tensor, fx: FeatureExtractor) -> torch.Tensor:
    """
    Σ_j media |l_j(gen) − l_j(gt)| sobre las capas configuradas

    Args:
        gen: Imágenes generadas B×3×H×W
        gt: Imágenes reales (mismo tamaño)
        fx: Extractor de activaciones

    Returns:
        Escalar ≥ 0
    """
    if gen.shape != gt.shape:
        raise ShapeMismatchError(f"{tuple(gen.shape)} frente a {tuple(gt.shape)}")
    total = gen.new_zeros(())
    for feat_gen, feat_gt in zip(fx(gen), fx(gt)):
        total = total + (feat_gen - feat_gt.detach()).abs().mean()
    return total


def head_box(head_mask: torch.Tensor, margin: float = 0.2) -> Optional[Tuple[int, int, int, int]]:
    """
    Caja envolvente de la máscara de cabeza ampliada un ``margin`` y recortada a la imagen

    Returns:
        (y0, y1, x0, x1) con extremos exclusivos, o None si la máscara está vacía
    """
    coords = torch.nonzero(head_mask, as_tuple=False)
    if coords.numel() == 0:
        return None
    height, width = head_mask.shape
    y0, x0 = coords.min(dim=0).values.tolist()
    y1, x1 = (coords.max(dim=0).values + 1).tolist()
    pad_y = int(round((y1 - y0) * margin / 2.0))
    pad_x = int(round((x1 - x0) * margin / 2.0))
    return max(0, y0 - pad_y), min(height, y1 + pad_y), max(0, x0 - pad_x), min(width, x1 + pad_x)


def face_identity_loss(
    gen: torch.Tensor,
    gt: torch.Tensor,
    part_index: torch.Tensor,
    fe: FaceEmbedder,
    head_parts: Sequence[int],
    margin: float = 0.2,
) -> torch.Tensor:
    """
    L1 entre embeddings faciales de los recortes de cabeza

    Las muestras sin cabeza visible aportan 0; el resultado se promedia
    sobre el lote completo.

    Args:
        gen: Imágenes generadas B×3×H×W
        gt: Imágenes reales B×3×H×W
        part_index: Mapas de partes destino B×H×W
        fe: Embedder facial
        head_parts: Índices elementales de la cabeza
        margin: Ampliación relativa de la caja

    Returns:
        Escalar ≥ 0
    """
    if gen.shape != gt.shape or part_index.shape != gen.shape[:1] + gen.shape[2:]:
        raise ShapeMismatchError("imágenes y mapas no alineados")
    total = gen.new_zeros(())
    if not head_parts:
        return total
    head = torch.isin(part_index, torch.tensor(list(head_parts), device=part_index.device))
    size = (fe.input_size, fe.input_size)
    for b in range(gen.shape[0]):
        box = head_box(head[b], margin)
        if box is None:
            continue
        y0, y1, x0, x1 = box
        crop_gen = F.interpolate(gen[b:b + 1, :, y0:y1, x0:x1], size=size, mode="bilinear", align_corners=False)
        crop_gt = F.interpolate(gt[b:b + 1, :, y0:y1, x0:x1], size=size, mode="bilinear", align_corners=False)
        total = total + (fe(crop_gen) - fe(crop_gt).detach()).abs().mean()
    return total / gen.shape[0]


def lsgan_loss(logits: Sequence[torch.Tensor], target: float) -> torch.Tensor:
    """Media sobre escalas de mean((x − t)²)"""
    return torch.stack([(x - target).pow(2).mean() for x in logits]).mean()


def gan_losses(
    d_real: Sequence[torch.Tensor], d_fake: Sequence[torch.Tensor]
) -> Tuple[torch.Tensor, torch.Tensor]:
    """
    Pérdidas adversarias por mínimos cuadrados (objetivos 1 / 0)

    Args:
        d_real: Mapas de logits por escala para imágenes reales
        d_fake: Mapas de logits por escala para imágenes generadas

    Returns:
        (loss_D, loss_G_adv); loss_D = ½ (real→1 + fake→0)
    """
    loss_d = 0.5 * (lsgan_loss(d_real, 1.0) + lsgan_loss(d_fake, 0.0))
    loss_g = lsgan_loss(d_fake, 1.0)
    return loss_d, loss_g


def feature_matching_loss(
    feats_real: Sequence[Sequence[torch.Tensor]],
    feats_fake: Sequence[Sequence[torch.Tensor]],
) -> torch.Tensor:
    """
    Σ_escalas Σ_capas media |fake − real|, con la rama real sin gradiente
    """
    if len(feats_real) != len(feats_fake):
        raise ShapeMismatchError("número de escalas distinto")
    total = None
    for scale_real, scale_fake in zip(feats_real, feats_fake):
        if len(scale_real) != len(scale_fake):
            raise ShapeMismatchError("número de capas distinto")
        for real, fake in zip(scale_real, scale_fake):
            term = (fake - real.detach()).abs().mean()
            total = term if total is None else total + term
    if total is None:
        return torch.zeros(())
    return total


def total_loss(parts: LossComponents, weights: LossWeights) -> Tuple[torch.Tensor, torch.Tensor]:
    """
    Objetivo de E+G (a minimizar) y de D

    Returns:
        (gen_enc, disc) con gen_enc = λ_VGG·L_VGG + λ_face·L_face + λ_D·L_G_adv
        + λ_FM·L_FM + λ_KL·KL y disc = λ_D·L_D
    """
    gen_enc = (
        weights.vgg * parts.vgg
        + weights.face * parts.face
        + weights.d * parts.g_adv
        + weights.fm * parts.fm
        + weights.kl * parts.kl
    )
    disc = weights.d * parts.d
    return gen_enc, disc
