"""
Redes entrenables: encoder de apariencia E, generador G y discriminador D

G sigue el generador global de Pix2PixHD (3 bajadas, 6 bloques residuales,
3 subidas) y D es el discriminador PatchGAN de dos escalas condicionado en la
imagen de ruido deformada. Anchos de canal y profundidades viven en NetConfig.
"""

from dataclasses import asdict, dataclass, fields
from typing import Dict, List, Tuple

import torch
import torch.nn as nn
import torch.nn.functional as F

from ..data.densepose_atlas import MAX_PARTS, cell_size
from ..utils.errors import ConfigError, ShapeMismatchError
from .latent_core import GaussianParams

MODES = ("parts", "noparts")


@dataclass(frozen=True)
class NetConfig:
    """
    Configuración de arquitectura (tamaños y anchos de canal)
    """

    image_size: int = 64
    atlas_size: int = 64
    num_parts: int = 6
    latent_dim: int = 4
    base_channels: int = 16
    max_channels: int = 128
    encoder_res_blocks: int = 5
    encoder_downsamples: int = 4
    gen_downsamples: int = 3
    gen_res_blocks: int = 6
    disc_scales: int = 2
    disc_layers: int = 3
    mode: str = "parts"

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigError(f"modo '{self.mode}' desconocido; usa {MODES}")
        if self.image_size % (2 ** self.gen_downsamples) != 0:
            raise ConfigError(
                f"image_size={self.image_size} debe ser divisible por 2^{self.gen_downsamples}"
            )
        if not 1 <= self.num_parts <= MAX_PARTS:
            raise ConfigError(f"num_parts debe estar en 1..{MAX_PARTS}")
        if self.latent_dim < 1 or self.base_channels < 1:
            raise ConfigError("latent_dim y base_channels deben ser positivos")
        if self.encoder_downsamples > self.encoder_res_blocks:
            raise ConfigError("encoder_downsamples no puede superar encoder_res_blocks")
        if self.atlas_size // (2 ** self.encoder_downsamples) < 2:
            raise ConfigError(f"atlas_size={self.atlas_size} demasiado pequeño para el encoder")
        cell_size(self.atlas_size)

    @property
    def noise_channels(self) -> int:
        """Canales de la imagen de ruido que recibe G"""
        if self.mode == "noparts":
            return self.num_parts * self.latent_dim
        return self.latent_dim

    def to_dict(self) -> Dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, values: Dict) -> "NetConfig":
        known = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in dict(values).items() if k in known})


def _channels(config: NetConfig, level: int) -> int:
    return min(config.base_channels * (2 ** level), config.max_channels)


class ResnetBlock(nn.Module):
    """Bloque residual 3×3 con reflection padding e instance norm"""

    def __init__(self, dim: int):
        super().__init__()
        self.conv_block = nn.Sequential(
            nn.ReflectionPad2d(1),
            nn.Conv2d(dim, dim, kernel_size=3, bias=False),
            nn.InstanceNorm2d(dim),
            nn.ReLU(True),
            nn.ReflectionPad2d(1),
            nn.Conv2d(dim, dim, kernel_size=3, bias=False),
            nn.InstanceNorm2d(dim),
        )

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return x + self.conv_block(x)


class DownResidualBlock(nn.Module):
    """Bloque residual que reduce la resolución a la mitad (atajo 1×1 con stride)"""

    def __init__(self, in_dim: int, out_dim: int):
        super().__init__()
        self.conv_block = nn.Sequential(
            nn.Conv2d(in_dim, out_dim, kernel_size=3, stride=2, padding=1, bias=False),
            nn.InstanceNorm2d(out_dim),
            nn.ReLU(True),
            nn.Conv2d(out_dim, out_dim, kernel_size=3, padding=1, bias=False),
            nn.InstanceNorm2d(out_dim),
        )
        self.shortcut = nn.Conv2d(in_dim, out_dim, kernel_size=1, stride=2)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return F.relu(self.shortcut(x) + self.conv_block(x))


class AppearanceEncoder(nn.Module):
    """
    E: atlas de textura → (mu, log_var) de forma M×N

    Una convolución, cinco bloques residuales, average pooling y una capa
    totalmente conectada (sin normalización).
    """

    def __init__(self, config: NetConfig):
        super().__init__()
        self.config = config
        ch = config.base_channels
        self.stem = nn.Sequential(
            nn.ReflectionPad2d(3),
            nn.Conv2d(3, ch, kernel_size=7, bias=False),
            nn.InstanceNorm2d(ch),
            nn.ReLU(True),
        )
        blocks = []
        for i in range(config.encoder_res_blocks):
            if i < config.encoder_downsamples:
                out_ch = _channels(config, i + 1)
                blocks.append(DownResidualBlock(ch, out_ch))
                ch = out_ch
            else:
                blocks.append(ResnetBlock(ch))
        self.blocks = nn.Sequential(*blocks)
        self.pool = nn.AdaptiveAvgPool2d(1)
        self.fc = nn.Linear(ch, 2 * config.num_parts * config.latent_dim)

    def forward(self, atlas: torch.Tensor) -> GaussianParams:
        if atlas.dim() != 4 or atlas.shape[1:] != (3, self.config.atlas_size, self.config.atlas_size):
            raise ShapeMismatchError(
                f"atlas {tuple(atlas.shape)}; se esperaba B×3×{self.config.atlas_size}×{self.config.atlas_size}"
            )
        features = self.pool(self.blocks(self.stem(atlas))).flatten(1)
        out = self.fc(features).view(-1, 2, self.config.num_parts, self.config.latent_dim)
        return GaussianParams(mu=out[:, 0], log_var=out[:, 1])


class Generator(nn.Module):
    """
    G: imagen de ruido deformada → imagen RGB en [-1, 1]
    """

    def __init__(self, config: NetConfig):
        super().__init__()
        self.config = config
        ch = config.base_channels
        model = [
            nn.ReflectionPad2d(3),
            nn.Conv2d(config.noise_channels, ch, kernel_size=7, bias=False),
            nn.InstanceNorm2d(ch),
            nn.ReLU(True),
        ]
        for i in range(config.gen_downsamples):
            out_ch = _channels(config, i + 1)
            model += [
                nn.Conv2d(ch, out_ch, kernel_size=3, stride=2, padding=1, bias=False),
                nn.InstanceNorm2d(out_ch),
                nn.ReLU(True),
            ]
            ch = out_ch
        model += [ResnetBlock(ch) for _ in range(config.gen_res_blocks)]
        for i in reversed(range(config.gen_downsamples)):
            out_ch = _channels(config, i)
            model += [
                nn.ConvTranspose2d(ch, out_ch, kernel_size=3, stride=2, padding=1, output_padding=1, bias=False),
                nn.InstanceNorm2d(out_ch),
                nn.ReLU(True),
            ]
            ch = out_ch
        model += [nn.ReflectionPad2d(3), nn.Conv2d(ch, 3, kernel_size=7), nn.Tanh()]
        self.model = nn.Sequential(*model)

    def forward(self, noise: torch.Tensor) -> torch.Tensor:
        if noise.dim() != 4 or noise.shape[1] != self.config.noise_channels:
            raise ShapeMismatchError(
                f"imagen de ruido {tuple(noise.shape)}; se esperaban {self.config.noise_channels} canales"
            )
        return self.model(noise)


class NLayerDiscriminator(nn.Module):
    """PatchGAN que devuelve también las activaciones intermedias"""

    def __init__(self, in_channels: int, config: NetConfig):
        super().__init__()
        ch = config.base_channels
        layers = [nn.Sequential(
            nn.Conv2d(in_channels, ch, kernel_size=4, stride=2, padding=1),
            nn.LeakyReLU(0.2, True),
        )]
        for i in range(1, config.disc_layers):
            out_ch = _channels(config, i)
            layers.append(nn.Sequential(
                nn.Conv2d(ch, out_ch, kernel_size=4, stride=2, padding=1, bias=False),
                nn.InstanceNorm2d(out_ch),
                nn.LeakyReLU(0.2, True),
            ))
            ch = out_ch
        out_ch = _channels(config, config.disc_layers)
        layers.append(nn.Sequential(
            nn.Conv2d(ch, out_ch, kernel_size=3, stride=1, padding=1, bias=False),
            nn.InstanceNorm2d(out_ch),
            nn.LeakyReLU(0.2, True),
        ))
        layers.append(nn.Conv2d(out_ch, 1, kernel_size=3, stride=1, padding=1))
        self.layers = nn.ModuleList(layers)

    def forward(self, x: torch.Tensor) -> Tuple[torch.Tensor, List[torch.Tensor]]:
        features = []
        for layer in self.layers[:-1]:
            x = layer(x)
            features.append(x)
        return self.layers[-1](x), features


class MultiscaleDiscriminator(nn.Module):
    """
    D condicionado en (imagen, imagen de ruido) a varias escalas

    La escala siguiente recibe la entrada promediada por área (avg pool 3×3,
    stride 2, sin contar el padding).
    """

    def __init__(self, config: NetConfig):
        super().__init__()
        self.config = config
        in_channels = 3 + config.noise_channels
        self.scales = nn.ModuleList(
            [NLayerDiscriminator(in_channels, config) for _ in range(config.disc_scales)]
        )
        self.downsample = nn.AvgPool2d(3, stride=2, padding=1, count_include_pad=False)

    def forward(
        self, image: torch.Tensor, noise: torch.Tensor
    ) -> List[Tuple[torch.Tensor, List[torch.Tensor]]]:
        if image.shape[0] != noise.shape[0] or image.shape[-2:] != noise.shape[-2:]:
            raise ShapeMismatchError(
                f"imagen {tuple(image.shape)} y ruido {tuple(noise.shape)} no están alineados"
            )
        if noise.shape[1] != self.config.noise_channels:
            raise ShapeMismatchError(f"ruido con {noise.shape[1]} canales")
        x = torch.cat([image, noise], dim=1)
        outputs = []
        for i, scale in enumerate(self.scales):
            outputs.append(scale(x))
            if i != len(self.scales) - 1:
                x = self.downsample(x)
        return outputs


def build_networks(config: NetConfig) -> Tuple[AppearanceEncoder, Generator, MultiscaleDiscriminator]:
    """
    Construye E, G y D con inicialización normal(0, 0.02) en las convoluciones

    La semilla global de torch debe fijarse antes para que sea reproducible.
    """
    encoder, generator, discriminator = (
        AppearanceEncoder(config),
        Generator(config),
        MultiscaleDiscriminator(config),
    )
    for net in (encoder, generator, discriminator):
        net.apply(_weights_init)
    return encoder, generator, discriminator


def _weights_init(module: nn.Module) -> None:
    if isinstance(module, (nn.Conv2d, nn.ConvTranspose2d)):
        nn.init.normal_(module.weight, 0.0, 0.02)
        if module.bias is not None:
            nn.init.zeros_(module.bias)
