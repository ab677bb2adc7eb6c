"""
Fixtures compartidas de la suite
"""

import numpy as np
import pytest
import torch

from src.data.densepose_atlas import DenseBodyMap
from src.data.synthetic import SyntheticSpec, make_synthetic_dataset
from src.models.checkpoint import ModelBundle
from src.models.networks import NetConfig


@pytest.fixture
def tiny_config() -> NetConfig:
    return NetConfig(
        image_size=32,
        atlas_size=32,
        num_parts=6,
        latent_dim=2,
        base_channels=4,
        max_channels=16,
        disc_layers=2,
    )


@pytest.fixture
def tiny_bundle(tiny_config) -> ModelBundle:
    return ModelBundle.initialize(tiny_config, seed=0).eval()


@pytest.fixture(scope="session")
def tiny_dataset(tmp_path_factory):
    """3 identidades × 2 poses, 32×32, 6 partes"""
    spec = SyntheticSpec(
        num_identities=3, poses_per_identity=2, test_identities=1,
        image_size=32, num_parts=6, atlas_size=32,
    )
    return make_synthetic_dataset(tmp_path_factory.mktemp("synthetic"), spec, rng=0)


@pytest.fixture
def toy_map() -> DenseBodyMap:
    """Mapa 4×4: mitad izquierda parte 1, columna 2 parte 2, columna 3 fondo"""
    part_index = np.array([
        [1, 1, 2, 0],
        [1, 1, 2, 0],
        [1, 1, 2, 0],
        [1, 1, 2, 0],
    ])
    u = np.where(part_index > 0, 0.5, 0.0)
    v = np.where(part_index > 0, 0.25, 0.0)
    return DenseBodyMap(part_index=part_index, u=u, v=v, num_parts=2)


@pytest.fixture
def seeded() -> torch.Generator:
    return torch.Generator().manual_seed(0)
