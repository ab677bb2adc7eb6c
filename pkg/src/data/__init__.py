"""
Módulo de manejo de datos
"""

from .dataset_index import DatasetIndex, TrainSample, load_index, sample_pair
from .densepose_atlas import DenseBodyMap, TextureAtlas, decode_iuv, extract_texture, render_texture
from .synthetic import SyntheticSpec, make_synthetic_dataset

__all__ = [
    'DatasetIndex',
    'TrainSample',
    'load_index',
    'sample_pair',
    'DenseBodyMap',
    'TextureAtlas',
    'decode_iuv',
    'extract_texture',
    'render_texture',
    'SyntheticSpec',
    'make_synthetic_dataset',
]
