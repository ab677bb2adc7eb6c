"""
Redes, álgebra latente, pérdidas y checkpoints
"""

from .checkpoint import ModelBundle, load_checkpoint, save_checkpoint
from .networks import NetConfig

__all__ = [
    'ModelBundle',
    'NetConfig',
    'load_checkpoint',
    'save_checkpoint',
]
