"""
Utilidades del proyecto
"""

from .config import APP_SETTINGS, load_config, resolve_part_group
from .errors import PartGenError
from .logger import setup_logging

__all__ = [
    'APP_SETTINGS',
    'load_config',
    'resolve_part_group',
    'PartGenError',
    'setup_logging',
]
