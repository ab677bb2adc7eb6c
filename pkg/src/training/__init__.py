"""
Entrenamiento
"""

from .trainer import TrainConfig, fit, train_step

__all__ = ['TrainConfig', 'fit', 'train_step']
