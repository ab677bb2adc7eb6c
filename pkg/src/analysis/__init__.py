"""
Métricas y protocolos de evaluación
"""

from .evaluator import ModelEvaluator, eval_report

__all__ = ['ModelEvaluator', 'eval_report']
