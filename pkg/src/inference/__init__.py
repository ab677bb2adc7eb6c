"""
Modos de inferencia y emisión de rejillas
"""
