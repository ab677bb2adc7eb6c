"""
Módulo principal del proyecto Part-Latent Human Generator
"""
