"""
Jerarquía de excepciones del proyecto

El nombre de cada clase es el identificador que la CLI imprime en la línea
de error (``error=<Clase>``), así que no se debe renombrar a la ligera.
"""


class PartGenError(Exception):
    """Error base de todo el paquete"""


class InvalidBodyMapError(PartGenError, ValueError):
    """Mapa IUV corrupto o fuera de rango"""


class InvalidPartError(PartGenError, ValueError):
    """Índice de parte fuera de {1..M}"""


class ShapeMismatchError(PartGenError, ValueError):
    """Dimensiones incompatibles entre entradas"""


class ConfigError(PartGenError, ValueError):
    """Configuración inválida"""


class UnknownPartGroupError(ConfigError):
    """Nombre de grupo lógico de partes desconocido"""


class CheckpointError(PartGenError):
    """Checkpoint ausente o ilegible"""


class CheckpointMismatchError(CheckpointError):
    """La configuración del checkpoint no coincide con la pedida"""


class DatasetError(PartGenError):
    """Dataset vacío o con estructura inválida"""


class InsufficientSamplesError(PartGenError, ValueError):
    """Conjunto demasiado pequeño para la métrica pedida"""


class NonFiniteLossError(PartGenError, ArithmeticError):
    """Una pérdida del paso de entrenamiento no es finita"""

    def __init__(self, term: str, value: float, step: int):
        self.term = term
        self.value = value
        self.step = step
        super().__init__(f"término '{term}' = {value} en el paso {step}")
