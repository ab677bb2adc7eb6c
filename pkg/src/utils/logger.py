"""
Configuración de logging compatible con barras de progreso tqdm
"""

import logging

from tqdm import tqdm

LOG_FORMAT = "%(asctime)s %(levelname)-7s %(name)s | %(message)s"


class TqdmHandler(logging.Handler):
    """Handler que escribe a través de tqdm para no romper las barras"""

    def emit(self, record: logging.LogRecord) -> None:
        try:
            tqdm.write(self.format(record))
        except Exception:
            self.handleError(record)


def setup_logging(level: str = "INFO") -> logging.Logger:
    """
    Configura el logger raíz del paquete (idempotente)

    Args:
        level: Nivel de logging ('DEBUG', 'INFO', 'WARNING', ...)

    Returns:
        Logger raíz del paquete ``src``
    """
    root = logging.getLogger("src")
    root.setLevel(level.upper())
    if not any(isinstance(h, TqdmHandler) for h in root.handlers):
        handler = TqdmHandler()
        handler.setFormatter(logging.Formatter(LOG_FORMAT, datefmt="%H:%M:%S"))
        root.addHandler(handler)
    return root
