"""
Excepciones del motor visuo-motor.

Cada clase se traduce a un código de salida en la CLI:
0 éxito, 2 uso/configuración, 3 divergencia numérica, 4 error de E/S.
"""

from typing import Optional


class VisuoMotorError(Exception):
    """Error base del proyecto"""

    exit_code = 1


class ConfigurationError(VisuoMotorError, ValueError):
    """Formas, presets o argumentos inconsistentes"""

    exit_code = 2


class MissingExternalInput(ConfigurationError):
    """Generación open-loop sin la modalidad que debe entrar desde afuera"""


class NumericalFault(VisuoMotorError, ArithmeticError):
    """Estado, gradiente o pérdida no finitos"""

    exit_code = 3

    def __init__(self, message: str, *, name: Optional[str] = None,
                 step: Optional[int] = None, sequence: Optional[int] = None):
        self.name = name
        self.step = step
        self.sequence = sequence
        details = []
        if name is not None:
            details.append(f"tensor/capa={name}")
        if step is not None:
            details.append(f"paso={step}")
        if sequence is not None:
            details.append(f"secuencia={sequence}")
        if details:
            message = f"{message} ({', '.join(details)})"
        super().__init__(message)


class TrainingDiverged(NumericalFault):
    """Pérdida no finita durante el entrenamiento"""

    def __init__(self, message: str, *, epoch: int, last_good_checkpoint: Optional[str] = None):
        self.epoch = epoch
        self.last_good_checkpoint = last_good_checkpoint
        super().__init__(f"{message}; último checkpoint válido: {last_good_checkpoint}", step=epoch)


class FileFormatError(VisuoMotorError, IOError):
    """Archivo binario corrupto, truncado o de otra versión"""

    exit_code = 4
