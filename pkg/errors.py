"""
errors.py - exception types shared by the simulator, scenario, ensemble and SDG layers.

Input problems derive from InputError (CLI exit code 2); numeric/runtime problems derive from
SimulationError (CLI exit code 3).
"""

from __future__ import annotations

from typing import Any, Mapping, Optional


EXIT_OK = 0
EXIT_INPUT = 2
EXIT_RUNTIME = 3


class InputError(ValueError):
    exit_code = EXIT_INPUT


class SimulationError(RuntimeError):
    exit_code = EXIT_RUNTIME


# ---------- model definition / compilation ----------
class DuplicateName(InputError):
    pass


class UnknownReference(InputError):
    pass


class AlgebraicLoop(InputError):
    pass


class InvalidTable(InputError):
    pass


class InvalidExpression(InputError):
    pass


class InvalidGrid(InputError):
    pass


class DomainError(InputError):
    pass


# ---------- world model assembly ----------
class MissingParameter(InputError):
    pass


class MissingOutput(InputError):
    pass


# ---------- files / pathways ----------
class ParseError(InputError):
    def __init__(self, message: str, path: Any = None, line: Optional[int] = None) -> None:
        location = ""
        if path is not None:
            location = f"{path}"
            if line is not None:
                location += f":{line}"
            location += ": "
        super().__init__(f"{location}{message}")
        self.message = message
        self.path = path
        self.line = line

    def __reduce__(self):
        return type(self), (self.message, self.path, self.line)


class UnknownParameter(InputError):
    pass


class OutOfRange(InputError):
    pass


class BadLabel(InputError):
    pass


class SchemaMismatch(InputError):
    pass


# ---------- SDG scoring ----------
class DegenerateTarget(InputError):
    pass


class NonMonotoneAmbition(InputError):
    pass


class MissingVariable(InputError):
    pass


class MissingMilestone(InputError):
    pass


class EmptyGoal(InputError):
    pass


# ---------- runtime ----------
class NonFiniteValue(SimulationError):
    def __init__(self, variable: str, year: float, column: Optional[int] = None) -> None:
        where = f" (batch column {column})" if column is not None else ""
        super().__init__(f"Non-finite value in '{variable}' at year {year:g}{where}.")
        self.variable = variable
        self.year = year
        self.column = column

    def __reduce__(self):
        return type(self), (self.variable, self.year, self.column)


class NegativePopulation(SimulationError):
    pass


class NegativeReservoir(SimulationError):
    pass


class ZeroReference(SimulationError):
    pass


class ObjectiveFailure(SimulationError):
    def __init__(self, message: str, point: Any = None) -> None:
        super().__init__(message)
        self.point = point

    def __reduce__(self):
        return type(self), (self.args[0], self.point)


class RealizationFailure(SimulationError):
    def __init__(self, index: int, parameters: Mapping[str, float], cause: Exception) -> None:
        shown = ", ".join(f"{name}={value:.6g}" for name, value in parameters.items())
        super().__init__(f"Realization {index} failed: {cause} [{shown}]")
        self.index = index
        self.parameters = dict(parameters)
        self.cause = cause

    def __reduce__(self):
        # joblib workers send failures back pickled
        return type(self), (self.index, self.parameters, self.cause)


def exit_code_for(exc: BaseException) -> int:
    code = getattr(exc, "exit_code", None)
    if isinstance(code, int):
        return code
    if isinstance(exc, (ValueError, FileNotFoundError)):
        return EXIT_INPUT
    return EXIT_RUNTIME
