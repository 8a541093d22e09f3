"""
Custom exceptions for DER co-optimization hub
"""

from typing import Any, Dict, Optional


def _rebuild(cls, message: str, state: Dict[str, Any]):
    error = cls.__new__(cls)
    Exception.__init__(error, message)
    error.__dict__.update(state)
    return error


class DerCooptError(Exception):
    """Base exception for DER co-optimization hub"""

    def __reduce__(self):
        # subclasses take structured arguments; rebuild from the final message
        return _rebuild, (self.__class__, str(self), dict(self.__dict__))


class DomainError(DerCooptError):
    """Input outside the domain of an operation"""

    def __init__(self, message: str):
        super().__init__(f"Недопустимые входные данные: {message}")


class AssumptionViolationError(DomainError):
    """Sandwiched salvage value condition does not hold"""

    def __init__(self, case: str, detail: str = ""):
        self.case = case
        message = f"условие A1 нарушено (случай {case})"
        if detail:
            message += f": {detail}"
        super().__init__(message + "; используйте decide_relaxed_a1")


class StateError(DerCooptError):
    """Battery state left its admissible range"""

    def __init__(self, soc: float, lower: float, upper: float):
        self.soc = soc
        self.lower = lower
        self.upper = upper
        super().__init__(
            f"Состояние заряда {soc:.12g} кВт·ч вне допустимого диапазона [{lower}, {upper}]"
        )


class ConfigError(DerCooptError):
    """Scenario configuration is missing or invalid"""

    def __init__(self, message: str):
        super().__init__(f"Ошибка конфигурации: {message}")


class ResourceGuardError(DerCooptError):
    """Requested computation exceeds the configured size cap"""

    def __init__(self, size: int, cap: int, hint: str):
        self.size = size
        self.cap = cap
        self.hint = hint
        super().__init__(f"Размер задачи {size} превышает лимит {cap}. {hint}")


class NumericError(DerCooptError):
    """Numerical routine failed to converge"""

    def __init__(self, message: str, diagnostics: Optional[Dict[str, Any]] = None):
        self.diagnostics = diagnostics or {}
        details = ", ".join(f"{k}={v}" for k, v in self.diagnostics.items())
        super().__init__(f"Численная ошибка: {message}" + (f" ({details})" if details else ""))


class UndefinedGapError(NumericError):
    """Gap is undefined for a zero bound"""

    def __init__(self, path_id: Optional[int] = None):
        self.path_id = path_id
        where = f" на траектории {path_id}" if path_id is not None else ""
        super().__init__(f"разрыв не определён: верхняя граница равна нулю{where}")
