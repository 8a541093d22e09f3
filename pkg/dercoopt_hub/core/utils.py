import math
from typing import Iterable
from dercoopt_hub.core.exceptions import DomainError


def positive_part(x: float) -> float:
    """[x]+ = max(x, 0)"""
    return x if x > 0.0 else 0.0


def negative_part(x: float) -> float:
    """[x]- = max(-x, 0), so that x = [x]+ - [x]-"""
    return -x if x < 0.0 else 0.0


def clamp(x: float, lower: float, upper: float) -> float:
    """Clamp x into [lower, upper]; lower wins when the box is empty"""
    return max(lower, min(x, upper))


def require_finite(value: float, name: str) -> float:
    """Return value as float or raise DomainError for NaN/inf"""
    value = float(value)
    if not math.isfinite(value):
        raise DomainError(f"{name} must be finite, got {value}")
    return value


def exact_sum(values: Iterable[float]) -> float:
    """Correctly rounded sum (math.fsum)"""
    return math.fsum(values)
