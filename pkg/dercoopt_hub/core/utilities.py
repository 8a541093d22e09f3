from abc import ABC, abstractmethod
from typing import Any, Dict, Type
from dercoopt_hub.core.exceptions import DomainError
from dercoopt_hub.core.utils import require_finite


class UtilityModel(ABC):
    """Concave, non-decreasing, differentiable consumption utility U(d)"""

    kind: str = ""

    @abstractmethod
    def value(self, d: float) -> float:
        """U(d)"""

    @abstractmethod
    def marginal(self, d: float) -> float:
        """L(d) = U'(d), non-increasing"""

    @abstractmethod
    def inverse_marginal(self, price: float) -> float:
        """Unclamped L^-1(price); callers clamp into [0, cap]"""

    @property
    @abstractmethod
    def saturation(self) -> float:
        """Consumption level beyond which U is flat"""

    @abstractmethod
    def cvx_expression(self, d):
        """Concave cvxpy expression equal to U on [0, saturation]"""

    @abstractmethod
    def to_dict(self) -> Dict[str, Any]:
        """Serializable parameters including "kind" """

    def __repr__(self) -> str:
        params = ", ".join(f"{k}={v}" for k, v in self.to_dict().items() if k != "kind")
        return f"{self.__class__.__name__}({params})"


class QuadraticUtility(UtilityModel):
    """U(d) = alpha d - beta d^2 / 2 up to alpha/beta, flat at alpha^2/(2 beta) beyond"""

    kind = "quadratic"

    def __init__(self, alpha: float, beta: float):
        self._alpha = self._validate_positive(alpha, "alpha")
        self._beta = self._validate_positive(beta, "beta")

    @staticmethod
    def _validate_positive(value: float, name: str) -> float:
        value = require_finite(value, name)
        if value <= 0:
            raise DomainError(f"{name} must be positive, got {value}")
        return value

    @property
    def alpha(self) -> float:
        return self._alpha

    @property
    def beta(self) -> float:
        return self._beta

    @property
    def saturation(self) -> float:
        return self._alpha / self._beta

    def value(self, d: float) -> float:
        if d >= self.saturation:
            return self._alpha ** 2 / (2.0 * self._beta)
        return self._alpha * d - 0.5 * self._beta * d * d

    def marginal(self, d: float) -> float:
        return max(self._alpha - self._beta * d, 0.0)

    def inverse_marginal(self, price: float) -> float:
        return (self._alpha - price) / self._beta

    def cvx_expression(self, d):
        import cvxpy as cp

        return self._alpha * d - 0.5 * self._beta * cp.square(d)

    def to_dict(self) -> Dict[str, Any]:
        return {"kind": self.kind, "alpha": self._alpha, "beta": self._beta}


# Utility model registry
_model_registry: Dict[str, Type[UtilityModel]] = {}


def register_utility_model(model_cls: Type[UtilityModel]):
    """Register a utility model class under its kind"""
    _model_registry[model_cls.kind] = model_cls


def get_utility_model(kind: str) -> Type[UtilityModel]:
    """Get utility model class by kind"""
    if kind not in _model_registry:
        raise DomainError(f"unknown utility model '{kind}'")
    return _model_registry[kind]


def build_utility_model(data: Dict[str, Any]) -> UtilityModel:
    """Instantiate a registered model from its serialized parameters"""
    params = dict(data)
    model_cls = get_utility_model(params.pop("kind", "quadratic"))
    try:
        return model_cls(**params)
    except TypeError as e:
        raise DomainError(f"bad parameters for {model_cls.kind} utility: {e}")


register_utility_model(QuadraticUtility)
