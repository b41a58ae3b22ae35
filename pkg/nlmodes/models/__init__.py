"""
Shipped dynamical systems and the model registry.

Models are looked up by name from the ``[model]`` config section; library
users can add their own with ``register_model``.
"""

import dataclasses
from typing import Any, Callable, Dict, List, Mapping, Optional

import numpy as np

from ..core.base import DynamicalSystem
from ..core.errors import UnsupportedConfigurationError
from .linear import LinearizedSystem, linearized_model
from .pendulum import Pendulum, PendulumParams
from .planar import PlanarPopulation, PlanarPopulationParams
from .power import (
    PowerSystem,
    PowerSystemParams,
    build_phase_difference_model,
    ieee9bus_params,
)

ModelFactory = Callable[[Mapping[str, Any]], DynamicalSystem]


def _params_from_mapping(cls, name: str, params: Mapping[str, Any]):
    known = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(params) - known)
    if unknown:
        raise UnsupportedConfigurationError(
            f"Unknown parameter(s) for model '{name}': {', '.join(unknown)}; "
            f"expected a subset of {', '.join(sorted(known))}"
        )
    values = dict(params)
    if cls is PowerSystemParams and "admittance" in values:
        values["admittance"] = _complex_matrix(values["admittance"])
    return cls(**values)


def _complex_matrix(value) -> np.ndarray:
    """Accept a complex array or a {real, imag} table of nested lists."""
    if isinstance(value, Mapping):
        return np.asarray(value["real"], dtype=float) + 1j * np.asarray(value["imag"], dtype=float)
    return np.asarray(value, dtype=complex)


def _pendulum(params: Mapping[str, Any]) -> DynamicalSystem:
    return Pendulum(_params_from_mapping(PendulumParams, "pendulum", params))


def _planar10(params: Mapping[str, Any]) -> DynamicalSystem:
    return PlanarPopulation(_params_from_mapping(PlanarPopulationParams, "planar10", params))


def _ieee9bus(params: Mapping[str, Any]) -> DynamicalSystem:
    return build_phase_difference_model(_params_from_mapping(PowerSystemParams, "ieee9bus", params))


MODEL_REGISTRY: Dict[str, ModelFactory] = {
    "pendulum": _pendulum,
    "planar10": _planar10,
    "ieee9bus": _ieee9bus,
}


def register_model(name: str, factory: ModelFactory, replace: bool = False) -> None:
    """
    Register a model factory under ``name``.

    The factory receives the ``[model.params]`` mapping and returns a
    ``DynamicalSystem``.
    """
    if name in MODEL_REGISTRY and not replace:
        raise UnsupportedConfigurationError(f"Model '{name}' is already registered")
    MODEL_REGISTRY[name] = factory


def available_models() -> List[str]:
    return sorted(MODEL_REGISTRY)


def build_model(name: str, params: Optional[Mapping[str, Any]] = None) -> DynamicalSystem:
    """Instantiate a registered model."""
    factory = MODEL_REGISTRY.get(name)
    if factory is None:
        raise UnsupportedConfigurationError(
            f"Unknown model '{name}'; available: {', '.join(available_models())}"
        )
    return factory(dict(params or {}))


__all__ = [
    "DynamicalSystem",
    "Pendulum",
    "PendulumParams",
    "PlanarPopulation",
    "PlanarPopulationParams",
    "PowerSystem",
    "PowerSystemParams",
    "build_phase_difference_model",
    "ieee9bus_params",
    "LinearizedSystem",
    "linearized_model",
    "MODEL_REGISTRY",
    "register_model",
    "available_models",
    "build_model",
]
