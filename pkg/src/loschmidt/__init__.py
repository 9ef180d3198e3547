"""Fidelity decay of the perturbed kicked rotor: exact, semiclassical, analytic."""

__version__ = "0.1.0"

from loschmidt.params import FidelityCurve, MapParams, StateSpec  # noqa: E402

__all__ = ["FidelityCurve", "MapParams", "StateSpec", "__version__"]
