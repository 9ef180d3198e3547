"""Shared parameter and result containers."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal, Optional

import numpy as np

PathLabel = Literal["exact", "ivr", "pt", "fgr", "lyap"]
PATH_LABELS: tuple[str, ...] = ("exact", "ivr", "pt", "fgr", "lyap")


@dataclass(frozen=True)
class MapParams:
    """Physical identity of an experiment.

    ``k`` is the stochasticity, ``epsilon`` the perturbation k -> k + eps,
    ``n`` the Hilbert-space dimension. hbar = 1/(2 pi n) and the
    Heisenberg time is n steps.
    """

    k: float
    epsilon: float
    n: int

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 2:
            raise ValueError(f"n must be an integer >= 2, got {self.n}")
        if self.epsilon < 0:
            raise ValueError(f"epsilon must be >= 0, got {self.epsilon}")
        if self.k < 0:
            raise ValueError(f"k must be >= 0, got {self.k}")
        object.__setattr__(self, "n", int(self.n))

    @property
    def hbar(self) -> float:
        return 1.0 / (2.0 * math.pi * self.n)

    @property
    def t_heisenberg(self) -> float:
        return float(self.n)

    def with_epsilon(self, epsilon: float) -> MapParams:
        return MapParams(self.k, epsilon, self.n)


@dataclass(frozen=True)
class StateSpec:
    """Initial state: a position eigenstate at ``q0`` or a Gaussian packet."""

    kind: Literal["position", "gaussian"] = "position"
    q0: float = 0.5
    p0: float = 0.0
    sigma: Optional[float] = None

    def __post_init__(self):
        if self.kind not in ("position", "gaussian"):
            raise ValueError(f"unknown state kind {self.kind!r}")
        if self.kind == "gaussian" and (self.sigma is None or self.sigma <= 0):
            raise ValueError("gaussian state needs sigma > 0")

    @classmethod
    def position(cls, q0: float = 0.5) -> StateSpec:
        return cls("position", q0)

    @classmethod
    def gaussian(cls, q0: float, p0: float, sigma: float) -> StateSpec:
        return cls("gaussian", q0, p0, sigma)


@dataclass
class FidelityCurve:
    t: np.ndarray
    M: np.ndarray
    path_label: str
    stderr: Optional[np.ndarray] = None

    def __post_init__(self):
        self.t = np.asarray(self.t)
        self.M = np.asarray(self.M, dtype=float)
        if self.path_label not in PATH_LABELS:
            raise ValueError(f"unknown path label {self.path_label!r}")
        if self.t.shape != self.M.shape:
            raise ValueError("t and M must have equal length")
        if self.stderr is not None:
            self.stderr = np.asarray(self.stderr, dtype=float)
            if self.stderr.shape != self.M.shape:
                raise ValueError("stderr must match M")
        if np.any(self.M < 0):
            raise ValueError("fidelity must be non-negative")

    def __len__(self) -> int:
        return len(self.t)
