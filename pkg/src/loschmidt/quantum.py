"""Quantized standard map on an n-dimensional torus Hilbert space.

Positions q_j = j/n, momenta p_m = m/n with the integer grid in FFT order
(m in -n/2 .. n/2 - 1; the Nyquist index carries the negative value).
Both Bloch phases are zero. One Floquet period mirrors the classical
step: free drift exp(-i p^2 / 2 hbar) in momentum space, then the kick
exp(-i V(q) / hbar) with V(q) = -k/(4 pi^2) cos(2 pi q) in position space.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from loschmidt.params import FidelityCurve, MapParams, StateSpec

log = logging.getLogger(__name__)

TWO_PI = 2.0 * math.pi
NORM_TOL = 1e-10


@dataclass(frozen=True)
class QuantumState:
    amplitudes: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.amplitudes, dtype=complex)
        if a.ndim != 1 or a.size == 0:
            raise ValueError("amplitudes must be a non-empty 1-d array")
        object.__setattr__(self, "amplitudes", a)

    @property
    def n(self) -> int:
        return self.amplitudes.size

    def norm(self) -> float:
        return float(np.sqrt(np.vdot(self.amplitudes, self.amplitudes).real))

    def overlap(self, other: QuantumState) -> complex:
        """<self|other>."""
        return complex(np.vdot(self.amplitudes, other.amplitudes))


@dataclass(frozen=True)
class QuantizedMap:
    n: int
    k: float
    kick_phases: np.ndarray = field(repr=False)
    kinetic_phases: np.ndarray = field(repr=False)

    @property
    def hbar(self) -> float:
        return 1.0 / (TWO_PI * self.n)

    @classmethod
    def build(cls, n: int, k: float) -> QuantizedMap:
        if n < 1:
            raise ValueError(f"n must be positive, got {n}")
        q = np.arange(n) / n
        m = np.fft.fftfreq(n, d=1.0 / n)
        # V/hbar = -(k/4pi^2) cos(2 pi q) * 2 pi n
        kick = np.exp(1j * (n * k / TWO_PI) * np.cos(TWO_PI * q))
        # p^2/(2 hbar) = (m/n)^2 pi n
        kinetic = np.exp(-1j * np.pi * (m * m) / n)
        return cls(n, k, kick, kinetic)


def make_position_state(n: int, q0: float) -> QuantumState:
    if n <= 0:
        raise ValueError(f"n must be positive, got {n}")
    j = int(round(q0 * n)) % n
    if not math.isclose(q0 * n, round(q0 * n), abs_tol=1e-9):
        log.info("q0=%g is off the grid for n=%d; snapped to q=%g", q0, n, j / n)
    a = np.zeros(n, dtype=complex)
    a[j] = 1.0
    return QuantumState(a)


def make_gaussian_state(n: int, q0: float, p0: float, sigma: float) -> QuantumState:
    """Torus-periodized Gaussian packet centred at (q0, p0) with width sigma."""
    if n <= 0:
        raise ValueError(f"n must be positive, got {n}")
    if sigma * n < 3.0:
        raise ValueError(f"sigma={sigma} violates 1/n << sigma (need sigma >= 3/n = {3.0 / n:.3g})")
    if sigma > 0.2:
        raise ValueError(f"sigma={sigma} violates sigma << 1 (need sigma <= 0.2)")
    hbar = 1.0 / (TWO_PI * n)
    x = np.arange(n) / n - q0
    # images beyond W contribute below exp(-(W - 1)^2 / 2 sigma^2) < 1e-14
    W = int(math.ceil(1.0 + sigma * math.sqrt(2.0 * math.log(1e14)))) + 1
    a = np.zeros(n, dtype=complex)
    for w in range(-W, W + 1):
        y = x + w
        a += np.exp(1j * p0 * y / hbar - y * y / (2.0 * sigma * sigma))
    a /= np.linalg.norm(a)
    return QuantumState(a)


def make_state(n: int, spec: StateSpec) -> QuantumState:
    if spec.kind == "position":
        return make_position_state(n, spec.q0)
    return make_gaussian_state(n, spec.q0, spec.p0, spec.sigma)


def _apply(a: np.ndarray, qmap: QuantizedMap) -> np.ndarray:
    return qmap.kick_phases * np.fft.ifft(qmap.kinetic_phases * np.fft.fft(a))


def floquet_step(psi: QuantumState, qmap: QuantizedMap) -> QuantumState:
    if psi.n != qmap.n:
        raise ValueError(f"state has dimension {psi.n}, map has {qmap.n}")
    return QuantumState(_apply(psi.amplitudes, qmap))


def dense_floquet_matrix(n: int, k: float) -> np.ndarray:
    """Explicit n x n Floquet unitary, built by direct summation (no FFT).

    U[j, l] = exp(i n k cos(2 pi j/n) / 2pi) / n
              * sum_m exp(2 pi i m (j - l)/n - i pi m^2/n)
    Only meant for small n, as an oracle.
    """
    j = np.arange(n)
    m = np.fft.fftfreq(n, d=1.0 / n)
    diff = j[:, None] - j[None, :]
    free = np.zeros((n, n), dtype=complex)
    for mm in m:
        free += np.exp(2j * np.pi * mm * diff / n - 1j * np.pi * mm * mm / n)
    free /= n
    kick = np.exp(1j * (n * k / TWO_PI) * np.cos(TWO_PI * j / n))
    return kick[:, None] * free


def fidelity_exact(
    params: MapParams,
    state: StateSpec | QuantumState,
    t_max: int,
) -> FidelityCurve:
    """|<psi_V(t)|psi_0(t)>|^2 for t = 0..t_max by two independent propagations."""
    if t_max < 1:
        raise ValueError(f"t_max must be >= 1, got {t_max}")
    psi = state if isinstance(state, QuantumState) else make_state(params.n, state)
    if psi.n != params.n:
        raise ValueError(f"state has dimension {psi.n}, params.n is {params.n}")
    if abs(psi.norm() - 1.0) > NORM_TOL:
        raise ValueError(f"initial state is not normalized (norm={psi.norm():.15g})")
    u0 = QuantizedMap.build(params.n, params.k)
    uv = QuantizedMap.build(params.n, params.k + params.epsilon)
    a = psi.amplitudes.copy()
    b = psi.amplitudes.copy()
    M = np.empty(t_max + 1)
    M[0] = 1.0
    for t in range(1, t_max + 1):
        a = _apply(a, u0)
        b = _apply(b, uv)
        M[t] = abs(np.vdot(b, a)) ** 2
    return FidelityCurve(np.arange(t_max + 1), M, "exact")


def momentum_distribution(psi: QuantumState) -> tuple[np.ndarray, np.ndarray]:
    """(p_m in [0, 1), |psi(p_m)|^2) on the momentum grid."""
    n = psi.n
    amp = np.fft.fft(psi.amplitudes) / math.sqrt(n)
    return np.arange(n) / n, np.abs(amp) ** 2
