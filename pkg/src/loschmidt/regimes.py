"""Closed-form fidelity decay laws and regime boundaries.

Perturbative (Gaussian), golden-rule (exponential in 2K/hbar^2), and
Lyapunov (exponential in lambda) decays, the crossover strengths that
separate them, and the finite-Hilbert-space saturation level.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

TWO_PI = 2.0 * math.pi

_SERIES_MAX_X = 8.0


def bessel_j2(x: float) -> float:
    """J_2(x) for x >= 0, absolute error below 1e-10.

    Ascending series for x < 8, where the largest term stays below ~1e2.
    Beyond that, Miller's backward recurrence normalized with
    J_0 + 2 sum_k J_2k = 1.
    """
    if x < 0:
        raise ValueError(f"x must be >= 0, got {x}")
    if x == 0.0:
        return 0.0
    if x < _SERIES_MAX_X:
        h2 = 0.25 * x * x
        term = h2 / 2.0  # k = 0: (x/2)^2 / (0! 2!)
        total = term
        k = 0
        while abs(term) > 1e-17 * max(1.0, abs(total)):
            k += 1
            term *= -h2 / (k * (k + 2))
            total += term
        return total

    start = 2 * ((int(x) + 20 + int(10 * math.sqrt(x))) // 2)
    j_next = 0.0
    j_cur = 1e-30
    norm = 0.0
    j2 = 0.0
    for m in range(start, 0, -1):
        j_prev = (2.0 * m / x) * j_cur - j_next
        j_next, j_cur = j_cur, j_prev
        # j_cur now holds J_{m-1}
        if m - 1 == 2:
            j2 = j_cur
        if (m - 1) % 2 == 0 and m - 1 > 0:
            norm += 2.0 * j_cur
        if abs(j_cur) > 1e250:
            j_cur *= 1e-250
            j_next *= 1e-250
            norm *= 1e-250
            j2 *= 1e-250
    norm += j_cur  # J_0
    return j2 / norm


def ergodic_floor(n: int) -> float:
    """Saturation level 1/n of fidelity in an n-dimensional Hilbert space."""
    if n < 2:
        raise ValueError(f"n must be >= 2, got {n}")
    return 1.0 / n


def crossover_strengths(k: float, n: int, lam: float) -> tuple[float, float]:
    """Perturbation strengths of the PT->FGR and FGR->Lyapunov crossovers."""
    if n < 2:
        raise ValueError(f"n must be >= 2, got {n}")
    if lam <= 0:
        raise ValueError(f"Lyapunov exponent must be > 0, got {lam}")
    g = 1.0 + 2.0 * bessel_j2(k)
    if g <= 0:
        raise ValueError(f"1 + 2 J2(k) = {g:.4g} <= 0 at k={k}; crossover formula not valid")
    eps_pt_fgr = math.sqrt(32.0 * math.pi**2 / n**3 / g)
    eps_fgr_l = math.sqrt(8.0 * math.pi**2 * lam / n**2 / g)
    return eps_pt_fgr, eps_fgr_l


def golden_rule_width(K: float, hbar: float) -> float:
    """Gamma = 2K/hbar."""
    return 2.0 * K / hbar


def pt_matrix_element_variance(
    K: float,
    n: int,
    time_reversal: bool = True,
    parity: bool = True,
) -> float:
    """Default mean-square diagonal perturbation element for the Gaussian law.

    Semiclassical estimate (2/beta) * 2K / t_eff, with beta = 1 for a
    time-reversal-invariant map and t_eff the Heisenberg time of the
    symmetry sector the initial state lives in (n/2 when the state is
    parity-symmetric, as the position eigenstate at q0 = 1/2 is).
    """
    beta = 1.0 if time_reversal else 2.0
    t_eff = n / 2.0 if parity else float(n)
    return (2.0 / beta) * 2.0 * K / t_eff


def m_pt(t, v2: float, hbar: float):
    """Gaussian perturbative decay exp(-v2 t^2 / hbar^2)."""
    t = np.asarray(t, dtype=float)
    return np.exp(-v2 * t * t / hbar**2)


def m_fgr(t, gamma: float, hbar: float):
    """Golden-rule decay exp(-Gamma t / hbar)."""
    t = np.asarray(t, dtype=float)
    return np.exp(-gamma * t / hbar)


def m_lyapunov(t, lam: float, D: Optional[float] = None, sigma: Optional[float] = None):
    """Lyapunov decay.

    With ``sigma`` and ``D``: (1 + exp(2 lam t) D / (2 lam sigma^2))^(-1/2).
    Otherwise the bare asymptote exp(-lam t).
    """
    t = np.asarray(t, dtype=float)
    if sigma is None or D is None:
        return np.exp(-lam * t)
    if sigma <= 0:
        raise ValueError(f"sigma must be > 0, got {sigma}")
    if lam <= 0:
        raise ValueError(f"prefactor form needs lam > 0, got {lam}")
    if D == 0:
        return np.ones_like(t)
    # log space keeps exp(2 lam t) from overflowing at long times
    x = 2.0 * lam * t + math.log(D / (2.0 * lam * sigma**2))
    return np.exp(-0.5 * np.logaddexp(0.0, x))


def lyapunov_asymptote(t, lam: float, D: float, sigma: float):
    """(2 lam sigma^2 / D)^(1/2) exp(-lam t), the lam t >> 1 limit of ``m_lyapunov``."""
    t = np.asarray(t, dtype=float)
    return math.sqrt(2.0 * lam * sigma**2 / D) * np.exp(-lam * t)


def position_state_sigma(hbar: float) -> float:
    """Effective width sqrt(2 pi) hbar for a position eigenstate.

    Averaging the correlated-pair dephasing factor uniformly over a unit
    momentum interval gives 2 hbar sqrt(pi lam / D) exp(-lam t), which is
    the asymptote above with sigma = sqrt(2 pi) hbar.
    """
    return math.sqrt(TWO_PI) * hbar


@dataclass(frozen=True)
class RegimeParams:
    """Inputs of the analytic laws, consistent by construction."""

    v2: float
    K: float
    hbar: float
    lam: float
    D: float
    sigma: Optional[float]
    n: int

    @property
    def gamma(self) -> float:
        return golden_rule_width(self.K, self.hbar)

    @property
    def fgr_rate(self) -> float:
        """Decay rate per step, Gamma/hbar = 2K/hbar^2."""
        return self.gamma / self.hbar

    @property
    def level_spacing(self) -> float:
        # t_H = 2 pi hbar / Delta = n steps
        return TWO_PI * self.hbar / self.n

    @classmethod
    def build(cls, K, D, lam, n, sigma=None, v2=None, time_reversal=True, parity=True):
        hbar = 1.0 / (TWO_PI * n)
        if v2 is None:
            v2 = pt_matrix_element_variance(K, n, time_reversal, parity)
        for name, val in (("K", K), ("D", D), ("lam", lam), ("v2", v2)):
            if val < 0:
                raise ValueError(f"{name} must be >= 0, got {val}")
        return cls(v2, K, hbar, lam, D, sigma, n)

    def curves(self, t) -> dict[str, np.ndarray]:
        return {
            "pt": m_pt(t, self.v2, self.hbar),
            "fgr": m_fgr(t, self.gamma, self.hbar),
            "lyap": m_lyapunov(t, self.lam, self.D, self.sigma),
        }


def decay_window(M, upper: float, lower: float, start: int = 1) -> slice:
    """Contiguous index range from the first M < upper to the first M <= lower.

    The lower edge is exclusive. Returns an empty slice when M never drops
    below ``upper``.
    """
    M = np.asarray(M)
    below = np.nonzero(M[start:] < upper)[0]
    if below.size == 0:
        return slice(0, 0)
    i0 = start + int(below[0])
    hit = np.nonzero(M[i0:] <= lower)[0]
    i1 = i0 + int(hit[0]) if hit.size else M.size
    return slice(i0, i1)


def fit_decay_rate(t, M, window: Optional[slice] = None) -> float:
    """Least-squares slope of -ln M against t over ``window``."""
    t = np.asarray(t, dtype=float)
    M = np.asarray(M, dtype=float)
    if window is not None:
        t, M = t[window], M[window]
    if t.size < 2:
        raise ValueError("need at least two points to fit a rate")
    slope = np.polyfit(t, np.log(M), 1)[0]
    return float(-slope)
