"""Uniform semiclassical fidelity in the initial-momentum representation.

Every initial momentum p' on the line q = q0 launches one classical orbit
of the unperturbed map. The perturbation enters only through the action
difference dS(p', t) accumulated along that orbit, and the overlap
amplitude is the weighted average of the dephasing factors::

    O(t) = sum_m w_m exp(i dS(p_m, t) / hbar),    M(t) = |O(t)|^2

with sum_m w_m = 1, which fixes M(0) = 1 without carrying the analytic
normalization prefactor. No root search, branch sum or Maslov phase is
involved.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional, Union

import numpy as np

from loschmidt import classical
from loschmidt._parallel import chunked_map
from loschmidt.params import FidelityCurve, MapParams, StateSpec

TWO_PI = 2.0 * math.pi
MAX_FULL_GRID = 10_000_000
MIN_MC_SAMPLES = 100


@dataclass(frozen=True)
class FullGrid:
    """Use every momentum p_m = m/n, m = 0..n-1."""


@dataclass(frozen=True)
class MonteCarlo:
    """Draw ``count`` momenta (with replacement) from the weight distribution."""

    count: int
    seed: int

    def __post_init__(self):
        if self.count < MIN_MC_SAMPLES:
            raise ValueError(f"monte-carlo count must be >= {MIN_MC_SAMPLES}, got {self.count}")


Sampling = Union[FullGrid, MonteCarlo]


@dataclass(frozen=True)
class DeltaActionTable:
    """dS(p_m, t) with shape ``(len(momenta), t_max + 1)``.

    ``sampled`` marks tables whose rows were importance-sampled from
    ``weight_kind``; such rows carry equal weight.
    """

    momenta: np.ndarray
    dS: np.ndarray
    q0: float
    params: MapParams
    sampled: bool = False
    weight_kind: str = "position"

    @property
    def t_max(self) -> int:
        return self.dS.shape[1] - 1

    def __len__(self) -> int:
        return self.momenta.size

    def phases(self, t=None) -> np.ndarray:
        """dS / hbar reduced to [-pi, pi].

        The reduction is odd in its argument, so negating eps conjugates
        every phasor bit-exactly.
        """
        x = self.dS if t is None else self.dS[:, t]
        ph = x * (TWO_PI * self.params.n)
        return ph - TWO_PI * np.rint(ph / TWO_PI)

    def with_epsilon(self, epsilon: float) -> DeltaActionTable:
        """Same orbits, rescaled perturbation (dS is exactly linear in eps)."""
        eps0 = self.params.epsilon
        if eps0 == 0:
            raise ValueError("cannot rescale a table computed at eps = 0")
        return replace(self, dS=self.dS * (epsilon / eps0), params=self.params.with_epsilon(epsilon))


def momentum_grid(n: int) -> np.ndarray:
    return np.arange(n) / n


def momentum_weights(n: int, state: StateSpec) -> np.ndarray:
    """Normalized IVR weights on the n-point momentum grid.

    Position eigenstate: uniform 1/n. Gaussian packet: the squared momentum
    amplitude exp(-(p - p0)^2 sigma^2 / hbar^2), periodized on the torus.
    """
    if state.kind == "position":
        return np.full(n, 1.0 / n)
    hbar = 1.0 / (TWO_PI * n)
    d = momentum_grid(n) - state.p0
    w = np.zeros(n)
    for shift in (-1.0, 0.0, 1.0):
        w += np.exp(-((d + shift) ** 2) * state.sigma**2 / hbar**2)
    return w / w.sum()


def _rows(q0: float, momenta: np.ndarray, params: MapParams, t_max: int, workers: int) -> np.ndarray:
    def work(sl):
        # (t+1, N) -> (N, t+1)
        return classical.delta_action_ensemble(q0, momenta[sl], params.k, params.epsilon, t_max).T

    return np.concatenate(chunked_map(work, momenta.size, workers), axis=0)


def delta_action_table(
    params: MapParams,
    q0: float,
    t_max: int,
    sampling: Optional[Sampling] = None,
    state: Optional[StateSpec] = None,
    workers: int = 1,
) -> DeltaActionTable:
    if t_max < 1:
        raise ValueError(f"t_max must be >= 1, got {t_max}")
    sampling = FullGrid() if sampling is None else sampling
    state = StateSpec.position(q0) if state is None else state
    if isinstance(sampling, FullGrid):
        if params.n > MAX_FULL_GRID:
            raise ValueError(
                f"full-grid IVR with n={params.n} exceeds {MAX_FULL_GRID} rows; "
                "use monte-carlo sampling instead"
            )
        p = momentum_grid(params.n)
        return DeltaActionTable(p, _rows(q0, p, params, t_max, workers), q0, params, False, state.kind)
    rng = np.random.default_rng(sampling.seed)
    w = momentum_weights(params.n, state)
    idx = rng.choice(params.n, size=sampling.count, p=w)
    p = idx / params.n
    return DeltaActionTable(p, _rows(q0, p, params, t_max, workers), q0, params, True, state.kind)


def _phasor_mean(phases: np.ndarray, weights: Optional[np.ndarray]) -> np.ndarray:
    # phases: (rows, T). Contiguous along rows so np.sum uses pairwise summation.
    ph = np.ascontiguousarray(phases.T)
    c = np.cos(ph)
    s = np.sin(ph)
    if weights is None:
        return (c.sum(axis=1) + 1j * s.sum(axis=1)) / ph.shape[1]
    return (c * weights).sum(axis=1) + 1j * (s * weights).sum(axis=1)


def fidelity_uniform(table: DeltaActionTable, weights: Optional[np.ndarray] = None) -> FidelityCurve:
    """M(t) = |sum_m w_m exp(i dS(m, t)/hbar)|^2.

    ``weights=None`` means equal weights, which is right both for the
    position eigenstate on the full grid and for importance-sampled tables.
    """
    if weights is not None:
        weights = np.asarray(weights, dtype=float)
        if weights.shape != (len(table),):
            raise ValueError(f"got {weights.size} weights for a table with {len(table)} rows")
        total = weights.sum()
        if not math.isclose(total, 1.0, rel_tol=1e-9):
            raise ValueError(f"weights must sum to 1 (sum={total!r})")
    z = _phasor_mean(table.phases(), weights)
    M = np.abs(z) ** 2
    M[0] = 1.0
    return FidelityCurve(np.arange(table.t_max + 1), M, "ivr")


def phasor_stats(table: DeltaActionTable) -> tuple[np.ndarray, np.ndarray]:
    """Mean phasor and its 2x2 (Re, Im) sample covariance per time step."""
    ph = np.ascontiguousarray(table.phases().T)
    x = np.cos(ph)
    y = np.sin(ph)
    N = ph.shape[1]
    mx = x.mean(axis=1)
    my = y.mean(axis=1)
    dx = x - mx[:, None]
    dy = y - my[:, None]
    cxx = (dx * dx).sum(axis=1) / (N - 1)
    cyy = (dy * dy).sum(axis=1) / (N - 1)
    cxy = (dx * dy).sum(axis=1) / (N - 1)
    cov = np.stack([np.stack([cxx, cxy], -1), np.stack([cxy, cyy], -1)], -2)
    return mx + 1j * my, cov


def monte_carlo_fidelity(
    params: MapParams,
    q0: float,
    state: Optional[StateSpec],
    samples: int,
    t_max: int,
    seed: int,
    workers: int = 1,
) -> FidelityCurve:
    """Importance-sampled estimate of the IVR fidelity with standard errors.

    M = |zbar|^2 with zbar the sample mean of phasors. The error combines
    first-order propagation, 4 mu^T C mu / N, with the second-order term
    2 tr(C^2) / N^2 that dominates once the mean phasor has dephased.
    """
    table = delta_action_table(params, q0, t_max, MonteCarlo(samples, seed), state, workers)
    z, cov = phasor_stats(table)
    M = np.abs(z) ** 2
    mu = np.stack([z.real, z.imag], -1)
    first = 4.0 * np.einsum("ti,tij,tj->t", mu, cov, mu) / samples
    second = 2.0 * np.einsum("tij,tji->t", cov, cov) / samples**2
    err = np.sqrt(np.maximum(first + second, 0.0))
    M[0] = 1.0
    err[0] = 0.0
    return FidelityCurve(np.arange(t_max + 1), M, "ivr", stderr=err)


def fidelity_ivr(
    params: MapParams,
    state: StateSpec,
    t_max: int,
    sampling: Optional[Sampling] = None,
    workers: int = 1,
) -> FidelityCurve:
    """Convenience wrapper: build the table and average the phasors."""
    if isinstance(sampling, MonteCarlo):
        return monte_carlo_fidelity(params, state.q0, state, sampling.count, t_max, sampling.seed, workers)
    table = delta_action_table(params, state.q0, t_max, FullGrid(), state, workers)
    w = None if state.kind == "position" else momentum_weights(params.n, state)
    return fidelity_uniform(table, w)
