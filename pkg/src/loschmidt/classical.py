"""Classical standard map on the unit torus.

Scalar routines (``map_step``, ``evolve``...) operate on a single
``PhasePoint``; the ``*_ensemble`` helpers are the vectorized workhorses
used by the semiclassical and diagnostic code.

Map convention::

    q' = q + p                       (mod 1)
    p' = p - k/(2 pi) sin(2 pi q')   (mod 1)

The kick is evaluated at the drifted position q'. It derives from the
potential V(q) = -k/(4 pi^2) cos(2 pi q), so replacing k by k + eps adds
dV(q) = -eps/(4 pi^2) cos(2 pi q) and changes each step's action by
-dV(q') = eps/(4 pi^2) cos(2 pi q').
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from loschmidt._parallel import chunked_map

TWO_PI = 2.0 * math.pi
ACTION_SCALE = 1.0 / (4.0 * math.pi**2)


def wrap(x):
    """Reduce to [0, 1). Works on floats and arrays."""
    r = x - np.floor(x)
    # x slightly below an integer can round to exactly 1.0
    if np.ndim(r) == 0:
        return 0.0 if r >= 1.0 else float(r)
    r[r >= 1.0] = 0.0
    return r


@dataclass(frozen=True)
class PhasePoint:
    q: float
    p: float

    def __post_init__(self):
        object.__setattr__(self, "q", wrap(float(self.q)))
        object.__setattr__(self, "p", wrap(float(self.p)))


@dataclass(frozen=True)
class Monodromy:
    """2x2 tangent-map product ``[[m11, m12], [m21, m22]]`` in factored form.

    Stored as M = Q(theta) diag(e^a, e^b) [[1, u], [0, 1]] with Q a rotation.
    Chaotic products have entries near e^{lambda t} whose determinant would
    otherwise be a catastrophic cancellation; here det = e^{a + b} stays
    accurate to roughly t * eps_machine * k^2, and the growth exponent ``a``
    never overflows.
    """

    theta: float = 0.0
    a: float = 0.0
    b: float = 0.0
    u: float = 0.0

    @classmethod
    def identity(cls) -> Monodromy:
        return cls()

    @classmethod
    def from_matrix(cls, m) -> Monodromy:
        m = np.asarray(m, dtype=float)
        theta, r11, r12, r22 = _qr2(m[0, 0], m[0, 1], m[1, 0], m[1, 1])
        if r22 <= 0:
            raise ValueError("tangent products have positive determinant")
        return cls(theta, math.log(r11), math.log(r22), r12 / r11)

    def _entries(self):
        c, s = math.cos(self.theta), math.sin(self.theta)
        ea = math.exp(self.a) if self.a < 709 else math.inf
        eb = math.exp(self.b)
        return c * ea, c * ea * self.u - s * eb, s * ea, s * ea * self.u + c * eb

    @property
    def m11(self) -> float:
        return self._entries()[0]

    @property
    def m12(self) -> float:
        return self._entries()[1]

    @property
    def m21(self) -> float:
        return self._entries()[2]

    @property
    def m22(self) -> float:
        return self._entries()[3]

    @property
    def log_stretch(self) -> float:
        """ln |M (1, 0)|, the finite-time stretching of the q direction."""
        return self.a

    def det(self) -> float:
        return math.exp(self.a + self.b)

    def trace(self) -> float:
        e = self._entries()
        return e[0] + e[3]

    def as_array(self) -> np.ndarray:
        e = self._entries()
        return np.array([[e[0], e[1]], [e[2], e[3]]])


def _qr2(x11, x12, x21, x22):
    """Givens QR of a 2x2 matrix: (rotation angle, r11 >= 0, r12, r22)."""
    r11 = math.hypot(x11, x21)
    if r11 == 0.0:
        raise ValueError("singular tangent matrix")
    c, s = x11 / r11, x21 / r11
    return math.atan2(s, c), r11, c * x12 + s * x22, c * x22 - s * x12


@dataclass(frozen=True)
class TrajectoryRecord:
    initial: PhasePoint
    points: tuple[PhasePoint, ...]
    kick_samples: np.ndarray
    monodromy: Monodromy

    @property
    def steps(self) -> int:
        return len(self.kick_samples)


@dataclass(frozen=True)
class DiffusionConstants:
    """Perturbation autocorrelation integrals.

    K is in action^2 per step, D in action^2 per momentum^2 per step.
    ``kick_correlation`` and ``force_correlation`` are the lag-indexed
    autocorrelations of cos(2 pi q) and sin(2 pi q) (eps-free), so that
    K = (eps/4pi^2)^2 * (c[0]/2 + sum c[1:]).
    """

    K: float
    D: float
    epsilon: float
    k: float
    ensemble_size: int
    max_lag: int
    kick_correlation: np.ndarray
    force_correlation: np.ndarray

    @property
    def correlation_factor(self) -> float:
        """Ratio of the summed correlation to the lag-0 value, ``2K / c(0)``."""
        c = self.kick_correlation
        return float((c[0] + 2.0 * c[1:].sum()) / c[0])

    def scaled(self, epsilon: float) -> DiffusionConstants:
        """Same orbits, different perturbation strength (exact eps^2 scaling)."""
        K, D = _integrate(self.kick_correlation, self.force_correlation, epsilon)
        return DiffusionConstants(
            K, D, epsilon, self.k, self.ensemble_size, self.max_lag,
            self.kick_correlation, self.force_correlation,
        )


def map_step(x: PhasePoint, k: float) -> PhasePoint:
    q = wrap(x.q + x.p)
    p = wrap(x.p - k / TWO_PI * math.sin(TWO_PI * q))
    return PhasePoint(q, p)


def map_step_inverse(x: PhasePoint, k: float) -> PhasePoint:
    p = wrap(x.p + k / TWO_PI * math.sin(TWO_PI * x.q))
    q = wrap(x.q - p)
    return PhasePoint(q, p)


def tangent_step(x_next: PhasePoint, M: Monodromy, k: float) -> Monodromy:
    """Left-multiply ``M`` by the Jacobian evaluated at the updated point."""
    c = k * math.cos(TWO_PI * x_next.q)
    cq, sq = math.cos(M.theta), math.sin(M.theta)
    # J Q with J = [[1, 1], [-c, 1 - c]]
    x11 = cq + sq
    x12 = cq - sq
    x21 = (1.0 - c) * sq - c * cq
    x22 = (1.0 - c) * cq + c * sq
    theta, r11, r12, r22 = _qr2(x11, x12, x21, x22)
    return Monodromy(
        theta,
        M.a + math.log(r11),
        M.b + math.log(r22),
        M.u + (r12 / r11) * math.exp(M.b - M.a),
    )


def evolve(x0: PhasePoint, k: float, t: int) -> TrajectoryRecord:
    if t < 0:
        raise ValueError(f"step count must be >= 0, got {t}")
    pts = [x0]
    kicks = np.empty(t)
    M = Monodromy.identity()
    x = x0
    for j in range(t):
        x = map_step(x, k)
        kicks[j] = math.cos(TWO_PI * x.q)
        M = tangent_step(x, M, k)
        pts.append(x)
    return TrajectoryRecord(x0, tuple(pts), kicks, M)


def delta_action(traj: TrajectoryRecord, epsilon: float) -> np.ndarray:
    """Cumulative action difference ``dS_t`` for t = 0..T along ``traj``."""
    out = np.zeros(traj.steps + 1)
    out[1:] = epsilon * ACTION_SCALE * np.cumsum(traj.kick_samples)
    return out


# -- vectorized ensembles ---------------------------------------------------


def step_ensemble(q: np.ndarray, p: np.ndarray, k: float):
    q = wrap(q + p)
    p = wrap(p - (k / TWO_PI) * np.sin(TWO_PI * q))
    return q, p


def kick_samples_ensemble(q0, p0, k: float, t: int) -> np.ndarray:
    """cos(2 pi q_{j+1}) for j = 0..t-1, shape ``(t, N)``."""
    q = np.array(q0, dtype=float, copy=True)
    p = np.array(p0, dtype=float, copy=True)
    q, p = np.broadcast_arrays(q, p)
    q, p = q.copy(), p.copy()
    out = np.empty((t,) + q.shape)
    for j in range(t):
        q, p = step_ensemble(q, p, k)
        out[j] = np.cos(TWO_PI * q)
    return out


def delta_action_ensemble(q0, p0, k: float, epsilon: float, t: int) -> np.ndarray:
    """Action differences for many orbits, shape ``(t + 1, N)`` with row 0 zero."""
    kicks = kick_samples_ensemble(q0, p0, k, t)
    out = np.zeros((t + 1,) + kicks.shape[1:])
    np.cumsum(kicks, axis=0, out=out[1:])
    out *= epsilon * ACTION_SCALE
    return out


def _finite_time_exponents(q, p, k, t):
    # renormalized tangent vector started along (1, 0)
    vq = np.ones_like(q)
    vp = np.zeros_like(q)
    logs = np.zeros_like(q)
    for _ in range(t):
        q, p = step_ensemble(q, p, k)
        c = k * np.cos(TWO_PI * q)
        vq = vq + vp
        vp = vp - c * vq
        nrm = np.hypot(vq, vp)
        logs += np.log(nrm)
        vq /= nrm
        vp /= nrm
    return logs / t


def lyapunov_exponent(
    k: float,
    ensemble_size: int = 2000,
    t: int = 200,
    seed: int = 0,
    workers: int = 1,
) -> tuple[float, float]:
    """Mean finite-time Lyapunov exponent over uniformly random initial points.

    Returns ``(lambda, stderr)`` in 1/step. The average is the arithmetic
    mean of per-orbit exponents (1/t) ln |M(t) v0|, so it is the typical
    stretching rate, not the growth rate of any ensemble moment.
    """
    if t < 20:
        raise ValueError(f"t must be >= 20, got {t}")
    if ensemble_size < 100:
        raise ValueError(f"ensemble_size must be >= 100, got {ensemble_size}")
    rng = np.random.default_rng(seed)
    q = rng.random(ensemble_size)
    p = rng.random(ensemble_size)
    parts = chunked_map(
        lambda sl: _finite_time_exponents(q[sl], p[sl], k, t), ensemble_size, workers
    )
    lam = np.concatenate(parts)
    return float(lam.mean()), float(lam.std(ddof=1) / math.sqrt(ensemble_size))


def _lagged_means(x: np.ndarray, max_lag: int, origins: int) -> np.ndarray:
    # x has shape (max_lag + origins, N), mean already removed
    head = x[:origins]
    return np.array([np.mean(head * x[j : j + origins]) for j in range(max_lag + 1)])


def _integrate(c_kick, c_force, epsilon):
    a = epsilon * ACTION_SCALE
    f = epsilon / TWO_PI
    K = a * a * (0.5 * c_kick[0] + c_kick[1:].sum())
    D = f * f * (c_force[0] + 2.0 * c_force[1:].sum())
    return float(K), float(D)


def diffusion_constants(
    k: float,
    epsilon: float,
    ensemble_size: int = 20000,
    max_lag: int = 50,
    seed: int = 0,
    origins: int = 200,
    burn_in: int = 20,
    workers: int = 1,
) -> DiffusionConstants:
    """Estimate K and D from ensemble autocorrelations.

    With dV(q) = -eps/(4 pi^2) cos(2 pi q) and dV'(q) = eps/(2 pi) sin(2 pi q)
    sampled along orbits::

        K = c_V(0)/2 + sum_{j=1}^{max_lag} c_V(j)
        D = c_V'(0) + 2 sum_{j=1}^{max_lag} c_V'(j)

    For a map these lag sums are exact: the variance of the summed kicks
    over t steps is 2Kt up to an O(1) boundary term.

    Correlations are averaged over ``origins`` successive time origins on
    each orbit, after ``burn_in`` steps of relaxation.
    """
    if ensemble_size < 10_000:
        raise ValueError(f"ensemble_size must be >= 1e4, got {ensemble_size}")
    if max_lag < 10:
        raise ValueError(f"max_lag must be >= 10, got {max_lag}")
    rng = np.random.default_rng(seed)
    q = rng.random(ensemble_size)
    p = rng.random(ensemble_size)
    length = max_lag + origins

    def work(sl):
        qq, pp = q[sl], p[sl]
        for _ in range(burn_in):
            qq, pp = step_ensemble(qq, pp, k)
        cs = np.empty((length, qq.size))
        sn = np.empty((length, qq.size))
        for j in range(length):
            qq, pp = step_ensemble(qq, pp, k)
            cs[j] = np.cos(TWO_PI * qq)
            sn[j] = np.sin(TWO_PI * qq)
        return cs, sn

    parts = chunked_map(work, ensemble_size, workers)
    cs = np.concatenate([a for a, _ in parts], axis=1)
    sn = np.concatenate([b for _, b in parts], axis=1)
    cs -= cs.mean()
    sn -= sn.mean()
    c_kick = _lagged_means(cs, max_lag, origins)
    c_force = _lagged_means(sn, max_lag, origins)

    for name, c in (("kick", c_kick), ("force", c_force)):
        tail = np.abs(c[-3:]).max()
        if tail > 0.01 * c[0]:
            warnings.warn(
                f"{name} autocorrelation still {tail / c[0]:.3g} of c(0) at lag "
                f"{max_lag}; increase max_lag",
                RuntimeWarning,
                stacklevel=2,
            )
    K, D = _integrate(c_kick, c_force, epsilon)
    return DiffusionConstants(K, D, epsilon, k, ensemble_size, max_lag, c_kick, c_force)
