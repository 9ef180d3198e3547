"""Statistics of action differences behind the decay laws.

* ``action_histogram``: is dS(t) Gaussian with variance 2Kt?
* ``pair_variance_vs_separation``: <[dS(p') - dS(p'')]^2> against p'' - p'
  at fixed t, quadratic for near pairs and flat at 4Kt for distant ones.
* ``pair_variance_vs_time``: the same variance at fixed tiny separation,
  exponential while the pair is correlated and linear afterwards.
* ``branch_count_log10``: how many final-position branches the
  initial-momentum line folds into, i.e. how many terms a branch-sum
  evaluation would need.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import stats

from loschmidt import classical
from loschmidt._parallel import chunked_map
from loschmidt.semiclassical import DeltaActionTable

TWO_PI = 2.0 * math.pi
LN10 = math.log(10.0)


@dataclass
class HistogramFit:
    edges: np.ndarray
    counts: np.ndarray
    mean: float
    variance: float
    ks_distance: float
    t: int
    samples: int

    def gaussian_counts(self) -> np.ndarray:
        """Expected counts per bin under the moment-matched Gaussian."""
        if self.variance == 0:
            out = np.zeros_like(self.counts, dtype=float)
            out[np.searchsorted(self.edges, self.mean, side="right") - 1] = self.samples
            return out
        cdf = stats.norm.cdf(self.edges, self.mean, math.sqrt(self.variance))
        return self.samples * np.diff(cdf)


@dataclass
class PairVarianceCurve:
    """Pair variance against separation or time, with the fits that apply."""

    abscissa: np.ndarray
    variance: np.ndarray
    kind: str  # "separation" or "time"
    small_slope: Optional[float] = None
    plateau: Optional[float] = None
    exp_rate: Optional[float] = None
    linear_slope: Optional[float] = None
    crossover: Optional[float] = None
    exp_window: Optional[tuple[float, float]] = None
    linear_window: Optional[tuple[float, float]] = None
    meta: dict = field(default_factory=dict)


def action_histogram(table: DeltaActionTable, t: int, bins: int = 60) -> HistogramFit:
    if len(table) < 1000:
        raise ValueError(f"need at least 1000 rows for a histogram, table has {len(table)}")
    if not 0 <= t <= table.t_max:
        raise ValueError(f"t={t} outside 0..{table.t_max}")
    x = table.dS[:, t]
    mean = float(x.mean())
    var = float(x.var())
    if var == 0.0:
        edges = np.array([mean - 0.5, mean + 0.5])
        return HistogramFit(edges, np.array([x.size]), mean, 0.0, 0.0, t, x.size)
    counts, edges = np.histogram(x, bins=bins)
    ks = stats.kstest(x, "norm", args=(mean, math.sqrt(var))).statistic
    return HistogramFit(edges, counts, mean, var, float(ks), t, x.size)


def _pair_delta(q, p, dp, k, epsilon, t):
    a = classical.delta_action_ensemble(q, p, k, epsilon, t)
    b = classical.delta_action_ensemble(q, classical.wrap(p + dp), k, epsilon, t)
    return b - a


def _loglog_slope(x, y):
    return float(np.polyfit(np.log(x), np.log(y), 1)[0])


def pair_variance_vs_separation(
    k: float,
    epsilon: float,
    t: int,
    separations=None,
    ensemble_size: int = 20000,
    seed: int = 0,
    K: Optional[float] = None,
    workers: int = 1,
) -> PairVarianceCurve:
    """Variance of dS(q, p + dp, t) - dS(q, p, t) over random base points.

    The small-dp slope is fitted over separations whose variance is below
    1e-2 of the plateau; the plateau is the mean over the top decade of
    the grid.
    """
    if separations is None:
        separations = np.logspace(-12, math.log10(0.5), 30)
    dps = np.asarray(separations, dtype=float)
    positive = dps[dps > 0]
    if positive.size and (positive.min() > 1e-8 or positive.max() < 1e-2):
        raise ValueError("separation grid must span <= 1e-8 to >= 1e-2")
    rng = np.random.default_rng(seed)
    q = rng.random(ensemble_size)
    p = rng.random(ensemble_size)

    def one(dp):
        if dp == 0:
            return 0.0
        parts = chunked_map(
            lambda sl: _pair_delta(q[sl], p[sl], dp, k, epsilon, t)[t], ensemble_size, workers
        )
        d = np.concatenate(parts)
        return float(np.mean(d * d))

    var = np.array([one(dp) for dp in dps])
    curve = PairVarianceCurve(dps, var, "separation")
    if not positive.size:
        return curve
    top = dps >= dps.max() / 10.0
    curve.plateau = float(var[top].mean())
    small = (dps > 0) & (var < 1e-2 * curve.plateau)
    if small.sum() >= 2:
        curve.small_slope = _loglog_slope(dps[small], var[small])
        # quadratic law c dp^2 meets the plateau at sqrt(plateau / c)
        c = float(np.exp(np.mean(np.log(var[small]) - 2.0 * np.log(dps[small]))))
        curve.crossover = math.sqrt(curve.plateau / c)
        if small.sum() < 3:
            warnings.warn("fewer than three separations in the quadratic window", RuntimeWarning, stacklevel=2)
    else:
        warnings.warn(
            "no separations below 1e-2 of the plateau; quadratic and plateau regimes overlap",
            RuntimeWarning,
            stacklevel=2,
        )
    curve.meta.update(t=t, k=k, epsilon=epsilon, ensemble_size=ensemble_size, seed=seed)
    if K is not None:
        curve.meta["plateau_over_4Kt"] = curve.plateau / (4.0 * K * t)
    return curve


def pair_variance_vs_time(
    k: float,
    epsilon: float,
    separation: float = 1e-11,
    t_max: int = 120,
    ensemble_size: int = 20000,
    seed: int = 0,
    linear_from: Optional[int] = None,
    q0: Optional[float] = None,
    workers: int = 1,
) -> PairVarianceCurve:
    """Variance of the pair action difference against time at fixed separation.

    Exponential rate: fitted on t > 2 while the variance is below 1e-2 of
    the linear asymptote extrapolated back to that time. Linear slope: fitted
    from ``linear_from`` (default: twice the end of the exponential window)
    to ``t_max``. ``q0=None`` draws base positions uniformly; a number
    pins every pair to that position.
    """
    rng = np.random.default_rng(seed)
    q = rng.random(ensemble_size) if q0 is None else np.full(ensemble_size, float(q0))
    p = rng.random(ensemble_size)
    parts = chunked_map(lambda sl: _pair_delta(q[sl], p[sl], separation, k, epsilon, t_max), ensemble_size, workers)
    d = np.concatenate(parts, axis=1)
    var = np.mean(d * d, axis=1)
    # typical (log-averaged) growth, reported alongside the variance
    with np.errstate(divide="ignore"):
        logmean = np.mean(np.log(d * d), axis=1)
    t = np.arange(t_max + 1)
    curve = PairVarianceCurve(t.astype(float), var, "time")

    # first pass: rough linear asymptote from the final third
    tail = t >= (2 * t_max) // 3
    slope0, icpt0 = np.polyfit(t[tail], var[tail], 1)
    asym = np.maximum(slope0 * t + icpt0, slope0 * np.maximum(t, 1))
    expw = (t > 2) & (var > 0) & (var < 1e-2 * asym)
    # keep the initial contiguous run only
    if expw.any():
        first = int(np.argmax(expw))
        run = first
        while run + 1 <= t_max and expw[run + 1]:
            run += 1
        expw[:] = False
        expw[first : run + 1] = True
    if expw.sum() >= 2:
        curve.exp_rate = float(np.polyfit(t[expw], np.log(var[expw]), 1)[0])
        curve.exp_window = (float(t[expw][0]), float(t[expw][-1]))
        finite = expw & np.isfinite(logmean)
        curve.meta["log_mean_rate"] = float(np.polyfit(t[finite], logmean[finite], 1)[0])
        end = int(t[expw][-1])
    else:
        end = 10
    start = linear_from if linear_from is not None else min(2 * end + 10, t_max - 10)
    lin = t >= start
    curve.linear_slope = float(np.polyfit(t[lin], var[lin], 1)[0])
    curve.linear_window = (float(start), float(t_max))
    curve.meta.update(k=k, epsilon=epsilon, separation=separation, ensemble_size=ensemble_size, seed=seed)
    return curve


def branch_count_log10(k: float, q0: float, t: int, probes: int = 10_000, workers: int = 1) -> float:
    """log10 of the total stretching of the initial-momentum line.

    The line q = q0, p' in [0, 1) maps after t steps onto a curve whose
    projection onto q has length sum_i |dq_t/dp'|_i / probes. Each unit of
    that length is one fold over the position circle, so this counts the
    classical branches reaching a typical final position, integrated over
    final positions. Tangent vectors are renormalized every step and the
    sum is taken in log space.
    """
    return float(branch_count_curve(k, q0, t, probes, workers)[-1])


def branch_count_curve(k: float, q0: float, t: int, probes: int = 10_000, workers: int = 1) -> np.ndarray:
    """``branch_count_log10`` for every time 0..t."""
    if probes < 10_000:
        raise ValueError(f"need at least 1e4 probe momenta, got {probes}")
    if t < 0:
        raise ValueError(f"t must be >= 0, got {t}")
    # midpoints of the momentum grid
    p_all = (np.arange(probes) + 0.5) / probes

    def work(sl):
        p = p_all[sl].copy()
        q = np.full(p.size, float(q0))
        vq = np.zeros(p.size)  # dq/dp'
        vp = np.ones(p.size)  # dp/dp'
        logscale = np.zeros(p.size)
        rows = np.empty((t + 1, p.size))
        rows[0] = -np.inf
        for j in range(1, t + 1):
            q, p = classical.step_ensemble(q, p, k)
            vq = vq + vp
            vp = vp - k * np.cos(TWO_PI * q) * vq
            nrm = np.hypot(vq, vp)
            logscale += np.log(nrm)
            vq /= nrm
            vp /= nrm
            with np.errstate(divide="ignore"):
                rows[j] = np.log(np.abs(vq)) + logscale
        return rows

    logs = np.concatenate(chunked_map(work, probes, workers), axis=1)
    out = np.zeros(t + 1)
    if t:
        # log of mean |dq/dp'|, then at least one branch
        lme = np.logaddexp.reduce(logs[1:], axis=1) - math.log(probes)
        out[1:] = np.maximum(lme, 0.0) / LN10
    return out
