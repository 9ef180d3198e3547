"""Experiment orchestration: compute requested paths, write CSV + manifest."""

from __future__ import annotations

import json
import logging
import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from loschmidt import __version__, classical, diagnostics, regimes, semiclassical
from loschmidt.cli.config import ExperimentConfig
from loschmidt.params import StateSpec
from loschmidt.quantum import fidelity_exact

log = logging.getLogger(__name__)

FIDELITY_COLUMNS = ("t", "M_exact", "M_ivr", "M_pt", "M_fgr", "M_lyap", "stderr_ivr")
NUMBER_FORMAT = "{:.11e}"  # 12 significant digits

CONVENTIONS = {
    "bloch_phases": "zero in both q and p",
    "floquet_order": "free drift then kick (matches the classical step)",
    "momentum_grid": "integer m in FFT order, Nyquist index negative",
    "lyapunov_averaging": "arithmetic mean of finite-time exponents over a uniform ensemble",
    "diffusion_discretization": "K = c(0)/2 + sum_{j>=1} c(j); D = c(0) + 2 sum_{j>=1} c(j)",
    "pt_matrix_element": "(2/beta) 2K / t_eff, beta=1, t_eff=n/2 for parity-symmetric states",
}


class ComputeError(RuntimeError):
    pass


@dataclass
class RunManifest:
    config: dict
    derived: dict
    files: list[str]
    wall_clock_s: float
    tool_version: str = __version__
    conventions: dict = field(default_factory=lambda: dict(CONVENTIONS))
    results: dict = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps(
            {
                "tool_version": self.tool_version,
                "config": self.config,
                "derived": self.derived,
                "results": self.results,
                "conventions": self.conventions,
                "wall_clock_s": self.wall_clock_s,
                "files": self.files,
            },
            indent=2,
            sort_keys=False,
            default=_jsonable,
        )

    def write(self, path: Path) -> None:
        path.write_text(self.to_json() + "\n")


def _jsonable(x):
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, tuple):
        return list(x)
    raise TypeError(f"not JSON serializable: {type(x).__name__}")


def is_parity_symmetric(state: StateSpec) -> bool:
    """True when the state is invariant under q -> -q, p -> -p on the torus."""

    def special(x):
        return any(math.isclose((2 * x) % 1.0, v, abs_tol=1e-12) for v in (0.0, 1.0))

    if state.kind == "position":
        return special(state.q0)
    return special(state.q0) and special(state.p0)


def derived_quantities(cfg: ExperimentConfig, need_lyapunov: bool = True) -> dict:
    params = cfg.map_params
    seed = cfg.classical_seed
    diff = classical.diffusion_constants(params.k, params.epsilon, seed=seed, max_lag=50, workers=cfg.workers)
    out = {
        "hbar": params.hbar,
        "t_heisenberg": params.t_heisenberg,
        "ergodic_floor": regimes.ergodic_floor(params.n),
        "K": diff.K,
        "D": diff.D,
        "correlation_factor": diff.correlation_factor,
        "fgr_rate_per_step": 2.0 * diff.K / params.hbar**2,
    }
    if need_lyapunov:
        lam, lam_err = classical.lyapunov_exponent(params.k, seed=seed, workers=cfg.workers)
        out["lambda"] = lam
        out["lambda_stderr"] = lam_err
        try:
            e1, e2 = regimes.crossover_strengths(params.k, params.n, lam)
            out["eps_pt_fgr"] = e1
            out["eps_fgr_lyap"] = e2
            out["regime"] = "pt" if params.epsilon < e1 else ("fgr" if params.epsilon < e2 else "lyapunov")
        except ValueError as exc:
            out["crossover_error"] = str(exc)
    if cfg.lambda_ref is not None:
        out["lambda_ref"] = cfg.lambda_ref
    return out


def _format_row(values) -> str:
    return ",".join("" if v is None else NUMBER_FORMAT.format(v) for v in values)


def write_fidelity_csv(path: Path, t: np.ndarray, columns: dict[str, Optional[np.ndarray]]) -> None:
    lines = [",".join(FIDELITY_COLUMNS)]
    for i, ti in enumerate(t):
        row = [str(int(ti))]
        for name in FIDELITY_COLUMNS[1:]:
            col = columns.get(name)
            row.append("" if col is None else NUMBER_FORMAT.format(col[i]))
        lines.append(",".join(row))
    path.write_text("\n".join(lines) + "\n")


def write_table_csv(path: Path, header: list[str], *cols) -> None:
    lines = [",".join(header)]
    for row in zip(*cols):
        lines.append(_format_row(row))
    path.write_text("\n".join(lines) + "\n")


def compute_paths(cfg: ExperimentConfig, derived: dict) -> tuple[np.ndarray, dict, dict]:
    params = cfg.map_params
    state = cfg.state_spec
    t = np.arange(cfg.t_max + 1)
    cols: dict[str, Optional[np.ndarray]] = {}
    results: dict = {}
    if "exact" in cfg.paths:
        t0 = time.perf_counter()
        cols["M_exact"] = fidelity_exact(params, state, cfg.t_max).M
        results["exact_seconds"] = time.perf_counter() - t0
    if "ivr" in cfg.paths:
        t0 = time.perf_counter()
        sampling = (
            semiclassical.MonteCarlo(cfg.samples, cfg.seed)
            if cfg.sampling == "monte-carlo"
            else semiclassical.FullGrid()
        )
        curve = semiclassical.fidelity_ivr(params, state, cfg.t_max, sampling, workers=cfg.workers)
        cols["M_ivr"] = curve.M
        if curve.stderr is not None:
            cols["stderr_ivr"] = curve.stderr
        results["ivr_seconds"] = time.perf_counter() - t0
    K, D = derived["K"], derived["D"]
    lam = derived.get("lambda", cfg.lambda_ref)
    if state.kind == "position":
        sigma = regimes.position_state_sigma(params.hbar)
    else:
        sigma = state.sigma
    rp = regimes.RegimeParams.build(K, D, lam if lam else 0.0, params.n, sigma=sigma,
                                    parity=is_parity_symmetric(state))
    derived["pt_v2"] = rp.v2
    derived["lyap_sigma"] = sigma
    analytic = rp.curves(t)
    for name in ("pt", "fgr", "lyap"):
        if name in cfg.paths:
            if name == "lyap" and not lam:
                raise ComputeError("lyap path needs a Lyapunov exponent")
            cols[f"M_{name}"] = analytic[name]
    return t, cols, results


def _summaries(t, cols, cfg, derived) -> dict:
    """Fitted decay rates on the window 0.5 > M > 10 x ergodic floor."""
    out = {}
    floor = derived["ergodic_floor"]
    for name in ("M_exact", "M_ivr"):
        M = cols.get(name)
        if M is None:
            continue
        w = regimes.decay_window(M, 0.5, 10.0 * floor)
        if w.stop - w.start >= 2:
            out[f"{name}_rate"] = regimes.fit_decay_rate(t, M, w)
            out[f"{name}_window"] = [int(w.start), int(w.stop - 1)]
        tail = M[len(M) * 3 // 4 :]
        out[f"{name}_saturation"] = float(tail.mean())
    return out


def run_experiment(cfg: ExperimentConfig) -> RunManifest:
    start = time.perf_counter()
    out = cfg.resolved_out_dir()
    out.mkdir(parents=True, exist_ok=True)
    try:
        derived = derived_quantities(cfg)
        t, cols, results = compute_paths(cfg, derived)
    except (ValueError, FloatingPointError, MemoryError) as exc:
        raise ComputeError(str(exc)) from exc
    stem = cfg.preset
    csv_name = f"{stem}_fidelity.csv"
    manifest_name = f"{stem}_manifest.json"
    write_fidelity_csv(out / csv_name, t, cols)
    results.update(_summaries(t, cols, cfg, derived))
    manifest = RunManifest(
        config=cfg.as_dict() | {"out_dir": str(out)},
        derived=derived,
        files=[csv_name, manifest_name],
        wall_clock_s=time.perf_counter() - start,
        results=results,
    )
    manifest.write(out / manifest_name)
    log.info("wrote %s and %s", out / csv_name, out / manifest_name)
    return manifest


DIAGNOSTIC_KINDS = ("histogram", "pair-sep", "pair-time", "branch-count")


def run_diagnostic(kind: str, cfg: ExperimentConfig) -> RunManifest:
    if kind not in DIAGNOSTIC_KINDS:
        raise ValueError(f"unknown diagnostic {kind!r}; choose from {', '.join(DIAGNOSTIC_KINDS)}")
    start = time.perf_counter()
    out = cfg.resolved_out_dir()
    out.mkdir(parents=True, exist_ok=True)
    params = cfg.map_params
    stem = f"{cfg.preset}_{kind}"
    csv_name = f"{stem}.csv"
    results: dict = {}
    derived: dict = {"hbar": params.hbar, "t_heisenberg": params.t_heisenberg}
    try:
        if kind == "branch-count":
            curve = diagnostics.branch_count_curve(params.k, cfg.q0, cfg.branch_t, cfg.probes, cfg.workers)
            write_table_csv(out / csv_name, ["t", "log10_branches"], np.arange(cfg.branch_t + 1), curve)
            results["log10_branches"] = float(curve[-1])
            results["t"] = cfg.branch_t
        else:
            diff = classical.diffusion_constants(
                params.k, params.epsilon, seed=cfg.classical_seed, max_lag=50, workers=cfg.workers
            )
            derived.update(K=diff.K, D=diff.D)
            if kind == "histogram":
                table = semiclassical.delta_action_table(params, cfg.q0, max(cfg.hist_t, 1), workers=cfg.workers)
                h = diagnostics.action_histogram(table, cfg.hist_t, cfg.bins)
                write_table_csv(
                    out / csv_name, ["bin_left", "bin_right", "count", "gaussian_count"],
                    h.edges[:-1], h.edges[1:], h.counts, h.gaussian_counts(),
                )
                results.update(t=h.t, samples=h.samples, mean=h.mean, variance=h.variance,
                               ks_distance=h.ks_distance, bins=int(h.counts.size),
                               variance_over_2Kt=(h.variance / (2 * diff.K * h.t)) if h.t and diff.K else None)
            elif kind == "pair-sep":
                c = diagnostics.pair_variance_vs_separation(
                    params.k, params.epsilon, cfg.pair_sep_t, ensemble_size=cfg.ensemble_size,
                    seed=cfg.classical_seed, K=diff.K, workers=cfg.workers,
                )
                write_table_csv(out / csv_name, ["separation", "variance"], c.abscissa, c.variance)
                results.update(t=cfg.pair_sep_t, small_slope=c.small_slope, plateau=c.plateau,
                               four_K_t=4 * diff.K * cfg.pair_sep_t, crossover=c.crossover)
            else:
                lam, _ = classical.lyapunov_exponent(params.k, seed=cfg.classical_seed, workers=cfg.workers)
                derived["lambda"] = lam
                c = diagnostics.pair_variance_vs_time(
                    params.k, params.epsilon, cfg.separation, cfg.pair_t_max,
                    ensemble_size=cfg.ensemble_size, seed=cfg.classical_seed, workers=cfg.workers,
                )
                write_table_csv(out / csv_name, ["t", "variance"], c.abscissa, c.variance)
                results.update(separation=cfg.separation, exp_rate=c.exp_rate, two_lambda=2 * lam,
                               exp_window=c.exp_window, linear_slope=c.linear_slope, four_K=4 * diff.K,
                               linear_window=c.linear_window, log_mean_rate=c.meta.get("log_mean_rate"))
    except (ValueError, FloatingPointError, MemoryError) as exc:
        raise ComputeError(str(exc)) from exc
    manifest_name = f"{stem}_manifest.json"
    manifest = RunManifest(
        config=cfg.as_dict() | {"out_dir": str(out), "diagnostic": kind},
        derived=derived,
        files=[csv_name, manifest_name],
        wall_clock_s=time.perf_counter() - start,
        results=results,
    )
    manifest.write(out / manifest_name)
    return manifest
