"""Emit standalone matplotlib scripts for the CSV outputs.

The generated script embeds its data, so it renders with nothing but
matplotlib installed. The core package never imports matplotlib.
"""

from __future__ import annotations

import json
import math
from pathlib import Path
from typing import Optional

from loschmidt.cli.runner import FIDELITY_COLUMNS

LABELS = {
    "M_exact": ("exact", "k-"),
    "M_ivr": ("uniform IVR", "r-"),
    "M_pt": ("Gaussian (PT)", "g--"),
    "M_fgr": ("golden rule", "b--"),
    "M_lyap": ("Lyapunov", "m--"),
}

KNOWN_HEADERS = {
    FIDELITY_COLUMNS: "fidelity",
    ("bin_left", "bin_right", "count", "gaussian_count"): "histogram",
    ("separation", "variance"): "pair-sep",
    ("t", "variance"): "pair-time",
    ("t", "log10_branches"): "branch-count",
}


class PlotError(ValueError):
    pass


def _read(csv_path: Path) -> tuple[tuple[str, ...], list[list[Optional[float]]]]:
    try:
        lines = csv_path.read_text().splitlines()
    except OSError as exc:
        raise PlotError(f"cannot read {csv_path}: {exc.strerror}") from None
    if not lines:
        raise PlotError(f"{csv_path} is empty")
    header = tuple(h.strip() for h in lines[0].split(","))
    if header not in KNOWN_HEADERS:
        raise PlotError(f"unrecognized header {','.join(header)!r}")
    rows = []
    for line in lines[1:]:
        if not line.strip():
            continue
        rows.append([float(v) if v.strip() else None for v in line.split(",")])
    if not rows:
        raise PlotError(f"{csv_path} has a header but no data rows")
    return header, rows


def _sidecar(csv_path: Path) -> dict:
    """Manifest written alongside the CSV by the runner, if present."""
    for cand in csv_path.parent.glob("*manifest.json"):
        try:
            data = json.loads(cand.read_text())
        except (OSError, ValueError):
            continue
        if csv_path.name in data.get("files", []):
            return data
    return {}


def emit_plot(
    csv_path,
    style: str = "log",
    out_path=None,
    floor: Optional[float] = None,
    lam: Optional[float] = None,
) -> Path:
    """Write ``<csv stem>_plot.py`` next to the CSV and return its path.

    For fidelity tables: every non-empty curve on a log ordinate, a dashed
    ergodic-floor line, and a slope -lambda guide when lambda is known
    (argument, else the sidecar manifest's reference value).
    """
    csv_path = Path(csv_path)
    header, rows = _read(csv_path)
    kind = KNOWN_HEADERS[header]
    meta = _sidecar(csv_path)
    derived = meta.get("derived", {})
    if floor is None:
        floor = derived.get("ergodic_floor")
    if lam is None:
        lam = derived.get("lambda_ref")
    cols = {h: [r[i] for r in rows] for i, h in enumerate(header)}
    out_path = Path(out_path) if out_path else csv_path.with_name(csv_path.stem + "_plot.py")
    png = out_path.with_suffix(".png").name

    body = [
        "import matplotlib",
        "matplotlib.use('Agg')",
        "import matplotlib.pyplot as plt",
        "",
        "fig, ax = plt.subplots(figsize=(6, 4))",
    ]
    if kind == "fidelity":
        t = cols["t"]
        curves = [h for h in header[1:6] if any(v is not None for v in cols[h])]
        if not curves:
            raise PlotError("no fidelity columns with data")
        for h in curves:
            label, fmt = LABELS[h]
            pts = [(ti, v) for ti, v in zip(t, cols[h]) if v is not None and v > 0]
            body.append(f"ax.plot({[p[0] for p in pts]!r}, {[p[1] for p in pts]!r}, {fmt!r}, label={label!r})")
        if floor:
            body.append(f"ax.axhline({floor!r}, color='gray', ls='--', label='ergodic')")
        if lam:
            start = 1.0
            t_end = min(t[-1], math.log(1e6) / lam)
            body.append(
                f"ax.plot([0, {t_end!r}], [{start!r}, {start * math.exp(-lam * t_end)!r}], "
                f"'c:', label='slope -{lam:g}')"
            )
        body += ["ax.set_yscale('log')" if style == "log" else "", "ax.set_xlabel('t')", "ax.set_ylabel('M(t)')"]
    elif kind == "histogram":
        centers = [(a + b) / 2 for a, b in zip(cols["bin_left"], cols["bin_right"])]
        width = cols["bin_right"][0] - cols["bin_left"][0]
        body += [
            f"ax.bar({centers!r}, {cols['count']!r}, width={width!r}, alpha=0.5, label='dS')",
            f"ax.plot({centers!r}, {cols['gaussian_count']!r}, 'r-', label='Gaussian fit')",
            "ax.set_xlabel('action difference')",
            "ax.set_ylabel('count')",
        ]
    elif kind == "pair-sep":
        body += [
            f"ax.loglog({cols['separation']!r}, {cols['variance']!r}, 'ko', ms=3)",
            "ax.set_xlabel(\"p'' - p'\")",
            "ax.set_ylabel('pair variance')",
        ]
    elif kind == "pair-time":
        body += [
            f"ax.plot({cols['t']!r}, {cols['variance']!r}, 'k.-')",
            "ax.set_yscale('log')" if style == "log" else "",
            "ax.set_xlabel('t')",
            "ax.set_ylabel('pair variance')",
        ]
    else:
        body += [
            f"ax.plot({cols['t']!r}, {cols['log10_branches']!r}, 'k-')",
            "ax.set_xlabel('t')",
            "ax.set_ylabel('log10 branches')",
        ]
    body += [
        "ax.legend(loc='best', fontsize=8)" if kind in ("fidelity", "histogram") else "",
        "fig.tight_layout()",
        "import os",
        f"fig.savefig(os.path.join(os.path.dirname(os.path.abspath(__file__)), {png!r}), dpi=150)",
    ]
    out_path.write_text("\n".join(line for line in body if line is not None) + "\n")
    return out_path
