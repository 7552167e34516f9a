"""Serialization: series and draws CSVs, grid CSVs, JSON reports, manifests.

All numeric output goes through a 17-significant-digit format so every
written value reloads to the identical double.  Draws CSVs carry one row
per retained iteration with labelled columns and reload into a ChainOutput
whose summaries match the originals bit for bit; run diagnostics that are
not per-draw (acceptance rates, proposal precisions, seed) live in the
manifest instead.
"""

from __future__ import annotations

import json
import math
import platform
from pathlib import Path

import numpy as np

from .sampler import ChainOutput

FLOAT_FMT = "{:.17g}"


def fmt(x: float) -> str:
    return FLOAT_FMT.format(float(x))


def _round17(x: float) -> float:
    return float(fmt(x))


def jsonify(obj):
    """Convert to plain JSON types, routing floats through the 17-digit format."""
    if isinstance(obj, dict):
        return {str(k): jsonify(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonify(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [jsonify(v) for v in obj.tolist()]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return _round17(x) if math.isfinite(x) else str(x)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    return obj


def write_json(path: str | Path, obj) -> None:
    Path(path).write_text(json.dumps(jsonify(obj), indent=2) + "\n")


def read_json(path: str | Path):
    return json.loads(Path(path).read_text())


def write_series_csv(path: str | Path, values: np.ndarray, header: str = "y") -> None:
    values = np.asarray(values, dtype=float)
    lines = [header] if header else []
    lines.extend(fmt(v) for v in values)
    Path(path).write_text("\n".join(lines) + "\n")


def read_series_csv(path: str | Path) -> np.ndarray:
    """Load a one-column CSV; a single non-numeric first line is a header."""
    lines = [ln.strip() for ln in Path(path).read_text().splitlines()]
    lines = [ln for ln in lines if ln]
    if not lines:
        raise ValueError(f"{path} is empty")
    start = 0
    try:
        float(lines[0])
    except ValueError:
        start = 1
    if start == len(lines):
        raise ValueError(f"{path} has a header but no data")
    try:
        return np.array([float(ln) for ln in lines[start:]])
    except ValueError as exc:
        raise ValueError(f"{path}: non-numeric entry in series column: {exc}") from None


def draws_header(g: int, width: int) -> list[str]:
    cols = ["iteration"]
    for k in range(1, g + 1):
        cols += [f"pi_{k}", f"shift_{k}", f"mean_{k}", f"sigma_{k}", f"order_{k}"]
        cols += [f"ar_{k}_{i}" for i in range(1, width + 1)]
    cols += ["lambda", "loglik", "logpost"]
    return cols


def write_draws_csv(path: str | Path, output: ChainOutput) -> None:
    g = output.g
    width = output.ar.shape[2]
    header = draws_header(g, width)
    lines = [",".join(header)]
    for i in range(output.n_draws):
        row = [str(i)]
        for k in range(g):
            row += [
                fmt(output.weights[i, k]),
                fmt(output.shifts[i, k]),
                fmt(output.means[i, k]),
                fmt(output.scales[i, k]),
                str(int(output.orders[i, k])),
            ]
            row += [fmt(output.ar[i, k, j]) for j in range(width)]
        row += [fmt(output.lam[i]), fmt(output.log_likelihoods[i]), fmt(output.log_posteriors[i])]
        lines.append(",".join(row))
    Path(path).write_text("\n".join(lines) + "\n")


def read_draws_csv(path: str | Path) -> ChainOutput:
    """Reload a draws CSV into a ChainOutput carrying the draws only.

    Run diagnostics that are not stored per draw come back as None; the
    conditioning length is re-derived as the widest per-draw order.
    """
    text = Path(path).read_text().splitlines()
    if len(text) < 2:
        raise ValueError(f"{path} holds no draws")
    header = text[0].split(",")
    g = sum(1 for name in header if name.startswith("pi_"))
    if g < 1:
        raise ValueError(f"{path} has no pi_k columns; not a draws file")
    width = sum(1 for name in header if name.startswith("ar_1_"))
    expected = draws_header(g, width)
    if header != expected:
        raise ValueError(f"{path} column layout does not match a draws file for g={g}")
    data = np.array([[float(x) for x in line.split(",")] for line in text[1:]])
    n = data.shape[0]
    idx = {name: j for j, name in enumerate(header)}

    def block(prefix):
        return np.column_stack([data[:, idx[f"{prefix}_{k}"]] for k in range(1, g + 1)])

    weights = block("pi")
    shifts = block("shift")
    means = block("mean")
    scales = block("sigma")
    orders = block("order").astype(np.int64)
    ar = np.zeros((n, g, width))
    for k in range(1, g + 1):
        for j in range(1, width + 1):
            ar[:, k - 1, j - 1] = data[:, idx[f"ar_{k}_{j}"]]
    return ChainOutput(
        g=g,
        cond=int(orders.max()),
        weights=weights,
        shifts=shifts,
        means=means,
        scales=scales,
        ar=ar,
        orders=orders,
        lam=data[:, idx["lambda"]],
        log_likelihoods=data[:, idx["loglik"]],
        log_posteriors=data[:, idx["logpost"]],
        acceptance=None,
        stability_rejections=0,
        gamma=None,
        seed=None,
        burn_in=0,
        fixed_shift=bool(np.all(shifts == 0.0)),
    )


def write_grid_csv(path: str | Path, abscissa: np.ndarray, columns: dict[str, np.ndarray]) -> None:
    """Write a grid CSV: first column y, then one named density column each."""
    abscissa = np.asarray(abscissa, dtype=float)
    names = list(columns)
    for name in names:
        if np.asarray(columns[name]).shape != abscissa.shape:
            raise ValueError(f"column {name!r} does not match the abscissa length")
    lines = [",".join(["y"] + names)]
    for i in range(abscissa.size):
        row = [fmt(abscissa[i])] + [fmt(np.asarray(columns[name])[i]) for name in names]
        lines.append(",".join(row))
    Path(path).write_text("\n".join(lines) + "\n")


def read_csv_columns(path: str | Path) -> dict[str, np.ndarray]:
    """Load any of the package's labelled CSVs into name -> column arrays."""
    lines = Path(path).read_text().splitlines()
    header = lines[0].split(",")
    data = np.array([[float(x) for x in line.split(",")] for line in lines[1:]])
    return {name: data[:, j].copy() for j, name in enumerate(header)}


def summaries_payload(summaries) -> dict:
    return {
        s.name: {
            "mean": s.mean,
            "standard_error": s.standard_error,
            "hpdr_90": list(s.hpdr_90),
            "hd_value": s.hd_value,
        }
        for s in summaries
    }


def evidence_payload(results, best_g: int | None = None) -> dict:
    rows = []
    for r in results:
        rows.append(
            {
                "g": r.g,
                "orders": list(r.orders),
                "preference": r.preference,
                "log_marginal": r.log_marginal,
                "log_p_g": r.log_p_g,
                "parts": dict(r.parts),
            }
        )
    payload = {"models": rows}
    if best_g is not None:
        payload["best_g"] = best_g
    return payload


def _versions() -> dict[str, str]:
    import scipy

    from . import __version__

    return {
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "mixar": __version__,
    }


def write_manifest(
    path: str | Path,
    command: str,
    config_echo: dict,
    seed: int,
    wall_clock_seconds: float,
    outputs: list[str],
    diagnostics: dict | None = None,
) -> None:
    """Record everything needed to reproduce the run bit for bit."""
    manifest = {
        "command": command,
        "config": config_echo,
        "seed": seed,
        "versions": _versions(),
        "wall_clock_seconds": wall_clock_seconds,
        "outputs": sorted(outputs),
        "diagnostics": diagnostics or {},
    }
    write_json(path, manifest)
