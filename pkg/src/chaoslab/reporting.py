"""Delimited report emission: frozen CSV column layouts plus a JSON mirror.

Floats are written with 17 significant digits so files round-trip exactly and
fixed-seed runs are byte-identical.
"""

from __future__ import annotations

import csv
import json
import os
from dataclasses import asdict

import numpy as np

from . import __version__
from .diagnostics import DiagnosticsReport, VerdictRow, trend_summary
from .errors import InputError
from .sphere import SphereReport

_NOTES = (
    "condition 2 is certified via the empirical characteristic function "
    "distance on a fixed lattice, not a k-dimensional Prokhorov or "
    "bounded-Lipschitz metric"
)


def fmt(x: float) -> str:
    return "%.17g" % float(x)


def _jsonable(obj):
    """Replace NaN/inf with None recursively so the JSON mirror stays strict."""
    if isinstance(obj, float):
        return obj if np.isfinite(obj) else None
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    return obj


def _write_csv(path: str, header: list[str], rows: list[list]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def write_samples_csv(path: str, values: np.ndarray) -> None:
    """Long-format sample file: one row per (replicate, component), 1-based."""
    values = np.atleast_2d(np.asarray(values, dtype=float))
    rows = []
    for i in range(values.shape[0]):
        for j in range(values.shape[1]):
            rows.append([i + 1, j + 1, fmt(values[i, j])])
    _write_csv(path, ["rep", "j", "value"], rows)


def read_samples_csv(path: str) -> np.ndarray:
    """Read a long-format sample file back into an (N, k) array."""
    try:
        with open(path, "r", encoding="utf-8", newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is None or [h.strip() for h in header[:3]] != ["rep", "j", "value"]:
                raise InputError(f"sample file {path} must start with header 'rep,j,value'")
            triples = [(int(r[0]), int(r[1]), float(r[2])) for r in reader if r]
    except OSError as exc:
        raise InputError(f"cannot read sample file {path}: {exc}") from exc
    except (ValueError, IndexError) as exc:
        raise InputError(f"sample file {path} has a malformed row: {exc}") from exc
    if not triples:
        raise InputError(f"sample file {path} is empty")
    n = max(t[0] for t in triples)
    k = max(t[1] for t in triples)
    out = np.full((n, k), np.nan)
    for rep, j, val in triples:
        if rep < 1 or j < 1:
            raise InputError(f"sample file {path} uses 1-based rep and j")
        out[rep - 1, j - 1] = val
    if np.isnan(out).any():
        raise InputError(f"sample file {path} is missing (rep, j) entries")
    return out


def write_cov_csv(path: str, cov: np.ndarray) -> None:
    cov = np.atleast_2d(np.asarray(cov, dtype=float))
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        for row in cov:
            writer.writerow([fmt(v) for v in row])


def read_cov_csv(path: str) -> np.ndarray:
    try:
        with open(path, "r", encoding="utf-8", newline="") as fh:
            rows = [[float(v) for v in row] for row in csv.reader(fh) if row]
    except OSError as exc:
        raise InputError(f"cannot read covariance file {path}: {exc}") from exc
    except ValueError as exc:
        raise InputError(f"covariance file {path} has a malformed entry: {exc}") from exc
    if not rows or any(len(r) != len(rows) for r in rows):
        raise InputError(f"covariance file {path} must be a square numeric matrix")
    return np.array(rows)


def battery_verdicts(report: DiagnosticsReport) -> list[VerdictRow]:
    """Trend verdicts when the report has enough rows, else an empty list."""
    if len(report.indices) >= 4:
        return trend_summary(report)
    return []


def write_battery_report(report: DiagnosticsReport, outdir: str) -> list[str]:
    """Write the four CSV tables and the JSON mirror; returns the paths."""
    os.makedirs(outdir, exist_ok=True)
    k = report.k
    paths = []

    path = os.path.join(outdir, "report_contractions.csv")
    _write_csv(
        path,
        ["l", "j", "p", "raw_sq", "sym_sq"],
        [[r.l, r.j, r.p, fmt(r.raw_sq), fmt(r.sym_sq)] for r in report.contractions],
    )
    paths.append(path)

    path = os.path.join(outdir, "report_scalars.csv")
    _write_csv(
        path,
        ["l", "j", "order", "norm_sq", "variance", "kappa4", "malliavin_mean", "malliavin_var"],
        [
            [
                r.l,
                r.j,
                r.order,
                fmt(r.norm_sq),
                fmt(r.variance),
                fmt(r.kappa4),
                fmt(r.malliavin_mean),
                fmt(r.malliavin_var),
            ]
            for r in report.scalars
        ],
    )
    paths.append(path)

    header = ["l", "ecf", "ecf_floor"]
    header += [f"beta_{j}" for j in range(1, k + 1)] + ["beta_floor"]
    header += [f"ks_{j}" for j in range(1, k + 1)] + ["ks_floor"]
    header += [f"cov_{i}_{j}" for i in range(1, k + 1) for j in range(1, k + 1)]
    rows = []
    for r in report.distances:
        row = [r.l, fmt(r.ecf), fmt(r.ecf_floor)]
        row += [fmt(b) for b in r.beta] + [fmt(r.beta_floor)]
        row += [fmt(v) for v in r.ks] + [fmt(r.ks_floor)]
        row += [fmt(r.cov[i][j]) for i in range(k) for j in range(k)]
        rows.append(row)
    path = os.path.join(outdir, "report_by_l.csv")
    _write_csv(path, header, rows)
    paths.append(path)

    verdicts = battery_verdicts(report)
    path = os.path.join(outdir, "report_verdicts.csv")
    _write_csv(
        path,
        ["condition", "j", "column", "slope", "final", "floor", "verdict"],
        [
            [v.condition, "" if v.j is None else v.j, v.column, fmt(v.slope), fmt(v.final), fmt(v.floor), v.verdict]
            for v in verdicts
        ],
    )
    paths.append(path)

    # workers only changes wall time, never values; leaving it out keeps
    # fixed-seed reports byte-identical across pool sizes
    config = asdict(report.config)
    del config["workers"]
    doc = {
        "version": __version__,
        "notes": _NOTES,
        "family": {
            "name": report.family_name,
            "eta": report.eta,
            "variance_bound": report.variance_bound,
            "orders": list(report.orders),
            "indices": list(report.indices),
        },
        "config": config,
        "contractions": [asdict(r) for r in report.contractions],
        "scalars": [asdict(r) for r in report.scalars],
        "by_l": [asdict(r) for r in report.distances],
        "verdicts": [asdict(v) for v in verdicts],
    }
    path = os.path.join(outdir, "report.json")
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(_jsonable(doc), fh, indent=2, sort_keys=True)
        fh.write("\n")
    paths.append(path)
    return paths


def write_sphere_report(report: SphereReport, outdir: str) -> list[str]:
    os.makedirs(outdir, exist_ok=True)
    paths = []

    path = os.path.join(outdir, "sphere_rows.csv")
    _write_csv(
        path,
        ["l", "degenerate", "variance", "kappa4", "kolmogorov", "ecf"],
        [
            [r.l, int(r.degenerate), fmt(r.variance), fmt(r.kappa4), fmt(r.kolmogorov), fmt(r.ecf)]
            for r in report.rows
        ],
    )
    paths.append(path)

    path = os.path.join(outdir, "sphere_pairs.csv")
    _write_csv(
        path,
        ["l", "label_a", "label_b", "cos_angle", "exact", "estimate", "std_error"],
        [
            [r.l, p.label_a, p.label_b, fmt(p.cos_angle), fmt(p.exact), fmt(p.estimate), fmt(p.std_error)]
            for r in report.rows
            for p in r.pairs
        ],
    )
    paths.append(path)

    doc = {
        "version": __version__,
        "q": report.q,
        "ensemble": report.ensemble,
        "seed": report.seed,
        "spectrum": list(report.spectrum.values),
        "rows": [asdict(r) for r in report.rows],
    }
    path = os.path.join(outdir, "sphere.json")
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(_jsonable(doc), fh, indent=2, sort_keys=True)
        fh.write("\n")
    paths.append(path)
    return paths
