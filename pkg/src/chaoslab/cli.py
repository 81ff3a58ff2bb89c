"""Command-line front end.

Exit codes: 0 success, 1 input or parse problem, 2 violated standing
assumption.  The default seed is 42, overridable through the CHAOSLAB_SEED
environment variable; an explicit --seed flag beats both.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys

import numpy as np

from . import __version__
from .diagnostics import (
    BUILTIN_FAMILIES,
    BatteryConfig,
    builtin_family,
    load_family,
    run_battery,
)
from .errors import AssumptionViolation, InputError
from .figures import battery_figures, sphere_figures
from .metrics import EcfGrid, bl_distance_1d, ecf_distance, kolmogorov_1d
from .reporting import (
    fmt,
    read_cov_csv,
    read_samples_csv,
    write_battery_report,
    write_samples_csv,
    write_sphere_report,
)
from .sampling import sample_batch
from .sphere import (
    SphereGrid,
    flat_spectrum,
    load_spectrum,
    simulate_field,
    sphere_clt_diagnostics,
)

_DEFAULT_SEED = 42
_DEFAULT_SAMPLES = 100_000


class _Parser(argparse.ArgumentParser):
    """argparse that reports usage problems as InputError (exit 1)."""

    def error(self, message):
        raise InputError(message)


def _resolve_seed(value: int | None) -> int:
    if value is None:
        raw = os.environ.get("CHAOSLAB_SEED")
        if raw is None:
            value = _DEFAULT_SEED
        else:
            try:
                value = int(raw)
            except ValueError as exc:
                raise InputError(f"CHAOSLAB_SEED must be an integer, got {raw!r}") from exc
    if not 0 <= value < 2**64:
        raise InputError(f"seed must be a 64-bit unsigned integer, got {value}")
    return value


def _positive(kind, name: str):
    def convert(text: str):
        try:
            value = kind(text)
        except ValueError as exc:
            raise InputError(f"{name} must be a {kind.__name__}, got {text!r}") from exc
        if value <= 0:
            raise InputError(f"{name} must be positive, got {value}")
        return value

    return convert


def _int_list(text: str) -> tuple[int, ...]:
    try:
        values = tuple(int(part) for part in text.split(",") if part.strip() != "")
    except ValueError as exc:
        raise InputError(f"expected a comma-separated integer list, got {text!r}") from exc
    if not values:
        raise InputError("empty degree list")
    return values


def _load_any_family(args):
    if (args.family is None) == (args.builtin is None):
        raise InputError("give exactly one of --builtin or --family")
    if args.family is not None:
        if args.lmin is not None or args.lmax is not None:
            raise InputError("--lmin/--lmax apply only to --builtin families")
        return load_family(args.family)
    lmin = 1 if args.lmin is None else args.lmin
    lmax = 12 if args.lmax is None else args.lmax
    return builtin_family(args.builtin, lmin, lmax)


def _add_family_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--builtin", choices=BUILTIN_FAMILIES, help="built-in family name")
    p.add_argument("--family", help="family JSON file")
    p.add_argument("--lmin", type=int, help="first index (builtin only)")
    p.add_argument("--lmax", type=int, help="last index (builtin only)")


def _add_seed_flag(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, help="RNG seed (default 42, env CHAOSLAB_SEED)")


def _spectrum_from(args):
    if (args.spectrum is None) == (args.flat is None):
        raise InputError("give exactly one of --spectrum or --flat")
    if args.spectrum is not None:
        return load_spectrum(args.spectrum)
    return flat_spectrum(args.flat)


def build_parser() -> _Parser:
    parser = _Parser(prog="chaoslab", description=__doc__)
    parser.add_argument("--version", action="version", version=f"chaoslab {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("diagnose", help="run the condition battery over a kernel family")
    _add_family_flags(p)
    _add_seed_flag(p)
    p.add_argument("-N", "--samples", type=_positive(int, "N"), default=_DEFAULT_SAMPLES)
    p.add_argument("-T", "--ecf-half-width", type=_positive(float, "T"), default=4.0)
    p.add_argument("-r", "--ecf-resolution", type=_positive(int, "r"), default=81)
    p.add_argument("--exact-tol", type=_positive(float, "exact-tol"), default=1e-2)
    p.add_argument("--slope-tol", type=float, default=-0.2)
    p.add_argument("--floor-multiplier", type=_positive(float, "floor-multiplier"), default=3.0)
    p.add_argument("--workers", type=_positive(int, "workers"), default=1)
    p.add_argument("--out", required=True, help="output directory for report files")
    p.add_argument("--no-figures", action="store_true", help="skip figure rendering")

    p = sub.add_parser("sample", help="draw chaos-vector replicates to a CSV")
    _add_family_flags(p)
    _add_seed_flag(p)
    p.add_argument("--l", type=int, required=True, help="family index to sample")
    p.add_argument("-N", "--samples", type=_positive(int, "N"), default=_DEFAULT_SAMPLES)
    p.add_argument("--workers", type=_positive(int, "workers"), default=1)
    p.add_argument("--out", required=True, help="output CSV path")

    p = sub.add_parser("distance", help="compute a probability distance between files")
    p.add_argument("kind", choices=("ecf", "bl", "ks"))
    p.add_argument("samples_a", help="sample CSV (rep,j,value)")
    p.add_argument("samples_b", nargs="?", help="second sample CSV (bl only)")
    p.add_argument("--cov", help="covariance CSV (ecf and ks)")
    p.add_argument("--component", type=_positive(int, "component"), default=1,
                   help="1-based component for bl/ks")
    p.add_argument("-T", "--ecf-half-width", type=_positive(float, "T"), default=4.0)
    p.add_argument("-r", "--ecf-resolution", type=_positive(int, "r"), default=81)

    p = sub.add_parser("sphere", help="spherical-field experiments")
    ssub = p.add_subparsers(dest="sphere_command", required=True)

    ps = ssub.add_parser("simulate", help="simulate the field and report its variance")
    ps.add_argument("--spectrum", help="l,C_l CSV file")
    ps.add_argument("--flat", type=_positive(int, "flat L_max"), help="flat spectrum up to L_max")
    _add_seed_flag(ps)
    ps.add_argument("--ensemble", type=_positive(int, "ensemble"), default=4000)
    ps.add_argument("--out", required=True, help="output directory")

    pd = ssub.add_parser("diagnose", help="Gaussian-approximation diagnostics per degree")
    pd.add_argument("--spectrum", help="l,C_l CSV file")
    pd.add_argument("--flat", type=_positive(int, "flat L_max"), help="flat spectrum up to L_max")
    pd.add_argument("--q", type=int, default=2, help="Hermite order (>= 2)")
    pd.add_argument("--ls", type=_int_list, required=True, help="comma-separated degrees")
    _add_seed_flag(pd)
    pd.add_argument("--ensemble", type=_positive(int, "ensemble"), default=4000)
    pd.add_argument("--out", required=True, help="output directory")
    pd.add_argument("--no-figures", action="store_true", help="skip figure rendering")

    return parser


def cmd_diagnose(args) -> int:
    family = _load_any_family(args)
    if len(family.indices) < 4:
        raise InputError(
            f"trend detection needs >= 4 family indices, got {len(family.indices)}"
        )
    config = BatteryConfig(
        mc_samples=args.samples,
        seed=_resolve_seed(args.seed),
        grid=EcfGrid(half_width=args.ecf_half_width, points_per_axis=args.ecf_resolution),
        workers=args.workers,
        exact_tol=args.exact_tol,
        slope_tol=args.slope_tol,
        floor_multiplier=args.floor_multiplier,
    )
    report = run_battery(family, config)
    paths = write_battery_report(report, args.out)
    if not args.no_figures:
        paths += battery_figures(report, args.out)
    for path in paths:
        print(path)
    return 0


def cmd_sample(args) -> int:
    family = _load_any_family(args)
    if args.l not in family.table:
        raise InputError(f"index l={args.l} not in family {family.name}")
    spec = family.table[args.l]
    batch = sample_batch(
        spec,
        args.samples,
        _resolve_seed(args.seed),
        workers=args.workers,
        stream=(args.l,),
    )
    outdir = os.path.dirname(args.out)
    if outdir:
        os.makedirs(outdir, exist_ok=True)
    write_samples_csv(args.out, batch.values)
    print(args.out)
    return 0


def cmd_distance(args) -> int:
    a = read_samples_csv(args.samples_a)
    if args.kind == "ecf":
        if args.cov is None:
            raise InputError("kind=ecf needs --cov")
        cov = read_cov_csv(args.cov)
        grid = EcfGrid(half_width=args.ecf_half_width, points_per_axis=args.ecf_resolution)
        value = ecf_distance(a, cov, grid)
    elif args.kind == "bl":
        if args.samples_b is None:
            raise InputError("kind=bl needs a second sample file")
        b = read_samples_csv(args.samples_b)
        j = args.component
        if j > a.shape[1] or j > b.shape[1]:
            raise InputError(f"component {j} out of range")
        value = bl_distance_1d(a[:, j - 1], b[:, j - 1])
    else:
        if args.cov is None:
            raise InputError("kind=ks needs --cov with the target variance")
        cov = read_cov_csv(args.cov)
        j = args.component
        if j > a.shape[1] or j > cov.shape[0]:
            raise InputError(f"component {j} out of range")
        value = kolmogorov_1d(a[:, j - 1], cov[j - 1, j - 1])
    print(fmt(value))
    return 0


def cmd_sphere_simulate(args) -> int:
    spectrum = _spectrum_from(args).normalized()
    grid = SphereGrid.for_band_limit(spectrum.lmax)
    field = simulate_field(spectrum, grid, args.ensemble, _resolve_seed(args.seed))
    node_var = field.values.var(axis=0, ddof=1)
    quad = (field.values**2 * grid.weights).sum(axis=1)
    parseval = (field.coeffs**2).sum(axis=1)
    rel = np.max(np.abs(quad - parseval) / np.maximum(parseval, 1e-300))

    os.makedirs(args.out, exist_ok=True)
    var_path = os.path.join(args.out, "field_variance.csv")
    with open(var_path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["theta", "phi", "var_hat"])
        for th, ph, v in zip(grid.theta, grid.phi, node_var):
            writer.writerow([fmt(th), fmt(ph), fmt(v)])

    doc = {
        "version": __version__,
        "seed": _resolve_seed(args.seed),
        "ensemble": args.ensemble,
        "grid": {"n_theta": grid.n_theta, "n_phi": grid.n_phi},
        "spectrum": list(spectrum.values),
        "variance_mean": float(node_var.mean()),
        "variance_min": float(node_var.min()),
        "variance_max": float(node_var.max()),
        "parseval_max_rel_err": float(rel),
    }
    json_path = os.path.join(args.out, "sphere_simulate.json")
    with open(json_path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(var_path)
    print(json_path)
    return 0


def cmd_sphere_diagnose(args) -> int:
    spectrum = _spectrum_from(args)
    report = sphere_clt_diagnostics(
        spectrum,
        q=args.q,
        ls=args.ls,
        ensemble=args.ensemble,
        seed=_resolve_seed(args.seed),
    )
    paths = write_sphere_report(report, args.out)
    if not args.no_figures:
        paths += sphere_figures(report, args.out)
    for path in paths:
        print(path)
    return 0


def _run(argv) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "diagnose":
        return cmd_diagnose(args)
    if args.command == "sample":
        return cmd_sample(args)
    if args.command == "distance":
        return cmd_distance(args)
    if args.sphere_command == "simulate":
        return cmd_sphere_simulate(args)
    return cmd_sphere_diagnose(args)


def main(argv=None) -> int:
    try:
        return _run(argv)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except AssumptionViolation as exc:
        print(f"assumption violation: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
