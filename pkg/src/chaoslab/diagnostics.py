"""Kernel families and the per-index diagnostics battery.

A family is a table of chaos-vector specifications indexed by an integer l,
with a uniform norm floor eta and a variance bound.  The battery evaluates,
for each l, the exact columns (contraction norms, fourth cumulant, Malliavin
variance, covariance) and the Monte Carlo distance columns (characteristic
function sup distance against the exact covariance, per-coordinate
bounded-Lipschitz and Kolmogorov distances against matched Gaussians), then
classifies each column's trend as vanishing or not.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .errors import AssumptionViolation, InputError
from .kernels import SymmetricKernel, contraction_profile, make_kernel
from .metrics import EcfGrid, bl_distance_1d, ecf_distance, kolmogorov_1d
from .moments import (
    ChaosVectorSpec,
    covariance_matrix,
    fourth_cumulant,
    malliavin_variance,
    variance,
)
from .sampling import sample_batch, sample_gaussian_surrogate

_MAX_FAMILY_N = 2**12      # generator growth cap for n(l)
_MAX_FAMILY_DIM = 2**13    # absolute dim cap for file-backed families

# matched-law empirical rates for the MC floor estimates (1-D, N samples):
# E KS_N ~ 0.87/sqrt(N), E beta_N measured ~ 1.1/sqrt(N) on normal draws
_KS_RATE = 1.0
_BETA_RATE = 1.1

VANISHING = "vanishing"
NON_VANISHING = "non-vanishing"
INCONCLUSIVE = "inconclusive"


@dataclass(frozen=True)
class KernelFamily:
    """Indexed table of chaos-vector specifications with standing bounds.

    eta is a uniform lower bound on every component kernel norm (keeps the
    limiting covariance nondegenerate); variance_bound caps every component
    variance d! ||f||^2.
    """

    name: str
    eta: float
    variance_bound: float
    table: Mapping[int, ChaosVectorSpec]

    def __post_init__(self) -> None:
        object.__setattr__(self, "table", dict(sorted(self.table.items())))

    @property
    def indices(self) -> list[int]:
        return list(self.table.keys())

    def validate(self) -> None:
        """Check the standing assumptions; raises AssumptionViolation with the
        offending (l, j) on the first failure."""
        if not self.eta > 0:
            raise AssumptionViolation(f"family {self.name}: eta must be > 0, got {self.eta}")
        if not self.variance_bound > 0:
            raise AssumptionViolation(
                f"family {self.name}: variance bound must be > 0, got {self.variance_bound}"
            )
        if not self.table:
            raise AssumptionViolation(f"family {self.name}: empty index table")
        orders = None
        for l, spec in self.table.items():
            if orders is None:
                orders = spec.orders
            elif spec.orders != orders:
                raise AssumptionViolation(
                    f"family {self.name}: orders {spec.orders} at l={l} differ from {orders}"
                )
            for j, f in enumerate(spec.components, start=1):
                norm = math.sqrt(f.norm_sq())
                if norm < self.eta:
                    raise AssumptionViolation(
                        f"family {self.name}: ||f|| = {norm:.6g} < eta = {self.eta:.6g} "
                        f"at (l={l}, j={j})"
                    )
                v = variance(f)
                if v > self.variance_bound * (1 + 1e-12):
                    raise AssumptionViolation(
                        f"family {self.name}: variance {v:.6g} exceeds bound "
                        f"{self.variance_bound:.6g} at (l={l}, j={j})"
                    )

    @property
    def orders(self) -> tuple[int, ...]:
        return next(iter(self.table.values())).orders

    @property
    def k(self) -> int:
        return len(self.orders)


def _diag_kernel(order: int, n: int) -> SymmetricKernel:
    scale = n ** -0.5
    return make_kernel(order, n, {(i,) * order: scale for i in range(1, n + 1)})


# cos/sin of l*pi/2 from an integer table so the covariance cycle is exact
_COS_TABLE = (1.0, 0.0, -1.0, 0.0)
_SIN_TABLE = (0.0, 1.0, 0.0, -1.0)

BUILTIN_FAMILIES = ("diag2", "diag3", "fixed_chisq", "oscillating_pair")


def builtin_family(name: str, lmin: int = 1, lmax: int = 12) -> KernelFamily:
    """Construct one of the built-in families over l = lmin..lmax.

    diag2 / diag3: single normalized diagonal kernel of order 2 / 3 on
    n = 2^l basis elements; fourth cumulant 48/n resp. 3240/n, so the
    Gaussian approximation sharpens as l grows.  fixed_chisq: the constant
    kernel e1 x e1 (a centered chi-square that never converges).
    oscillating_pair: two order-2 components on 2n elements whose exact
    off-diagonal covariance 2 cos(l pi/2) cycles through {2, 0, -2, 0} while
    each marginal still converges.
    """
    if name not in BUILTIN_FAMILIES:
        raise InputError(f"unknown builtin family {name!r}; choose from {BUILTIN_FAMILIES}")
    if lmin < 0 or lmax < lmin:
        raise InputError(f"bad index range lmin={lmin}, lmax={lmax}")
    if name != "fixed_chisq" and 2**lmax > _MAX_FAMILY_N:
        raise InputError(f"lmax={lmax} exceeds the n(l) <= {_MAX_FAMILY_N} growth cap")

    table: dict[int, ChaosVectorSpec] = {}
    for l in range(lmin, lmax + 1):
        if name == "fixed_chisq":
            spec = ChaosVectorSpec((make_kernel(2, 1, {(1, 1): 1.0}),))
        elif name == "diag2":
            spec = ChaosVectorSpec((_diag_kernel(2, 2**l),))
        elif name == "diag3":
            spec = ChaosVectorSpec((_diag_kernel(3, 2**l),))
        else:
            n = 2**l
            dim = 2 * n
            scale = n ** -0.5
            c, s = _COS_TABLE[l % 4], _SIN_TABLE[l % 4]
            first = {(i, i): scale for i in range(1, n + 1)}
            second: dict[tuple[int, int], float] = {}
            if c != 0.0:
                second.update({(i, i): c * scale for i in range(1, n + 1)})
            if s != 0.0:
                second.update({(n + i, n + i): s * scale for i in range(1, n + 1)})
            spec = ChaosVectorSpec(
                (make_kernel(2, dim, first), make_kernel(2, dim, second))
            )
        table[l] = spec
    fam = KernelFamily(
        name=name,
        eta=1.0,
        variance_bound=6.0 if name == "diag3" else 2.0,
        table=table,
    )
    fam.validate()
    return fam


def save_family(family: KernelFamily, path: str) -> None:
    """Write the family in the interchange JSON format."""
    specs = []
    for l, spec in family.table.items():
        comps = []
        for f in spec.components:
            entries = [
                {"idx": list(idx), "val": val} for idx, val in sorted(f.coeffs.items())
            ]
            comps.append({"order": f.order, "entries": entries})
        specs.append({"l": l, "dim": spec.dim, "components": comps})
    doc = {
        "name": family.name,
        "eta": family.eta,
        "variance_bound": family.variance_bound,
        "specs": specs,
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_family(path: str) -> KernelFamily:
    """Read a family from the interchange JSON format and validate it.

    Structural problems (bad JSON, missing keys, unsorted or duplicate
    multi-indices) raise InputError; violated standing assumptions raise
    AssumptionViolation.
    """
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise InputError(f"cannot read family file {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise InputError(f"family file {path} is not valid JSON: {exc}") from exc

    try:
        name = str(doc["name"])
        eta = float(doc["eta"])
        vbound = float(doc["variance_bound"])
        table: dict[int, ChaosVectorSpec] = {}
        for entry in doc["specs"]:
            l = int(entry["l"])
            dim = int(entry["dim"])
            if dim > _MAX_FAMILY_DIM:
                raise InputError(f"dim {dim} at l={l} exceeds the cap {_MAX_FAMILY_DIM}")
            if l in table:
                raise InputError(f"duplicate index l={l}")
            comps = []
            for comp in entry["components"]:
                order = int(comp["order"])
                coeffs: dict[tuple[int, ...], float] = {}
                for item in comp["entries"]:
                    idx = tuple(int(i) for i in item["idx"])
                    if idx in coeffs:
                        raise InputError(f"duplicate multi-index {idx} at l={l}")
                    coeffs[idx] = float(item["val"])
                try:
                    # coeffs are stored tensor values at sorted indices, so no
                    # input symmetrization pass here
                    comps.append(SymmetricKernel(order, dim, coeffs))
                except ValueError as exc:
                    raise InputError(f"bad kernel at l={l}: {exc}") from exc
            table[l] = ChaosVectorSpec(tuple(comps))
    except InputError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError(f"family file {path} has a malformed field: {exc}") from exc

    fam = KernelFamily(name=name, eta=eta, variance_bound=vbound, table=table)
    fam.validate()
    return fam


@dataclass(frozen=True)
class BatteryConfig:
    mc_samples: int = 100_000
    seed: int = 42
    grid: EcfGrid = field(default_factory=EcfGrid)
    beta_max_support: int = 4096
    workers: int = 1
    exact_tol: float = 1e-2          # exact columns must decay to tol * peak
    slope_tol: float = -0.2          # log-log slope threshold
    floor_multiplier: float = 3.0    # MC floors are multiplier * rate estimate


@dataclass(frozen=True)
class ContractionRow:
    l: int
    j: int
    p: int
    raw_sq: float
    sym_sq: float


@dataclass(frozen=True)
class ScalarRow:
    l: int
    j: int
    order: int
    norm_sq: float
    variance: float
    kappa4: float
    malliavin_mean: float
    malliavin_var: float


@dataclass(frozen=True)
class DistanceRow:
    l: int
    ecf: float
    ecf_floor: float
    beta: tuple[float, ...]
    beta_floor: float
    ks: tuple[float, ...]
    ks_floor: float
    cov: tuple[tuple[float, ...], ...]


@dataclass(frozen=True)
class VerdictRow:
    condition: int
    j: int | None          # None for the joint condition 2
    column: str
    slope: float
    final: float
    floor: float
    verdict: str


@dataclass(frozen=True)
class DiagnosticsReport:
    family_name: str
    eta: float
    variance_bound: float
    orders: tuple[int, ...]
    indices: tuple[int, ...]
    config: BatteryConfig
    contractions: tuple[ContractionRow, ...]
    scalars: tuple[ScalarRow, ...]
    distances: tuple[DistanceRow, ...]

    @property
    def k(self) -> int:
        return len(self.orders)


def run_battery(family: KernelFamily, config: BatteryConfig | None = None) -> DiagnosticsReport:
    """Evaluate every diagnostic column for every family index.

    Monte Carlo substreams are keyed by (seed, l), so adding or removing
    indices never perturbs the rows of the others, and the worker count only
    changes wall time, never values.
    """
    config = config or BatteryConfig()
    family.validate()

    contractions: list[ContractionRow] = []
    scalars: list[ScalarRow] = []
    distances: list[DistanceRow] = []

    n_grid_nodes = None
    for l, spec in family.table.items():
        cov = covariance_matrix(spec)
        for j, f in enumerate(spec.components, start=1):
            if f.order >= 2:
                for p, (raw_sq, sym_sq) in enumerate(contraction_profile(f), start=1):
                    contractions.append(ContractionRow(l, j, p, raw_sq, sym_sq))
            mal_mean, mal_var = malliavin_variance(f)
            scalars.append(
                ScalarRow(
                    l=l,
                    j=j,
                    order=f.order,
                    norm_sq=f.norm_sq(),
                    variance=variance(f),
                    kappa4=fourth_cumulant(f),
                    malliavin_mean=mal_mean,
                    malliavin_var=mal_var,
                )
            )

        batch = sample_batch(
            spec,
            config.mc_samples,
            config.seed,
            workers=config.workers,
            stream=(l,),
        )
        if n_grid_nodes is None:
            n_grid_nodes = config.grid.nodes(spec.k).shape[0]
        ecf = ecf_distance(batch.values, cov, config.grid)
        surrogate = sample_gaussian_surrogate(
            cov, config.mc_samples, config.seed, workers=config.workers, stream=(l,)
        )
        betas = tuple(
            bl_distance_1d(
                batch.values[:, j], surrogate[:, j], max_support=config.beta_max_support
            )
            for j in range(spec.k)
        )
        kss = tuple(
            kolmogorov_1d(batch.values[:, j], cov[j, j]) for j in range(spec.k)
        )
        rootn = math.sqrt(config.mc_samples)
        distances.append(
            DistanceRow(
                l=l,
                ecf=ecf,
                ecf_floor=math.sqrt(math.log(max(n_grid_nodes, 3)) / config.mc_samples),
                beta=betas,
                beta_floor=_BETA_RATE / rootn,
                ks=kss,
                ks_floor=_KS_RATE / rootn,
                cov=tuple(tuple(row) for row in cov),
            )
        )

    return DiagnosticsReport(
        family_name=family.name,
        eta=family.eta,
        variance_bound=family.variance_bound,
        orders=family.orders,
        indices=tuple(family.table.keys()),
        config=config,
        contractions=tuple(contractions),
        scalars=tuple(scalars),
        distances=tuple(distances),
    )


def _log_slope(values: np.ndarray) -> float:
    if values.size < 2:
        return 0.0
    logpos = np.log(np.arange(1, values.size + 1, dtype=float))
    logval = np.log(np.clip(values, 1e-300, None))
    return float(np.polyfit(logpos, logval, 1)[0])


def _classify_exact(
    values: np.ndarray, tol: float, slope_tol: float
) -> tuple[float, float, float, str]:
    """Classify a deterministic column by its decay relative to its own peak.

    A column counts as vanishing when it has dropped below tol times its peak
    with a clearly negative log-log slope (or never rose above tol at all).
    The relative scale is what makes families with different absolute
    magnitudes, such as second and third order diagonal kernels, classify
    consistently over the same index range.
    """
    slope = _log_slope(values)
    final = float(values[-1])
    scale = float(values.max(initial=0.0))
    if scale <= tol:
        return slope, final, tol, VANISHING
    floor = tol * scale
    if final <= floor and slope <= slope_tol:
        verdict = VANISHING
    elif final > floor and slope > slope_tol:
        verdict = NON_VANISHING
    else:
        verdict = INCONCLUSIVE
    return slope, final, floor, verdict


def _classify_mc(
    values: np.ndarray, floor: float, slope_tol: float
) -> tuple[float, float, str]:
    """Classify a Monte Carlo column against its estimation-noise floor.

    A final value at or below the floor is indistinguishable from zero, so it
    counts as vanishing no matter the fitted slope (columns that converge
    early sit flat on the floor afterwards).
    """
    slope = _log_slope(values)
    final = float(values[-1])
    if final <= floor:
        verdict = VANISHING
    elif slope > slope_tol:
        verdict = NON_VANISHING
    else:
        verdict = INCONCLUSIVE
    return slope, final, verdict


def _combine(a: str, b: str) -> str:
    if a == b:
        return a
    if NON_VANISHING in (a, b):
        return NON_VANISHING
    return INCONCLUSIVE


def trend_summary(report: DiagnosticsReport) -> list[VerdictRow]:
    """Per-condition trend verdicts.

    Conditions 1 (contraction norms), 3 (fourth cumulant) and 5 (Malliavin
    variance) classify the exact columns against the absolute tolerance;
    condition 2 (joint CF distance) and 4 (per-coordinate bounded-Lipschitz
    and Kolmogorov proxies) classify the Monte Carlo columns against their
    estimated noise floors.  Requires at least 4 indices.
    """
    ls = report.indices
    if len(ls) < 4:
        raise ValueError(f"trend detection needs >= 4 indices, got {len(ls)}")
    cfg = report.config
    out: list[VerdictRow] = []

    for j in range(1, report.k + 1):
        if report.orders[j - 1] == 1:
            raw_by_l = np.zeros(len(ls))
        else:
            raw_by_l = np.array(
                [
                    max(r.raw_sq for r in report.contractions if r.l == l and r.j == j)
                    for l in ls
                ]
            )
        slope, final, floor, verdict = _classify_exact(raw_by_l, cfg.exact_tol, cfg.slope_tol)
        out.append(VerdictRow(1, j, "max_contraction_sq", slope, final, floor, verdict))

    ecf = np.array([r.ecf for r in report.distances])
    floor = cfg.floor_multiplier * report.distances[-1].ecf_floor
    slope, final, verdict = _classify_mc(ecf, floor, cfg.slope_tol)
    out.append(VerdictRow(2, None, "ecf", slope, final, floor, verdict))

    for j in range(1, report.k + 1):
        k4 = np.array([abs(r.kappa4) for r in report.scalars if r.j == j])
        slope, final, floor, verdict = _classify_exact(k4, cfg.exact_tol, cfg.slope_tol)
        out.append(VerdictRow(3, j, "kappa4", slope, final, floor, verdict))

    for j in range(1, report.k + 1):
        beta = np.array([r.beta[j - 1] for r in report.distances])
        bfloor = cfg.floor_multiplier * report.distances[-1].beta_floor
        bs, bf, bv = _classify_mc(beta, bfloor, cfg.slope_tol)
        ks = np.array([r.ks[j - 1] for r in report.distances])
        kfloor = cfg.floor_multiplier * report.distances[-1].ks_floor
        ss, sf, sv = _classify_mc(ks, kfloor, cfg.slope_tol)
        verdict = _combine(bv, sv)
        # report the half that drove the verdict; both columns stay in distances
        use_beta = bv == verdict
        out.append(
            VerdictRow(
                4,
                j,
                "beta+ks",
                bs if use_beta else ss,
                bf if use_beta else sf,
                bfloor if use_beta else kfloor,
                verdict,
            )
        )

    for j in range(1, report.k + 1):
        mal = np.array([r.malliavin_var for r in report.scalars if r.j == j])
        slope, final, floor, verdict = _classify_exact(mal, cfg.exact_tol, cfg.slope_tol)
        out.append(VerdictRow(5, j, "malliavin_var", slope, final, floor, verdict))

    return out
