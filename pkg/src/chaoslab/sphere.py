"""Isotropic Gaussian fields on the 2-sphere and Hermite subordination.

Simulates a band-limited isotropic Gaussian field from a power spectrum in a
real spherical-harmonic basis, applies a pointwise Hermite polynomial, and
extracts normalized frequency components whose covariance across points is the
Legendre polynomial of the angle.  The diagnostics report checks that identity
and the marginal Gaussian approximation over an ensemble.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace
from functools import lru_cache

import numpy as np
from numpy.random import Generator, Philox, SeedSequence
from scipy.special import gammaln, lpmv

from .errors import AssumptionViolation, InputError
from .metrics import ecf_distance, kolmogorov_1d
from .sampling import hermite

_SPHERE_STREAM = 3       # RNG domain tag, disjoint from the chaos sampler tags
_COEFF_CHUNK = 4096
_DEGENERATE_VAR = 1e-12


@dataclass(frozen=True)
class PowerSpectrum:
    """Angular power spectrum C_l for l = 0..L_max."""

    values: tuple[float, ...]

    def __post_init__(self) -> None:
        vals = tuple(float(v) for v in self.values)
        if len(vals) < 2:
            raise InputError("spectrum needs L_max >= 1, i.e. at least C_0 and C_1")
        if any(v < 0 for v in vals):
            raise InputError("power spectrum entries must be >= 0")
        if not any(v > 0 for v in vals):
            raise InputError("power spectrum must have at least one C_l > 0")
        object.__setattr__(self, "values", vals)

    @property
    def lmax(self) -> int:
        return len(self.values) - 1

    def variance(self) -> float:
        """Pointwise field variance sum_l (2l+1) C_l / (4 pi)."""
        return math.fsum(
            (2 * l + 1) * c / (4 * math.pi) for l, c in enumerate(self.values)
        )

    def normalized(self) -> "PowerSpectrum":
        return PowerSpectrum(tuple(v / self.variance() for v in self.values))


def flat_spectrum(lmax: int, value: float = 1.0) -> PowerSpectrum:
    if lmax < 1:
        raise InputError("flat spectrum needs lmax >= 1")
    return PowerSpectrum((value,) * (lmax + 1))


def load_spectrum(path: str) -> PowerSpectrum:
    """Read an `l,C_l` CSV; rows may appear in any order but must cover 0..L_max."""
    entries: dict[int, float] = {}
    try:
        with open(path, "r", encoding="utf-8", newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is None or [h.strip() for h in header[:2]] != ["l", "C_l"]:
                raise InputError(f"spectrum file {path} must start with header 'l,C_l'")
            for row in reader:
                if not row:
                    continue
                l = int(row[0])
                if l < 0 or l in entries:
                    raise InputError(f"bad or duplicate degree l={row[0]} in {path}")
                entries[l] = float(row[1])
    except OSError as exc:
        raise InputError(f"cannot read spectrum file {path}: {exc}") from exc
    except (ValueError, IndexError) as exc:
        raise InputError(f"spectrum file {path} has a malformed row: {exc}") from exc
    if not entries or sorted(entries) != list(range(max(entries) + 1)):
        raise InputError(f"spectrum file {path} must cover every l = 0..L_max")
    return PowerSpectrum(tuple(entries[l] for l in sorted(entries)))


def save_spectrum(spectrum: PowerSpectrum, path: str) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["l", "C_l"])
        for l, c in enumerate(spectrum.values):
            writer.writerow([l, "%.17g" % c])


def legendre(l: int, x):
    """Legendre polynomial P_l(x) on [-1, 1] by the three-term recurrence."""
    if l < 0:
        raise ValueError(f"degree must be >= 0, got {l}")
    x = np.asarray(x, dtype=float)
    if np.any(np.abs(x) > 1 + 1e-12):
        raise ValueError("Legendre argument must lie in [-1, 1]")
    p_prev = np.ones_like(x)
    if l == 0:
        return p_prev if p_prev.ndim else float(p_prev)
    p = x.copy()
    for n in range(1, l):
        p, p_prev = ((2 * n + 1) * x * p - n * p_prev) / (n + 1), p
    return p if p.ndim else float(p)


def _sph_norm(l: int, m: int) -> float:
    # sqrt((2l+1)/(4 pi) * (l-m)!/(l+m)!) via log-gamma, m >= 0
    return math.sqrt((2 * l + 1) / (4 * math.pi)) * math.exp(
        0.5 * (gammaln(l - m + 1) - gammaln(l + m + 1))
    )


def real_sph_harm(l: int, m: int, theta, phi):
    """Real orthonormal spherical harmonic at polar angle theta, azimuth phi.

    m = 0 gives the zonal harmonic; m > 0 pairs with cos(m phi), m < 0 with
    sin(|m| phi), both carrying the extra sqrt(2).
    """
    if abs(m) > l:
        raise ValueError(f"|m| = {abs(m)} exceeds l = {l}")
    theta = np.asarray(theta, dtype=float)
    phi = np.asarray(phi, dtype=float)
    am = abs(m)
    base = _sph_norm(l, am) * lpmv(am, l, np.cos(theta))
    if m == 0:
        out = base
    elif m > 0:
        out = math.sqrt(2.0) * base * np.cos(am * phi)
    else:
        out = math.sqrt(2.0) * base * np.sin(am * phi)
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class SphereGrid:
    """Gauss-Legendre x uniform-azimuth quadrature over the sphere.

    Integrates spherical-harmonic products exactly up to combined degree
    2 n_theta - 1 in the polar direction, with n_phi controlling the largest
    representable azimuthal order.
    """

    n_theta: int
    n_phi: int

    @classmethod
    def for_band_limit(cls, degree: int) -> "SphereGrid":
        """Grid that exactly resolves fields band-limited at the given degree,
        including extraction of any component l <= degree."""
        if degree < 1:
            raise InputError(f"band limit must be >= 1, got {degree}")
        n_theta = degree + 2
        return cls(n_theta=n_theta, n_phi=2 * n_theta)

    def __post_init__(self) -> None:
        if self.n_theta < 1 or self.n_phi < 1:
            raise InputError("grid needs at least one node per direction")

    @property
    def n_nodes(self) -> int:
        return self.n_theta * self.n_phi

    @lru_cache(maxsize=None)
    def _build(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        x, wx = np.polynomial.legendre.leggauss(self.n_theta)
        theta = np.arccos(x[::-1])
        wtheta = wx[::-1]
        phi = 2 * np.pi * np.arange(self.n_phi) / self.n_phi
        th = np.repeat(theta, self.n_phi)
        ph = np.tile(phi, self.n_theta)
        w = np.repeat(wtheta, self.n_phi) * (2 * np.pi / self.n_phi)
        return th, ph, w

    @property
    def theta(self) -> np.ndarray:
        return self._build()[0]

    @property
    def phi(self) -> np.ndarray:
        return self._build()[1]

    @property
    def weights(self) -> np.ndarray:
        return self._build()[2]

    def resolves(self, degree: int) -> bool:
        """True when products of total harmonic degree <= degree integrate
        exactly: polar exactness 2 n_theta - 1 and azimuthal aliasing bound."""
        return 2 * self.n_theta - 1 >= degree and self.n_phi >= degree + 1


def _harmonics_at(l: int, theta: np.ndarray, phi: np.ndarray) -> np.ndarray:
    """Rows m = -l..l of Y_lm evaluated at the given points, shape (2l+1, npts)."""
    rows = [real_sph_harm(l, m, theta, phi) for m in range(-l, l + 1)]
    return np.vstack([np.atleast_1d(r) for r in rows])


def harmonic_table(grid: SphereGrid, lmax: int) -> np.ndarray:
    """All Y_lm on the grid nodes, shape ((lmax+1)^2, n_nodes), ordered by
    (l, m) with m = -l..l inside each l."""
    return np.vstack([_harmonics_at(l, grid.theta, grid.phi) for l in range(lmax + 1)])


@dataclass(frozen=True)
class FieldSample:
    """Ensemble of field realizations on a grid.

    values has shape (n_samples, n_nodes); coeffs holds the Gaussian harmonic
    coefficients that built the raw field, shape (n_samples, (L_max+1)^2).
    hermite_q = 1 marks the raw Gaussian field.
    """

    values: np.ndarray
    coeffs: np.ndarray
    spectrum: PowerSpectrum
    grid: SphereGrid
    hermite_q: int = 1
    seed: int = 0

    @property
    def n_samples(self) -> int:
        return self.values.shape[0]


def simulate_field(
    spectrum: PowerSpectrum,
    grid: SphereGrid,
    n_samples: int,
    seed: int,
    stream: tuple[int, ...] = (),
) -> FieldSample:
    """Draw iid real harmonic coefficients a_lm ~ N(0, C_l) and synthesize
    T = sum a_lm Y_lm on the grid nodes.

    Chunked counter-based substreams make the ensemble reproducible for any
    n_samples without drawing order effects.
    """
    if n_samples < 1:
        raise InputError(f"need n_samples >= 1, got {n_samples}")
    if grid.n_theta < spectrum.lmax + 1:
        raise AssumptionViolation(
            f"grid with n_theta={grid.n_theta} does not resolve L_max={spectrum.lmax}; "
            f"need n_theta >= L_max + 1"
        )
    lmax = spectrum.lmax
    table = harmonic_table(grid, lmax)
    sigma = np.concatenate(
        [np.full(2 * l + 1, math.sqrt(spectrum.values[l])) for l in range(lmax + 1)]
    )
    ncoeff = sigma.size
    coeffs = np.empty((n_samples, ncoeff))
    for start in range(0, n_samples, _COEFF_CHUNK):
        chunk_index = start // _COEFF_CHUNK
        rng = Generator(Philox(SeedSequence((seed, _SPHERE_STREAM, *stream, chunk_index))))
        block = rng.standard_normal((_COEFF_CHUNK, ncoeff))
        take = min(_COEFF_CHUNK, n_samples - start)
        coeffs[start : start + take] = block[:take]
    coeffs *= sigma
    values = coeffs @ table
    return FieldSample(
        values=values, coeffs=coeffs, spectrum=spectrum, grid=grid, seed=seed
    )


def subordinate(field: FieldSample, q: int) -> FieldSample:
    """Apply the Hermite polynomial H_q pointwise to a unit-variance field.

    The unit-variance requirement is what gives H_q(T(x)) its fixed-order
    chaos interpretation; fields with other variances are rejected rather
    than silently rescaled (use PowerSpectrum.normalized() first).
    """
    if q < 2:
        raise AssumptionViolation(f"subordination needs q >= 2, got {q}")
    if field.hermite_q != 1:
        raise AssumptionViolation("field is already subordinated")
    var = field.spectrum.variance()
    if abs(var - 1.0) > 1e-9:
        raise AssumptionViolation(
            f"field variance is {var:.6g}, not 1; normalize the spectrum before "
            f"subordinating"
        )
    return replace(field, values=hermite(q, field.values), hermite_q=q)


@dataclass(frozen=True)
class FrequencyComponent:
    """One frequency component T_l of a field ensemble.

    coeffs holds the projected a_{lm} per realization, shape (n_samples, 2l+1);
    values is the synthesized component at the grid nodes.
    """

    l: int
    coeffs: np.ndarray
    values: np.ndarray
    grid: SphereGrid

    @property
    def n_samples(self) -> int:
        return self.coeffs.shape[0]

    def at(self, theta, phi) -> np.ndarray:
        """Evaluate the component at arbitrary points, shape (n_samples, npts)."""
        rows = _harmonics_at(self.l, np.atleast_1d(theta), np.atleast_1d(phi))
        return self.coeffs @ rows

    def raw_variance(self) -> float:
        """Pointwise variance estimate; constant over the sphere by isotropy,
        so it pools every m and every realization."""
        c_hat = float(np.mean(self.coeffs**2))
        return c_hat * (2 * self.l + 1) / (4 * math.pi)


def frequency_component(field: FieldSample, l: int) -> FrequencyComponent:
    """Project the field onto degree l by quadrature and resynthesize.

    The subordinated field is band-limited at hermite_q * L_max, so the
    quadrature must resolve total degree hermite_q * L_max + l; anything
    less aliases and is an error.
    """
    if l < 0:
        raise InputError(f"component degree must be >= 0, got {l}")
    band = field.hermite_q * field.spectrum.lmax
    if not field.grid.resolves(band + l):
        raise AssumptionViolation(
            f"grid (n_theta={field.grid.n_theta}, n_phi={field.grid.n_phi}) cannot "
            f"extract l={l} from a field band-limited at {band}; need polar "
            f"exactness {band + l}"
        )
    rows = _harmonics_at(l, field.grid.theta, field.grid.phi)
    coeffs = (field.values * field.grid.weights) @ rows.T
    values = coeffs @ rows
    return FrequencyComponent(l=l, coeffs=coeffs, values=values, grid=field.grid)


def normalized_component(component: FrequencyComponent) -> tuple[FrequencyComponent, float]:
    """Scale a component to unit pointwise variance (Monte Carlo estimate).

    Returns the scaled component and the variance estimate.  Components whose
    estimated variance is numerically zero are degenerate and rejected.
    """
    if component.n_samples < 1000:
        raise InputError(
            f"variance normalization needs an ensemble >= 1000, got {component.n_samples}"
        )
    var = component.raw_variance()
    if var <= _DEGENERATE_VAR:
        raise AssumptionViolation(
            f"component l={component.l} is degenerate (variance {var:.3g})"
        )
    scale = 1.0 / math.sqrt(var)
    return (
        FrequencyComponent(
            l=component.l,
            coeffs=component.coeffs * scale,
            values=component.values * scale,
            grid=component.grid,
        ),
        var,
    )


# fixed probe points: the north pole plus six equator azimuths
PROBE_POINTS: tuple[tuple[str, float, float], ...] = (
    ("pole", 0.0, 0.0),
    ("eq0", math.pi / 2, 0.0),
    ("eq30", math.pi / 2, math.pi / 6),
    ("eq45", math.pi / 2, math.pi / 4),
    ("eq60", math.pi / 2, math.pi / 3),
    ("eq90", math.pi / 2, math.pi / 2),
    ("eq180", math.pi / 2, math.pi),
)

# six documented probe pairs and the cosine of the angle between them
PROBE_PAIRS: tuple[tuple[str, str, float], ...] = (
    ("eq0", "eq30", math.cos(math.pi / 6)),
    ("eq0", "eq45", math.cos(math.pi / 4)),
    ("eq0", "eq60", 0.5),
    ("pole", "eq0", 0.0),
    ("eq0", "eq180", -1.0),
    ("eq30", "eq180", -math.cos(math.pi / 6)),
)

# compact subset for the joint ECF check
ECF_PROBES = ("eq0", "eq60", "pole")


@dataclass(frozen=True)
class ProbePairStat:
    label_a: str
    label_b: str
    cos_angle: float
    exact: float          # P_l(cos angle), the predicted covariance
    estimate: float
    std_error: float


@dataclass(frozen=True)
class SphereRow:
    l: int
    degenerate: bool
    variance: float
    kappa4: float
    kolmogorov: float
    ecf: float
    pairs: tuple[ProbePairStat, ...]


@dataclass(frozen=True)
class SphereReport:
    spectrum: PowerSpectrum
    q: int
    ensemble: int
    seed: int
    rows: tuple[SphereRow, ...]


def _kappa4_hat(x: np.ndarray) -> float:
    centered = x - x.mean()
    m2 = float(np.mean(centered**2))
    m4 = float(np.mean(centered**4))
    return m4 - 3 * m2 * m2


def sphere_clt_diagnostics(
    spectrum: PowerSpectrum,
    q: int,
    ls: tuple[int, ...],
    ensemble: int = 4000,
    seed: int = 42,
    grid: SphereGrid | None = None,
) -> SphereReport:
    """Gaussian-approximation diagnostics for the normalized components.

    One field ensemble serves every requested l: each realization is
    subordinated once and projected per degree.  Per l the report carries the
    marginal fourth cumulant and Kolmogorov distance (averaged over the probe
    points), the joint ECF distance at three probes against the Gaussian
    vector with covariance P_l(cos angle), and the six probe-pair covariance
    estimates next to their exact Legendre values.
    """
    if ensemble < 1000:
        raise InputError(f"diagnostics need an ensemble >= 1000, got {ensemble}")
    if not ls:
        raise InputError("no component degrees requested")
    spectrum = spectrum.normalized()
    band = q * spectrum.lmax
    if grid is None:
        grid = SphereGrid.for_band_limit(band)
    raw = simulate_field(spectrum, grid, ensemble, seed)
    sub = subordinate(raw, q)

    labels = [p[0] for p in PROBE_POINTS]
    theta = np.array([p[1] for p in PROBE_POINTS])
    phi = np.array([p[2] for p in PROBE_POINTS])

    rows = []
    for l in ls:
        comp = frequency_component(sub, l)
        var = comp.raw_variance()
        if var <= _DEGENERATE_VAR:
            rows.append(
                SphereRow(
                    l=l,
                    degenerate=True,
                    variance=var,
                    kappa4=float("nan"),
                    kolmogorov=float("nan"),
                    ecf=float("nan"),
                    pairs=(),
                )
            )
            continue
        norm, _ = normalized_component(comp)
        probe_vals = norm.at(theta, phi)          # (ensemble, n_probes)

        kappa4 = float(np.mean([_kappa4_hat(probe_vals[:, i]) for i in range(len(labels))]))
        ks = float(np.mean([kolmogorov_1d(probe_vals[:, i], 1.0) for i in range(len(labels))]))

        idx = [labels.index(name) for name in ECF_PROBES]
        sub_vals = probe_vals[:, idx]
        cosang = np.array(
            [
                [
                    _probe_cos(PROBE_POINTS[i][1], PROBE_POINTS[i][2],
                               PROBE_POINTS[j][1], PROBE_POINTS[j][2])
                    for j in idx
                ]
                for i in idx
            ]
        )
        cov = np.asarray(legendre(l, cosang))
        np.fill_diagonal(cov, 1.0)
        ecf = ecf_distance(sub_vals, cov)

        pairs = []
        for name_a, name_b, cg in PROBE_PAIRS:
            a = probe_vals[:, labels.index(name_a)]
            b = probe_vals[:, labels.index(name_b)]
            est = float(np.mean(a * b) - a.mean() * b.mean())
            se = math.sqrt((1.0 + est * est) / comp.n_samples)
            pairs.append(
                ProbePairStat(
                    label_a=name_a,
                    label_b=name_b,
                    cos_angle=cg,
                    exact=float(legendre(l, cg)),
                    estimate=est,
                    std_error=se,
                )
            )
        rows.append(
            SphereRow(
                l=l,
                degenerate=False,
                variance=var,
                kappa4=kappa4,
                kolmogorov=ks,
                ecf=ecf,
                pairs=tuple(pairs),
            )
        )
    return SphereReport(spectrum=spectrum, q=q, ensemble=ensemble, seed=seed, rows=tuple(rows))


def _probe_cos(theta_a: float, phi_a: float, theta_b: float, phi_b: float) -> float:
    c = math.sin(theta_a) * math.sin(theta_b) * math.cos(phi_a - phi_b) + math.cos(
        theta_a
    ) * math.cos(theta_b)
    return min(1.0, max(-1.0, c))
