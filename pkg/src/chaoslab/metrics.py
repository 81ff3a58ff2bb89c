"""Distribution distances used by the diagnostics battery.

The multivariate comparison is a sup distance between the empirical
characteristic function of the samples and the exact Gaussian characteristic
function on a fixed lambda grid; the Gaussian side is never sampled.  The
one-dimensional checks are a bounded-Lipschitz distance solved as a linear
program and the Kolmogorov distance against a centered normal.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special
from scipy.optimize import linprog
from scipy.sparse import csr_matrix
from scipy.stats import qmc

_FULL_GRID_CAP = 1_000_000
_QMC_NODES = 100_000
_ROW_BLOCK = 32_768
_NODE_BLOCK = 256


@dataclass(frozen=True)
class EcfGrid:
    """Uniform lambda lattice [-T, T]^k used for the characteristic-function
    sup distance.  ``points_per_axis`` is odd-friendly (81 keeps 0 on the
    axis); for k > 3 or above the node cap the lattice falls back to 1e5
    quasi-random (unscrambled Sobol) nodes in the same box."""

    half_width: float = 4.0
    points_per_axis: int = 81

    def __post_init__(self) -> None:
        if not self.half_width > 0:
            raise ValueError("grid half-width must be > 0")
        if self.points_per_axis < 2:
            raise ValueError("grid needs at least 2 points per axis")

    def nodes(self, k: int) -> np.ndarray:
        """Evaluation nodes, shape (M, k)."""
        if k < 1:
            raise ValueError("k must be >= 1")
        r, t = self.points_per_axis, self.half_width
        if k <= 3 and r**k <= _FULL_GRID_CAP:
            axis = np.linspace(-t, t, r)
            mesh = np.meshgrid(*([axis] * k), indexing="ij")
            return np.stack(mesh, axis=-1).reshape(-1, k)
        sob = qmc.Sobol(d=k, scramble=False)
        pts = sob.random_base2(m=17)[:_QMC_NODES]
        return pts * (2.0 * t) - t


def _half_nodes(nodes: np.ndarray) -> np.ndarray:
    # |emp - exact| is even in lambda (both CFs conjugate-symmetric for real
    # samples), so one representative of each {lambda, -lambda} pair suffices
    first = np.zeros(nodes.shape[0], dtype=bool)
    undecided = np.ones(nodes.shape[0], dtype=bool)
    for col in range(nodes.shape[1]):
        c = nodes[:, col]
        first |= undecided & (c > 0)
        undecided &= c == 0
    return nodes[first | undecided]


def gaussian_cf(lam: np.ndarray, cov: np.ndarray):
    """Characteristic function of N(0, cov) at lambda: exp(-lambda' cov lambda / 2).

    Accepts one node of shape (k,) or a stack of shape (M, k); returns a
    complex scalar or array with zero imaginary part.
    """
    lam = np.asarray(lam, dtype=float)
    cov = np.asarray(cov, dtype=float)
    single = lam.ndim == 1
    pts = lam[None, :] if single else lam
    quad = np.einsum("ij,jk,ik->i", pts, cov, pts)
    out = np.exp(-0.5 * quad).astype(complex)
    return out[0] if single else out


def _check_cov(cov: np.ndarray, k: int) -> np.ndarray:
    cov = np.asarray(cov, dtype=float)
    if cov.shape != (k, k):
        raise ValueError(f"covariance shape {cov.shape} does not match k={k}")
    scale = max(1.0, float(np.abs(cov).max()))
    if not np.allclose(cov, cov.T, atol=1e-10 * scale):
        raise ValueError("covariance must be symmetric")
    if np.linalg.eigvalsh(cov).min() < -1e-10 * scale:
        raise ValueError("covariance must be positive semidefinite")
    return cov


def ecf_distance(
    samples: np.ndarray,
    cov: np.ndarray,
    grid: EcfGrid | None = None,
    nodes: np.ndarray | None = None,
) -> float:
    """Sup over the grid of |empirical CF - Gaussian CF|.

    Parameters
    ----------
    samples : (N, k) or (N,) array of replicates.
    cov : (k, k) exact covariance of the Gaussian comparison law.
    grid : lambda grid; defaults to EcfGrid().
    nodes : explicit (M, k) node array overriding the grid (testing hook).
    """
    samples = np.asarray(samples, dtype=float)
    if samples.ndim == 1:
        samples = samples[:, None]
    n, k = samples.shape
    cov = _check_cov(cov, k)
    if nodes is None:
        nodes = _half_nodes((grid or EcfGrid()).nodes(k))
    else:
        nodes = np.asarray(nodes, dtype=float).reshape(-1, k)

    worst = 0.0
    for jlo in range(0, nodes.shape[0], _NODE_BLOCK):
        lam = nodes[jlo : jlo + _NODE_BLOCK]
        acc = np.zeros(lam.shape[0], dtype=complex)
        for ilo in range(0, n, _ROW_BLOCK):
            phase = samples[ilo : ilo + _ROW_BLOCK] @ lam.T
            acc += np.exp(1j * phase).sum(axis=0)
        emp = acc / n
        gap = np.abs(emp - gaussian_cf(lam, cov))
        worst = max(worst, float(gap.max()))
    return worst


def _snap_to_grid(pooled: np.ndarray, values: np.ndarray, max_support: int) -> np.ndarray:
    probs = (np.arange(max_support) + 0.5) / max_support
    grid = np.unique(np.quantile(pooled, probs))
    mids = 0.5 * (grid[1:] + grid[:-1])
    return grid[np.searchsorted(mids, values)]


def bl_distance_1d(a: np.ndarray, b: np.ndarray, max_support: int = 4096) -> float:
    """Bounded-Lipschitz distance between two 1-D empirical samples.

    Exact value of sup_f |mean_a f - mean_b f| over test functions with
    Lipschitz constant L and sup norm S satisfying L + S <= 1, solved as one
    linear program in (f at the pooled support points, L, S); in one
    dimension adjacent-gap Lipschitz constraints are sufficient.  When the
    pooled support exceeds ``max_support`` the samples are first snapped to a
    pooled quantile grid; every admissible f is 1-Lipschitz, so the induced
    error is at most the mean snapping displacement (order 1/max_support of
    the sample scale).  The value lies in [0, 2].
    """
    a = np.asarray(a, dtype=float).ravel()
    b = np.asarray(b, dtype=float).ravel()
    if a.size == 0 or b.size == 0:
        raise ValueError("samples must be nonempty")
    pooled = np.concatenate([a, b])
    if np.unique(pooled).size > max_support:
        pooled = np.sort(pooled)
        a = _snap_to_grid(pooled, a, max_support)
        b = _snap_to_grid(pooled, b, max_support)

    x, inv = np.unique(np.concatenate([a, b]), return_inverse=True)
    m = x.size
    w = np.zeros(m)
    np.add.at(w, inv[: a.size], 1.0 / a.size)
    np.add.at(w, inv[a.size :], -1.0 / b.size)
    if m == 1:
        return 0.0

    gaps = np.diff(x)
    # variables: f_1..f_m, L, S; maximize w.f
    n_var = m + 2
    rows, cols, data = [], [], []
    r = 0
    for i in range(m - 1):
        rows += [r, r, r]; cols += [i + 1, i, m]; data += [1.0, -1.0, -gaps[i]]
        r += 1
        rows += [r, r, r]; cols += [i, i + 1, m]; data += [1.0, -1.0, -gaps[i]]
        r += 1
    for i in range(m):
        rows += [r, r]; cols += [i, m + 1]; data += [1.0, -1.0]
        r += 1
        rows += [r, r]; cols += [i, m + 1]; data += [-1.0, -1.0]
        r += 1
    a_ub = csr_matrix((data, (rows, cols)), shape=(r, n_var))
    a_eq = csr_matrix((np.ones(2), ([0, 0], [m, m + 1])), shape=(1, n_var))
    c = np.zeros(n_var)
    c[:m] = -w
    res = linprog(
        c,
        A_ub=a_ub,
        b_ub=np.zeros(r),
        A_eq=a_eq,
        b_eq=[1.0],
        bounds=[(None, None)] * m + [(0.0, None)] * 2,
        method="highs",
    )
    if res.status != 0:
        raise RuntimeError(f"bounded-Lipschitz LP failed: {res.message}")
    return max(0.0, -float(res.fun))


def kolmogorov_1d(samples: np.ndarray, sigma2: float) -> float:
    """Kolmogorov distance between the empirical law and N(0, sigma2).

    sup_x |F_hat(x) - Phi_sigma(x)| over the sorted sample, both one-sided
    gaps included.  Requires sigma2 > 0.
    """
    if not sigma2 > 0:
        raise ValueError("sigma2 must be > 0")
    xs = np.sort(np.asarray(samples, dtype=float).ravel())
    n = xs.size
    if n == 0:
        raise ValueError("samples must be nonempty")
    cdf = special.ndtr(xs / math.sqrt(sigma2))
    steps = np.arange(1, n + 1) / n
    return float(np.maximum(steps - cdf, cdf - (steps - 1.0 / n)).max())
