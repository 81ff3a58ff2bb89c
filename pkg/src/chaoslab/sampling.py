"""Monte Carlo samplers for chaos vectors.

Two independent routes to the same laws: a Hermite-product evaluator that is
exact given a finite Gaussian draw, and an iterated-integral oracle built from
an off-diagonal discrete sum on a refined grid.  Batches are generated from
counter-based substreams (Philox) keyed by (seed, stream tags, chunk), with a
fixed chunk of replicate rows generated in full and sliced, so results are
bit-reproducible for any worker count and any sample size.
"""

from __future__ import annotations

import math
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from numpy.random import Generator, Philox, SeedSequence

from .kernels import SymmetricKernel, multiplicity
from .moments import ChaosVectorSpec

CHUNK = 4096          # replicate rows per substream; fixed for reproducibility
_ORACLE_CHUNK = 512   # smaller rows for the refined-grid oracle (m columns)

_STREAM_CHAOS = 0
_STREAM_SURROGATE = 1
_STREAM_ORACLE = 2


@dataclass(frozen=True)
class GaussianDraw:
    """One realization of the underlying iid standard normal coordinates."""

    values: tuple[float, ...]

    def as_array(self) -> np.ndarray:
        return np.asarray(self.values, dtype=float)


@dataclass(frozen=True)
class SampleBatch:
    """Replicate-major draws of a chaos vector, plus optional Malliavin norms."""

    values: np.ndarray                     # (n_samples, k)
    malliavin_sq: np.ndarray | None        # (n_samples, k) of ||D F_j||^2
    seed: int

    @property
    def n_samples(self) -> int:
        return self.values.shape[0]


def _rng(seed: int, tags: tuple[int, ...]) -> Generator:
    return Generator(Philox(SeedSequence((seed,) + tags)))


def hermite(q: int, x):
    """Probabilists' Hermite polynomial H_q, by the three-term recurrence
    H_{q+1}(x) = x H_q(x) - q H_{q-1}(x).  Scalar in, scalar out."""
    if q < 0:
        raise ValueError("hermite degree must be >= 0")
    arr = np.asarray(x, dtype=float)
    prev = np.ones_like(arr)
    if q == 0:
        return float(prev) if arr.ndim == 0 else prev
    cur = arr.copy()
    for k in range(1, q):
        prev, cur = cur, arr * cur - k * prev
    return float(cur) if arr.ndim == 0 else cur


# a compiled kernel entry is (weight, ((column, degree), ...)) meaning
# weight * prod H_degree(X[column]); weight folds in the orderings count
def _compile_kernel(f: SymmetricKernel) -> list[tuple[float, tuple[tuple[int, int], ...]]]:
    out = []
    for idx, val in f.coeffs.items():
        counts = Counter(idx)
        factors = tuple((i - 1, m) for i, m in sorted(counts.items()))
        out.append((multiplicity(idx) * val, factors))
    return out


def _compile_slices(
    f: SymmetricKernel,
) -> list[tuple[int, list[tuple[float, tuple[tuple[int, int], ...]]]]]:
    """Per basis index a: compiled entries of the order d-1 kernel f(a, .)."""
    per_a: dict[int, dict[tuple[int, ...], float]] = {}
    for idx, val in f.coeffs.items():
        seen = set()
        for pos, a in enumerate(idx):
            if a in seen:
                continue
            seen.add(a)
            rest = idx[:pos] + idx[pos + 1 :]
            per_a.setdefault(a, {})[rest] = val
    compiled = []
    for a, entries in sorted(per_a.items()):
        terms = []
        for rest, val in entries.items():
            counts = Counter(rest)
            factors = tuple((i - 1, m) for i, m in sorted(counts.items()))
            terms.append((multiplicity(rest) * val, factors))
        compiled.append((a, terms))
    return compiled


class _HermiteTable:
    """Lazy per-degree table of H_q applied columnwise to a draw block."""

    def __init__(self, block: np.ndarray):
        self._block = block
        self._cache: dict[int, np.ndarray] = {1: block}

    def column(self, degree: int, col: int) -> np.ndarray:
        if degree == 0:
            raise ValueError("degree-0 factors are folded into weights")
        table = self._cache.get(degree)
        if table is None:
            table = hermite(degree, self._block)
            self._cache[degree] = table
        return table[:, col]


def _eval_compiled(terms, table: _HermiteTable, rows: int) -> np.ndarray:
    acc = np.zeros(rows)
    for weight, factors in terms:
        term = np.full(rows, weight)
        for col, degree in factors:
            term = term * table.column(degree, col)
        acc += term
    return acc


def _eval_block(compiled, block: np.ndarray) -> np.ndarray:
    rows = block.shape[0]
    table = _HermiteTable(block)
    out = np.empty((rows, len(compiled)))
    for j, terms in enumerate(compiled):
        out[:, j] = _eval_compiled(terms, table, rows)
    return out


def _eval_malliavin_block(slices_per_component, orders, block: np.ndarray) -> np.ndarray:
    rows = block.shape[0]
    table = _HermiteTable(block)
    out = np.zeros((rows, len(slices_per_component)))
    for j, (d, slices) in enumerate(zip(orders, slices_per_component)):
        acc = np.zeros(rows)
        for _a, terms in slices:
            acc += _eval_compiled(terms, table, rows) ** 2
        out[:, j] = (d * d) * acc
    return out


def eval_chaos(spec: ChaosVectorSpec, draw: GaussianDraw | Sequence[float]) -> np.ndarray:
    """Evaluate the chaos vector at one Gaussian draw.

    Uses the finite-basis identity I_d(f) = sum over stored multi-indices of
    multiplicity * coeff * prod_i H_{m_i}(X_i), with m_i the repetition count
    of basis index i.
    """
    x = draw.as_array() if isinstance(draw, GaussianDraw) else np.asarray(draw, float)
    if x.shape != (spec.dim,):
        raise ValueError(f"draw has shape {x.shape}, expected ({spec.dim},)")
    compiled = [_compile_kernel(f) for f in spec.components]
    return _eval_block(compiled, x[None, :])[0]


def eval_malliavin_norm(
    spec: ChaosVectorSpec, draw: GaussianDraw | Sequence[float]
) -> np.ndarray:
    """Pathwise squared Malliavin derivative norm, per component.

    ||D I_d(f)||^2 = sum over basis indices a of (d * I_{d-1}(f(a, .)))^2,
    evaluated at the same draw.
    """
    x = draw.as_array() if isinstance(draw, GaussianDraw) else np.asarray(draw, float)
    if x.shape != (spec.dim,):
        raise ValueError(f"draw has shape {x.shape}, expected ({spec.dim},)")
    slices = [_compile_slices(f) for f in spec.components]
    return _eval_malliavin_block(slices, spec.orders, x[None, :])[0]


def _run_chunks(n_samples: int, workers: int, worker_fn) -> None:
    chunks = range((n_samples + CHUNK - 1) // CHUNK)
    if workers <= 1:
        for c in chunks:
            worker_fn(c)
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(worker_fn, chunks))


def sample_batch(
    spec: ChaosVectorSpec,
    n_samples: int,
    seed: int,
    workers: int = 1,
    with_malliavin: bool = False,
    stream: tuple[int, ...] = (),
) -> SampleBatch:
    """Draw ``n_samples`` replicates of the chaos vector.

    Replicate rows land in fixed chunks of size 4096; chunk c is generated
    from the substream keyed (seed, *stream, 0, c) in full and sliced, so the
    values for row r never depend on n_samples or on the worker count.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    compiled = [_compile_kernel(f) for f in spec.components]
    slices = [_compile_slices(f) for f in spec.components] if with_malliavin else None
    values = np.empty((n_samples, spec.k))
    mall = np.empty((n_samples, spec.k)) if with_malliavin else None

    def work(c: int) -> None:
        lo = c * CHUNK
        hi = min(lo + CHUNK, n_samples)
        g = _rng(seed, stream + (_STREAM_CHAOS, c))
        block = g.standard_normal((CHUNK, spec.dim))[: hi - lo]
        values[lo:hi] = _eval_block(compiled, block)
        if mall is not None:
            mall[lo:hi] = _eval_malliavin_block(slices, spec.orders, block)

    _run_chunks(n_samples, workers, work)
    return SampleBatch(values=values, malliavin_sq=mall, seed=seed)


def sample_gaussian_surrogate(
    cov: np.ndarray,
    n_samples: int,
    seed: int,
    workers: int = 1,
    stream: tuple[int, ...] = (),
) -> np.ndarray:
    """Centered Gaussian draws with the given covariance.

    The factor is the symmetric PSD square root from an eigendecomposition;
    eigenvalues below -1e-10 are rejected, small negatives are clipped to 0,
    so rank-deficient covariances (perfectly correlated components) are fine.
    """
    cov = np.asarray(cov, dtype=float)
    if cov.ndim != 2 or cov.shape[0] != cov.shape[1]:
        raise ValueError("covariance must be square")
    if not np.allclose(cov, cov.T, atol=1e-10 * max(1.0, float(np.abs(cov).max()))):
        raise ValueError("covariance must be symmetric")
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    lam, q = np.linalg.eigh(cov)
    if lam.min() < -1e-10:
        raise ValueError(f"covariance has eigenvalue {lam.min():.3e} below -1e-10")
    root = (q * np.sqrt(np.clip(lam, 0.0, None))) @ q.T
    k = cov.shape[0]
    out = np.empty((n_samples, k))

    def work(c: int) -> None:
        lo = c * CHUNK
        hi = min(lo + CHUNK, n_samples)
        g = _rng(seed, stream + (_STREAM_SURROGATE, c))
        z = g.standard_normal((CHUNK, k))[: hi - lo]
        out[lo:hi] = z @ root

    _run_chunks(n_samples, workers, work)
    return out


def _elementary_symmetric(power_sums: list[np.ndarray], r_max: int) -> list[np.ndarray]:
    """Newton's identities: e_r arrays from power-sum arrays, elementwise."""
    ones = np.ones_like(power_sums[0])
    es = [ones]
    for r in range(1, r_max + 1):
        acc = np.zeros_like(ones)
        sign = 1.0
        for i in range(1, r + 1):
            acc += sign * es[r - i] * power_sums[i - 1]
            sign = -sign
        es.append(acc / r)
    return es


def eval_chaos_ito_oracle(
    spec: ChaosVectorSpec,
    refinement: int,
    n_samples: int,
    seed: int,
) -> np.ndarray:
    """Iterated-integral oracle on a refined grid; independent of eval_chaos.

    Each basis element e_i becomes the normalized indicator of the i-th of n
    blocks in a grid of ``refinement`` cells (a multiple of n); with iid
    standard normals per cell, I_d(f) is realized as the sum of the embedded
    kernel over ordered tuples of distinct cells times the cell normals.  Per
    stored entry this reduces to d! (n/m)^{d/2} coeff * prod over distinct
    basis indices i of e_{m_i}(cells of block i), with e_r the elementary
    symmetric polynomial.  Converges in law to eval_chaos as m/n grows and is
    exact at m = n for kernels with no repeated index.
    """
    m, n = refinement, spec.dim
    if m < n or m % n != 0:
        raise ValueError(f"refinement {m} must be a multiple of dim {n}")
    cells = m // n
    compiled = []
    for f in spec.components:
        d = f.order
        scale = math.factorial(d) * (n / m) ** (d / 2.0)
        terms = []
        for idx, val in f.coeffs.items():
            counts = Counter(idx)
            factors = tuple((i - 1, r) for i, r in sorted(counts.items()))
            terms.append((scale * val, factors))
        compiled.append((d, terms))
    max_order = max(f.order for f in spec.components)

    out = np.empty((n_samples, spec.k))

    for c in range((n_samples + _ORACLE_CHUNK - 1) // _ORACLE_CHUNK):
        lo = c * _ORACLE_CHUNK
        hi = min(lo + _ORACLE_CHUNK, n_samples)
        g = _rng(seed, (_STREAM_ORACLE, c))
        xi = g.standard_normal((_ORACLE_CHUNK, n, cells))[: hi - lo]
        powers = [(xi**r).sum(axis=2) for r in range(1, max_order + 1)]
        es = _elementary_symmetric(powers, max_order)
        rows = hi - lo
        for j, (_d, terms) in enumerate(compiled):
            acc = np.zeros(rows)
            for weight, factors in terms:
                term = np.full(rows, weight)
                for col, r in factors:
                    term = term * es[r][:, col]
                acc += term
            out[lo:hi, j] = acc
    return out
