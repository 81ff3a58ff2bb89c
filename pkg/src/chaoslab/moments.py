"""Exact moment and Malliavin formulas for multiple Wiener-Ito integrals.

Everything here is closed form in the kernel contractions: no sampling.  For a
symmetric order-d kernel f, I_d(f) denotes the multiple integral with
E[I_d(f) I_d(g)] = d! <f, g> and distinct orders uncorrelated.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .kernels import (
    SymmetricKernel,
    contract,
    contraction_profile,
    inner,
    sym_contract,
    symmetrize,
)


@dataclass(frozen=True)
class ChaosVectorSpec:
    """Specification of a random vector (I_{d_1}(f_1), ..., I_{d_k}(f_k)).

    All component kernels share one basis dimension.  Orders may repeat and
    may differ across components.
    """

    components: tuple[SymmetricKernel, ...]

    def __post_init__(self) -> None:
        comps = tuple(self.components)
        if not comps:
            raise ValueError("a chaos vector needs at least one component")
        dims = {f.dim for f in comps}
        if len(dims) != 1:
            raise ValueError(f"components disagree on basis dim: {sorted(dims)}")
        object.__setattr__(self, "components", comps)

    @property
    def k(self) -> int:
        return len(self.components)

    @property
    def dim(self) -> int:
        return self.components[0].dim

    @property
    def orders(self) -> tuple[int, ...]:
        return tuple(f.order for f in self.components)


def variance(f: SymmetricKernel) -> float:
    """Var I_d(f) = d! ||f||^2."""
    return math.factorial(f.order) * f.norm_sq()


def covariance_matrix(spec: ChaosVectorSpec) -> np.ndarray:
    """Exact covariance of the chaos vector.

    Entry (i, j) is d_i! <f_i, f_j> when d_i = d_j and zero otherwise
    (integrals of distinct orders are uncorrelated).
    """
    k = spec.k
    cov = np.zeros((k, k))
    for i in range(k):
        fi = spec.components[i]
        for j in range(i, k):
            fj = spec.components[j]
            if fi.order == fj.order:
                cov[i, j] = cov[j, i] = math.factorial(fi.order) * inner(fi, fj)
    return cov


def fourth_cumulant(f: SymmetricKernel, d: int | None = None) -> float:
    """Fourth cumulant of I_d(f), exact contraction form.

    kappa_4 = sum over p = 1..d-1 of
        (d!)^4 / (p! (d-p)!)^2 * ( ||f (x)_p f||^2
                                   + binom(2(d-p), d-p) ||f (~x)_p f||^2 ).
    Zero iff d = 1 or f = 0; for f = e1 x e1 (d = 2) the value is 48, matching
    E[(X^2 - 1)^4] - 3 Var^2 = 60 - 12.
    """
    d = f.order if d is None else d
    if d != f.order:
        raise ValueError(f"stated order {d} does not match kernel order {f.order}")
    if d == 1:
        return 0.0
    dfact = math.factorial(d)
    total = 0.0
    for p, (raw_sq, sym_sq) in enumerate(contraction_profile(f), start=1):
        coef = dfact**4 / (math.factorial(p) * math.factorial(d - p)) ** 2
        total += coef * (raw_sq + math.comb(2 * (d - p), d - p) * sym_sq)
    return total


def fourth_moment(f: SymmetricKernel) -> float:
    """E[I_d(f)^4] = kappa_4 + 3 (d! ||f||^2)^2."""
    return fourth_cumulant(f) + 3.0 * variance(f) ** 2


def malliavin_variance(f: SymmetricKernel, d: int | None = None) -> tuple[float, float]:
    """Mean and variance of ||D I_d(f)||^2, the squared derivative norm.

    The derivative norm expands over contraction orders with uncorrelated
    chaos terms:

        mean = d * d! ||f||^2
        var  = d^4 * sum over p = 1..d-1 of
               ((p-1)! binom(d-1, p-1)^2)^2 (2(d-p))! ||f (~x)_p f||^2.

    Order-1 kernels give (||f||^2, 0) since the derivative is deterministic.
    """
    d = f.order if d is None else d
    if d != f.order:
        raise ValueError(f"stated order {d} does not match kernel order {f.order}")
    mean = d * math.factorial(d) * f.norm_sq()
    var = 0.0
    for p in range(1, d):
        sym_sq = symmetrize(contract(f, f, p)).norm_sq()
        coef = (math.factorial(p - 1) * math.comb(d - 1, p - 1) ** 2) ** 2
        var += coef * math.factorial(2 * (d - p)) * sym_sq
    return mean, d**4 * var


def multiply(
    f: SymmetricKernel, g: SymmetricKernel
) -> list[tuple[int, SymmetricKernel | float]]:
    """Product expansion I_n(f) I_m(g) = sum_p I_{n+m-2p}(h_p).

    Returns [(order, kernel-or-scalar)] for p = 0..min(n, m) with
    h_p = p! binom(n, p) binom(m, p) (f (~x)_p g); the order-0 term (present
    only when n = m) is the scalar n! <f, g>.
    """
    if f.dim != g.dim:
        raise ValueError("product requires equal dim")
    n, m = f.order, g.order
    out: list[tuple[int, SymmetricKernel | float]] = []
    for p in range(min(n, m) + 1):
        coef = math.factorial(p) * math.comb(n, p) * math.comb(m, p)
        term = sym_contract(f, g, p)
        if isinstance(term, float):
            out.append((0, coef * term))
        else:
            out.append((n + m - 2 * p, term.scaled(coef)))
    return out
