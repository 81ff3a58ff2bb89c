"""Sparse algebra for symmetric kernels over a finite orthonormal basis.

A symmetric kernel of order ``d`` over basis indices ``1..n`` is stored as a map
from sorted multi-indices ``i_1 <= ... <= i_d`` to the value the full tensor
takes at any ordering of that multi-index.  Contractions produce tensors with
no symmetry, which are stored entry per ordered index tuple.
"""

from __future__ import annotations

import itertools
import math
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Mapping

Index = tuple[int, ...]


def multiplicity(idx: Index) -> int:
    """Number of distinct orderings of a sorted multi-index.

    For a multi-index with repetition counts m_1, ..., m_r this is
    d! / (m_1! ... m_r!), the weight a single stored entry carries in any
    sum over ordered tuples.
    """
    count = math.factorial(len(idx))
    run = 1
    for a, b in zip(idx, idx[1:]):
        if a == b:
            run += 1
        else:
            count //= math.factorial(run)
            run = 1
    return count // math.factorial(run)


def _orderings(idx: Index) -> set[Index]:
    # distinct permutations; index tuples here never exceed a handful of slots
    return set(itertools.permutations(idx))


def _validate_index(idx: Index, order: int, dim: int, sorted_required: bool) -> None:
    if len(idx) != order:
        raise ValueError(f"index {idx} has arity {len(idx)}, expected {order}")
    for i in idx:
        if not isinstance(i, int) or isinstance(i, bool):
            raise ValueError(f"index {idx} has a non-integer slot")
        if not 1 <= i <= dim:
            raise ValueError(f"index {idx} out of range 1..{dim}")
    if sorted_required and any(a > b for a, b in zip(idx, idx[1:])):
        raise ValueError(f"multi-index {idx} is not sorted")


@dataclass(frozen=True)
class SymmetricKernel:
    """Symmetric order-``order`` kernel on ``{1..dim}^order``, sparse storage.

    ``coeffs`` maps each sorted multi-index to the full tensor value there;
    entries equal to zero are dropped.  Instances are immutable.
    """

    order: int
    dim: int
    coeffs: Mapping[Index, float] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.order < 1:
            raise ValueError("kernel order must be >= 1")
        if self.dim < 1:
            raise ValueError("kernel dim must be >= 1")
        clean: dict[Index, float] = {}
        for idx, val in self.coeffs.items():
            idx = tuple(idx)
            _validate_index(idx, self.order, self.dim, sorted_required=True)
            val = float(val)
            if not math.isfinite(val):
                raise ValueError(f"non-finite coefficient at {idx}")
            if val != 0.0:
                clean[idx] = val
        object.__setattr__(self, "coeffs", clean)

    def value(self, idx: Iterable[int]) -> float:
        """Full tensor value at an arbitrary (not necessarily sorted) tuple."""
        key = tuple(sorted(idx))
        _validate_index(key, self.order, self.dim, sorted_required=True)
        return self.coeffs.get(key, 0.0)

    def norm_sq(self) -> float:
        """Squared Hilbert-Schmidt norm: sum over ordered tuples of the entry
        squared, i.e. sum of multiplicity(idx) * coeff^2 over stored entries."""
        return math.fsum(multiplicity(i) * v * v for i, v in self.coeffs.items())

    def scaled(self, factor: float) -> "SymmetricKernel":
        return SymmetricKernel(
            self.order, self.dim, {i: factor * v for i, v in self.coeffs.items()}
        )



@dataclass(frozen=True)
class GeneralTensor:
    """Order-``order`` tensor with no symmetry; one entry per ordered tuple.

    The squared norm is the plain sum of squared stored entries.  Order 0 is
    allowed and holds a single scalar under the empty tuple.
    """

    order: int
    dim: int
    coeffs: Mapping[Index, float] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.order < 0:
            raise ValueError("tensor order must be >= 0")
        if self.dim < 1:
            raise ValueError("tensor dim must be >= 1")
        clean: dict[Index, float] = {}
        for idx, val in self.coeffs.items():
            idx = tuple(idx)
            _validate_index(idx, self.order, self.dim, sorted_required=False)
            val = float(val)
            if not math.isfinite(val):
                raise ValueError(f"non-finite coefficient at {idx}")
            if val != 0.0:
                clean[idx] = val
        object.__setattr__(self, "coeffs", clean)

    def value(self, idx: Iterable[int]) -> float:
        key = tuple(idx)
        _validate_index(key, self.order, self.dim, sorted_required=False)
        return self.coeffs.get(key, 0.0)

    def norm_sq(self) -> float:
        return math.fsum(v * v for v in self.coeffs.values())

    def scalar(self) -> float:
        """The single entry of an order-0 tensor."""
        if self.order != 0:
            raise ValueError("scalar() is only defined for order-0 tensors")
        return self.coeffs.get((), 0.0)



def make_kernel(
    order: int,
    dim: int,
    entries: Mapping[Index, float] | Iterable[tuple[Index, float]],
) -> SymmetricKernel:
    """Build a symmetric kernel by symmetrizing ``(index tuple, value)`` entries.

    Index tuples may arrive in any slot order.  Values for the same ordered
    tuple accumulate; each sorted multi-index then receives the average of its
    accumulated values over all orderings, absent orderings counting as zero.
    The input is read as a general tensor and symmetrized, so a lone
    off-diagonal entry contributes ``value / multiplicity``.  The zero kernel
    is ``make_kernel(d, n, {})``.
    """
    pairs = entries.items() if isinstance(entries, Mapping) else entries
    acc: dict[Index, float] = defaultdict(float)
    for idx, val in pairs:
        idx = tuple(idx)
        _validate_index(idx, order, dim, sorted_required=False)
        acc[idx] += float(val)
    out: dict[Index, float] = defaultdict(float)
    for idx, val in acc.items():
        out[tuple(sorted(idx))] += val
    return SymmetricKernel(
        order, dim, {i: v / multiplicity(i) for i, v in out.items()}
    )


def basis_kernel(order: int, dim: int, idx: Iterable[int], val: float = 1.0) -> SymmetricKernel:
    """Symmetrized basis element: tensor value ``val`` at every ordering of ``idx``."""
    return SymmetricKernel(order, dim, {tuple(sorted(idx)): val})


def add(f: SymmetricKernel, g: SymmetricKernel) -> SymmetricKernel:
    if (f.order, f.dim) != (g.order, g.dim):
        raise ValueError("kernel shapes differ")
    out = dict(f.coeffs)
    for idx, v in g.coeffs.items():
        out[idx] = out.get(idx, 0.0) + v
    return SymmetricKernel(f.order, f.dim, out)


def inner(f: SymmetricKernel, g: SymmetricKernel) -> float:
    """Hilbert-Schmidt inner product <f, g> summed over all ordered tuples.

    Both kernels must share order and dim.  Computed over stored entries as
    sum of multiplicity(idx) * f(idx) * g(idx).
    """
    if (f.order, f.dim) != (g.order, g.dim):
        raise ValueError("inner product requires equal order and dim")
    small, large = (f.coeffs, g.coeffs) if len(f.coeffs) <= len(g.coeffs) else (g.coeffs, f.coeffs)
    return math.fsum(
        multiplicity(idx) * v * large[idx] for idx, v in small.items() if idx in large
    )


def _sub_multisets(idx: Index, p: int) -> set[tuple[Index, Index]]:
    """Distinct (sub-multiset of size p, remaining multiset) splits of ``idx``."""
    out: set[tuple[Index, Index]] = set()
    for pos in itertools.combinations(range(len(idx)), p):
        chosen = tuple(idx[i] for i in pos)
        left = tuple(idx[i] for i in range(len(idx)) if i not in pos)
        out.add((chosen, left))
    return out


def contract(f: SymmetricKernel, g: SymmetricKernel, p: int) -> GeneralTensor:
    """Contraction (f (x)_p g): sum over p shared slots.

    (f (x)_p g)(y, z) = sum over a in {1..n}^p of f(y, a) g(z, a), an order
    d + d' - 2p tensor that is symmetric within the y and z blocks but not
    across them.  p = 0 is the tensor product; p = d = d' yields the order-0
    tensor holding <f, g>.

    Parameters
    ----------
    f, g : SymmetricKernel
        Kernels over the same basis (equal ``dim``).
    p : int
        Number of contracted slots, 0 <= p <= min(f.order, g.order).
    """
    if f.dim != g.dim:
        raise ValueError("contraction requires equal dim")
    if not 0 <= p <= min(f.order, g.order):
        raise ValueError(f"contraction order p={p} outside 0..{min(f.order, g.order)}")

    # group entries by the contracted sub-multiset alpha; the free part is
    # determined by the entry, and ordered a-tuples contribute multiplicity(alpha)
    by_alpha_f: dict[Index, list[tuple[Index, float]]] = defaultdict(list)
    for idx, v in f.coeffs.items():
        for alpha, free in _sub_multisets(idx, p):
            by_alpha_f[alpha].append((free, v))
    by_alpha_g: dict[Index, list[tuple[Index, float]]] = defaultdict(list)
    for idx, v in g.coeffs.items():
        for alpha, free in _sub_multisets(idx, p):
            by_alpha_g[alpha].append((free, v))

    blocks: dict[tuple[Index, Index], float] = defaultdict(float)
    for alpha, lhs in by_alpha_f.items():
        rhs = by_alpha_g.get(alpha)
        if rhs is None:
            continue
        weight = multiplicity(alpha)
        for y, vf in lhs:
            for z, vg in rhs:
                blocks[(y, z)] += weight * vf * vg

    out: dict[Index, float] = {}
    for (y, z), val in blocks.items():
        if val == 0.0:
            continue
        for u in _orderings(y):
            for w in _orderings(z):
                out[u + w] = val
    return GeneralTensor(f.order + g.order - 2 * p, f.dim, out)


def symmetrize(t: GeneralTensor) -> SymmetricKernel:
    """Symmetrization: average of ``t`` over all slot permutations.

    The result's entry at a sorted multi-index is the mean of ``t`` over all
    distinct orderings of that multi-index (absent orderings count as zero).
    """
    if t.order < 1:
        raise ValueError("symmetrize requires order >= 1")
    sums: dict[Index, float] = defaultdict(float)
    for idx, v in t.coeffs.items():
        sums[tuple(sorted(idx))] += v
    return SymmetricKernel(
        t.order, t.dim, {k: v / multiplicity(k) for k, v in sums.items()}
    )


def sym_contract(f: SymmetricKernel, g: SymmetricKernel, p: int) -> SymmetricKernel | float:
    """Symmetrized contraction; the order-0 case returns the scalar <f, g>."""
    t = contract(f, g, p)
    if t.order == 0:
        return t.scalar()
    return symmetrize(t)


def contraction_profile(f: SymmetricKernel) -> list[tuple[float, float]]:
    """Per contraction order p = 1..d-1: (||f (x)_p f||^2, ||f (~x)_p f||^2).

    The symmetrized norm never exceeds the raw one.  Order-1 kernels are
    rejected: they have no nontrivial contractions.
    """
    if f.order < 2:
        raise ValueError("no nontrivial contractions for an order-1 kernel")
    out = []
    for p in range(1, f.order):
        t = contract(f, f, p)
        out.append((t.norm_sq(), symmetrize(t).norm_sq()))
    return out
