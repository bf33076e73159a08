# eigenspace.py
"""
Matrices sorted by the shape of their 1-eigenspace.

A matrix M with ker(M - I) = Z/ell^a x Z/ell^(a+b) lies in the stratum M_{a,b}.
At precision n the shape can be read off once n > a + b; below that only
bounds are known. Counting is done on the vectorised scans of `scan`.
"""
import logging
from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, Union

import numpy as np

from .cartan import AmbientGroup, AmbientKind, CartanParams, CartanType, in_cartan, in_complement, ramified_route
from .errors import DomainError, PrecisionError, PreconditionError
from .modarith import Exact, MatMod, Packed, TruncVal, det_shifted_val, trunc_val
from .scan import Strata, scan_complement_two, scan_strata
from .subgroup import (FiniteSubgroup, SubgroupSpec, close, coset_split, lift_group, reduce_group,
                       transfer_to_split, with_floor)


@dataclass(frozen=True)
class KernelShape:
    a: int
    b: int

    def __str__(self) -> str:
        return f"Z/l^{self.a} x Z/l^{self.a + self.b}"


@dataclass(frozen=True)
class Determined:
    shape: KernelShape


@dataclass(frozen=True)
class Undetermined:
    a_min: int
    b_min: int


ShapeAtPrecision = Union[Determined, Undetermined]


def classify_matrix(M: MatMod) -> ShapeAtPrecision:
    if not M.is_invertible():
        raise PreconditionError(f"{M} is not invertible")
    a = M.identity_depth()
    if a == M.prec:
        return Undetermined(a, 0)
    val = det_shifted_val(M, a)
    if isinstance(val, Exact):
        return Determined(KernelShape(a, val.k - 2 * a))
    return Undetermined(a, val.n - 2 * a)


def _require_precision(G: FiniteSubgroup, a: int, b: int):
    if G.prec <= a + b:
        raise PrecisionError(f"M_{{{a},{b}}} is not determined mod {G.ell}^{G.prec}")


def mab_count(G: FiniteSubgroup, a: int, b: int) -> int:
    _require_precision(G, a, b)
    return G.strata.count(a, b)


def counting_measure(G: FiniteSubgroup, a: int, b: int) -> Fraction:
    """mu_{a,b}(n) = #M_{a,b}(n) / #G(n), which is mu_{a,b} once n > a + b."""
    return Fraction(mab_count(G, a, b), G.order)


# Stratum masks at precision t

def lift_mask(strata: Strata, a: int, b: int, t: int) -> np.ndarray:
    """Rows whose reduction mod ell**t is compatible with M_{a,b}, for GL2 and unramified cosets."""
    if t > a + b:
        return strata.mask(a, b)
    if a < t:
        return (strata.depth == a) & ~strata.exact
    return strata.depth == t


def complement_mask(strata: Strata, a: int, b: int, t: int) -> np.ndarray:
    """Same for complement rows of a ramified normalizer at ell = 2 (det(M - I) known mod 2**(t + 1))."""
    if 2 * a + b <= t:
        return strata.mask(a, b)
    return (strata.depth == a) & ~strata.exact


def _ramified_two(amb: AmbientGroup) -> bool:
    return amb.ell == 2 and amb.cartan_type == CartanType.RAMIFIED


def complement_strata(G: FiniteSubgroup, rows: np.ndarray) -> Strata:
    if _ramified_two(G.ambient):
        return scan_complement_two(rows, G.ambient.params.d, G.prec, G.jobs)
    return scan_strata(rows, G.ell, G.prec, G.jobs)


def complement_det_val(M: MatMod, p: CartanParams) -> TruncVal:
    """
    det(M - I) = 1 - z^2 + d*w^2 for M = (z, -d*w; w, -z), ell = 2.

    Squares of residues mod 2**n are known mod 2**(n + 1), so this is one
    digit sharper than det_shifted_val.
    """
    if M.ell != 2 or p.c != 0:
        raise PreconditionError("the sharper complement determinant needs ell = 2 and c = 0")
    if not in_complement(M, p):
        raise DomainError(f"{M} is not in the complement of the Cartan {p}")
    z, _, w, _ = M.packed
    return trunc_val(1 - z * z + p.d * w * w, 2, M.prec + 1)


def stratum_reduction(G: FiniteSubgroup, a: int, b: int, n: int) -> np.ndarray:
    """Rows of M_{a,b}(n): reductions mod ell**n of the elements of M_{a,b}."""
    P = max(G.prec, n, a + b + 1)
    lifted = lift_group(G, P)
    rows = lifted.elements[lifted.strata.mask(a, b)] % G.ell ** n
    return np.unique(rows, axis=0) if rows.size else rows.reshape(0, 4)


# Emptiness

def ambient_stratum_nonempty(amb: AmbientGroup, a: int, b: int) -> bool:
    if amb.kind == AmbientKind.GL2:
        return True
    if amb.kind != AmbientKind.CARTAN or amb.cartan_type == CartanType.RAMIFIED:
        raise PreconditionError(f"no closed emptiness rule for {amb}")
    if amb.cartan_type == CartanType.SPLIT:
        return not (amb.ell == 2 and a == 0)
    return b == 0


def _empty_tangent(G: FiniteSubgroup, a: int, b: int) -> bool:
    if not ambient_stratum_nonempty(G.ambient, a, b):
        return True
    n0 = G.prec
    if a >= n0:
        return False
    if b < n0 - a:
        return G.strata.count(a, b) == 0
    return G.strata.undetermined_count(a) == 0


def _empty_ramified(G: FiniteSubgroup, a: int, b: int) -> bool:
    G = with_floor(G)
    p = G.ambient.params
    route = ramified_route(p, G.ell)
    a = min(a, G.prec)
    if b <= route.direct_bound:
        return lift_group(G, max(G.prec, a + b + 1)).strata.count(a, b) == 0
    if route.transfer_from is None or b < route.transfer_from:
        return True
    image, da, db = transfer_to_split(G, p)
    return _empty_tangent(image, a + da, b - db)


def _empty_complement(G: FiniteSubgroup, rows: np.ndarray, a: int, b: int) -> bool:
    n0 = G.prec
    strata = complement_strata(G, rows)
    if _ramified_two(G.ambient):
        if a > 1:
            return True
        if 2 * a + b <= n0:
            return strata.count(a, b) == 0
        return strata.undetermined_count(a) == 0
    if a > 0:
        return True
    if b < n0:
        return strata.count(0, b) == 0
    return strata.undetermined_count(0) == 0


def _is_empty(G: FiniteSubgroup, a: int, b: int) -> bool:
    amb = G.ambient
    if amb.kind == AmbientKind.NORMALIZER:
        split = coset_split(G)
        cartan_part = G.derive(split.in_cartan, ambient=amb.as_cartan())
        if not _is_empty(cartan_part, a, b):
            return False
        return split.inside_cartan or _empty_complement(G, split.in_complement, a, b)
    if amb.cartan_type == CartanType.RAMIFIED:
        return _empty_ramified(G, a, b)
    return _empty_tangent(G, a, b)


def is_empty_mab(group: Union[SubgroupSpec, FiniteSubgroup], a: int, b: int) -> bool:
    """Decide M_{a,b} = {} from the group mod ell**level alone."""
    G = close(group) if isinstance(group, SubgroupSpec) else group
    empty = _is_empty(G, a, b)
    logging.debug(f"M_{{{a},{b}}} of {G} is {'empty' if empty else 'nonempty'}")
    return empty


# Lift counts

def _coset_mask(G: FiniteSubgroup, rows: np.ndarray, cartan: bool, a: int, b: int) -> np.ndarray:
    t = G.prec
    if cartan or not _ramified_two(G.ambient):
        return lift_mask(scan_strata(rows, G.ell, t, G.jobs), a, b, t)
    return complement_mask(scan_complement_two(rows, G.ambient.params.d, t, G.jobs), a, b, t)


def _stratum_rows(G: FiniteSubgroup, cartan: bool, a: int, b: int) -> np.ndarray:
    """Rows of G mod ell**G.prec satisfying the stratum conditions for the chosen coset."""
    amb = G.ambient
    if amb.kind == AmbientKind.NORMALIZER:
        split = coset_split(G)
        rows = split.in_cartan if cartan else split.in_complement
    else:
        rows = G.elements
    if cartan and amb.cartan_type == CartanType.RAMIFIED:
        # no closed lifting conditions here; use the exact reduction
        if amb.kind == AmbientKind.NORMALIZER:
            G = G.derive(rows, ambient=amb.as_cartan())
        return stratum_reduction(G, a, b, G.prec)
    return rows[_coset_mask(G, rows, cartan, a, b)] if rows.size else rows


def _at(G: FiniteSubgroup, n: int) -> FiniteSubgroup:
    return lift_group(G, n) if n >= G.prec else reduce_group(G, n)


def _lift_counts(G: FiniteSubgroup, cartan: bool, a: int, b: int, n: int) -> Dict[Packed, int]:
    low = _stratum_rows(_at(G, n), cartan, a, b)
    high = _stratum_rows(_at(G, n + 1), cartan, a, b)
    counts = {tuple(row): 0 for row in low.tolist()}
    if high.size:
        images, hits = np.unique(high % G.ell ** n, axis=0, return_counts=True)
        for row, hit in zip(images.tolist(), hits.tolist()):
            counts[tuple(row)] = counts.get(tuple(row), 0) + hit
    return counts


def _is_cartan_row(G: FiniteSubgroup, M: MatMod) -> bool:
    amb = G.ambient
    if amb.kind != AmbientKind.NORMALIZER:
        return amb.kind == AmbientKind.CARTAN
    return in_cartan(M, amb.params)


def lift_count_empirical(G: FiniteSubgroup, M: MatMod, a: int, b: int) -> int:
    """Number of elements of G mod ell**(n + 1) above M (mod ell**n) satisfying the M_{a,b} conditions."""
    n = M.prec
    if n < G.ambient.min_level:
        raise PreconditionError(f"{G.ambient} needs modulus exponent >= {G.ambient.min_level}")
    base = _at(G, n)
    if not base.contains(M):
        raise DomainError(f"{M} is not in {base}")
    cartan = _is_cartan_row(G, M)
    high = _stratum_rows(_at(G, n + 1), cartan, a, b)
    if not high.size:
        return 0
    return int(np.count_nonzero(np.all(high % G.ell ** n == np.array(M.packed), axis=1)))


def lift_count_table(G: FiniteSubgroup, a: int, b: int, n: int, cartan: bool = True) -> Dict[Packed, int]:
    """
    Lift counts from every row of M_{a,b}(n) to level n + 1.

    For normalizers `cartan` picks the coset; other ambients ignore it.
    Rows with no lift are reported with count 0.
    """
    if G.ambient.kind != AmbientKind.NORMALIZER:
        cartan = G.ambient.kind == AmbientKind.CARTAN
    return _lift_counts(G, cartan, a, b, n)
