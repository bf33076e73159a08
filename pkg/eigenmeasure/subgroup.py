# subgroup.py
import logging
from collections import deque
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterator, Optional, Tuple

import numpy as np

from .cartan import (AmbientGroup, AmbientKind, CartanParams, CartanType, ambient_order,
                     diagonal_rows, in_cartan, in_complement, ramified_route)
from .config import ENGINE_CONFIG
from .errors import ConsistencyError, PreconditionError, ResourceError, SpecError
from .modarith import MatMod, mul_packed, sqrt_hensel
from .scan import Strata, scan_strata


def in_ambient(M: MatMod, amb: AmbientGroup) -> bool:
    if not M.is_invertible():
        return False
    if amb.kind == AmbientKind.GL2:
        return True
    if amb.kind == AmbientKind.CARTAN:
        return in_cartan(M, amb.params)
    return in_cartan(M, amb.params) or in_complement(M, amb.params)


@dataclass(frozen=True)
class SubgroupSpec:
    ambient: AmbientGroup
    level: int
    generators: Tuple[MatMod, ...] = ()
    budget: Optional[int] = None

    def __post_init__(self):
        object.__setattr__(self, 'generators', tuple(self.generators))
        if self.level < self.ambient.min_level:
            raise SpecError(f"{self.ambient} needs level >= {self.ambient.min_level}, got {self.level}")
        for g in self.generators:
            if g.ell != self.ambient.ell or g.prec != self.level:
                raise SpecError(f"generator {g} is not a matrix mod {self.ambient.ell}^{self.level}")
            if not g.is_invertible():
                raise SpecError(f"generator {g} is not invertible")
            if not in_ambient(g, self.ambient):
                raise SpecError(f"generator {g} does not lie in {self.ambient}")


@dataclass(frozen=True, eq=False)
class FiniteSubgroup:
    """The reduction G(prec), stored as sorted unique packed rows."""
    prec: int
    ambient: AmbientGroup
    elements: np.ndarray
    budget: int = field(default_factory=lambda: ENGINE_CONFIG['budget'])
    jobs: int = field(default_factory=lambda: ENGINE_CONFIG['jobs'])

    def __post_init__(self):
        rows = np.unique(np.asarray(self.elements, dtype=np.int64).reshape(-1, 4), axis=0)
        rows.setflags(write=False)
        object.__setattr__(self, 'elements', rows)

    def __eq__(self, other) -> bool:
        if not isinstance(other, FiniteSubgroup):
            return NotImplemented
        return (self.prec == other.prec and self.ambient == other.ambient
                and np.array_equal(self.elements, other.elements))

    __hash__ = None

    @property
    def ell(self) -> int:
        return self.ambient.ell

    @property
    def modulus(self) -> int:
        return self.ell ** self.prec

    @property
    def order(self) -> int:
        return int(self.elements.shape[0])

    @property
    def dim(self) -> int:
        return self.ambient.dim

    @cached_property
    def _keys(self) -> frozenset:
        return frozenset(map(tuple, self.elements.tolist()))

    @cached_property
    def strata(self) -> Strata:
        return scan_strata(self.elements, self.ell, self.prec, self.jobs)

    def contains(self, M: MatMod) -> bool:
        return M.ell == self.ell and M.prec == self.prec and M.packed in self._keys

    def matrices(self) -> Iterator[MatMod]:
        for row in self.elements.tolist():
            yield MatMod(tuple(row), self.ell, self.prec)

    def derive(self, rows: np.ndarray, prec: Optional[int] = None,
               ambient: Optional[AmbientGroup] = None) -> "FiniteSubgroup":
        return FiniteSubgroup(prec or self.prec, ambient or self.ambient, rows,
                              budget=self.budget, jobs=self.jobs)

    def __len__(self) -> int:
        return self.order

    def __str__(self) -> str:
        return f"G({self.prec}) in {self.ambient}, order {self.order}"


def _guard(rows: int, budget: int, n: int):
    if rows * 4 > budget:
        raise ResourceError("enumeration exceeds the budget", modulus_exp=n, predicted=rows * 4)


def _grid(k: int, width: int) -> np.ndarray:
    return np.indices((k,) * width, dtype=np.int64).reshape(width, -1).T


def cartan_mask(rows: np.ndarray, p: CartanParams, q: int) -> np.ndarray:
    return (((rows[:, 1] - (p.d % q) * rows[:, 2]) % q == 0)
            & ((rows[:, 3] - rows[:, 0] - (p.c % q) * rows[:, 2]) % q == 0))


def complement_mask(rows: np.ndarray, p: CartanParams, q: int) -> np.ndarray:
    return (((rows[:, 3] + rows[:, 0]) % q == 0)
            & ((rows[:, 1] + (p.d % q) * rows[:, 2] - (p.c % q) * rows[:, 0]) % q == 0))


def _cartan_rows(x: np.ndarray, y: np.ndarray, p: CartanParams, q: int) -> np.ndarray:
    return np.stack([x % q, (p.d % q) * y % q, y % q, (x + (p.c % q) * y) % q], axis=-1)


def _complement_rows(z: np.ndarray, w: np.ndarray, p: CartanParams, q: int) -> np.ndarray:
    return np.stack([z % q, (-(p.d % q) * w + (p.c % q) * z) % q, w % q, (-z) % q], axis=-1)


def _lift_rows(rows: np.ndarray, amb: AmbientGroup, m: int, n: int) -> np.ndarray:
    """Every ambient matrix mod ell**n reducing to one of `rows` mod ell**m."""
    if n == m:
        return rows
    ell = amb.ell
    step, q, k = ell ** m, ell ** n, ell ** (n - m)
    if amb.kind == AmbientKind.GL2:
        offsets = _grid(k, 4) * step
        return (rows[:, None, :] + offsets[None, :, :]).reshape(-1, 4)
    p = amb.params
    shifts = _grid(k, 2) * step
    first = rows[:, 0][:, None] + shifts[None, :, 0]
    second = rows[:, 2][:, None] + shifts[None, :, 1]
    lifted = _cartan_rows(first, second, p, q)
    if amb.kind == AmbientKind.NORMALIZER:
        in_c = cartan_mask(rows, p, step)
        lifted = np.where(in_c[:, None, None], lifted, _complement_rows(first, second, p, q))
    return lifted.reshape(-1, 4)


def enumerate_ambient(amb: AmbientGroup, n: int, budget: Optional[int] = None) -> np.ndarray:
    """All rows of G'(n)."""
    budget = budget or ENGINE_CONFIG['budget']
    _guard(ambient_order(amb, n), budget, n)
    ell = amb.ell
    if amb.kind == AmbientKind.GL2:
        base = _grid(ell, 4)
        base = base[(base[:, 0] * base[:, 3] - base[:, 1] * base[:, 2]) % ell != 0]
        return _lift_rows(base, amb, 1, n)
    p = amb.params
    q = ell ** n
    pairs = _grid(q, 2)
    x, y = pairs[:, 0], pairs[:, 1]
    xr, yr = x % ell, y % ell
    norm = (xr * (xr + p.c * yr) - p.d * yr * yr) % ell
    rows = _cartan_rows(x[norm != 0], y[norm != 0], p, q)
    if amb.kind == AmbientKind.NORMALIZER:
        cnorm = (-xr * xr + p.d * yr * yr - p.c * xr * yr) % ell
        rows = np.concatenate([rows, _complement_rows(x[cnorm != 0], y[cnorm != 0], p, q)])
    return rows


def close(spec: SubgroupSpec, jobs: Optional[int] = None) -> FiniteSubgroup:
    """Breadth-first closure of the generators mod ell**level (full group when there are none)."""
    amb, n = spec.ambient, spec.level
    budget = spec.budget or ENGINE_CONFIG['budget']
    jobs = jobs or ENGINE_CONFIG['jobs']
    if not spec.generators:
        rows = enumerate_ambient(amb, n, budget)
        logging.info(f"Enumerated {amb} mod {amb.ell}^{n}: {len(rows)} elements")
        return FiniteSubgroup(n, amb, rows, budget=budget, jobs=jobs)

    q = amb.ell ** n
    gens = [g.packed for g in spec.generators]
    identity = MatMod.identity(amb.ell, n).packed
    seen = {identity}
    queue = deque([identity])
    while queue:
        x = queue.popleft()
        for g in gens:
            y = mul_packed(x, g, q)
            if y not in seen:
                seen.add(y)
                queue.append(y)
        _guard(len(seen), budget, n)
    logging.info(f"Closed {len(gens)} generator(s) in {amb} mod {amb.ell}^{n}: {len(seen)} elements")
    return FiniteSubgroup(n, amb, np.array(sorted(seen), dtype=np.int64), budget=budget, jobs=jobs)


def lift_group(G: FiniteSubgroup, n: int) -> FiniteSubgroup:
    if n < G.prec:
        raise PreconditionError(f"cannot lift from {G.prec} down to {n}")
    if n == G.prec:
        return G
    predicted = G.order * G.ell ** (G.dim * (n - G.prec))
    _guard(predicted, G.budget, n)
    rows = _lift_rows(G.elements, G.ambient, G.prec, n)
    logging.debug(f"Lifted {G} to {G.ell}^{n}: {predicted} elements")
    return G.derive(rows, prec=n)


def reduce_group(G: FiniteSubgroup, m: int) -> FiniteSubgroup:
    if not G.ambient.min_level <= m <= G.prec:
        raise PreconditionError(f"cannot reduce {G} to modulus exponent {m}")
    if m == G.prec:
        return G
    return G.derive(G.elements % G.ell ** m, prec=m)


def smaller_level_exists(G: FiniteSubgroup) -> bool:
    """True when G(prec) is already the full preimage of G(prec - 1)."""
    m = G.prec - 1
    if m < G.ambient.min_level:
        return False
    try:
        return lift_group(reduce_group(G, m), G.prec).order == G.order
    except ResourceError as e:
        logging.debug(f"Skipped level diagnostic: {str(e)}")
        return False


def index_and_level(G: FiniteSubgroup) -> Tuple[int, int]:
    total = ambient_order(G.ambient, G.prec)
    if total % G.order:
        raise ConsistencyError(f"{G} has an order not dividing {total}")
    if smaller_level_exists(G):
        logging.info(f"{G} is the preimage of its reduction mod {G.ell}^{G.prec - 1}; a smaller level exists")
    return total // G.order, G.prec


@dataclass(frozen=True)
class CosetSplit:
    in_cartan: np.ndarray
    in_complement: np.ndarray

    @property
    def inside_cartan(self) -> bool:
        return self.in_complement.shape[0] == 0


def coset_split(G: FiniteSubgroup) -> CosetSplit:
    amb = G.ambient
    if amb.kind != AmbientKind.NORMALIZER:
        raise PreconditionError(f"{amb} is not a Cartan normalizer")
    if G.prec < amb.min_level:
        raise PreconditionError(f"coset split of {amb} needs modulus exponent >= {amb.min_level}")
    q = G.modulus
    c_mask = cartan_mask(G.elements, amb.params, q)
    n_mask = complement_mask(G.elements, amb.params, q)
    if np.any(c_mask & n_mask) or not np.all(c_mask | n_mask):
        raise ConsistencyError(f"coset predicates of {amb} do not partition {G}")
    return CosetSplit(G.elements[c_mask], G.elements[n_mask])


def transfer_to_split(G: FiniteSubgroup, p: CartanParams) -> Tuple[FiniteSubgroup, int, int]:
    """
    Move G inside a ramified Cartan (0, d), d = m * ell**v with m a square,
    onto an isomorphic subgroup of a split model.

    Conjugating by diag(1, sqrt(d)) sends (x, d*y; y, x) to (x, s*y; s*y, x)
    in the (0, 1) Cartan, at modulus ell**(prec + v/2). For ell = 2 the (0, 1)
    Cartan is itself ramified and (X, Z; Z, X) is further sent to
    diag(X + Z, X - Z), written in the (1, 0) model one modulus higher.

    Returns:
        (image group, shift in a, shift in b): M_{a,b}(G) matches
        M_{a + da, b - db}(image) for every b beyond the direct range.
    """
    ell = G.ell
    route = ramified_route(p, ell)
    if not route.square:
        raise PreconditionError(f"d = {p.d} is not a square in Z_{ell}")
    k = route.v // 2
    n1 = G.prec + k
    q1 = ell ** n1
    s = sqrt_hensel(p.d, ell, n1).value % q1
    lifted = lift_group(G, n1).elements
    x, y = lifted[:, 0], lifted[:, 2]
    sy = (s * y) % q1
    split_odd = G.derive(np.stack([x, sy, sy, x], axis=1), prec=n1,
                         ambient=AmbientGroup.cartan(CartanParams(0, 1), ell))
    if ell != 2:
        logging.info(f"Transferred {G} onto {split_odd}")
        return split_odd, k, route.v

    n2 = n1 + 1
    q2 = 2 ** n2
    rows = lift_group(split_odd, n2).elements
    big, small = (rows[:, 0] + rows[:, 1]) % q2, (rows[:, 0] - rows[:, 1]) % q2
    split = CartanParams(1, 0)
    diagonal = split_odd.derive(diagonal_rows(big, small, split, 2, n2), prec=n2,
                                ambient=AmbientGroup.cartan(split, 2))
    logging.info(f"Transferred {G} onto {diagonal}")
    return diagonal, k + 1, route.v + 2


def with_floor(G: FiniteSubgroup) -> FiniteSubgroup:
    """Lift ramified groups at ell = 2 to modulus at least 4."""
    if G.ell == 2 and G.prec < 2 and G.ambient.cartan_type == CartanType.RAMIFIED:
        return lift_group(G, 2)
    return G
