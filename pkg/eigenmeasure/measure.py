# measure.py
"""
Haar measure families {mu_{a,b}} of the 1-eigenspace strata.

A family is a finite partition of N x N into admissible cells S = A x B,
each carrying a constant c_S with mu_{a,b} = c_S * ell^-(dim*a + b) on S.
Base values are always counted in the closed group; everything beyond the
level follows from the lifting laws.
"""
import logging
from collections import defaultdict
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

from sympy import is_quad_residue
from typing_extensions import Self

from .cartan import (AmbientGroup, AmbientKind, CartanParams, CartanType, TangentCard,
                     ramified_route)
from .eigenspace import complement_strata, counting_measure, is_empty_mab
from .errors import ConsistencyError, PartitionError, PreconditionError
from .modarith import PrimeLike, Rat, format_rat, vp
from .subgroup import FiniteSubgroup, SubgroupSpec, close, coset_split, lift_group, transfer_to_split, with_floor


@dataclass(frozen=True)
class NatSet:
    """A finite set of naturals, or the tail {n : n >= start}."""
    values: Tuple[int, ...] = ()
    start: Optional[int] = None

    def __post_init__(self):
        values = tuple(self.values)
        object.__setattr__(self, 'values', values)
        if self.start is not None and (values or self.start < 0):
            raise PreconditionError("a tail carries only its start")
        if any(v < 0 for v in values) or any(x >= y for x, y in zip(values, values[1:])):
            raise PreconditionError(f"{values} is not strictly increasing in N")

    @classmethod
    def finite(cls, values: Iterable[int]) -> Self:
        return cls(tuple(sorted(set(values))))

    @classmethod
    def single(cls, n: int) -> Self:
        return cls((n,))

    @classmethod
    def tail(cls, start: int) -> Self:
        return cls(start=start)

    @property
    def is_tail(self) -> bool:
        return self.start is not None

    @property
    def is_empty(self) -> bool:
        return not self.is_tail and not self.values

    @property
    def minimum(self) -> int:
        if self.is_empty:
            raise PreconditionError("empty set has no minimum")
        return self.start if self.is_tail else self.values[0]

    @property
    def breakpoint(self) -> int:
        """Membership is constant from here on."""
        if self.is_tail:
            return self.start
        return self.values[-1] + 1 if self.values else 0

    def contains(self, n: int) -> bool:
        return n >= self.start if self.is_tail else n in self.values

    def shift_down(self, k: int) -> "NatSet":
        if self.is_tail:
            return NatSet.tail(max(self.start - k, 0))
        return NatSet(tuple(v - k for v in self.values if v >= k))

    def shift_up(self, k: int) -> "NatSet":
        if self.is_tail:
            return NatSet.tail(self.start + k)
        return NatSet(tuple(v + k for v in self.values))

    def restrict_from(self, k: int) -> "NatSet":
        if self.is_tail:
            return NatSet.tail(max(self.start, k))
        return NatSet(tuple(v for v in self.values if v >= k))

    def geometric_sum(self, q: Union[int, Rat]) -> Fraction:
        """Sum of q^-n over the set."""
        q = Fraction(q)
        if self.is_tail:
            return q ** -self.start * q / (q - 1)
        return sum((q ** -v for v in self.values), Fraction(0))

    def __str__(self) -> str:
        if self.is_tail:
            return f"[{self.start},inf)"
        return "{" + ",".join(map(str, self.values)) + "}"


NATURALS = NatSet.tail(0)


@dataclass(frozen=True)
class AdmissibleSet:
    a_set: NatSet
    b_set: NatSet

    def __post_init__(self):
        if self.a_set.is_empty or self.b_set.is_empty:
            raise PreconditionError("admissible sets are nonempty")

    def contains(self, a: int, b: int) -> bool:
        return self.a_set.contains(a) and self.b_set.contains(b)

    def mass(self, ell: int, dim: int) -> Fraction:
        """Sum of ell^-(dim*a + b) over the set."""
        return self.a_set.geometric_sum(ell ** dim) * self.b_set.geometric_sum(ell)

    def __str__(self) -> str:
        return f"{self.a_set} x {self.b_set}"


@dataclass(frozen=True)
class MeasureCell:
    region: AdmissibleSet
    constant: Fraction
    provenance: str = ""

    def __post_init__(self):
        object.__setattr__(self, 'constant', Fraction(self.constant))
        if self.constant < 0:
            raise ConsistencyError(f"negative constant {self.constant} on {self.region}")

    @property
    def a_set(self) -> NatSet:
        return self.region.a_set

    @property
    def b_set(self) -> NatSet:
        return self.region.b_set


def cell(a_set: NatSet, b_set: NatSet, constant: Rat, provenance: str = "") -> MeasureCell:
    return MeasureCell(AdmissibleSet(a_set, b_set), Fraction(constant), provenance)


@dataclass(frozen=True)
class MeasureFamily:
    ell: int
    ambient: AmbientGroup
    cells: Tuple[MeasureCell, ...] = field(default_factory=tuple)

    def __post_init__(self):
        ordered = sorted(self.cells, key=lambda c: (c.a_set.minimum, c.b_set.minimum))
        object.__setattr__(self, 'cells', tuple(ordered))

    @property
    def dim(self) -> int:
        return self.ambient.dim

    def law(self, c: MeasureCell) -> str:
        return f"{format_rat(c.constant)} * {self.ell}^-({self.dim}a+b)"

    def find(self, a: int, b: int) -> MeasureCell:
        for c in self.cells:
            if c.region.contains(a, b):
                return c
        raise PartitionError(f"no cell contains ({a}, {b})")

    def breakpoints(self) -> Tuple[int, int]:
        return (max(c.a_set.breakpoint for c in self.cells),
                max(c.b_set.breakpoint for c in self.cells))


def evaluate(fam: MeasureFamily, a: int, b: int) -> Fraction:
    c = fam.find(a, b)
    return c.constant * Fraction(1, fam.ell ** (fam.dim * a + b))


def check_partition(fam: MeasureFamily):
    """Every (a, b) lies in exactly one cell; a grid up to the breakpoints decides it."""
    if not fam.cells:
        raise PartitionError("family has no cells")
    ka, kb = fam.breakpoints()
    for a in range(ka + 1):
        for b in range(kb + 1):
            owners = [c for c in fam.cells if c.region.contains(a, b)]
            if len(owners) != 1:
                raise PartitionError(f"({a}, {b}) lies in {len(owners)} cells")


def total_mass(fam: MeasureFamily) -> Fraction:
    return sum((c.constant * c.region.mass(fam.ell, fam.dim) for c in fam.cells), Fraction(0))


def combine(families: Sequence[MeasureFamily], weights: Sequence[Rat],
            ambient: Optional[AmbientGroup] = None, provenance: str = "combined") -> MeasureFamily:
    """Weighted sum of families over a common refinement of their cells."""
    if not families or len(families) != len(weights):
        raise PreconditionError("need one weight per family")
    ell, dim = families[0].ell, families[0].dim
    if any(f.ell != ell or f.dim != dim for f in families):
        raise PreconditionError("families live on different ambients")
    ka = max(f.breakpoints()[0] for f in families)
    kb = max(f.breakpoints()[1] for f in families)

    def axis(k: int) -> List[NatSet]:
        return [NatSet.single(n) for n in range(k)] + [NatSet.tail(k)]

    cells = []
    for a_set in axis(ka):
        for b_set in axis(kb):
            a, b = a_set.minimum, b_set.minimum
            constant = sum((Fraction(w) * f.find(a, b).constant for f, w in zip(families, weights)), Fraction(0))
            cells.append(cell(a_set, b_set, constant, provenance))
    return MeasureFamily(ell, ambient or families[0].ambient, tuple(cells))


# Lifting laws

def f_general(n: int, a: int, b: int, tc: TangentCard, ell: PrimeLike) -> int:
    """Number of lifts of an element of M_{a,b}(n) to M_{a,b}(n + 1), GL2 or unramified Cartan."""
    ell = int(ell)
    if n < a:
        return 1
    if n == a:
        return tc.t_units if b == 0 else tc.t_sing_nonzero
    if n < a + b:
        return tc.t_all // ell
    if n == a + b:
        return tc.t_all - tc.t_all // ell
    return tc.t_all


def f_normalizer_complement(n: int, a: int, b: int, ell: PrimeLike,
                            ctype: Optional[CartanType] = None) -> int:
    """
    Lifts in the complement of the Cartan inside its normalizer.

    ell = 2 uses the ramified table unless `ctype` says the Cartan is unramified.
    """
    ell = int(ell)
    if ell == 2 and ctype in (None, CartanType.RAMIFIED):
        if a > 1:
            raise PreconditionError(f"complement strata are empty for a = {a} > 1")
        return 2 if n < 2 * a + b else 4
    if a != 0:
        raise PreconditionError(f"complement strata are empty for a = {a} > 0")
    if n < b:
        return ell
    if n == b:
        return ell * (ell - 1)
    return ell * ell


# Index-one families

def _least_nonresidue(ell: int) -> int:
    return next(n for n in range(2, ell) if not is_quad_residue(n, ell))


def standard_params(ctype: CartanType, ell: PrimeLike) -> CartanParams:
    ell = int(ell)
    if ctype == CartanType.SPLIT:
        return CartanParams(1, 0) if ell == 2 else CartanParams(0, 1)
    if ctype == CartanType.NONSPLIT:
        return CartanParams(1, 1) if ell == 2 else CartanParams(0, _least_nonresidue(ell))
    raise PreconditionError("ramified Cartans have no index-one closed form")


def _cellize(ell: int, ambient: AmbientGroup, constants: Dict[Tuple[int, int], Rat], note: str) -> MeasureFamily:
    """Constants keyed by (a_min, b_min) with 0 meaning {0} and 1 meaning [1,inf)."""
    def axis(k: int) -> NatSet:
        return NatSet.single(0) if k == 0 else NatSet.tail(1)

    cells = tuple(cell(axis(a), axis(b), c, note) for (a, b), c in constants.items())
    return MeasureFamily(ell, ambient, cells)


def closed_form_gl2(ell: PrimeLike) -> MeasureFamily:
    l = Fraction(int(ell))
    return _cellize(int(ell), AmbientGroup.gl2(ell), {
        (0, 0): (l ** 3 - 2 * l ** 2 - l + 3) / ((l - 1) ** 2 * (l + 1)),
        (0, 1): (l ** 2 - l - 1) / (l * (l - 1)),
        (1, 0): 1,
        (1, 1): (l + 1) / l,
    }, "closed form, GL2")


def closed_form_split(ell: PrimeLike) -> MeasureFamily:
    l = Fraction(int(ell))
    amb = AmbientGroup.cartan(standard_params(CartanType.SPLIT, ell), ell)
    return _cellize(int(ell), amb, {
        (0, 0): (l - 2) ** 2 / (l - 1) ** 2,
        (0, 1): 2 * (l - 2) / (l - 1),
        (1, 0): 1,
        (1, 1): 2,
    }, "closed form, split Cartan")


def closed_form_nonsplit(ell: PrimeLike) -> MeasureFamily:
    l = Fraction(int(ell))
    amb = AmbientGroup.cartan(standard_params(CartanType.NONSPLIT, ell), ell)
    cells = (
        cell(NatSet.single(0), NatSet.single(0), (l ** 2 - 2) / (l ** 2 - 1), "closed form, nonsplit Cartan"),
        cell(NatSet.tail(1), NatSet.single(0), 1, "closed form, nonsplit Cartan"),
        cell(NATURALS, NatSet.tail(1), 0, "nonsplit strata have b = 0"),
    )
    return MeasureFamily(int(ell), amb, cells)


def closed_form_complement(ell: PrimeLike, ambient: AmbientGroup) -> MeasureFamily:
    """mu* measured inside the complement coset alone."""
    l = Fraction(int(ell))
    cells = (
        cell(NatSet.single(0), NatSet.single(0), (l - 2) / (l - 1), "closed form, complement"),
        cell(NatSet.single(0), NatSet.tail(1), 1, "closed form, complement"),
        cell(NatSet.tail(1), NATURALS, 0, "complement strata have a = 0"),
    )
    return MeasureFamily(int(ell), ambient, cells)


def closed_form_normalizer(ell: PrimeLike, ctype: CartanType) -> MeasureFamily:
    cartan = closed_form_split(ell) if ctype == CartanType.SPLIT else closed_form_nonsplit(ell)
    amb = AmbientGroup.normalizer(cartan.ambient.params, ell)
    half = Fraction(1, 2)
    return combine([cartan, closed_form_complement(ell, amb)], [half, half], ambient=amb,
                   provenance="closed form, normalizer")


# Engines

def family_gl2_or_unramified(G: FiniteSubgroup) -> MeasureFamily:
    amb = G.ambient
    if amb.kind == AmbientKind.NORMALIZER or amb.cartan_type == CartanType.RAMIFIED:
        raise PreconditionError(f"{amb} is not GL2 or an unramified Cartan")
    ell, dim, n0, N = G.ell, G.dim, G.prec, G.order
    tc = amb.tangent
    strata = G.strata
    scale = ell ** (dim * (n0 - 1))
    cells = []
    for a in range(n0):
        for b in range(n0 - a):
            constant = Fraction(strata.count(a, b), N) * ell ** (dim * a + b)
            cells.append(cell(NatSet.single(a), NatSet.single(b), constant, f"counted mod {ell}^{n0}"))
        tail = n0 - a
        if is_empty_mab(G, a, tail):
            constant = Fraction(0)
        else:
            constant = Fraction(strata.undetermined_count(a), N) * (ell - 1) * ell ** (n0 - a - 1 + dim * a)
        cells.append(cell(NatSet.single(a), NatSet.tail(tail), constant, f"counted mod {ell}^{n0}, lifted"))
    cells.append(cell(NatSet.tail(n0), NatSet.single(0), Fraction(tc.t_units * scale, N), "identity lifts, b = 0"))
    cells.append(cell(NatSet.tail(n0), NatSet.tail(1),
                      Fraction(tc.t_sing_nonzero * (ell - 1) * scale, N), "identity lifts, b > 0"))
    logging.debug(f"GL2/unramified engine on {G}: {len(cells)} cells")
    return MeasureFamily(ell, amb, tuple(cells))


def family_ramified(G: FiniteSubgroup, p: CartanParams) -> MeasureFamily:
    G = with_floor(G)
    ell, n0 = G.ell, G.prec
    route = ramified_route(p, ell)
    bound = route.direct_bound
    lifted = lift_group(G, n0 + bound + 1)
    strata, N = lifted.strata, lifted.order
    cells = []
    for a in range(n0 + 1):
        a_set = NatSet.single(a) if a < n0 else NatSet.tail(n0)
        for b in range(bound + 1):
            constant = Fraction(strata.count(a, b), N) * ell ** (2 * a + b)
            cells.append(cell(a_set, NatSet.single(b), constant, f"counted mod {ell}^{lifted.prec}"))

    if route.transfer_from is None:
        cells.append(cell(NATURALS, NatSet.tail(bound + 1), 0, f"empty beyond b = {bound}"))
        return MeasureFamily(ell, G.ambient, tuple(cells))

    if route.transfer_from > bound + 1:
        band = NatSet.finite(range(bound + 1, route.transfer_from))
        cells.append(cell(NATURALS, band, 0, "empty band"))
    image, da, db = transfer_to_split(G, p)
    for c in family_gl2_or_unramified(image).cells:
        a_set = c.a_set.shift_down(da)
        b_set = c.b_set.restrict_from(1).shift_up(db)
        if a_set.is_empty or b_set.is_empty:
            continue
        cells.append(cell(a_set, b_set, c.constant, f"split model, shifted by ({da}, {db})"))
    logging.debug(f"ramified engine on {G}: v = {route.v}, {len(cells)} cells")
    return MeasureFamily(ell, G.ambient, tuple(cells))


def _cartan_family(H: FiniteSubgroup) -> MeasureFamily:
    if H.ambient.cartan_type == CartanType.RAMIFIED:
        return family_ramified(H, H.ambient.params)
    return family_gl2_or_unramified(H)


def _complement_family(G: FiniteSubgroup, rows) -> MeasureFamily:
    """mu(M*_{a,b}) relative to all of G."""
    amb = G.ambient
    ell, n0, N = G.ell, G.prec, G.order
    strata = complement_strata(G, rows)
    cells = []
    if ell == 2 and amb.cartan_type == CartanType.RAMIFIED:
        for a in (0, 1):
            for b in range(n0 - 2 * a + 1):
                constant = Fraction(strata.count(a, b), N) * 2 ** (2 * a + b)
                cells.append(cell(NatSet.single(a), NatSet.single(b), constant, "complement, counted"))
            constant = Fraction(strata.undetermined_count(a), N) * 2 ** n0
            cells.append(cell(NatSet.single(a), NatSet.tail(n0 - 2 * a + 1), constant, "complement, lifted"))
        cells.append(cell(NatSet.tail(2), NATURALS, 0, "complement strata have a <= 1"))
    else:
        for b in range(n0):
            constant = Fraction(strata.count(0, b), N) * ell ** b
            cells.append(cell(NatSet.single(0), NatSet.single(b), constant, "complement, counted"))
        constant = Fraction(strata.undetermined_count(0), N) * (ell - 1) * ell ** (n0 - 1)
        cells.append(cell(NatSet.single(0), NatSet.tail(n0), constant, "complement, lifted"))
        cells.append(cell(NatSet.tail(1), NATURALS, 0, "complement strata have a = 0"))
    return MeasureFamily(ell, amb, tuple(cells))


def family_normalizer(G: FiniteSubgroup, p: CartanParams) -> MeasureFamily:
    amb = G.ambient
    split = coset_split(G)
    if split.inside_cartan:
        logging.info(f"{G} lies inside the Cartan; measuring it there")
        return _cartan_family(G.derive(G.elements, ambient=amb.as_cartan()))
    H = G.derive(split.in_cartan, ambient=amb.as_cartan())
    return combine([_cartan_family(H), _complement_family(G, split.in_complement)],
                   [Fraction(1, 2), Fraction(1)], ambient=amb, provenance="Cartan half + complement")


def family(group: Union[SubgroupSpec, FiniteSubgroup]) -> MeasureFamily:
    """The checked measure family of a closed group."""
    G = close(group) if isinstance(group, SubgroupSpec) else group
    amb = G.ambient
    logging.info(f"Computing the measure family of {G}")
    if amb.kind == AmbientKind.NORMALIZER:
        fam = family_normalizer(G, amb.params)
    elif amb.cartan_type == CartanType.RAMIFIED:
        fam = family_ramified(G, amb.params)
    else:
        fam = family_gl2_or_unramified(G)

    check_partition(fam)
    mass = total_mass(fam)
    if mass != 1:
        raise ConsistencyError(f"family of {G} has total mass {mass}")
    logging.info(f"Family of {G}: {len(fam.cells)} cells, mass 1")
    return fam


# Checks and read-outs

def stabilization_bound(p: CartanParams, ell: PrimeLike, n0: int, a: int) -> int:
    """From this b on, M_{a,b}(n0) of a ramified Cartan no longer depends on b."""
    return max(1 + vp(4 * p.d, ell), n0 - a + vp(2 * p.d, ell))


def asymptotic_constant(fam: MeasureFamily, a: int) -> Fraction:
    """c with mu_{a,b} = c * ell^-b for every large b."""
    _, kb = fam.breakpoints()
    c = fam.find(a, kb)
    if not c.b_set.is_tail:
        raise PartitionError(f"row a = {a} does not end in a tail")
    return c.constant / fam.ell ** (fam.dim * a)


def asymptotic_constants(fam: MeasureFamily, rows: Iterable[int] = (0, 1)) -> Dict[int, Fraction]:
    return {a: asymptotic_constant(fam, a) for a in rows}


@dataclass(frozen=True)
class CheckRecord:
    a: int
    b: int
    expected: Fraction
    observed: Fraction

    @property
    def passed(self) -> bool:
        return self.expected == self.observed


def verify_family(fam: MeasureFamily, G: FiniteSubgroup, a_max: int, b_max: int) -> List[CheckRecord]:
    """Compare the family against direct counts, scanning each needed modulus once."""
    by_modulus = defaultdict(list)
    for a in range(a_max + 1):
        for b in range(b_max + 1):
            by_modulus[max(G.prec, a + b + 1)].append((a, b))
    records = []
    for n in sorted(by_modulus):
        lifted = lift_group(G, n)
        for a, b in by_modulus[n]:
            records.append(CheckRecord(a, b, evaluate(fam, a, b), counting_measure(lifted, a, b)))
    failed = [r for r in records if not r.passed]
    if failed:
        logging.warning(f"{len(failed)} of {len(records)} pairs disagree, first at ({failed[0].a}, {failed[0].b})")
    return sorted(records, key=lambda r: (r.a, r.b))
