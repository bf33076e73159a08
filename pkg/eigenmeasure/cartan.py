# cartan.py
import logging
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from typing import Optional

import numpy as np
from typing_extensions import Self

from .errors import InvalidRingError, PreconditionError
from .modarith import MatMod, Prime, PrimeLike, as_prime, is_square_unit, sqrt_hensel, vp


class CartanType(str, Enum):
    SPLIT = "split"
    NONSPLIT = "nonsplit"
    RAMIFIED = "ramified"


class AmbientKind(str, Enum):
    GL2 = "gl2"
    CARTAN = "cartan"
    NORMALIZER = "normalizer"


@dataclass(frozen=True)
class CartanParams:
    """Parameters (c, d) of the quadratic order Z_ell[w] with w^2 = c*w + d."""
    c: int
    d: int

    def is_normal_form(self, ell: PrimeLike) -> bool:
        if self.c == 0:
            return self.d != 0
        return int(ell) == 2 and self.c == 1 and (self.d == 0 or self.d % 2 == 1)


@dataclass(frozen=True)
class TangentCard:
    t_all: int
    t_units: int
    t_sing_nonzero: int


def normalize_params(c0: int, d0: int, ell: PrimeLike) -> CartanParams:
    """
    Bring (c0, d0) to normal form.

    For ell odd (or c0 even) the square is completed: (0, d0 + c0^2/4). A
    non-integral result is replaced by an integer congruent to it modulo
    ell**(v + 3), which keeps its valuation and square class. For ell = 2 and
    c0 odd the parameters become (1, d1) with d1 = d0 + (c0^2 - 1)/4, or (1, 0)
    when d1 is even (the ring then splits).
    """
    ell = int(as_prime(ell))
    if ell == 2 and c0 % 2 == 1:
        d1 = d0 + (c0 * c0 - 1) // 4
        if d1 % 2 == 1:
            return CartanParams(1, d1)
        # 1 + 4*d1 = 1 mod 8 is a square unit, so the order is Z_2 x Z_2
        return CartanParams(1, 0)

    d = Fraction(d0) + Fraction(c0 * c0, 4)
    if d == 0:
        raise InvalidRingError(f"parameters ({c0}, {d0}) describe a non-reduced algebra")
    if d.denominator == 1:
        return CartanParams(0, int(d))
    modulus = ell ** (vp(d.numerator, ell) + 3)
    rep = d.numerator * pow(d.denominator, -1, modulus) % modulus
    logging.debug(f"replaced d = {d} by the integer {rep} mod {modulus}")
    return CartanParams(0, rep)


def classify(p: CartanParams, ell: PrimeLike) -> CartanType:
    ell = int(ell)
    if not p.is_normal_form(ell):
        raise PreconditionError(f"{p} is not in normal form at {ell}")
    if ell == 2:
        if p.c == 0:
            return CartanType.RAMIFIED
        return CartanType.SPLIT if p.d == 0 else CartanType.NONSPLIT
    if p.d % ell == 0:
        return CartanType.RAMIFIED
    return CartanType.SPLIT if is_square_unit(p.d, ell) else CartanType.NONSPLIT


def cartan_unit_count(ctype: CartanType, ell: PrimeLike) -> int:
    """#C(1)."""
    ell = int(ell)
    return {
        CartanType.SPLIT: (ell - 1) ** 2,
        CartanType.NONSPLIT: ell * ell - 1,
        CartanType.RAMIFIED: ell * (ell - 1),
    }[ctype]


@dataclass(frozen=True)
class AmbientGroup:
    kind: AmbientKind
    prime: Prime
    params: Optional[CartanParams] = None

    def __post_init__(self):
        if self.kind == AmbientKind.GL2:
            if self.params is not None:
                raise PreconditionError("GL2 takes no Cartan parameters")
        elif self.params is None or not self.params.is_normal_form(self.prime):
            raise PreconditionError(f"{self.kind.value} needs normal-form parameters, got {self.params}")

    @classmethod
    def gl2(cls, ell: PrimeLike) -> Self:
        return cls(AmbientKind.GL2, as_prime(ell))

    @classmethod
    def cartan(cls, params: CartanParams, ell: PrimeLike) -> Self:
        return cls(AmbientKind.CARTAN, as_prime(ell), params)

    @classmethod
    def normalizer(cls, params: CartanParams, ell: PrimeLike) -> Self:
        return cls(AmbientKind.NORMALIZER, as_prime(ell), params)

    @property
    def ell(self) -> int:
        return self.prime.ell

    @property
    def dim(self) -> int:
        return 4 if self.kind == AmbientKind.GL2 else 2

    @property
    def cartan_type(self) -> Optional[CartanType]:
        if self.params is None:
            return None
        return classify(self.params, self.ell)

    @property
    def tangent(self) -> TangentCard:
        return tangent_cards(self)

    @property
    def min_level(self) -> int:
        """Smallest modulus exponent at which the coset predicates are disjoint."""
        if self.kind == AmbientKind.NORMALIZER and self.ell == 2 and self.cartan_type == CartanType.RAMIFIED:
            return 2
        return 1

    def as_cartan(self) -> "AmbientGroup":
        if self.kind == AmbientKind.GL2:
            raise PreconditionError("GL2 has no Cartan to restrict to")
        return AmbientGroup.cartan(self.params, self.prime)

    def __str__(self) -> str:
        if self.params is None:
            return f"GL2(Z_{self.ell})"
        return f"{self.kind.value}({self.params.c},{self.params.d}) at {self.ell}"


def tangent_cards(amb: AmbientGroup) -> TangentCard:
    ell = amb.ell
    if amb.kind == AmbientKind.GL2:
        return TangentCard(ell ** 4, ell * (ell - 1) ** 2 * (ell + 1), (ell + 1) * (ell * ell - 1))
    ctype = amb.cartan_type
    if ctype == CartanType.SPLIT:
        return TangentCard(ell * ell, (ell - 1) ** 2, 2 * (ell - 1))
    if ctype == CartanType.NONSPLIT:
        return TangentCard(ell * ell, ell * ell - 1, 0)
    return TangentCard(ell * ell, ell * (ell - 1), ell - 1)


def ambient_order(amb: AmbientGroup, n: int) -> int:
    if n < amb.min_level:
        raise PreconditionError(f"{amb} needs modulus exponent >= {amb.min_level}, got {n}")
    ell = amb.ell
    if amb.kind == AmbientKind.GL2:
        return ell ** (4 * (n - 1)) * (ell * ell - 1) * (ell * ell - ell)
    cartan = cartan_unit_count(amb.cartan_type, ell) * ell ** (2 * n - 2)
    return 2 * cartan if amb.kind == AmbientKind.NORMALIZER else cartan


def _require_invertible(M: MatMod):
    if not M.is_invertible():
        raise PreconditionError(f"{M} is not invertible")


def in_cartan(M: MatMod, p: CartanParams) -> bool:
    """M has the shape (x, d*y; y, x + c*y) mod ell**prec."""
    _require_invertible(M)
    x, top, y, bottom = M.packed
    q = M.modulus
    return (top - p.d * y) % q == 0 and (bottom - x - p.c * y) % q == 0


def in_complement(M: MatMod, p: CartanParams) -> bool:
    """M has the shape (z, -d*w + c*z; w, -z) mod ell**prec."""
    _require_invertible(M)
    z, top, w, bottom = M.packed
    q = M.modulus
    return (bottom + z) % q == 0 and (top + p.d * w - p.c * z) % q == 0


def normalizer_coset_rep(p: CartanParams, ell: PrimeLike, prec: int = 1) -> MatMod:
    """The involution (1, c; 0, -1), which generates N together with C."""
    return MatMod.from_ints([[1, p.c], [0, -1]], ell, prec)


def split_diagonalize(M: MatMod, p: CartanParams) -> MatMod:
    """
    Diagonal model of a split Cartan element.

    ell odd: (x, d*y; y, x) -> diag(x - y*s, x + y*s) with s = sqrt(d).
    ell = 2: (x, 0; y, x + y) -> diag(x, x + y).
    """
    if classify(p, M.ell) != CartanType.SPLIT:
        raise PreconditionError(f"{p} is not split at {M.ell}")
    if not in_cartan(M, p):
        raise PreconditionError(f"{M} is not in the Cartan {p}")
    x, _, y, _ = M.packed
    q = M.modulus
    if M.ell == 2:
        return MatMod((x, 0, 0, (x + y) % q), M.ell, M.prec)
    s = sqrt_hensel(p.d, M.ell, M.prec).value
    return MatMod(((x - s * y) % q, 0, 0, (x + s * y) % q), M.ell, M.prec)


def diagonal_rows(P: np.ndarray, Q: np.ndarray, p: CartanParams, ell: PrimeLike, prec: int) -> np.ndarray:
    """Packed rows of the (c, d) model for the diagonal entries P, Q mod ell**prec."""
    ell = int(ell)
    if classify(p, ell) != CartanType.SPLIT:
        raise PreconditionError(f"{p} is not split at {ell}")
    q = ell ** prec
    P, Q = np.asarray(P, dtype=np.int64) % q, np.asarray(Q, dtype=np.int64) % q
    if ell == 2:
        x, y = P, (Q - P) % q
    else:
        s = sqrt_hensel(p.d, ell, prec).value
        half = pow(2, -1, q)
        x = (P + Q) % q * half % q
        y = (Q - P) % q * (half * pow(s, -1, q) % q) % q
    return np.stack([x, p.d * y % q, y, (x + p.c * y) % q], axis=1)


def from_diagonal(P: int, Q: int, p: CartanParams, ell: PrimeLike, prec: int) -> MatMod:
    """Inverse of split_diagonalize: diag(P, Q) back to the (c, d) model."""
    row = diagonal_rows(np.array([P]), np.array([Q]), p, ell, prec)[0]
    return MatMod(tuple(int(e) for e in row), int(ell), prec)


@dataclass(frozen=True)
class RamifiedRoute:
    """How the b-axis of a ramified Cartan with d = m * ell**v is covered."""
    v: int
    square: bool
    direct_bound: int
    transfer_from: Optional[int]


def ramified_route(p: CartanParams, ell: PrimeLike) -> RamifiedRoute:
    """
    b <= direct_bound is counted directly; beyond it the strata vanish, except
    from transfer_from on when d is a square (then they come from a split model).
    """
    ell = int(ell)
    if classify(p, ell) != CartanType.RAMIFIED:
        raise PreconditionError(f"{p} is not ramified at {ell}")
    v = vp(p.d, ell)
    unit = p.d // ell ** v
    if v % 2 == 1:
        return RamifiedRoute(v, False, v, None)
    if not is_square_unit(unit, ell):
        return RamifiedRoute(v, False, v + 2 if ell == 2 else v, None)
    return RamifiedRoute(v, True, v, v + 3 if ell == 2 else v + 1)
