# modarith.py
import logging
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence, Tuple, Union

from sympy import is_quad_residue, isprime, multiplicity, sqrt_mod
from typing_extensions import Self

from .errors import DomainError, PrecisionError, PreconditionError

Rat = Fraction
Packed = Tuple[int, int, int, int]


@dataclass(frozen=True)
class Prime:
    ell: int

    def __post_init__(self):
        if isinstance(self.ell, bool) or not isinstance(self.ell, int) or not isprime(self.ell):
            raise PreconditionError(f"{self.ell!r} is not a prime")

    def __int__(self) -> int:
        return self.ell

    def __index__(self) -> int:
        return self.ell

    def __str__(self) -> str:
        return str(self.ell)


PrimeLike = Union[Prime, int]


def as_prime(ell: PrimeLike) -> Prime:
    return ell if isinstance(ell, Prime) else Prime(int(ell))


def format_rat(x: Rat) -> str:
    """Canonical "num/den" form, lowest terms, positive denominator."""
    x = Fraction(x)
    return f"{x.numerator}/{x.denominator}"


def vp(x: int, ell: PrimeLike) -> int:
    """Exact valuation of a nonzero integer."""
    if x == 0:
        raise PreconditionError("valuation of 0 is not finite")
    return int(multiplicity(int(ell), abs(x)))


# Truncated valuations

@dataclass(frozen=True)
class Exact:
    k: int

    def __str__(self) -> str:
        return f"={self.k}"


@dataclass(frozen=True)
class AtLeast:
    n: int

    def __str__(self) -> str:
        return f">={self.n}"


TruncVal = Union[Exact, AtLeast]


def trunc_val(x: int, ell: PrimeLike, prec: int) -> TruncVal:
    """Valuation of an integer that is only known modulo ell**prec."""
    ell = int(ell)
    x %= ell ** prec
    if x == 0:
        return AtLeast(prec)
    return Exact(vp(x, ell))


# Residues

@dataclass(frozen=True)
class Residue:
    value: int
    prec: int
    ell: int

    def __post_init__(self):
        if self.prec < 1:
            raise PreconditionError(f"precision must be positive, got {self.prec}")
        if not 0 <= self.value < self.ell ** self.prec:
            raise PreconditionError(f"{self.value} is not reduced mod {self.ell}^{self.prec}")

    @classmethod
    def of(cls, x: int, ell: PrimeLike, prec: int) -> Self:
        ell = int(ell)
        return cls(x % ell ** prec, prec, ell)

    @property
    def modulus(self) -> int:
        return self.ell ** self.prec

    def _coerce(self, other: Union["Residue", int]) -> "Residue":
        if isinstance(other, int):
            return Residue.of(other, self.ell, self.prec)
        if other.ell != self.ell or other.prec != self.prec:
            raise PrecisionError(
                f"cannot combine residues mod {self.ell}^{self.prec} and {other.ell}^{other.prec}"
            )
        return other

    def __add__(self, other):
        other = self._coerce(other)
        return Residue.of(self.value + other.value, self.ell, self.prec)

    __radd__ = __add__

    def __sub__(self, other):
        other = self._coerce(other)
        return Residue.of(self.value - other.value, self.ell, self.prec)

    def __rsub__(self, other):
        return self._coerce(other) - self

    def __mul__(self, other):
        other = self._coerce(other)
        return Residue.of(self.value * other.value, self.ell, self.prec)

    __rmul__ = __mul__

    def __neg__(self):
        return Residue.of(-self.value, self.ell, self.prec)

    def is_unit(self) -> bool:
        return self.value % self.ell != 0

    def inverse(self) -> "Residue":
        if not self.is_unit():
            raise PreconditionError(f"{self.value} is not a unit mod {self.ell}^{self.prec}")
        return Residue(pow(self.value, -1, self.modulus), self.prec, self.ell)

    def valuation(self) -> TruncVal:
        return trunc_val(self.value, self.ell, self.prec)

    def reduce(self, prec: int) -> "Residue":
        if prec > self.prec:
            raise PrecisionError(f"cannot raise precision from {self.prec} to {prec}")
        return Residue.of(self.value, self.ell, prec)

    def __str__(self) -> str:
        return f"{self.value} mod {self.ell}^{self.prec}"


# 2x2 matrices

def mul_packed(x: Packed, y: Packed, q: int) -> Packed:
    """Row-major product of two packed matrices mod q."""
    return (
        (x[0] * y[0] + x[1] * y[2]) % q,
        (x[0] * y[1] + x[1] * y[3]) % q,
        (x[2] * y[0] + x[3] * y[2]) % q,
        (x[2] * y[1] + x[3] * y[3]) % q,
    )


@dataclass(frozen=True)
class MatMod:
    packed: Packed
    ell: int
    prec: int

    def __post_init__(self):
        if len(self.packed) != 4:
            raise PreconditionError("a matrix needs exactly four entries")
        if self.prec < 1:
            raise PreconditionError(f"precision must be positive, got {self.prec}")
        q = self.ell ** self.prec
        if any(not 0 <= e < q for e in self.packed):
            raise PreconditionError(f"entries {self.packed} are not reduced mod {self.ell}^{self.prec}")

    @classmethod
    def from_ints(cls, rows: Sequence, ell: PrimeLike, prec: int) -> Self:
        """Build from [[a, b], [c, d]] or a row-major quadruple, reducing mod ell**prec."""
        ell = int(ell)
        flat = [e for row in rows for e in row] if rows and isinstance(rows[0], (list, tuple)) else list(rows)
        if len(flat) != 4 or any(isinstance(e, bool) or not isinstance(e, int) for e in flat):
            raise PreconditionError(f"not a 2x2 integer matrix: {rows!r}")
        q = ell ** prec
        return cls(tuple(e % q for e in flat), ell, prec)

    @classmethod
    def identity(cls, ell: PrimeLike, prec: int) -> Self:
        ell = int(ell)
        one = 1 % ell ** prec
        return cls((one, 0, 0, one), ell, prec)

    @property
    def modulus(self) -> int:
        return self.ell ** self.prec

    @property
    def entries(self) -> Tuple[Tuple[Residue, Residue], Tuple[Residue, Residue]]:
        r = [Residue(e, self.prec, self.ell) for e in self.packed]
        return (r[0], r[1]), (r[2], r[3])

    @property
    def rows(self) -> list:
        a, b, c, d = self.packed
        return [[a, b], [c, d]]

    def __matmul__(self, other: "MatMod") -> "MatMod":
        return mat_mul(self, other)

    def det(self) -> Residue:
        a, b, c, d = self.packed
        return Residue.of(a * d - b * c, self.ell, self.prec)

    def is_invertible(self) -> bool:
        return self.det().is_unit()

    def inverse(self) -> "MatMod":
        if not self.is_invertible():
            raise PreconditionError(f"{self} is not invertible")
        a, b, c, d = self.packed
        inv = self.det().inverse().value
        q = self.modulus
        return MatMod(((d * inv) % q, (-b * inv) % q, (-c * inv) % q, (a * inv) % q), self.ell, self.prec)

    def reduce(self, prec: int) -> "MatMod":
        if prec > self.prec:
            raise PrecisionError(f"cannot raise precision from {self.prec} to {prec}")
        q = self.ell ** prec
        return MatMod(tuple(e % q for e in self.packed), self.ell, prec)

    def minus_identity(self) -> Packed:
        a, b, c, d = self.packed
        q = self.modulus
        return ((a - 1) % q, b, c, (d - 1) % q)

    def identity_depth(self) -> int:
        """Largest k <= prec with self = I mod ell**k."""
        diff = [e for e in self.minus_identity() if e]
        if not diff:
            return self.prec
        return min(vp(e, self.ell) for e in diff)

    def __str__(self) -> str:
        return f"{self.rows} mod {self.ell}^{self.prec}"


def mat_mul(A: MatMod, B: MatMod) -> MatMod:
    if A.ell != B.ell or A.prec != B.prec:
        raise PrecisionError(f"cannot multiply matrices mod {A.ell}^{A.prec} and {B.ell}^{B.prec}")
    return MatMod(mul_packed(A.packed, B.packed, A.modulus), A.ell, A.prec)


def mat_inverse(A: MatMod) -> MatMod:
    return A.inverse()


def det_shifted_val(M: MatMod, a: int) -> TruncVal:
    """
    Valuation of det(M - I) for M = I mod ell**a.

    Writing M - I = ell**a * N with N known mod ell**(prec - a), det(M - I) is
    known mod ell**(a + prec).

    Raises:
        PreconditionError: if a is out of range or M is not I mod ell**a
    """
    if not 0 <= a <= M.prec:
        raise PreconditionError(f"shift {a} outside 0..{M.prec}")
    scale = M.ell ** a
    diff = M.minus_identity()
    if any(e % scale for e in diff):
        raise PreconditionError(f"{M} is not the identity mod {M.ell}^{a}")
    n0, n1, n2, n3 = (e // scale for e in diff)
    inner = trunc_val(n0 * n3 - n1 * n2, M.ell, M.prec - a)
    if isinstance(inner, Exact):
        return Exact(2 * a + inner.k)
    return AtLeast(2 * a + inner.n)


# Squares

def is_square_unit(d: int, ell: PrimeLike) -> bool:
    ell = int(ell)
    if d % ell == 0:
        raise PreconditionError(f"{d} is not a unit at {ell}")
    if ell == 2:
        return d % 8 == 1
    return bool(is_quad_residue(d % ell, ell))


def sqrt_hensel(d: int, ell: PrimeLike, prec: int) -> Residue:
    """
    Square root of d = ell**(2k) * m in Z_ell, truncated.

    The unit part is taken as the smaller of the two genuine square-root
    truncations of m at the working precision (mod 8 at least for ell = 2).
    The choice is made afresh at each precision, so roots returned for
    different precisions need not reduce to one another: sqrt(6) at 5 is 1
    mod 5 but 9 mod 25. Callers needing compatible roots ask once at the
    highest precision and reduce.

    Returns:
        r = ell**k * u as a residue mod ell**(prec + k), with r*r = d mod ell**(prec + 2k)

    Raises:
        DomainError: if d is not a square in Z_ell
    """
    ell = int(ell)
    if prec < 1:
        raise PreconditionError(f"precision must be positive, got {prec}")
    if d == 0:
        raise DomainError("0 has no square root of finite valuation")
    v = vp(d, ell)
    unit = d // ell ** v
    if v % 2 or not is_square_unit(unit, ell):
        raise DomainError(f"{d} is not a square in Z_{ell}")
    k = v // 2
    if ell == 2:
        work = max(prec, 3)
        wide = 2 ** (work + 1)
        roots = sqrt_mod(unit % wide, wide, all_roots=True)
        u = min({r % 2 ** work for r in roots}) % 2 ** prec
    else:
        q = ell ** prec
        u = min(sqrt_mod(unit % q, q, all_roots=True))
    logging.debug(f"sqrt of {d} at {ell}^{prec}: unit part {u}, shift {k}")
    return Residue(ell ** k * u, prec + k, ell)
