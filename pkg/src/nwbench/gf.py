"""Exact arithmetic in GF(2^n) (polynomial basis) and GF(p), p an odd prime.

Elements are enumerated by their integer representation: the coefficient
bit-vector for characteristic 2 (bit i is the coefficient of x^i), the
residue for odd p.  Construction and circuit code rely on this order for
column indexing and for splitting the field into halves.

Raw-integer arithmetic lives on :class:`FieldSpec`; :class:`FieldElement`
wraps a value with operator overloads for readable formulas.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Iterator

from .errors import UsageError

# One irreducible (primitive) modulus per degree; bit i is the coefficient of x^i.
MODULI: dict[int, int] = {
    1: 0b11,  # x + 1
    2: 0b111,  # x^2 + x + 1
    3: 0b1011,  # x^3 + x + 1
    4: 0b10011,  # x^4 + x + 1
    5: 0b100101,  # x^5 + x^2 + 1
    6: 0b1000011,  # x^6 + x + 1
    7: 0b10000011,  # x^7 + x + 1
    8: 0b100011101,  # x^8 + x^4 + x^3 + x^2 + 1
}


def _clmul(a: int, b: int) -> int:
    out = 0
    while b:
        if b & 1:
            out ^= a
        a <<= 1
        b >>= 1
    return out


def _polymod(a: int, m: int) -> int:
    dm = m.bit_length()
    while a.bit_length() >= dm:
        a ^= m << (a.bit_length() - dm)
    return a


def is_irreducible_gf2(modulus: int) -> bool:
    """Trial division by every polynomial of degree 1..deg/2."""
    deg = modulus.bit_length() - 1
    if deg < 1:
        return False
    for d in range(1, deg // 2 + 1):
        for f in range(1 << d, 1 << (d + 1)):
            if _polymod(modulus, f) == 0:
                return False
    return True


def is_prime(p: int) -> bool:
    if p < 2:
        return False
    i = 2
    while i * i <= p:
        if p % i == 0:
            return False
        i += 1
    return True


@dataclass(frozen=True)
class FieldSpec:
    """A finite field GF(characteristic^degree).

    Use :func:`gf2n` or :func:`prime_field` rather than the constructor.
    """

    characteristic: int
    degree: int = 1
    modulus: int | None = None

    def __post_init__(self):
        if self.characteristic == 2:
            if self.modulus is None:
                raise UsageError("characteristic 2 requires a modulus")
            if self.modulus.bit_length() - 1 != self.degree:
                raise UsageError("modulus degree does not match field degree")
            if self.degree > 8:
                raise UsageError("degree > 8 is outside desk scale")
            if not is_irreducible_gf2(self.modulus):
                raise UsageError(f"modulus {self.modulus:#b} is reducible over GF(2)")
        else:
            if not is_prime(self.characteristic):
                raise UsageError(f"{self.characteristic} is not prime")
            if self.degree != 1 or self.modulus is not None:
                raise UsageError("odd characteristic supports prime fields only")

    @property
    def order(self) -> int:
        return self.characteristic**self.degree

    def elements(self) -> range:
        return range(self.order)

    def element(self, value: int) -> FieldElement:
        if not 0 <= value < self.order:
            raise UsageError(f"{value} is not a reduced element of GF({self.order})")
        return FieldElement(value, self)

    def __iter__(self) -> Iterator[FieldElement]:
        return (FieldElement(v, self) for v in self.elements())

    # Raw-integer arithmetic.

    def add(self, a: int, b: int) -> int:
        if self.characteristic == 2:
            return a ^ b
        return (a + b) % self.characteristic

    def neg(self, a: int) -> int:
        if self.characteristic == 2:
            return a
        return (-a) % self.characteristic

    def sub(self, a: int, b: int) -> int:
        return self.add(a, self.neg(b))

    def mul(self, a: int, b: int) -> int:
        return self._mul_table[a][b]

    def pow(self, a: int, e: int) -> int:
        if e < 0:
            return self.pow(self.inv(a), -e)
        out = 1
        while e:
            if e & 1:
                out = self.mul(out, a)
            a = self.mul(a, a)
            e >>= 1
        return out

    def inv(self, a: int) -> int:
        if a == 0:
            raise ZeroDivisionError("inverse of zero")
        return self.pow(a, self.order - 2)

    def div(self, a: int, b: int) -> int:
        return self.mul(a, self.inv(b))

    def trace(self, a: int) -> int:
        """Absolute trace to GF(2): a + a^2 + a^4 + ... + a^(2^(n-1))."""
        if self.characteristic != 2:
            raise UsageError("trace is defined here for characteristic 2 only")
        t, z = 0, a
        for _ in range(self.degree):
            t ^= z
            z = self.mul(z, z)
        if t not in (0, 1):
            raise ArithmeticError(f"trace of {a} left the prime field: {t}")
        return t

    def multiplicative_order(self, a: int) -> int:
        if a == 0:
            raise UsageError("zero has no multiplicative order")
        k, z = 1, a
        while z != 1:
            z = self.mul(z, a)
            k += 1
        return k

    @cached_property
    def _mul_table(self) -> tuple[tuple[int, ...], ...]:
        q = self.order
        if self.characteristic == 2:
            rows = [[_polymod(_clmul(a, b), self.modulus) for b in range(q)] for a in range(q)]
        else:
            rows = [[(a * b) % q for b in range(q)] for a in range(q)]
        return tuple(tuple(r) for r in rows)

    @cached_property
    def generator(self) -> int:
        return find_generator(self).value

    @cached_property
    def _log_table(self) -> dict[int, int]:
        g = self.generator
        logs, z = {}, 1
        for k in range(1, self.order):
            z = self.mul(z, g)
            logs.setdefault(z, k)
        return logs

    def log(self, a: int) -> int:
        """Discrete log base the canonical generator, in 1..q-1."""
        if a == 0:
            raise UsageError("log of zero")
        return self._log_table[a]


@dataclass(frozen=True)
class FieldElement:
    value: int
    spec: FieldSpec

    def _check(self, other: FieldElement) -> None:
        if not isinstance(other, FieldElement):
            raise UsageError(f"expected FieldElement, got {type(other).__name__}")
        if other.spec != self.spec:
            raise UsageError("field elements belong to different fields")

    def __add__(self, other: FieldElement) -> FieldElement:
        self._check(other)
        return FieldElement(self.spec.add(self.value, other.value), self.spec)

    def __sub__(self, other: FieldElement) -> FieldElement:
        self._check(other)
        return FieldElement(self.spec.sub(self.value, other.value), self.spec)

    def __neg__(self) -> FieldElement:
        return FieldElement(self.spec.neg(self.value), self.spec)

    def __mul__(self, other: FieldElement) -> FieldElement:
        self._check(other)
        return FieldElement(self.spec.mul(self.value, other.value), self.spec)

    def __truediv__(self, other: FieldElement) -> FieldElement:
        self._check(other)
        return FieldElement(self.spec.div(self.value, other.value), self.spec)

    def __pow__(self, e: int) -> FieldElement:
        return FieldElement(self.spec.pow(self.value, e), self.spec)

    def __int__(self) -> int:
        return self.value

    def __repr__(self) -> str:
        return f"GF({self.spec.order})({self.value})"


def gf2n(n: int, modulus: int | None = None) -> FieldSpec:
    """GF(2^n) with the tabulated modulus unless one is given."""
    if n < 1:
        raise UsageError("degree must be >= 1")
    if modulus is None:
        if n not in MODULI:
            raise UsageError(f"no tabulated modulus for degree {n}")
        modulus = MODULI[n]
    return FieldSpec(2, n, modulus)


def prime_field(p: int) -> FieldSpec:
    return FieldSpec(p)


def field_of_order(q: int) -> FieldSpec:
    """GF(q) for q a power of two (tabulated modulus) or an odd prime."""
    if q >= 2 and q & (q - 1) == 0:
        return gf2n(q.bit_length() - 1)
    if q > 2 and is_prime(q):
        return prime_field(q)
    raise UsageError(f"q={q} is neither a power of 2 nor an odd prime")


def mul(a: FieldElement, b: FieldElement) -> FieldElement:
    return a * b


def trace(a: FieldElement) -> int:
    return a.spec.trace(a.value)


def find_generator(spec: FieldSpec) -> FieldElement:
    """Smallest element (in enumeration order) of multiplicative order q-1."""
    q = spec.order
    for g in range(1, q):
        if spec.multiplicative_order(g) == q - 1:
            return FieldElement(g, spec)
    raise ArithmeticError(f"GF({q}) has no generator")  # unreachable for a field
