"""Exact coefficient fields: the rationals and prime fields F_p.

Scalars are plain Python objects: ``Fraction`` over Q, ``int`` in
``range(p)`` over F_p.  No floating point exists anywhere in this package.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction


def _is_prime(p: int) -> bool:
    if p < 2:
        return False
    d = 2
    while d * d <= p:
        if p % d == 0:
            return False
        d += 1
    return True


@dataclass(frozen=True)
class FieldSpec:
    """A coefficient field: kind 'rationals' (char 0) or 'prime-field' (char p)."""

    kind: str
    characteristic: int

    def __post_init__(self):
        if self.kind == "rationals":
            if self.characteristic != 0:
                raise ValueError("rationals have characteristic 0")
        elif self.kind == "prime-field":
            if not _is_prime(self.characteristic):
                raise ValueError("characteristic %r is not prime" % (self.characteristic,))
        else:
            raise ValueError("unknown field kind %r" % (self.kind,))

    # -- scalar arithmetic ------------------------------------------------

    @property
    def p(self) -> int:
        return self.characteristic

    def zero(self):
        return 0 if self.p else Fraction(0)

    def one(self):
        return 1 if self.p else Fraction(1)

    def coerce(self, x):
        """Bring an int/Fraction/str into canonical scalar form."""
        if isinstance(x, str):
            x = Fraction(x)
        if self.p:
            if isinstance(x, Fraction):
                den = x.denominator % self.p
                if den == 0:
                    raise ZeroDivisionError("denominator divisible by %d" % self.p)
                return (x.numerator * pow(den, -1, self.p)) % self.p
            return int(x) % self.p
        return Fraction(x)

    def add(self, a, b):
        return (a + b) % self.p if self.p else a + b

    def sub(self, a, b):
        return (a - b) % self.p if self.p else a - b

    def mul(self, a, b):
        return (a * b) % self.p if self.p else a * b

    def neg(self, a):
        return (-a) % self.p if self.p else -a

    def inv(self, a):
        if self.is_zero(a):
            raise ZeroDivisionError("inverting zero")
        return pow(a, -1, self.p) if self.p else 1 / a

    def div(self, a, b):
        return self.mul(a, self.inv(b))

    def is_zero(self, a) -> bool:
        return a == 0

    def is_one(self, a) -> bool:
        return a == self.one()

    # -- names -------------------------------------------------------------

    def name(self) -> str:
        return "Q" if not self.p else "F%d" % self.p

    def format_scalar(self, a) -> str:
        if self.p:
            return str(a % self.p)
        return str(Fraction(a))

    def parse_scalar(self, s: str):
        return self.coerce(Fraction(s))

    def __repr__(self):
        return "FieldSpec(%s)" % self.name()


def field_from_name(name: str) -> FieldSpec:
    name = name.strip()
    if name == "Q":
        return QQ
    if name.startswith("F"):
        return FieldSpec("prime-field", int(name[1:]))
    raise ValueError("unrecognized field name %r" % (name,))


QQ = FieldSpec("rationals", 0)
F2 = FieldSpec("prime-field", 2)
F3 = FieldSpec("prime-field", 3)
