"""Sparse Laurent polynomials in ``v`` over the integers or over ``Z/mZ``.

A :class:`LaurentPoly` stores the exponent of its lowest term, a stride
(1, or 2 when every second coefficient is known to vanish) and the run of
coefficients between the lowest and the highest term.  Values are immutable.

>>> f = LaurentPoly.from_terms({-1: 1, 1: 1})
>>> (f * f).render()
'1*v^-2 + 2*v^0 + 1*v^2'
>>> f.bar() == f
True
"""

from __future__ import annotations

import math
from fractions import Fraction
from dataclasses import dataclass
from typing import Iterable, Mapping


@dataclass(frozen=True)
class CoefficientRing:
    """Either the exact integers (``modulus=None``) or ``Z/modulus``."""

    modulus: int | None = None

    def __post_init__(self):
        if self.modulus is not None and self.modulus < 2:
            raise ValueError(f"residue modulus must be >= 2, got {self.modulus}")

    @property
    def exact(self) -> bool:
        return self.modulus is None

    def reduce(self, c: int) -> int:
        return c if self.modulus is None else c % self.modulus

    def __repr__(self):
        return "ZZ" if self.modulus is None else f"Z/{self.modulus}"


EXACT = CoefficientRing()


def residue_ring(modulus: int) -> CoefficientRing:
    return CoefficientRing(int(modulus))


class RingMismatch(ValueError):
    pass


class LaurentPoly:
    __slots__ = ("valuation", "step", "coeffs", "ring")

    def __init__(self, valuation: int = 0, coeffs: Iterable[int] = (),
                 ring: CoefficientRing = EXACT, step: int = 1):
        if step not in (1, 2):
            raise ValueError("step must be 1 or 2")
        cs = [ring.reduce(int(c)) for c in coeffs]
        lo = 0
        while lo < len(cs) and cs[lo] == 0:
            lo += 1
        hi = len(cs)
        while hi > lo and cs[hi - 1] == 0:
            hi -= 1
        cs = cs[lo:hi]
        self.valuation = valuation + step * lo if cs else 0
        self.step = step if len(cs) > 1 else 1
        self.coeffs = tuple(cs)
        self.ring = ring

    # -- construction -----------------------------------------------------

    @classmethod
    def from_terms(cls, terms: Mapping[int, int], ring: CoefficientRing = EXACT) -> "LaurentPoly":
        terms = {a: c for a, c in terms.items() if ring.reduce(c) != 0}
        if not terms:
            return cls(ring=ring)
        lo, hi = min(terms), max(terms)
        return cls(lo, [terms.get(a, 0) for a in range(lo, hi + 1)], ring)

    @classmethod
    def monomial(cls, a: int, c: int = 1, ring: CoefficientRing = EXACT) -> "LaurentPoly":
        return cls(a, (c,), ring)

    @classmethod
    def zero(cls, ring: CoefficientRing = EXACT) -> "LaurentPoly":
        return cls(ring=ring)

    @classmethod
    def one(cls, ring: CoefficientRing = EXACT) -> "LaurentPoly":
        return cls(0, (1,), ring)

    # -- views ------------------------------------------------------------

    def terms(self) -> list[tuple[int, int]]:
        """Nonzero ``(exponent, coefficient)`` pairs in ascending exponent order."""
        return [(self.valuation + self.step * k, c)
                for k, c in enumerate(self.coeffs) if c != 0]

    def as_dict(self) -> dict[int, int]:
        return dict(self.terms())

    def dense(self) -> tuple[int, list[int]]:
        """``(valuation, coefficients)`` with stride 1."""
        if self.step == 1:
            return self.valuation, list(self.coeffs)
        out = [0] * (2 * len(self.coeffs) - 1)
        out[::2] = self.coeffs
        return self.valuation, out

    def is_zero(self) -> bool:
        return not self.coeffs

    @property
    def degree(self) -> int | None:
        if not self.coeffs:
            return None
        return self.valuation + self.step * (len(self.coeffs) - 1)

    def pack(self) -> "LaurentPoly":
        """Stride-2 form when all exponents share one parity, else ``self``."""
        if self.step == 2 or len(self.coeffs) < 2:
            return self
        if any(self.coeffs[1::2]):
            return self
        return LaurentPoly(self.valuation, self.coeffs[::2], self.ring, step=2)

    def unpack(self) -> "LaurentPoly":
        if self.step == 1:
            return self
        v, cs = self.dense()
        return LaurentPoly(v, cs, self.ring)

    def __bool__(self):
        return bool(self.coeffs)

    def __eq__(self, other):
        if isinstance(other, int):
            other = LaurentPoly.monomial(0, other, self.ring)
        if not isinstance(other, LaurentPoly):
            return NotImplemented
        return self.ring == other.ring and self.terms() == other.terms()

    def __hash__(self):
        return hash((self.ring, tuple(self.terms())))

    def __repr__(self):
        return f"LaurentPoly({self.render()!r}, ring={self.ring!r})"

    # -- arithmetic -------------------------------------------------------

    def _check(self, other: "LaurentPoly"):
        if self.ring != other.ring:
            raise RingMismatch(f"{self.ring!r} vs {other.ring!r}")

    def _coerce(self, other) -> "LaurentPoly":
        if isinstance(other, int):
            return LaurentPoly.monomial(0, other, self.ring)
        self._check(other)
        return other

    def __add__(self, other) -> "LaurentPoly":
        other = self._coerce(other)
        if not other.coeffs:
            return self
        if not self.coeffs:
            return other
        out = self.as_dict()
        for a, c in other.terms():
            out[a] = out.get(a, 0) + c
        res = LaurentPoly.from_terms(out, self.ring)
        if self.step == 2 and other.step == 2:
            res = res.pack()
        return res

    __radd__ = __add__

    def __neg__(self) -> "LaurentPoly":
        return LaurentPoly(self.valuation, [-c for c in self.coeffs], self.ring, self.step)

    def __sub__(self, other) -> "LaurentPoly":
        return self + (-self._coerce(other))

    def __rsub__(self, other) -> "LaurentPoly":
        return (-self) + other

    def __mul__(self, other) -> "LaurentPoly":
        if isinstance(other, int):
            return self.mul_monomial(0, other)
        self._check(other)
        if not self.coeffs or not other.coeffs:
            return LaurentPoly(ring=self.ring)
        va, ca = self.dense()
        vb, cb = other.dense()
        out = [0] * (len(ca) + len(cb) - 1)
        for i, x in enumerate(ca):
            if x:
                for j, y in enumerate(cb):
                    out[i + j] += x * y
        return LaurentPoly(va + vb, out, self.ring)

    __rmul__ = __mul__

    def mul_monomial(self, a: int, c: int = 1) -> "LaurentPoly":
        """``c * v**a * self``."""
        return LaurentPoly(self.valuation + a, [c * x for x in self.coeffs], self.ring, self.step)

    def bar(self) -> "LaurentPoly":
        """Substitute ``v -> 1/v``."""
        if not self.coeffs:
            return self
        return LaurentPoly(-self.degree, self.coeffs[::-1], self.ring, self.step)

    def sym_decompose(self) -> tuple["LaurentPoly", int, "LaurentPoly"]:
        """Split ``f = f_minus(1/v) + f0 + f_plus(v)``.

        Returns ``(f_minus, f0, f_sym)`` where ``f_minus`` has only positive
        exponents and ``f_sym = f_minus(1/v) + f0 + f_minus(v)`` is the
        bar-invariant part with ``f - f_sym`` in ``vZ[v]``.
        """
        neg = {-a: c for a, c in self.terms() if a < 0}
        f_minus = LaurentPoly.from_terms(neg, self.ring)
        f0 = self.coefficient_at(0)
        sym = dict(neg)
        for a, c in neg.items():
            sym[-a] = c
        if f0:
            sym[0] = f0
        return f_minus, f0, LaurentPoly.from_terms(sym, self.ring)

    # -- accessors --------------------------------------------------------

    def coefficient_at(self, a: int) -> int:
        k, r = divmod(a - self.valuation, self.step)
        if r or k < 0 or k >= len(self.coeffs):
            return 0
        return self.coeffs[k]

    def absolute_term(self) -> int:
        if not self.ring.exact:
            raise ValueError("absolute_term needs the exact integer ring")
        if self.coeffs and self.valuation < 0:
            raise ValueError("absolute_term of a Laurent polynomial with negative valuation")
        return self.coefficient_at(0)

    def is_in_vZv(self) -> bool:
        return not self.coeffs or self.valuation >= 1

    def evaluate(self, t: int) -> int | Fraction:
        if not self.ring.exact:
            raise ValueError("evaluation is only defined over the exact integers; reconstruct first")
        if not self.coeffs:
            return 0
        if t == 0:
            return self.absolute_term()
        total = sum(c * Fraction(t) ** a for a, c in self.terms())
        return int(total) if total.denominator == 1 else total

    def mu(self) -> int:
        return self.coefficient_at(1)

    def to_classical(self, length_diff: int) -> tuple[int, ...]:
        """Coefficients ``(P_0, P_1, ...)`` of ``P(q)`` with ``P(v^2) = v^d f(1/v)``."""
        out: dict[int, int] = {}
        for a, c in self.terms():
            e = length_diff - a
            if e < 0 or e % 2:
                raise ValueError(f"term v^{a} does not fit length difference {length_diff}")
            out[e // 2] = c
        if not out:
            return ()
        return tuple(out.get(k, 0) for k in range(max(out) + 1))

    # -- text form --------------------------------------------------------

    def render(self) -> str:
        ts = self.terms()
        if not ts:
            return "0"
        return " + ".join(f"{c}*v^{a}" for a, c in ts)

    @classmethod
    def parse(cls, text: str, ring: CoefficientRing = EXACT) -> "LaurentPoly":
        text = text.strip()
        if text == "0":
            return cls(ring=ring)
        terms: dict[int, int] = {}
        for part in text.split(" + "):
            c, _, a = part.partition("*v^")
            if not _:
                raise ValueError(f"malformed term {part!r}")
            terms[int(a)] = terms.get(int(a), 0) + int(c)
        return cls.from_terms(terms, ring)


def mu(f: LaurentPoly) -> int:
    """Coefficient of ``v``; for a KL polynomial this is the mu-value."""
    return f.mu()


def to_classical(f: LaurentPoly, length_diff: int) -> tuple[int, ...]:
    return f.to_classical(length_diff)


def crt_combine(residues: Iterable[tuple[int, int]]) -> int:
    """The unique integer in ``[0, prod(moduli))`` with the given residues."""
    value, modulus = 0, 1
    for r, m in residues:
        if m < 1:
            raise ValueError(f"bad modulus {m}")
        if math.gcd(modulus, m) != 1:
            raise ValueError(f"moduli not coprime: {modulus} and {m}")
        # value + modulus * t == r (mod m)
        t = ((r - value) * pow(modulus, -1, m)) % m
        value += modulus * t
        modulus *= m
    return value
