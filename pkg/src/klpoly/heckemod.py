"""Elements of the parabolic module ``M`` indexed by a Bruhat map.

An element is a block of Laurent polynomials sharing one exponent window:
``rows`` (map indices, descending) and ``coef[k, c]`` = coefficient of
``v**(low + c)`` in the coefficient of ``M_{rows[k]}``.  Coefficients live in
an ``int64`` array while they provably fit and in an ``object`` array of
Python integers otherwise.

The generators act on the right::

    M_y C_s = M_{ys} + v M_y        ys in W^J, ys > y
            = M_{ys} + v^-1 M_y     ys in W^J, ys < y
            = (v + v^-1) M_y        ys not in W^J
"""

from __future__ import annotations

from typing import Iterable, Mapping

import numpy as np

from .bruhatmap import BruhatMap
from .laurent import EXACT, CoefficientRing, LaurentPoly, RingMismatch

# |entries| below this can be added pairwise in int64 without overflow
SAFE = 2**61
# residue moduli up to this keep products of two residues inside int64
SMALL_MODULUS = 2**31


class OutsideInterval(RuntimeError):
    """A term was pushed out of the interval covered by the Bruhat map."""


def work_dtype(ring: CoefficientRing):
    if ring.modulus is not None and ring.modulus > SMALL_MODULUS:
        return object
    return np.int64


def maxabs(arr: np.ndarray) -> int:
    if arr.size == 0:
        return 0
    if arr.dtype == object:
        return max(abs(int(a)) for a in arr.flat)
    return int(np.abs(arr).max())


def widen(arr: np.ndarray) -> np.ndarray:
    return arr if arr.dtype == object else arr.astype(object)


def reduce_ring(arr: np.ndarray, ring: CoefficientRing) -> np.ndarray:
    if ring.modulus is not None:
        arr %= ring.modulus
    return arr


class ModuleElement:
    __slots__ = ("bmap", "ring", "rows", "low", "coef", "_maxabs")

    def __init__(self, bmap: BruhatMap, ring: CoefficientRing, rows, low: int, coef,
                 normalized: bool = False):
        self.bmap = bmap
        self.ring = ring
        self._maxabs = None
        rows = np.asarray(rows, dtype=np.int64)
        coef = np.asarray(coef)
        if coef.dtype != object:
            coef = coef.astype(np.int64, copy=False)
        if normalized:
            self.rows, self.low, self.coef = rows, low, coef
            return
        if len(rows) and (rows.min() < 1 or rows.max() > bmap.n):
            raise IndexError("row index outside the Bruhat map")
        coef = reduce_ring(coef.copy(), ring)
        nz = coef.any(axis=1) if coef.size else np.zeros(len(rows), bool)
        rows, coef = rows[nz], coef[nz]
        if len(np.unique(rows)) != len(rows):
            raise ValueError("duplicate rows")
        order = np.argsort(-rows, kind="stable")
        rows, coef = rows[order], coef[order]
        if len(rows):
            cols = np.flatnonzero(coef.any(axis=0))
            coef = coef[:, cols[0]:cols[-1] + 1]
            low += int(cols[0])
        else:
            coef = coef[:, :0]
            low = 0
        if coef.dtype == object and len(rows) and maxabs(coef) < SAFE:
            coef = coef.astype(np.int64)
        self.rows, self.low, self.coef = rows, low, coef

    # --- construction ------------------------------------------------------

    @classmethod
    def zero(cls, bmap: BruhatMap, ring: CoefficientRing = EXACT) -> "ModuleElement":
        return cls(bmap, ring, np.zeros(0, np.int64), 0, np.zeros((0, 0), work_dtype(ring)), True)

    @classmethod
    def basis(cls, bmap: BruhatMap, i: int, ring: CoefficientRing = EXACT) -> "ModuleElement":
        bmap._check(i)
        return cls(bmap, ring, np.array([i]), 0, np.ones((1, 1), work_dtype(ring)), True)

    @classmethod
    def from_terms(cls, bmap: BruhatMap, terms: Mapping[int, LaurentPoly],
                   ring: CoefficientRing = EXACT) -> "ModuleElement":
        terms = {i: f for i, f in terms.items() if not f.is_zero()}
        if not terms:
            return cls.zero(bmap, ring)
        lo = min(f.valuation for f in terms.values())
        hi = max(f.degree for f in terms.values())
        rows = sorted(terms, reverse=True)
        big = any(abs(c) >= SAFE for f in terms.values() for c in f.coeffs)
        coef = np.zeros((len(rows), hi - lo + 1), dtype=object if big else work_dtype(ring))
        for k, i in enumerate(rows):
            f = terms[i]
            if f.ring != ring:
                raise RingMismatch(f"{f.ring!r} vs {ring!r}")
            for a, c in f.terms():
                coef[k, a - lo] = c
        return cls(bmap, ring, rows, lo, coef)

    # --- views -------------------------------------------------------------

    def __len__(self):
        return len(self.rows)

    @property
    def maxabs(self) -> int:
        if self._maxabs is None:
            self._maxabs = maxabs(self.coef)
        return self._maxabs

    @property
    def nbytes(self) -> int:
        if self.coef.dtype == object:
            return self.rows.nbytes + 8 * self.coef.size + sum(c.__sizeof__() for c in self.coef.flat)
        return self.rows.nbytes + self.coef.nbytes

    def _poly(self, k: int) -> LaurentPoly:
        return LaurentPoly(self.low, [int(c) for c in self.coef[k]], self.ring)

    def terms(self) -> list[tuple[int, LaurentPoly]]:
        """``(index, coefficient)`` pairs with descending index."""
        return [(int(i), self._poly(k)) for k, i in enumerate(self.rows)]

    def as_dict(self) -> dict[int, LaurentPoly]:
        return dict(self.terms())

    def support(self) -> list[int]:
        return [int(i) for i in self.rows]

    def coefficient_of(self, i: int) -> LaurentPoly:
        pos = np.searchsorted(-self.rows, -i)
        if pos < len(self.rows) and self.rows[pos] == i:
            return self._poly(int(pos))
        return LaurentPoly.zero(self.ring)

    def values_at(self, t: int) -> list[int]:
        """Each coefficient evaluated at ``v = t`` (``t = 1`` or ``-1``), row order."""
        if t not in (1, -1):
            raise ValueError("only v = 1 and v = -1 are supported")
        k, w = self.coef.shape
        signs = np.array([t ** ((self.low + c) % 2) for c in range(w)], dtype=np.int64)
        if self.coef.dtype == object or self.maxabs * max(w, 1) >= SAFE:
            return [int(sum(int(a) * int(b) for a, b in zip(row, signs))) for row in self.coef]
        return [int(v) for v in self.coef @ signs]

    def leading(self) -> tuple[int, LaurentPoly]:
        if not len(self.rows):
            raise ValueError("zero element has no leading term")
        return int(self.rows[0]), self._poly(0)

    def __eq__(self, other):
        if not isinstance(other, ModuleElement):
            return NotImplemented
        return (self.bmap is other.bmap and self.ring == other.ring
                and np.array_equal(self.rows, other.rows)
                and (not len(self.rows) or self.low == other.low)
                and self.coef.shape == other.coef.shape
                and bool((self.coef == other.coef).all()))

    def __repr__(self):
        body = " + ".join(f"({f.render()})*M{i}" for i, f in self.terms()) or "0"
        return f"ModuleElement({body})"

    # --- arithmetic --------------------------------------------------------

    def _same(self, other: "ModuleElement"):
        if self.bmap is not other.bmap:
            raise ValueError("elements indexed by different Bruhat maps")
        if self.ring != other.ring:
            raise RingMismatch(f"{self.ring!r} vs {other.ring!r}")

    def act_Cs(self, s: int) -> "ModuleElement":
        """Right action of the generator ``C_s``."""
        bm = self.bmap
        if not 1 <= s <= bm.rank:
            raise IndexError(f"generator {s} out of range")
        if not len(self.rows):
            return self
        rows, coef = self.rows, self.coef
        if coef.dtype != object and self.maxabs >= SAFE:
            coef = widen(coef)
        t = bm.table[rows, s - 1]
        if (t == 0).any():
            bad = int(rows[np.flatnonzero(t == 0)[0]])
            raise OutsideInterval(f"M_{bad} C_{s} leaves the interval")
        k, w = coef.shape
        inside = t > 0
        lens = bm.lengths
        up = inside & (lens[np.where(inside, t, 0)] > lens[rows])
        down = inside & ~up
        nq = t < 0
        own = np.zeros((k, w + 2), dtype=coef.dtype)
        plus = up | nq
        minus = down | nq
        own[plus, 2:] += coef[plus]
        own[minus, :-2] += coef[minus]
        moved = np.zeros((int(inside.sum()), w + 2), dtype=coef.dtype)
        moved[:, 1:-1] = coef[inside]
        return _combine(bm, self.ring, [rows, t[inside]], [own, moved], self.low - 1)

    def scale(self, f: LaurentPoly) -> "ModuleElement":
        return ModuleElement.zero(self.bmap, self.ring).add_scaled(f, self)

    def add_scaled(self, f: LaurentPoly | int, other: "ModuleElement") -> "ModuleElement":
        """``self + f * other``."""
        self._same(other)
        if isinstance(f, int):
            f = LaurentPoly.monomial(0, f, self.ring)
        if f.is_zero() or not len(other.rows):
            return self
        terms = f.terms()
        fa = [a for a, _ in terms]
        lo = min(self.low if len(self.rows) else other.low + fa[0], other.low + fa[0])
        hi = max(self.low + self.coef.shape[1] if len(self.rows) else 0,
                 other.low + other.coef.shape[1] + fa[-1])
        width = hi - lo
        big = max(abs(c) for _, c in terms) * other.maxabs * len(terms) + self.maxabs >= SAFE
        dtype = object if big or self.coef.dtype == object or other.coef.dtype == object else np.int64
        if work_dtype(self.ring) is object:
            dtype = object
        mine = np.zeros((len(self.rows), width), dtype=dtype)
        if len(self.rows):
            c0 = self.low - lo
            mine[:, c0:c0 + self.coef.shape[1]] = self.coef
        theirs = np.zeros((len(other.rows), width), dtype=dtype)
        ow = other.coef.shape[1]
        oc = other.coef.astype(dtype) if dtype == object else other.coef
        for a, c in terms:
            c0 = other.low + a - lo
            theirs[:, c0:c0 + ow] += c * oc
        return _combine(self.bmap, self.ring, [self.rows, other.rows], [mine, theirs], lo)

    def __add__(self, other: "ModuleElement") -> "ModuleElement":
        return self.add_scaled(1, other)

    def __sub__(self, other: "ModuleElement") -> "ModuleElement":
        return self.add_scaled(-1, other)

    def __neg__(self) -> "ModuleElement":
        return ModuleElement(self.bmap, self.ring, self.rows, self.low, -self.coef)


def _combine(bmap, ring, row_parts, blocks, low) -> ModuleElement:
    rows = np.concatenate(row_parts)
    coef = np.concatenate(blocks, axis=0)
    order = np.argsort(rows, kind="stable")
    rows = rows[order]
    starts = np.flatnonzero(np.r_[True, rows[1:] != rows[:-1]])
    if len(starts) == len(rows):
        return ModuleElement(bmap, ring, rows, low, coef[order])
    out = np.add.reduceat(coef[order], starts, axis=0)
    return ModuleElement(bmap, ring, rows[starts], low, out)


def basis(bmap: BruhatMap, i: int, ring: CoefficientRing = EXACT) -> ModuleElement:
    return ModuleElement.basis(bmap, i, ring)


def act_Cs(m: ModuleElement, s: int) -> ModuleElement:
    return m.act_Cs(s)


def make_B(prev: ModuleElement, s: int, variant: str = "B") -> ModuleElement:
    """``B_x = B_x' C_s`` or ``B'_x = B_x' C_s - (v + v^-1) B_x'`` for ``x = x's > x'``."""
    top, lead = prev.leading()
    if lead != LaurentPoly.one(prev.ring):
        raise ValueError("leading coefficient must be 1")
    t = int(prev.bmap.table[top, s - 1])
    if t <= 0 or prev.bmap.lengths[t] <= prev.bmap.lengths[top]:
        raise ValueError(f"x' s is not a longer element of W^J inside the interval (s={s})")
    out = prev.act_Cs(s)
    if variant == "B":
        return out
    if variant in ("Bprime", "B'"):
        vv = LaurentPoly.from_terms({-1: 1, 1: 1}, prev.ring)
        return out.add_scaled(-vv, prev)
    raise ValueError(f"unknown variant {variant!r}")


def chain(bmap: BruhatMap, word: Iterable[int], variant: str = "B",
          ring: CoefficientRing = EXACT) -> ModuleElement:
    """``M_1`` pushed through ``make_B`` along a word."""
    m = ModuleElement.basis(bmap, 1, ring)
    for s in word:
        m = make_B(m, s, variant)
    return m


class PackedElement:
    """Compact storage for cached elements.

    Per row only the coefficients between valuation and degree in steps of two
    are kept (canonical elements have a fixed parity per row), as ``int32``
    when everything fits.  Falls back to step one if some row mixes parities.
    """

    __slots__ = ("bmap", "ring", "rows", "start", "count", "vals", "step", "low", "width")

    def __init__(self, elem: ModuleElement):
        self.bmap, self.ring = elem.bmap, elem.ring
        self.low, self.width = elem.low, elem.coef.shape[1]
        coef = elem.coef
        k = len(elem.rows)
        if k == 0:
            self.rows = elem.rows.astype(np.int32)
            self.start = self.count = np.zeros(0, np.int16)
            self.vals, self.step = np.zeros(0, np.int32), 2
            return
        nz = coef != 0
        first = nz.argmax(axis=1)
        last = self.width - 1 - nz[:, ::-1].argmax(axis=1)
        for step in (2, 1):
            count = (last - first) // step + 1
            rr, cc = _positions(first, count, step)
            vals = coef[rr, cc]
            if np.count_nonzero(vals) == np.count_nonzero(coef):
                break
        if vals.dtype == object and len(vals) and maxabs(vals) < SAFE:
            vals = vals.astype(np.int64)
        if vals.dtype != object and (not len(vals) or maxabs(vals) < 2**31):
            vals = vals.astype(np.int32)
        self.rows = elem.rows.astype(np.int32)
        self.start, self.count = first.astype(np.int16), count.astype(np.int16)
        self.vals, self.step = vals, step

    def __len__(self):
        return len(self.rows)

    @property
    def nbytes(self) -> int:
        extra = 0
        if self.vals.dtype == object:
            extra = sum(int(c).__sizeof__() for c in self.vals)
        return self.rows.nbytes + self.start.nbytes + self.count.nbytes + self.vals.nbytes + extra

    def unpack(self) -> ModuleElement:
        dtype = object if self.vals.dtype == object else np.int64
        coef = np.zeros((len(self.rows), self.width), dtype=dtype)
        rr, cc = _positions(self.start.astype(np.int64), self.count.astype(np.int64), self.step)
        coef[rr, cc] = self.vals
        return ModuleElement(self.bmap, self.ring, self.rows.astype(np.int64), self.low, coef, True)


def _positions(first: np.ndarray, count: np.ndarray, step: int):
    rr = np.repeat(np.arange(len(first)), count)
    offs = np.cumsum(count) - count
    cc = np.repeat(first, count) + step * (np.arange(int(count.sum())) - np.repeat(offs, count))
    return rr, cc
