"""Crystallographic Coxeter groups acting on the root lattice of a Cartan matrix.

Generators are labelled ``1..r``.  The convention is
``s_i(alpha_j) = alpha_j - cartan[i][j] * alpha_i``, i.e. ``cartan[i][j]`` is
``<alpha_i^vee, alpha_j>``.  An element is stored through the images of the
simple roots under ``w`` and under ``w^-1``, so descent sets are column sign
checks and nothing needs to be inverted.
"""

from __future__ import annotations

import re
from fractions import Fraction
from functools import lru_cache
from typing import Iterable, Sequence

Matrix = tuple[tuple[int, ...], ...]


# --- named root systems ----------------------------------------------------

def _unit(n: int, *pairs: tuple[int, Fraction | int]) -> tuple[Fraction, ...]:
    v = [Fraction(0)] * n
    for i, c in pairs:
        v[i] = Fraction(c)
    return tuple(v)


@lru_cache(maxsize=None)
def simple_roots(family: str, n: int) -> tuple[tuple[Fraction, ...], ...]:
    """Simple roots in Bourbaki's numbering, as vectors in a Euclidean space."""
    h = Fraction(1, 2)
    if family == "A" and n >= 1:
        return tuple(_unit(n + 1, (i, 1), (i + 1, -1)) for i in range(n))
    if family in "BCD" and n >= 2:
        roots = [_unit(n, (i, 1), (i + 1, -1)) for i in range(n - 1)]
        if family == "B":
            roots.append(_unit(n, (n - 1, 1)))
        elif family == "C":
            roots.append(_unit(n, (n - 1, 2)))
        else:
            if n < 3:
                raise ValueError("D_n needs n >= 3")
            roots.append(_unit(n, (n - 2, 1), (n - 1, 1)))
        return tuple(roots)
    if family == "E" and n in (6, 7, 8):
        e8 = [tuple([h] + [-h] * 6 + [h]),
              _unit(8, (0, 1), (1, 1)),
              _unit(8, (0, -1), (1, 1))]
        e8 += [_unit(8, (i, -1), (i + 1, 1)) for i in range(1, 6)]
        return tuple(e8[:n])
    if family == "F" and n == 4:
        return (_unit(4, (1, 1), (2, -1)), _unit(4, (2, 1), (3, -1)),
                _unit(4, (3, 1)), (h, -h, -h, -h))
    if family == "G" and n == 2:
        return (_unit(3, (0, 1), (1, -1)), _unit(3, (0, -2), (1, 1), (2, 1)))
    raise ValueError(f"unsupported root system {family}{n}")


def _dot(a, b):
    return sum(x * y for x, y in zip(a, b))


def cartan_from_roots(roots: Sequence[Sequence[Fraction]]) -> Matrix:
    out = []
    for ai in roots:
        nai = _dot(ai, ai)
        row = []
        for aj in roots:
            c = 2 * _dot(ai, aj) / nai
            assert c.denominator == 1
            row.append(int(c))
        out.append(tuple(row))
    return tuple(out)


_TYPE_RE = re.compile(r"^(affine:)?([A-G])(\d+)$")


def parse_type(name: str) -> tuple[str, int, bool]:
    """``"affine:F4"`` -> ``("F", 4, True)``."""
    m = _TYPE_RE.match(name.strip())
    if not m:
        raise ValueError(f"cannot parse Coxeter type {name!r}")
    family, n = m.group(2), int(m.group(3))
    simple_roots(family, n)  # validates
    return family, n, bool(m.group(1))


def finite_cartan(family: str, n: int) -> Matrix:
    return cartan_from_roots(simple_roots(family, n))


def positive_roots(cartan: Matrix) -> list[tuple[int, ...]]:
    """Positive roots of a finite Cartan matrix in simple-root coordinates, by height."""
    r = len(cartan)
    simple = [tuple(int(i == j) for j in range(r)) for i in range(r)]
    seen = set(simple)
    frontier = list(simple)
    while frontier:
        nxt = []
        for beta in frontier:
            for i in range(r):
                pair = sum(cartan[i][j] * beta[j] for j in range(r))
                if pair >= 0:
                    continue
                gamma = tuple(beta[j] - pair * (i == j) for j in range(r))
                if gamma not in seen:
                    seen.add(gamma)
                    nxt.append(gamma)
        frontier = nxt
    return sorted(seen, key=lambda b: (sum(b), b))


def affine_extension(cartan: Matrix, theta: Sequence[int], theta_coroot: Sequence[int]) -> Matrix:
    """Append a node for ``alpha_0 = delta - theta``.

    ``theta`` is given in simple-root coordinates and ``theta_coroot`` in
    simple-coroot coordinates; the new node is indexed last.
    """
    r = len(cartan)
    # <theta^vee, alpha_j> and <alpha_i^vee, theta>
    tv_on_a = [sum(theta_coroot[k] * cartan[k][j] for k in range(r)) for j in range(r)]
    av_on_t = [sum(cartan[i][k] * theta[k] for k in range(r)) for i in range(r)]
    rows = [tuple(cartan[i]) + (-av_on_t[i],) for i in range(r)]
    rows.append(tuple(-x for x in tv_on_a) + (2,))
    return tuple(rows)


def _transpose(m: Matrix) -> Matrix:
    return tuple(zip(*m))


def untwisted_affine_cartan(family: str, n: int) -> Matrix:
    """Untwisted affine extension through the highest root."""
    cartan = finite_cartan(family, n)
    theta = positive_roots(cartan)[-1]
    # highest root as a coroot: theta^vee = 2 theta / (theta, theta)
    roots = simple_roots(family, n)
    vec = [sum(theta[k] * roots[k][d] for k in range(n)) for d in range(len(roots[0]))]
    norm = _dot(vec, vec)
    coroot = [c * _dot(roots[k], roots[k]) / norm for k, c in enumerate(theta)]
    assert all(c.denominator == 1 for c in coroot)
    return affine_extension(cartan, theta, [int(c) for c in coroot])


# --- elements --------------------------------------------------------------

class CoxeterElement:
    """Group element as the pair (images of simple roots under ``w``, under ``w^-1``).

    ``fwd[j]`` is the coordinate vector of ``w(alpha_j)``.  Equality and
    hashing look at ``fwd`` only.
    """

    __slots__ = ("fwd", "inv", "_length", "_hash")

    def __init__(self, fwd: Matrix, inv: Matrix, length: int | None = None):
        self.fwd = fwd
        self.inv = inv
        self._length = length
        self._hash = None

    def __eq__(self, other):
        return isinstance(other, CoxeterElement) and self.fwd == other.fwd

    def __hash__(self):
        if self._hash is None:
            self._hash = hash(self.fwd)
        return self._hash

    def __mul__(self, other: "CoxeterElement") -> "CoxeterElement":
        return CoxeterElement(_compose(self.fwd, other.fwd), _compose(other.inv, self.inv))

    def inverse(self) -> "CoxeterElement":
        return CoxeterElement(self.inv, self.fwd, self._length)

    def __repr__(self):
        return f"CoxeterElement(fwd={self.fwd})"


def _compose(a: Matrix, b: Matrix) -> Matrix:
    """Columns of the product ``a . b`` (both given by columns)."""
    r = len(a)
    out = []
    for col in b:
        v = [0] * r
        for k, c in enumerate(col):
            if c:
                ak = a[k]
                for t in range(r):
                    v[t] += c * ak[t]
        out.append(tuple(v))
    return tuple(out)


def _is_negative(vec: Sequence[int]) -> bool:
    for c in vec:
        if c:
            return c < 0
    raise ValueError("zero vector is not a root")


class CoxeterSystem:
    """A Coxeter system given by a generalized Cartan matrix.

    Bond labels 2, 3, 4, 6 and infinity (affine rank-2 blocks) are supported.
    """

    def __init__(self, cartan: Sequence[Sequence[int]], name: str | None = None):
        cartan = tuple(tuple(int(x) for x in row) for row in cartan)
        r = len(cartan)
        if r == 0 or any(len(row) != r for row in cartan):
            raise ValueError("Cartan matrix must be square and nonempty")
        for i in range(r):
            if cartan[i][i] != 2:
                raise ValueError("Cartan matrix needs 2 on the diagonal")
            for j in range(r):
                if i == j:
                    continue
                a, b = cartan[i][j], cartan[j][i]
                if a > 0 or (a == 0) != (b == 0):
                    raise ValueError(f"invalid Cartan entries at ({i + 1},{j + 1})")
                if a * b > 4 or (a * b == 4 and (a, b) not in ((-2, -2), (-1, -4), (-4, -1))):
                    raise ValueError(f"unsupported bond between {i + 1} and {j + 1}")
        self.cartan = cartan
        self.rank = r
        self.name = name
        self._gens = [self._make_generator(i) for i in range(r)]
        ident = tuple(tuple(int(i == j) for i in range(r)) for j in range(r))
        self._identity = CoxeterElement(ident, ident, 0)

    @classmethod
    def from_type(cls, name: str) -> "CoxeterSystem":
        family, n, affine = parse_type(name)
        cartan = untwisted_affine_cartan(family, n) if affine else finite_cartan(family, n)
        return cls(cartan, name=name)

    def __repr__(self):
        return f"CoxeterSystem({self.name or self.cartan})"

    def bond(self, i: int, j: int) -> int | float:
        """Order of ``s_i s_j`` (``math.inf`` for an affine rank-2 block)."""
        if i == j:
            return 1
        p = self.cartan[i - 1][j - 1] * self.cartan[j - 1][i - 1]
        return {0: 2, 1: 3, 2: 4, 3: 6}.get(p, float("inf"))

    def _make_generator(self, i: int) -> CoxeterElement:
        r = len(self.cartan)
        cols = []
        for j in range(r):
            v = [int(k == j) for k in range(r)]
            v[i] -= self.cartan[i][j]
            cols.append(tuple(v))
        m = tuple(cols)
        return CoxeterElement(m, m, 1)

    def _check_gen(self, i: int):
        if not 1 <= i <= self.rank:
            raise IndexError(f"generator {i} out of range 1..{self.rank}")

    def generator(self, i: int) -> CoxeterElement:
        self._check_gen(i)
        return self._gens[i - 1]

    def identity(self) -> CoxeterElement:
        return self._identity

    def multiply(self, a: CoxeterElement, b: CoxeterElement) -> CoxeterElement:
        return a * b

    def inverse(self, a: CoxeterElement) -> CoxeterElement:
        return a.inverse()

    def element(self, word: Iterable[int]) -> CoxeterElement:
        w = self._identity
        for i in word:
            w = self.times_gen(w, i)
        return w

    def times_gen(self, w: CoxeterElement, i: int) -> CoxeterElement:
        """``w * s_i`` in O(r^2)."""
        self._check_gen(i)
        c = self.cartan[i - 1]
        wi = w.fwd[i - 1]
        fwd = tuple(col if c[j] == 0 else
                    tuple(x - c[j] * y for x, y in zip(col, wi))
                    for j, col in enumerate(w.fwd))
        fwd = fwd[:i - 1] + (tuple(-y for y in wi),) + fwd[i:]
        inv = tuple(_reflect(col, c, i - 1) for col in w.inv)
        return CoxeterElement(fwd, inv)

    def gen_times(self, i: int, w: CoxeterElement) -> CoxeterElement:
        """``s_i * w``."""
        return self.times_gen(w.inverse(), i).inverse()

    def left_descents(self, w: CoxeterElement) -> frozenset[int]:
        return frozenset(s + 1 for s, col in enumerate(w.inv) if _is_negative(col))

    def right_descents(self, w: CoxeterElement) -> frozenset[int]:
        return frozenset(s + 1 for s, col in enumerate(w.fwd) if _is_negative(col))

    def has_left_descent_in(self, w: CoxeterElement, J: frozenset[int]) -> bool:
        return any(_is_negative(w.inv[s - 1]) for s in J)

    def reduced_word(self, w: CoxeterElement) -> tuple[int, ...]:
        """Strip the smallest left descent until the identity is reached."""
        word = []
        while True:
            for s, col in enumerate(w.inv):
                if _is_negative(col):
                    word.append(s + 1)
                    w = self.gen_times(s + 1, w)
                    break
            else:
                return tuple(word)

    def length(self, w: CoxeterElement) -> int:
        if w._length is None:
            w._length = len(self.reduced_word(w))
        return w._length

    def is_min_coset_rep(self, w: CoxeterElement, J: Iterable[int]) -> bool:
        return not self.has_left_descent_in(w, frozenset(J))

    def longest_in_quotient(self, J: Iterable[int] = (), cap: int = 10**4) -> CoxeterElement:
        """Top of ``W^J`` (finite ``W``): climb the right weak order inside ``W^J``."""
        J = frozenset(J)
        w = self.identity()
        for _ in range(cap):
            for s in range(1, self.rank + 1):
                if s in self.right_descents(w):
                    continue
                ws = self.times_gen(w, s)
                if not self.has_left_descent_in(ws, J):
                    w = ws
                    break
            else:
                return w
        raise ValueError("no longest element found (is W infinite?)")


def _reflect(vec: tuple[int, ...], crow: tuple[int, ...], i: int) -> tuple[int, ...]:
    """Apply ``s_i`` to a root-lattice vector (only coordinate ``i`` changes)."""
    pair = 0
    for c, x in zip(crow, vec):
        if c and x:
            pair += c * x
    if not pair:
        return vec
    return vec[:i] + (vec[i] - pair,) + vec[i + 1:]


def parabolic_mask(J: Iterable[int]) -> int:
    m = 0
    for s in J:
        m |= 1 << (s - 1)
    return m


def mask_to_set(mask: int) -> frozenset[int]:
    return frozenset(i + 1 for i in range(mask.bit_length()) if mask >> i & 1)
