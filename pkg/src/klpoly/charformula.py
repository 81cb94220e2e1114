"""Affine Weyl groups under the dot action and the character-formula data.

Weights are integer vectors in the basis of fundamental weights.  For a prime
``p >= h`` the affine Weyl group ``W_p`` acts by ``w.lam = w(lam + rho) - rho``;
the extra generator (indexed last) reflects in the wall
``<lam + rho, alpha~^vee> = p`` where ``alpha~`` is the highest short root.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Sequence

import numpy as np

from . import bruhatmap
from .bruhatmap import BruhatMap
from .coxeter import (CoxeterElement, CoxeterSystem, affine_extension, finite_cartan,
                      parse_type, positive_roots, simple_roots)
from .laurent import LaurentPoly

Weight = tuple[int, ...]

WEYL_ORDER = {
    "A": lambda n: math.factorial(n + 1),
    "B": lambda n: 2**n * math.factorial(n),
    "C": lambda n: 2**n * math.factorial(n),
    "D": lambda n: 2**(n - 1) * math.factorial(n),
    "E": lambda n: {6: 51840, 7: 2903040, 8: 696729600}[n],
    "F": lambda n: 1152,
    "G": lambda n: 12,
}

FUNDAMENTAL_GROUP = {
    "A": lambda n: n + 1, "B": lambda n: 2, "C": lambda n: 2, "D": lambda n: 4,
    "E": lambda n: {6: 3, 7: 2, 8: 1}[n], "F": lambda n: 1, "G": lambda n: 1,
}


class NotRestricted(ValueError):
    """Weight is not of the form ``w.0`` with ``w`` in the restricted set."""


def _isprime(n: int) -> bool:
    if n < 2:
        return False
    return all(n % d for d in range(2, math.isqrt(n) + 1))


def next_prime(n: int) -> int:
    while not _isprime(n):
        n += 1
    return n


@dataclass(frozen=True)
class RootSystemInfo:
    name: str
    family: str
    rank: int
    cartan: tuple[tuple[int, ...], ...]
    positive_roots: tuple[tuple[int, ...], ...]
    positive_coroots: tuple[tuple[int, ...], ...]
    weyl_order: int
    fundamental_group_order: int
    coxeter_number: int
    highest_short_root: tuple[int, ...]
    highest_short_coroot: tuple[int, ...]

    @property
    def rho(self) -> Weight:
        return (1,) * self.rank

    def root_to_weight(self, beta: Sequence[int]) -> Weight:
        """Simple-root coordinates -> fundamental-weight coordinates."""
        l = self.rank
        return tuple(sum(self.cartan[i][j] * beta[j] for j in range(l)) for i in range(l))

    def pair(self, lam: Sequence[int], coroot: Sequence[int]) -> int:
        return sum(a * c for a, c in zip(lam, coroot))


def root_system(name: str) -> RootSystemInfo:
    family, n, _ = parse_type(name)
    cartan = finite_cartan(family, n)
    roots = positive_roots(cartan)
    coroots = positive_roots(tuple(zip(*cartan)))
    vecs = simple_roots(family, n)
    norms = [sum(x * x for x in v) for v in vecs]

    def norm(beta):
        vec = [sum(beta[k] * vecs[k][d] for k in range(n)) for d in range(len(vecs[0]))]
        return sum(x * x for x in vec)

    short = min(norms)
    hs = max((b for b in roots if norm(b) == short), key=sum)
    hs_co = tuple(int(Fraction(c) * norms[k] / short) for k, c in enumerate(hs))
    h = 2 * len(roots) // n
    return RootSystemInfo(f"{family}{n}", family, n, cartan, tuple(roots), tuple(coroots),
                          WEYL_ORDER[family](n), FUNDAMENTAL_GROUP[family](n), h, hs, hs_co)


def dim_weyl(info: RootSystemInfo, lam: Sequence[int]) -> int:
    """Weyl's dimension formula, exactly."""
    lam = tuple(int(a) for a in lam)
    if len(lam) != info.rank or any(a < 0 for a in lam):
        raise ValueError(f"{lam} is not a dominant weight for {info.name}")
    num = den = 1
    for co in info.positive_coroots:
        num *= info.pair(lam, co) + sum(co)
        den *= sum(co)
    q, r = divmod(num, den)
    assert r == 0
    return q


class AffineSetup:
    """``W_p`` as a Coxeter system together with its dot action at ``p``."""

    def __init__(self, info: RootSystemInfo, p: int):
        if not _isprime(p):
            raise ValueError(f"{p} is not prime")
        if p < info.coxeter_number:
            raise ValueError(f"p={p} is smaller than the Coxeter number {info.coxeter_number}")
        self.info = info
        self.p = p
        l = info.rank
        self.system = CoxeterSystem(
            affine_extension(info.cartan, info.highest_short_root, info.highest_short_coroot),
            name=f"W_p({info.name})")
        self.finite = frozenset(range(1, l + 1))
        self.affine_node = l + 1
        # affine maps lam -> M lam + t for every generator (dot action)
        self.gen_maps = [self._reflection(i) for i in range(l)] + [self._affine_reflection()]

    def _reflection(self, i: int):
        l, C = self.info.rank, self.info.cartan
        # s_i(mu)_k = mu_k - mu_i * C[k][i]
        M = tuple(tuple(int(k == j) - (j == i) * C[k][i] for j in range(l)) for k in range(l))
        return M, self._shift(M, (0,) * l)

    def _affine_reflection(self):
        info, l = self.info, self.info.rank
        at = info.root_to_weight(info.highest_short_root)
        co = info.highest_short_coroot
        # mu -> mu - (<mu, co> - p) at
        M = tuple(tuple(int(k == j) - co[j] * at[k] for j in range(l)) for k in range(l))
        return M, self._shift(M, tuple(self.p * a for a in at))

    def _shift(self, M, extra):
        # lam -> M(lam + rho) + extra - rho
        l = self.info.rank
        return tuple(sum(M[k][j] for j in range(l)) + extra[k] - 1 for k in range(l))

    @staticmethod
    def _apply(M, t, lam):
        return tuple(sum(r[j] * lam[j] for j in range(len(lam))) + t[k] for k, r in enumerate(M))

    @staticmethod
    def _compose(A, B):
        """``A o B`` for affine maps."""
        (MA, tA), (MB, tB) = A, B
        l = len(MA)
        M = tuple(tuple(sum(MA[i][k] * MB[k][j] for k in range(l)) for j in range(l)) for i in range(l))
        t = tuple(sum(MA[i][k] * tB[k] for k in range(l)) + tA[i] for i in range(l))
        return M, t

    def identity_map(self):
        l = self.info.rank
        return tuple(tuple(int(i == j) for j in range(l)) for i in range(l)), (0,) * l

    def dot(self, word: Sequence[int], lam: Sequence[int] | None = None) -> Weight:
        """``(s_{w1} ... s_{wk}).lam``."""
        lam = tuple(lam) if lam is not None else (0,) * self.info.rank
        for s in reversed(word):
            M, t = self.gen_maps[s - 1]
            lam = self._apply(M, t, lam)
        return lam

    def weights_of_map(self, bmap: BruhatMap) -> list[Weight]:
        """``y.0`` for every index of the map (entry 0 is a placeholder)."""
        maps = [None, self.identity_map()]
        out = [None, (0,) * self.info.rank]
        for i in range(2, bmap.n + 1):
            A = self._compose(maps[int(bmap.parent_index[i])], self.gen_maps[int(bmap.parent_gen[i]) - 1])
            maps.append(A)
            out.append(A[1])
        return out


@dataclass
class RestrictedRegion:
    setup: AffineSetup
    members: list[tuple[CoxeterElement, Weight]]
    w_prime: CoxeterElement
    B_leq_map: BruhatMap
    lengths: list[int] = field(default_factory=list)

    @cached_property
    def weights(self) -> list[Weight]:
        return self.setup.weights_of_map(self.B_leq_map)

    @cached_property
    def member_indices(self) -> list[int]:
        """Map indices of the members of ``B`` in enumeration order."""
        return [self.B_leq_map.index_of(w) for w, _ in self.members]

    @cached_property
    def index_by_weight(self) -> dict[Weight, int]:
        return {wt: i for i, wt in enumerate(self.weights) if wt is not None}

    def words(self) -> set[tuple[int, ...]]:
        sysm = self.setup.system
        return {sysm.reduced_word(w) for w, _ in self.members}

    @property
    def m(self) -> int:
        return self.B_leq_map.max_length


def build_setup(type_name: str, p: int | None = None) -> AffineSetup:
    name = type_name.split(":")[-1]
    info = root_system(name)
    if p is None:
        p = next_prime(info.coxeter_number)
    return AffineSetup(info, p)


def enumerate_B(setup: AffineSetup, safety_cap: int = 10**7, build_map: bool = True,
                shed_memory: bool = True) -> RestrictedRegion:
    """Breadth-first search over alcoves of the restricted box via ``w -> w s``."""
    p, sysm = setup.p, setup.system
    start = setup.identity_map()
    seen = {start[1]: (sysm.identity(), start)}
    frontier = [start[1]]
    while frontier:
        nxt = []
        for wt in frontier:
            w, A = seen[wt]
            for s in range(1, sysm.rank + 1):
                B = setup._compose(A, setup.gen_maps[s - 1])
                wt2 = B[1]
                if wt2 in seen or not all(0 <= a <= p for a in wt2):
                    continue
                seen[wt2] = (sysm.times_gen(w, s), B)
                nxt.append(wt2)
                if len(seen) > safety_cap:
                    raise RuntimeError("restricted-region exploration did not close")
        frontier = nxt
    members = [(w, wt) for wt, (w, _) in seen.items() if all(a < p for a in wt)]
    lens = [sysm.length(w) for w, _ in members]
    top = max(lens)
    tops = [k for k, L in enumerate(lens) if L == top]
    if len(tops) != 1:
        raise RuntimeError(f"{len(tops)} elements of maximal length in B")
    w_prime = members[tops[0]][0]
    bmap = None
    if build_map:
        bmap = bruhatmap.build(sysm, setup.finite, w_prime, shed_memory=shed_memory)
    return RestrictedRegion(setup, members, w_prime, bmap, lens)


# --- character formula ---------------------------------------------------------

_TOKEN = re.compile(r"^([+-]?\d*)\*?p([+-]\d+)?$")


def parse_weight(text: str, p: int | None = None) -> Weight:
    """``"p-2,p-2,p-2,9"`` -> integer coordinates; ``p`` tokens need a prime."""
    out = []
    for tok in text.replace(" ", "").split(","):
        if not tok:
            raise ValueError(f"empty coordinate in {text!r}")
        m = _TOKEN.match(tok)
        if m is None:
            out.append(int(tok))
            continue
        if p is None:
            raise ValueError(f"coordinate {tok!r} needs a value for p")
        a = m.group(1)
        a = 1 if a in ("", "+") else -1 if a == "-" else int(a)
        out.append(a * p + int(m.group(2) or 0))
    return tuple(out)


def validity(info: RootSystemInfo, p: int) -> dict:
    """Metadata describing the prime regime of the dimension outputs."""
    return {
        "p": p,
        "coxeter_number": info.coxeter_number,
        "p_at_least_h": p >= info.coxeter_number,
        "p_at_least_5(h-1)": p >= 5 * (info.coxeter_number - 1),
        "note": "dimensions assume the Lusztig character formula holds at this p",
    }


def weights_at(region: RestrictedRegion, p: int) -> list[Weight]:
    """``y.0`` at prime ``p`` for every index of ``B_<=`` (entry 0 is ``None``)."""
    if p == region.setup.p:
        return region.weights
    return AffineSetup(region.setup.info, p).weights_of_map(region.B_leq_map)


def locate(region: RestrictedRegion, lam: Sequence[int], p: int | None = None) -> int:
    """Map index of the ``x`` in ``B`` with ``x.0 = lam``."""
    p = region.setup.p if p is None else p
    lam = tuple(int(a) for a in lam)
    if len(lam) != region.setup.info.rank:
        raise ValueError(f"weight {lam} has the wrong rank")
    wts = weights_at(region, p)
    members = set(region.member_indices)
    for i in members:
        if wts[i] == lam:
            return i
    raise NotRestricted(f"{lam} is not in the principal linkage orbit / not restricted at p={p}")


def character_row(region: RestrictedRegion, ce) -> list[tuple[int, int]]:
    """``(y, m_{y,x}(-1))`` over the support, ``y`` descending."""
    return [(y, f.evaluate(-1)) for y, f in ce.element.terms()]


def dim_simple(region: RestrictedRegion, ce, p: int | None = None) -> int:
    """``dim L(x.0) = sum_y m_{y,x}(-1) dim V(y.0)``."""
    p = region.setup.p if p is None else p
    info = region.setup.info
    wts = weights_at(region, p)
    total = sum(c * dim_weyl(info, wts[y]) for y, c in character_row(region, ce))
    if total <= 0 or total > dim_weyl(info, wts[ce.x_index]):
        raise AssertionError(f"dim L = {total} outside (0, dim V(x.0)]")
    return total


def h1_dimension(region: RestrictedRegion, ce) -> int:
    """``dim H^1(G, L(x.0))``: the coefficient of ``v`` in ``m_{1,x}``."""
    return ce.m(1).mu()


def ext_poly(region: RestrictedRegion, ce, y: int) -> LaurentPoly:
    """``sum_i dim Ext^i(V(y.0), L(x.0)) v^i``, which is ``m_{y,x}`` itself."""
    return ce.m(y)


def h1_table(region: RestrictedRegion, elements) -> tuple[int, list[Weight]]:
    """Maximum of ``h1_dimension`` over ``x`` in ``B`` and the weights attaining it.

    ``elements`` is an iterable of canonical elements (e.g. ``all_canonical``
    over ``B_<=``); the ones outside ``B`` are skipped.
    """
    members = set(region.member_indices)
    best, where = -1, []
    for ce in elements:
        if ce.x_index not in members:
            continue
        h = h1_dimension(region, ce)
        if h > best:
            best, where = h, [ce.x_index]
        elif h == best:
            where.append(ce.x_index)
    return best, [region.weights[i] for i in sorted(where)]
