"""Canonical elements ``uM_x`` and parabolic Kazhdan-Lusztig polynomials.

Start from any bar-invariant element ``M_x + sum f_y M_y``; while some
coefficient has a nonzero part in nonpositive degree, take all offending
``y`` of maximal length and subtract ``f_y^sym * B_y``.  What ``B_y`` is and
how the start is chosen depends on the strategy:

``recursive``
    start with ``uM_x' C_s`` and correct with cached ``uM_y`` (only the
    constant terms ``f_y(0)`` ever need removing);
``fromscratch``
    start with the ``B`` or ``B'`` chain along a reduced word of ``x`` and
    correct with chains as well, so nothing but the map is kept between
    solves;
``hybrid``
    a byte-bounded LRU cache of canonical elements, falling back to ``B'``
    chains on a miss.
"""

from __future__ import annotations

import itertools
import logging
from collections import OrderedDict
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Callable, Iterable, Iterator, Sequence

import numpy as np
from sympy import prevprime

from .bruhatmap import BruhatMap
from .heckemod import SAFE, ModuleElement, PackedElement, make_B, maxabs, widen, work_dtype
from .laurent import EXACT, CoefficientRing, LaurentPoly, crt_combine, residue_ring

log = logging.getLogger(__name__)

STRATEGIES = ("recursive", "fromscratch", "hybrid")
VARIANTS = ("B", "Bprime")


class BoundError(ValueError):
    """Modular reconstruction is not certified by the coefficient bound."""


class CacheMiss(LookupError):
    pass


@dataclass(frozen=True)
class SolverConfig:
    strategy: str = "recursive"
    b_variant: str = "Bprime"
    cache_budget: int = 256 << 20
    workers: int = 1
    moduli: tuple[int, ...] = ()
    check_bound: bool = True
    debug: bool = False

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise ValueError(f"unknown strategy {self.strategy!r}")
        if self.b_variant not in VARIANTS:
            raise ValueError(f"unknown B variant {self.b_variant!r}")
        if self.workers < 1:
            raise ValueError("workers must be positive")
        for i, a in enumerate(self.moduli):
            if a < 2:
                raise ValueError(f"bad modulus {a}")
            for b in self.moduli[i + 1:]:
                if np.gcd(a, b) != 1:
                    raise ValueError(f"moduli {a} and {b} are not coprime")


@dataclass
class SolveStats:
    rounds: int = 0
    corrections: int = 0
    nonzero_absolute_corrections: int = 0
    peak_chain_bytes: int = 0
    peak_chain_terms: int = 0


class CanonicalElement:
    """The row ``{m_{y,x}}_y`` of one canonical element."""

    __slots__ = ("x_index", "element")

    def __init__(self, x_index: int, element: ModuleElement):
        self.x_index = x_index
        self.element = element

    @property
    def ring(self) -> CoefficientRing:
        return self.element.ring

    @property
    def polys(self) -> dict[int, LaurentPoly]:
        return self.element.as_dict()

    def m(self, y: int) -> LaurentPoly:
        return self.element.coefficient_of(y)

    def support(self) -> list[int]:
        return self.element.support()

    def __eq__(self, other):
        if not isinstance(other, CanonicalElement):
            return NotImplemented
        return self.x_index == other.x_index and self.element == other.element

    def __repr__(self):
        return f"CanonicalElement(x={self.x_index}, terms={len(self.element)})"


def check_contract(ce: CanonicalElement, bmap: BruhatMap, below: set[int] | None = None) -> None:
    """Assert unitriangularity, vZ[v], support and parity of a canonical element."""
    x = ce.x_index
    lx = int(bmap.lengths[x])
    terms = ce.element.terms()
    assert terms and terms[0][0] == x, "leading index must be x"
    assert terms[0][1] == LaurentPoly.one(ce.ring), "m_{x,x} must be 1"
    for y, f in terms[1:]:
        assert f.is_in_vZv(), f"m_{{{y},{x}}} = {f.render()} not in vZ[v]"
        d = lx - int(bmap.lengths[y])
        assert all((a - d) % 2 == 0 for a, _ in f.terms()), "parity violated"
        assert f.degree <= d, "degree bound violated"
        if below is not None:
            assert y in below, f"support index {y} is not below x"


class _Dense:
    """Mutable dense accumulator over map rows ``0..K`` and an exponent window."""

    def __init__(self, elem: ModuleElement, K: int):
        self.ring = elem.ring
        self.mod = elem.ring.modulus
        dtype = elem.coef.dtype if elem.coef.dtype == object else work_dtype(elem.ring)
        self.lo = elem.low
        self.arr = np.zeros((K + 1, max(elem.coef.shape[1], 1)), dtype=dtype)
        self.arr[elem.rows, :elem.coef.shape[1]] = elem.coef
        self.bound = elem.maxabs if self.mod is None else self.mod

    def _ensure(self, lo: int, hi: int):
        """Make exponents ``lo..hi-1`` addressable."""
        cur_hi = self.lo + self.arr.shape[1]
        if lo >= self.lo and hi <= cur_hi:
            return
        nlo, nhi = min(lo, self.lo), max(hi, cur_hi)
        arr = np.zeros((self.arr.shape[0], nhi - nlo), dtype=self.arr.dtype)
        arr[:, self.lo - nlo:self.lo - nlo + self.arr.shape[1]] = self.arr
        self.arr, self.lo = arr, nlo

    def _widen(self):
        if self.arr.dtype != object:
            self.arr = widen(self.arr)

    def subtract(self, f: LaurentPoly, elem: ModuleElement):
        if not len(elem.rows):
            return
        terms = f.terms()
        w = elem.coef.shape[1]
        self._ensure(elem.low + terms[0][0], elem.low + terms[-1][0] + w)
        rows = elem.rows
        if self.mod is None and self.arr.dtype != object:
            growth = sum(abs(c) for _, c in terms) * elem.maxabs
            if self.bound + growth >= SAFE:
                self.bound = maxabs(self.arr)
                if self.bound + growth >= SAFE:
                    self._widen()
            self.bound += growth
        coef = elem.coef
        if self.arr.dtype == object and coef.dtype != object:
            coef = widen(coef)
        for a, c in terms:
            c0 = elem.low + a - self.lo
            blk = self.arr[rows, c0:c0 + w] - c * coef
            if self.mod is not None:
                blk %= self.mod
            self.arr[rows, c0:c0 + w] = blk

    def offenders(self, x: int) -> np.ndarray:
        ncol = min(1 - self.lo, self.arr.shape[1])
        if ncol <= 0:
            return np.zeros(0, np.int64)
        mask = self.arr[:, :ncol].any(axis=1)
        mask[x] = False
        return np.flatnonzero(mask)

    def row_poly(self, y: int) -> LaurentPoly:
        return LaurentPoly(self.lo, [int(c) for c in self.arr[y]], self.ring)

    def to_element(self, bmap: BruhatMap) -> ModuleElement:
        rows = np.flatnonzero(self.arr.any(axis=1))
        return ModuleElement(bmap, self.ring, rows, self.lo, self.arr[rows])


def _finite_parabolic(bmap: BruhatMap) -> bool:
    """Whether ``W_J`` is finite (all principal minors of its Cartan block positive)."""
    if bmap.system is None:
        return False
    J = sorted(bmap.J)
    C = bmap.system.cartan
    for k in range(1, len(J) + 1):
        for sub in itertools.combinations(J, k):
            M = [[Fraction(C[i - 1][j - 1]) for j in sub] for i in sub]
            if _det(M) <= 0:
                return False
    return True


def _det(M: list[list[Fraction]]) -> Fraction:
    M = [row[:] for row in M]
    n, det = len(M), Fraction(1)
    for c in range(n):
        piv = next((r for r in range(c, n) if M[r][c] != 0), None)
        if piv is None:
            return Fraction(0)
        if piv != c:
            M[c], M[piv] = M[piv], M[c]
            det = -det
        det *= M[c][c]
        for r in range(c + 1, n):
            f = M[r][c] / M[c][c]
            for k in range(c, n):
                M[r][k] -= f * M[c][k]
    return det


def nonnegativity_known(bmap: BruhatMap) -> bool:
    return not bmap.J or _finite_parabolic(bmap)


def default_moduli(length: int, start: int = 2**31) -> tuple[int, ...]:
    """Largest primes below ``start`` until their product exceeds ``2**length``."""
    out, prod, p = [], 1, start
    while prod <= 2**length:
        p = prevprime(p)
        out.append(p)
        prod *= p
    return tuple(out)


class Solver:
    """Runs canonicalizations against one Bruhat map, owning the element caches."""

    def __init__(self, bmap: BruhatMap, config: SolverConfig = SolverConfig(),
                 ring: CoefficientRing = EXACT):
        self.bmap = bmap
        self.config = config
        self.ring = ring
        self.cache: OrderedDict[int, PackedElement] = OrderedDict()
        self.cache_bytes = 0
        self.stats = SolveStats()
        self._chains: dict[int, ModuleElement] = {}

    # --- providers ---------------------------------------------------------

    def _remember(self, x: int, elem: ModuleElement):
        strategy = self.config.strategy
        if strategy in ("recursive", "hybrid"):
            packed = PackedElement(elem)
            self.cache[x] = packed
            self.cache_bytes += packed.nbytes
        if strategy == "hybrid":
            while self.cache_bytes > self.config.cache_budget and len(self.cache) > 1:
                _, old = self.cache.popitem(last=False)
                self.cache_bytes -= old.nbytes

    def cached(self, y: int) -> ModuleElement | None:
        packed = self.cache.get(y)
        if packed is None:
            return None
        if self.config.strategy == "hybrid":
            self.cache.move_to_end(y)
        return packed.unpack()

    def chain_of(self, y: int, variant: str | None = None) -> ModuleElement:
        """``B_y`` (or ``B'_y``) along the map's parent word of ``y``, memoized per solve."""
        variant = variant or self.config.b_variant
        bm = self.bmap
        path = []
        k = y
        while k not in self._chains and k != 1:
            path.append(k)
            k = int(bm.parent_index[k])
        elem = self._chains.get(k)
        if elem is None:
            elem = ModuleElement.basis(bm, 1, self.ring)
            self._chains[1] = elem
        for k in reversed(path):
            elem = make_B(elem, int(bm.parent_gen[k]), variant)
            self._chains[k] = elem
        live = sum(e.nbytes for e in self._chains.values())
        self.stats.peak_chain_bytes = max(self.stats.peak_chain_bytes, live)
        self.stats.peak_chain_terms = max(self.stats.peak_chain_terms,
                                          sum(len(e) for e in self._chains.values()))
        return elem

    def provider(self, y: int) -> ModuleElement:
        strategy = self.config.strategy
        if strategy == "recursive":
            elem = self.cached(y)
            if elem is None:
                raise CacheMiss(f"uM_{y} not available")
            return elem
        if strategy == "hybrid":
            elem = self.cached(y)
            if elem is not None:
                return elem
            return self.chain_of(y, "Bprime")
        return self.chain_of(y)

    # --- initializations ---------------------------------------------------

    def init_recursive(self, x: int) -> ModuleElement:
        if x == 1:
            return ModuleElement.basis(self.bmap, 1, self.ring)
        s = self.bmap.right_descent(x)
        xp = int(self.bmap.table[x, s - 1])
        prev = self.cached(xp)
        if prev is None:
            raise CacheMiss(f"uM_{xp} needed to start uM_{x}")
        return prev.act_Cs(s)

    def init_fromscratch(self, x: int, variant: str | None = None) -> ModuleElement:
        return self.chain_of(x, variant)

    # --- the main loop -----------------------------------------------------

    def canonicalize(self, x: int) -> CanonicalElement:
        bm, cfg = self.bmap, self.config
        bm._check(x)
        self._chains = {}
        if cfg.strategy == "recursive":
            start = self.init_recursive(x)
        elif cfg.strategy == "hybrid" and x != 1 and int(
                bm.table[x, bm.right_descent(x) - 1]) in self.cache:
            start = self.init_recursive(x)
        else:
            start = self.init_fromscratch(x)
        acc = _Dense(start, x)
        lengths = bm.lengths
        last = None
        while True:
            off = acc.offenders(x)
            if not len(off):
                break
            top = int(lengths[off].max())
            if last is not None and top >= last:
                raise AssertionError("maximal offending length did not decrease")
            last = top
            ys = [int(y) for y in off[lengths[off] == top]]
            fsyms = []
            for y in ys:
                f = acc.row_poly(y)
                fsym = f.sym_decompose()[2]
                if cfg.debug and cfg.strategy == "recursive":
                    # only absolute terms need removing after uM_x' C_s
                    assert f.valuation >= 0, "recursive start produced a non-polynomial coefficient"
                    assert fsym.degree == 0, "f_sym is not the constant f_y(0)"
                fsyms.append(fsym)
            self.stats.rounds += 1
            self.stats.corrections += len(ys)
            self.stats.nonzero_absolute_corrections += sum(
                1 for f in fsyms if f.coefficient_at(0) != 0)
            batch_correct(acc, ys, fsyms, self.provider, cfg.workers)
        ce = CanonicalElement(x, acc.to_element(bm))
        if cfg.debug:
            check_contract(ce, bm)
        self._remember(x, ce.element)
        self._chains = {}
        return ce

    def all_canonical(self, indices: Iterable[int] | None = None,
                      sink: Callable[[CanonicalElement], None] | None = None
                      ) -> Iterator[CanonicalElement]:
        """Canonical elements in ascending index order."""
        idx = range(1, self.bmap.n + 1) if indices is None else sorted(indices)
        for x in idx:
            ce = self.canonicalize(x)
            if sink is not None:
                sink(ce)
            yield ce


def batch_correct(current: _Dense, offenders: Sequence[int], fsyms: Sequence[LaurentPoly],
                  provider: Callable[[int], ModuleElement], workers: int = 1) -> _Dense:
    """Subtract ``sum f_y^sym B_y``; providers may run concurrently, the join is in index order."""
    if not offenders:
        return current
    order = sorted(range(len(offenders)), key=lambda k: offenders[k])
    ys = [offenders[k] for k in order]
    fs = [fsyms[k] for k in order]
    if workers > 1 and len(ys) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            elems = list(pool.map(provider, ys))
    else:
        elems = [provider(y) for y in ys]
    for f, elem in zip(fs, elems):
        if not f.is_zero():
            current.subtract(f, elem)
    return current


# --- functional entry points ------------------------------------------------

def canonicalize(bmap: BruhatMap, x_index: int, config: SolverConfig = SolverConfig()) -> CanonicalElement:
    """Single canonical element; the recursive strategy solves everything it depends on."""
    if config.moduli:
        return solve_modular(bmap, x_index, config)
    solver = Solver(bmap, config)
    if config.strategy == "recursive":
        need = sorted(bmap.interval(x_index))
        for y in need[:-1]:
            solver.canonicalize(y)
    return solver.canonicalize(x_index)


def all_canonical(bmap: BruhatMap, config: SolverConfig = SolverConfig(),
                  sink: Callable[[CanonicalElement], None] | None = None,
                  indices: Iterable[int] | None = None,
                  seed: Iterable[CanonicalElement] = ()) -> Iterator[CanonicalElement]:
    """Canonical elements in ascending index order.

    ``seed`` supplies already known canonical elements (exact), e.g. from a
    checkpoint, so a recursive run can continue where it stopped.
    """
    if config.moduli:
        yield from _all_modular(bmap, config, sink, indices, seed)
        return
    solver = Solver(bmap, config)
    for ce in seed:
        solver._remember(ce.x_index, ce.element)
    yield from solver.all_canonical(indices, sink)


def _check_modular(bmap: BruhatMap, config: SolverConfig, length: int):
    if not config.check_bound:
        return
    if not nonnegativity_known(bmap):
        raise BoundError("coefficients are not known to be nonnegative for this J")
    prod = 1
    for m in config.moduli:
        prod *= m
    if prod <= 2**length:
        raise BoundError(f"product of moduli {prod} does not exceed 2^{length}")


def crt_elements(parts: Sequence[tuple[ModuleElement, int]]) -> ModuleElement:
    """Combine residue images coefficient by coefficient into exact integers."""
    bmap = parts[0][0].bmap
    rows = sorted({int(r) for e, _ in parts for r in e.rows}, reverse=True)
    if not rows:
        return ModuleElement.zero(bmap, EXACT)
    live = [(e, m) for e, m in parts if len(e.rows)]
    lo = min(e.low for e, _ in live)
    hi = max(e.low + e.coef.shape[1] for e, _ in live)
    pos = {r: k for k, r in enumerate(rows)}
    moduli = [m for _, m in parts]
    total = 1
    for m in moduli:
        total *= m
    out = np.zeros((len(rows), hi - lo), dtype=object)
    for k, (e, m) in enumerate(parts):
        if not len(e.rows):
            continue
        basis_k = crt_combine([(int(i == k), mm) for i, mm in enumerate(moduli)])
        idx = [pos[int(r)] for r in e.rows]
        out[idx, e.low - lo:e.low - lo + e.coef.shape[1]] += widen(e.coef) * basis_k
    out %= total
    return ModuleElement(bmap, EXACT, rows, lo, out)


def solve_modular(bmap: BruhatMap, x_index: int, config: SolverConfig) -> CanonicalElement:
    moduli = config.moduli or default_moduli(int(bmap.lengths[x_index]))
    config = replace(config, moduli=moduli)
    _check_modular(bmap, config, int(bmap.lengths[x_index]))
    parts = []
    for m in moduli:
        solver = Solver(bmap, replace(config, moduli=()), residue_ring(m))
        if config.strategy == "recursive":
            for y in sorted(bmap.interval(x_index))[:-1]:
                solver.canonicalize(y)
        parts.append((solver.canonicalize(x_index).element, m))
    return CanonicalElement(x_index, crt_elements(parts))


def _all_modular(bmap, config, sink, indices, seed=()) -> Iterator[CanonicalElement]:
    idx = list(range(1, bmap.n + 1) if indices is None else sorted(indices))
    top = max(int(bmap.lengths[i]) for i in idx)
    moduli = config.moduli or default_moduli(top)
    config = replace(config, moduli=moduli)
    _check_modular(bmap, config, top)
    plain = replace(config, moduli=())
    runs = [Solver(bmap, plain, residue_ring(m)) for m in moduli]
    for ce in seed:
        e = ce.element
        for run in runs:
            run._remember(ce.x_index, ModuleElement(bmap, run.ring, e.rows, e.low, e.coef))
    for x in idx:
        parts = [(run.canonicalize(x).element, m) for run, m in zip(runs, moduli)]
        ce = CanonicalElement(x, crt_elements(parts))
        if sink is not None:
            sink(ce)
        yield ce
