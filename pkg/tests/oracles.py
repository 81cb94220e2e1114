"""Slow, independent reference implementations used by the tests.

Polynomials here are plain ``{exponent: coefficient}`` dicts so nothing
depends on ``klpoly.laurent``; module actions go through group elements and
never look at a Bruhat map table.
"""

from __future__ import annotations

from klpoly.coxeter import CoxeterSystem


# --- dict polynomials ------------------------------------------------------------

def padd(f, g, c=1):
    out = dict(f)
    for a, b in g.items():
        out[a] = out.get(a, 0) + c * b
        if out[a] == 0:
            del out[a]
    return out


def pmul(f, g):
    out = {}
    for a, b in f.items():
        for c, d in g.items():
            out[a + c] = out.get(a + c, 0) + b * d
    return {a: b for a, b in out.items() if b}


def pbar(f):
    return {-a: b for a, b in f.items()}


def psym(f):
    """Bar-invariant part carrying all terms of ``f`` in degree <= 0."""
    out = {}
    for a, b in f.items():
        if a <= 0:
            out[a] = b
            if a < 0:
                out[-a] = b
    return out


V = {1: 1}
VINV = {-1: 1}
VV = {1: 1, -1: 1}


# --- Bruhat order by subwords ------------------------------------------------------

def subword_products(sysm: CoxeterSystem, word):
    """All products of subwords of ``word`` (the Bruhat interval below it)."""
    out = {sysm.identity()}
    for s in word:
        out |= {sysm.times_gen(w, s) for w in out}
    return out


def bruhat_leq(sysm: CoxeterSystem, y, x) -> bool:
    return y in subword_products(sysm, sysm.reduced_word(x))


def quotient_interval(sysm: CoxeterSystem, J, x):
    J = frozenset(J)
    return {w for w in subword_products(sysm, sysm.reduced_word(x))
            if not sysm.has_left_descent_in(w, J)}


def coatoms_by_deletion(sysm: CoxeterSystem, J, y):
    """Length ``l(y)-1`` products with one letter of a reduced word deleted, in ``W^J``."""
    word = sysm.reduced_word(y)
    out = set()
    for k in range(len(word)):
        w = sysm.element(word[:k] + word[k + 1:])
        if sysm.length(w) == len(word) - 1 and not sysm.has_left_descent_in(w, frozenset(J)):
            out.add(w)
    return out


# --- module action through group elements ----------------------------------------------

def act(sysm: CoxeterSystem, J, elem: dict, s: int) -> dict:
    """``elem * C_s`` for ``elem = {group element: dict poly}``."""
    J = frozenset(J)
    out: dict = {}

    def put(w, f):
        g = padd(out.get(w, {}), f)
        if g:
            out[w] = g
        else:
            out.pop(w, None)

    for w, f in elem.items():
        ws = sysm.times_gen(w, s)
        if sysm.has_left_descent_in(ws, J):
            put(w, pmul(f, VV))
        elif sysm.length(ws) > sysm.length(w):
            put(ws, f)
            put(w, pmul(f, V))
        else:
            put(ws, f)
            put(w, pmul(f, VINV))
    return out


def E_chain(sysm: CoxeterSystem, J, y) -> dict:
    """``M_1 C_{t1} ... C_{tk}`` along the reduced word of ``y`` (bar-invariant)."""
    elem = {sysm.identity(): {0: 1}}
    for s in sysm.reduced_word(y):
        elem = act(sysm, J, elem, s)
    return elem


def triangular_canonical(sysm: CoxeterSystem, J, x) -> dict:
    """``uM_x`` as ``{element: dict poly}``: subtract bar-invariant multiples of
    ``E_y`` from ``E_x``, longest offenders first, until every non-leading
    coefficient lies in ``vZ[v]``."""
    cur = E_chain(sysm, J, x)
    chains = {}
    while True:
        bad = [w for w, f in cur.items() if w != x and min(f) <= 0]
        if not bad:
            return cur
        top = max(sysm.length(w) for w in bad)
        for y in sorted((w for w in bad if sysm.length(w) == top), key=sysm.reduced_word):
            f = psym(cur[y])
            if y not in chains:
                chains[y] = E_chain(sysm, J, y)
            for z, g in chains[y].items():
                h = padd(cur.get(z, {}), pmul(f, g), -1)
                if h:
                    cur[z] = h
                else:
                    cur.pop(z, None)


# --- classical Kazhdan-Lusztig polynomials (J empty) -----------------------------------

def classical_kl(sysm: CoxeterSystem, elements) -> dict:
    """``P[(y, w)]`` as ``{q-exponent: coeff}`` for all ``y <= w`` in a finite group.

    Standard recursion with ``w = vs > v``::

        P_{y,w} = q^{1-c} P_{ys,v} + q^c P_{y,v} - sum_z mu(z,v) q^{(l(w)-l(z))/2} P_{y,z}
    """
    elements = sorted(elements, key=sysm.length)
    L = {w: sysm.length(w) for w in elements}
    below = {w: subword_products(sysm, sysm.reduced_word(w)) for w in elements}
    P: dict = {}

    def get(y, w):
        return P.get((y, w), {}) if y in below[w] else {}

    for w in elements:
        if L[w] == 0:
            P[(w, w)] = {0: 1}
            continue
        s = min(sysm.right_descents(w))
        v = sysm.times_gen(w, s)
        mus = []
        for z in below[v]:
            if z == v or s not in sysm.right_descents(z):
                continue
            d = L[v] - L[z]
            if d % 2 == 1:
                mu = get(z, v).get((d - 1) // 2, 0)
                if mu:
                    mus.append((z, mu))
        for y in below[w]:
            ys = sysm.times_gen(y, s)
            c = 1 if L[ys] < L[y] else 0
            f = {}
            f = padd(f, {a + 1 - c: b for a, b in get(ys, v).items()})
            f = padd(f, {a + c: b for a, b in get(y, v).items()})
            for z, mu in mus:
                sh = (L[w] - L[z]) // 2
                f = padd(f, {a + sh: b * mu for a, b in get(y, z).items()}, -1)
            if f:
                P[(y, w)] = f
    return P


def kl_to_soergel(P: dict, d: int) -> dict:
    """``m(v) = v^d P(v^-2)``."""
    return {d - 2 * a: b for a, b in P.items()}


def crt_bruteforce(residues):
    M = 1
    for _, m in residues:
        M *= m
    return next(n for n in range(M) if all(n % m == r for r, m in residues))
