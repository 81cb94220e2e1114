"""Acceptance suite: one test (and one pass/fail line) per criterion.

Run with ``pytest tests/test_acceptance.py -v``; the lines are repeated in the
"acceptance criteria" section of the terminal summary.  The affine F4
computation is shared by criteria 1 to 4 and takes a few minutes.
"""

import random
from fractions import Fraction
from math import factorial

import pytest
import sympy

from klpoly import bruhatmap
from klpoly.bruhatmap import StepKind
from klpoly.charformula import (build_setup, dim_simple, enumerate_B, h1_table, locate,
                                next_prime, root_system, weights_at)
from klpoly.cli import record_line, records
from klpoly.coxeter import CoxeterSystem
from klpoly.heckemod import ModuleElement, act_Cs
from klpoly.klsolver import (Solver, SolverConfig, all_canonical, canonicalize, check_contract,
                             default_moduli)
from klpoly.laurent import LaurentPoly
from acceptance_log import report
from oracles import coatoms_by_deletion, subword_products, triangular_canonical

P = LaurentPoly.from_terms
VV = P({-1: 1, 1: 1})

# (|B|, |B_<=|, m) for the restricted region of each type
TABLE = {
    "A2": (2, 2, 1), "A3": (6, 8, 4), "A4": (24, 52, 10), "A5": (120, 478, 20),
    "B2": (4, 4, 3), "B3": (24, 44, 13), "B4": (192, 756, 34), "C3": (24, 46, 13),
    "C4": (192, 792, 34), "D4": (48, 142, 16), "D5": (480, 3428, 40), "G2": (12, 16, 10),
    "F4": (1152, 7832, 86),
}
H1_MAX = {"D4": 2, "B4": 4, "A5": 3, "F4": 882}
F4_MAX_M1 = 74628593

# dim L((p-2, p-2, p-2, 9)) for F4 as a polynomial in p, highest degree first
F4_DIM_POLY = [
    "677249/19600", "-637702548041/10478160000", "4207651317557/8382528000",
    "-64863221539889/30177100800", "99959647171/22579200",
    "-72811406375072711/1005903360000", "5429608760885159/33530112000",
    "-1014183606287771/5029516800", "394068519721127/1117670400",
    "-311337743406684289/1508855040000", "-29048331062847/13798400",
    "-19644400527431509/10059033600", "148882266983459651/6706022400",
    "-20075834974540708571/1005903360000", "90508002252050021/3048192000",
    "-503999924098905349/3772137600", "110387862657924361/279417600",
    "-21129205276719213797/20956320000", "2067338407751272429/698544000",
    "-80711097402731773/11642400", "137315811881887/13860", "-5616745816",
]

# contract checks accumulated across criteria, consumed by criterion 7
CONTRACT = {"checked": 0, "failed": []}


def contract(ce, bm, with_interval=True):
    try:
        check_contract(ce, bm, bm.interval(ce.x_index) if with_interval else None)
    except AssertionError as exc:
        CONTRACT["failed"].append((ce.x_index, str(exc)))
    CONTRACT["checked"] += 1


def region(name, p=None):
    return enumerate_B(build_setup("affine:" + name, p))


def weyl_order(name):
    fam, n = name[0], int(name[1:])
    return {"A": factorial(n + 1), "B": 2**n * factorial(n), "C": 2**n * factorial(n),
            "D": 2**(n - 1) * factorial(n), "G": 12, "F": 1152, "E": {6: 51840}.get(n)}[fam]


# --- shared F4 run ------------------------------------------------------------------

@pytest.fixture(scope="module")
def f4():
    reg = region("F4")
    bm = reg.B_leq_map
    members = set(reg.member_indices)
    at59 = locate(reg, (57, 57, 57, 9), 59)
    rng = random.Random(86)
    out = {"region": reg, "max_m1": 0, "h1": (-1, None), "at59": at59, "ce59": None, "count": 0}
    for ce in Solver(bm, SolverConfig()).all_canonical():
        out["count"] += 1
        out["max_m1"] = max(out["max_m1"], max(ce.element.values_at(1)))
        if ce.x_index in members:
            h = ce.m(1).mu()
            if h > out["h1"][0]:
                out["h1"] = (h, ce.x_index)
        if ce.x_index == at59:
            out["ce59"] = ce
        if rng.random() < 0.03:
            contract(ce, bm, with_interval=False)
    return out


# --- 1 ----------------------------------------------------------------------------------

def test_criterion_1_tables(f4):
    bad = []
    for name, expect in TABLE.items():
        reg = f4["region"] if name == "F4" else region(name)
        got = (len(reg.members), reg.B_leq_map.n, reg.m)
        if got != expect:
            bad.append(f"{name}: {got} != {expect}")
    report(1, not bad, f"{len(TABLE)} types" + ("" if not bad else "; " + "; ".join(bad)))
    assert not bad


# --- 2, 3, 4 -------------------------------------------------------------------------------

def test_criterion_2_h1(f4):
    got = {}
    for name in ("D4", "B4", "A5"):
        reg = region(name)
        elems = list(all_canonical(reg.B_leq_map))
        for ce in elems:
            contract(ce, reg.B_leq_map)
        got[name] = h1_table(reg, elems)[0]
    got["F4"] = f4["h1"][0]
    ok = got == H1_MAX
    report(2, ok, " ".join(f"{k}={v}" for k, v in got.items()))
    assert ok


def test_criterion_3_f4_max(f4):
    mx = f4["max_m1"]
    ok = mx == F4_MAX_M1 and mx <= 2**86 and f4["count"] == TABLE["F4"][1]
    report(3, ok, f"max m(1) = {mx} over {f4['count']} elements")
    assert ok


def test_criterion_4_f4_polynomial(f4):
    reg = f4["region"]
    h1, witness = f4["h1"]
    bm = reg.B_leq_map
    p = 59
    poly = sum(Fraction(c) * p**k for k, c in enumerate(reversed(F4_DIM_POLY)))
    dim = dim_simple(reg, f4["ce59"], p)
    wt = reg.weights[witness]
    ok = (poly == dim and bm.lengths[witness] == 85 and f4["at59"] == witness
          and wt == (11, 11, 11, 9))
    report(4, ok, f"poly(59) == dim L = {dim}: {poly == dim}; witness {wt} at p=13, "
                  f"length {bm.lengths[witness]}")
    assert ok


# --- 5 -----------------------------------------------------------------------------------------

def random_quotient_element(S, J, length, rng):
    w = S.identity()
    for _ in range(length):
        options = [s for s in range(1, S.rank + 1)
                   if s not in S.right_descents(w)
                   and not S.has_left_descent_in(S.times_gen(w, s), frozenset(J))]
        if not options:
            break
        w = S.times_gen(w, rng.choice(options))
    return w


def random_intervals(count, seed):
    rng = random.Random(seed)
    finite = ["A2", "A3", "A4", "B2", "B3", "B4", "C3", "C4", "D4", "G2", "F4"]
    affine = ["affine:A1", "affine:A2", "affine:B2", "affine:G2"]
    systems = {n: CoxeterSystem.from_type(n) for n in finite + affine}
    out = []
    while len(out) < count:
        name = rng.choice(finite + affine)
        S = systems[name]
        if name.startswith("affine"):
            J = list(range(1, S.rank))
        else:
            J = [s for s in range(1, S.rank + 1) if rng.random() < 0.35]
        w = random_quotient_element(S, J, rng.randint(0, 14), rng)
        bm = bruhatmap.build(S, J, w)
        if bm.n <= 100:
            out.append((name, S, J, w, bm))
    return out


def test_criterion_5_oracle_intervals():
    configs = [SolverConfig(), SolverConfig(strategy="fromscratch"),
               SolverConfig(strategy="fromscratch", b_variant="B"),
               SolverConfig(strategy="hybrid", cache_budget=1 << 12)]
    cases = random_intervals(220, seed=2024)
    bad = []
    for k, (name, S, J, w, bm) in enumerate(cases):
        ce = canonicalize(bm, bm.top, configs[k % len(configs)])
        contract(ce, bm)
        got = {bm.element_of(y): f.as_dict() for y, f in ce.element.terms()}
        if got != triangular_canonical(S, J, w):
            bad.append((name, J, S.reduced_word(w)))
    sizes = [c[4].n for c in cases]
    report(5, not bad, f"{len(cases)} intervals, sizes {min(sizes)}..{max(sizes)}, "
                       f"{len(bad)} mismatches")
    assert not bad


# --- 6 -------------------------------------------------------------------------------------

def record_text(bm, cfg):
    return "".join(record_line(r) for ce in all_canonical(bm, cfg) for r in records(ce, bm))


def test_criterion_6_equivalence():
    S = CoxeterSystem.from_type("B4")
    maps = {"affine:B3": region("B3").B_leq_map,
            "B4": bruhatmap.build(S, (), S.longest_in_quotient())}
    bad, runs = [], 0
    for name, bm in maps.items():
        ref = record_text(bm, SolverConfig())
        moduli = default_moduli(bm.max_length)
        for threads in (1, 8):
            for cfg in (SolverConfig(workers=threads),
                        SolverConfig(strategy="fromscratch", b_variant="B", workers=threads),
                        SolverConfig(strategy="fromscratch", b_variant="Bprime", workers=threads),
                        SolverConfig(strategy="hybrid", cache_budget=1 << 16, workers=threads),
                        SolverConfig(moduli=moduli, workers=threads)):
                runs += 1
                if record_text(bm, cfg) != ref:
                    bad.append((name, cfg))
    report(6, not bad, f"{runs} runs byte-identical to the recursive reference"
                       + ("" if not bad else f"; differing: {bad}"))
    assert not bad


# --- 7 ---------------------------------------------------------------------------------------

def random_poly(rng):
    return P({rng.randint(-8, 8): rng.randint(-20, 20) for _ in range(rng.randint(0, 5))})


def laurent_case(rng):
    f, g, h = random_poly(rng), random_poly(rng), random_poly(rng)
    fm, f0, fs = f.sym_decompose()
    return (f + g == g + f and f * g == g * f and (f * g) * h == f * (g * h)
            and f * (g + h) == f * g + f * h and (f * g).bar() == f.bar() * g.bar()
            and f.bar().bar() == f and (f - fs).is_in_vZv() and fs.bar() == fs
            and all(a > 0 for a, _ in fm.terms()) and f0 == f.coefficient_at(0)
            and f - f == LaurentPoly.zero())


def full_map(name, J=()):
    S = CoxeterSystem.from_type(name)
    return bruhatmap.build(S, J, S.longest_in_quotient(J))


def random_element(bm, rng):
    pick = rng.sample(range(1, bm.n + 1), rng.randint(1, min(6, bm.n)))
    return ModuleElement.from_terms(bm, {i: P({rng.randint(-4, 4): rng.randint(-9, 9)
                                               for _ in range(3)}) for i in pick})


def quadratic_case(bm, rng):
    s = rng.randint(1, bm.rank)
    ms = act_Cs(random_element(bm, rng), s)
    return act_Cs(ms, s) == ms.scale(VV)


def action_case(bm, rng):
    s = rng.randint(1, bm.rank)
    h = random_element(bm, rng).as_dict()
    out = act_Cs(ModuleElement.from_terms(bm, h), s).as_dict()
    zero = LaurentPoly.zero()
    for y in range(1, bm.n + 1):
        t = int(bm.table[y, s - 1])
        hy = h.get(y, zero)
        if t < 0:
            expect = VV * hy
        elif bm.lengths[t] > bm.lengths[y]:
            expect = h.get(t, zero) + hy.mul_monomial(1)
        else:
            expect = h.get(t, zero) + hy.mul_monomial(-1)
        if out.get(y, zero) != expect:
            return False
    return True


def bruhat_case(bm, rng):
    S, J = bm.system, frozenset(bm.J)
    i = rng.randint(1, bm.n)
    y = bm.element_of(i)
    index = {}
    below = set()
    for z in subword_products(S, bm.word_of(i)):
        if not S.has_left_descent_in(z, J):
            k = bm.index_of(z)
            below.add(k)
            index[z] = k
    if bm.interval(i) != below or max(below) != i:
        return False
    coatoms = {index[z] for z in coatoms_by_deletion(S, J, y)}
    covered = {k for k in below if bm.lengths[k] == bm.lengths[i] - 1}
    if coatoms != covered:
        return False
    for j in range(1, bm.rank + 1):
        kind, k = bm.step(i, j)
        ys = S.times_gen(y, j)
        if S.has_left_descent_in(ys, J) != (kind is StepKind.NOT_IN_QUOTIENT):
            return False
        if kind is StepKind.INSIDE and bm.element_of(k) != ys:
            return False
    return True


def test_criterion_7_properties():
    rng = random.Random(7)
    # the module action needs whole quotients; Bruhat checks also use partial intervals
    full = [full_map("A3"), full_map("B3", (2,)), full_map("G2"), full_map("A4", (1, 3)),
            full_map("D4", (2,))]
    partial = full + [region("B3").B_leq_map, region("G2").B_leq_map]
    N = 1000
    for bm in partial + [full_map("A5"), full_map("B4")]:
        for ce in all_canonical(bm):
            contract(ce, bm)
    counts = {
        "laurent": sum(laurent_case(rng) for _ in range(N)),
        "quadratic": sum(quadratic_case(rng.choice(full), rng) for _ in range(N)),
        "action": sum(action_case(rng.choice(full), rng) for _ in range(N)),
        "bruhat": sum(bruhat_case(rng.choice(partial), rng) for _ in range(N)),
    }
    ok = all(v == N for v in counts.values())
    ok = ok and CONTRACT["checked"] >= N and not CONTRACT["failed"]
    detail = " ".join(f"{k}={v}/{N}" for k, v in counts.items())
    detail += f" contract={CONTRACT['checked'] - len(CONTRACT['failed'])}/{CONTRACT['checked']}"
    report(7, ok, detail)
    assert ok


# --- 8 ------------------------------------------------------------------------------------------

def test_criterion_8_p_independence():
    bad = []
    for name in ("A2", "B2", "G2", "A3"):
        h = root_system(name).coxeter_number
        p1 = next_prime(h)
        p2 = next_prime(p1 + 1)
        p3 = next_prime(p2 + 1)
        r1 = region(name, p1)
        ref = [(ce.x_index, ce.element.terms()) for ce in all_canonical(r1.B_leq_map)]
        for p in (p2, p3):
            r = region(name, p)
            if r.words() != r1.words() or r.B_leq_map.to_bytes() != r1.B_leq_map.to_bytes():
                bad.append(f"{name} region differs at p={p}")
                continue
            if weights_at(r1, p) != r.weights:
                bad.append(f"{name} weights differ at p={p}")
            got = [(ce.x_index, ce.element.terms()) for ce in all_canonical(r.B_leq_map)]
            if got != ref:
                bad.append(f"{name} canonical elements differ at p={p}")
    orders = {}
    for name in list(TABLE) + ["E6"]:
        info = root_system(name)
        index = int(sympy.Matrix(info.cartan).det())
        nB = TABLE[name][0] if name in TABLE else None
        got = len(enumerate_B(build_setup("affine:" + name), build_map=False).members)
        if nB is not None and got != nB:
            bad.append(f"{name} |B| = {got}")
        if got * index != weyl_order(name):
            bad.append(f"{name}: |B| [X:ZPhi] = {got * index} != |W| = {weyl_order(name)}")
        orders[name] = got
    # the closed-form orders agree with the enumerated finite groups
    for name in ("A3", "B3", "C3", "D4", "G2", "F4"):
        if full_map(name).n != weyl_order(name):
            bad.append(f"{name} |W| mismatch")
    report(8, not bad, f"p-independence for A2 B2 G2 A3; |B| = |W|/[X:ZPhi] for "
                       f"{len(orders)} types" + ("" if not bad else "; " + "; ".join(bad)))
    assert not bad
