"""Command line driver: ``klpoly build-map | kl | stats | h1 | charformula``.

Results are JSON lines, one record per nonzero ``m_{y,x}``::

    {"x": 7, "y": 3, "a": 1, "c": [1, 1], "at_-1": -2, "at_1": 2}

meaning ``m_{3,7} = v^1 (1 + v^2)``.  Exit codes: 0 ok, 2 bad input,
3 computation limit, 4 I/O.
"""

from __future__ import annotations

import argparse
import hashlib
import io
import json
import logging
import os
import struct
import sys
import time
from dataclasses import dataclass, replace
from typing import BinaryIO, Iterable

from . import bruhatmap, charformula
from .bruhatmap import BruhatMap, IntervalTooLarge
from .coxeter import CoxeterSystem, parse_type
from .heckemod import ModuleElement
from .klsolver import (BoundError, CanonicalElement, SolverConfig, all_canonical, canonicalize,
                       default_moduli)
from .laurent import EXACT, LaurentPoly

log = logging.getLogger("klpoly")

EXIT_OK, EXIT_INPUT, EXIT_LIMIT, EXIT_IO = 0, 2, 3, 4

ELEMENT_MAGIC = b"KLEL"
ELEMENT_VERSION = 1


class InputError(ValueError):
    pass


class LimitReached(RuntimeError):
    pass


# --- result records ------------------------------------------------------------

def records(ce: CanonicalElement, bmap: BruhatMap) -> list[dict]:
    """ResultRecords of one canonical element, ``y`` descending."""
    lx = int(bmap.lengths[ce.x_index])
    out = []
    for y, f in ce.element.terms():
        a = f.valuation
        assert (a - lx + int(bmap.lengths[y])) % 2 == 0
        out.append({"x": ce.x_index, "y": y, "a": a, "c": f.dense()[1][::2],
                    "at_-1": f.evaluate(-1), "at_1": f.evaluate(1)})
    return out


def record_line(rec: dict) -> str:
    return json.dumps(rec, separators=(",", ":")) + "\n"


def parse_record(line: str) -> tuple[int, int, LaurentPoly]:
    rec = json.loads(line)
    f = LaurentPoly(rec["a"], rec["c"], EXACT, 2)
    return rec["x"], rec["y"], f


# --- KLEL element cache ---------------------------------------------------------

def _int_bytes(c: int) -> bytes:
    raw = c.to_bytes((c.bit_length() + 8) // 8, "little", signed=True)
    return struct.pack("<I", len(raw)) + raw


def encode_element(ce: CanonicalElement) -> bytes:
    terms = ce.element.terms()
    out = io.BytesIO()
    out.write(ELEMENT_MAGIC)
    out.write(struct.pack("<IQQ", ELEMENT_VERSION, ce.x_index, len(terms)))
    for y, f in terms:
        ts = f.terms()
        step = 2 if all((a - ts[0][0]) % 2 == 0 for a, _ in ts) else 1
        coeffs = f.dense()[1][::step]
        out.write(struct.pack("<QiBI", y, f.valuation, step, len(coeffs)))
        for c in coeffs:
            out.write(_int_bytes(int(c)))
    return out.getvalue()


def decode_element(src: BinaryIO, bmap: BruhatMap) -> CanonicalElement | None:
    """Next element from ``src``; ``None`` at a clean end of file."""
    head = src.read(4)
    if not head:
        return None

    def take(fmt):
        size = struct.calcsize(fmt)
        raw = src.read(size)
        if len(raw) != size:
            raise ValueError("truncated element cache")
        return struct.unpack(fmt, raw)

    if head != ELEMENT_MAGIC:
        raise ValueError("bad element cache magic")
    version, x, count = take("<IQQ")
    if version != ELEMENT_VERSION:
        raise ValueError(f"unsupported element cache version {version}")
    terms = {}
    for _ in range(count):
        y, a, step, n = take("<QiBI")
        coeffs = []
        for _ in range(n):
            (size,) = take("<I")
            raw = src.read(size)
            if len(raw) != size:
                raise ValueError("truncated element cache")
            coeffs.append(int.from_bytes(raw, "little", signed=True))
        terms[y] = LaurentPoly(a, coeffs, EXACT, step)
    return CanonicalElement(x, ModuleElement.from_terms(bmap, terms))


# --- job setup ------------------------------------------------------------------

@dataclass
class Job:
    system: CoxeterSystem
    bmap: BruhatMap
    region: charformula.RestrictedRegion | None
    type_name: str
    build_seconds: float


def _ints(text: str, what: str) -> list[int]:
    try:
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise InputError(f"bad {what}: {text!r}") from None


def _parabolic(text: str, system: CoxeterSystem, affine: bool) -> frozenset[int]:
    if text == "empty":
        return frozenset()
    if text == "finite":
        # the generators of the finite Weyl group (all but the affine node)
        return frozenset(range(1, system.rank if affine else system.rank + 1))
    J = frozenset(_ints(text, "parabolic set"))
    if not J <= set(range(1, system.rank + 1)):
        raise InputError(f"parabolic set {sorted(J)} out of range")
    return J


def make_job(args) -> Job:
    try:
        family, n, affine = parse_type(args.type)
    except ValueError as exc:
        raise InputError(str(exc)) from None
    region = None
    t0 = time.perf_counter()
    if affine:
        setup = charformula.build_setup(args.type, args.p)
        system = setup.system
    else:
        system = CoxeterSystem.from_type(args.type)
    J = _parabolic(args.parabolic, system, affine)
    target = args.target
    if target == "longest-restricted":
        if not affine or J != setup.finite:
            raise InputError("longest-restricted needs an affine type with --parabolic finite")
        region = charformula.enumerate_B(setup, build_map=False)
        x = region.w_prime
    elif target == "longest":
        if affine:
            raise InputError("affine Weyl groups have no longest element")
        x = system.longest_in_quotient(J)
    else:
        x = system.element(_ints(target, "target word"))
    if system.has_left_descent_in(x, J):
        raise InputError("target is not a minimal coset representative")
    bmap = bruhatmap.build(system, J, x, shed_memory=args.shed_memory, limit_n=args.limit_n)
    if region is not None:
        region.B_leq_map = bmap
    return Job(system, bmap, region, args.type, time.perf_counter() - t0)


def solver_config(args) -> SolverConfig:
    moduli: tuple[int, ...] = ()
    if args.mod:
        if args.mod != "auto":
            moduli = tuple(_ints(args.mod, "moduli"))
    try:
        return SolverConfig(strategy=args.strategy, b_variant=args.b_variant,
                            workers=args.threads, moduli=moduli)
    except ValueError as exc:
        raise InputError(str(exc)) from None


def _resolve_auto_moduli(args, cfg: SolverConfig, bmap: BruhatMap) -> SolverConfig:
    if args.mod == "auto":
        return replace(cfg, moduli=default_moduli(bmap.max_length))
    return cfg


# --- checkpointed runs ------------------------------------------------------------

def _fingerprint(args, bmap: BruhatMap) -> str:
    keys = ("command", "type", "parabolic", "target", "strategy", "b_variant", "mod", "p")
    blob = json.dumps({k: getattr(args, k, None) for k in keys}, sort_keys=True).encode()
    return hashlib.sha256(blob + bmap.to_bytes()).hexdigest()


def _write_atomic(path: str, data: bytes):
    tmp = path + ".tmp"
    with open(tmp, "wb") as fh:
        fh.write(data)
        fh.flush()
        os.fsync(fh.fileno())
    os.replace(tmp, path)


class Checkpoint:
    """Output file plus an element cache, made consistent by a small state file."""

    def __init__(self, directory: str, fingerprint: str, out_path: str):
        os.makedirs(directory, exist_ok=True)
        self.state_path = os.path.join(directory, "state.json")
        self.cache_path = os.path.join(directory, "elements.klel")
        self.out_path = out_path
        self.fingerprint = fingerprint
        self.done, self.out_size, self.cache_size = 0, 0, 0
        if os.path.exists(self.state_path):
            with open(self.state_path) as fh:
                state = json.load(fh)
            if state.get("fingerprint") != fingerprint or state.get("version") != 1:
                raise InputError("checkpoint belongs to a different job or version")
            self.done = state["done"]
            self.out_size = state["out_size"]
            self.cache_size = state["cache_size"]
        for path, size in ((self.out_path, self.out_size), (self.cache_path, self.cache_size)):
            with open(path, "ab") as fh:
                fh.truncate(size)

    def load(self, bmap: BruhatMap) -> list[CanonicalElement]:
        out = []
        with open(self.cache_path, "rb") as fh:
            while (ce := decode_element(fh, bmap)) is not None:
                out.append(ce)
        if len(out) != self.done:
            raise InputError("checkpoint cache does not match its state file")
        return out

    def commit(self, out_chunk: bytes, cache_chunk: bytes, count: int):
        for path, chunk in ((self.out_path, out_chunk), (self.cache_path, cache_chunk)):
            with open(path, "ab") as fh:
                fh.write(chunk)
                fh.flush()
                os.fsync(fh.fileno())
        self.done += count
        self.out_size += len(out_chunk)
        self.cache_size += len(cache_chunk)
        state = {"version": 1, "fingerprint": self.fingerprint, "done": self.done,
                 "out_size": self.out_size, "cache_size": self.cache_size}
        _write_atomic(self.state_path, json.dumps(state).encode())

    def finish(self):
        for path in (self.state_path, self.cache_path):
            if os.path.exists(path):
                os.remove(path)


def run_kl(args, job: Job, out: BinaryIO | None) -> None:
    bmap = job.bmap
    cfg = _resolve_auto_moduli(args, solver_config(args), bmap)
    indices = list(range(1, bmap.n + 1)) if args.index is None else [args.index]
    if args.index is not None and not 1 <= args.index <= bmap.n:
        raise InputError(f"index {args.index} outside 1..{bmap.n}")
    if args.checkpoint_dir is None:
        new = 0
        for ce in _solve(bmap, cfg, indices, []):
            out.write("".join(record_line(r) for r in records(ce, bmap)).encode())
            new += 1
            if args.stop_after is not None and new >= args.stop_after:
                raise LimitReached(f"stopped after {new} elements")
        return
    if args.out is None:
        raise InputError("--checkpoint-dir needs --out")
    ck = Checkpoint(args.checkpoint_dir, _fingerprint(args, bmap), args.out)
    previous = ck.load(bmap)
    new = 0
    for ce in _solve(bmap, cfg, indices[ck.done:], previous):
        ck.commit("".join(record_line(r) for r in records(ce, bmap)).encode(), encode_element(ce), 1)
        new += 1
        if args.stop_after is not None and new >= args.stop_after and ck.done < len(indices):
            raise LimitReached(f"stopped after {new} elements")
    ck.finish()


def _solve(bmap: BruhatMap, cfg: SolverConfig, indices: list[int],
           previous: list[CanonicalElement]) -> Iterable[CanonicalElement]:
    if len(indices) == 1 and not previous:
        yield canonicalize(bmap, indices[0], cfg)
        return
    yield from all_canonical(bmap, cfg, indices=indices, seed=previous)


# --- commands ---------------------------------------------------------------------

def _emit(args, text: str):
    print(text, flush=True)


def cmd_build_map(args) -> int:
    job = make_job(args)
    bmap = job.bmap
    if args.out:
        bmap.serialize(args.out)
    _emit(args, json.dumps({"n": bmap.n, "max_length": bmap.max_length,
                            "seconds": round(job.build_seconds, 3), "out": args.out}))
    return EXIT_OK


def cmd_kl(args) -> int:
    job = make_job(args)
    if args.out is None:
        run_kl(args, job, sys.stdout.buffer)
        sys.stdout.flush()
    elif args.checkpoint_dir is not None:
        run_kl(args, job, None)
    else:
        tmp = args.out + ".partial"
        with open(tmp, "wb") as fh:
            run_kl(args, job, fh)
        os.replace(tmp, args.out)
    return EXIT_OK


def _region_elements(args, job: Job):
    cfg = _resolve_auto_moduli(args, solver_config(args), job.bmap)
    return all_canonical(job.bmap, cfg)


def cmd_stats(args) -> int:
    job = make_job(args)
    bmap = job.bmap
    info: dict = {"type": job.type_name, "n": bmap.n, "m": bmap.max_length}
    members = set(job.region.member_indices) if job.region else None
    if job.region is not None:
        info["|B|"] = len(job.region.members)
        info["|B_<=|"] = bmap.n
    if not args.no_polys:
        max_at_1, max_h1, witness = 0, -1, None
        for ce in _region_elements(args, job):
            vals = ce.element.values_at(1)
            max_at_1 = max(max_at_1, max(vals))
            if members is not None and ce.x_index in members:
                h = ce.m(1).mu()
                if h > max_h1:
                    max_h1, witness = h, ce.x_index
        info["max_m_at_1"] = max_at_1
        info["max_m_at_1_le_2^m"] = max_at_1 <= 2**bmap.max_length
        if members is not None:
            info["max_h1"] = max_h1
            info["h1_witness_weight"] = list(job.region.weights[witness])
            info["h1_witness_length"] = int(bmap.lengths[witness])
    _emit(args, json.dumps(info))
    return EXIT_OK


def _affine_args(args):
    family, n, _ = parse_type(args.type)
    args.type = f"affine:{family}{n}"
    args.parabolic = "finite"
    args.target = "longest-restricted"
    return args


def cmd_h1(args) -> int:
    job = make_job(_affine_args(args))
    best, weights = charformula.h1_table(job.region, _region_elements(args, job))
    _emit(args, json.dumps({"type": job.type_name, "max_h1": best,
                            "witness_weights": [list(w) for w in weights],
                            "witness_lengths": [job.region.setup.system.length(
                                job.bmap.element_of(job.region.index_by_weight[w])) for w in weights]}))
    return EXIT_OK


def cmd_charformula(args) -> int:
    if args.p is None or args.weight is None:
        raise InputError("charformula needs --p and --lambda")
    p = args.p
    args.p = None  # the region itself is built at the default prime
    job = make_job(_affine_args(args))
    region = job.region
    info = region.setup.info
    if p < info.coxeter_number or not charformula._isprime(p):
        raise InputError(f"p={p} must be a prime >= h={info.coxeter_number}")
    try:
        lam = charformula.parse_weight(args.weight, p)
        x = charformula.locate(region, lam, p)
    except charformula.NotRestricted as exc:
        raise InputError(str(exc)) from None
    except ValueError as exc:
        raise InputError(str(exc)) from None
    cfg = solver_config(args)
    ce = canonicalize(job.bmap, x, cfg)
    wts = charformula.weights_at(region, p)
    rows = [{"weight": list(wts[y]), "m_at_-1": c, "dim_V": charformula.dim_weyl(info, wts[y])}
            for y, c in charformula.character_row(region, ce)]
    for r in rows:
        _emit(args, json.dumps(r))
    _emit(args, json.dumps({"lambda": list(lam), "x_length": int(job.bmap.lengths[x]),
                            "dim_L": charformula.dim_simple(region, ce, p),
                            "metadata": charformula.validity(info, p)}))
    return EXIT_OK


COMMANDS = {
    "build-map": cmd_build_map,
    "kl": cmd_kl,
    "stats": cmd_stats,
    "h1": cmd_h1,
    "charformula": cmd_charformula,
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="klpoly", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--type", required=True, help="e.g. B4 or affine:F4")
        sp.add_argument("--parabolic", default=None, help="empty | finite | comma list")
        sp.add_argument("--target", default=None,
                        help="longest | longest-restricted | comma-separated word")
        sp.add_argument("--strategy", default="recursive", choices=["recursive", "fromscratch", "hybrid"])
        sp.add_argument("--b-variant", default="Bprime", choices=["B", "Bprime"])
        sp.add_argument("--mod", default=None, help="m1,m2,... or auto")
        sp.add_argument("--threads", type=int, default=os.cpu_count() or 1)
        sp.add_argument("--p", type=int, default=None)
        sp.add_argument("--lambda", dest="weight", default=None, help="e.g. p-2,p-2,p-2,9")
        sp.add_argument("--out", default=None)
        sp.add_argument("--checkpoint-dir", default=None)
        sp.add_argument("--shed-memory", action="store_true")
        sp.add_argument("--limit-n", type=int, default=bruhatmap.DEFAULT_LIMIT)
        sp.add_argument("--index", type=int, default=None, help="kl: single map index")
        sp.add_argument("--stop-after", type=int, default=None,
                        help="kl: stop with exit code 3 after this many new elements")
        sp.add_argument("--no-polys", action="store_true", help="stats: map data only")
    return ap


def _defaults(args):
    affine = args.type.startswith("affine:")
    if args.parabolic is None:
        args.parabolic = "finite" if affine else "empty"
    if args.target is None:
        args.target = "longest-restricted" if affine else "longest"
    if args.threads < 1:
        raise InputError("--threads must be positive")
    return args


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](_defaults(args))
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (IntervalTooLarge, LimitReached, BoundError) as exc:
        print(f"limit: {exc}", file=sys.stderr)
        return EXIT_LIMIT
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
