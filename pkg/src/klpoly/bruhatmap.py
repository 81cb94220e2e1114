"""Bruhat maps: index tables for lower intervals ``I_x = {y in W^J : y <= x}``.

Row ``i`` (1-based) of the table describes ``y_i * s_j`` for every generator:
a positive entry is the index of that element, ``-1`` means the product left
``W^J`` and ``0`` means it lies in ``W^J`` but outside the interval.  Index order
refines the Bruhat order and row 1 is the identity.
"""

from __future__ import annotations

import enum
import io
import struct
from dataclasses import dataclass, field
from typing import BinaryIO, Callable, Iterable

import crcmod
import numpy as np

from .coxeter import CoxeterElement, CoxeterSystem, mask_to_set, parabolic_mask

MAGIC = b"KLBM"
VERSION = 1
DEFAULT_LIMIT = 2**31 - 1

NOT_IN_QUOTIENT = -1
OUTSIDE = 0

# CRC-64/XZ (ECMA-182 polynomial, reflected)
crc64 = crcmod.mkCrcFun(0x142F0E1EBA9EA3693, initCrc=0, rev=True, xorOut=0xFFFFFFFFFFFFFFFF)


class IntervalTooLarge(RuntimeError):
    pass


class MapFormatError(ValueError):
    pass


class StepKind(enum.Enum):
    INSIDE = "inside"
    NOT_IN_QUOTIENT = "not-in-quotient"
    OUTSIDE = "outside"


@dataclass
class BuildStats:
    peak_reps: int = 0
    stages: int = 0
    stage_sizes: list[int] = field(default_factory=list)


class BruhatMap:
    """Table of right multiplications on a lower Bruhat interval of ``W^J``."""

    def __init__(self, rank: int, J: Iterable[int], table: np.ndarray, lengths: np.ndarray,
                 parent_index: np.ndarray, parent_gen: np.ndarray, x_word: tuple[int, ...],
                 system: CoxeterSystem | None = None):
        self.rank = rank
        self.J = frozenset(J)
        # arrays carry a padding row 0 so that rows are addressed by 1-based index
        self.table = table
        self.lengths = lengths
        self.parent_index = parent_index
        self.parent_gen = parent_gen
        self.x_word = tuple(x_word)
        self.system = system
        self.stats: BuildStats | None = None
        self._elements: dict[CoxeterElement, int] | None = None

    @property
    def n(self) -> int:
        return len(self.lengths) - 1

    def __len__(self):
        return self.n

    def __eq__(self, other):
        if not isinstance(other, BruhatMap):
            return NotImplemented
        return (self.rank == other.rank and self.J == other.J and self.x_word == other.x_word
                and np.array_equal(self.table, other.table)
                and np.array_equal(self.lengths, other.lengths)
                and np.array_equal(self.parent_index, other.parent_index)
                and np.array_equal(self.parent_gen, other.parent_gen))

    def __repr__(self):
        return f"BruhatMap(n={self.n}, rank={self.rank}, J={sorted(self.J)}, l(x)={len(self.x_word)})"

    def _check(self, i: int, j: int | None = None):
        if not 1 <= i <= self.n:
            raise IndexError(f"index {i} out of range 1..{self.n}")
        if j is not None and not 1 <= j <= self.rank:
            raise IndexError(f"generator {j} out of range 1..{self.rank}")

    def step(self, i: int, j: int) -> tuple[StepKind, int | None]:
        self._check(i, j)
        t = int(self.table[i, j - 1])
        if t > 0:
            return StepKind.INSIDE, t
        if t == NOT_IN_QUOTIENT:
            return StepKind.NOT_IN_QUOTIENT, None
        return StepKind.OUTSIDE, None

    def length(self, i: int) -> int:
        self._check(i)
        return int(self.lengths[i])

    @property
    def max_length(self) -> int:
        return int(self.lengths[1:].max())

    @property
    def top(self) -> int:
        """Index of ``x`` itself (the unique element of maximal length)."""
        return int(np.argmax(self.lengths[1:])) + 1

    def word_of(self, i: int) -> tuple[int, ...]:
        self._check(i)
        word = []
        while i != 1:
            word.append(int(self.parent_gen[i]))
            i = int(self.parent_index[i])
        return tuple(reversed(word))

    def element_of(self, i: int) -> CoxeterElement:
        if self.system is None:
            raise ValueError("map has no attached Coxeter system")
        return self.system.element(self.word_of(i))

    def index_of(self, w: CoxeterElement) -> int | None:
        if self._elements is None:
            elems = {self.system.identity(): 1}
            reps = [None, self.system.identity()]
            for i in range(2, self.n + 1):
                e = self.system.times_gen(reps[int(self.parent_index[i])], int(self.parent_gen[i]))
                reps.append(e)
                elems[e] = i
            self._elements = elems
        return self._elements.get(w)

    def right_descent(self, i: int) -> int | None:
        """Smallest ``s`` with ``y_i s < y_i`` (``None`` for the identity)."""
        row = self.table[i]
        for j in range(self.rank):
            t = row[j]
            if t > 0 and self.lengths[t] < self.lengths[i]:
                return j + 1
        return None

    def interval(self, i: int) -> set[int]:
        """Indices of ``{z : z <= y_i}`` from the recursive Bruhat definition."""
        self._check(i)
        chain = []
        k = i
        while k != 1:
            chain.append((int(self.parent_index[k]), int(self.parent_gen[k])))
            k = chain[-1][0]
        below = {1}
        for _, g in reversed(chain):
            col = self.table[:, g - 1]
            below |= {int(col[z]) for z in below if col[z] > 0}
        return below

    # --- persistence -------------------------------------------------------

    def to_bytes(self) -> bytes:
        n, r = self.n, self.rank
        out = io.BytesIO()
        out.write(MAGIC)
        out.write(struct.pack("<IHQQ", VERSION, r, parabolic_mask(self.J), n))
        out.write(np.ascontiguousarray(self.table[1:], dtype="<i8").tobytes())
        out.write(np.ascontiguousarray(self.lengths[1:], dtype="<u4").tobytes())
        rec = np.zeros(n, dtype=np.dtype([("i", "<u8"), ("g", "<u2")], align=False))
        rec["i"] = self.parent_index[1:]
        rec["g"] = self.parent_gen[1:]
        out.write(rec.tobytes())
        out.write(struct.pack("<I", len(self.x_word)))
        out.write(np.asarray(self.x_word, dtype="<u2").tobytes())
        body = out.getvalue()
        return body + struct.pack("<Q", crc64(body))

    def serialize(self, sink: BinaryIO | str) -> None:
        data = self.to_bytes()
        if isinstance(sink, (str, bytes)) or hasattr(sink, "__fspath__"):
            with open(sink, "wb") as fh:
                fh.write(data)
        else:
            sink.write(data)

    @classmethod
    def from_bytes(cls, data: bytes, system: CoxeterSystem | None = None) -> "BruhatMap":
        if len(data) < 4 + 22 + 8 or data[:4] != MAGIC:
            raise MapFormatError("bad magic")
        body, (crc,) = data[:-8], struct.unpack("<Q", data[-8:])
        version, r, mask, n = struct.unpack_from("<IHQQ", data, 4)
        if version != VERSION:
            raise MapFormatError(f"unsupported version {version}")
        if crc64(body) != crc:
            raise MapFormatError("checksum mismatch")
        pos = 4 + 22
        need = n * r * 8 + n * 4 + n * 10 + 4
        if len(body) < pos + need:
            raise MapFormatError("truncated map")

        def take(nbytes, dtype, count):
            nonlocal pos
            arr = np.frombuffer(body, dtype=dtype, count=count, offset=pos)
            pos += nbytes
            return arr

        table = take(n * r * 8, "<i8", n * r).reshape(n, r)
        lengths = take(n * 4, "<u4", n)
        rec = take(n * 10, np.dtype([("i", "<u8"), ("g", "<u2")]), n)
        (k,) = struct.unpack_from("<I", body, pos)
        pos += 4
        word = take(2 * k, "<u2", k)
        if pos != len(body):
            raise MapFormatError("trailing bytes")
        pad = lambda a: np.concatenate([np.zeros((1,) + a.shape[1:], np.int64), a.astype(np.int64)])
        return cls(r, mask_to_set(mask), pad(table), pad(lengths), pad(rec["i"]), pad(rec["g"]),
                   tuple(int(s) for s in word), system)

    @classmethod
    def deserialize(cls, source: BinaryIO | str, system: CoxeterSystem | None = None) -> "BruhatMap":
        if isinstance(source, (str, bytes)) or hasattr(source, "__fspath__"):
            with open(source, "rb") as fh:
                data = fh.read()
        else:
            data = source.read()
        return cls.from_bytes(data, system)


def build(system: CoxeterSystem, J: Iterable[int], x: CoxeterElement | Iterable[int],
          shed_memory: bool = False, limit_n: int = DEFAULT_LIMIT,
          on_stage: Callable[[int, list], None] | None = None) -> BruhatMap:
    """Compute the Bruhat map of ``I_x`` stage by stage along a reduced word of ``x``.

    ``x`` may be an element or a word.  ``on_stage(i, reps)`` is called after
    each prefix of length ``i`` is processed (test hook; needs ``reps``, so
    it disables nothing but sees ``None`` holes when shedding).
    """
    J = frozenset(J)
    if not isinstance(x, CoxeterElement):
        x = system.element(x)
    if system.has_left_descent_in(x, J):
        raise ValueError("x is not a minimal coset representative for J")
    word = system.reduced_word(x)
    r = system.rank

    table: list[list[int]] = [[0] * r, [0] * r]
    lengths = [0, 0]
    parent = [(0, 0), (0, 0)]
    reps: list[CoxeterElement | None] = [None, system.identity()]
    coatoms: list[list[int] | None] = [None, []]
    stats = BuildStats(peak_reps=1)
    alive = 1

    for stage, s in enumerate(word, start=1):
        si = s - 1
        n = len(lengths) - 1
        for j in range(1, n + 1):
            if table[j][si] != 0:
                continue
            y = system.times_gen(reps[j], s)
            if system.has_left_descent_in(y, J):
                table[j][si] = NOT_IN_QUOTIENT
                continue
            k = len(lengths)
            if k > limit_n:
                raise IntervalTooLarge(f"interval exceeds limit of {limit_n} elements")
            row = [0] * r
            row[si] = j
            table.append(row)
            table[j][si] = k
            lengths.append(lengths[j] + 1)
            parent.append((j, s))
            reps.append(y)
            alive += 1
            co = [j]
            for w in coatoms[j]:
                t = table[w][si]
                if t > 0 and lengths[t] > lengths[w] and t not in co:
                    co.append(t)
            coatoms.append(co)

        for k in range(n + 1, len(lengths)):
            y = reps[k]
            for t in range(r):
                if t == si or table[k][t] != 0 or not _neg(y.fwd[t]):
                    continue
                z = system.times_gen(y, t + 1)
                for c in coatoms[k]:
                    if reps[c] == z:
                        table[k][t] = c
                        table[c][t] = k
                        break
                else:
                    # a shorter neighbour outside W^J would contradict the
                    # quotient's closure under going down; fail loudly
                    if system.has_left_descent_in(z, J):
                        table[k][t] = NOT_IN_QUOTIENT
                    else:
                        raise AssertionError("shorter neighbour missing from coatoms")

        stats.peak_reps = max(stats.peak_reps, alive)
        stats.stage_sizes.append(len(lengths) - 1)
        if on_stage is not None:
            on_stage(stage, reps)
        if shed_memory:
            for j in range(1, len(lengths)):
                if reps[j] is not None and 0 not in table[j]:
                    reps[j] = None
                    coatoms[j] = None
                    alive -= 1
    stats.stages = len(word)

    # resolve remaining zeros into -1 / 0 so the final table is complete
    for j in range(1, len(lengths)):
        row = table[j]
        for t in range(r):
            if row[t] == 0 and system.has_left_descent_in(system.times_gen(reps[j], t + 1), J):
                row[t] = NOT_IN_QUOTIENT

    n = len(lengths) - 1
    tab = np.array(table, dtype=np.int64)
    tab[0] = 0
    bm = BruhatMap(r, J, tab, np.array(lengths, dtype=np.int64),
                   np.array([p[0] for p in parent], dtype=np.int64),
                   np.array([p[1] for p in parent], dtype=np.int64), word, system)
    bm.stats = stats
    return bm


def _neg(vec) -> bool:
    for c in vec:
        if c:
            return c < 0
    return False
