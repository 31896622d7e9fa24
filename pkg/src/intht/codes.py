"""Binary index codes for heavy-entry extraction, and the voting filter."""
from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError

PLAIN = "plain-binary"


def parse_scheme(scheme: str) -> int:
    """Return the repetition factor encoded in a scheme name (1 for plain)."""
    if scheme == PLAIN:
        return 1
    if scheme.startswith("repetition-"):
        try:
            r = int(scheme.split("-", 1)[1])
        except ValueError:
            r = 0
        if r >= 1:
            return r
    raise ConfigError(f"unknown code scheme {scheme!r}")


@dataclass(frozen=True)
class IndexCodeTable:
    """Row i of ``E`` is the codeword of index i (most significant bit first)."""

    p: int
    scheme: str
    E: np.ndarray = field(repr=False, compare=False)

    @property
    def l(self) -> int:
        return self.E.shape[1]

    @property
    def repeat(self) -> int:
        return parse_scheme(self.scheme)

    @property
    def bits(self) -> int:
        """Logical bits per index before repetition."""
        return self.l // self.repeat

    def encode(self, i: int) -> np.ndarray:
        return self.E[i]


def build_code(p: int, scheme: str = PLAIN) -> IndexCodeTable:
    if p < 2:
        raise ConfigError(f"code table needs p >= 2, got {p}")
    r = parse_scheme(scheme)
    nbits = math.ceil(math.log2(p))
    shifts = np.arange(nbits - 1, -1, -1)
    base = (np.arange(p)[:, None] >> shifts[None, :]) & 1
    E = np.repeat(base, r, axis=1).astype(np.uint8)
    return IndexCodeTable(p=p, scheme=scheme, E=E)


def binarify(S, delta: float) -> np.ndarray:
    """Threshold a (bits x b) sketch array at ``|S| > delta / 2``.

    Returns a (b, bits) boolean array: one codeword per bucket column.
    """
    S = np.asarray(S, dtype=np.float64)
    return (np.abs(S) > delta / 2.0).T


def _decode_index(bits: np.ndarray, table: IndexCodeTable):
    r = table.repeat
    if r == 1:
        value = 0
        for bit in bits:
            value = (value << 1) | int(bit)
        return value if value < table.p else None
    groups = np.asarray(bits, dtype=np.int64).reshape(table.bits, r).sum(axis=1)
    if r % 2 == 0 and np.any(2 * groups == r):
        return None
    value = 0
    for ones in groups:
        value = (value << 1) | int(2 * ones > r)
    return value if value < table.p else None


def decode(o, table: IndexCodeTable, parts: int = 2):
    """Decode a concatenated codeword into an index tuple, or ``None``.

    ``o`` holds ``parts`` codewords of length ``table.l`` back to back (two
    for a matrix entry, three for an order-3 tensor entry).
    """
    o = np.asarray(o)
    if o.shape != (parts * table.l,):
        raise ConfigError(f"codeword length {o.shape} != {parts} x {table.l}")
    out = []
    for k in range(parts):
        idx = _decode_index(o[k * table.l:(k + 1) * table.l], table)
        if idx is None:
            return None
        out.append(idx)
    return tuple(out)


@dataclass
class DecodedVotes:
    """How many of the ``d`` repetitions decoded each index tuple."""

    d: int
    counts: Counter = field(default_factory=Counter)

    def add_repetition(self, found) -> None:
        # one vote per repetition, however many buckets decoded the same tuple
        self.counts.update(set(found))


def majority_filter(votes: DecodedVotes) -> set:
    if votes.d < 1:
        raise ConfigError("repetition count must be >= 1")
    return {key for key, c in votes.counts.items() if c >= votes.d / 2}
