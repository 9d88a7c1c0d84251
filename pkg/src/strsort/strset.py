"""String sets over a shared character buffer, plus brute-force verification oracles.

A string set is an ordered sequence of *handles* (byte offsets) into one
immutable buffer of zero-terminated strings.  Sorting a set only permutes
the handle array; the buffer is never touched.  Handles being plain offsets
keeps permutations serializable and lets independent oracles re-derive every
string from scratch.

Conventions used throughout the package:

* characters are 8-bit, the terminator is byte 0 and never occurs inside a
  string;
* a *word key* packs the next ``WORD_CHARS`` characters of a string at some
  depth into one unsigned integer, first character in the most significant
  byte, zero-padded past the terminator, so that integer comparison of two
  keys equals lexicographic comparison of the corresponding substrings;
* an LCP array stores, for a sorted set, the longest-common-prefix length of
  each string with its predecessor; index 0 holds the sentinel ``LCP_UNDEF``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

WORD_CHARS = 8
WORD_BYTES_SHIFTS = np.arange(WORD_CHARS - 1, -1, -1, dtype=np.uint64) * np.uint64(8)

LCP_UNDEF = -1


class StringSet:
    """Ordered handles into an immutable zero-terminated character buffer."""

    __slots__ = ("buffer", "handles", "_arr", "_zeros")

    def __init__(self, buffer: bytes, handles: np.ndarray):
        self.buffer = buffer
        self.handles = np.ascontiguousarray(handles, dtype=np.int64)
        self._arr = np.frombuffer(buffer, dtype=np.uint8)
        self._zeros = None

    def __len__(self) -> int:
        return len(self.handles)

    @property
    def n(self) -> int:
        return len(self.handles)

    def with_handles(self, handles: np.ndarray) -> "StringSet":
        """A sibling set over the same buffer (zero-copy buffer share)."""
        out = StringSet.__new__(StringSet)
        out.buffer = self.buffer
        out.handles = np.ascontiguousarray(handles, dtype=np.int64)
        out._arr = self._arr
        out._zeros = self._zeros
        return out

    def char_array(self) -> np.ndarray:
        return self._arr

    def terminator_positions(self) -> np.ndarray:
        """Sorted positions of all terminator bytes in the buffer."""
        if self._zeros is None:
            self._zeros = np.flatnonzero(self._arr == 0)
        return self._zeros

    def ends(self, handles: np.ndarray | None = None) -> np.ndarray:
        """Terminator position for each handle (string end, exclusive)."""
        h = self.handles if handles is None else handles
        zeros = self.terminator_positions()
        if len(zeros) == 0:
            if len(h):
                raise ValueError("buffer is not zero-terminated")
            return np.zeros(0, dtype=np.int64)
        return zeros[np.searchsorted(zeros, h)]

    def length_of(self, handle: int) -> int:
        return int(self.ends(np.asarray([handle], dtype=np.int64))[0]) - handle

    def string_at(self, i: int) -> bytes:
        """Bytes of the i-th string (terminator excluded)."""
        h = int(self.handles[i])
        return self.buffer[h : h + self.length_of(h)]

    def strings(self) -> list[bytes]:
        return [self.string_at(i) for i in range(len(self))]


@dataclass
class DistStats:
    """Distinguishing-prefix total, LCP sum, and mean string length."""

    D: int
    L: int
    avg_len: float


@dataclass
class VerifyReport:
    ok: bool
    permutation_ok: bool
    order_ok: bool
    first_violation: int | None
    message: str

    def __bool__(self) -> bool:
        return self.ok


def load_delimited(data: bytes, delimiter: int = 0) -> StringSet:
    """Build a StringSet from delimiter-separated bytes.

    The delimiter is remapped to the terminator byte 0; a trailing delimiter
    is appended when absent.  Empty input yields an empty set.
    """
    if not (0 <= delimiter < 256):
        raise ValueError("delimiter must be a byte value")
    if len(data) == 0:
        return StringSet(b"", np.zeros(0, dtype=np.int64))
    if delimiter != 0:
        if 0 in data:
            raise ValueError("input contains byte 0, which is reserved as terminator")
        data = data.replace(bytes([delimiter]), b"\0")
    if not data.endswith(b"\0"):
        data = data + b"\0"
    arr = np.frombuffer(data, dtype=np.uint8)
    zeros = np.flatnonzero(arr == 0)
    starts = np.empty(len(zeros), dtype=np.int64)
    starts[0] = 0
    starts[1:] = zeros[:-1] + 1
    return StringSet(data, starts)


def from_strings(strings: Iterable[bytes]) -> StringSet:
    """Convenience constructor packing byte strings into a fresh buffer."""
    items = list(strings)
    for s in items:
        if 0 in s:
            raise ValueError("string contains the terminator byte")
    buf = b"\0".join(items) + b"\0" if items else b""
    offs = np.zeros(len(items), dtype=np.int64)
    pos = 0
    for i, s in enumerate(items):
        offs[i] = pos
        pos += len(s) + 1
    return StringSet(buf, offs)


def extract_keys(sset: StringSet, handles: np.ndarray, depth: int) -> np.ndarray:
    """Word keys (uint64) for the given handles at character depth `depth`.

    Reads up to WORD_CHARS characters starting at position depth of each
    string and zero-pads past its terminator, so the keys order exactly like
    the underlying terminator-padded substrings.
    """
    h = np.ascontiguousarray(handles, dtype=np.int64)
    n = len(h)
    if n == 0:
        return np.zeros(0, dtype=np.uint64)
    arr = sset.char_array()
    starts = h + depth
    remaining = sset.ends(h) - starts  # chars before the terminator
    idx = starts[:, None] + np.arange(WORD_CHARS, dtype=np.int64)
    valid = np.arange(WORD_CHARS, dtype=np.int64) < remaining[:, None]
    np.clip(idx, 0, len(arr) - 1, out=idx)
    chars = np.where(valid, arr[idx], 0).astype(np.uint64)
    return (chars << WORD_BYTES_SHIFTS).sum(axis=1, dtype=np.uint64)


def extract_key(sset: StringSet, handle: int, depth: int) -> int:
    """Word key of one string at `depth` (see extract_keys)."""
    return int(extract_keys(sset, np.asarray([handle], dtype=np.int64), depth)[0])


def word_bytes(key: int) -> bytes:
    return int(key).to_bytes(WORD_CHARS, "big")


def word_has_terminator(key: int) -> bool:
    """True when the packed word covers the end of its string."""
    return b"\0" in word_bytes(key)


def word_terminator_pos(key: int) -> int:
    """Character count before the first terminator byte (WORD_CHARS if none)."""
    b = word_bytes(key)
    i = b.find(b"\0")
    return WORD_CHARS if i < 0 else i


def shared_chars(a: int, b: int) -> int:
    """Number of leading characters two word keys share, capped at the terminator.

    For differing keys this is the plain count of equal leading bytes; for
    equal keys the count stops at the first terminator byte, matching the
    LCP of the underlying strings.
    """
    ba = word_bytes(a)
    bb = word_bytes(b)
    i = 0
    while i < WORD_CHARS and ba[i] == bb[i] and ba[i] != 0:
        i += 1
    return i


def lcp(sset: StringSet, ha: int, hb: int) -> int:
    """Longest common prefix length of the strings at two handles."""
    buf = sset.buffer
    i = 0
    while True:
        ca = buf[ha + i]
        if ca == 0 or ca != buf[hb + i]:
            return i
        i += 1


def lcp_array_oracle(sorted_set: StringSet) -> np.ndarray:
    """Reference LCP array computed character by character.

    Independent of any sorter's bookkeeping.  Raises ValueError naming the
    first out-of-order index when the input is not sorted.
    """
    n = len(sorted_set)
    out = np.full(max(n, 1), LCP_UNDEF, dtype=np.int64)[:n]
    if n == 0:
        return out
    out[0] = LCP_UNDEF
    buf = sorted_set.buffer
    handles = sorted_set.handles
    for i in range(1, n):
        a = int(handles[i - 1])
        b = int(handles[i])
        h = lcp(sorted_set, a, b)
        if buf[a + h] > buf[b + h]:
            raise ValueError(f"input not sorted: order violated at index {i}")
        out[i] = h
    return out


def lcp_sum(lcps: np.ndarray) -> int:
    """L: the sum of all defined LCP entries (index 0 excluded)."""
    if len(lcps) <= 1:
        return 0
    return int(lcps[1:].sum())


def verify(inp: StringSet, out: StringSet) -> VerifyReport:
    """Check that `out` is a permutation of `inp` in non-descending order."""
    if inp.buffer is not out.buffer and inp.buffer != out.buffer:
        return VerifyReport(False, False, False, None, "output uses a different buffer")
    if len(inp) != len(out):
        return VerifyReport(
            False, False, False, None,
            f"size mismatch: {len(inp)} in, {len(out)} out",
        )
    perm_ok = bool(
        np.array_equal(np.sort(inp.handles), np.sort(out.handles))
    )
    order_ok = True
    first = None
    buf = out.buffer
    handles = out.handles
    for i in range(1, len(out)):
        a = int(handles[i - 1])
        b = int(handles[i])
        h = lcp(out, a, b)
        if buf[a + h] > buf[b + h]:
            order_ok = False
            first = i
            break
    if perm_ok and order_ok:
        return VerifyReport(True, True, True, None, "ok")
    msg = []
    if not perm_ok:
        msg.append("handle multiset not preserved")
    if not order_ok:
        msg.append(f"order violated at index {first}")
    return VerifyReport(False, perm_ok, order_ok, first, "; ".join(msg))


def sorted_copy(sset: StringSet) -> StringSet:
    """Reference sort by full string content (timsort on raw bytes)."""
    order = sorted(range(len(sset)), key=sset.string_at)
    return sset.with_handles(sset.handles[order])


def dist_stats(sset: StringSet) -> DistStats:
    """Distinguishing-prefix statistics of a set.

    D charges each string the characters a comparison-based sorter must
    inspect: one past the longer of its two neighbor LCPs in sorted order,
    capped at the string length plus its terminator.  Neighbor LCPs outside
    the range count as 0.  D >= L always holds.
    """
    n = len(sset)
    if n == 0:
        return DistStats(0, 0, 0.0)
    srt = sorted_copy(sset)
    lcps = lcp_array_oracle(srt)
    h = np.zeros(n + 1, dtype=np.int64)
    if n > 1:
        h[1:n] = lcps[1:]
    neighbor = np.maximum(h[:n], h[1 : n + 1])
    lens = srt.ends() - srt.handles
    d = int(np.minimum(lens + 1, neighbor + 1).sum())
    return DistStats(d, lcp_sum(lcps), float(lens.mean()))
