"""Pure-Python measurement kernels (fallback for the C extension).

The hot loop of validation, exact costing, and the brute-force oracle is
"evaluate a query matrix on a batch of packed 0/1 inputs and encode each
measurement as one integer key".  These implementations use half-mask
lookup tables so the per-input work is O(d) instead of O(d * popcount).
Keys are Python ints, so arbitrarily wide key spaces are supported here
(the C twin is limited to 64-bit keys and the dispatcher knows that).
"""

from __future__ import annotations

from bisect import bisect_left
from typing import Sequence


def _half_split(n: int) -> tuple[int, int]:
    lo_bits = max(1, n // 2)
    return lo_bits, (1 << lo_bits) - 1


def gf2_keys(row_masks: Sequence[int], n: int, masks: Sequence[int]) -> list[int]:
    """Key = parity bits of each row packed little-endian (row 0 = bit 0)."""
    if len(masks) < 64 or n < 4 or n > 26:
        out = []
        for m in masks:
            key = 0
            for i, rm in enumerate(row_masks):
                key |= ((rm & m).bit_count() & 1) << i
            out.append(key)
        return out
    lo_bits, lo_mask = _half_split(n)

    def build(width: int, shift: int) -> list[int]:
        col = [0] * width
        for j in range(width):
            for i, rm in enumerate(row_masks):
                if (rm >> (shift + j)) & 1:
                    col[j] |= 1 << i
        table = [0] * (1 << width)
        for x in range(1, 1 << width):
            j = (x & -x).bit_length() - 1
            table[x] = table[x & (x - 1)] ^ col[j]
        return table

    tlo = build(lo_bits, 0)
    thi = build(n - lo_bits, lo_bits)
    return [tlo[m & lo_mask] ^ thi[m >> lo_bits] for m in masks]


def _value_tables(
    rows: Sequence[Sequence[int]], n: int, masks_len: int
) -> tuple[int, int, list[tuple[int, ...]], list[tuple[int, ...]]] | None:
    """Per-half partial row sums; None if a direct loop is cheaper (few
    inputs) or the tables would not fit (wide inputs)."""
    if masks_len < 256 or n < 4 or n > 26:
        return None
    lo_bits, lo_mask = _half_split(n)
    d = len(rows)

    def build(width: int, shift: int) -> list[tuple[int, ...]]:
        table: list[tuple[int, ...]] = [()] * (1 << width)
        table[0] = (0,) * d
        for x in range(1, 1 << width):
            j = (x & -x).bit_length() - 1
            prev = table[x & (x - 1)]
            table[x] = tuple(prev[i] + rows[i][shift + j] for i in range(d))
        return table

    return lo_bits, lo_mask, build(lo_bits, 0), build(n - lo_bits, lo_bits)


def mod_keys(
    rows: Sequence[Sequence[int]], n: int, q: int, masks: Sequence[int]
) -> list[int]:
    """Key = sum over rows of (row . z mod q) * q**row_index."""
    d = len(rows)
    muls = [q**i for i in range(d)]
    tables = _value_tables(rows, n, len(masks))
    out = []
    if tables is None:
        for m in masks:
            key = 0
            for i in range(d):
                row = rows[i]
                acc = 0
                mm = m
                while mm:
                    j = (mm & -mm).bit_length() - 1
                    mm &= mm - 1
                    acc += row[j]
                key += (acc % q) * muls[i]
            out.append(key)
        return out
    lo_bits, lo_mask, tlo, thi = tables
    for m in masks:
        a = tlo[m & lo_mask]
        b = thi[m >> lo_bits]
        key = 0
        for i in range(d):
            key += ((a[i] + b[i]) % q) * muls[i]
        out.append(key)
    return out


def int_keys(
    rows: Sequence[Sequence[int]],
    n: int,
    los: Sequence[int],
    radices: Sequence[int],
    masks: Sequence[int],
) -> list[int]:
    """Mixed-radix key: digit i = (row_i . z) - los[i], radix radices[i]."""
    d = len(rows)
    muls = [1] * d
    for i in range(1, d):
        muls[i] = muls[i - 1] * radices[i - 1]
    tables = _value_tables(rows, n, len(masks))
    out = []
    if tables is None:
        for m in masks:
            key = 0
            for i in range(d):
                row = rows[i]
                acc = 0
                mm = m
                while mm:
                    j = (mm & -mm).bit_length() - 1
                    mm &= mm - 1
                    acc += row[j]
                key += (acc - los[i]) * muls[i]
            out.append(key)
        return out
    lo_bits, lo_mask, tlo, thi = tables
    for m in masks:
        a = tlo[m & lo_mask]
        b = thi[m >> lo_bits]
        key = 0
        for i in range(d):
            key += (a[i] + b[i] - los[i]) * muls[i]
        out.append(key)
    return out


def leaf_check(
    keys: Sequence[int],
    masks: Sequence[int],
    child_keys: Sequence[int],
    child_outputs: Sequence[int],
    require_member: bool,
) -> int:
    """All children of a node are leaves: find the first failing input.

    child_keys must be sorted ascending, child_outputs aligned with it.
    Failure = key has no edge, or (require_member) the leaf's output index
    is not in the input's support.  Returns the position of the first
    failing input, or -1.
    """
    nkeys = len(child_keys)
    for pos, key in enumerate(keys):
        idx = bisect_left(child_keys, key)
        if idx >= nkeys or child_keys[idx] != key:
            return pos
        if require_member and not (masks[pos] >> (child_outputs[idx] - 1)) & 1:
            return pos
    return -1


def group_by_key(keys: Sequence[int], masks: Sequence[int]) -> dict[int, list[int]]:
    groups: dict[int, list[int]] = {}
    for key, m in zip(keys, masks):
        g = groups.get(key)
        if g is None:
            groups[key] = [m]
        else:
            g.append(m)
    return groups
