"""Measurement-key kernels: compiled core with pure-Python fallback.

A *key* is a single integer encoding the full measurement vector of a
query matrix on a packed 0/1 input, in a mixed-radix scheme determined by
the matrix alone:

  gf2   digit i = parity of row i,            radix 2
  modq  digit i = canonical residue of row i, radix q
  int   digit i = (row_i . z) - lo_i,         radix hi_i - lo_i + 1

where lo_i / hi_i are the min/max of row_i . z over z in {0,1}^n.  Edge
labels and batch measurements encoded with the same scheme compare equal
iff the measurement vectors are equal, which is what tree walking needs.

The compiled twin (lqplab._speedups) is used when available and the call
fits in 64-bit arithmetic; otherwise the pure twin handles it with Python
ints.  set_implementation() forces one side, for tests and benchmarks.
"""

from __future__ import annotations

from dataclasses import dataclass

from . import _pykernels
from .rings import GF2, INT, MODQ, QueryMatrix

try:
    from . import _speedups  # type: ignore[attr-defined]

    HAVE_SPEEDUPS = True
except ImportError:  # pragma: no cover - depends on build
    _speedups = None
    HAVE_SPEEDUPS = False

_FORCED: str | None = None  # None = auto, else "pure" | "fast"
_KEY_LIMIT = 2**62


def set_implementation(which: str | None) -> None:
    """Force 'pure' or 'fast' kernels, or None to restore auto-dispatch."""
    global _FORCED
    if which not in (None, "pure", "fast"):
        raise ValueError(f"unknown implementation {which!r}")
    if which == "fast" and not HAVE_SPEEDUPS:
        raise RuntimeError("compiled kernels are not available")
    _FORCED = which


def implementation_name() -> str:
    if _FORCED is not None:
        return _FORCED
    return "fast" if HAVE_SPEEDUPS else "pure"


@dataclass(frozen=True)
class MatrixMeta:
    """Kernel-ready view of a query matrix plus its key encoding."""

    kind: str
    n: int
    d: int
    rows: tuple[tuple[int, ...], ...]
    row_masks: tuple[int, ...]  # gf2 only
    q: int  # modq only
    los: tuple[int, ...]
    radices: tuple[int, ...]
    muls: tuple[int, ...]
    key_bound: int  # number of encodable keys

    def fits_fast(self) -> bool:
        return self.n <= 64 and self.key_bound <= _KEY_LIMIT

    def encode_values(self, values: tuple[int, ...]) -> int | None:
        """Key of a measurement tuple; None when a digit is out of range
        (such a measurement can never be produced by this matrix)."""
        if len(values) != self.d:
            return None
        key = 0
        for i, v in enumerate(values):
            digit = v - self.los[i]
            if not 0 <= digit < self.radices[i]:
                return None
            key += digit * self.muls[i]
        return key

    def decode_key(self, key: int) -> tuple[int, ...]:
        values = []
        for i in range(self.d):
            digit = key % self.radices[i]
            key //= self.radices[i]
            values.append(digit + self.los[i])
        return tuple(values)


def matrix_meta(A: QueryMatrix) -> MatrixMeta:
    kind = A.ring.kind
    d, n = A.d, A.n
    if kind == GF2:
        los = (0,) * d
        radices = (2,) * d
        row_masks = []
        for row in A.rows:
            m = 0
            for j, a in enumerate(row):
                if a:
                    m |= 1 << j
            row_masks.append(m)
        row_masks = tuple(row_masks)
        q = 0
    elif kind == MODQ:
        q = A.ring.q
        los = (0,) * d
        radices = (q,) * d
        row_masks = ()
    else:
        q = 0
        row_masks = ()
        los = tuple(sum(a for a in row if a < 0) for row in A.rows)
        his = tuple(sum(a for a in row if a > 0) for row in A.rows)
        radices = tuple(h - l + 1 for l, h in zip(los, his))
    muls = [1] * d
    for i in range(1, d):
        muls[i] = muls[i - 1] * radices[i - 1]
    key_bound = muls[-1] * radices[-1] if d else 1
    return MatrixMeta(
        kind=kind,
        n=n,
        d=d,
        rows=A.rows,
        row_masks=row_masks,
        q=q,
        los=los,
        radices=radices,
        muls=tuple(muls),
        key_bound=key_bound,
    )


def _impl_for(meta: MatrixMeta):
    if _FORCED == "pure":
        return _pykernels
    if _FORCED == "fast":
        if not meta.fits_fast():
            return _pykernels  # fast twin cannot represent these keys
        return _speedups
    if HAVE_SPEEDUPS and meta.fits_fast():
        return _speedups
    return _pykernels


def measurement_keys(meta: MatrixMeta, masks) -> list[int]:
    """Keys of A applied to each packed input in masks."""
    impl = _impl_for(meta)
    if meta.kind == GF2:
        return impl.gf2_keys(meta.row_masks, meta.n, masks)
    if meta.kind == MODQ:
        return impl.mod_keys(meta.rows, meta.n, meta.q, masks)
    return impl.int_keys(meta.rows, meta.n, meta.los, meta.radices, masks)


def leaf_check(meta: MatrixMeta, keys, masks, child_keys, child_outputs, require_member: bool) -> int:
    impl = _impl_for(meta)
    return impl.leaf_check(keys, masks, child_keys, child_outputs, require_member)


def group_by_key(meta: MatrixMeta, keys, masks) -> dict[int, list[int]]:
    impl = _impl_for(meta)
    return impl.group_by_key(keys, masks)
