# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""C twin of _pykernels: same signatures, 64-bit keys only.

The dispatcher in kernels.py routes a call here only when n <= 64 and the
key space fits in a signed 64-bit int; everything else stays on the pure
path.  Outputs are plain Python lists so callers never see the difference.
"""

from libc.stdint cimport int64_t, uint64_t
from libc.stdlib cimport free, malloc

cdef extern from *:
    int __builtin_popcountll(unsigned long long) nogil
    int __builtin_ctzll(unsigned long long) nogil


cdef uint64_t* _masks_to_c(masks, Py_ssize_t* count) except NULL:
    cdef Py_ssize_t n = len(masks), i
    cdef uint64_t* buf = <uint64_t*> malloc(n * sizeof(uint64_t) if n else sizeof(uint64_t))
    if buf == NULL:
        raise MemoryError()
    for i in range(n):
        buf[i] = <uint64_t> masks[i]
    count[0] = n
    return buf


def gf2_keys(row_masks, n, masks):
    cdef Py_ssize_t nm = 0, d = len(row_masks), i, j
    cdef uint64_t* cm = _masks_to_c(masks, &nm)
    cdef uint64_t* rm = <uint64_t*> malloc((d or 1) * sizeof(uint64_t))
    if rm == NULL:
        free(cm)
        raise MemoryError()
    for i in range(d):
        rm[i] = <uint64_t> row_masks[i]
    cdef list out = [0] * nm
    cdef int64_t key
    cdef uint64_t m
    try:
        for i in range(nm):
            m = cm[i]
            key = 0
            for j in range(d):
                key |= (<int64_t> (__builtin_popcountll(rm[j] & m) & 1)) << j
            out[i] = key
    finally:
        free(cm)
        free(rm)
    return out


cdef int64_t* _rows_to_c(rows, Py_ssize_t d, Py_ssize_t n) except NULL:
    cdef int64_t* buf = <int64_t*> malloc((d * n or 1) * sizeof(int64_t))
    if buf == NULL:
        raise MemoryError()
    cdef Py_ssize_t i, j
    for i in range(d):
        row = rows[i]
        for j in range(n):
            buf[i * n + j] = <int64_t> row[j]
    return buf


def mod_keys(rows, n, q, masks):
    cdef Py_ssize_t nm = 0, d = len(rows), i, j
    cdef Py_ssize_t nn = n
    cdef int64_t qq = q
    cdef uint64_t* cm = _masks_to_c(masks, &nm)
    cdef int64_t* cr = NULL
    cdef int64_t* muls = NULL
    cdef int64_t* vals = NULL
    cdef list out = [0] * nm
    cdef uint64_t m
    cdef int64_t key
    cdef int b
    try:
        cr = _rows_to_c(rows, d, nn)
        muls = <int64_t*> malloc((d or 1) * sizeof(int64_t))
        vals = <int64_t*> malloc((d or 1) * sizeof(int64_t))
        if muls == NULL or vals == NULL:
            raise MemoryError()
        for i in range(d):
            muls[i] = 1 if i == 0 else muls[i - 1] * qq
        for i in range(nm):
            m = cm[i]
            for j in range(d):
                vals[j] = 0
            while m:
                b = __builtin_ctzll(m)
                m &= m - 1
                for j in range(d):
                    vals[j] += cr[j * nn + b]
            key = 0
            for j in range(d):
                key += (vals[j] % qq) * muls[j]
            out[i] = key
    finally:
        free(cm)
        if cr != NULL:
            free(cr)
        if muls != NULL:
            free(muls)
        if vals != NULL:
            free(vals)
    return out


def int_keys(rows, n, los, radices, masks):
    cdef Py_ssize_t nm = 0, d = len(rows), i, j
    cdef Py_ssize_t nn = n
    cdef uint64_t* cm = _masks_to_c(masks, &nm)
    cdef int64_t* cr = NULL
    cdef int64_t* muls = NULL
    cdef int64_t* clos = NULL
    cdef int64_t* vals = NULL
    cdef list out = [0] * nm
    cdef uint64_t m
    cdef int64_t key
    cdef int b
    try:
        cr = _rows_to_c(rows, d, nn)
        muls = <int64_t*> malloc((d or 1) * sizeof(int64_t))
        clos = <int64_t*> malloc((d or 1) * sizeof(int64_t))
        vals = <int64_t*> malloc((d or 1) * sizeof(int64_t))
        if muls == NULL or clos == NULL or vals == NULL:
            raise MemoryError()
        for i in range(d):
            clos[i] = <int64_t> los[i]
            muls[i] = 1 if i == 0 else muls[i - 1] * (<int64_t> radices[i - 1])
        for i in range(nm):
            m = cm[i]
            for j in range(d):
                vals[j] = 0
            while m:
                b = __builtin_ctzll(m)
                m &= m - 1
                for j in range(d):
                    vals[j] += cr[j * nn + b]
            key = 0
            for j in range(d):
                key += (vals[j] - clos[j]) * muls[j]
            out[i] = key
    finally:
        free(cm)
        if cr != NULL:
            free(cr)
        if muls != NULL:
            free(muls)
        if clos != NULL:
            free(clos)
        if vals != NULL:
            free(vals)
    return out


def leaf_check(keys, masks, child_keys, child_outputs, require_member):
    cdef Py_ssize_t nk = len(keys), nc = len(child_keys), i
    cdef int64_t* ck = <int64_t*> malloc((nc or 1) * sizeof(int64_t))
    cdef int64_t* co = <int64_t*> malloc((nc or 1) * sizeof(int64_t))
    cdef int64_t* kk = NULL
    cdef uint64_t* cm = NULL
    cdef Py_ssize_t nm = 0
    cdef bint member = bool(require_member)
    cdef int64_t key
    cdef Py_ssize_t lo, hi, mid
    cdef Py_ssize_t bad = -1
    if ck == NULL or co == NULL:
        if ck != NULL:
            free(ck)
        if co != NULL:
            free(co)
        raise MemoryError()
    try:
        for i in range(nc):
            ck[i] = <int64_t> child_keys[i]
            co[i] = <int64_t> child_outputs[i]
        kk = <int64_t*> malloc((nk or 1) * sizeof(int64_t))
        if kk == NULL:
            raise MemoryError()
        for i in range(nk):
            kk[i] = <int64_t> keys[i]
        cm = _masks_to_c(masks, &nm)
        for i in range(nk):
            key = kk[i]
            lo = 0
            hi = nc
            while lo < hi:
                mid = (lo + hi) >> 1
                if ck[mid] < key:
                    lo = mid + 1
                else:
                    hi = mid
            if lo >= nc or ck[lo] != key:
                bad = i
                break
            if member and not (cm[i] >> (co[lo] - 1)) & 1:
                bad = i
                break
    finally:
        free(ck)
        free(co)
        if kk != NULL:
            free(kk)
        if cm != NULL:
            free(cm)
    return bad


def group_by_key(keys, masks):
    groups = {}
    cdef Py_ssize_t i, nm = len(keys)
    for i in range(nm):
        key = keys[i]
        g = groups.get(key)
        if g is None:
            groups[key] = [masks[i]]
        else:
            g.append(masks[i])
    return groups
