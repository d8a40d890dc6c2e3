# cython: language_level=3
"""Compiled tableau kernels.

Same layout and signatures as ``_tableau_py``; loops run over packed words
in C instead of numpy temporaries.
"""

from libc.stdint cimport uint64_t, uint8_t, int64_t
from libc.stdlib cimport calloc, free

BACKEND = "cython"

cdef extern from *:
    int __builtin_popcountll(unsigned long long) nogil


cdef inline int _bit(uint64_t[:, ::1] w, Py_ssize_t row, int q) noexcept nogil:
    return <int>((w[row, q >> 6] >> (q & 63)) & 1)


cdef inline void _flip(uint64_t[:, ::1] w, Py_ssize_t row, int q) noexcept nogil:
    w[row, q >> 6] ^= (<uint64_t>1) << (q & 63)


def gate_h(uint64_t[:, ::1] xs, uint64_t[:, ::1] zs, uint8_t[::1] r, int q):
    cdef Py_ssize_t i, wi = q >> 6
    cdef uint64_t m = (<uint64_t>1) << (q & 63)
    cdef uint64_t x, z
    with nogil:
        for i in range(xs.shape[0]):
            x = xs[i, wi] & m
            z = zs[i, wi] & m
            if x and z:
                r[i] ^= 1
            xs[i, wi] ^= x ^ z
            zs[i, wi] ^= x ^ z


def gate_s(uint64_t[:, ::1] xs, uint64_t[:, ::1] zs, uint8_t[::1] r, int q):
    cdef Py_ssize_t i
    cdef int x, z
    with nogil:
        for i in range(xs.shape[0]):
            x = _bit(xs, i, q)
            z = _bit(zs, i, q)
            r[i] ^= x & z
            if x:
                _flip(zs, i, q)


def gate_sdg(uint64_t[:, ::1] xs, uint64_t[:, ::1] zs, uint8_t[::1] r, int q):
    cdef Py_ssize_t i
    cdef int x, z
    with nogil:
        for i in range(xs.shape[0]):
            x = _bit(xs, i, q)
            z = _bit(zs, i, q)
            r[i] ^= x & (z ^ 1)
            if x:
                _flip(zs, i, q)


def gate_x(uint64_t[:, ::1] xs, uint64_t[:, ::1] zs, uint8_t[::1] r, int q):
    cdef Py_ssize_t i
    with nogil:
        for i in range(xs.shape[0]):
            r[i] ^= _bit(zs, i, q)


def gate_y(uint64_t[:, ::1] xs, uint64_t[:, ::1] zs, uint8_t[::1] r, int q):
    cdef Py_ssize_t i
    with nogil:
        for i in range(xs.shape[0]):
            r[i] ^= _bit(xs, i, q) ^ _bit(zs, i, q)


def gate_z(uint64_t[:, ::1] xs, uint64_t[:, ::1] zs, uint8_t[::1] r, int q):
    cdef Py_ssize_t i
    with nogil:
        for i in range(xs.shape[0]):
            r[i] ^= _bit(xs, i, q)


def gate_sqrtx_pos(uint64_t[:, ::1] xs, uint64_t[:, ::1] zs, uint8_t[::1] r, int q):
    cdef Py_ssize_t i
    cdef int x, z
    with nogil:
        for i in range(xs.shape[0]):
            x = _bit(xs, i, q)
            z = _bit(zs, i, q)
            r[i] ^= z & (x ^ 1)
            if z:
                _flip(xs, i, q)


def gate_sqrtx_neg(uint64_t[:, ::1] xs, uint64_t[:, ::1] zs, uint8_t[::1] r, int q):
    cdef Py_ssize_t i
    cdef int x, z
    with nogil:
        for i in range(xs.shape[0]):
            x = _bit(xs, i, q)
            z = _bit(zs, i, q)
            r[i] ^= x & z
            if z:
                _flip(xs, i, q)


def gate_cz(uint64_t[:, ::1] xs, uint64_t[:, ::1] zs, uint8_t[::1] r, int a, int b):
    cdef Py_ssize_t i
    cdef int xa, za, xb, zb
    with nogil:
        for i in range(xs.shape[0]):
            xa = _bit(xs, i, a)
            za = _bit(zs, i, a)
            xb = _bit(xs, i, b)
            zb = _bit(zs, i, b)
            r[i] ^= xa & xb & (za ^ zb)
            if xb:
                _flip(zs, i, a)
            if xa:
                _flip(zs, i, b)


def gate_cx(uint64_t[:, ::1] xs, uint64_t[:, ::1] zs, uint8_t[::1] r, int a, int b):
    cdef Py_ssize_t i
    cdef int xa, za, xb, zb
    with nogil:
        for i in range(xs.shape[0]):
            xa = _bit(xs, i, a)
            za = _bit(zs, i, a)
            xb = _bit(xs, i, b)
            zb = _bit(zs, i, b)
            r[i] ^= xa & zb & (xb ^ za ^ 1)
            if xa:
                _flip(xs, i, b)
            if zb:
                _flip(zs, i, a)


cdef inline int _phase(const uint64_t* x1, const uint64_t* z1,
                       const uint64_t* x2, const uint64_t* z2,
                       Py_ssize_t nw) noexcept nogil:
    cdef Py_ssize_t k
    cdef uint64_t a, b, c, d, plus, minus
    cdef int64_t tot = 0
    for k in range(nw):
        a = x1[k]
        b = z1[k]
        c = x2[k]
        d = z2[k]
        plus = (a & b & ~c & d) | (a & ~b & c & d) | (~a & b & c & ~d)
        minus = (a & b & c & ~d) | (a & ~b & ~c & d) | (~a & b & c & d)
        tot += __builtin_popcountll(plus) - __builtin_popcountll(minus)
    return <int>(((tot % 4) + 4) % 4)


cdef inline void _rowmul(uint64_t[:, ::1] xs, uint64_t[:, ::1] zs, uint8_t[::1] r,
                         Py_ssize_t h, Py_ssize_t i) noexcept nogil:
    cdef Py_ssize_t k, nw = xs.shape[1]
    cdef int ph = _phase(&xs[i, 0], &zs[i, 0], &xs[h, 0], &zs[h, 0], nw)
    r[h] = <uint8_t>(((2 * r[h] + 2 * r[i] + ph) % 4) >> 1)
    for k in range(nw):
        xs[h, k] ^= xs[i, k]
        zs[h, k] ^= zs[i, k]


cdef inline int _anti(uint64_t[:, ::1] xs, uint64_t[:, ::1] zs, Py_ssize_t row,
                      const uint64_t[::1] px, const uint64_t[::1] pz) noexcept nogil:
    cdef Py_ssize_t k
    cdef int c = 0
    for k in range(xs.shape[1]):
        c += __builtin_popcountll((xs[row, k] & pz[k]) ^ (zs[row, k] & px[k]))
    return c & 1


def product_phase(x1, z1, x2, z2):
    """Exponent of i (mod 4) for the product of two single packed rows."""
    cdef const uint64_t[::1] a = x1
    cdef const uint64_t[::1] b = z1
    cdef const uint64_t[::1] c = x2
    cdef const uint64_t[::1] d = z2
    return _phase(&a[0], &b[0], &c[0], &d[0], a.shape[0])


def rowmul(uint64_t[:, ::1] xs, uint64_t[:, ::1] zs, uint8_t[::1] r, Py_ssize_t h, Py_ssize_t i):
    _rowmul(xs, zs, r, h, i)


def anticommuting_stabilizer(uint64_t[:, ::1] xs, uint64_t[:, ::1] zs, Py_ssize_t n,
                             const uint64_t[::1] px, const uint64_t[::1] pz):
    cdef Py_ssize_t i
    for i in range(n, 2 * n):
        if _anti(xs, zs, i, px, pz):
            return i
    return -1


def collapse(uint64_t[:, ::1] xs, uint64_t[:, ::1] zs, uint8_t[::1] r, Py_ssize_t n,
             Py_ssize_t p, const uint64_t[::1] px, const uint64_t[::1] pz, int sign):
    cdef Py_ssize_t i, k
    with nogil:
        for i in range(2 * n):
            if i == p or i == p - n:
                continue
            if _anti(xs, zs, i, px, pz):
                _rowmul(xs, zs, r, i, p)
        for k in range(xs.shape[1]):
            xs[p - n, k] = xs[p, k]
            zs[p - n, k] = zs[p, k]
            xs[p, k] = px[k]
            zs[p, k] = pz[k]
        r[p - n] = r[p]
        r[p] = <uint8_t>sign


def deterministic_sign(uint64_t[:, ::1] xs, uint64_t[:, ::1] zs, uint8_t[::1] r, Py_ssize_t n,
                       const uint64_t[::1] px, const uint64_t[::1] pz):
    cdef Py_ssize_t i, k, row, nw = xs.shape[1]
    cdef int phase = 0
    cdef uint64_t* sx = <uint64_t*>calloc(nw, sizeof(uint64_t))
    cdef uint64_t* sz = <uint64_t*>calloc(nw, sizeof(uint64_t))
    if sx == NULL or sz == NULL:
        free(sx)
        free(sz)
        raise MemoryError()
    for i in range(n):
        if _anti(xs, zs, i, px, pz):
            row = n + i
            phase = (phase + 2 * r[row] + _phase(&xs[row, 0], &zs[row, 0], sx, sz, nw)) % 4
            for k in range(nw):
                sx[k] ^= xs[row, k]
                sz[k] ^= zs[row, k]
    free(sx)
    free(sz)
    return phase >> 1


cdef void _swap_rows(uint64_t[:, ::1] xs, uint64_t[:, ::1] zs, uint8_t[::1] r,
                     Py_ssize_t a, Py_ssize_t b) noexcept nogil:
    cdef Py_ssize_t k
    cdef uint64_t t
    cdef uint8_t s
    for k in range(xs.shape[1]):
        t = xs[a, k]
        xs[a, k] = xs[b, k]
        xs[b, k] = t
        t = zs[a, k]
        zs[a, k] = zs[b, k]
        zs[b, k] = t
    s = r[a]
    r[a] = r[b]
    r[b] = s


def canonicalize(uint64_t[:, ::1] xs, uint64_t[:, ::1] zs, uint8_t[::1] r, Py_ssize_t n):
    cdef Py_ssize_t top = n, row, piv
    cdef int q, pass_z
    cdef uint64_t[:, ::1] words
    for pass_z in range(2):
        words = zs if pass_z else xs
        for q in range(n):
            piv = -1
            for row in range(top, 2 * n):
                if _bit(words, row, q):
                    piv = row
                    break
            if piv < 0:
                continue
            if piv != top:
                _swap_rows(xs, zs, r, piv, top)
            for row in range(n, 2 * n):
                if row != top and _bit(words, row, q):
                    _rowmul(xs, zs, r, row, top)
            top += 1
            if top == 2 * n:
                return
