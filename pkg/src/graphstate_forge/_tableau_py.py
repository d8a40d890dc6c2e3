"""Numpy tableau kernels (fallback backend).

Rows are bit-packed into uint64 words: ``xs[row, q >> 6]`` holds the X bit
of qubit ``q`` at position ``q & 63``. Rows ``0..n-1`` are destabilizers and
rows ``n..2n-1`` stabilizers. Every function mutates its arguments in place
and mirrors the signature of the compiled backend exactly.
"""

import numpy as np

BACKEND = "numpy"

_ONE = np.uint64(1)


def _col(words, q):
    """Return the bit of qubit ``q`` for every row as a uint8 array."""
    return ((words[:, q >> 6] >> np.uint64(q & 63)) & _ONE).astype(np.uint8)


def _set_col_xor(words, q, bits):
    words[:, q >> 6] ^= bits.astype(np.uint64) << np.uint64(q & 63)


def gate_h(xs, zs, r, q):
    x = _col(xs, q)
    z = _col(zs, q)
    r ^= x & z
    _set_col_xor(xs, q, x ^ z)
    _set_col_xor(zs, q, x ^ z)


def gate_s(xs, zs, r, q):
    x = _col(xs, q)
    z = _col(zs, q)
    r ^= x & z
    _set_col_xor(zs, q, x)


def gate_sdg(xs, zs, r, q):
    x = _col(xs, q)
    z = _col(zs, q)
    r ^= x & (z ^ 1)
    _set_col_xor(zs, q, x)


def gate_x(xs, zs, r, q):
    r ^= _col(zs, q)


def gate_y(xs, zs, r, q):
    r ^= _col(xs, q) ^ _col(zs, q)


def gate_z(xs, zs, r, q):
    r ^= _col(xs, q)


def gate_sqrtx_pos(xs, zs, r, q):
    # Z -> -Y, Y -> Z
    x = _col(xs, q)
    z = _col(zs, q)
    r ^= z & (x ^ 1)
    _set_col_xor(xs, q, z)


def gate_sqrtx_neg(xs, zs, r, q):
    # Z -> Y, Y -> -Z
    x = _col(xs, q)
    z = _col(zs, q)
    r ^= x & z
    _set_col_xor(xs, q, z)


def gate_cz(xs, zs, r, a, b):
    xa, za = _col(xs, a), _col(zs, a)
    xb, zb = _col(xs, b), _col(zs, b)
    r ^= xa & xb & (za ^ zb)
    _set_col_xor(zs, a, xb)
    _set_col_xor(zs, b, xa)


def gate_cx(xs, zs, r, a, b):
    xa, za = _col(xs, a), _col(zs, a)
    xb, zb = _col(xs, b), _col(zs, b)
    r ^= xa & zb & (xb ^ za ^ 1)
    _set_col_xor(xs, b, xa)
    _set_col_xor(zs, a, zb)


def _popcount_rows(words):
    return np.bitwise_count(words).sum(axis=-1, dtype=np.int64)


def product_phase(x1, z1, x2, z2):
    """Exponent of ``i`` (mod 4) picked up by the bitwise product P1 * P2.

    Inputs are word arrays with matching trailing axis; the result has the
    leading shape of the broadcast.
    """
    nx1, nz1, nx2, nz2 = ~x1, ~z1, ~x2, ~z2
    plus = (x1 & z1 & nx2 & z2) | (x1 & nz1 & x2 & z2) | (nx1 & z1 & x2 & nz2)
    minus = (x1 & z1 & x2 & nz2) | (x1 & nz1 & nx2 & z2) | (nx1 & z1 & x2 & z2)
    return (_popcount_rows(plus) - _popcount_rows(minus)) % 4


def _anticommute_rows(xs, zs, px, pz):
    return (_popcount_rows((xs & pz) ^ (zs & px)) & 1).astype(bool)


def rowmul(xs, zs, r, h, i):
    """Replace row ``h`` by the product row_i * row_h (rows must commute)."""
    ph = int(product_phase(xs[i], zs[i], xs[h], zs[h]))
    r[h] = ((2 * int(r[h]) + 2 * int(r[i]) + ph) % 4) >> 1
    xs[h] ^= xs[i]
    zs[h] ^= zs[i]


def _rowmul_many(xs, zs, r, targets, i):
    if len(targets) == 0:
        return
    ph = product_phase(xs[i][None, :], zs[i][None, :], xs[targets], zs[targets])
    tot = (2 * r[targets].astype(np.int64) + 2 * int(r[i]) + ph) % 4
    r[targets] = (tot >> 1).astype(np.uint8)
    xs[targets] ^= xs[i]
    zs[targets] ^= zs[i]


def anticommuting_stabilizer(xs, zs, n, px, pz):
    """Index of the first stabilizer row anticommuting with P, else -1."""
    anti = _anticommute_rows(xs[n:], zs[n:], px, pz)
    hits = np.flatnonzero(anti)
    return int(hits[0]) + n if hits.size else -1


def collapse(xs, zs, r, n, p, px, pz, sign):
    """Random-outcome update: row ``p`` becomes (-1)^sign P."""
    anti = _anticommute_rows(xs, zs, px, pz)
    anti[p] = False
    anti[p - n] = False
    _rowmul_many(xs, zs, r, np.flatnonzero(anti), p)
    xs[p - n] = xs[p]
    zs[p - n] = zs[p]
    r[p - n] = r[p]
    xs[p] = px
    zs[p] = pz
    r[p] = sign


def deterministic_sign(xs, zs, r, n, px, pz):
    """Sign bit of the stabilizer-group element with the bits of P."""
    anti = _anticommute_rows(xs[:n], zs[:n], px, pz)
    sx = np.zeros_like(px)
    sz = np.zeros_like(pz)
    phase = 0
    for i in np.flatnonzero(anti):
        row = n + int(i)
        phase = (phase + 2 * int(r[row]) + int(product_phase(xs[row], zs[row], sx, sz))) % 4
        sx ^= xs[row]
        sz ^= zs[row]
    return phase >> 1


def canonicalize(xs, zs, r, n):
    """Reduce the stabilizer rows in place to reduced row echelon form.

    Pivot columns run over X bits of qubits 0..n-1, then Z bits. Row
    products keep signs consistent, so equal groups give equal arrays.
    """
    top = n
    for use_z in (False, True):
        words = zs if use_z else xs
        for q in range(n):
            bits = _col(words[n:], q)
            cand = np.flatnonzero(bits[top - n:]) + top
            if cand.size == 0:
                continue
            piv = int(cand[0])
            if piv != top:
                for arr in (xs, zs, r):
                    tmp = arr[piv].copy()
                    arr[piv] = arr[top]
                    arr[top] = tmp
            bits = _col(words[n:], q)
            others = np.flatnonzero(bits) + n
            others = others[others != top]
            _rowmul_many(xs, zs, r, others, top)
            top += 1
            if top == 2 * n:
                return
