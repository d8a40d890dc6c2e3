"""Hermitian Pauli operators in binary symplectic form."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

_LETTERS = {(0, 0): "I", (1, 0): "X", (1, 1): "Y", (0, 1): "Z"}
_BITS = {"I": (0, 0), "_": (0, 0), "X": (1, 0), "Y": (1, 1), "Z": (0, 1)}


@dataclass(frozen=True, eq=False)
class PauliTerm:
    """``sign * prod_q X_q^{x_q} Z_q^{z_q}`` with Y stored as x=z=1.

    The Y convention absorbs the factor of ``i`` so every stored term is
    Hermitian and ``sign`` is +1 or -1.

    Parameters
    ----------
    x_bits, z_bits : array_like of bool
        Length-n symplectic bit vectors.
    sign : int
        +1 or -1.
    """

    x_bits: np.ndarray
    z_bits: np.ndarray
    sign: int = 1
    _key: tuple = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        x = np.asarray(self.x_bits, dtype=bool).copy()
        z = np.asarray(self.z_bits, dtype=bool).copy()
        if x.shape != z.shape or x.ndim != 1:
            raise ValueError("x_bits and z_bits must be 1-d and equal length")
        if self.sign not in (1, -1):
            raise ValueError(f"sign must be +1 or -1, got {self.sign!r}")
        x.setflags(write=False)
        z.setflags(write=False)
        object.__setattr__(self, "x_bits", x)
        object.__setattr__(self, "z_bits", z)
        object.__setattr__(self, "_key", (self.sign, x.tobytes(), z.tobytes()))

    @property
    def n(self) -> int:
        return len(self.x_bits)

    @classmethod
    def from_string(cls, text: str) -> "PauliTerm":
        """Parse ``"+XIZ"``, ``"-YY"`` or an unsigned ``"XZ"``."""
        text = text.strip()
        sign = 1
        if text and text[0] in "+-":
            sign = -1 if text[0] == "-" else 1
            text = text[1:]
        try:
            bits = [_BITS[ch] for ch in text.upper()]
        except KeyError as exc:
            raise ValueError(f"bad Pauli letter in {text!r}") from exc
        if not bits:
            raise ValueError("empty Pauli string")
        x, z = zip(*bits)
        return cls(np.array(x, dtype=bool), np.array(z, dtype=bool), sign)

    @classmethod
    def from_ops(cls, n: int, ops: dict, sign: int = 1) -> "PauliTerm":
        """Build from a sparse ``{qubit: letter}`` map."""
        x = np.zeros(n, dtype=bool)
        z = np.zeros(n, dtype=bool)
        for q, letter in ops.items():
            if not 0 <= q < n:
                raise ValueError(f"qubit {q} out of range for n={n}")
            bx, bz = _BITS[letter.upper()]
            x[q], z[q] = bx, bz
        return cls(x, z, sign)

    @classmethod
    def identity(cls, n: int) -> "PauliTerm":
        return cls(np.zeros(n, bool), np.zeros(n, bool), 1)

    def letters(self) -> str:
        return "".join(_LETTERS[(int(a), int(b))] for a, b in zip(self.x_bits, self.z_bits))

    def __str__(self) -> str:
        return ("+" if self.sign == 1 else "-") + self.letters()

    def __eq__(self, other) -> bool:
        return isinstance(other, PauliTerm) and self._key == other._key

    def __hash__(self) -> int:
        return hash(self._key)

    def __neg__(self) -> "PauliTerm":
        return PauliTerm(self.x_bits, self.z_bits, -self.sign)

    def weight(self) -> int:
        return int(np.count_nonzero(self.x_bits | self.z_bits))

    def support(self) -> list[int]:
        return [int(q) for q in np.flatnonzero(self.x_bits | self.z_bits)]

    def commutes(self, other: "PauliTerm") -> bool:
        """True iff the symplectic product vanishes."""
        s = np.count_nonzero(self.x_bits & other.z_bits) + np.count_nonzero(self.z_bits & other.x_bits)
        return s % 2 == 0

    def product(self, other: "PauliTerm") -> tuple[int, "PauliTerm"]:
        """Return ``(k, T)`` with ``self @ other == i**k * T`` and T Hermitian, sign +1.

        The exponent folds in both signs, so ``k`` is even exactly when the
        two terms commute.
        """
        if self.n != other.n:
            raise ValueError("size mismatch")
        k = 0 if self.sign == 1 else 2
        k += 0 if other.sign == 1 else 2
        for x1, z1, x2, z2 in zip(self.x_bits, self.z_bits, other.x_bits, other.z_bits):
            k += _g(int(x1), int(z1), int(x2), int(z2))
        return k % 4, PauliTerm(self.x_bits ^ other.x_bits, self.z_bits ^ other.z_bits, 1)

    def __mul__(self, other: "PauliTerm") -> "PauliTerm":
        """Product of commuting terms (raises if the result is anti-Hermitian)."""
        k, t = self.product(other)
        if k % 2:
            raise ValueError("product of anticommuting Paulis is not Hermitian")
        return t if k == 0 else -t

    def embed(self, n: int, qubits) -> "PauliTerm":
        """Place this term on ``qubits`` of a larger n-qubit register."""
        x = np.zeros(n, bool)
        z = np.zeros(n, bool)
        x[list(qubits)] = self.x_bits
        z[list(qubits)] = self.z_bits
        return PauliTerm(x, z, self.sign)


def _g(x1: int, z1: int, x2: int, z2: int) -> int:
    """Exponent of i from multiplying single-qubit Paulis (x1,z1)(x2,z2)."""
    if x1 == 0 and z1 == 0:
        return 0
    if x1 == 1 and z1 == 1:
        return z2 - x2
    if x1 == 1:
        return z2 * (2 * x2 - 1)
    return x2 * (1 - 2 * z2)


def pack_bits(bits: np.ndarray, n_words: int) -> np.ndarray:
    """Pack a bool vector into little-endian uint64 words."""
    out = np.zeros(n_words, dtype=np.uint64)
    for q in np.flatnonzero(bits):
        out[q >> 6] |= np.uint64(1) << np.uint64(q & 63)
    return out


def unpack_rows(words: np.ndarray, n: int) -> np.ndarray:
    """Inverse of :func:`pack_bits` for a 2-d array of rows."""
    words = np.ascontiguousarray(words, dtype="<u8")
    as_bytes = words.view(np.uint8).reshape(words.shape[0], -1)
    bits = np.unpackbits(as_bytes, axis=1, bitorder="little")
    return bits[:, :n].astype(bool)


def pack_rows(bits: np.ndarray, n_words: int) -> np.ndarray:
    bits = np.asarray(bits, dtype=bool)
    rows = bits.shape[0]
    padded = np.zeros((rows, n_words * 64), dtype=bool)
    padded[:, : bits.shape[1]] = bits
    packed = np.packbits(padded, axis=1, bitorder="little")
    return np.ascontiguousarray(packed).view("<u8").reshape(rows, n_words).astype(np.uint64)
