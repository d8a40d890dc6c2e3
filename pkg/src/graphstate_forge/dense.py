"""Dense statevector simulator used as an independent oracle.

Gates are explicit unitary matrices and measurements are Born-rule
projections, so nothing here depends on the tableau conjugation rules.
Qubit 0 is the most significant index bit, matching ``to_statevector``.
"""

from __future__ import annotations

import numpy as np

from .pauli import PauliTerm

_S2 = np.sqrt(0.5)
I2 = np.eye(2, dtype=complex)
PX = np.array([[0, 1], [1, 0]], dtype=complex)
PY = np.array([[0, -1j], [1j, 0]], dtype=complex)
PZ = np.array([[1, 0], [0, -1]], dtype=complex)

ONE_QUBIT = {
    "H": np.array([[1, 1], [1, -1]], dtype=complex) * _S2,
    "S": np.diag([1, 1j]).astype(complex),
    "S_dag": np.diag([1, -1j]).astype(complex),
    "X": PX,
    "Y": PY,
    "Z": PZ,
    # exp(-i pi X/4) = (-iX)^{1/2} and friends
    "SqrtX_pos": (I2 - 1j * PX) * _S2,
    "SqrtX_neg": (I2 + 1j * PX) * _S2,
    "SqrtZ_pos": (I2 + 1j * PZ) * _S2,
    "SqrtZ_neg": (I2 - 1j * PZ) * _S2,
}
TWO_QUBIT = {
    "CZ": np.diag([1, 1, 1, -1]).astype(complex),
    "CX": np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex),
}


def pauli_matrix(p: PauliTerm) -> np.ndarray:
    """Full 2^n x 2^n matrix of a PauliTerm."""
    mats = {(0, 0): I2, (1, 0): PX, (1, 1): PY, (0, 1): PZ}
    out = np.array([[complex(p.sign)]])
    for x, z in zip(p.x_bits, p.z_bits):
        out = np.kron(out, mats[(int(x), int(z))])
    return out


class DenseState:
    """Pure state vector with explicit gate matrices.

    Parameters
    ----------
    n : int
        Qubit count.
    basis : {"all-zero", "all-plus"}
    """

    def __init__(self, n: int, basis: str = "all-zero"):
        self.n = n
        self.vec = np.zeros(2 ** n, dtype=complex)
        self.vec[0] = 1.0
        if basis == "all-plus":
            for q in range(n):
                self.apply("H", q)

    def copy(self) -> "DenseState":
        out = DenseState.__new__(DenseState)
        out.n = self.n
        out.vec = self.vec.copy()
        return out

    def apply(self, kind: str, *targets) -> "DenseState":
        psi = self.vec.reshape([2] * self.n)
        if kind in ONE_QUBIT:
            (q,) = targets
            psi = np.tensordot(ONE_QUBIT[kind], psi, axes=([1], [q]))
            psi = np.moveaxis(psi, 0, q)
        elif kind in TWO_QUBIT:
            a, b = targets
            u = TWO_QUBIT[kind].reshape(2, 2, 2, 2)
            psi = np.tensordot(u, psi, axes=([2, 3], [a, b]))
            psi = np.moveaxis(psi, [0, 1], [a, b])
        else:
            raise ValueError(f"unknown gate {kind!r}")
        self.vec = psi.reshape(-1)
        return self

    def prob_zero(self, obs: PauliTerm) -> float:
        """Probability of eigenvalue +1 for ``obs``."""
        pv = pauli_matrix(obs) @ self.vec
        return float(np.real(0.5 * (1.0 + np.vdot(self.vec, pv))))

    def project(self, obs: PauliTerm, m: int) -> float:
        """Project onto outcome ``m``; returns its probability."""
        pv = pauli_matrix(obs) @ self.vec
        sgn = 1.0 if m == 0 else -1.0
        new = 0.5 * (self.vec + sgn * pv)
        prob = float(np.real(np.vdot(new, new)))
        if prob > 1e-12:
            self.vec = new / np.sqrt(prob)
        return prob


def equal_up_to_phase(a: np.ndarray, b: np.ndarray, atol: float = 1e-9) -> bool:
    """True iff |<a|b>| = 1 for unit vectors a, b."""
    return abs(abs(np.vdot(a, b)) - 1.0) < atol
