"""Stabilizer tableau simulation with destabilizer bookkeeping.

The state of ``n`` qubits is held as ``2n`` packed Pauli rows: rows
``0..n-1`` are destabilizers and rows ``n..2n-1`` stabilizers. Gates act by
conjugation, Pauli measurements in ``O(n^2)``.

Examples
--------
>>> s = new_state(2, "all-plus")
>>> _ = s.cz(0, 1)
>>> [str(p) for p in s.stabilizers()]
['+XZ', '+ZX']
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _backend
from .pauli import PauliTerm, pack_bits, pack_rows, unpack_rows

MAX_DENSE_QUBITS = 14

GATE_KINDS = (
    "H", "S", "S_dag", "X", "Y", "Z",
    "SqrtX_pos", "SqrtX_neg", "SqrtZ_pos", "SqrtZ_neg",
    "CZ", "CX",
)
TWO_QUBIT = {"CZ", "CX"}

# inverse pairs, used when undoing frame corrections
INVERSE = {
    "H": "H", "X": "X", "Y": "Y", "Z": "Z",
    "S": "S_dag", "S_dag": "S",
    "SqrtX_pos": "SqrtX_neg", "SqrtX_neg": "SqrtX_pos",
    "SqrtZ_pos": "SqrtZ_neg", "SqrtZ_neg": "SqrtZ_pos",
    "CZ": "CZ", "CX": "CX",
}


class ProtocolError(RuntimeError):
    """An operation was requested in an order the procedure forbids."""


class MeasurementError(RuntimeError):
    """A forced outcome has zero probability."""


@dataclass(frozen=True)
class CliffordGate:
    """A named Clifford gate on one or two qubits.

    ``SqrtX_pos`` is ``(-iX)^{1/2}``, ``SqrtX_neg`` is ``(iX)^{1/2}``,
    ``SqrtZ_pos`` is ``(iZ)^{1/2}`` and ``SqrtZ_neg`` is ``(-iZ)^{1/2}``, each
    up to global phase.
    """

    kind: str
    targets: tuple

    def __post_init__(self):
        if self.kind not in GATE_KINDS:
            raise ValueError(f"unknown gate kind {self.kind!r}")
        targets = tuple(int(t) for t in self.targets)
        want = 2 if self.kind in TWO_QUBIT else 1
        if len(targets) != want:
            raise ValueError(f"{self.kind} needs {want} target(s), got {len(targets)}")
        if want == 2 and targets[0] == targets[1]:
            raise ValueError(f"{self.kind} targets must be distinct")
        object.__setattr__(self, "targets", targets)

    def inverse(self) -> "CliffordGate":
        return CliffordGate(INVERSE[self.kind], self.targets)


def _words(n: int) -> int:
    return (n + 63) // 64


class StabilizerState:
    """Stabilizer state of ``n`` qubits, mutated in place.

    Parameters
    ----------
    n : int
        Number of qubits (>= 1).
    basis : {"all-zero", "all-plus"}
        Initial product state.
    seed : int, optional
        Seed of the Philox generator used for random measurement outcomes.
    backend : {"cython", "numpy"}, optional
        Kernel implementation; defaults to the one selected at import.
    debug : bool
        Re-check group invariants after every operation.
    """

    __slots__ = ("n", "xs", "zs", "r", "rng", "k", "debug")

    def __init__(self, n: int, basis: str = "all-zero", seed: int | None = 0,
                 backend: str | None = None, debug: bool = False):
        if n < 1:
            raise ValueError("a state needs at least one qubit")
        if basis not in ("all-zero", "all-plus"):
            raise ValueError(f"unknown basis {basis!r}")
        self.n = n
        w = _words(n)
        self.xs = np.zeros((2 * n, w), dtype=np.uint64)
        self.zs = np.zeros((2 * n, w), dtype=np.uint64)
        self.r = np.zeros(2 * n, dtype=np.uint8)
        one = np.uint64(1)
        for q in range(n):
            bit = one << np.uint64(q & 63)
            # destabilizer X_q / stabilizer Z_q for |0>, swapped for |+>
            if basis == "all-zero":
                self.xs[q, q >> 6] |= bit
                self.zs[n + q, q >> 6] |= bit
            else:
                self.zs[q, q >> 6] |= bit
                self.xs[n + q, q >> 6] |= bit
        self.rng = np.random.Generator(np.random.Philox(seed))
        self.k = _backend.load(backend)
        self.debug = debug

    # ------------------------------------------------------------------ basics
    @property
    def backend(self) -> str:
        return self.k.BACKEND

    def copy(self) -> "StabilizerState":
        out = StabilizerState.__new__(StabilizerState)
        out.n = self.n
        out.xs = self.xs.copy()
        out.zs = self.zs.copy()
        out.r = self.r.copy()
        out.rng = np.random.Generator(np.random.Philox())
        out.rng.bit_generator.state = self.rng.bit_generator.state
        out.k = self.k
        out.debug = self.debug
        return out

    def reseed(self, seed) -> "StabilizerState":
        """Replace the outcome generator with a fresh Philox stream."""
        self.rng = np.random.Generator(np.random.Philox(seed))
        return self

    def fork(self, count: int) -> list["StabilizerState"]:
        """Independent copies with child generators split from this one."""
        seeds = self.rng.bit_generator.seed_seq.spawn(count)
        out = []
        for ss in seeds:
            c = self.copy()
            c.rng = np.random.Generator(np.random.Philox(ss))
            out.append(c)
        return out

    def _row(self, i: int) -> PauliTerm:
        x = unpack_rows(self.xs[i:i + 1], self.n)[0]
        z = unpack_rows(self.zs[i:i + 1], self.n)[0]
        return PauliTerm(x, z, -1 if self.r[i] else 1)

    def stabilizers(self) -> list[PauliTerm]:
        return [self._row(self.n + i) for i in range(self.n)]

    def destabilizers(self) -> list[PauliTerm]:
        return [self._row(i) for i in range(self.n)]

    def dump(self) -> str:
        """One stabilizer row per line, e.g. ``+XZI``."""
        return "\n".join(str(p) for p in self.stabilizers())

    def __repr__(self) -> str:
        return f"StabilizerState(n={self.n}, backend={self.backend!r})"

    def _packed(self, obs: PauliTerm):
        if obs.n != self.n:
            raise ValueError(f"observable acts on {obs.n} qubits, state has {self.n}")
        w = self.xs.shape[1]
        return pack_bits(obs.x_bits, w), pack_bits(obs.z_bits, w)

    def _check_q(self, q: int) -> int:
        q = int(q)
        if not 0 <= q < self.n:
            raise ValueError(f"qubit {q} out of range for n={self.n}")
        return q

    # ------------------------------------------------------------------- gates
    def apply(self, gate: CliffordGate | str, *targets) -> "StabilizerState":
        if isinstance(gate, str):
            gate = CliffordGate(gate, targets)
        t = [self._check_q(q) for q in gate.targets]
        k, xs, zs, r = self.k, self.xs, self.zs, self.r
        kind = gate.kind
        if kind == "H":
            k.gate_h(xs, zs, r, t[0])
        elif kind in ("S", "SqrtZ_neg"):
            k.gate_s(xs, zs, r, t[0])
        elif kind in ("S_dag", "SqrtZ_pos"):
            k.gate_sdg(xs, zs, r, t[0])
        elif kind == "X":
            k.gate_x(xs, zs, r, t[0])
        elif kind == "Y":
            k.gate_y(xs, zs, r, t[0])
        elif kind == "Z":
            k.gate_z(xs, zs, r, t[0])
        elif kind == "SqrtX_pos":
            k.gate_sqrtx_pos(xs, zs, r, t[0])
        elif kind == "SqrtX_neg":
            k.gate_sqrtx_neg(xs, zs, r, t[0])
        elif kind == "CZ":
            k.gate_cz(xs, zs, r, t[0], t[1])
        elif kind == "CX":
            k.gate_cx(xs, zs, r, t[0], t[1])
        if self.debug:
            self.check_invariants()
        return self

    def h(self, q):
        return self.apply("H", q)

    def s(self, q):
        return self.apply("S", q)

    def sdg(self, q):
        return self.apply("S_dag", q)

    def x(self, q):
        return self.apply("X", q)

    def y(self, q):
        return self.apply("Y", q)

    def z(self, q):
        return self.apply("Z", q)

    def cz(self, a, b):
        return self.apply("CZ", a, b)

    def cx(self, a, b):
        return self.apply("CX", a, b)

    def apply_pauli(self, p: PauliTerm) -> "StabilizerState":
        """Apply the Pauli operator ``p`` as a gate (its sign is a global phase)."""
        for q in p.support():
            letter = "Y" if p.x_bits[q] and p.z_bits[q] else ("X" if p.x_bits[q] else "Z")
            self.apply(letter, q)
        return self

    # ------------------------------------------------------------ measurement
    def measure(self, obs: PauliTerm, forced: int | None = None) -> tuple[int, bool]:
        """Measure the Hermitian Pauli ``obs``.

        Returns ``(m, deterministic)`` with eigenvalue ``(-1)^m``. A ``forced``
        outcome post-selects the random case and must agree with the
        deterministic one.
        """
        px, pz = self._packed(obs)
        sbit = 0 if obs.sign == 1 else 1
        p = self.k.anticommuting_stabilizer(self.xs, self.zs, self.n, px, pz)
        if p < 0:
            m = self.k.deterministic_sign(self.xs, self.zs, self.r, self.n, px, pz) ^ sbit
            if forced is not None and int(forced) != m:
                raise MeasurementError(f"outcome {forced} has probability 0 for {obs}")
            return int(m), True
        m = int(self.rng.integers(2)) if forced is None else int(forced)
        self.k.collapse(self.xs, self.zs, self.r, self.n, p, px, pz, m ^ sbit)
        if self.debug:
            self.check_invariants()
        return m, False

    def measure_single(self, q: int, letter: str = "Z", forced: int | None = None):
        return self.measure(PauliTerm.from_ops(self.n, {self._check_q(q): letter}), forced)

    def expectation(self, obs: PauliTerm) -> int:
        """+1 or -1 if ``obs`` (or its negative) stabilizes the state, else 0."""
        px, pz = self._packed(obs)
        if self.k.anticommuting_stabilizer(self.xs, self.zs, self.n, px, pz) >= 0:
            return 0
        m = self.k.deterministic_sign(self.xs, self.zs, self.r, self.n, px, pz)
        return obs.sign * (-1 if m else 1)

    def reset(self, q: int, basis: str = "Z") -> int:
        """Measure qubit ``q`` in Z and rotate it to |0> (or |+> for basis "X")."""
        m, _ = self.measure_single(q, "Z")
        if m:
            self.x(q)
        if basis == "X":
            self.h(q)
        return m

    # -------------------------------------------------------------- structure
    def canonical(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Reduced row echelon stabilizer rows (x words, z words, signs)."""
        xs, zs, r = self.xs.copy(), self.zs.copy(), self.r.copy()
        self.k.canonicalize(xs, zs, r, self.n)
        n = self.n
        return xs[n:], zs[n:], r[n:]

    def check_invariants(self) -> None:
        """Raise AssertionError unless the rows form a valid tableau."""
        n = self.n
        xb = unpack_rows(self.xs, n).astype(np.uint8)
        zb = unpack_rows(self.zs, n).astype(np.uint8)
        # symplectic Gram matrix must be the standard form [[*, I], [I, 0]]
        gram = (xb @ zb.T + zb @ xb.T) % 2
        want = np.zeros((2 * n, 2 * n), dtype=np.int64)
        want[:n, n:] = np.eye(n, dtype=np.int64)
        want[n:, :n] = np.eye(n, dtype=np.int64)
        stab_block = gram[n:, n:]
        if np.any(stab_block):
            raise AssertionError("stabilizer rows do not commute")
        if np.any(gram[:n, n:] != want[:n, n:]):
            raise AssertionError("destabilizer pairing broken")

    def append_qubits(self, count: int = 1) -> list[int]:
        """Add ``count`` fresh qubits in |0>; returns their indices."""
        if count < 1:
            raise ValueError("count must be positive")
        n, m = self.n, self.n + count
        w = _words(m)
        xs = np.zeros((2 * m, w), dtype=np.uint64)
        zs = np.zeros((2 * m, w), dtype=np.uint64)
        r = np.zeros(2 * m, dtype=np.uint8)
        ow = self.xs.shape[1]
        xs[:n, :ow], zs[:n, :ow], r[:n] = self.xs[:n], self.zs[:n], self.r[:n]
        xs[m:m + n, :ow], zs[m:m + n, :ow], r[m:m + n] = self.xs[n:], self.zs[n:], self.r[n:]
        one = np.uint64(1)
        for q in range(n, m):
            bit = one << np.uint64(q & 63)
            xs[q, q >> 6] |= bit
            zs[m + q, q >> 6] |= bit
        self.n, self.xs, self.zs, self.r = m, xs, zs, r
        return list(range(n, m))

    def subsystem(self, keep) -> "StabilizerState":
        """State of qubits ``keep`` (in that order) once the rest is unentangled.

        The discarded qubits must be in a pure product with the kept ones;
        raises ValueError otherwise.
        """
        keep = [self._check_q(q) for q in keep]
        if len(set(keep)) != len(keep):
            raise ValueError("duplicate qubit in keep list")
        drop = [q for q in range(self.n) if q not in set(keep)]
        order = drop + keep
        n = self.n
        xb = unpack_rows(self.xs[n:], n)[:, order]
        zb = unpack_rows(self.zs[n:], n)[:, order]
        w = self.xs.shape[1]
        tmp_x = np.vstack([np.zeros((n, w), np.uint64), pack_rows(xb, w)])
        tmp_z = np.vstack([np.zeros((n, w), np.uint64), pack_rows(zb, w)])
        tmp_r = self.r.copy()
        self.k.canonicalize(tmp_x, tmp_z, tmp_r, n)
        cx = unpack_rows(tmp_x[n:], n)
        cz = unpack_rows(tmp_z[n:], n)
        nd = len(drop)
        gens = []
        for i in range(n):
            if cx[i, :nd].any() or cz[i, :nd].any():
                continue
            gens.append(PauliTerm(cx[i, nd:], cz[i, nd:], -1 if tmp_r[n + i] else 1))
        if len(gens) != len(keep):
            raise ValueError("kept qubits are entangled with the discarded ones")
        out = from_generators(gens, seed=None, backend=self.backend)
        out.rng = np.random.Generator(np.random.Philox())
        out.rng.bit_generator.state = self.rng.bit_generator.state
        return out

    def to_statevector(self) -> np.ndarray:
        return to_statevector(self)


# ---------------------------------------------------------------- functions
def new_state(n: int, basis: str = "all-zero", seed: int | None = 0,
              backend: str | None = None) -> StabilizerState:
    """Fresh ``|0>^n`` ("all-zero") or ``|+>^n`` ("all-plus") state."""
    return StabilizerState(n, basis, seed=seed, backend=backend)


def apply_gate(state: StabilizerState, gate: CliffordGate) -> StabilizerState:
    return state.apply(gate)


def measure_pauli(state: StabilizerState, obs: PauliTerm, forced: int | None = None):
    """Return ``(m, deterministic, state)``; the state is updated in place."""
    m, det = state.measure(obs, forced)
    return m, det, state


def states_equal(a: StabilizerState, b: StabilizerState) -> bool:
    """True iff both tableaux stabilize the same state (global phase ignored)."""
    if a.n != b.n:
        raise ValueError(f"size mismatch: {a.n} vs {b.n}")
    ax, az, ar = a.canonical()
    bx, bz, br = b.canonical()
    return bool(np.array_equal(ax, bx) and np.array_equal(az, bz) and np.array_equal(ar, br))


def gf2_solve(mat: np.ndarray, rhs: np.ndarray) -> np.ndarray | None:
    """Solve ``mat @ x = rhs`` over GF(2); None if inconsistent."""
    a = np.array(mat, dtype=np.uint8) % 2
    b = np.array(rhs, dtype=np.uint8) % 2
    rows, cols = a.shape
    aug = np.concatenate([a, b[:, None]], axis=1)
    pivots = []
    top = 0
    for c in range(cols):
        hits = np.flatnonzero(aug[top:, c]) + top
        if hits.size == 0:
            continue
        aug[[top, hits[0]]] = aug[[hits[0], top]]
        mask = aug[:, c].astype(bool)
        mask[top] = False
        aug[mask] ^= aug[top]
        pivots.append(c)
        top += 1
        if top == rows:
            break
    if np.any(aug[top:, -1]):
        return None
    x = np.zeros(cols, dtype=np.uint8)
    for i, c in enumerate(pivots):
        x[c] = aug[i, -1]
    return x


def from_generators(gens, seed: int | None = 0, backend: str | None = None) -> StabilizerState:
    """Prepare the state stabilized by ``gens`` (independent, commuting, n of them).

    Each generator is measured with its +1 outcome forced; generators already
    fixed at -1 by the starting state are flipped by a Pauli that
    anticommutes with that generator alone.
    """
    gens = list(gens)
    if not gens:
        raise ValueError("need at least one generator")
    n = gens[0].n
    if len(gens) != n:
        raise ValueError(f"need {n} generators, got {len(gens)}")
    for i, g in enumerate(gens):
        for h in gens[:i]:
            if not g.commutes(h):
                raise ValueError(f"generators {h} and {g} anticommute")
    st = StabilizerState(n, "all-zero", seed=seed, backend=backend)
    for g in gens:
        if st.expectation(g) == 0:
            st.measure(g, forced=0)
    wrong = [i for i, g in enumerate(gens) if st.expectation(g) != 1]
    if wrong:
        destab = st.destabilizers()
        mat = np.array([[0 if d.commutes(g) else 1 for d in destab] for g in gens], dtype=np.uint8)
        for i in wrong:
            e = np.zeros(n, dtype=np.uint8)
            e[i] = 1
            u = gf2_solve(mat, e)
            if u is None:
                raise ValueError("generators are not independent")
            for k in np.flatnonzero(u):
                st.apply_pauli(destab[k])
    for g in gens:
        if st.expectation(g) != 1:
            raise ValueError("generators are not independent")
    return st


def _pauli_on_vector(p: PauliTerm, vec: np.ndarray) -> np.ndarray:
    """Apply a Hermitian Pauli (Y = iXZ per qubit) to a dense vector."""
    n = p.n
    idx = np.arange(vec.size)
    xmask = sum(1 << (n - 1 - q) for q in np.flatnonzero(p.x_bits))
    zmask = sum(1 << (n - 1 - q) for q in np.flatnonzero(p.z_bits))
    parity = np.bitwise_count((idx & zmask).astype(np.uint64)) & 1
    out = vec * np.where(parity, -1.0, 1.0)
    out = out[idx ^ xmask]
    ny = int(np.count_nonzero(p.x_bits & p.z_bits))
    return (1j ** ny) * p.sign * out


def to_statevector(state: StabilizerState) -> np.ndarray:
    """Dense amplitudes (qubit 0 is the most significant bit).

    Global phase is fixed so the largest-magnitude amplitude with the lowest
    index is real and positive.
    """
    n = state.n
    if n > MAX_DENSE_QUBITS:
        raise MemoryError(f"dense expansion limited to {MAX_DENSE_QUBITS} qubits, got {n}")
    gen = np.random.default_rng(12345)
    vec = gen.normal(size=2 ** n) + 1j * gen.normal(size=2 ** n)
    for g in state.stabilizers():
        vec = 0.5 * (vec + _pauli_on_vector(g, vec))
    vec /= np.linalg.norm(vec)
    mags = np.abs(vec)
    j = int(np.flatnonzero(mags > mags.max() - 1e-9)[0])
    vec *= np.abs(vec[j]) / vec[j]
    return vec
