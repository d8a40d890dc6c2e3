"""Emit-then-add construction on one emitter, auxiliary spins and photons.

A :class:`BuildSystem` carries the exact tableau together with a symbolic
mirror ``Z^r|G>`` of every live spin and photon. Each subroutine updates
both, so ``check()`` can compare them at any point.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .graph import (
    Graph, GraphBasisState, apply_corrections, circuit_from_graph, local_complement,
    measure_graph_Y, measure_graph_Z,
)
from .pauli import PauliTerm
from .tableau import ProtocolError, StabilizerState, states_equal

EMITTER, AUX_SPIN, PHOTON = "emitter", "aux_spin", "photon"

# Emission order -> protocol labels for the 12-photon target graph.
G_PERMUTATION = {
    "p1": 9, "p2": 10, "p3": 11, "p4": 12,
    "p5": 1, "p6": 2, "p7": 3, "p8": 4,
    "p9": 5, "p10": 6, "p11": 7, "p12": 8,
}
G_EDGES = [(1, 2), (2, 3), (3, 4), (4, 12), (5, 6), (6, 7), (7, 8), (8, 12),
           (9, 10), (10, 11), (11, 12)]


def target_graph() -> Graph:
    """Three arms 1-2-3-4, 5-6-7-8, 9-10-11 meeting at qubit 12."""
    return Graph(range(1, 13), G_EDGES)


@dataclass(frozen=True)
class HeraldModel:
    """Bernoulli herald with success probability ``p_success`` per cycle."""

    p_success: float = 1.0
    t_rep: float = 1.0
    t_add: float = 0.0

    def __post_init__(self):
        if not 0.0 < self.p_success <= 1.0:
            raise ValueError(f"p_success must lie in (0, 1], got {self.p_success}")
        if self.t_rep <= 0 or self.t_add < 0:
            raise ValueError("t_rep must be positive and t_add non-negative")


@dataclass
class BuildLog:
    """Counters plus an ordered event list ``(step, targets, bits)``."""

    attempts: int = 0
    elapsed_cycles: float = 0.0
    cz_count: int = 0
    pass_count: int = 0
    patch_count: int = 0
    pass_cz: int = 0
    patch_cz: int = 0
    photons_added: int = 0
    events: list = field(default_factory=list)
    permutation: dict = field(default_factory=dict)

    def record(self, step: str, targets=(), bits=()):
        self.events.append((step, tuple(targets), tuple(int(b) for b in bits)))

    def to_text(self) -> str:
        out = [
            f"attempts {self.attempts}",
            f"elapsed_cycles {self.elapsed_cycles:.12g}",
            f"cz_count {self.cz_count}",
            f"pass_count {self.pass_count}",
            f"patch_count {self.patch_count}",
            f"pass_cz {self.pass_cz}",
            f"patch_cz {self.patch_cz}",
            f"photons_added {self.photons_added}",
        ]
        if self.permutation:
            out.append("permutation " + " ".join(f"{k}:{v}" for k, v in self.permutation.items()))
        for step, targets, bits in self.events:
            out.append(f"event {step} targets={','.join(map(str, targets))} "
                       f"bits={''.join(map(str, bits))}")
        return "\n".join(out) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "BuildLog":
        log = cls()
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            key, _, rest = line.partition(" ")
            if key == "event":
                parts = rest.split(" ")
                if len(parts) != 3 or not parts[1].startswith("targets=") or not parts[2].startswith("bits="):
                    raise ValueError(f"line {lineno}: malformed event {raw!r}")
                targets = tuple(t for t in parts[1][8:].split(",") if t)
                log.events.append((parts[0], targets, tuple(int(b) for b in parts[2][5:])))
            elif key == "permutation":
                log.permutation = {k: int(v) for k, v in (item.split(":") for item in rest.split())}
            elif key == "elapsed_cycles":
                log.elapsed_cycles = float(rest)
            elif key in ("attempts", "cz_count", "pass_count", "patch_count", "pass_cz",
                         "patch_cz", "photons_added"):
                setattr(log, key, int(rest))
            else:
                raise ValueError(f"line {lineno}: unknown key {key!r}")
        return log


class BuildSystem:
    """Emitter ``e``, auxiliary spins and photons on one exact tableau.

    Parameters
    ----------
    spins : sequence of str
        Auxiliary spin labels; each starts in |+>.
    seed : int
        Seeds both the tableau measurements and the herald draws.
    verify : bool
        Check the post-add generator signs after every addition.
    """

    def __init__(self, spins=("s1", "s2"), seed: int | None = 0, backend: str | None = None,
                 verify: bool = True):
        ss = np.random.SeedSequence(seed)
        tab_seed, herald_seed = ss.spawn(2)
        self.tableau = StabilizerState(1 + len(spins), "all-zero",
                                       seed=int(tab_seed.generate_state(1)[0]), backend=backend)
        self.rng = np.random.default_rng(herald_seed)
        self.roles = {"e": EMITTER}
        self.qubit_of = {"e": 0}
        for i, s in enumerate(spins, start=1):
            self.roles[s] = AUX_SPIN
            self.qubit_of[s] = i
            self.tableau.h(i)
        self.graph = GraphBasisState(Graph(list(spins)))
        self.byproducts: list[tuple[str, int]] = []
        self.log = BuildLog()
        self.pending: str | None = None
        self.frames: dict[str, str] = {}
        self.measured: dict[str, tuple[str, int]] = {}
        self.verify = verify
        self._n_photons = 0

    @classmethod
    def from_graph_state(cls, state: GraphBasisState, spins, seed: int | None = 0,
                         backend: str | None = None, verify: bool = True) -> "BuildSystem":
        """Start from ``Z^r|G>``; nodes in ``spins`` are aux spins, the rest photons."""
        spins = list(spins)
        for s_ in spins:
            state.graph.index(s_)
        sys = cls(spins, seed=seed, backend=backend, verify=verify)
        photons = [a for a in state.graph.nodes if a not in spins]
        qp = sys.tableau.append_qubits(len(photons)) if photons else []
        for a, q in zip(photons, qp):
            sys.roles[a] = PHOTON
            sys.qubit_of[a] = q
            sys.tableau.h(q)
        for u, v in state.graph.edges():
            sys.tableau.cz(sys.q(u), sys.q(v))
        for a in state.phases:
            sys.tableau.z(sys.q(a))
        sys.graph = GraphBasisState(state.graph.reorder(spins + photons), state.phases)
        return sys

    # ----------------------------------------------------------- helpers
    def q(self, label) -> int:
        return self.qubit_of[label]

    def photons(self) -> list[str]:
        return [a for a, role in self.roles.items() if role == PHOTON]

    def _require_role(self, label, role):
        if self.roles.get(label) != role:
            raise ValueError(f"{label!r} is not an {role} (role {self.roles.get(label)!r})")

    def _apply_corrections(self, corrections):
        apply_corrections(self.tableau, corrections, self.qubit_of)

    def emitter_isolated(self) -> bool:
        return self.tableau.expectation(PauliTerm.from_ops(self.tableau.n, {0: "Z"})) == 1

    def live_labels(self) -> list:
        return list(self.graph.graph.nodes)

    def check(self) -> bool:
        """True iff the live qubits match the mirror (pending frames undone)."""
        if self.pending is not None or not self.emitter_isolated():
            return False
        labels = self.live_labels()
        tab = self.tableau.subsystem([self.q(a) for a in labels])
        for a, op in self.frames.items():
            tab.apply(op, labels.index(a))
        return states_equal(tab, circuit_from_graph(self.graph, backend=self.tableau.backend))

    # -------------------------------------------------------- operations
    def attempt_emit(self, herald: HeraldModel) -> tuple[bool, str | None]:
        """One excitation cycle of the emitter."""
        if self.pending is not None:
            raise ProtocolError("a heralded photon is already pending on the emitter")
        if not self.emitter_isolated():
            raise ProtocolError("emitter is not reinitialized")
        t = self.tableau
        self.log.attempts += 1
        self.log.elapsed_cycles += 1.0
        t.h(0)
        if self.rng.random() >= herald.p_success:
            # lost photon: only the emitter is touched
            t.reset(0)
            self.log.record("emit_fail", ("e",))
            return False, None
        self._n_photons += 1
        label = f"p{self._n_photons}"
        while label in self.roles:
            self._n_photons += 1
            label = f"p{self._n_photons}"
        (qp,) = t.append_qubits(1)
        self.roles[label] = PHOTON
        self.qubit_of[label] = qp
        t.cx(0, qp)
        self.pending = label
        self.log.elapsed_cycles += herald.t_add / herald.t_rep
        self.log.record("emit", ("e", label))
        return True, label

    def emit_until_success(self, herald: HeraldModel, max_attempts: int = 10 ** 7) -> str:
        for _ in range(max_attempts):
            ok, label = self.attempt_emit(herald)
            if ok:
                return label
        raise RuntimeError(f"no herald within {max_attempts} attempts")

    def add_photon_to_spin(self, spin: str, photon: str, forced: int | None = None) -> int:
        """Transfer the pending emitter-photon pair onto ``spin``; returns c.

        Leaves the photon with a pending Hadamard frame; :meth:`pass_photon`
        removes it.
        """
        self._require_role(spin, AUX_SPIN)
        self._require_role(photon, PHOTON)
        if self.pending != photon:
            raise ProtocolError(f"photon {photon!r} is not pending on the emitter")
        if spin not in self.graph.graph:
            raise ProtocolError(f"spin {spin!r} has been measured out")
        t = self.tableau
        qs, qp = self.q(spin), self.q(photon)
        prior = self.graph.graph.neighbors(spin)
        r_s = self.graph.r(spin)
        t.cz(0, qs)
        t.apply("SqrtX_pos", 0)
        t.apply("SqrtZ_pos", qs)
        t.apply("SqrtX_neg", qp)
        c, _ = t.measure_single(0, "Z", forced)
        self.log.cz_count += 1
        if self.verify:
            self._check_added(spin, photon, prior, r_s, c)
        if c:
            t.x(0)
        self.pending = None
        g = self.graph.graph.add_node(photon).toggle_edge(spin, photon)
        phases = set(self.graph.phases) ^ ({spin} if c else set())
        if c:
            phases.add(photon)
        self.graph = GraphBasisState(g, frozenset(phases))
        self.frames[photon] = "H"
        self.byproducts.append((photon, int(c)))
        self.log.photons_added += 1
        self.log.record("add", (spin, photon), (c,))
        return int(c)

    def _check_added(self, spin, photon, prior, r_s, c):
        n = self.tableau.n
        sgn = -1 if c else 1
        ops = {self.q(k): "Z" for k in prior}
        ops.update({self.q(photon): "X", self.q(spin): "X"})
        gens = [
            PauliTerm.from_ops(n, ops, sgn * (-1 if r_s else 1)),
            PauliTerm.from_ops(n, {self.q(photon): "Z", self.q(spin): "Z"}, sgn),
            PauliTerm.from_ops(n, {0: "Z"}, sgn),
        ]
        for g in gens:
            if self.tableau.expectation(g) != 1:
                raise AssertionError(f"post-add generator {g} not stabilized (c={c})")

    def local_complement(self, a) -> None:
        """Physical local complementation on a live qubit."""
        self.graph, corr = local_complement(self.graph, a)
        self._apply_corrections(corr)
        self.log.record("lc", (a,))

    def pass_photon(self, spin: str, variant: str = "join", forced: int | None = None) -> int:
        """Pass the pending photon to ``spin``; returns the byproduct bit."""
        if variant not in ("join", "extend"):
            raise ValueError(f"variant must be 'join' or 'extend', got {variant!r}")
        if self.pending is None:
            raise ProtocolError("no heralded photon pending on the emitter")
        photon = self.pending
        c = self.add_photon_to_spin(spin, photon, forced)
        self.tableau.h(self.q(photon))
        del self.frames[photon]
        if variant == "extend":
            self.local_complement(spin)
            self.local_complement(photon)
        self.log.pass_count += 1
        self.log.pass_cz += 1
        self.log.record(variant, (spin, photon), (c,))
        return c

    def pass_spin(self, source: str, target: str) -> int:
        """Join the subgraph headed by ``source`` onto ``target``.

        ``source`` takes the photon role: one CZ links the spins and a Y
        measurement of ``source`` moves its edges onto ``target``. The
        source spin is then reset to |+> for reuse.
        """
        self._require_role(source, AUX_SPIN)
        self._require_role(target, AUX_SPIN)
        g = self.graph.graph
        if source not in g or target not in g:
            raise ProtocolError("both spins must be live")
        if g.has_edge(source, target):
            raise ValueError("spins are already adjacent")
        t = self.tableau
        t.cz(self.q(source), self.q(target))
        self.graph = GraphBasisState(g.toggle_edge(source, target), self.graph.phases)
        m, _ = t.measure_single(self.q(source), "Y")
        self.graph, corr = measure_graph_Y(self.graph, source, m, absorb=True)
        self._apply_corrections(corr)
        self._reset_spin(source)
        self.log.cz_count += 1
        self.log.pass_count += 1
        self.log.pass_cz += 1
        self.log.record("pass_spin", (source, target), (m,))
        return m

    def _reset_spin(self, spin):
        self.tableau.reset(self.q(spin), "X")
        self.graph = GraphBasisState(self.graph.graph.add_node(spin), self.graph.phases)

    def patch(self, spin1: str, spin2: str, designated: tuple | None = None) -> list[int]:
        """Connect the first-layer photons of two spin-headed subgraphs.

        An ancilla on the emitter is linked to each spin (CZ), the spin is
        locally complemented, and the link is undone (CZ); a final Y
        measurement on the ancilla joins every neighbour of ``spin1`` to
        every neighbour of ``spin2``. With one first-layer photon per spin
        this is exactly the ``designated`` pair. Uses 4 CZ gates.
        """
        for s in (spin1, spin2):
            self._require_role(s, AUX_SPIN)
        if self.pending is not None:
            raise ProtocolError("emitter busy with a pending photon")
        g = self.graph.graph
        if spin1 == spin2 or g.has_edge(spin1, spin2):
            raise ValueError("patch needs two distinct, non-adjacent spins")
        layers = []
        for s in (spin1, spin2):
            nb = [a for a in g.neighbors(s) if self.roles[a] == PHOTON]
            if not nb or len(nb) != g.degree(s):
                raise ValueError(f"spin {s!r} must head photons only, at least one")
            layers.append(nb)
        if set(layers[0]) & set(layers[1]):
            raise ValueError("first layers overlap")
        if designated is not None:
            j, k = designated
            if j not in layers[0] or k not in layers[1]:
                raise ValueError(f"designated pair {designated} is not on the first layers")
        t = self.tableau
        t.h(0)
        self.graph = GraphBasisState(self.graph.graph.add_node("e"), self.graph.phases)
        for s in (spin1, spin2):
            for step in range(2):
                t.cz(0, self.q(s))
                self.graph = GraphBasisState(self.graph.graph.toggle_edge("e", s), self.graph.phases)
                if step == 0:
                    self.local_complement(s)
        m, _ = t.measure_single(0, "Y")
        self.graph, corr = measure_graph_Y(self.graph, "e", m, absorb=True)
        self._apply_corrections(corr)
        self.tableau.reset(0)
        self.log.cz_count += 4
        self.log.patch_cz += 4
        self.log.patch_count += 1
        self.log.record("patch", (spin1, spin2), (m,))
        return [m]

    def measure_out(self, label, basis: str = "Z") -> int:
        """Measure a live qubit in Z or Y and drop it from the mirror."""
        if basis not in ("Z", "Y"):
            raise ValueError("basis must be 'Z' or 'Y'")
        m, _ = self.tableau.measure_single(self.q(label), basis)
        if basis == "Z":
            self.graph, corr = measure_graph_Z(self.graph, label, m)
            self.graph = self.graph.flip([c.node for c in corr], m)
        else:
            self.graph, corr = measure_graph_Y(self.graph, label, m, absorb=True)
            self._apply_corrections(corr)
        self.measured[label] = (basis, int(m))
        self.log.record(f"measure_{basis}", (label,), (m,))
        return int(m)

    def photon_state(self, order=None, correct: bool = True) -> StabilizerState:
        """Tableau of the photons (default emission order), optionally Z^r-corrected."""
        order = list(order) if order is not None else self.photons()
        if set(self.graph.graph.nodes) != set(order):
            raise ProtocolError("non-photon qubits are still entangled")
        tab = self.tableau.subsystem([self.q(a) for a in order])
        if correct:
            for i, a in enumerate(order):
                if self.graph.r(a):
                    tab.z(i)
        return tab


# module-level aliases following the operation names
def attempt_emit(sys: BuildSystem, herald: HeraldModel):
    return sys.attempt_emit(herald)


def add_photon_to_spin(sys: BuildSystem, spin: str, photon: str, forced: int | None = None) -> int:
    return sys.add_photon_to_spin(spin, photon, forced)


def pass_photon(sys: BuildSystem, spin: str, variant: str, herald: HeraldModel | None = None,
                forced: int | None = None) -> int:
    """Emit (if nothing is pending) and pass one photon to ``spin``."""
    if sys.pending is None:
        if herald is None:
            raise ProtocolError("no heralded photon pending on the emitter")
        sys.emit_until_success(herald)
    return sys.pass_photon(spin, variant, forced)


def patch(sys: BuildSystem, spin1: str, spin2: str, designated=None) -> list[int]:
    return sys.patch(spin1, spin2, designated)


BUILD_PLAN = (
    ("s1", ["extend", "extend", "extend", "join"]),
    ("s2", ["join", "extend", "extend", "extend"]),
    ("pass_spin", ("s2", "s1")),
    ("s2", ["join", "extend", "extend", "extend"]),
    ("patch", ("s1", "s2")),
)


def build_G(herald: HeraldModel | None = None, seed: int | None = 0,
            backend: str | None = None, verify: bool = False) -> tuple[BuildSystem, BuildLog]:
    """Build the 12-photon target graph with one emitter and two spins.

    After the final local complementation at ``p4`` the photons hold
    ``Z^r|G>`` with ``r`` published in ``sys.graph``; ``sys.log.permutation``
    maps emission labels to protocol labels.
    """
    herald = herald or HeraldModel()
    sys = BuildSystem(("s1", "s2"), seed=seed, backend=backend, verify=verify)
    for step, arg in BUILD_PLAN:
        if step == "pass_spin":
            sys.pass_spin(*arg)
        elif step == "patch":
            sys.patch(*arg)
        else:
            for variant in arg:
                pass_photon(sys, step, variant, herald)
    sys.measure_out("s1", "Y")
    sys.measure_out("s2", "Z")
    sys.local_complement("p4")
    sys.log.permutation = dict(G_PERMUTATION)
    return sys, sys.log


def relabeled_state(sys: BuildSystem) -> GraphBasisState:
    """Mirror of the built photons under the protocol labels."""
    return GraphBasisState(sys.graph.graph.relabel(sys.log.permutation),
                           frozenset(sys.log.permutation[a] for a in sys.graph.phases))


def G_state(sys: BuildSystem, correct: bool = True) -> StabilizerState:
    """Photon tableau ordered by protocol label 1..12."""
    inv = {v: k for k, v in sys.log.permutation.items()}
    return sys.photon_state([inv[k] for k in range(1, 13)], correct=correct)
