"""Graph states, graph-basis states ``Z^r|G>`` and their measurement rules.

Every symbolic operation returns the new state together with the list of
single-qubit corrections that map the true post-operation state onto it.
``apply_corrections`` replays such a list on a tableau, which is how the
rules are cross-checked.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Hashable, Iterable

import numpy as np

from .pauli import PauliTerm
from .tableau import StabilizerState

Label = Hashable

CORRECTION_OPS = ("Z", "SqrtZ_pos", "SqrtZ_neg", "SqrtX_pos", "SqrtX_neg")


class Graph:
    """Simple undirected graph on an ordered set of opaque labels.

    Parameters
    ----------
    nodes : iterable
        Node labels; order fixes the qubit order of circuits built from it.
    edges : iterable of pairs
    """

    __slots__ = ("nodes", "_index", "adj")

    def __init__(self, nodes: Iterable[Label], edges: Iterable[tuple] = ()):
        self.nodes = tuple(nodes)
        self._index = {a: i for i, a in enumerate(self.nodes)}
        if len(self._index) != len(self.nodes):
            raise ValueError("node labels must be unique")
        n = len(self.nodes)
        self.adj = np.zeros((n, n), dtype=bool)
        for u, v in edges:
            i, j = self.index(u), self.index(v)
            if i == j:
                raise ValueError(f"self-loop on {u!r}")
            self.adj[i, j] = self.adj[j, i] = True

    @classmethod
    def _from_matrix(cls, nodes, adj) -> "Graph":
        g = cls.__new__(cls)
        g.nodes = tuple(nodes)
        g._index = {a: i for i, a in enumerate(g.nodes)}
        g.adj = adj
        return g

    def index(self, a: Label) -> int:
        try:
            return self._index[a]
        except KeyError:
            raise ValueError(f"unknown node {a!r}") from None

    def __contains__(self, a) -> bool:
        return a in self._index

    def __len__(self) -> int:
        return len(self.nodes)

    def neighbors(self, a: Label) -> tuple:
        return tuple(self.nodes[j] for j in np.flatnonzero(self.adj[self.index(a)]))

    def degree(self, a: Label) -> int:
        return int(self.adj[self.index(a)].sum())

    def has_edge(self, u: Label, v: Label) -> bool:
        return bool(self.adj[self.index(u), self.index(v)])

    def edges(self) -> list[tuple]:
        iu, ju = np.nonzero(np.triu(self.adj, 1))
        return [(self.nodes[i], self.nodes[j]) for i, j in zip(iu, ju)]

    def edge_set(self) -> set[frozenset]:
        return {frozenset(e) for e in self.edges()}

    def __eq__(self, other) -> bool:
        return (isinstance(other, Graph) and set(self.nodes) == set(other.nodes)
                and self.edge_set() == other.edge_set())

    def __hash__(self):
        return hash((frozenset(self.nodes), frozenset(self.edge_set())))

    def __repr__(self) -> str:
        return f"Graph(nodes={list(self.nodes)}, edges={self.edges()})"

    # value-returning edits
    def toggle_edge(self, u: Label, v: Label) -> "Graph":
        i, j = self.index(u), self.index(v)
        if i == j:
            raise ValueError("self-loop")
        adj = self.adj.copy()
        adj[i, j] = adj[j, i] = not adj[i, j]
        return Graph._from_matrix(self.nodes, adj)

    def add_node(self, a: Label) -> "Graph":
        if a in self._index:
            raise ValueError(f"node {a!r} already present")
        n = len(self.nodes)
        adj = np.zeros((n + 1, n + 1), dtype=bool)
        adj[:n, :n] = self.adj
        return Graph._from_matrix(self.nodes + (a,), adj)

    def remove(self, *labels: Label) -> "Graph":
        drop = {self.index(a) for a in labels}
        keep = [i for i in range(len(self.nodes)) if i not in drop]
        return Graph._from_matrix([self.nodes[i] for i in keep], self.adj[np.ix_(keep, keep)].copy())

    def local_complement(self, a: Label) -> "Graph":
        """Complement the edges among the neighbours of ``a``."""
        nb = np.flatnonzero(self.adj[self.index(a)])
        adj = self.adj.copy()
        block = adj[np.ix_(nb, nb)] ^ ~np.eye(len(nb), dtype=bool)
        adj[np.ix_(nb, nb)] = block
        return Graph._from_matrix(self.nodes, adj)

    def relabel(self, mapping: dict) -> "Graph":
        return Graph._from_matrix([mapping.get(a, a) for a in self.nodes], self.adj.copy())

    def reorder(self, nodes: Iterable[Label]) -> "Graph":
        nodes = list(nodes)
        if set(nodes) != set(self.nodes) or len(nodes) != len(self.nodes):
            raise ValueError("reorder needs a permutation of the nodes")
        idx = [self.index(a) for a in nodes]
        return Graph._from_matrix(nodes, self.adj[np.ix_(idx, idx)].copy())


@dataclass(frozen=True)
class LocalCorrection:
    """Single-qubit correction; ``power`` only matters for ``Z`` (applied iff 1)."""

    node: Label
    op: str
    power: int = 1

    def __post_init__(self):
        if self.op not in CORRECTION_OPS:
            raise ValueError(f"unknown correction {self.op!r}")
        object.__setattr__(self, "power", int(self.power) & 1 if self.op == "Z" else 1)

    def is_trivial(self) -> bool:
        return self.op == "Z" and self.power == 0


@dataclass(frozen=True)
class GraphBasisState:
    """``Z^r |G>`` with the phase vector stored as the set of nodes where r=1."""

    graph: Graph
    phases: frozenset = frozenset()

    def __post_init__(self):
        ph = frozenset(self.phases)
        for a in ph:
            self.graph.index(a)
        object.__setattr__(self, "phases", ph)

    @classmethod
    def from_edges(cls, nodes, edges, phases=()) -> "GraphBasisState":
        return cls(Graph(nodes, edges), frozenset(phases))

    def r(self, a: Label) -> int:
        self.graph.index(a)
        return int(a in self.phases)

    def r_vector(self) -> np.ndarray:
        return np.array([self.r(a) for a in self.graph.nodes], dtype=np.uint8)

    def flip(self, nodes: Iterable[Label], bit: int = 1) -> "GraphBasisState":
        """Toggle r on ``nodes`` when ``bit`` is 1."""
        if not bit:
            return self
        ph = set(self.phases)
        for a in nodes:
            self.graph.index(a)
            ph ^= {a}
        return GraphBasisState(self.graph, frozenset(ph))

    def with_graph(self, graph: Graph) -> "GraphBasisState":
        return GraphBasisState(graph, frozenset(a for a in self.phases if a in graph))

    def __eq__(self, other) -> bool:
        return (isinstance(other, GraphBasisState) and self.graph == other.graph
                and self.phases == other.phases)

    def __hash__(self):
        return hash((self.graph, self.phases))


# --------------------------------------------------------------- tableau link
def circuit_from_graph(g: Graph | GraphBasisState, seed: int | None = 0,
                       backend: str | None = None) -> StabilizerState:
    """``Z^r U_G |+>^V`` on qubits ordered as ``g.nodes`` (one CZ per edge)."""
    state = g if isinstance(g, GraphBasisState) else GraphBasisState(g)
    graph = state.graph
    tab = StabilizerState(len(graph), "all-plus", seed=seed, backend=backend)
    for u, v in graph.edges():
        tab.cz(graph.index(u), graph.index(v))
    for a in state.phases:
        tab.z(graph.index(a))
    return tab


def stabilizer_generators(s: GraphBasisState | Graph) -> list[PauliTerm]:
    """``(-1)^{r_a} X_a prod_{b in N_a} Z_b`` for every node, in node order."""
    s = s if isinstance(s, GraphBasisState) else GraphBasisState(s)
    g = s.graph
    n = len(g)
    out = []
    for i, a in enumerate(g.nodes):
        x = np.zeros(n, bool)
        x[i] = True
        out.append(PauliTerm(x, g.adj[i].copy(), -1 if a in s.phases else 1))
    return out


def apply_corrections(tab: StabilizerState, corrections: Iterable[LocalCorrection],
                      qubit_of: dict | None = None) -> StabilizerState:
    """Apply corrections in order; ``qubit_of`` maps labels to tableau qubits."""
    for c in corrections:
        if c.is_trivial():
            continue
        q = c.node if qubit_of is None else qubit_of[c.node]
        tab.apply(c.op, q)
    return tab


# ----------------------------------------------------------- symbolic rules
def local_complement(s: GraphBasisState, a: Label) -> tuple[GraphBasisState, list[LocalCorrection]]:
    """Local complementation at ``a``.

    The corrections are the rotations that carry ``Z^r|G>`` to the returned
    ``Z^{r'}|tau_a(G)>``: ``(-iX_a)^{1/2}`` and ``(iZ_b)^{1/2}`` on each
    neighbour. A set phase bit on ``a`` spreads to its neighbours.
    """
    g = s.graph
    nb = g.neighbors(a)
    corr = [LocalCorrection(a, "SqrtX_pos")] + [LocalCorrection(b, "SqrtZ_pos") for b in nb]
    out = GraphBasisState(g.local_complement(a), s.phases).flip(nb, s.r(a))
    return out, corr


def measure_graph_Z(s: GraphBasisState, a: Label, m: int) -> tuple[GraphBasisState, list[LocalCorrection]]:
    """Z measurement on ``a`` with outcome ``m``: node removed, Z^m byproducts on N_a."""
    g = s.graph
    corr = [LocalCorrection(b, "Z", m) for b in g.neighbors(a)]
    return s.with_graph(g.remove(a)), corr


def measure_graph_Y(s: GraphBasisState, a: Label, m: int,
                    absorb: bool = False) -> tuple[GraphBasisState, list[LocalCorrection]]:
    """Y measurement on ``a`` with outcome ``m``.

    The raw post-measurement state is
    ``prod_b (-iZ_b)^{1/2} Z_b^{r_a+m} Z^{r-a} |tau_a(G)-a>``. By default the
    corrections undo both factors, returning ``Z^{r-a}|tau_a(G)-a>``. With
    ``absorb`` only the rotation back to graph basis is listed and the bit
    ``r_a+m`` is kept in the phases of the neighbours.
    """
    g = s.graph
    nb = g.neighbors(a)
    t = (s.r(a) + int(m)) & 1
    out = s.with_graph(g.local_complement(a).remove(a))
    if absorb:
        return out.flip(nb, t), [LocalCorrection(b, "SqrtZ_pos") for b in nb]
    corr = []
    for b in nb:
        corr += [LocalCorrection(b, "Z", t), LocalCorrection(b, "SqrtZ_pos")]
    return out, corr


def chain_survivor(g: Graph, chain: list) -> Label:
    """Validate a measurement chain and return the node it feeds into."""
    if not chain:
        raise ValueError("empty chain")
    if len(set(chain)) != len(chain):
        raise ValueError("repeated node in chain")
    for a in chain:
        g.index(a)
    if g.degree(chain[0]) != 1:
        raise ValueError(f"chain must start at a leaf, {chain[0]!r} has degree {g.degree(chain[0])}")
    prev = None
    for k, a in enumerate(chain):
        nb = [b for b in g.neighbors(a) if b != prev]
        if len(nb) != 1:
            raise ValueError(f"chain node {a!r} is not on a path")
        nxt = nb[0]
        if k + 1 < len(chain) and nxt != chain[k + 1]:
            raise ValueError(f"{chain[k + 1]!r} does not follow {a!r} along the path")
        prev = a
    if nxt in chain:
        raise ValueError("chain closes on itself")
    return nxt


def transmit_chain(s: GraphBasisState, chain: list, outcomes: list[int]):
    """Measure Y on ``chain[0]`` and -X on the rest, feeding the next node.

    Returns ``(state, omega, corrections)``. The raw result is
    ``(-iZ_c)^{1/2} Z_c^omega Z^{r-chain} |G-chain>`` on survivor ``c``; the
    corrections strip the rotation and the pad, leaving the returned state.
    """
    if len(outcomes) != len(chain):
        raise ValueError("one outcome per chain node required")
    survivor = chain_survivor(s.graph, list(chain))
    omega = sum(s.r(a) + int(m) for a, m in zip(chain, outcomes)) & 1
    out = s.with_graph(s.graph.remove(*chain))
    corr = [LocalCorrection(survivor, "Z", omega), LocalCorrection(survivor, "SqrtZ_pos")]
    return out, omega, corr


def chain_observables(s: GraphBasisState, chain: list) -> list[tuple[Label, str, int]]:
    """The (node, letter, sign) sequence measured by :func:`transmit_chain`."""
    chain_survivor(s.graph, list(chain))
    return [(chain[0], "Y", 1)] + [(a, "X", -1) for a in chain[1:]]


def fork_measure(s: GraphBasisState, a: Label, b: Label, basis: str, m_a: int, m_b: int) -> GraphBasisState:
    """Joint YY or ZZ measurement of two leaves hanging off one node ``c``."""
    g = s.graph
    if a == b:
        raise ValueError("fork needs two distinct leaves")
    na, nb = g.neighbors(a), g.neighbors(b)
    if len(na) != 1 or na != nb:
        raise ValueError("a and b must be leaves sharing a single neighbour")
    c = na[0]
    if basis == "YY":
        bit = s.r(a) + s.r(b) + 1 + m_a + m_b
    elif basis == "ZZ":
        bit = m_a + m_b
    else:
        raise ValueError(f"basis must be 'YY' or 'ZZ', got {basis!r}")
    return s.with_graph(g.remove(a, b)).flip([c], bit & 1)


def absorb_frame(s: GraphBasisState, corrections: Iterable[LocalCorrection]) -> GraphBasisState:
    """Fold pure Z byproducts into the phase vector (other ops are rejected)."""
    for c in corrections:
        if c.op != "Z":
            raise ValueError(f"cannot absorb {c.op} into a phase vector")
        s = s.flip([c.node], c.power)
    return s


# ------------------------------------------------------------ serialization
def _token(text: str):
    return int(text) if text.lstrip("-").isdigit() else text


def dumps(s: GraphBasisState | Graph) -> str:
    """Edge-list text: ``nodes:`` line, one ``a b`` pair per line, ``phases:`` line."""
    s = s if isinstance(s, GraphBasisState) else GraphBasisState(s)
    g = s.graph
    lines = ["nodes: " + " ".join(str(a) for a in g.nodes)]
    lines += [f"{u} {v}" for u, v in g.edges()]
    lines.append("phases: " + " ".join(str(a) for a in g.nodes if a in s.phases))
    return "\n".join(line.rstrip() for line in lines) + "\n"


def loads(text: str) -> GraphBasisState:
    nodes = None
    edges = []
    phases = []
    seen_phases = False
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if line.startswith("nodes:"):
            nodes = [_token(t) for t in line[6:].split()]
        elif line.startswith("phases:"):
            phases = [_token(t) for t in line[7:].split()]
            seen_phases = True
        else:
            parts = line.split()
            if len(parts) != 2:
                raise ValueError(f"line {lineno}: expected 'a b', got {raw!r}")
            edges.append((_token(parts[0]), _token(parts[1])))
    if not seen_phases:
        raise ValueError("missing 'phases:' line")
    if nodes is None:
        nodes = []
        for e in edges:
            for a in e:
                if a not in nodes:
                    nodes.append(a)
        nodes += [a for a in phases if a not in nodes]
    return GraphBasisState(Graph(nodes, edges), frozenset(phases))
