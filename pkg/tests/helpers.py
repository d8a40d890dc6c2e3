"""Shared test utilities: random circuits and graphs, dense and tableau oracles."""

import networkx as nx

from graphstate_forge.dense import DenseState, equal_up_to_phase
from graphstate_forge.graph import Graph, GraphBasisState, apply_corrections, circuit_from_graph
from graphstate_forge.pauli import PauliTerm
from graphstate_forge.tableau import new_state, to_statevector

ONE_Q = ["H", "S", "S_dag", "X", "Y", "Z", "SqrtX_pos", "SqrtX_neg", "SqrtZ_pos", "SqrtZ_neg"]
TWO_Q = ["CZ", "CX"]


def random_pauli(n, rng, max_weight=None):
    w = n if max_weight is None else max_weight
    while True:
        qs = rng.choice(n, size=rng.integers(1, w + 1), replace=False)
        ops = {int(q): "XYZ"[rng.integers(3)] for q in qs}
        if ops:
            return PauliTerm.from_ops(n, ops, sign=int(rng.choice([1, -1])))


def random_circuit(n, length, rng, p_measure=0.2):
    """List of ("gate", kind, targets) or ("measure", PauliTerm) steps."""
    ops = []
    for _ in range(length):
        u = rng.random()
        if u < p_measure:
            ops.append(("measure", random_pauli(n, rng, max_weight=min(n, 3))))
        elif n > 1 and u < p_measure + 0.35:
            a, b = rng.choice(n, size=2, replace=False)
            ops.append(("gate", TWO_Q[rng.integers(2)], (int(a), int(b))))
        else:
            ops.append(("gate", ONE_Q[rng.integers(len(ONE_Q))], (int(rng.integers(n)),)))
    return ops


def random_graph(n, rng, p=0.4, labels=None):
    g = nx.gnp_random_graph(n, p, seed=int(rng.integers(2**31)))
    if labels is not None:
        g = nx.relabel_nodes(g, dict(enumerate(labels)))
    return g


def random_state(n, rng, p=0.5, labels=None):
    g = random_graph(n, rng, p, labels=labels)
    nodes = list(g.nodes)
    phases = [a for a in nodes if rng.integers(2)]
    return GraphBasisState(Graph(nodes, g.edges), frozenset(phases))


def measured_then_corrected(s, node, letter, m, corrections, sign=1, backend=None):
    """Tableau for s, measure node with forced m, apply corrections, drop node."""
    tab = circuit_from_graph(s, backend=backend)
    idx = {a: i for i, a in enumerate(s.graph.nodes)}
    obs = PauliTerm.from_ops(tab.n, {idx[node]: letter}, sign)
    tab.measure(obs, forced=m)
    apply_corrections(tab, corrections, idx)
    keep = [idx[a] for a in s.graph.nodes if a != node]
    return tab.subsystem(keep)


def path_with_tail(rng, length, extra):
    """Path 0..length-1 ending at node `length`, plus random extra nodes on the end."""
    nodes = list(range(length + 1 + extra))
    edges = [(k, k + 1) for k in range(length)]
    rest = nodes[length:]
    for i, u in enumerate(rest):
        for v in rest[i + 1:]:
            if rng.random() < 0.5:
                edges.append((u, v))
    phases = [a for a in nodes if rng.integers(2)]
    return GraphBasisState.from_edges(nodes, edges, phases)


def run_against_dense(n, ops, backend, seed):
    """Return None on agreement or a description of the first mismatch."""
    tab = new_state(n, "all-zero", seed=seed, backend=backend)
    den = DenseState(n)
    for step in ops:
        if step[0] == "gate":
            tab.apply(step[1], *step[2])
            den.apply(step[1], *step[2])
            continue
        obs = step[1]
        p0 = den.prob_zero(obs)
        m, det = tab.measure(obs)
        if det:
            want = 1.0 if m == 0 else 0.0
            if abs(p0 - want) > 1e-9:
                return f"deterministic {obs} m={m} but dense p0={p0}"
        elif abs(p0 - 0.5) > 1e-9:
            return f"random {obs} but dense p0={p0}"
        den.project(obs, m)
        if not equal_up_to_phase(to_statevector(tab), den.vec):
            return f"post-measurement state differs after {obs}"
    if not equal_up_to_phase(to_statevector(tab), den.vec):
        return "final state differs"
    return None
