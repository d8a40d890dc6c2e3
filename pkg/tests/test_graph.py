import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from graphstate_forge.graph import (
    Graph, GraphBasisState, LocalCorrection, absorb_frame, apply_corrections,
    chain_observables, circuit_from_graph, dumps, fork_measure, loads, local_complement,
    measure_graph_Y, measure_graph_Z, stabilizer_generators, transmit_chain,
)
from graphstate_forge.pauli import PauliTerm
from graphstate_forge.tableau import states_equal

from helpers import measured_then_corrected, path_with_tail, random_graph, random_state


class TestGraph:
    def test_neighbors_and_edges(self):
        g = Graph("abcd", [("a", "b"), ("b", "c"), ("d", "b")])
        assert g.neighbors("b") == ("a", "c", "d")
        assert g.degree("b") == 3
        assert g.edges() == [("a", "b"), ("b", "c"), ("b", "d")]

    def test_unknown_node_and_self_loop(self):
        with pytest.raises(ValueError):
            Graph([1, 2], [(1, 3)])
        with pytest.raises(ValueError):
            Graph([1, 2], [(1, 1)])
        with pytest.raises(ValueError):
            Graph([1, 1])

    def test_local_complement_star_to_complete(self):
        g = Graph(range(5), [(0, k) for k in range(1, 5)])
        lc = g.local_complement(0)
        assert lc.degree(0) == 4
        assert all(lc.has_edge(u, v) for u in range(1, 5) for v in range(u + 1, 5))
        assert lc.local_complement(0) == g

    @pytest.mark.parametrize("seed", range(10))
    def test_local_complement_matches_networkx(self, seed):
        rng = np.random.default_rng(seed)
        ng = random_graph(8, rng, 0.4)
        a = int(rng.integers(8))
        g = Graph(list(ng.nodes), ng.edges)
        want = ng.copy()
        nb = list(ng.neighbors(a))
        for i, u in enumerate(nb):
            for v in nb[i + 1:]:
                if want.has_edge(u, v):
                    want.remove_edge(u, v)
                else:
                    want.add_edge(u, v)
        assert g.local_complement(a).edge_set() == {frozenset(e) for e in want.edges}

    def test_value_semantics(self):
        g = Graph([1, 2, 3], [(1, 2)])
        g.toggle_edge(2, 3)
        g.remove(1)
        g.add_node(4)
        assert g.edges() == [(1, 2)] and len(g) == 3

    def test_equality_ignores_order(self):
        assert Graph([1, 2, 3], [(1, 2)]) == Graph([3, 2, 1], [(2, 1)])
        assert Graph([1, 2, 3], [(1, 2)]).reorder([3, 1, 2]).nodes == (3, 1, 2)


class TestCircuit:
    def test_triangle_generators(self):
        s = GraphBasisState.from_edges([0, 1, 2], [(0, 1), (1, 2), (0, 2)], phases=[1])
        gens = [str(p) for p in stabilizer_generators(s)]
        assert gens == ["+XZZ", "-ZXZ", "+ZZX"]

    @pytest.mark.parametrize("seed", range(12))
    def test_generators_stabilize_circuit(self, seed, backend):
        rng = np.random.default_rng(seed)
        s = random_state(int(rng.integers(2, 11)), rng)
        tab = circuit_from_graph(s, backend=backend)
        for p in stabilizer_generators(s):
            assert tab.expectation(p) == 1

    def test_dense_amplitudes(self):
        # |G> amplitudes are (-1)^{# edges inside the 1-set} / sqrt(2^n)
        s = GraphBasisState.from_edges(range(4), [(0, 1), (1, 2), (2, 3), (3, 0)])
        vec = circuit_from_graph(s).to_statevector()
        vec = vec / vec[0] * abs(vec[0])
        for idx in range(16):
            bits = [(idx >> (3 - q)) & 1 for q in range(4)]
            sgn = (-1) ** sum(bits[u] & bits[v] for u, v in s.graph.edges())
            assert np.isclose(vec[idx], sgn / 4)


class TestRules:
    @pytest.mark.parametrize("seed", range(25))
    def test_local_complement(self, seed, backend):
        rng = np.random.default_rng(seed)
        s = random_state(int(rng.integers(2, 9)), rng)
        a = s.graph.nodes[int(rng.integers(len(s.graph)))]
        out, corr = local_complement(s, a)
        tab = circuit_from_graph(s, backend=backend)
        apply_corrections(tab, corr, {x: i for i, x in enumerate(s.graph.nodes)})
        assert states_equal(tab, circuit_from_graph(out, backend=backend))

    @pytest.mark.parametrize("seed", range(25))
    @pytest.mark.parametrize("m", [0, 1])
    def test_measure_z(self, seed, m, backend):
        rng = np.random.default_rng(seed)
        s = random_state(int(rng.integers(2, 9)), rng)
        a = s.graph.nodes[int(rng.integers(len(s.graph)))]
        out, corr = measure_graph_Z(s, a, m)
        got = measured_then_corrected(s, a, "Z", m, corr, backend=backend)
        assert states_equal(got, circuit_from_graph(out, backend=backend))

    @pytest.mark.parametrize("seed", range(25))
    @pytest.mark.parametrize("m", [0, 1])
    @pytest.mark.parametrize("absorb", [False, True])
    def test_measure_y(self, seed, m, absorb, backend):
        rng = np.random.default_rng(seed)
        s = random_state(int(rng.integers(2, 9)), rng)
        a = s.graph.nodes[int(rng.integers(len(s.graph)))]
        out, corr = measure_graph_Y(s, a, m, absorb=absorb)
        got = measured_then_corrected(s, a, "Y", m, corr, backend=backend)
        assert states_equal(got, circuit_from_graph(out, backend=backend))

    def test_measure_y_leaf_keeps_graph(self):
        s = GraphBasisState.from_edges([0, 1, 2], [(0, 1), (1, 2)])
        out, _ = measure_graph_Y(s, 0, 1)
        assert out.graph == Graph([1, 2], [(1, 2)])

    def test_absorb_frame(self):
        s = GraphBasisState.from_edges([0, 1], [(0, 1)])
        assert absorb_frame(s, [LocalCorrection(1, "Z", 1)]).phases == {1}
        with pytest.raises(ValueError):
            absorb_frame(s, [LocalCorrection(1, "SqrtZ_pos")])

    def test_correction_rejects_unknown_op(self):
        with pytest.raises(ValueError):
            LocalCorrection(0, "T")


class TestChain:
    @pytest.mark.parametrize("seed", range(20))
    def test_transmit_chain(self, seed, backend):
        rng = np.random.default_rng(seed)
        length = int(rng.integers(1, 6))
        s = path_with_tail(rng, length, int(rng.integers(0, 4)))
        chain = list(range(length))
        outcomes = [int(v) for v in rng.integers(0, 2, length)]
        out, omega, corr = transmit_chain(s, chain, outcomes)
        assert omega == sum(s.r(a) + m for a, m in zip(chain, outcomes)) % 2
        tab = circuit_from_graph(s, backend=backend)
        for (a, letter, sign), m in zip(chain_observables(s, chain), outcomes):
            tab.measure(PauliTerm.from_ops(tab.n, {a: letter}, sign), forced=m)
        apply_corrections(tab, corr)
        got = tab.subsystem(list(range(length, tab.n)))
        want = GraphBasisState(out.graph.reorder(range(length, tab.n)), out.phases)
        assert states_equal(got, circuit_from_graph(want, backend=backend))

    def test_chain_validation(self):
        s = GraphBasisState.from_edges(range(4), [(0, 1), (1, 2), (2, 3), (1, 3)])
        with pytest.raises(ValueError):
            transmit_chain(s, [1, 2], [0, 0])
        with pytest.raises(ValueError):
            transmit_chain(s, [0, 1], [0, 0])
        with pytest.raises(ValueError):
            transmit_chain(s, [0], [0, 1])


class TestFork:
    @pytest.mark.parametrize("basis", ["YY", "ZZ"])
    @pytest.mark.parametrize("seed", range(12))
    def test_fork(self, basis, seed, backend):
        rng = np.random.default_rng(seed)
        extra = int(rng.integers(0, 4))
        nodes = list(range(3 + extra))
        edges = [(0, 2), (1, 2)] + [(2, k) for k in range(3, 3 + extra) if rng.random() < 0.7]
        edges += [(u, v) for u in range(3, 3 + extra) for v in range(u + 1, 3 + extra) if rng.random() < 0.5]
        s = GraphBasisState.from_edges(nodes, edges, [a for a in nodes if rng.integers(2)])
        ma, mb = (int(v) for v in rng.integers(0, 2, 2))
        out = fork_measure(s, 0, 1, basis, ma, mb)
        tab = circuit_from_graph(s, backend=backend)
        letter = basis[0]
        tab.measure(PauliTerm.from_ops(tab.n, {0: letter}), forced=ma)
        tab.measure(PauliTerm.from_ops(tab.n, {1: letter}), forced=mb)
        got = tab.subsystem(nodes[2:])
        assert states_equal(got, circuit_from_graph(out, backend=backend))

    def test_fork_requires_shared_leaves(self):
        s = GraphBasisState.from_edges(range(4), [(0, 2), (1, 3)])
        with pytest.raises(ValueError):
            fork_measure(s, 0, 1, "YY", 0, 0)
        with pytest.raises(ValueError):
            fork_measure(GraphBasisState.from_edges(range(3), [(0, 2), (1, 2)]), 0, 1, "XX", 0, 0)


class TestSerialization:
    def test_format(self):
        s = GraphBasisState.from_edges(["s1", 1, 2], [("s1", 1), (1, 2)], phases=[2])
        assert dumps(s) == "nodes: s1 1 2\ns1 1\n1 2\nphases: 2\n"

    @settings(max_examples=60, deadline=None)
    @given(st.integers(1, 9), st.integers(0, 2 ** 32 - 1))
    def test_round_trip(self, n, seed):
        rng = np.random.default_rng(seed)
        s = random_state(n, rng, labels=[f"q{k}" if k % 3 == 0 else k for k in range(n)])
        text = dumps(s)
        back = loads(text)
        assert back == s and back.graph.nodes == s.graph.nodes
        assert dumps(back) == text

    def test_nodes_line_optional(self):
        s = loads("1 2\n2 3\nphases: 3 4\n")
        assert s.graph.nodes == (1, 2, 3, 4) and s.phases == {3, 4}

    def test_errors(self):
        with pytest.raises(ValueError):
            loads("1 2\n")
        with pytest.raises(ValueError):
            loads("1 2 3\nphases:\n")
