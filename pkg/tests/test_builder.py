import itertools

import numpy as np
import pytest

from graphstate_forge.builder import (
    BuildLog, BuildSystem, G_state, HeraldModel, build_G, pass_photon, relabeled_state,
    target_graph,
)
from graphstate_forge.graph import Graph, GraphBasisState, circuit_from_graph
from graphstate_forge.pauli import PauliTerm
from graphstate_forge.tableau import ProtocolError, states_equal

from helpers import random_graph

SURE = HeraldModel(1.0)


def prior_system(n, rng, backend=None):
    """Random Z^r|G> on s plus n-1 photons."""
    g = random_graph(n, rng, 0.5)
    labels = ["s"] + [f"k{i}" for i in range(1, n)]
    g = Graph(labels, [(labels[u], labels[v]) for u, v in g.edges])
    phases = [a for a in labels if rng.integers(2)]
    return BuildSystem.from_graph_state(GraphBasisState(g, frozenset(phases)), ["s"],
                                        seed=int(rng.integers(2 ** 31)), backend=backend)


def non_emitter_state(sys):
    return sys.tableau.subsystem([sys.q(a) for a in sys.live_labels()])


class TestHeraldModel:
    @pytest.mark.parametrize("p", [0.0, -0.1, 1.5])
    def test_rejects_bad_probability(self, p):
        with pytest.raises(ValueError):
            HeraldModel(p)


class TestAttemptEmit:
    def test_deterministic_success(self):
        sys = BuildSystem(())
        ok, label = sys.attempt_emit(SURE)
        assert ok and label == "p1"
        n = sys.tableau.n
        assert sys.tableau.expectation(PauliTerm.from_ops(n, {0: "X", 1: "X"})) == 1
        assert sys.tableau.expectation(PauliTerm.from_ops(n, {0: "Z", 1: "Z"})) == 1
        assert sys.log.attempts == 1 and sys.pending == "p1"

    def test_busy_emitter(self):
        sys = BuildSystem(())
        sys.attempt_emit(SURE)
        with pytest.raises(ProtocolError):
            sys.attempt_emit(SURE)

    def test_mean_attempts_geometric(self):
        herald = HeraldModel(0.5)
        counts = []
        for seed in range(10_000):
            sys = BuildSystem((), seed=seed, verify=False)
            sys.emit_until_success(herald)
            counts.append(sys.log.attempts)
        counts = np.array(counts)
        sigma = np.sqrt((1 - 0.5) / 0.5 ** 2 / len(counts))
        assert abs(counts.mean() - 2.0) < 3 * sigma

    @pytest.mark.parametrize("seed", range(8))
    def test_failure_leaves_graph_untouched(self, seed, backend):
        rng = np.random.default_rng(seed)
        sys = prior_system(5, rng, backend)
        before = non_emitter_state(sys)
        fails = 0
        while fails < 3:
            ok, _ = sys.attempt_emit(HeraldModel(0.3))
            if ok:
                sys.pass_photon("s", "join")
                before = non_emitter_state(sys)
            else:
                fails += 1
                assert states_equal(before, non_emitter_state(sys))
                assert sys.emitter_isolated()


class TestAddPhoton:
    @pytest.mark.parametrize("c", [0, 1])
    def test_fresh_spin_gives_two_qubit_graph(self, c):
        sys = BuildSystem(("s",))
        _, p = sys.attempt_emit(SURE)
        assert sys.add_photon_to_spin("s", p, forced=c) == c
        assert sys.check()
        assert sys.graph.graph.edge_set() == {frozenset(("s", p))}
        assert sys.log.cz_count == 1

    @pytest.mark.parametrize("seed", range(6))
    def test_c_zero_equals_direct_pumping(self, seed, backend):
        rng = np.random.default_rng(seed)
        sys = prior_system(int(rng.integers(1, 6)), rng, backend)
        direct = non_emitter_state(sys)
        _, p = sys.attempt_emit(SURE)
        sys.add_photon_to_spin("s", p, forced=0)
        (qp,) = direct.append_qubits(1)
        direct.cx(sys.graph.graph.nodes.index("s"), qp)
        assert states_equal(non_emitter_state(sys), direct)

    @pytest.mark.parametrize("seed", range(10))
    @pytest.mark.parametrize("c", [0, 1])
    def test_post_add_generators_both_branches(self, seed, c, backend):
        # the verify flag raises inside add_photon_to_spin on any sign mismatch
        rng = np.random.default_rng(seed)
        sys = prior_system(int(rng.integers(1, 7)), rng, backend)
        _, p = sys.attempt_emit(SURE)
        sys.add_photon_to_spin("s", p, forced=c)
        assert sys.check()

    def test_role_and_order_errors(self):
        sys = BuildSystem(("s",))
        with pytest.raises(ProtocolError):
            sys.pass_photon("s")
        _, p = sys.attempt_emit(SURE)
        with pytest.raises(ValueError):
            sys.add_photon_to_spin(p, p)
        with pytest.raises(ValueError):
            sys.add_photon_to_spin("e", p)


class TestPass:
    def test_extend_three_gives_chain(self):
        sys = BuildSystem(("s",), verify=True)
        for _ in range(3):
            pass_photon(sys, "s", "extend", SURE)
        assert sys.check()
        assert sys.graph.graph == Graph(["p1", "p2", "p3", "s"], [("p1", "p2"), ("p2", "p3"), ("p3", "s")])

    def test_join_three_gives_star(self):
        sys = BuildSystem(("s",), verify=True)
        for _ in range(3):
            pass_photon(sys, "s", "join", SURE)
        assert sys.check()
        assert sys.graph.graph == Graph(["s", "p1", "p2", "p3"], [("s", "p1"), ("s", "p2"), ("s", "p3")])

    @pytest.mark.parametrize("bits", list(itertools.product([0, 1], repeat=3)))
    def test_join_then_extend_branches(self, bits, backend):
        sys = BuildSystem(("s",), backend=backend)
        for variant, c in zip(["join", "extend", "join"], bits):
            pass_photon(sys, "s", variant, SURE, forced=c)
            assert sys.check()
        assert sys.graph.graph.edge_set() == {
            frozenset(e) for e in [("p1", "p2"), ("p2", "s"), ("s", "p3")]
        }
        assert [b for _, b in sys.byproducts] == list(bits)

    @pytest.mark.parametrize("seed", range(8))
    @pytest.mark.parametrize("variant", ["join", "extend"])
    def test_random_prior(self, seed, variant, backend):
        rng = np.random.default_rng(seed)
        sys = prior_system(int(rng.integers(2, 7)), rng, backend)
        nb = set(sys.graph.graph.neighbors("s"))
        pass_photon(sys, "s", variant, SURE)
        assert sys.check()
        g = sys.graph.graph
        p = sys.photons()[-1]
        if variant == "join":
            assert set(g.neighbors("s")) == nb | {p}
        else:
            assert set(g.neighbors("s")) == {p}
            assert set(g.neighbors(p)) == nb | {"s"}

    def test_bad_variant(self):
        sys = BuildSystem(("s",))
        sys.attempt_emit(SURE)
        with pytest.raises(ValueError):
            sys.pass_photon("s", "graft")


class TestPatch:
    def test_two_single_photon_subgraphs(self):
        sys = BuildSystem(("s1", "s2"), verify=True)
        pass_photon(sys, "s1", "join", SURE)
        pass_photon(sys, "s2", "join", SURE)
        sys.patch("s1", "s2", designated=("p1", "p2"))
        assert sys.check()
        assert sys.graph.graph.has_edge("p1", "p2")
        assert sys.log.patch_cz == 4 and sys.log.cz_count == 6
        sys.measure_out("s1")
        sys.measure_out("s2")
        assert sys.graph.graph == Graph(["p1", "p2"], [("p1", "p2")])
        assert states_equal(sys.photon_state(), circuit_from_graph(Graph(["p1", "p2"], [("p1", "p2")])))

    @pytest.mark.parametrize("seed", range(6))
    def test_two_by_two_cell(self, seed, backend):
        sys = BuildSystem(("s1", "s2"), seed=seed, backend=backend)
        for spin in ("s1", "s1", "s2", "s2"):
            pass_photon(sys, spin, "join", SURE)
        sys.patch("s1", "s2")
        sys.measure_out("s1")
        sys.measure_out("s2")
        cycle = Graph(["p1", "p2", "p3", "p4"], [("p1", "p3"), ("p3", "p2"), ("p2", "p4"), ("p4", "p1")])
        assert sys.graph.graph == cycle
        assert states_equal(sys.photon_state(), circuit_from_graph(cycle, backend=backend))

    def test_preconditions(self):
        sys = BuildSystem(("s1", "s2"))
        pass_photon(sys, "s1", "join", SURE)
        with pytest.raises(ValueError):
            sys.patch("s1", "s2")
        pass_photon(sys, "s2", "join", SURE)
        with pytest.raises(ValueError):
            sys.patch("s1", "s2", designated=("p2", "p1"))
        with pytest.raises(ValueError):
            sys.patch("s1", "s1")


class TestBuildG:
    @pytest.mark.parametrize("seed", range(6))
    def test_target_state(self, seed, backend):
        sys, log = build_G(seed=seed, backend=backend, verify=True)
        assert relabeled_state(sys).graph == target_graph()
        assert states_equal(G_state(sys), circuit_from_graph(target_graph(), backend=backend))

    def test_uncorrected_state_carries_published_phases(self):
        sys, _ = build_G(seed=3)
        got = relabeled_state(sys)
        want = GraphBasisState(got.graph.reorder(range(1, 13)), got.phases)
        assert states_equal(G_state(sys, correct=False), circuit_from_graph(want))

    def test_gate_tally(self):
        _, log = build_G(seed=1)
        assert (log.cz_count, log.pass_cz, log.patch_cz) == (17, 13, 4)
        assert (log.pass_count, log.patch_count) == (13, 1)
        assert log.elapsed_cycles == 12 and log.attempts == 12

    def test_permutation_recorded(self):
        _, log = build_G(seed=0)
        assert sorted(log.permutation.values()) == list(range(1, 13))
        assert log.permutation["p4"] == 12

    def test_byproducts_published(self):
        sys, log = build_G(seed=2)
        adds = [e for e in log.events if e[0] == "add"]
        assert len(adds) == len(sys.byproducts) == 12

    def test_expected_elapsed_time(self):
        herald = HeraldModel(0.5, t_rep=1.0, t_add=0.25)
        elapsed = np.array([build_G(herald, seed=s)[1].elapsed_cycles for s in range(300)])
        want = 12 / 0.5 + 12 * 0.25
        sigma = np.sqrt(12 * 0.5 / 0.25) / np.sqrt(len(elapsed))
        assert abs(elapsed.mean() - want) < 4 * sigma
        assert np.all(elapsed >= 12)

    def test_log_round_trip(self):
        _, log = build_G(HeraldModel(0.7), seed=5)
        text = log.to_text()
        back = BuildLog.from_text(text)
        assert back.to_text() == text
        assert back.attempts >= 12

    def test_log_rejects_garbage(self):
        with pytest.raises(ValueError):
            BuildLog.from_text("frobnicate 3\n")
