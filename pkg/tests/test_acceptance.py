"""End-to-end acceptance checks; each test prints one PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v`` or directly as a script.
"""

import itertools
import math
import sys
import time

import numpy as np
import pytest
import sympy as sp
from scipy import stats

from graphstate_forge import _backend, cli
from graphstate_forge.builder import G_state, HeraldModel, build_G, relabeled_state, target_graph
from graphstate_forge.channel import (
    HardwareParams, StabilizerEnsemble, aux_dephasing_fidelity, f_swap, fidelity_G,
    mixture_dephase_bookkeeping, p_success, p_success_derived, p_true, sample_waiting_trials,
)
from graphstate_forge.fock import FockConfig, fock_oracle
from graphstate_forge.graph import (
    GraphBasisState, apply_corrections, chain_observables, circuit_from_graph, fork_measure,
    local_complement, measure_graph_Y, measure_graph_Z, transmit_chain,
)
from graphstate_forge.mpc import (
    SCENARIOS, VIEW_FIELDS, BooleanFunctionSpec, NoiseAndRepetition, choose_K, exhaustive_correctness,
    ideal_simulator, is_uniform, marginal, plan_conjunctions, rate_lower_bound, simulate_output_error,
    total_variation, trace_security_stabilizers, transcript_distribution,
)
from graphstate_forge.pauli import PauliTerm
from graphstate_forge.scaling import (
    expected_build_time, max_graph_size, mc_summary, simulate_deterministic, simulate_emit_then_add,
)
from graphstate_forge.tableau import states_equal

from helpers import measured_then_corrected, path_with_tail, random_circuit, random_graph, random_state, run_against_dense



def report(capsys, number: int, title: str, ok: bool, detail: str) -> None:
    with capsys.disabled():
        print(f"\nCRITERION {number:2d} {'PASS' if ok else 'FAIL'}  {title}: {detail}")
    assert ok, detail


# ------------------------------------------------------------------ 1
def test_01_scaling(capsys):
    t0 = time.perf_counter()
    rng = np.random.default_rng(0)
    worst, sampled, skipped = 0.0, 0, 0
    anchor = None
    for eta in (0.1, 0.5, 0.9):
        mean, se = mc_summary(simulate_emit_then_add(eta, 100, 10_000, rng))
        z = np.abs(mean - np.arange(1, 101) / eta) / se
        worst, sampled = max(worst, float(z.max())), sampled + 100
        if eta == 0.1:
            anchor = (float(mean[99]), float(se[99]))
        # restart scheme: sample every n whose expected time is affordable
        ns = [n for n in range(1, 101) if expected_build_time("deterministic", n, eta) <= 2000]
        skipped += 100 - len(ns)
        mean, se = mc_summary(simulate_deterministic(eta, max(ns), 10_000, rng))
        want = np.array([expected_build_time("deterministic", n, eta) for n in ns])
        worst, sampled = max(worst, float((np.abs(mean - want) / se).max())), sampled + len(ns)
    elapsed = time.perf_counter() - t0
    anchor_ok = abs(anchor[0] - 1000.0) <= 3 * anchor[1]
    ok = worst <= 3.0 and anchor_ok and elapsed < 60
    report(capsys, 1, "build-time scaling", ok,
           f"{sampled} points within {worst:.2f} SE (max 3); emit-then-add eta=0.1 n=100 "
           f"{anchor[0]:.1f} +/- {anchor[1]:.1f}; restart points beyond 2000 expected cycles "
           f"not sampled: {skipped}; {elapsed:.1f}s")


# ------------------------------------------------------------------ 2
def test_02_cutoffs(capsys):
    n1, n2, n3 = (max_graph_size(f) for f in (0.99, 0.999, 0.9999))
    ok = n1 == 68 and 600 <= n2 <= 700 and 6900 <= n3 <= 7000
    report(capsys, 2, "fidelity cutoffs", ok, f"F_add 0.99 -> {n1}, 0.999 -> {n2}, 0.9999 -> {n3}")


# ------------------------------------------------------------------ 3
def test_03_per_copy_error(capsys):
    params = HardwareParams(F_CZ=0.99)
    err = 1 - fidelity_G(params)
    ok = params.F_add == 0.99 and math.isclose(err, 1 - 0.99 ** 17, rel_tol=1e-12) and round(err, 3) == 0.157
    report(capsys, 3, "per-copy error", ok, f"1 - F_G = {err:.6f}")


# ------------------------------------------------------------------ 4
def test_04_rate(capsys):
    r = rate_lower_bound(2, 2, 1e-3, 0.157, R0=1.0)
    text = cli.run(["rate", "--config", "/dev/null"])
    rows = [line.split(",") for line in text.splitlines() if not line.startswith("#")]
    head, body = rows[0], rows[1:]
    col = {name: i for i, name in enumerate(head)}
    monotone = True
    for eps_f in ("0.001", "1e-12"):
        curve = [(float(b[col["n_conj"]]), float(b[col["rate_in_R_rep_units"]])) for b in body if b[col["eps_f"]] == eps_f]
        curve.sort()
        monotone &= len(curve) > 1 and all(y2 < y1 for (_, y1), (_, y2) in zip(curve, curve[1:]))
    ok = r == 1.0 / 792 and monotone
    report(capsys, 4, "rate lower bound", ok, f"rate(M=2,N=2,1e-3,0.157) = 1/{1 / r:.6g}; curves decreasing in conjunctions: {monotone}")


# ------------------------------------------------------------------ 5
def test_05_swap_model(capsys):
    t0 = time.perf_counter()
    grid = np.linspace(0.1, 1.0, 5)
    worst = {"p_true": 0.0, "p_success": 0.0, "derived": 0.0}
    failing = {0.0: 0, 1e-3: 0}
    points = 0
    for ee, es, ei, xi, rd in itertools.product(grid, grid, grid, (0.01, 0.05), (0.0, 1e-3)):
        params = HardwareParams(eta_e=ee, eta_s=es, eta_i=ei, xi=xi, R_d=rd)
        res = fock_oracle(params, FockConfig(8))
        errs = (abs(p_true(params) - res.p_true) / res.p_true,
                abs(p_success(params) - res.p_success) / res.p_success)
        worst["p_true"] = max(worst["p_true"], errs[0])
        worst["p_success"] = max(worst["p_success"], errs[1])
        worst["derived"] = max(worst["derived"], abs(p_success_derived(params) - res.p_success) / res.p_success)
        failing[rd] += max(errs) > 1e-6
        points += 1
    unit = f_swap(HardwareParams(xi=0.05))
    elapsed = time.perf_counter() - t0
    ok = not any(failing.values()) and unit == 1.0 and elapsed < 300
    report(capsys, 5, "swap model vs Fock oracle", ok,
           f"{points} points; worst rel err P_t {worst['p_true']:.1e}, P_s {worst['p_success']:.1e}; "
           f"points over 1e-6 without dark counts {failing[0.0]}, with dark counts {failing[1e-3]} "
           f"(success probability rederived from the detection model: {worst['derived']:.1e}); "
           f"F_swap(ideal) = {unit}; {elapsed:.1f}s")


# ------------------------------------------------------------------ 6
def test_06_tableau_vs_dense(capsys):
    problems = []
    count = 0
    for backend in _backend.available():
        rng = np.random.default_rng(6)
        for seed in range(1000):
            n = int(rng.integers(1, 9))
            ops = random_circuit(n, int(rng.integers(5, 40)), rng)
            msg = run_against_dense(n, ops, backend, seed)
            count += 1
            if msg:
                problems.append(f"{backend}/{seed}: {msg}")
    report(capsys, 6, "tableau vs statevector", not problems,
           f"{count} circuits over {'+'.join(_backend.available())}, mismatches: {len(problems)}")


# ------------------------------------------------------------------ 7
def _fork_state(rng):
    extra = int(rng.integers(0, 6))
    nodes = list(range(3 + extra))
    edges = [(0, 2), (1, 2)] + [(2, k) for k in range(3, 3 + extra) if rng.random() < 0.7]
    edges += [(u, v) for u in range(3, 3 + extra) for v in range(u + 1, 3 + extra) if rng.random() < 0.5]
    return GraphBasisState.from_edges(nodes, edges, [a for a in nodes if rng.integers(2)])


def test_07_graph_rules(capsys):
    rng = np.random.default_rng(7)
    checks, bad = 0, []
    for i in range(1000):
        s = random_state(int(rng.integers(2, 9)), rng)
        a = s.graph.nodes[int(rng.integers(len(s.graph)))]
        for m in (0, 1):
            out, corr = measure_graph_Z(s, a, m)
            checks += 1
            if not states_equal(measured_then_corrected(s, a, "Z", m, corr), circuit_from_graph(out)):
                bad.append(("Z", i, m))
            out, corr = measure_graph_Y(s, a, m)
            checks += 1
            if not states_equal(measured_then_corrected(s, a, "Y", m, corr), circuit_from_graph(out)):
                bad.append(("Y", i, m))
        out, corr = local_complement(s, a)
        tab = circuit_from_graph(s)
        apply_corrections(tab, corr, {x: k for k, x in enumerate(s.graph.nodes)})
        checks += 1
        if not states_equal(tab, circuit_from_graph(out)):
            bad.append(("LC", i))

        length = int(rng.integers(1, 4))
        c = path_with_tail(rng, length, int(rng.integers(0, 8 - length)))
        chain = list(range(length))
        for outcomes in itertools.product((0, 1), repeat=length):
            out, omega, corr = transmit_chain(c, chain, list(outcomes))
            tab = circuit_from_graph(c)
            for (q, letter, sign), m in zip(chain_observables(c, chain), outcomes):
                tab.measure(PauliTerm.from_ops(tab.n, {q: letter}, sign), forced=m)
            apply_corrections(tab, corr)
            got = tab.subsystem(list(range(length, tab.n)))
            want = GraphBasisState(out.graph.reorder(range(length, tab.n)), out.phases)
            omega_ok = omega == sum(c.r(q) + m for q, m in zip(chain, outcomes)) % 2
            checks += 1
            if not (omega_ok and states_equal(got, circuit_from_graph(want))):
                bad.append(("chain", i, outcomes))

        f = _fork_state(rng)
        for basis in ("YY", "ZZ"):
            for ma, mb in itertools.product((0, 1), repeat=2):
                out = fork_measure(f, 0, 1, basis, ma, mb)
                tab = circuit_from_graph(f)
                tab.measure(PauliTerm.from_ops(tab.n, {0: basis[0]}), forced=ma)
                tab.measure(PauliTerm.from_ops(tab.n, {1: basis[0]}), forced=mb)
                checks += 1
                if not states_equal(tab.subsystem(f.graph.nodes[2:]), circuit_from_graph(out)):
                    bad.append(("fork", i, basis, ma, mb))
    report(capsys, 7, "graph-state rules", not bad, f"{checks} branch checks on 1000 graph sets, mismatches: {len(bad)}")


# ------------------------------------------------------------------ 8
def test_08_build(capsys):
    herald = HeraldModel(0.5)
    target = circuit_from_graph(target_graph())
    bad = []
    seeds = range(200)
    for seed in seeds:
        sys_, log = build_G(herald, seed=seed)
        same_graph = relabeled_state(sys_).graph == target_graph()
        same_state = states_equal(G_state(sys_), target)
        gates = (log.cz_count, log.pass_cz, log.patch_cz) == (17, 13, 4)
        if not (same_graph and same_state and gates):
            bad.append(seed)
    report(capsys, 8, "build of G", not bad,
           f"{len(seeds)} seeds at herald 0.5: target adjacency and state, 17 = 13 + 4 CZ; failing seeds: {bad}")


# ------------------------------------------------------------------ 9
def _random_degree2(rng):
    party_vars = [[f"v{k}_{j}" for j in range(int(rng.integers(1, 3)))] for k in range(3)]
    cross = [frozenset([u, v]) for p, q in itertools.combinations(range(3), 2)
             for u in party_vars[p] for v in party_vars[q]]
    while True:
        picks = rng.choice(len(cross), size=int(rng.integers(1, 4)), replace=False)
        terms = {cross[i] for i in picks} | {frozenset([rng.choice(vs)]) for vs in party_vars if rng.integers(2)}
        spec = BooleanFunctionSpec(party_vars, terms=tuple(terms))
        if plan_conjunctions(spec).n_conjunctions <= 3:
            return spec


def test_09_correctness(capsys):
    rng = np.random.default_rng(9)
    specs = {
        "ab": BooleanFunctionSpec.from_text("party P1 a\nparty P2 b\nand a b\n"),
        "majority": BooleanFunctionSpec.from_text("parties 3\nparty P1 x\nparty P2 y\nparty P3 z\n"
                                                  "and x y\nand x z\nand y z\n"),
    }
    specs.update({f"random{k}": _random_degree2(rng) for k in range(5)})
    parts, ok = [], True
    for name, spec in specs.items():
        rep = exhaustive_correctness(spec)
        ok &= rep.failures == 0
        parts.append(f"{name} {rep.joint_branches} branches/{rep.failures} failures")
    report(capsys, 9, "protocol correctness", ok, "; ".join(parts))


# ------------------------------------------------------------------ 10
def test_10_security_traces(capsys):
    parts, ok = [], True
    for scenario in SCENARIOS:
        as_written = trace_security_stabilizers(scenario, variant="transcribed")
        corrected = trace_security_stabilizers(scenario, variant="corrected")
        ok &= not as_written.mismatches
        parts.append(f"{scenario} {len(as_written.mismatches)}/{as_written.branches} "
                     f"branches differ as written ({len(corrected.mismatches)} after sign/letter fix)")
    report(capsys, 10, "security stabilizer traces", ok, "; ".join(parts))


# ------------------------------------------------------------------ 11
def test_11_security_distributions(capsys):
    worst_tv, non_uniform, cases = 0, [], 0
    for scenario in SCENARIOS:
        n = len(VIEW_FIELDS[scenario])
        for a, b, z_p, z_s in itertools.product((0, 1), repeat=4):
            if scenario != "honest_P_S" and z_s:
                continue
            inputs = {"a": a, "b": b, "z_P": z_p, "z_S": z_s}
            real = transcript_distribution(scenario, inputs)
            worst_tv = max(worst_tv, total_variation(real, ideal_simulator(scenario, inputs)))
            if not is_uniform(marginal(real, range(n - 1)), n - 1):
                non_uniform.append((scenario, a, b, z_p, z_s))
            cases += 1
    ok = worst_tv == 0 and not non_uniform
    report(capsys, 11, "security distributions", ok,
           f"{cases} scenario/input cases; max TV {worst_tv}; non-uniform views: {len(non_uniform)}")


# ------------------------------------------------------------------ 12
def test_12_error_correction(capsys):
    choice = choose_K(0.157, 4, 1e-3)
    trials = 100_000
    errors = simulate_output_error(4, NoiseAndRepetition(0.157, choice.K), trials, np.random.default_rng(12))
    upper = stats.beta.ppf(0.95, errors + 1, trials - errors)
    ok = upper <= 1e-3 and choice.closed_form == 36
    report(capsys, 12, "repetition error correction", ok,
           f"K = {choice.K} (closed form {choice.closed_form}); {errors}/{trials} wrong, "
           f"95% upper bound {upper:.2e}")


# ------------------------------------------------------------------ 13
def test_13_dephasing(capsys):
    a, b = sp.symbols("a b", positive=True)
    g = random_graph(5, np.random.default_rng(13), 0.5)
    ens = StabilizerEnsemble([(circuit_from_graph(GraphBasisState.from_edges(list(g.nodes), g.edges)), sp.Integer(1))])
    two, one = ens.dephase(0, a).dephase(0, b), ens.dephase(0, a * b)
    markov = len(two) == len(one) and all(sp.simplify(two.weight_of(s) - w) == 0 for s, w in one.items())

    rng = np.random.default_rng(13)
    params = HardwareParams(tau_s=20.0)
    worst = 0.0
    for r, p_s in ((1, 0.5), (4, 0.2), (12, 0.9)):
        m = sample_waiting_trials(r, p_s, 100_000, rng)
        vals = 0.5 * (1 + np.exp(-m * params.t_rep / params.tau_s))
        sem = vals.std(ddof=1) / math.sqrt(len(vals))
        worst = max(worst, abs(vals.mean() - aux_dephasing_fidelity(r, p_s, params, mcmr=False)) / sem)

    tk, tm, tau = sp.symbols("t_k t_m tau", positive=True)
    join = mixture_dephase_bookkeeping([("join", tk), ("join", tm)], tau, exp=sp.exp)
    ext = mixture_dephase_bookkeeping([("join", tk), ("extend", tm)], tau, exp=sp.exp)
    mixture = (sp.simplify(join.fidelity - (1 + sp.exp(-(tk + tm) / tau)) / 2) == 0
               and sp.simplify(ext.fidelity - (1 + sp.exp(-tk / tau)) * (1 + sp.exp(-tm / tau)) / 4) == 0)
    ok = markov and worst <= 3 and mixture
    report(capsys, 13, "dephasing models", ok,
           f"composition exact: {markov}; waiting-time Monte Carlo within {worst:.2f} sigma; "
           f"join/extend factors symbolic: {mixture}")


# ------------------------------------------------------------------ 14
def test_14_reproducibility(capsys, tmp_path):
    differing = []
    for command in sorted(cli.COMMANDS):
        outs = []
        for k in range(2):
            path = tmp_path / f"{command}-{k}.csv"
            cli.main([command, "--seed", "14", "--trials", "2000", "--out", str(path)])
            outs.append(path.read_bytes())
        if outs[0] != outs[1] or not outs[0]:
            differing.append(command)
    report(capsys, 14, "byte-identical CSV", not differing,
           f"{len(cli.COMMANDS)} commands run twice, differing: {differing or 'none'}")


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q"]))
