"""Two-stage secure computation of degree-two Boolean functions on copies of |G>.

Stage I measures Pauli observables on a 12-qubit graph-state copy per
conjunction, leaving Alice, Bob and the Referee with additive shares of
``a*b``. Stage II opens padded bits and sums the shares. All bit arithmetic
uses ``^`` and ``&`` so the Stage II fold accepts plain ints or numpy arrays
of branch outcomes alike.
"""

from __future__ import annotations

import csv
import io
import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterable, Mapping

import numpy as np

from .builder import G_state, HeraldModel, build_G, relabeled_state, target_graph
from .graph import circuit_from_graph
from .pauli import PauliTerm
from .tableau import ProtocolError, StabilizerState

N_QUBITS = 12
ROLES = ("A", "B", "R")
QUBIT_OWNER = {1: "B", 2: "A", 3: "R", 4: "A", 5: "A", 6: "B",
               7: "R", 8: "B", 9: "R", 10: "B", 11: "A", 12: "R"}
# (role, qubit, basis) of the unconditional steps
EARLY_STEPS = {
    1: (("B", 1, "Z"), ("A", 5, "Z")),
    2: (("A", 2, "X"), ("B", 6, "X"), ("R", 9, "X")),
    3: (("R", 3, "Z"), ("R", 7, "Z"), ("B", 10, "Z")),
}
MAX_BRANCHES = 2 ** 20


class UnsupportedFunctionError(ValueError):
    """A grouped conjunction spans more than two parties."""


class IncompleteTranscriptError(ValueError):
    """A Stage II quantity needs an outcome that was never recorded."""


class UncorrectableError(ValueError):
    """Per-copy error rate at or above one half."""


class CorrectnessError(AssertionError):
    """The Stage II output disagrees with the function value."""


class BranchCapacityError(RuntimeError):
    """Outcome-tree enumeration exceeded its branch budget."""


# ----------------------------------------------------------------- functions
@dataclass(frozen=True)
class BooleanFunctionSpec:
    """Boolean function of N parties' private bits.

    Parameters
    ----------
    party_vars : tuple of tuple of str
        Variable names held by each party, in party order.
    terms : tuple of frozenset, optional
        ANF monomials; the empty set is the constant 1.
    table : tuple of int, optional
        Truth table of length ``2**n_vars``. Row ``r`` assigns variable ``j``
        of the flattened party order the bit ``(r >> j) & 1``.
    """

    party_vars: tuple
    terms: tuple | None = None
    table: tuple | None = None

    def __post_init__(self):
        pv = tuple(tuple(v) for v in self.party_vars)
        object.__setattr__(self, "party_vars", pv)
        names = [v for vs in pv for v in vs]
        if len(set(names)) != len(names):
            raise ValueError("variable names must be unique across parties")
        if (self.terms is None) == (self.table is None):
            raise ValueError("give exactly one of terms or table")
        if self.terms is not None:
            terms = tuple(frozenset(t) for t in self.terms)
            for t in terms:
                unknown = t - set(names)
                if unknown:
                    raise ValueError(f"unknown variable(s) {sorted(unknown)}")
            object.__setattr__(self, "terms", terms)
        else:
            table = tuple(int(b) for b in self.table)
            if len(table) != 2 ** len(names) or set(table) - {0, 1}:
                raise ValueError(f"truth table needs {2 ** len(names)} bits")
            object.__setattr__(self, "table", table)

    @property
    def n_parties(self) -> int:
        return len(self.party_vars)

    @property
    def variables(self) -> tuple:
        return tuple(v for vs in self.party_vars for v in vs)

    def owner(self, var: str) -> int:
        for k, vs in enumerate(self.party_vars):
            if var in vs:
                return k
        raise KeyError(var)

    def evaluate(self, inputs: Mapping[str, int]) -> int:
        if self.table is not None:
            row = sum(int(inputs[v]) << j for j, v in enumerate(self.variables))
            return self.table[row]
        return _evaluate_terms(self.terms, inputs)

    def anf(self) -> tuple:
        return self.terms if self.terms is not None else anf_from_truth_table(self)

    def assignments(self):
        """Every input assignment, in truth-table row order."""
        names = self.variables
        for row in range(2 ** len(names)):
            yield {v: (row >> j) & 1 for j, v in enumerate(names)}

    @classmethod
    def from_text(cls, text: str) -> "BooleanFunctionSpec":
        """Parse ``party``, ``and``, ``lin``, ``const``, ``table`` and ``parties`` lines."""
        party_vars, terms, table, declared = [], [], None, None
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].split()
            if not line:
                continue
            key, args = line[0], line[1:]
            try:
                if key == "parties":
                    (declared,) = (int(a) for a in args)
                elif key == "party":
                    party_vars.append(tuple(args[1:]))
                elif key == "and":
                    if not args:
                        raise ValueError("and needs variables")
                    terms.append(frozenset(args))
                elif key == "lin":
                    (v,) = args
                    terms.append(frozenset([v]))
                elif key == "const":
                    (c,) = args
                    if c not in ("0", "1"):
                        raise ValueError("const must be 0 or 1")
                    if c == "1":
                        terms.append(frozenset())
                elif key == "table":
                    (table,) = args
                else:
                    raise ValueError(f"unknown keyword {key!r}")
            except ValueError as exc:
                raise ValueError(f"line {lineno}: {exc}") from None
        if declared is not None and declared != len(party_vars):
            raise ValueError(f"declared {declared} parties but listed {len(party_vars)}")
        if table is not None:
            if terms:
                raise ValueError("give either terms or a table, not both")
            return cls(tuple(party_vars), table=tuple(int(ch) for ch in table))
        # repeated monomials cancel over GF(2)
        counts: dict = {}
        for t in terms:
            counts[t] = counts.get(t, 0) ^ 1
        return cls(tuple(party_vars), terms=tuple(t for t in terms if counts.pop(t, 0)))

    def to_text(self) -> str:
        lines = [f"parties {self.n_parties}"]
        lines += [f"party P{k + 1} " + " ".join(vs) for k, vs in enumerate(self.party_vars)]
        if self.table is not None:
            lines.append("table " + "".join(map(str, self.table)))
        else:
            order = {v: j for j, v in enumerate(self.variables)}
            for t in self.terms:
                if not t:
                    lines.append("const 1")
                elif len(t) == 1:
                    lines.append(f"lin {next(iter(t))}")
                else:
                    lines.append("and " + " ".join(sorted(t, key=order.get)))
        return "\n".join(lines) + "\n"


def _evaluate_terms(terms, inputs) -> int:
    out = 0
    for t in terms:
        bit = 1
        for v in t:
            bit &= int(inputs[v])
        out ^= bit
    return out


def mobius_transform(table) -> np.ndarray:
    """GF(2) Moebius transform of a truth table to ANF coefficients (an involution)."""
    coeffs = np.array(table, dtype=np.uint8)
    n = coeffs.size.bit_length() - 1
    if coeffs.size != 1 << n:
        raise ValueError("table length must be a power of two")
    for k in range(n):
        step = 1 << k
        view = coeffs.reshape(-1, 2, step)
        view[:, 1, :] ^= view[:, 0, :]
    return coeffs


def anf_from_truth_table(spec: BooleanFunctionSpec) -> tuple:
    """ANF monomials of a table-defined function, checked for grouped degree."""
    if spec.table is None:
        raise ValueError("spec has no truth table")
    names = spec.variables
    coeffs = mobius_transform(spec.table)
    terms = tuple(frozenset(names[j] for j in range(len(names)) if (mask >> j) & 1)
                  for mask in np.flatnonzero(coeffs))
    group_terms(spec.party_vars, terms)
    return terms


def group_terms(party_vars, terms) -> list[dict]:
    """Split each monomial by owner; raise if any spans more than two parties."""
    owner = {v: k for k, vs in enumerate(party_vars) for v in vs}
    out = []
    for t in terms:
        parts: dict = {}
        for v in t:
            parts.setdefault(owner[v], set()).add(v)
        if len(parts) > 2:
            raise UnsupportedFunctionError(
                f"monomial {sorted(t)} spans {len(parts)} parties; at most two are supported")
        out.append({k: frozenset(vs) for k, vs in parts.items()})
    return out


# -------------------------------------------------------------- conjunctions
@dataclass(frozen=True)
class Conjunction:
    """One copy of |G>: ``party_a`` holds the product of ``vars_a``, likewise for B."""

    party_a: int
    vars_a: frozenset
    party_b: int
    vars_b: frozenset
    padding: bool = False

    def bits(self, inputs: Mapping[str, int]) -> tuple[int, int]:
        if self.padding:
            return 0, 0
        return _product(self.vars_a, inputs), _product(self.vars_b, inputs)


def _product(vs, inputs) -> int:
    bit = 1
    for v in vs:
        bit &= int(inputs[v])
    return bit


@dataclass(frozen=True)
class ConjunctionPlan:
    """Conjunction slots plus each party's locally computable linear part."""

    n_parties: int
    conjunctions: tuple
    local_terms: tuple

    @property
    def n_conjunctions(self) -> int:
        return len(self.conjunctions)

    def roles(self, k: int) -> tuple[list[int], list[int]]:
        """Indices where party ``k`` plays Alice, and where it plays Bob."""
        as_a = [i for i, c in enumerate(self.conjunctions) if c.party_a == k]
        as_b = [i for i, c in enumerate(self.conjunctions) if c.party_b == k]
        return as_a, as_b

    def z(self, k: int, inputs: Mapping[str, int]) -> int:
        return _evaluate_terms(self.local_terms[k], inputs)

    def bits_per_party(self) -> list[int]:
        """Distinct conjunction inputs per party plus one for the linear bit."""
        seen = [set() for _ in range(self.n_parties)]
        for c in self.conjunctions:
            key_a = "zero" if c.padding else c.vars_a
            key_b = "zero" if c.padding else c.vars_b
            seen[c.party_a].add(key_a)
            seen[c.party_b].add(key_b)
        return [len(s) + 1 for s in seen]


def conjunction_bound(n_parties: int, m_bits) -> float:
    return math.comb(n_parties, 2) * (m_bits - 1) ** 2


def plan_conjunctions(spec: BooleanFunctionSpec, M: int | None = None) -> ConjunctionPlan:
    """One slot per cross-party monomial, padded so every party holds a copy.

    ``M`` bounds the bits per party (conjunction inputs plus the linear bit);
    it defaults to the largest count in the plan.
    """
    n = spec.n_parties
    if n < 2:
        raise ValueError("need at least two parties")
    local = [[] for _ in range(n)]
    conj = []
    for t, parts in zip(spec.anf(), group_terms(spec.party_vars, spec.anf())):
        if len(parts) == 2:
            (pa, va), (pb, vb) = sorted(parts.items())
            conj.append(Conjunction(pa, va, pb, vb))
        elif len(parts) == 1:
            (k,) = parts
            local[k].append(t)
        else:
            local[0].append(t)
    involved = {c.party_a for c in conj} | {c.party_b for c in conj}
    for k in range(n):
        if k not in involved:
            partner = 1 if k == 0 else 0
            conj.append(Conjunction(k, frozenset(), partner, frozenset(), padding=True))
            involved |= {k, partner}
    plan = ConjunctionPlan(n, tuple(conj), tuple(tuple(ts) for ts in local))
    bits = plan.bits_per_party()
    if M is None:
        M = max(bits)
    elif max(bits) > M:
        raise ValueError(f"a party holds {max(bits)} bits, more than M={M}")
    if plan.n_conjunctions > conjunction_bound(n, M):
        raise AssertionError("conjunction count exceeds the pairwise bound")
    return plan


# ------------------------------------------------------------------- Stage I
Measurer = Callable[[StabilizerState, PauliTerm], int]


def random_measurer(state: StabilizerState, obs: PauliTerm) -> int:
    return state.measure(obs)[0]


def ideal_copy(seed: int | None = 0, backend: str | None = None) -> StabilizerState:
    """|G> on qubits 0..11 for labels 1..12."""
    return circuit_from_graph(target_graph().reorder(range(1, 13)), seed=seed, backend=backend)


def byproduct_flips(label: int, basis: str, byproducts) -> int:
    """Outcome flip caused by a published Z byproduct: only X and Y readouts anticommute."""
    return int(label in byproducts and basis in "XY")


@dataclass
class CopyTranscript:
    """Stage I record of one copy."""

    a: int
    b: int
    outcomes: dict = field(default_factory=dict)
    bases: dict = field(default_factory=dict)
    byproducts: frozenset = frozenset()

    def __getitem__(self, label):
        try:
            return self.outcomes[label]
        except KeyError:
            raise IncompleteTranscriptError(f"outcome m{label} is missing") from None


class CopySession:
    """Step-by-step Stage I on one copy.

    Only the roles in ``honest`` act; the others' qubits are left untouched.
    Outcomes are stored after folding in the published byproduct flips.
    """

    def __init__(self, state: StabilizerState, a: int = 0, b: int = 0, byproducts=(),
                 honest=ROLES, measurer: Measurer = random_measurer):
        if state.n != N_QUBITS:
            raise ValueError(f"a copy has {N_QUBITS} qubits, got {state.n}")
        unknown = set(honest) - set(ROLES)
        if unknown:
            raise ValueError(f"unknown role(s) {sorted(unknown)}")
        self.state = state
        self.honest = frozenset(honest)
        self.measurer = measurer
        self.transcript = CopyTranscript(int(a), int(b), byproducts=frozenset(byproducts))
        self.done: set = set()

    @property
    def outcomes(self) -> dict:
        return self.transcript.outcomes

    def _measure(self, label: int, basis: str) -> int:
        obs = PauliTerm.from_ops(N_QUBITS, {label - 1: basis})
        m = self.measurer(self.state, obs) ^ byproduct_flips(label, basis, self.transcript.byproducts)
        self.transcript.outcomes[label] = m
        self.transcript.bases[label] = basis
        return m

    def step(self, k: int) -> "CopySession":
        if k not in range(1, 7):
            raise ValueError(f"no step {k}")
        if k in self.done:
            raise ProtocolError(f"step {k} already ran")
        if k >= 4 and not {1, 2, 3} <= self.done:
            raise ProtocolError(f"step {k} requires steps 1-3 to have run first")
        t = self.transcript
        if k <= 3:
            for role, label, basis in EARLY_STEPS[k]:
                if role in self.honest:
                    self._measure(label, basis)
        elif k == 4 and "A" in self.honest:
            if t[2]:
                self.state.z(3)
            basis = "Y" if t.a else "Z"
            self._measure(4, basis)
            self._measure(11, basis)
        elif k == 5 and "B" in self.honest:
            if t[6]:
                self.state.z(7)
            self._measure(8, "Y" if t[10] else "Z")
        elif k == 6 and "R" in self.honest:
            self._measure(12, "Y" if t[9] else "X")
        self.done.add(k)
        return self

    def run(self, steps: Iterable[int] = range(1, 7)) -> CopyTranscript:
        for k in steps:
            self.step(k)
        return self.transcript


def run_stage1(copy_state: StabilizerState, a: int, b: int, seed=None, byproducts=(),
               measurer: Measurer = random_measurer) -> CopyTranscript:
    """All six Stage I steps by honest parties on ``copy_state`` (mutated)."""
    if seed is not None:
        copy_state.reseed(seed)
    return CopySession(copy_state, a, b, byproducts, measurer=measurer).run()


def enumerate_branches(procedure: Callable[[Measurer], object], max_branches: int = MAX_BRANCHES):
    """Run ``procedure`` once per branch of its random measurement outcomes.

    ``procedure`` receives a measurer and must build its state afresh on every
    call. Deterministic outcomes are read off; random ones follow a scripted
    bit string extended depth first. Yields ``(probability, result)`` pairs.
    """
    stack = [()]
    count = 0
    while stack:
        script = stack.pop()
        used: list[int] = []

        def measurer(state, obs, script=script, used=used):
            e = state.expectation(obs)
            if e:
                return state.measure(obs)[0]
            k = len(used)
            bit = script[k] if k < len(script) else 0
            used.append(bit)
            state.measure(obs, forced=bit)
            return bit

        result = procedure(measurer)
        count += 1
        if count > max_branches:
            raise BranchCapacityError(f"more than {max_branches} branches")
        for k in range(len(script), len(used)):
            stack.append(tuple(used[:k]) + (1,))
        yield Fraction(1, 2 ** len(used)), result


def stage1_branches(a: int, b: int, byproducts=(), state_factory=None) -> list:
    """Every honest Stage I branch of one copy as ``(probability, transcript)``."""
    factory = state_factory or ideal_copy

    def proc(measurer):
        return CopySession(factory(), a, b, byproducts, measurer=measurer).run()

    return list(enumerate_branches(proc))


def check_correlations(t: CopyTranscript) -> bool:
    """Outcome parities fixed by the first three steps."""
    return (t[1] ^ t[2] ^ t[3]) == 0 and (t[5] ^ t[6] ^ t[7]) == 0 and t[9] == t[10]


# ------------------------------------------------------------------ Stage II
def opening_a(t: CopyTranscript, a):
    return t[5] ^ a


def opening_b(t: CopyTranscript, b):
    return t[1] ^ b ^ 1


def compute_alpha(t: CopyTranscript, a, c_b):
    """Alice's share from Bob's opening."""
    return (c_b & a) ^ t[4] ^ t[11]


def compute_beta(t: CopyTranscript, c_a):
    """Bob's share from Alice's opening."""
    return (c_a & t[10]) ^ t[8]


@dataclass
class Stage2Result:
    openings_a: list
    openings_b: list
    alphas: list
    betas: list
    gammas: list
    gamma_r: object
    value: object


def run_stage2(transcripts, plan: ConjunctionPlan, spec: BooleanFunctionSpec,
               inputs: Mapping[str, int], strict: bool = True) -> Stage2Result:
    """Openings, shares and the summed output.

    Transcript outcomes may be ints or broadcastable arrays of branch
    outcomes; every output then has the broadcast shape.
    """
    if len(transcripts) != plan.n_conjunctions:
        raise IncompleteTranscriptError(
            f"{len(transcripts)} transcripts for {plan.n_conjunctions} conjunctions")
    ca, cb, alphas, betas = [], [], [], []
    for t, conj in zip(transcripts, plan.conjunctions):
        a, b = conj.bits(inputs)
        ca.append(opening_a(t, a))
        cb.append(opening_b(t, b))
        alphas.append(compute_alpha(t, a, cb[-1]))
        betas.append(compute_beta(t, ca[-1]))
    gammas = []
    for k in range(plan.n_parties):
        as_a, as_b = plan.roles(k)
        g = plan.z(k, inputs)
        for i in as_a:
            g = g ^ alphas[i]
        for i in as_b:
            g = g ^ betas[i]
        gammas.append(g)
    gamma_r = 0
    for t in transcripts:
        gamma_r = gamma_r ^ t[12]
    value = gamma_r
    for g in gammas:
        value = value ^ g
    if strict and np.any(np.asarray(value) != spec.evaluate(inputs)):
        raise CorrectnessError("summed shares disagree with the function value")
    return Stage2Result(ca, cb, alphas, betas, gammas, gamma_r, value)


STAGE2_LABELS = (1, 4, 5, 8, 10, 11, 12)


def collapse_branches(branches, labels=STAGE2_LABELS) -> list:
    """Merge branches that agree on ``labels``, adding their probabilities."""
    merged: dict = {}
    for p, t in branches:
        key = tuple(t[lab] for lab in labels)
        if key in merged:
            merged[key] = (merged[key][0] + p, merged[key][1])
        else:
            merged[key] = (p, CopyTranscript(t.a, t.b, {lab: t[lab] for lab in labels}))
    return list(merged.values())


def branch_product_outcomes(branch_lists) -> tuple[list, np.ndarray]:
    """Stack per-copy branch transcripts as arrays broadcast along one axis per copy.

    Returns array-valued transcripts and the joint probability array. The
    probabilities are powers of two, so float64 holds them exactly.
    """
    n = len(branch_lists)
    out = []
    prob = np.ones([1] * n)
    for axis, branches in enumerate(branch_lists):
        shape = [1] * n
        shape[axis] = len(branches)
        labels = branches[0][1].outcomes.keys()
        arrays = {lab: np.array([t.outcomes[lab] for _, t in branches], dtype=np.uint8).reshape(shape)
                  for lab in labels}
        first = branches[0][1]
        out.append(CopyTranscript(first.a, first.b, arrays))
        prob = prob * np.array([float(p) for p, _ in branches]).reshape(shape)
    return out, prob


@dataclass
class CorrectnessReport:
    assignments: int
    joint_branches: int
    failures: int
    failure_probability: float


def exhaustive_correctness(spec: BooleanFunctionSpec, plan: ConjunctionPlan | None = None,
                           byproducts=()) -> CorrectnessReport:
    """Run Stage II on every joint Stage I branch of every input assignment.

    Per-copy branches that agree on every outcome Stage II reads are merged
    first, which keeps the joint product small without dropping any branch.
    """
    plan = plan or plan_conjunctions(spec)
    cache: dict = {}
    failures, joint, mass, n_inputs = 0, 0, 0.0, 0
    for inputs in spec.assignments():
        n_inputs += 1
        lists = []
        for conj in plan.conjunctions:
            ab = conj.bits(inputs)
            if ab not in cache:
                cache[ab] = collapse_branches(stage1_branches(*ab, byproducts=byproducts))
            lists.append(cache[ab])
        transcripts, prob = branch_product_outcomes(lists)
        if prob.sum() != 1.0:
            raise RuntimeError("branch probabilities do not sum to one")
        res = run_stage2(transcripts, plan, spec, inputs, strict=False)
        wrong = np.broadcast_to(np.asarray(res.value) != spec.evaluate(inputs), prob.shape)
        joint += prob.size
        failures += int(np.count_nonzero(wrong))
        mass += float(prob[wrong].sum())
    return CorrectnessReport(n_inputs, joint, failures, mass)


# ------------------------------------------------------------ full protocol
@dataclass
class ProtocolTranscript:
    spec: BooleanFunctionSpec
    plan: ConjunctionPlan
    inputs: dict
    copies: list
    stage2: Stage2Result

    @property
    def value(self) -> int:
        return int(self.stage2.value)

    def rows(self) -> list[tuple]:
        """``(kind, copy, name, party, basis, value)`` rows in a fixed order."""
        rows = []
        for i, (t, conj) in enumerate(zip(self.copies, self.plan.conjunctions)):
            party = {"A": f"P{conj.party_a + 1}", "B": f"P{conj.party_b + 1}", "R": "R"}
            for label in sorted(t.outcomes):
                rows.append(("outcome", i + 1, f"q{label}", party[QUBIT_OWNER[label]],
                             t.bases[label], int(t.outcomes[label])))
            for label in sorted(t.byproducts):
                rows.append(("byproduct", i + 1, f"q{label}", "source", "Z", 1))
            rows.append(("opening", i + 1, "c_A", party["A"], "", int(self.stage2.openings_a[i])))
            rows.append(("opening", i + 1, "c_B", party["B"], "", int(self.stage2.openings_b[i])))
        for k, g in enumerate(self.stage2.gammas):
            rows.append(("opening", 0, "Gamma", f"P{k + 1}", "", int(g)))
        rows.append(("opening", 0, "Gamma", "R", "", int(self.stage2.gamma_r)))
        rows.append(("output", 0, "f", "all", "", self.value))
        return rows

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(("kind", "copy", "name", "party", "basis", "value"))
        w.writerows(self.rows())
        return buf.getvalue()


def run_protocol(spec: BooleanFunctionSpec, inputs: Mapping[str, int], seed: int = 0,
                 plan: ConjunctionPlan | None = None, source: str = "ideal",
                 herald: HeraldModel | None = None, backend: str | None = None,
                 streaming: bool = True) -> ProtocolTranscript:
    """Honest run of both stages.

    ``source="built"`` takes every copy from the emitter build and folds the
    published byproducts into the outcomes. ``streaming`` measures each copy
    as soon as it exists instead of building all copies first; copies use
    independent child seeds, so both orders give identical transcripts.
    """
    if source not in ("ideal", "built"):
        raise ValueError(f"unknown source {source!r}")
    plan = plan or plan_conjunctions(spec)
    inputs = {v: int(inputs[v]) for v in spec.variables}
    seeds = np.random.SeedSequence(seed).spawn(plan.n_conjunctions)

    def make(i):
        build_seed, meas_seed = seeds[i].spawn(2)
        if source == "ideal":
            return ideal_copy(backend=backend), frozenset(), meas_seed
        sys, _ = build_G(herald, seed=int(build_seed.generate_state(1)[0]), backend=backend)
        return G_state(sys, correct=False), relabeled_state(sys).phases, meas_seed

    def measure(i, made):
        state, byp, meas_seed = made
        a, b = plan.conjunctions[i].bits(inputs)
        return run_stage1(state, a, b, seed=meas_seed, byproducts=byp)

    if streaming:
        copies = [measure(i, make(i)) for i in range(plan.n_conjunctions)]
    else:
        built = [make(i) for i in range(plan.n_conjunctions)]
        copies = [measure(i, m) for i, m in enumerate(built)]
    stage2 = run_stage2(copies, plan, spec, inputs)
    return ProtocolTranscript(spec, plan, inputs, copies, stage2)


# ---------------------------------------------------- noise and repetition
@dataclass(frozen=True)
class NoiseAndRepetition:
    eps_star: float
    K: int = 1

    def __post_init__(self):
        if not 0 <= self.eps_star < 0.5:
            raise UncorrectableError("eps_star must lie in [0, 1/2)")
        if int(self.K) != self.K or self.K < 1:
            raise ValueError("K must be a positive integer")


def majority_vote(values: np.ndarray) -> np.ndarray:
    """Majority over the last axis; ties keep the first sub-iteration's value."""
    values = np.asarray(values, dtype=np.uint8)
    k = values.shape[-1]
    ones = values.sum(axis=-1, dtype=np.int64)
    out = (2 * ones > k).astype(np.uint8)
    tie = 2 * ones == k
    out[tie] = values[..., 0][tie]
    return out


def referee_votes(m12, alphas, betas, flips) -> np.ndarray:
    """Referee's corrected bits from noisy results and the opened pad differences.

    All inputs have shape ``(..., K)``; sub-iteration 0 is the reference.
    """
    noisy = np.asarray(m12, np.uint8) ^ np.asarray(flips, np.uint8)
    pad = (alphas ^ alphas[..., :1]) ^ (betas ^ betas[..., :1])
    return majority_vote(noisy ^ pad)


@dataclass
class NoisyOutcome:
    gamma_r: int
    value: int
    error: bool
    votes: np.ndarray


def apply_noise_and_correct(groups, plan: ConjunctionPlan, spec: BooleanFunctionSpec,
                            inputs: Mapping[str, int], noise: NoiseAndRepetition,
                            rng: np.random.Generator) -> NoisyOutcome:
    """Repetition-coded Stage II on ``groups[i]``, the K transcripts of conjunction i."""
    if len(groups) != plan.n_conjunctions or any(len(g) != noise.K for g in groups):
        raise IncompleteTranscriptError("need K transcripts for every conjunction")
    shape = (plan.n_conjunctions, noise.K)
    m12 = np.zeros(shape, np.uint8)
    alphas = np.zeros(shape, np.uint8)
    betas = np.zeros(shape, np.uint8)
    for i, (group, conj) in enumerate(zip(groups, plan.conjunctions)):
        a, b = conj.bits(inputs)
        for j, t in enumerate(group):
            m12[i, j] = t[12]
            alphas[i, j] = compute_alpha(t, a, opening_b(t, b))
            betas[i, j] = compute_beta(t, opening_a(t, a))
    flips = rng.random(shape) < noise.eps_star
    votes = referee_votes(m12, alphas, betas, flips)
    gamma_r = int(np.bitwise_xor.reduce(votes))
    value = gamma_r
    for k in range(plan.n_parties):
        as_a, as_b = plan.roles(k)
        value ^= plan.z(k, inputs)
        value ^= int(np.bitwise_xor.reduce(alphas[as_a, 0])) if as_a else 0
        value ^= int(np.bitwise_xor.reduce(betas[as_b, 0])) if as_b else 0
    return NoisyOutcome(gamma_r, value, value != spec.evaluate(inputs), votes)


def simulate_output_error(n_conj: int, noise: NoiseAndRepetition, trials: int,
                          rng: np.random.Generator, batch: int = 10_000) -> int:
    """Count wrong outputs over ``trials`` vectorized repetition-coded runs.

    Honest per-copy results are ``a*b + alpha + beta`` with independent
    uniform pads; this is the same arithmetic ``apply_noise_and_correct``
    performs on tableau transcripts.
    """
    errors = 0
    done = 0
    while done < trials:
        n = min(batch, trials - done)
        shape = (n, n_conj, noise.K)
        ab = rng.integers(0, 2, (n, n_conj, 1), dtype=np.uint8)
        alphas = rng.integers(0, 2, shape, dtype=np.uint8)
        betas = rng.integers(0, 2, shape, dtype=np.uint8)
        m12 = ab ^ alphas ^ betas
        flips = rng.random(shape) < noise.eps_star
        votes = referee_votes(m12, alphas, betas, flips)
        got = np.bitwise_xor.reduce(votes ^ alphas[..., 0] ^ betas[..., 0], axis=1)
        want = np.bitwise_xor.reduce(ab[..., 0], axis=1)
        errors += int(np.count_nonzero(got != want))
        done += n
    return errors


def hoeffding_output_bound(eps_star: float, K: int, n_conj: int) -> float:
    """``R * exp(-2K (1/2 - eps - 1/(2K))^2)``."""
    gap = 0.5 - eps_star - 1.0 / (2 * K)
    return n_conj * math.exp(-2 * K * gap * gap)


@dataclass(frozen=True)
class KChoice:
    K: int
    closed_form: int


def closed_form_K(eps_star: float, n_conj: int, eps_f: float) -> int:
    """``ceil(ln sqrt(R/eps_f) / (1/2 - eps)^2)``; drops the 1/(2K) term."""
    return math.ceil(math.log(math.sqrt(n_conj / eps_f)) / (0.5 - eps_star) ** 2)


def choose_K(eps_star: float, n_conj: int, eps_f: float, k_max: int = 10 ** 7) -> KChoice:
    """Smallest K meeting the Hoeffding output bound, with the closed form alongside."""
    if not 0 <= eps_star < 0.5:
        raise UncorrectableError(f"eps_star={eps_star} cannot be corrected by majority vote")
    if not 0 < eps_f < 1 or n_conj < 1:
        raise ValueError("need 0 < eps_f < 1 and at least one conjunction")
    # the exponent's base must be positive, so start past 1/(1 - 2 eps)
    k = max(1, math.floor(1.0 / (1.0 - 2.0 * eps_star)) + 1)
    while hoeffding_output_bound(eps_star, k, n_conj) > eps_f:
        k += 1
        if k > k_max:
            raise UncorrectableError("no K within the search limit")
    return KChoice(k, closed_form_K(eps_star, n_conj, eps_f))


def repetition_ceiling(M: float, N: int, eps_f: float, eps_star: float) -> int:
    return math.ceil(math.log((M - 1) * N / math.sqrt(2 * eps_f)) / (0.5 - eps_star) ** 2)


def rate_denominator(M: float, N: int, eps_f: float, eps_star: float) -> float:
    """``6 (M-1)^2 N^2`` times the repetition ceiling."""
    if M <= 1 or N < 2:
        raise ValueError("need M > 1 and N >= 2")
    if not 0 <= eps_star < 0.5:
        raise UncorrectableError(f"eps_star={eps_star} cannot be corrected")
    return 6 * (M - 1) ** 2 * N ** 2 * repetition_ceiling(M, N, eps_f, eps_star)


def rate_lower_bound(M: float, N: int, eps_f: float, eps_star: float, R0: float = 1.0) -> float:
    """Error-corrected computation rate lower bound in units of ``R0``."""
    return R0 / rate_denominator(M, N, eps_f, eps_star)


def inputs_for_conjunctions(n_conj: float) -> float:
    """Bits per party giving ``n_conj = (M-1)^2`` at two parties."""
    return 1.0 + math.sqrt(n_conj)


# ---------------------------------------------------------------- security
SCENARIOS = ("honest_B_R", "honest_A_R", "honest_P_S")
SCENARIO_HONEST = {"honest_B_R": ("B", "R"), "honest_A_R": ("A", "R"), "honest_P_S": ("A", "B")}
REMAINING = {"honest_B_R": (2, 4, 5, 11), "honest_A_R": (1, 6, 8, 10), "honest_P_S": (3, 7, 9, 12)}


def _op(ops: dict, sign_bit: int = 0) -> PauliTerm:
    return PauliTerm.from_ops(N_QUBITS, {q - 1: letter for q, letter in ops.items()},
                              -1 if sign_bit & 1 else 1)


def expected_remaining_generators(scenario: str, m: Mapping[int, int], a: int = 0,
                                  variant: str = "corrected") -> list[PauliTerm]:
    """Signed generators of the adversary's qubits after the honest parties finish.

    ``variant="transcribed"`` gives the generator lists exactly as originally
    written, where qubits 10, 3 and 7 carry X; the ``"corrected"`` lists use
    Z on those qubits (with ``m1 + m2`` and ``m5 + m6`` signs on 3 and 7),
    which is what the Z-basis correlations of the first three steps require.
    """
    if variant not in ("corrected", "transcribed"):
        raise ValueError(f"unknown variant {variant!r}")
    fixed = variant == "corrected"
    if scenario == "honest_B_R":
        s = m[9]
        return [_op({2: "X"}, m[1] + m[3]),
                _op({5: "Z"}, m[6] + m[7]),
                _op({4: "X", 11: "X"}, m[3] + s),
                _op({4: "Z", 11: "Z"}, (m[6] + m[7]) * s + m[8] + m[12])]
    if scenario == "honest_A_R":
        s = m[9]
        return [_op({1: "Z"}, m[2] + m[3]),
                _op({6: "X"}, m[5] + m[7]),
                _op({10: "Z" if fixed else "X"}, m[9]),
                _op({8: "Y" if s else "Z"},
                    a * (m[2] + m[3] + s + 1) + m[7] * s + m[4] + m[11] + m[12])]
    if scenario == "honest_P_S":
        s = m[10]
        return [_op({3: "Z"}, m[1] + m[2]) if fixed else _op({3: "X"}, m[2]),
                _op({7: "Z"}, m[5] + m[6]) if fixed else _op({7: "X"}, m[6]),
                _op({9: "X"}, s),
                _op({12: "Y" if s else "X"}, a * (m[1] + s + 1) + m[5] * s + m[4] + m[8] + m[11])]
    raise ValueError(f"unknown scenario {scenario!r}")


def _scenario_procedure(scenario: str, a: int, b: int, state_factory=None):
    if scenario not in SCENARIOS:
        raise ValueError(f"unknown scenario {scenario!r}")
    factory = state_factory or ideal_copy

    def proc(measurer):
        sess = CopySession(factory(), a, b, honest=SCENARIO_HONEST[scenario], measurer=measurer)
        sess.run()
        return sess

    return proc


def _sign_bit(state: StabilizerState, obs: PauliTerm) -> int:
    e = state.expectation(obs)
    if e == 0:
        raise AssertionError(f"{obs} does not stabilize the remaining state")
    return int(e == -1)


def _generators_independent(gens) -> bool:
    mat = np.array([np.concatenate([g.x_bits, g.z_bits]) for g in gens], dtype=np.uint8)
    rank = 0
    rows = mat.copy()
    for col in range(rows.shape[1]):
        pivot = next((r for r in range(rank, len(rows)) if rows[r, col]), None)
        if pivot is None:
            continue
        rows[[rank, pivot]] = rows[[pivot, rank]]
        for r in range(len(rows)):
            if r != rank and rows[r, col]:
                rows[r] ^= rows[rank]
        rank += 1
    return rank == len(gens)


@dataclass
class TraceResult:
    scenario: str
    branches: int
    mismatches: list


def trace_security_stabilizers(scenario: str, a_values=(0, 1),
                               variant: str = "corrected") -> TraceResult:
    """Compare the adversary's post-measurement group with the expected one on every branch.

    Four independent signed generators that all stabilize the state pin the
    adversary's four-qubit state exactly.
    """
    mismatches = []
    count = 0
    for a in a_values:
        for _, sess in enumerate_branches(_scenario_procedure(scenario, a, 0)):
            count += 1
            gens = expected_remaining_generators(scenario, sess.outcomes, a, variant)
            if not _generators_independent(gens) or any(sess.state.expectation(g) != 1 for g in gens):
                mismatches.append((a, dict(sess.outcomes)))
    return TraceResult(scenario, count, mismatches)


# Adversary observables whose signs form the view bits, without signs.
def _view_observables(scenario: str, m: Mapping[int, int]) -> dict:
    if scenario == "honest_B_R":
        return {"m2": _op({2: "X"}), "m4": _op({4: "X", 11: "X"}),
                "m5": _op({5: "Z"}), "m11": _op({4: "Z", 11: "Z"})}
    if scenario == "honest_A_R":
        return {"m1": _op({1: "Z"}), "m6": _op({6: "X"}),
                "m8": _op({8: "Y" if m[9] else "Z"}), "m10": _op({10: "Z"})}
    return {"m3": _op({3: "Z"}), "m7": _op({7: "Z"}), "m9": _op({9: "X"}),
            "m12": _op({12: "Y" if m[10] else "X"})}


VIEW_FIELDS = {
    "honest_B_R": ("m2", "m4", "m5", "m11", "c_B", "Gamma_P", "Gamma_R"),
    "honest_A_R": ("m1", "m6", "m8", "m10", "c_A", "Gamma_P", "Gamma_R"),
    "honest_P_S": ("m3", "m7", "m9", "m12", "c_A", "c_B", "Gamma_P", "Gamma_S"),
}

Rule = Callable[[Mapping[str, int]], int]


def honest_rule(scenario: str, inputs: Mapping[str, int]) -> Rule:
    """The opening an honest party would make, written as a function of its view.

    Honest Alice opens ``m5 + a`` and honest Bob ``m1 + b + 1``; the
    adversary's own outcome is the sign of its Z5 or Z1 stabilizer.
    """
    if scenario == "honest_B_R":
        return lambda v: v["m5"] ^ inputs["a"]
    if scenario == "honest_A_R":
        return lambda v: v["m1"] ^ inputs["b"] ^ 1
    return lambda v: 0


def transcript_distribution(scenario: str, inputs: Mapping[str, int], rule: Rule | None = None,
                            state_factory=None) -> dict:
    """Exact distribution of the adversary's view for one copy.

    ``inputs`` holds ``a``, ``b``, ``z_P`` and (for the Referee scenario)
    ``z_S``. The honest party P is Bob in ``honest_B_R`` and Alice in
    ``honest_A_R``; in ``honest_P_S`` P is Alice and S is Bob.
    """
    a, b = int(inputs.get("a", 0)), int(inputs.get("b", 0))
    rule = rule or honest_rule(scenario, inputs)
    proc = _scenario_procedure(scenario, a, b, state_factory)
    dist: dict = {}
    for p, sess in enumerate_branches(proc):
        t = sess.transcript
        view = {k: _sign_bit(sess.state, obs) for k, obs in _view_observables(scenario, t.outcomes).items()}
        if scenario == "honest_B_R":
            view["c_B"] = opening_b(t, b)
            c_a = rule(view)
            view["Gamma_P"] = inputs["z_P"] ^ compute_beta(t, c_a)
            view["Gamma_R"] = t[12]
        elif scenario == "honest_A_R":
            view["c_A"] = opening_a(t, a)
            c_b = rule(view)
            view["Gamma_P"] = inputs["z_P"] ^ compute_alpha(t, a, c_b)
            view["Gamma_R"] = t[12]
        else:
            view["c_A"] = opening_a(t, a)
            view["c_B"] = opening_b(t, b)
            view["Gamma_P"] = inputs["z_P"] ^ compute_alpha(t, a, view["c_B"])
            view["Gamma_S"] = inputs["z_S"] ^ compute_beta(t, view["c_A"])
        key = tuple(view[k] for k in VIEW_FIELDS[scenario])
        dist[key] = dist.get(key, 0) + p
    return dist


def zeta(scenario: str, view: Mapping[str, int], c_hat: int) -> int:
    """Offset between the Referee's opening and the ideal output, from S's view alone."""
    if scenario == "honest_B_R":
        e = c_hat ^ view["m5"]
        return view["Gamma_P"] ^ view["m11"] ^ (e & (view["m2"] ^ view["m4"] ^ view["c_B"] ^ 1))
    if scenario == "honest_A_R":
        return view["Gamma_P"] ^ view["m8"] ^ ((view["m6"] ^ view["c_A"]) & view["m10"])
    raise ValueError("zeta is defined for the scenarios with an adversarial party")


def zeta_transcribed(scenario: str, view: Mapping[str, int], c_hat: int) -> int:
    """The offset as originally written: it omits ``Gamma_P`` and the adversary's own sign bit."""
    if scenario == "honest_B_R":
        return (view["m5"] ^ c_hat) & (view["m2"] ^ view["m4"] ^ view["c_B"] ^ 1)
    if scenario == "honest_A_R":
        return (view["m6"] ^ view["c_A"]) & view["m10"]
    raise ValueError("zeta is defined for the scenarios with an adversarial party")


def effective_input(scenario: str, view: Mapping[str, int], c_hat: int) -> int:
    """The conjunction bit the adversary's opening commits it to."""
    if scenario == "honest_B_R":
        return c_hat ^ view["m5"]
    if scenario == "honest_A_R":
        return c_hat ^ view["m1"] ^ 1
    raise ValueError("no adversarial opening in this scenario")


def ideal_simulator(scenario: str, inputs: Mapping[str, int], rule: Rule | None = None,
                    ideal_f: Callable[..., int] | None = None, zeta_fn=zeta) -> dict:
    """Exact view distribution produced by the ideal-world simulator.

    The simulator samples the uniform view bits, derives the adversary's
    opening with ``rule`` and its effective input, queries the ideal
    function once and sets the dependent opening. ``ideal_f(p_bit, e)``
    defaults to the single-conjunction function ``z_P + p_bit * e``.
    """
    fields = VIEW_FIELDS[scenario]
    free = fields[:-1]
    rule = rule or honest_rule(scenario, inputs)
    p_unit = Fraction(1, 2 ** len(free))
    dist: dict = {}
    for bits in itertools.product((0, 1), repeat=len(free)):
        view = dict(zip(free, bits))
        if scenario == "honest_P_S":
            f = inputs["z_P"] ^ inputs["z_S"] ^ (inputs["a"] & inputs["b"])
            view["Gamma_S"] = f ^ view["Gamma_P"] ^ view["m12"]
        else:
            c_hat = rule(view)
            e = effective_input(scenario, view, c_hat)
            p_bit = inputs["b"] if scenario == "honest_B_R" else inputs["a"]
            f = ideal_f(p_bit, e) if ideal_f else inputs["z_P"] ^ (p_bit & e)
            view["Gamma_R"] = f ^ zeta_fn(scenario, view, c_hat)
        key = tuple(view[k] for k in fields)
        dist[key] = dist.get(key, 0) + p_unit
    return dist


def total_variation(p: Mapping, q: Mapping) -> Fraction:
    keys = set(p) | set(q)
    return sum((abs(Fraction(p.get(k, 0)) - Fraction(q.get(k, 0))) for k in keys), Fraction(0)) / 2


def marginal(dist: Mapping, positions) -> dict:
    out: dict = {}
    for key, p in dist.items():
        sub = tuple(key[i] for i in positions)
        out[sub] = out.get(sub, 0) + p
    return out


def is_uniform(dist: Mapping, n_bits: int) -> bool:
    want = Fraction(1, 2 ** n_bits)
    return len(dist) == 2 ** n_bits and all(p == want for p in dist.values())
