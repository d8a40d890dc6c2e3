"""Command-line driver that writes every experiment as a CSV table."""

from __future__ import annotations

import argparse
import csv
import io
import math
import os
import re
import sys
import tempfile
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, fields
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import __version__, scaling
from .builder import HeraldModel, build_G, relabeled_state
from .channel import HardwareParams, f_swap, fidelity_single_spin, optimize_xi, p_success, p_success_derived, p_true
from .fock import FockConfig, fock_oracle
from .mpc import (
    SCENARIOS, VIEW_FIELDS, BooleanFunctionSpec, UncorrectableError, ideal_simulator, inputs_for_conjunctions,
    is_uniform, marginal, rate_lower_bound, repetition_ceiling, run_protocol, total_variation,
    trace_security_stabilizers, transcript_distribution,
)

PROG = "graphstate-forge"
PARAM_KEYS = frozenset(f.name for f in fields(HardwareParams))


class ConfigError(ValueError):
    """Malformed experiment configuration."""


# ------------------------------------------------------------------ config
_CALL = re.compile(r"^(linspace|logspace|range)\((.*)\)$")


def _scalar(token: str):
    token = token.strip()
    if not token:
        raise ValueError("empty value")
    for cast in (int, float):
        try:
            return cast(token)
        except ValueError:
            pass
    return token


def parse_value(text: str) -> list:
    """Expand one config value into a list of scalars.

    Accepts a scalar, a comma-separated list, ``linspace(a, b, n)``,
    ``logspace(a, b, n)`` (base 10 exponents) or ``range(a, b[, step])``
    with Python's half-open convention.
    """
    text = text.strip()
    call = _CALL.match(text)
    if not call:
        return [_scalar(t) for t in text.split(",")]
    name, args = call.group(1), [_scalar(t) for t in call.group(2).split(",")]
    if not all(isinstance(a, (int, float)) for a in args):
        raise ValueError(f"{name} needs numeric arguments")
    if name == "range":
        if not 1 <= len(args) <= 3 or not all(isinstance(a, int) for a in args):
            raise ValueError("range takes one to three integers")
        return list(range(*args))
    if len(args) != 3 or not isinstance(args[2], int) or args[2] < 1:
        raise ValueError(f"{name} takes (start, stop, count) with a positive integer count")
    fn = np.linspace if name == "linspace" else np.logspace
    return [float(v) for v in fn(args[0], args[1], args[2])]


def parse_config(text: str) -> tuple[dict, dict]:
    """``key=value`` lines to ``({key: list}, {key: line number})``."""
    values, lines = {}, {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, val = (part.strip() for part in line.partition("="))
        if not sep or not key:
            raise ConfigError(f"line {lineno}: expected key=value, got {raw.strip()!r}")
        if key in values:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        try:
            values[key] = parse_value(val)
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: {key}: {exc}") from None
        lines[key] = lineno
    return values, lines


@dataclass
class Field:
    default: list
    kind: type = float
    scalar: bool = False
    choices: tuple = ()


def resolve(command: str, values: dict, lines: dict, params: bool) -> dict:
    """Validate ``values`` against the command's fields and fill defaults."""
    schema = SCHEMAS[command]
    out = {}
    for key, raw in values.items():
        where = f"line {lines.get(key, '?')}: {key}"
        if key in PARAM_KEYS and params:
            field = Field([], float)
        elif key in schema:
            field = schema[key]
        else:
            raise ConfigError(f"line {lines.get(key, '?')}: unknown key {key!r} for {command}")
        if field.scalar and len(raw) != 1:
            raise ConfigError(f"{where}: expected a single value")
        coerced = []
        for v in raw:
            if field.kind is str:
                v = str(v)
            elif field.kind is int:
                if not isinstance(v, int):
                    raise ConfigError(f"{where}: expected an integer, got {v!r}")
            elif isinstance(v, str):
                raise ConfigError(f"{where}: expected a number, got {v!r}")
            else:
                v = float(v)
            if field.choices and v not in field.choices:
                raise ConfigError(f"{where}: {v!r} is not one of {', '.join(map(str, field.choices))}")
            coerced.append(v)
        out[key] = coerced
    for key, field in schema.items():
        out.setdefault(key, list(field.default))
    return out


def _hardware(cfg: dict) -> HardwareParams:
    return HardwareParams(**{k: float(v[0]) for k, v in cfg.items() if k in PARAM_KEYS})


SCHEMAS = {
    "scaling": {
        "scheme": Field(list(scaling.SCHEMES), str, choices=scaling.SCHEMES),
        "eta_e": Field([0.1, 0.5, 0.9]),
        "n_p": Field(list(range(1, 101)), int),
        "mc_max_cycles": Field([2000.0], scalar=True),
    },
    "cutoffs": {
        "F_add": Field([0.99, 0.999, 0.9999]),
        "model": Field(["f_add"], str, True, ("f_add", "both")),
    },
    "swap-model": {
        "oracle": Field([0], int, True, (0, 1)),
        "n_max": Field([8], int, True),
    },
    "optimize-xi": {
        "n_p": Field([12], int),
        "grid": Field([2000], int, True),
        "tol": Field([1e-8], scalar=True),
        "eps": Field([], scalar=True),
    },
    "build-graph": {
        "copies": Field([1], int, True),
        "p_success": Field([1.0], scalar=True),
    },
    "mpc-run": {
        "function": Field(["ab"], str, True),
        "inputs": Field([], str),
        "source": Field(["ideal"], str, True, ("ideal", "built")),
        "p_success": Field([1.0], scalar=True),
    },
    "mpc-security": {
        "scenario": Field(list(SCENARIOS), str, choices=SCENARIOS),
        "variant": Field(["corrected", "transcribed"], str, choices=("corrected", "transcribed")),
    },
    "rate": {
        "n_conj": Field([], float),
        "M": Field([], float),
        "N": Field([2], int, True),
        "eps_f": Field([1e-3, 1e-12]),
        "eps_star": Field([0.157]),
        "R0": Field([1.0], scalar=True),
    },
}
PARAM_COMMANDS = {"cutoffs", "swap-model", "optimize-xi"}


# ---------------------------------------------------------------- commands
def _map(fn, items, workers: int):
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(fn, items))
    return [fn(item) for item in items]


def _scaling_point(task):
    scheme, eta, ns, trials, cap, seed = task
    rng = np.random.default_rng(seed)
    # the restart scheme grows exponentially, so only affordable points are sampled
    reachable = [n for n in ns if scheme == "emit_then_add" or scaling.expected_build_time(scheme, n, eta) <= cap]
    mean = se = None
    if trials > 1 and reachable:
        top = max(reachable)
        if scheme == "emit_then_add":
            samples = scaling.simulate_emit_then_add(eta, top, trials, rng)
        else:
            samples = scaling.simulate_deterministic(eta, top, trials, rng)
        mean, se = scaling.mc_summary(samples)
    rows = []
    for n in ns:
        hit = mean is not None and n in reachable
        rows.append((scheme, eta, n, scaling.expected_build_time(scheme, n, eta),
                     scaling.power_law_time(n, eta),
                     float(mean[n - 1]) if hit else None, float(se[n - 1]) if hit else None))
    return rows


def cmd_scaling(cfg: dict, args) -> tuple[list, list]:
    """Build-time curves; restart-scheme Monte Carlo only up to ``mc_max_cycles`` expected cycles."""
    header = ["scheme", "eta_e", "n_p", "expected_cycles", "power_law_cycles", "mc_cycles", "mc_stderr"]
    ns = sorted(set(cfg["n_p"]))
    if ns and ns[0] < 1:
        raise ConfigError("n_p: values must be positive")
    for eta in cfg["eta_e"]:
        if not 0 < eta <= 1:
            raise ConfigError(f"eta_e: {eta!r} outside (0, 1]")
    points = [(s, e) for s in cfg["scheme"] for e in cfg["eta_e"]]
    seeds = np.random.SeedSequence(args.seed).spawn(len(points))
    tasks = [(s, e, ns, args.trials, cfg["mc_max_cycles"][0], ss) for (s, e), ss in zip(points, seeds)]
    rows = [r for block in _map(_scaling_point, tasks, args.workers) for r in block]
    if args.t_rep is not None:
        header += ["expected_seconds", "mc_seconds"]
        rows = [r + (r[3] * args.t_rep, None if r[5] is None else r[5] * args.t_rep) for r in rows]
    return header, rows


def cmd_cutoffs(cfg: dict, args) -> tuple[list, list]:
    header = ["F_add", "n_max"]
    both = cfg["model"][0] == "both"
    if both:
        header.append("n_max_single_spin")
    base = _hardware(cfg)
    rows = []
    for f in cfg["F_add"]:
        try:
            row = [f, scaling.max_graph_size(f)]
        except ValueError as exc:
            raise ConfigError(f"F_add: {exc}") from None
        if both:
            params = base.replace(F_p=f, F_CZ=1.0, F_MCMR=1.0)
            row.append(scaling.max_graph_size_model(lambda n: fidelity_single_spin(params, n)))
        rows.append(tuple(row))
    return header, rows


def _swap_point(task):
    params, oracle, n_max = task
    row = [params.eta_e, params.eta_s, params.eta_i, params.xi, params.dark_mean,
           p_true(params), p_success(params), p_success_derived(params), f_swap(params)]
    if oracle:
        res = fock_oracle(params, FockConfig(n_max))
        row += [res.p_true, res.p_success, abs(row[5] - res.p_true) / res.p_true,
                abs(row[7] - res.p_success) / res.p_success]
    return tuple(row)


def _grid(cfg: dict, keys) -> list[HardwareParams]:
    base = {k: v for k, v in cfg.items() if k in PARAM_KEYS}
    axes = [base.get(k, [getattr(HardwareParams(), k)]) for k in keys]
    fixed = {k: float(v[0]) for k, v in base.items() if k not in keys}
    out = []
    for combo in np.array(np.meshgrid(*axes, indexing="ij")).reshape(len(keys), -1).T:
        try:
            out.append(HardwareParams(**fixed, **dict(zip(keys, map(float, combo)))))
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
    return out


def cmd_swap_model(cfg: dict, args) -> tuple[list, list]:
    """Closed-form swap probabilities over every listed hardware value."""
    header = ["eta_e", "eta_s", "eta_i", "xi", "dark_mean", "p_true", "p_success",
              "p_success_derived", "f_swap"]
    oracle = cfg["oracle"][0]
    if oracle:
        header += ["oracle_p_true", "oracle_p_success", "rel_err_p_true", "rel_err_p_success_derived"]
    grid = _grid(cfg, ("eta_e", "eta_s", "eta_i", "xi", "R_d", "t_exp"))
    rows = _map(_swap_point, [(p, oracle, cfg["n_max"][0]) for p in grid], args.workers)
    return header, rows


def _xi_point(task):
    params, n_p, grid, tol, eps = task
    res = optimize_xi(lambda x: fidelity_single_spin(params.replace(xi=x), n_p), grid=grid, tol=tol, eps=eps)
    return (params.eta_e, params.eta_s, params.eta_i, n_p, res.xi, res.value,
            res.grid_xi, res.grid_value, res.method, res.xi_eps)


def cmd_optimize_xi(cfg: dict, args) -> tuple[list, list]:
    """Best source squeezing for the single-spin fidelity at each point."""
    header = ["eta_e", "eta_s", "eta_i", "n_p", "xi_opt", "fidelity", "grid_xi", "grid_fidelity",
              "method", "xi_eps"]
    eps = cfg["eps"][0] if cfg["eps"] else None
    tasks = [(p, n, cfg["grid"][0], cfg["tol"][0], eps)
             for p in _grid(cfg, ("eta_e", "eta_s", "eta_i")) for n in cfg["n_p"]]
    return header, _map(_xi_point, tasks, args.workers)


LOG_COUNTERS = ("attempts", "elapsed_cycles", "photons_added", "cz_count", "pass_count", "patch_count",
                "pass_cz", "patch_cz")


def cmd_build_graph(cfg: dict, args) -> tuple[list, list]:
    """Build log, label permutation, byproducts and adjacency of each built copy."""
    header = ["copy", "kind", "index", "name", "targets", "value"]
    herald = HeraldModel(p_success=cfg["p_success"][0])
    seeds = np.random.SeedSequence(args.seed).spawn(cfg["copies"][0])
    rows = []
    for c, ss in enumerate(seeds, 1):
        sys_, log = build_G(herald, seed=int(ss.generate_state(1)[0]))
        for name in LOG_COUNTERS:
            rows.append((c, "counter", 0, name, "", getattr(log, name)))
        for i, (step, targets, bits) in enumerate(log.events, 1):
            rows.append((c, "event", i, step, " ".join(map(str, targets)), " ".join(map(str, bits))))
        for i, (src, dst) in enumerate(sorted(log.permutation.items(), key=lambda kv: kv[1]), 1):
            rows.append((c, "permutation", i, str(src), "", dst))
        state = relabeled_state(sys_)
        for i, node in enumerate(sorted(state.phases), 1):
            rows.append((c, "byproduct", i, str(node), "", "Z"))
        for i, (u, v) in enumerate(sorted(tuple(sorted(e)) for e in state.graph.edges()), 1):
            rows.append((c, "edge", i, "", f"{u} {v}", 1))
    return header, rows


NAMED_FUNCTIONS = {
    "ab": "parties 2\nparty 0 a\nparty 1 b\nand a b\n",
    "majority": "parties 3\nparty P1 a\nparty P2 b\nparty P3 c\nand a b\nand a c\nand b c\n",
}


def _load_function(name: str) -> BooleanFunctionSpec:
    text = NAMED_FUNCTIONS.get(name)
    if text is None:
        path = Path(name)
        if not path.is_file():
            raise ConfigError(f"function: {name!r} is neither {' nor '.join(NAMED_FUNCTIONS)} nor a file")
        text = path.read_text()
    try:
        return BooleanFunctionSpec.from_text(text)
    except ValueError as exc:
        raise ConfigError(f"function {name}: {exc}") from None


def cmd_mpc_run(cfg: dict, args) -> tuple[list, list]:
    """One honest run; ``inputs`` lists ``name:bit`` pairs, missing inputs default to 1."""
    spec = _load_function(cfg["function"][0])
    inputs = {v: 1 for v in spec.variables}
    for item in cfg["inputs"]:
        name, sep, bit = item.partition(":")
        name = name.strip()
        if not sep or name not in inputs or bit.strip() not in ("0", "1"):
            raise ConfigError(f"inputs: expected name:bit for a variable of the function, got {item!r}")
        inputs[name] = int(bit)
    herald = HeraldModel(p_success=cfg["p_success"][0])
    t = run_protocol(spec, inputs, seed=args.seed, source=cfg["source"][0], herald=herald)
    return ["kind", "copy", "name", "party", "basis", "value"], t.rows()


def cmd_mpc_security(cfg: dict, args) -> tuple[list, list]:
    """Stabilizer traces and exact real-vs-simulated view distributions."""
    header = ["kind", "scenario", "variant", "a", "b", "z_P", "z_S", "branches", "mismatches",
              "tv_distance", "view_uniform"]
    rows = []
    for scenario in cfg["scenario"]:
        for variant in cfg["variant"]:
            res = trace_security_stabilizers(scenario, variant=variant)
            rows.append(("trace", scenario, variant, "", "", "", "", res.branches, len(res.mismatches), "", ""))
        n = len(VIEW_FIELDS[scenario])
        for a, b, z_p, z_s in np.ndindex(2, 2, 2, 2):
            if scenario != "honest_P_S" and z_s:
                continue
            inputs = {"a": a, "b": b, "z_P": z_p, "z_S": z_s}
            real = transcript_distribution(scenario, inputs)
            tv = total_variation(real, ideal_simulator(scenario, inputs))
            uniform = is_uniform(marginal(real, range(n - 1)), n - 1)
            rows.append(("distribution", scenario, "", a, b, z_p, z_s if scenario == "honest_P_S" else "",
                         len(real), "", tv, int(uniform)))
    return header, rows


def cmd_rate(cfg: dict, args) -> tuple[list, list]:
    """Rate lower bound in units of the repetition rate, against conjunctions or input size."""
    if cfg["n_conj"] and cfg["M"]:
        raise ConfigError("rate: give either n_conj or M, not both")
    N = cfg["N"][0]
    if not cfg["M"] and not cfg["n_conj"]:
        cfg["n_conj"] = [float(r) for r in np.logspace(0, 6, 25)]
    if cfg["n_conj"]:
        if N != 2:
            raise ConfigError("N: conjunction counts convert to input size only for two parties")
        axis = [(r, inputs_for_conjunctions(r)) for r in cfg["n_conj"]]
    else:
        axis = [((m - 1) ** 2 if N == 2 else None, m) for m in cfg["M"]]
    header = ["n_conj", "M", "N", "eps_f", "eps_star", "K", "rate_in_R_rep_units"]
    if args.t_rep is not None:
        header.append("rate_per_second")
    rows = []
    for eps_f in cfg["eps_f"]:
        for eps_star in cfg["eps_star"]:
            for r, m in axis:
                try:
                    rate = rate_lower_bound(m, N, eps_f, eps_star, cfg["R0"][0])
                except (ValueError, UncorrectableError) as exc:
                    raise ConfigError(f"rate: {exc}") from None
                row = (r, m, N, eps_f, eps_star, repetition_ceiling(m, N, eps_f, eps_star), rate)
                if args.t_rep is not None:
                    row += (rate / args.t_rep,)
                rows.append(row)
    return header, rows


COMMANDS = {
    "scaling": cmd_scaling,
    "cutoffs": cmd_cutoffs,
    "swap-model": cmd_swap_model,
    "optimize-xi": cmd_optimize_xi,
    "build-graph": cmd_build_graph,
    "mpc-run": cmd_mpc_run,
    "mpc-security": cmd_mpc_security,
    "rate": cmd_rate,
}


# ------------------------------------------------------------------ output
def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, Fraction):
        return str(v)
    return str(v)


def render(command: str, cfg: dict, args, header, rows) -> str:
    buf = io.StringIO()
    buf.write(f"# {PROG} {__version__}\n# command: {command}\n# seed: {args.seed}\n")
    if command == "scaling":
        buf.write(f"# trials: {args.trials}\n")
    if args.t_rep is not None:
        buf.write(f"# t_rep_seconds: {args.t_rep!r}\n")
    for key in sorted(k for k in cfg if cfg[k]):
        buf.write(f"# config: {key}={', '.join(_cell(v) for v in cfg[key])}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows([_cell(v) for v in row] for row in rows)
    return buf.getvalue()


def write_atomic(path: Path, text: str) -> None:
    """Write through a temporary sibling so readers never see a partial file."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        os.unlink(tmp)
        raise


# --------------------------------------------------------------------- main
def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog=PROG, description=__doc__)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", type=Path, help="key=value experiment file")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--out", type=Path, help="CSV destination (default stdout)")
    parser.add_argument("--trials", type=int, default=10_000, help="Monte Carlo trials per point")
    parser.add_argument("--format", choices=("csv",), default="csv")
    parser.add_argument("--workers", type=int, default=1, help="processes for independent points")
    parser.add_argument("--t-rep", type=float, dest="t_rep",
                        help="repetition period in seconds; adds columns in seconds")
    return parser


def run(argv=None) -> str:
    """Parse ``argv`` and return the CSV text; raises ``ConfigError`` on bad input."""
    args = build_parser().parse_args(argv)
    if args.trials < 0 or args.workers < 1:
        raise ConfigError("--trials must be non-negative and --workers positive")
    if args.t_rep is not None and not (args.t_rep > 0 and math.isfinite(args.t_rep)):
        raise ConfigError("--t-rep must be a positive number of seconds")
    values, lines = {}, {}
    if args.config is not None:
        try:
            text = args.config.read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from None
        values, lines = parse_config(text)
    cfg = resolve(args.command, values, lines, args.command in PARAM_COMMANDS)
    header, rows = COMMANDS[args.command](cfg, args)
    text = render(args.command, cfg, args, header, rows)
    if args.out is not None:
        write_atomic(args.out, text)
    return text


def main(argv=None) -> int:
    try:
        text = run(argv)
    except ConfigError as exc:
        print(f"{PROG}: error: {exc}", file=sys.stderr)
        return 2
    if "--out" not in (argv if argv is not None else sys.argv[1:]):
        sys.stdout.write(text)
    return 0


if __name__ == "__main__":
    sys.exit(main())
