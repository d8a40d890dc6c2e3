"""Herald, loss, dark-count, dephasing and fidelity formulas.

All times share one unit (multiples of ``t_rep`` by convention). Dark
counts enter only through ``R_d * t_exp``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import asdict, dataclass, fields, replace
from typing import Callable, Iterable

import numpy as np
from scipy import optimize, stats

from .tableau import StabilizerState


class UndefinedRatioError(ZeroDivisionError):
    """F_swap requested where the herald probability vanishes."""


class SwapModelWarning(UserWarning):
    """P_t exceeded P_s, which signals inconsistent inputs."""


@dataclass(frozen=True)
class HardwareParams:
    """Scalar device parameters; ``F_add`` is derived, never stored."""

    eta_e: float = 1.0
    eta_s: float = 1.0
    eta_i: float = 1.0
    xi: float = 0.05
    R_d: float = 0.0
    t_exp: float = 1.0
    t_rep: float = 1.0
    t_add: float = 0.0
    tau_e: float = math.inf
    tau_s: float = math.inf
    F_e: float = 1.0
    F_p: float = 1.0
    F_CZ: float = 1.0
    F_MCMR: float = 1.0

    def __post_init__(self):
        for name in ("eta_e", "eta_s", "eta_i"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {v}")
        if not 0.0 <= self.xi < 1.0:
            raise ValueError(f"xi must lie in [0, 1), got {self.xi}")
        if self.R_d < 0 or self.t_exp < 0:
            raise ValueError("R_d and t_exp must be non-negative")
        if self.t_rep <= 0 or self.t_add < 0:
            raise ValueError("t_rep must be positive and t_add non-negative")
        if self.tau_e <= 0 or self.tau_s <= 0:
            raise ValueError("coherence times must be positive")
        for name in ("F_e", "F_p", "F_CZ", "F_MCMR"):
            v = getattr(self, name)
            if not 0.0 < v <= 1.0:
                raise ValueError(f"{name} must lie in (0, 1], got {v}")

    @property
    def F_add(self) -> float:
        return self.F_p * self.F_CZ * self.F_MCMR

    @property
    def dark_mean(self) -> float:
        return self.R_d * self.t_exp

    def replace(self, **changes) -> "HardwareParams":
        return replace(self, **changes)

    @classmethod
    def from_text(cls, text: str) -> "HardwareParams":
        """Parse ``key=value`` lines; ``#`` starts a comment."""
        names = {f.name for f in fields(cls)}
        values = {}
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, val = (part.strip() for part in line.partition("="))
            if not sep:
                raise ValueError(f"line {lineno}: expected key=value, got {raw!r}")
            if key not in names:
                raise ValueError(f"line {lineno}: unknown parameter {key!r}")
            if key in values:
                raise ValueError(f"line {lineno}: duplicate parameter {key!r}")
            try:
                values[key] = float(val)
            except ValueError:
                raise ValueError(f"line {lineno}: {key} is not a number: {val!r}") from None
        return cls(**values)

    def to_text(self) -> str:
        return "".join(f"{k}={v!r}\n" for k, v in asdict(self).items())


# ------------------------------------------------------------ herald model
def dark_count_prob(n_d: int, params: HardwareParams | float) -> float:
    """Poisson probability of ``n_d`` dark counts on one detector."""
    mean = params.dark_mean if isinstance(params, HardwareParams) else float(params)
    if mean < 0:
        raise ValueError("dark-count rate must be non-negative")
    if n_d < 0:
        raise ValueError("n_d must be non-negative")
    return float(stats.poisson.pmf(n_d, mean))


def pair_projection_prob(params: HardwareParams) -> float:
    """Overlap of the lossy pair-source state with the ideal singlet pair."""
    es, ei, xi = params.eta_s, params.eta_i, params.xi
    nsi = (1 - es) * (1 - ei) * xi
    return es * ei * xi * (nsi + 2) * (1 - xi) ** 2 / (1 - nsi) ** 4


def p_true(params: HardwareParams) -> float:
    """Probability of a true Bell projection per herald attempt."""
    d0 = dark_count_prob(0, params)
    return 0.5 * params.eta_e * pair_projection_prob(params) * d0 ** 4


def p_success(params: HardwareParams) -> float:
    """Probability of a success click pattern, three-term closed form."""
    ee, es, xi = params.eta_e, params.eta_s, params.xi
    ne = 1 - ee
    g = 1 - (1 - es) * xi
    d0, d1 = dark_count_prob(0, params), dark_count_prob(1, params)
    w = (1 - xi) ** 2
    two_dark = 3 * ne / g ** 2 * w * d1 ** 2 * d0 ** 2
    one_dark = (ee / g ** 2 + 4 * ne * es * xi / g ** 3) * w * d1 * d0 ** 3
    no_dark = (ee * es * xi / g ** 3 + ne * es ** 2 * xi ** 2 / g ** 4) * w * d0 ** 4
    return two_dark + one_dark + no_dark


def p_success_derived(params: HardwareParams) -> float:
    """Success probability from per-polarization click counting.

    Signal u and v counts are independent geometric variables after loss;
    each polarization needs exactly one count from the emitter photon, the
    signal mode or the two detectors' dark counts.
    """
    ee, es, xi = params.eta_e, params.eta_s, params.xi
    g = 1 - (1 - es) * xi
    q0 = (1 - xi) / g
    q1 = q0 * es * xi / g
    d0, d1 = dark_count_prob(0, params), dark_count_prob(1, params)
    zero = q0 * d0 ** 2
    one = q1 * d0 ** 2 + q0 * 2 * d1 * d0
    return ee * zero * one + (1 - ee) * one ** 2


def f_swap(params: HardwareParams, success: Callable = p_success) -> float:
    """``P_t / P_s``; clamps to 1 with a warning if P_t exceeds P_s."""
    ps = success(params)
    if ps <= 0.0:
        raise UndefinedRatioError("herald probability is zero")
    ratio = p_true(params) / ps
    if ratio > 1.0 + 1e-12:
        warnings.warn(f"P_t/P_s = {ratio!r} exceeds 1", SwapModelWarning, stacklevel=2)
        return 1.0
    return ratio


# --------------------------------------------------------------- dephasing
def dephase_fidelity(t: float, tau: float) -> float:
    """Identity-branch probability ``(1 + e^{-t/tau}) / 2``."""
    if t < 0 or tau <= 0:
        raise ValueError("need t >= 0 and tau > 0")
    return 0.5 * (1.0 + math.exp(-t / tau))


def emitter_dephasing_fidelity(n_p: int, params: HardwareParams) -> float:
    if n_p < 0:
        raise ValueError("n_p must be non-negative")
    return dephase_fidelity(params.t_rep + params.t_add, params.tau_e) ** n_p


def aux_dephasing_fidelity(r: int, p_s: float, params: HardwareParams,
                           exact: bool = True, mcmr: bool = True) -> float:
    """Mean spin dephasing fidelity over the herald waiting time for r photons."""
    if r < 0:
        raise ValueError("r must be non-negative")
    if not 0.0 < p_s <= 1.0:
        raise ValueError("p_s must lie in (0, 1]")
    t = params.t_rep + (p_s * params.t_add if mcmr else 0.0)
    x = t / params.tau_s
    if exact:
        return 0.5 * (1.0 + (p_s / (p_s + math.expm1(x))) ** r)
    return 0.5 * (1.0 + math.exp(-r * x / p_s))


def herald_waiting_pmf(m: int, r: int, p_s: float) -> float:
    """Probability that the r-th success lands on trial m."""
    if r < 1:
        raise ValueError("r must be at least 1")
    if m < r:
        return 0.0
    return float(stats.nbinom.pmf(m - r, r, p_s))


def sample_waiting_trials(r: int, p_s: float, size: int, rng: np.random.Generator) -> np.ndarray:
    """Trials needed for r successes, ``size`` draws."""
    return r + rng.negative_binomial(r, p_s, size=size)


# --------------------------------------------------------- composed models
def fidelity_single_spin(params: HardwareParams, n_p: int) -> float:
    """Fidelity of an n_p-photon graph built on one auxiliary spin."""
    if n_p < 1:
        raise ValueError("n_p must be at least 1")
    ps = p_success(params)
    return ((params.F_add * f_swap(params)) ** n_p
            * emitter_dephasing_fidelity(n_p, params)
            * aux_dephasing_fidelity(n_p, ps, params))


def fidelity_G(params: HardwareParams) -> float:
    """Single-copy fidelity of the 12-photon protocol graph (herald = eta_e)."""
    ps = params.eta_e
    if ps <= 0:
        raise ValueError("eta_e must be positive")
    return (params.F_add ** 12 * params.F_CZ ** 5
            * emitter_dephasing_fidelity(12, params)
            * aux_dephasing_fidelity(12, ps, params)
            * aux_dephasing_fidelity(4, ps, params) ** 2)


# -------------------------------------------------------------- optimizer
@dataclass(frozen=True)
class XiOptimum:
    xi: float
    value: float
    grid_xi: float
    grid_value: float
    method: str
    xi_eps: float | None = None


def optimize_xi(objective: Callable[[float], float], bounds=(0.0, 1.0), tol: float = 1e-8,
                grid: int = 10_000, eps: float | None = None) -> XiOptimum:
    """Maximize ``objective`` on the open interval ``bounds``.

    A dense grid locates the best cell, golden-section search refines it
    inside the neighbouring bracket, and the grid value guards the result.
    With ``eps`` the largest xi above the optimum whose value stays within
    ``eps`` of the maximum is also returned (trades fidelity for rate).
    """
    lo, hi = map(float, bounds)
    if not lo < hi:
        raise ValueError(f"empty bracket {bounds}")
    xs = np.linspace(lo, hi, grid + 2)[1:-1]
    vals = np.array([objective(float(x)) for x in xs])
    if not np.all(np.isfinite(vals)):
        raise ValueError("objective is not finite on the grid")
    i = int(np.argmax(vals))
    gx, gv = float(xs[i]), float(vals[i])
    method = "grid"
    best_x, best_v = gx, gv
    if 0 < i < len(xs) - 1 and vals[i - 1] < gv and vals[i + 1] < gv:
        res = optimize.minimize_scalar(lambda x: -objective(x), method="golden",
                                       bracket=(xs[i - 1], gx, xs[i + 1]),
                                       options={"xtol": tol})
        if lo < res.x < hi and -res.fun >= gv:
            best_x, best_v, method = float(res.x), float(-res.fun), "golden"
    x_eps = None
    if eps is not None:
        if eps < 0:
            raise ValueError("eps must be non-negative")
        target = best_v - eps
        top = float(np.nextafter(hi, lo))
        if objective(top) >= target:
            x_eps = top
        else:
            x_eps = float(optimize.brentq(lambda x: objective(x) - target, best_x, top, xtol=tol))
    return XiOptimum(best_x, best_v, gx, gv, method, x_eps)


# ------------------------------------------------- dephasing on ensembles
def _state_key(state: StabilizerState) -> bytes:
    xs, zs, r = state.canonical()
    return xs.tobytes() + zs.tobytes() + r.tobytes()


class StabilizerEnsemble:
    """Finite mixture of stabilizer states with generic (float or symbolic) weights."""

    def __init__(self, members: Iterable[tuple[StabilizerState, object]] = ()):
        self._members: dict[bytes, list] = {}
        for state, w in members:
            self.add(state, w)

    def add(self, state: StabilizerState, weight) -> None:
        key = _state_key(state)
        if key in self._members:
            self._members[key][1] = self._members[key][1] + weight
        else:
            self._members[key] = [state, weight]

    def __len__(self) -> int:
        return len(self._members)

    def items(self):
        return [(s, w) for s, w in self._members.values()]

    def weight_of(self, state: StabilizerState):
        entry = self._members.get(_state_key(state))
        return 0 if entry is None else entry[1]

    def dephase(self, qubit: int, survival) -> "StabilizerEnsemble":
        """Apply Z with probability ``(1 - survival)/2`` on ``qubit``."""
        out = StabilizerEnsemble()
        keep = (1 + survival) / 2
        flip = (1 - survival) / 2
        for state, w in self.items():
            out.add(state.copy(), w * keep)
            z = state.copy()
            z.z(qubit)
            out.add(z, w * flip)
        return out


def dephase_ensemble(ensemble: StabilizerEnsemble, qubit: int, t: float, tau: float) -> StabilizerEnsemble:
    return ensemble.dephase(qubit, math.exp(-t / tau))


# ---------------------------------------------- join/extend bookkeeping
@dataclass
class MixtureReport:
    """Sign-pattern ensemble of the spin-generated generators."""

    variants: list
    ensemble: dict
    fidelity: object
    factors: list


def mixture_dephase_bookkeeping(trace, tau, exp: Callable = math.exp) -> MixtureReport:
    """Track dephasing sign bits through a sequence of passes onto one spin.

    ``trace`` lists ``(variant, t)``: the pass type and how long the spin
    dephased before it. A join folds the new bit into the spin generator's
    sign; an extend freezes that sign on the photon and opens a new one.
    Keys of ``ensemble`` are the frozen-sign tuples followed by the live
    sign; ``fidelity`` is the weight of the all-zero pattern. ``factors``
    are the per-pair fidelity factors for consecutive steps.
    """
    variants = []
    ens = {(): 1}
    steps = list(trace)
    if not steps:
        raise ValueError("empty trace")
    for idx, item in enumerate(steps):
        try:
            variant, t = item
        except (TypeError, ValueError):
            raise ValueError(f"malformed trace entry {item!r}") from None
        if variant not in ("join", "extend"):
            raise ValueError(f"unknown variant {variant!r}")
        lam = exp(-t / tau)
        p = {0: (1 + lam) / 2, 1: (1 - lam) / 2}
        new = {}
        for key, w in ens.items():
            for b in (0, 1):
                if not key:
                    k2 = (b,)
                elif variant == "join":
                    k2 = key[:-1] + ((key[-1] + b) % 2,)
                else:
                    k2 = key + (b,)
                new[k2] = new.get(k2, 0) + w * p[b]
        ens = new
        variants.append(variant)
    zero = tuple(0 for _ in next(iter(ens)))
    factors = []
    for (_, tk), (v, tm) in zip(steps, steps[1:]):
        if v == "join":
            factors.append((1 + exp(-(tk + tm) / tau)) / 2)
        else:
            factors.append((1 + exp(-tk / tau)) * (1 + exp(-tm / tau)) / 4)
    return MixtureReport(variants, ens, ens.get(zero, 0), factors)
