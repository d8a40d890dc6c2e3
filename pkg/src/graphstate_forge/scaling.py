"""Construction time and fidelity cutoffs versus photon number."""

from __future__ import annotations

import math
from fractions import Fraction

import numpy as np

SCHEMES = ("deterministic", "emit_then_add")
UNBOUNDED = math.inf


class DivergentTimeError(ValueError):
    """Zero emission efficiency: no build ever finishes."""


def _check(n_p: int, eta_e: float) -> None:
    if n_p < 1 or int(n_p) != n_p:
        raise ValueError("n_p must be a positive integer")
    if eta_e == 0:
        raise DivergentTimeError("eta_e = 0 never completes a build")
    if not 0 < eta_e <= 1:
        raise ValueError("eta_e must lie in (0, 1]")


def expected_build_time(scheme: str, n_p: int, eta_e: float) -> float:
    """Expected emission cycles to hold ``n_p`` photons.

    ``emit_then_add`` keeps earlier photons through failures: ``n_p / eta_e``.
    ``deterministic`` restarts on any loss, so it waits for ``n_p``
    consecutive successes: ``(eta_e^{-n_p} - 1) / (1 - eta_e)``.
    """
    _check(n_p, eta_e)
    if scheme == "emit_then_add":
        return n_p / eta_e
    if scheme == "deterministic":
        if eta_e == 1:
            return float(n_p)
        return math.expm1(-n_p * math.log(eta_e)) / (1 - eta_e)
    raise ValueError(f"unknown scheme {scheme!r}")


def power_law_time(n_p: int, eta_e: float) -> float:
    """``eta_e^{-n_p}``, the leading behaviour of the restart scheme."""
    _check(n_p, eta_e)
    return math.exp(-n_p * math.log(eta_e))


def simulate_emit_then_add(eta_e: float, n_max: int, trials: int, rng: np.random.Generator) -> np.ndarray:
    """Cycles to reach 1..n_max photons, shape ``(trials, n_max)``.

    Each photon costs a geometric number of attempts; column ``n-1`` is the
    running total, so one draw serves every ``n``.
    """
    _check(n_max, eta_e)
    return np.cumsum(rng.geometric(eta_e, size=(trials, n_max)), axis=1)


def simulate_deterministic(eta_e: float, n_max: int, trials: int, rng: np.random.Generator,
                           chunk: int = 256) -> np.ndarray:
    """First time each trial's success run reaches 1..n_max, shape ``(trials, n_max)``.

    Every trial is one Bernoulli stream; the run of consecutive successes
    resets on a failure, and the first cycle at which it reaches ``n`` is the
    build time for ``n`` photons.
    """
    _check(n_max, eta_e)
    out = np.zeros((trials, n_max), dtype=np.int64)
    run = np.zeros(trials, dtype=np.int64)
    best = np.zeros(trials, dtype=np.int64)
    clock = np.zeros(trials, dtype=np.int64)
    active = np.arange(trials)
    while active.size:
        hits = rng.random((active.size, chunk)) < eta_e
        r = run[active]
        b = best[active]
        t = clock[active]
        for step in range(chunk):
            r = np.where(hits[:, step], r + 1, 0)
            t = t + 1
            new = (r > b) & (r <= n_max)
            if new.any():
                rows = active[new]
                out[rows, r[new] - 1] = t[new]
                b = np.where(new, r, b)
        run[active], best[active], clock[active] = r, b, t
        active = active[best[active] < n_max]
    return out


def mc_summary(samples: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Column means and standard errors."""
    n = samples.shape[0]
    return samples.mean(axis=0), samples.std(axis=0, ddof=1) / math.sqrt(n)


def max_graph_size(f_add) -> float | int:
    """Largest ``n`` with ``f_add^n >= 1/2``, compared in exact rational arithmetic.

    ``f_add`` may be a float, a decimal string or a ``Fraction``; floats are
    taken at their decimal representation. Returns ``UNBOUNDED`` for 1.
    """
    f = Fraction(str(f_add)) if not isinstance(f_add, Fraction) else f_add
    if f == 1:
        return UNBOUNDED
    if not 0 < f < 1:
        raise ValueError("F_add must lie in (0, 1]")
    half = Fraction(1, 2)
    guess = max(0, int(math.log(0.5) / math.log(float(f))))
    n = guess
    while n > 0 and f ** n < half:
        n -= 1
    while f ** (n + 1) >= half:
        n += 1
    return n


def max_graph_size_model(fidelity, n_limit: int = 100_000) -> int:
    """Largest ``n`` with ``fidelity(n) >= 1/2`` for a fidelity decreasing in ``n``."""
    if fidelity(1) < 0.5:
        return 0
    lo, hi = 1, 2
    while hi <= n_limit and fidelity(hi) >= 0.5:
        lo, hi = hi, 2 * hi
    hi = min(hi, n_limit + 1)
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if fidelity(mid) >= 0.5:
            lo = mid
        else:
            hi = mid
    return lo
