"""Truncated Fock-space model of the swap herald.

Everything is built from explicit amplitudes: the two-mode squeezed pair
state summed to ``n_max`` pairs, loss as a beamsplitter onto an
environment mode that is traced out, the 50:50 beamsplitter as a
polynomial map on creation operators, and Poisson dark counts added per
detector afterwards.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .channel import HardwareParams, dark_count_prob

MAX_PAIRS = 10


class CapacityError(ValueError):
    """Requested truncation exceeds the dimension guard."""


@dataclass(frozen=True)
class FockConfig:
    """Pair-number truncation for the source state."""

    n_max: int = 8

    def __post_init__(self):
        if self.n_max < 2:
            raise ValueError("n_max must be at least 2")
        if self.n_max > MAX_PAIRS:
            raise CapacityError(f"n_max={self.n_max} exceeds the limit of {MAX_PAIRS}")

    def truncation_bound(self, xi: float) -> float:
        """Weight of the discarded pair numbers, ``sum_{n > n_max} (n+1)(1-xi)^2 xi^n``."""
        n = self.n_max + 1
        return xi ** n * (n + 1 - n * xi)


@dataclass(frozen=True)
class OracleResult:
    p_true: float
    p_success: float
    emitter_overlap: float
    pair_overlap: float
    bell_fraction: float
    norm: float
    truncation: float


def _loss_kraus(k: int, eta: float):
    """Branches ``(kept, lost, amplitude)`` of k photons through transmittance eta."""
    for lost in range(k + 1):
        amp = math.sqrt(math.comb(k, lost) * eta ** (k - lost) * (1 - eta) ** lost)
        if amp:
            yield k - lost, lost, amp


def lossy_pair_state(params: HardwareParams, cfg: FockConfig) -> dict:
    """Environment record -> {(signal u, signal v, idler u, idler v): amplitude}."""
    xi = params.xi
    norm = 1.0 - xi
    tanh_r = math.sqrt(xi)
    records: dict = {}
    for n in range(cfg.n_max + 1):
        base = norm * tanh_r ** n
        for m in range(n + 1):
            amp0 = base * (-1) ** m
            su, sv, iu, iv = n - m, m, m, n - m
            for su2, lsu, a1 in _loss_kraus(su, params.eta_s):
                for sv2, lsv, a2 in _loss_kraus(sv, params.eta_s):
                    for iu2, liu, a3 in _loss_kraus(iu, params.eta_i):
                        for iv2, liv, a4 in _loss_kraus(iv, params.eta_i):
                            rec = records.setdefault((lsu, lsv, liu, liv), {})
                            key = (su2, sv2, iu2, iv2)
                            rec[key] = rec.get(key, 0.0) + amp0 * a1 * a2 * a3 * a4
    return records


def lossy_emitter_state(eta_e: float) -> dict:
    """Environment record -> {(emitter bit, photon u, photon v): amplitude}."""
    ideal = {(0, 1, 0): 1 / math.sqrt(2), (1, 0, 1): -1 / math.sqrt(2)}
    records: dict = {}
    for (e, u, v), amp in ideal.items():
        for u2, lu, a1 in _loss_kraus(u, eta_e):
            for v2, lv, a2 in _loss_kraus(v, eta_e):
                rec = records.setdefault((lu, lv), {})
                rec[(e, u2, v2)] = rec.get((e, u2, v2), 0.0) + amp * a1 * a2
    return records


def _overlap(records: dict, target: dict) -> float:
    """``<t| rho |t>`` for rho given as a sum over environment records."""
    total = 0.0
    for rec in records.values():
        amp = sum(np.conj(a) * rec.get(k, 0.0) for k, a in target.items())
        total += abs(amp) ** 2
    return total


@lru_cache(maxsize=None)
def beamsplitter_output(p: int, q: int) -> tuple:
    """|p>_a |q>_b -> sum_j amp_j |j>_c |p+q-j>_d for a^+ = (c^+ + d^+)/sqrt2, b^+ = (c^+ - d^+)/sqrt2."""
    poly = np.zeros(p + q + 1)
    # coefficient of c^j d^(p+q-j)
    for i in range(p + 1):
        for k in range(q + 1):
            poly[i + k] += math.comb(p, i) * math.comb(q, k) * (-1) ** (q - k)
    scale = 1.0 / math.sqrt(2.0 ** (p + q) * math.factorial(p) * math.factorial(q))
    n = p + q
    return tuple(poly[j] * scale * math.sqrt(math.factorial(j) * math.factorial(n - j)) for j in range(n + 1))


def _bell_fraction() -> float:
    """Success-pattern probability for the ideal emitter and pair states."""
    s = 1 / math.sqrt(2)
    psi_e = {(0, 1, 0): s, (1, 0, 1): -s}
    psi_p = {(1, 0, 0, 1): s, (0, 1, 1, 0): -s}
    out: dict = {}
    for (e, au, av), x in psi_e.items():
        for (bu, bv, iu, iv), y in psi_p.items():
            for cu, amp_u in enumerate(beamsplitter_output(au, bu)):
                for cv, amp_v in enumerate(beamsplitter_output(av, bv)):
                    pattern = (cu, au + bu - cu, cv, av + bv - cv)
                    key = (pattern, e, iu, iv)
                    out[key] = out.get(key, 0.0) + x * y * amp_u * amp_v
    prob = 0.0
    for (pattern, *_), amp in out.items():
        cu, du, cv, dv = pattern
        if cu + du == 1 and cv + dv == 1:
            prob += amp ** 2
    return prob


def _signal_marginal(records: dict, n_max: int) -> np.ndarray:
    dist = np.zeros((n_max + 1, n_max + 1))
    for rec in records.values():
        for (su, sv, _, _), amp in rec.items():
            dist[su, sv] += amp ** 2
    return dist


def _emitter_photon_marginal(records: dict) -> np.ndarray:
    dist = np.zeros((2, 2))
    for rec in records.values():
        for (_, u, v), amp in rec.items():
            dist[u, v] += amp ** 2
    return dist


def _detector_distribution(p: int, q: int) -> dict:
    """Click counts (c, d) for p photons in port a and q in port b."""
    return {(j, p + q - j): a * a for j, a in enumerate(beamsplitter_output(p, q)) if a}


def fock_oracle(params: HardwareParams, cfg: FockConfig | None = None) -> OracleResult:
    """Truncated-Fock values of the true-projection and success probabilities."""
    cfg = cfg or FockConfig()
    pair = lossy_pair_state(params, cfg)
    emit = lossy_emitter_state(params.eta_e)
    s = 1 / math.sqrt(2)
    emitter_overlap = _overlap(emit, {(0, 1, 0): s, (1, 0, 1): -s})
    pair_overlap = _overlap(pair, {(1, 0, 0, 1): s, (0, 1, 1, 0): -s})
    bell = _bell_fraction()
    d = [dark_count_prob(k, params) for k in range(2)]
    p_t = emitter_overlap * pair_overlap * bell * d[0] ** 4

    sig = _signal_marginal(pair, cfg.n_max)
    em = _emitter_photon_marginal(emit)
    # one polarization succeeds when c + d + darks == 1 across its two detectors
    dark_pair = {(0, 0): d[0] * d[0], (1, 0): d[1] * d[0], (0, 1): d[0] * d[1]}

    def pol_ok(e_count: int, s_count: int) -> float:
        tot = 0.0
        for (c, dd), pc in _detector_distribution(e_count, s_count).items():
            for (xc, xd), px in dark_pair.items():
                if c + xc + dd + xd == 1:
                    tot += pc * px
        return tot

    ok = np.array([[pol_ok(e, k) for k in range(cfg.n_max + 1)] for e in range(2)])
    p_s = 0.0
    for eu in range(2):
        for ev in range(2):
            if em[eu, ev]:
                p_s += em[eu, ev] * float(ok[eu] @ sig @ ok[ev])
    return OracleResult(p_t, p_s, emitter_overlap, pair_overlap, bell, float(sig.sum()),
                        cfg.truncation_bound(params.xi))
