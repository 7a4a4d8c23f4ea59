"""Flop model of one device step for the direct and FFT strategies.

Counts are per device update and exclude one-off precomputation. The
threshold helpers return the offset ranges beyond which one strategy is
guaranteed to be cheaper than the other; between the two bounds the
comparison is undecided.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

from .model import CaseId, grid_cardinality, signal_length

LOG2E = math.log2(math.e)


@dataclass(frozen=True)
class FlopPrimitives:
    """Flop costs of the building blocks at vector length K."""

    K: int

    @property
    def psi(self) -> int:
        return self.K ** 2

    @property
    def hadamard(self) -> int:
        return 6 * self.K

    @property
    def inner(self) -> int:
        return 8 * self.K - 2

    @property
    def sum(self) -> int:
        return 2 * self.K - 2

    @property
    def fft(self) -> float:
        return 5 * self.K * math.log2(self.K) if self.K > 1 else 0.0

    @property
    def triple_rank_one(self) -> int:
        return 10 * self.K ** 2 + 4 * self.K


def flops_direct_per_device(case, L: int, M: int, D: int = 0, Omega: float = 0.0, Q: int = 1) -> int:
    case = CaseId.parse(case)
    Li = signal_length(case, L, D)
    X = grid_cardinality(case, D, Omega, Q)
    return X * (8 * Li * Li + 8 * Li * M + 10 * Li + 6 * M - 5)


def flops_fft_per_device(case, L: int, M: int, D: int = 0, Omega: float = 0.0, Q: int = 1) -> float:
    case = CaseId.parse(case)
    lq = Q * math.log2(Q) if Q > 1 else 0.0
    if case is CaseId.T:
        Lt = L + D
        lg = math.log2(Lt)
        return 10 * Lt * Lt * lg + 90 * Lt * Lt + 20 * Lt * lg + 16 * Lt * M + 6 * Lt
    if case is CaseId.F:
        return 90 * L * L + 16 * L * M + 6 * L + 15 * lq
    if case is CaseId.TF:
        Li = L + D
        return (20 * Li * Li * math.log2(Li) + 86 * Li * Li + 16 * Li * M
                + 6 * (D + 5 / 3) * Li + 15 * (D + 1) * lq)
    raise ValueError("the FFT strategy has no synchronous variant")


def _S(Omega: float, Q: int) -> int:
    return 2 * math.floor(Q * Omega / (2 * math.pi) + 1e-9) + (0 if abs(Omega - math.pi) < 1e-12 else 1)


@dataclass(frozen=True)
class CrossoverThresholds:
    Dbar_t: float
    Dunder_t: float
    Omegabar_f: float
    Omegaunder_f: float
    Dbar_tf: float
    Omegabar_tf: float
    Dunder_tf: float
    Omegaunder_tf: float


def crossover_thresholds(L: int, M: int, Q: int, D: int, Omega: float) -> CrossoverThresholds:
    """Offset-range bounds: direct is cheaper below the bar values, FFT above the under values."""
    if L < 6:
        warnings.warn("threshold bounds assume L >= 6", RuntimeWarning, stacklevel=2)
    pi = math.pi
    lgL = math.log2(L)
    lgQ = math.log2(Q) if Q > 1 else 0.0

    dbar_t = (math.sqrt((12 * L + 10 * M - 78) ** 2 + 48 * (78 * L + 6 * M))
              + 78 - 12 * L - 10 * M) / 24
    dunder_t = (26 + 5 * lgL) / (2 - 5 * LOG2E / L)

    obar_f = (39 * L + 3 * M) * pi / (Q * (6 * L + 5 * M))
    ounder_f = (120 * L + 20 * L * lgL + 24 * M + 16 * Q * lgQ) * pi / (8 * Q * (L + M))

    S = _S(Omega, Q)
    theta = (S * (12 * L + 10 * M + 12) - 90) ** 2 - 48 * S * (12 * L * S + 10 * M * S - 90 * L - 16 * M)
    if theta > 0:
        dbar_tf = (90 - S * (12 * L + 10 * M + 12) + math.sqrt(theta)) / (24 * S)
    else:
        dbar_tf = -1.0
    Ld = L + D
    obar_tf = pi / Q * ((90 * Ld + 16 * M) / ((D + 1) * (12 * Ld + 10 * M)) - 1)
    dunder_tf = max((112 + 20 * lgL - 8 * S) / (8 * S - 20 * LOG2E / L),
                    (16 * M + 16 * Q * lgQ) / (8 * M * S) - 1)
    ounder_tf = pi / Q * (((112 + 20 * lgL + 20 * LOG2E * D / L) * Ld + 16 * (M + Q * lgQ))
                          / (8 * (D + 1) * (Ld + M)) + 1)
    return CrossoverThresholds(dbar_t, dunder_t, obar_f, ounder_f, dbar_tf, obar_tf,
                               dunder_tf, ounder_tf)


@dataclass(frozen=True)
class Recommendation:
    strategy: str
    band: bool          # True when neither bound decides


def recommend_strategy(case, L: int, M: int, D: int = 0, Omega: float = 0.0, Q: int = 1) -> Recommendation:
    case = CaseId.parse(case)
    if case is CaseId.SYNC:
        return Recommendation("direct", False)
    th = crossover_thresholds(L, M, max(Q, 1), D, Omega)
    if case is CaseId.T:
        fft, direct = D > th.Dunder_t, D < th.Dbar_t
    elif case is CaseId.F:
        fft, direct = Omega > th.Omegaunder_f, Omega < th.Omegabar_f
    else:
        fft = D > th.Dunder_tf or Omega > th.Omegaunder_tf
        direct = D < th.Dbar_tf or Omega < th.Omegabar_tf
    if fft and not direct:
        return Recommendation("fft", False)
    if direct and not fft:
        return Recommendation("direct", False)
    return Recommendation("direct", True)


@dataclass(frozen=True)
class Order:
    """Growth of the per-iteration cost in L: L**exponent * (log L)**log_power."""

    exponent: float
    log_power: int

    def key(self):
        return (round(self.exponent, 12), self.log_power)


def asymptotic_order(case, strategy: str, s: float, q: float = 1.0) -> Order:
    """Order in L with N ~ L**s and, for CFO cases, Q ~ L**q (offset ranges fixed)."""
    case = CaseId.parse(case)
    sb = max(1.0, s)
    fft = str(strategy).lower() == "fft"
    if case is CaseId.T:
        return Order(1 + sb, int(s <= 1)) if fft else Order(1 + sb, 0)
    if case in (CaseId.F, CaseId.TF):
        if fft:
            e = max(sb, q - 1)
            return Order(1 + e, int(sb <= q - 1))
        return Order(1 + q + sb, 0)
    return Order(1 + sb, 0)


def compare_orders(case, s: float, q: float = 1.0) -> str:
    """'fft_higher', 'equal' or 'fft_lower'."""
    a = asymptotic_order(case, "direct", s, q).key()
    b = asymptotic_order(case, "fft", s, q).key()
    if b > a:
        return "fft_higher"
    return "equal" if a == b else "fft_lower"
