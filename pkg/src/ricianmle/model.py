"""System model: pilots, Rician channels, offsets and received signals.

Shapes follow the usual convention in this package: pilots are ``L x N``
(one column per device), the LoS matrix is ``M x N``, received signals are
``L_i x M`` where ``L_i`` is the observation length of the case.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

TWO_PI = 2.0 * math.pi


class CaseId(str, enum.Enum):
    SYNC = "sync"
    T = "t"
    F = "f"
    TF = "tf"

    @property
    def has_sto(self) -> bool:
        return self in (CaseId.T, CaseId.TF)

    @property
    def has_cfo(self) -> bool:
        return self in (CaseId.F, CaseId.TF)

    @classmethod
    def parse(cls, value) -> "CaseId":
        if isinstance(value, CaseId):
            return value
        key = str(value).strip().lower().replace("(", "").replace(")", "").replace(",", "")
        aliases = {"sync": cls.SYNC, "syn": cls.SYNC, "t": cls.T, "f": cls.F, "tf": cls.TF}
        if key not in aliases:
            raise ValueError(f"unknown case {value!r}; expected one of sync, t, f, tf")
        return aliases[key]


def signal_length(case: CaseId, L: int, D: int) -> int:
    """Observation length L_i: pilots are extended by D symbols when delays exist."""
    return L + D if CaseId.parse(case).has_sto else L


@dataclass(frozen=True)
class SystemParams:
    case: CaseId
    N: int
    M: int
    L: int
    D: int = 0
    Omega: float = 0.0          # max |CFO| in rad/symbol
    Q: int = 1                  # CFO grid density
    noise_var: float = 1.0
    active_prob: float = 0.1

    def __post_init__(self):
        object.__setattr__(self, "case", CaseId.parse(self.case))
        for name in ("N", "M", "L", "Q"):
            if int(getattr(self, name)) < 1:
                raise ValueError(f"{name} must be a positive integer")
        if self.D < 0:
            raise ValueError("D must be non-negative")
        if not 0.0 <= self.Omega <= math.pi + 1e-12:
            raise ValueError("Omega must lie in [0, pi]")
        if self.noise_var <= 0:
            raise ValueError("noise_var must be positive")
        if not 0.0 < self.active_prob <= 1.0:
            raise ValueError("active_prob must lie in (0, 1]")
        if not self.case.has_sto and self.D != 0:
            raise ValueError(f"case {self.case.value} requires D = 0")
        if self.case.has_cfo and self.Omega <= 0:
            raise ValueError(f"case {self.case.value} requires Omega > 0")
        if not self.case.has_cfo and self.Omega != 0:
            raise ValueError(f"case {self.case.value} requires Omega = 0")

    @property
    def L_i(self) -> int:
        return signal_length(self.case, self.L, self.D)


@dataclass(frozen=True)
class ChannelStatistics:
    """Large-scale power g, Rician factor kappa and normalized LoS matrix Hbar."""

    g: np.ndarray
    kappa: np.ndarray
    Hbar: np.ndarray

    def __post_init__(self):
        g = np.asarray(self.g, dtype=float)
        kappa = np.asarray(self.kappa, dtype=float)
        Hbar = np.asarray(self.Hbar, dtype=complex)
        if Hbar.ndim != 2 or g.shape != (Hbar.shape[1],) or kappa.shape != g.shape:
            raise ValueError("g, kappa must be length-N vectors and Hbar must be M x N")
        if np.any(g <= 0):
            raise ValueError("g must be positive")
        if np.any(kappa < 0):
            raise ValueError("kappa must be non-negative")
        if np.max(np.abs(np.abs(Hbar) - 1.0), initial=0.0) > 1e-12:
            raise ValueError("Hbar entries must have unit modulus")
        object.__setattr__(self, "g", g)
        object.__setattr__(self, "kappa", kappa)
        object.__setattr__(self, "Hbar", Hbar)

    @classmethod
    def uniform(cls, Hbar, g: float = 1.0, kappa: float = 0.1) -> "ChannelStatistics":
        N = np.asarray(Hbar).shape[1]
        return cls(np.full(N, float(g)), np.full(N, float(kappa)), Hbar)

    @property
    def N(self) -> int:
        return self.g.shape[0]

    @property
    def M(self) -> int:
        return self.Hbar.shape[0]

    @property
    def gamma(self) -> np.ndarray:
        """Diagonal of Gamma, g / (1 + kappa)."""
        return self.g / (1.0 + self.kappa)


@dataclass
class Scenario:
    a_true: np.ndarray
    t_true: np.ndarray
    omega_true: np.ndarray
    Htilde: np.ndarray
    Z: np.ndarray
    seed: object = None

    @property
    def n_active(self) -> int:
        return int(np.sum(self.a_true))


@dataclass(frozen=True)
class ReceivedSignal:
    case: CaseId
    Y: np.ndarray


@dataclass(frozen=True)
class OffsetGrid:
    """Finite candidate set for one case.

    Candidates are ``(t, q)`` pairs ordered by STO first, then by CFO grid
    index ``q`` (0-based, so the CFO value is ``2*pi*q/Q``).
    """

    case: CaseId
    D: int
    Omega: float
    Q: int
    sto_candidates: tuple
    cfo_indices: tuple
    candidates: np.ndarray = field(repr=False)

    @property
    def cardinality(self) -> int:
        return self.candidates.shape[0]

    @property
    def cfo_values(self) -> np.ndarray:
        return TWO_PI * np.asarray(self.cfo_indices, dtype=float) / self.Q

    @property
    def cfo_candidates(self) -> list:
        return list(zip(self.cfo_indices, self.cfo_values.tolist()))

    @property
    def shape(self) -> tuple:
        return (len(self.sto_candidates), len(self.cfo_indices))

    def t_of(self, k) -> np.ndarray:
        return self.candidates[np.asarray(k), 0]

    def omega_of(self, k) -> np.ndarray:
        return TWO_PI * self.candidates[np.asarray(k), 1] / self.Q

    def index_of(self, t: int, q: int) -> int:
        i = self.sto_candidates.index(int(t))
        j = self.cfo_indices.index(int(q))
        return i * len(self.cfo_indices) + j


def cfo_grid_indices(Omega: float, Q: int) -> list:
    """Grid indices q (0-based) with 2*pi*q/Q in [0, Omega] or [2*pi - Omega, 2*pi)."""
    if Omega >= math.pi - 1e-12:
        return list(range(Q))
    k = math.floor(Q * Omega / TWO_PI + 1e-9)
    return sorted(set(range(0, k + 1)) | set(range(Q - k, Q)))


def offset_grid(case, D: int = 0, Omega: float = 0.0, Q: int = 1) -> OffsetGrid:
    case = CaseId.parse(case)
    if case.has_cfo and Q < 1:
        raise ValueError("Q must be positive for cases with CFO")
    sto = tuple(range(D + 1)) if case.has_sto else (0,)
    if case.has_cfo:
        cfo = tuple(cfo_grid_indices(Omega, Q))
        Qeff = Q
    else:
        cfo, Qeff = (0,), max(Q, 1)
    cand = np.array([(t, q) for t in sto for q in cfo], dtype=np.int64)
    return OffsetGrid(case, D if case.has_sto else 0, Omega if case.has_cfo else 0.0,
                      Qeff, sto, cfo, cand)


def grid_cardinality(case, D: int, Omega: float, Q: int) -> int:
    """Closed-form candidate count (used by the flop model)."""
    case = CaseId.parse(case)
    nq = Q + (0 if abs(Omega - math.pi) < 1e-12 else 2 * math.floor(Q * Omega / TWO_PI + 1e-9) + 1 - Q)
    return {CaseId.SYNC: 1, CaseId.T: D + 1, CaseId.F: nq, CaseId.TF: (D + 1) * nq}[case]


def wrap_cfo(omega) -> np.ndarray:
    """Map CFOs from [-pi, pi] to [0, 2*pi)."""
    return np.mod(np.asarray(omega, dtype=float), TWO_PI)


def nearest_cfo_index(omega, Q: int) -> np.ndarray:
    return np.mod(np.rint(wrap_cfo(omega) * Q / TWO_PI).astype(np.int64), Q)


def tau(omega: float, length: int) -> np.ndarray:
    """Phase ramp (e^{j l omega})_{l=0..length-1}."""
    return np.exp(1j * omega * np.arange(length))


def equivalent_pilot(case, p, t: int = 0, omega: float = 0.0, D: int = 0) -> np.ndarray:
    case = CaseId.parse(case)
    p = np.asarray(p, dtype=complex)
    if case.has_sto:
        if not 0 <= t <= D:
            raise ValueError(f"time offset {t} outside 0..{D}")
        out = np.zeros(p.shape[0] + D, dtype=complex)
        out[t:t + p.shape[0]] = p
    else:
        if t != 0:
            raise ValueError(f"case {case.value} has no time offset")
        out = p.copy()
    if case.has_cfo:
        out *= tau(omega, out.shape[0])
    return out


def pilot_matrix(case, P, t=None, omega=None, D: int = 0) -> np.ndarray:
    """Equivalent pilot matrix P_i(x) with one column per device."""
    case = CaseId.parse(case)
    P = np.asarray(P, dtype=complex)
    L, N = P.shape
    t = np.zeros(N, dtype=np.int64) if t is None else np.asarray(t, dtype=np.int64)
    omega = np.zeros(N) if omega is None else np.asarray(omega, dtype=float)
    Li = signal_length(case, L, D)
    out = np.zeros((Li, N), dtype=complex)
    if case.has_sto:
        if np.any((t < 0) | (t > D)):
            raise ValueError("time offsets outside 0..D")
        rows = t[None, :] + np.arange(L)[:, None]
        out[rows, np.arange(N)[None, :]] = P
    else:
        out[:] = P
    if case.has_cfo:
        out *= np.exp(1j * np.arange(Li)[:, None] * omega[None, :])
    return out


def complex_normal(rng: np.random.Generator, shape, var: float = 1.0) -> np.ndarray:
    s = math.sqrt(var / 2.0)
    return s * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def gen_pilots(rng: np.random.Generator, L: int, N: int) -> np.ndarray:
    return complex_normal(rng, (L, N))


def gen_los(rng: np.random.Generator, M: int, N: int) -> np.ndarray:
    phi = rng.uniform(0.0, TWO_PI, N)
    return np.exp(1j * np.arange(M)[:, None] * phi[None, :])


def gen_scenario(rng: np.random.Generator, params: SystemParams, stats: ChannelStatistics,
                 seed=None) -> Scenario:
    N, M = params.N, params.M
    a = (rng.random(N) < params.active_prob).astype(np.int64)
    t = rng.integers(0, params.D + 1, N) if params.case.has_sto else np.zeros(N, dtype=np.int64)
    omega = rng.uniform(-params.Omega, params.Omega, N) if params.case.has_cfo else np.zeros(N)
    Htilde = complex_normal(rng, (M, N))
    Z = complex_normal(rng, (params.L_i, M), params.noise_var)
    return Scenario(a, t, omega, Htilde, Z, seed)


def small_scale_fading(stats: ChannelStatistics, Htilde) -> np.ndarray:
    """h_n = sqrt(k/(1+k)) hbar_n + sqrt(1/(1+k)) htilde_n, stacked as M x N."""
    k = stats.kappa
    return np.sqrt(k / (1 + k)) * stats.Hbar + np.sqrt(1 / (1 + k)) * np.asarray(Htilde)


def synthesize_received(params: SystemParams, pilots, stats: ChannelStatistics,
                        scenario: Scenario) -> ReceivedSignal:
    pilots = np.asarray(pilots, dtype=complex)
    if pilots.shape != (params.L, params.N) or stats.Hbar.shape != (params.M, params.N):
        raise ValueError("pilot or channel dimensions do not match the system parameters")
    if scenario.Z.shape != (params.L_i, params.M):
        raise ValueError("noise matrix has the wrong shape for this case")
    Peq = pilot_matrix(params.case, pilots, scenario.t_true, scenario.omega_true, params.D)
    # compact form: P A Gamma^1/2 (K^1/2 Hbar^T + Htilde^T)
    w = scenario.a_true * np.sqrt(stats.gamma)
    H = np.sqrt(stats.kappa) * stats.Hbar + scenario.Htilde
    Y = (Peq * w) @ H.T + scenario.Z
    return ReceivedSignal(params.case, Y)
