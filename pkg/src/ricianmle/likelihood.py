"""Negative log-likelihood, dense oracles and rank-one state maintenance.

The objective, up to constants, is

    f(a, x) = log|Sigma| + tr(Sigma^{-1} Ytil Ytil^H) / M

with ``Sigma = P(x) A Gamma P(x)^H + sigma^2 I`` and ``Ytil = Y - Ybar``.
Detectors never form Sigma; they carry Sigma^{-1}, Ytil and (for the FFT
strategy) Phi = Sigma^{-1} Ytil Ytil^H Sigma^{-1} through rank-one updates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import CaseId, ChannelStatistics, OffsetGrid, offset_grid, pilot_matrix, signal_length


class NumericalError(ArithmeticError):
    pass


class SingularUpdateError(NumericalError):
    pass


SINGULAR_TOL = 1e-14


def hermitize(A: np.ndarray) -> np.ndarray:
    return 0.5 * (A + A.conj().T)


# --------------------------------------------------------------------------
# problem container


class Problem:
    """Everything a detector reads but never writes.

    Holds the received matrix, pilots, channel statistics and candidate grid,
    and builds scaled equivalent pilots ``pbar = sqrt(g/(1+kappa)) p(x)``.
    """

    def __init__(self, case, Y, pilots, stats: ChannelStatistics, noise_var: float,
                 grid: OffsetGrid | None = None):
        self.case = CaseId.parse(case)
        self.Y = np.asarray(Y, dtype=complex)
        self.pilots = np.asarray(pilots, dtype=complex)
        self.stats = stats
        self.noise_var = float(noise_var)
        self.grid = grid if grid is not None else offset_grid(self.case)
        if self.grid.case is not self.case:
            raise ValueError("offset grid built for a different case")
        self.L, self.N = self.pilots.shape
        self.D = self.grid.D
        self.L_i, self.M = self.Y.shape
        if self.L_i != signal_length(self.case, self.L, self.D):
            raise ValueError(f"Y has {self.L_i} rows, expected {signal_length(self.case, self.L, self.D)}")
        if stats.N != self.N or stats.M != self.M:
            raise ValueError("channel statistics do not match pilots / Y")
        if self.noise_var <= 0:
            raise ValueError("noise_var must be positive")
        self.scale = np.sqrt(stats.gamma)
        self.sqrt_kappa = np.sqrt(stats.kappa)
        # CFO ramps for every grid frequency, |Qset| x L_i
        self._ramps = np.exp(1j * np.outer(self.grid.cfo_values, np.arange(self.L_i)))
        self._cand_t = self.grid.candidates[:, 0]
        self._cand_q = np.searchsorted(np.asarray(self.grid.cfo_indices), self.grid.candidates[:, 1])

    @property
    def K(self) -> int:
        return self.grid.cardinality

    def shifted_pilots(self, n: int) -> np.ndarray:
        """Columns p(t, 0) for every STO candidate, L_i x |sto|."""
        p = self.pilots[:, n]
        S = np.zeros((self.L_i, len(self.grid.sto_candidates)), dtype=complex)
        for j, t in enumerate(self.grid.sto_candidates):
            S[t:t + self.L, j] = p
        return S

    def candidate_pilots(self, n: int) -> np.ndarray:
        """Scaled equivalent pilots for every candidate, L_i x K."""
        S = self.shifted_pilots(n)
        P = S[:, self._cand_t if self.case.has_sto else np.zeros(self.K, dtype=int)]
        if self.case.has_cfo:
            P = P * self._ramps[self._cand_q].T
        return self.scale[n] * P

    def scaled_pilot(self, n: int, k: int) -> np.ndarray:
        t, q = self.grid.candidates[k]
        p = np.zeros(self.L_i, dtype=complex)
        p[t:t + self.L] = self.pilots[:, n]
        if self.case.has_cfo:
            p *= self._ramps[self._cand_q[k]]
        return self.scale[n] * p

    def equivalent_pilots(self, x) -> np.ndarray:
        """Unscaled P_i(x) for a vector of candidate indices."""
        x = np.asarray(x, dtype=np.int64)
        return pilot_matrix(self.case, self.pilots, self.grid.t_of(x), self.grid.omega_of(x), self.D)

    def initial_objective(self) -> float:
        s2 = self.noise_var
        return self.L_i * math.log(s2) + float(np.vdot(self.Y, self.Y).real) / (self.M * s2)


# --------------------------------------------------------------------------
# dense oracles


def _covariance(Peq, a, stats, noise_var):
    w = np.asarray(a, dtype=float) * stats.gamma
    return (Peq * w) @ Peq.conj().T + noise_var * np.eye(Peq.shape[0])


def _mean(Peq, a, stats):
    w = np.asarray(a, dtype=float) * np.sqrt(stats.gamma * stats.kappa)
    return (Peq * w) @ stats.Hbar.T


def _chol(Sigma):
    try:
        return np.linalg.cholesky(Sigma)
    except np.linalg.LinAlgError as exc:
        raise NumericalError("covariance is not positive definite") from exc


def _objective_terms(Peq, a, stats, Y, noise_var):
    Sigma = _covariance(Peq, a, stats, noise_var)
    C = _chol(Sigma)
    logdet = 2.0 * float(np.sum(np.log(np.diag(C).real)))
    return Sigma, C, logdet


def negloglik(case, a, x, pilots, stats: ChannelStatistics, Y, noise_var: float) -> float:
    """Dense evaluation of f(a, x).

    ``x`` is either ``None`` (no offsets) or a pair ``(t, omega)`` of
    per-device arrays. The delay range is inferred from the rows of ``Y``.
    """
    case = CaseId.parse(case)
    Y = np.asarray(Y, dtype=complex)
    pilots = np.asarray(pilots, dtype=complex)
    D = Y.shape[0] - pilots.shape[0] if case.has_sto else 0
    t, omega = (None, None) if x is None else x
    Peq = pilot_matrix(case, pilots, t, omega, D)
    return objective_from_pilots(Peq, a, stats, Y, noise_var)


def objective_from_pilots(Peq, a, stats, Y, noise_var) -> float:
    _, C, logdet = _objective_terms(Peq, a, stats, Y, noise_var)
    R = Y - _mean(Peq, a, stats)
    W = np.linalg.solve(C, R)
    return logdet + float(np.vdot(W, W).real) / Y.shape[1]


def objective(problem: Problem, a, x=None) -> float:
    """Dense f for candidate-index offsets ``x`` on the problem's grid."""
    x = np.zeros(problem.N, dtype=np.int64) if x is None else x
    return objective_from_pilots(problem.equivalent_pilots(x), a, problem.stats, problem.Y,
                                 problem.noise_var)


def likelihood_decomposition(case, a, x, pilots, stats, Y, noise_var):
    """Return ``(f_ray, delta)`` with f = f_ray / M + delta.

    f_ray is the Rayleigh-type objective M log|Sigma| + tr(Sigma^{-1} Y Y^H),
    delta collects the terms driven by the LoS mean.
    """
    case = CaseId.parse(case)
    Y = np.asarray(Y, dtype=complex)
    pilots = np.asarray(pilots, dtype=complex)
    D = Y.shape[0] - pilots.shape[0] if case.has_sto else 0
    t, omega = (None, None) if x is None else x
    Peq = pilot_matrix(case, pilots, t, omega, D)
    Sigma, C, logdet = _objective_terms(Peq, a, stats, Y, noise_var)
    M = Y.shape[1]
    Ybar = _mean(Peq, a, stats)
    SiY = np.linalg.solve(Sigma, Y)
    SiYbar = np.linalg.solve(Sigma, Ybar)
    f_ray = M * logdet + float(np.trace(Y.conj().T @ SiY).real)
    delta = (float(np.trace(Ybar.conj().T @ SiYbar).real)
             - 2.0 * float(np.trace(Ybar.conj().T @ SiY).real)) / M
    return f_ray, delta


def dense_state(problem: Problem, a, x=None, exclude: int | None = None):
    """Dense (Sigma^{-1}, Ytil, Phi), optionally with device ``exclude`` removed."""
    x = np.zeros(problem.N, dtype=np.int64) if x is None else np.asarray(x)
    a = np.array(a, dtype=float)
    if exclude is not None:
        a[exclude] = 0.0
    Peq = problem.equivalent_pilots(x)
    Sinv = np.linalg.inv(_covariance(Peq, a, problem.stats, problem.noise_var))
    Yt = problem.Y - _mean(Peq, a, problem.stats)
    return Sinv, Yt, Sinv @ Yt @ Yt.conj().T @ Sinv


# --------------------------------------------------------------------------
# rank-one updates


def _rank_one(sigma_inv, c, q, weight):
    denom = 1.0 + weight * q
    if abs(denom) < SINGULAR_TOL:
        raise SingularUpdateError(f"rank-one denominator {denom:.3e}")
    return hermitize(sigma_inv - (weight / denom) * np.outer(c, c.conj()))


def add_device_inverse(sigma_inv, scaled_pilot, weight: float) -> np.ndarray:
    """(Sigma + w pbar pbar^H)^{-1} from Sigma^{-1} by Sherman-Morrison."""
    if weight == 0:
        return sigma_inv
    c = sigma_inv @ scaled_pilot
    q = float(np.vdot(scaled_pilot, c).real)
    return _rank_one(sigma_inv, c, q, weight)


def update_ytilde(ytilde, scaled_pilot, kappa_n: float, delta_a: float, hbar_n) -> np.ndarray:
    if delta_a == 0 or kappa_n == 0:
        return ytilde
    return ytilde - (delta_a * math.sqrt(kappa_n)) * np.outer(scaled_pilot, hbar_n)


@dataclass
class DetectorState:
    problem: Problem
    a: np.ndarray
    x: np.ndarray
    sigma_inv: np.ndarray
    ytilde: np.ndarray
    phi: np.ndarray | None = None

    @property
    def case(self) -> CaseId:
        return self.problem.case

    @classmethod
    def initial(cls, problem: Problem, track_phi: bool = False) -> "DetectorState":
        s2 = problem.noise_var
        Y = problem.Y
        phi = (Y @ Y.conj().T) / s2 ** 2 if track_phi else None
        return cls(problem, np.zeros(problem.N), np.zeros(problem.N, dtype=np.int64),
                   np.eye(problem.L_i, dtype=complex) / s2, Y.copy(), phi)


@dataclass
class LeaveOneOut:
    """Device-n-removed matrices plus the vector Sigma_n^{-1} Ytil_n conj(hbar_n)."""

    n: int
    sigma_inv: np.ndarray
    ytilde: np.ndarray
    phi: np.ndarray | None
    phi_vec: np.ndarray | None


@dataclass
class CandidateStats:
    """(alpha, beta, eta) over the candidate grid, flattened STO-major."""

    alpha: np.ndarray
    beta: np.ndarray
    eta: np.ndarray
    grid_shape: tuple = ()

    def as_grid(self):
        shp = self.grid_shape or (self.alpha.shape[0],)
        return tuple(np.reshape(v, shp) for v in (self.alpha, self.beta, self.eta))


def remove_device(state: DetectorState, n: int) -> LeaveOneOut:
    pr = state.problem
    a = float(state.a[n])
    hb = pr.stats.Hbar[:, n]
    track = state.phi is not None
    if a == 0.0:
        Sn, Yn, Phin = state.sigma_inv, state.ytilde, state.phi
    else:
        k = pr.stats.kappa[n]
        sk = math.sqrt(k)
        pbar = pr.scaled_pilot(n, int(state.x[n]))
        c = state.sigma_inv @ pbar
        q = float(np.vdot(pbar, c).real)
        Sn = _rank_one(state.sigma_inv, c, q, -a)
        Yn = update_ytilde(state.ytilde, pbar, k, -a, hb)
        Phin = None
        if track:
            gam = a / (1.0 - a * q)
            vphi = state.sigma_inv @ (state.ytilde @ hb.conj())
            cc = np.outer(c, c.conj())
            B = state.phi + a * sk * (np.outer(c, vphi.conj()) + np.outer(vphi, c.conj())) \
                + (a * a * pr.M * k) * cc
            s = B @ pbar
            Phin = B + gam * (np.outer(c, s.conj()) + np.outer(s, c.conj())) \
                + (gam * gam * float(np.vdot(pbar, s).real)) * cc
            Phin = hermitize(Phin)
    phi_vec = Sn @ (Yn @ hb.conj()) if track else None
    return LeaveOneOut(n, Sn, Yn, Phin, phi_vec)


def restore_device(state: DetectorState, views: LeaveOneOut, n: int, a_new: float, x_new: int) -> DetectorState:
    pr = state.problem
    a = float(a_new)
    if a == 0.0:
        state.sigma_inv, state.ytilde, state.phi = views.sigma_inv, views.ytilde, views.phi
    else:
        k = pr.stats.kappa[n]
        sk = math.sqrt(k)
        hb = pr.stats.Hbar[:, n]
        pbar = pr.scaled_pilot(n, int(x_new))
        c = views.sigma_inv @ pbar
        q = float(np.vdot(pbar, c).real)
        state.sigma_inv = _rank_one(views.sigma_inv, c, q, a)
        state.ytilde = update_ytilde(views.ytilde, pbar, k, a, hb)
        if views.phi is not None:
            gam = a / (1.0 + a * q)
            vphi = views.phi_vec
            cc = np.outer(c, c.conj())
            B = views.phi - a * sk * (np.outer(c, vphi.conj()) + np.outer(vphi, c.conj())) \
                + (a * a * pr.M * k) * cc
            s = B @ pbar
            Phi = B - gam * (np.outer(c, s.conj()) + np.outer(s, c.conj())) \
                + (gam * gam * float(np.vdot(pbar, s).real)) * cc
            state.phi = hermitize(Phi)
    state.a[n] = a
    state.x[n] = int(x_new)
    return state


def coordinate_gain(d, alpha, beta, eta, kappa):
    """f(a + d e_n) - f(a) in terms of the device statistics (vectorized)."""
    d = np.asarray(d, dtype=float)
    den = 1.0 + alpha * d
    return np.log(den) + (kappa * alpha * d * d - (beta + eta) * d) / den
