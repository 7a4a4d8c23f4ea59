"""FFT forms of the candidate statistics.

The DFT convention is ``F[n, m] = exp(-2j*pi*n*m/K)`` so ``F @ x`` is
``fft(x)`` and ``F^H @ x`` is ``K * ifft(x)``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .likelihood import CandidateStats, LeaveOneOut, Problem
from .model import CaseId


@dataclass(frozen=True)
class FFTBackend:
    forward: callable
    inverse: callable   # normalized by 1/K, like numpy.fft.ifft


NUMPY_BACKEND = FFTBackend(np.fft.fft, np.fft.ifft)
_backend = NUMPY_BACKEND


def set_backend(backend: FFTBackend) -> FFTBackend:
    """Swap the transform pair; returns the previous one."""
    global _backend
    prev, _backend = _backend, backend
    return prev


def dft(x, axis=0):
    return _backend.forward(x, axis=axis)


def idft_h(x, axis=0):
    """F^H x (unnormalized inverse)."""
    return _backend.inverse(x, axis=axis) * x.shape[axis]


@lru_cache(maxsize=64)
def _psi_index(K: int):
    l = np.arange(K)[:, None]
    k = np.arange(K)[None, :]
    cols = l + k
    mask = cols < K
    return l.repeat(K, 1), np.where(mask, cols, 0), mask


def psi(B) -> np.ndarray:
    """Column k holds the k-th superdiagonal of B, zero-padded; column 0 scaled by sqrt(2)/2."""
    B = np.asarray(B)
    K = B.shape[0]
    rows, cols, mask = _psi_index(K)
    out = np.where(mask, B[rows, cols], 0)
    out[:, 0] = out[:, 0] * (math.sqrt(2.0) / 2.0)
    return out


def xi(case, X, p) -> np.ndarray:
    """(U^H Psi(X)) * (U Psi(conj(p) p^T)) with U the DFT for delays, identity otherwise."""
    case = CaseId.parse(case)
    p = np.asarray(p, dtype=complex)
    PX = psi(X)
    PP = psi(np.outer(p.conj(), p))
    if case is CaseId.F:
        return PX * PP
    return idft_h(PX, 0) * dft(PP, 0)


@dataclass(frozen=True)
class ToneMatrixSpec:
    Q: int
    L_i: int
    Qt: int
    rows: np.ndarray

    @property
    def stride(self) -> int:
        return self.Qt // self.Q


def tone_spec(Q: int, L_i: int) -> ToneMatrixSpec:
    if Q < L_i:
        warnings.warn(f"CFO grid density Q={Q} below signal length {L_i}; padding the IFFT",
                      RuntimeWarning, stacklevel=2)
    stride = -(-L_i // Q)
    return ToneMatrixSpec(Q, L_i, Q * stride, np.arange(Q) * stride)


def tone_matrix(Q: int, L_i: int) -> np.ndarray:
    """Explicit T with rows tau(2 pi q / Q)^T, q = 0..Q-1."""
    return np.exp(2j * np.pi * np.outer(np.arange(Q), np.arange(L_i)) / Q)


def tone_multiply(spec: ToneMatrixSpec, B) -> np.ndarray:
    """T @ B through a zero-padded inverse FFT of each column."""
    B = np.asarray(B, dtype=complex)
    vec = B.ndim == 1
    if vec:
        B = B[:, None]
    padded = np.zeros((spec.Qt, B.shape[1]), dtype=complex)
    padded[:B.shape[0]] = B
    out = idft_h(padded, 0)[spec.rows]
    return out[:, 0] if vec else out


class FFTPrecompute:
    """Per-detector tables built once: U Psi(conj(p) p^T) and F p per device."""

    def __init__(self, problem: Problem):
        if problem.case is CaseId.SYNC:
            raise ValueError("the FFT strategy applies to asynchronous cases only")
        self.problem = problem
        case = problem.case
        Li = problem.L_i
        base = np.zeros((Li, problem.N), dtype=complex)
        base[:problem.L] = problem.pilots
        self.base = base
        PP = np.stack([psi(np.outer(base[:, n].conj(), base[:, n])) for n in range(problem.N)])
        self.UPP = PP if case is CaseId.F else dft(PP, 1)
        self.Fp = dft(base, 0) if case is CaseId.T else None
        self.qsel = np.asarray(problem.grid.cfo_indices)
        self.tone = tone_spec(problem.grid.Q, Li) if case.has_cfo else None
        g, k = problem.stats.g, problem.stats.kappa
        self.c_ab = 2.0 * g / (1.0 + k)
        self.c_eta = 2.0 / problem.M * np.sqrt(g * k / (1.0 + k))


def candidate_stats_fft(pre: FFTPrecompute, views: LeaveOneOut, n: int) -> CandidateStats:
    pr = pre.problem
    case = pr.case
    Li, M, D = pr.L_i, pr.M, pr.D
    UPP = pre.UPP[n]
    v = views.phi_vec.conj()        # (hbar^T Ytil_n^H Sigma_n^{-1})^T
    p = pre.base[:, n]
    if case is CaseId.T:
        xa = idft_h(psi(views.sigma_inv), 0) * UPP
        xb = idft_h(psi(views.phi), 0) * UPP
        sa = dft(xa.sum(axis=1))[:D + 1]
        sb = dft(xb.sum(axis=1))[:D + 1]
        se = dft(idft_h(v) * pre.Fp[:, n])[:D + 1]
        alpha = pre.c_ab[n] / Li * sa.real
        beta = pre.c_ab[n] / (Li * M) * sb.real
        eta = pre.c_eta[n] / Li * se.real
    elif case is CaseId.F:
        xa = psi(views.sigma_inv) * UPP
        xb = psi(views.phi) * UPP
        cols = np.stack([xa.sum(axis=0), xb.sum(axis=0), v * p], axis=1)
        T = tone_multiply(pre.tone, cols)[pre.qsel].real
        alpha = pre.c_ab[n] * T[:, 0]
        beta = pre.c_ab[n] / M * T[:, 1]
        eta = pre.c_eta[n] * T[:, 2]
    else:
        xa = idft_h(psi(views.sigma_inv), 0) * UPP
        xb = idft_h(psi(views.phi), 0) * UPP
        Wa = dft(xa, 0)[:D + 1]
        Wb = dft(xb, 0)[:D + 1]
        S = pr.shifted_pilots(n)
        cols = np.concatenate([Wa.T, Wb.T, v[:, None] * S], axis=1)
        T = tone_multiply(pre.tone, cols)[pre.qsel].real      # |Q| x 3(D+1)
        k = D + 1
        alpha = pre.c_ab[n] / Li * T[:, :k].T
        beta = pre.c_ab[n] / (Li * M) * T[:, k:2 * k].T
        eta = pre.c_eta[n] * T[:, 2 * k:].T
    return CandidateStats(np.ravel(alpha), np.ravel(beta), np.ravel(eta), pr.grid.shape)
