"""Eigendecomposition of I - P, heat kernels, and spectral L2 distances.

Everything time-indexed lives on the rate-1 continuous-time clock, so the
heat kernel is exp(-t(I-P)) and no periodicity issues arise. All kernels
are computed spectrally from one symmetric eigendecomposition.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .chain import ChainSpec, VALIDATE_TOL
from .errors import Disconnected, NotReversible

# Relative time tolerance for every bisection on a mixing profile.
BISECT_TOL = 1e-9


@dataclass(frozen=True)
class SpectralData:
    """Eigensystem of I - P for a reversible chain.

    lambdas are ascending with lambdas[0] = 0; eigvecs column i holds the
    eigenfunction f_i, pi-orthonormal (E_pi[f_i f_j] = delta_ij) with
    f_0 identically 1. sq_eigvecs caches f_i(x)^2 for the i >= 1 columns,
    the workhorse of every diagonal spectral sum.
    """

    n: int
    pi: np.ndarray
    lambdas: np.ndarray
    eigvecs: np.ndarray
    sq_eigvecs: np.ndarray
    gap: float
    t_rel: float


def decompose(spec: ChainSpec) -> SpectralData:
    """Eigendecomposition via the pi-symmetrized matrix D^1/2 P D^-1/2."""
    if not spec.is_reversible:
        raise NotReversible("symmetrization requires detailed balance")
    P, pi = spec.P, spec.pi
    n = spec.n
    sqrt_pi = np.sqrt(pi)
    S = (sqrt_pi[:, None] * P) / sqrt_pi[None, :]
    S = 0.5 * (S + S.T)
    rho, V = np.linalg.eigh(S)  # ascending eigenvalues of P
    lam = 1.0 - rho[::-1]       # ascending eigenvalues of I - P
    V = V[:, ::-1]
    if abs(lam[0]) > VALIDATE_TOL:
        raise NotReversible(f"lowest eigenvalue of I-P is {lam[0]:.3e}, not 0")
    if n > 1 and lam[1] <= VALIDATE_TOL:
        raise Disconnected("zero spectral gap: chain numerically reducible")
    if lam[-1] > 2.0 + VALIDATE_TOL:
        raise NotReversible(f"eigenvalue {lam[-1]} of I-P exceeds 2")
    F = V / sqrt_pi[:, None]
    # deterministic signs: largest-|.| entry of each eigenfunction positive
    for i in range(n):
        j = int(np.argmax(np.abs(F[:, i])))
        if F[j, i] < 0:
            F[:, i] = -F[:, i]
    lam = lam.copy()
    lam[0] = 0.0
    F[:, 0] = 1.0
    _check_orthonormal(F, pi)
    F.setflags(write=False)
    lam.setflags(write=False)
    sq = np.ascontiguousarray(F[:, 1:] ** 2)
    sq.setflags(write=False)
    gap = float(lam[1]) if n > 1 else np.inf
    return SpectralData(
        n=n, pi=pi, lambdas=lam, eigvecs=F, sq_eigvecs=sq,
        gap=gap, t_rel=1.0 / gap,
    )


def _check_orthonormal(F: np.ndarray, pi: np.ndarray, tol: float = 1e-8) -> None:
    n = F.shape[0]
    if n <= 2048:
        G = (F.T * pi) @ F
        dev = np.abs(G - np.eye(n)).max()
    else:
        # Gram check on a deterministic column subset; the full product
        # would cost another matmul of eigh size for no extra assurance.
        idx = np.arange(0, n, max(1, n // 64))
        G = (F[:, idx].T * pi) @ F[:, idx]
        dev = np.abs(G - np.eye(len(idx))).max()
    if dev > tol:
        raise NotReversible(f"eigenbasis not pi-orthonormal: deviation {dev:.3e}")


def heat_kernel(sd: SpectralData, t: float) -> np.ndarray:
    """H_t = exp(-t(I-P)), assembled from the spectral sum. Rows sum to 1."""
    if t < 0:
        raise ValueError("heat kernel needs t >= 0")
    w = np.exp(-sd.lambdas * t)
    H = (sd.eigvecs * w) @ (sd.eigvecs.T * sd.pi[None, :])
    return H


def heat_kernel_rows(sd: SpectralData, t: float, rows: np.ndarray) -> np.ndarray:
    """Selected rows of H_t, for large chains where n^3 per call hurts."""
    w = np.exp(-sd.lambdas * t)
    return (sd.eigvecs[rows] * w) @ (sd.eigvecs.T * sd.pi[None, :])


def eigentime_alpha(sd: SpectralData) -> float:
    """Average hitting time via the eigenvalue sum over the nonzero spectrum."""
    return float(np.sum(1.0 / sd.lambdas[1:]))


def d2x_squared_all(sd: SpectralData, t: float) -> np.ndarray:
    """Vector of squared L2 distances to pi from every start at time t."""
    return sd.sq_eigvecs @ np.exp(-2.0 * sd.lambdas[1:] * t)


def d2x_squared(sd: SpectralData, x: int, t: float) -> float:
    return float(sd.sq_eigvecs[x] @ np.exp(-2.0 * sd.lambdas[1:] * t))


def d_inf(sd: SpectralData, t: float) -> float:
    """Worst-case relative L-infinity distance max_y H_t(y,y)/pi(y) - 1."""
    return float((sd.sq_eigvecs @ np.exp(-sd.lambdas[1:] * t)).max())


def ave_l2_sum(sd: SpectralData, t: float) -> float:
    """sum_i>=2 exp(-2 lambda_i t), the pi-averaged squared L2 distance."""
    return float(np.sum(np.exp(-2.0 * sd.lambdas[1:] * t)))


def solve_profile_time(profile, level: float, t_rel: float) -> float:
    """Least t >= 0 with profile(t) <= level, for a non-increasing profile.

    Geometric bracketing from t_rel, then bisection to 1e-9 * t_rel. The
    returned point always satisfies the predicate.
    """
    if profile(0.0) <= level:
        return 0.0
    lo, hi = 0.0, t_rel
    for _ in range(200):
        if profile(hi) <= level:
            break
        lo, hi = hi, 2.0 * hi
    else:  # pragma: no cover - profiles here decay exponentially
        raise ArithmeticError("profile does not reach the requested level")
    tol = BISECT_TOL * t_rel
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if profile(mid) <= level:
            hi = mid
        else:
            lo = mid
    return hi


def ave_l2_mix_time(sd: SpectralData, eps: float) -> float:
    """min{t : sum_i>=2 exp(-2 lambda_i t) <= eps^2}."""
    if not (0.0 < eps < 1.0):
        raise ValueError("eps must lie in (0, 1)")
    return solve_profile_time(lambda t: ave_l2_sum(sd, t), eps * eps, sd.t_rel)


def spectral_to_dict(sd: SpectralData, include_eigvecs: bool = False) -> dict:
    d = {
        "n": sd.n,
        "eigenvalues": [float(v) for v in sd.lambdas],
        "gap": sd.gap,
        "t_rel": sd.t_rel,
    }
    if include_eigvecs:
        d["eigvecs"] = [list(map(float, row)) for row in sd.eigvecs]
    return d
