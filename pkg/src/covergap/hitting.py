"""Exact hitting-time machinery: fundamental matrix, E_x[T_y], alpha, H.

Two independent routes to the hitting-time matrix are kept permanently:
the fundamental-matrix formula and per-target absorbed linear solves. The
whole trust chain of the package hangs on ET, so the cross-check is part
of construction, not just of the test suite.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np

from .chain import ChainSpec
from .errors import BoundViolated, NotTransitiveEvidence, SingularSolve
from .spectral import SpectralData

# Relative tolerances for identity checks (scale-free in alpha or H).
IDENT_TOL = 1e-8


@dataclass(frozen=True)
class HittingData:
    """Fundamental matrix Z, hitting times ET, and their summaries.

    Z[x, y] integrates H_t(x, y) - pi(y) over all time; ET[x, y] is the
    expected hitting time of y from x on the rate-1 clock (which equals
    the expected jump count). alpha_x[x] = E_pi[T_x], alpha is its
    pi-average, H the worst pair.
    """

    Z: np.ndarray
    ET: np.ndarray
    alpha_x: np.ndarray
    alpha: float
    H: float
    pi_star: float
    pi: np.ndarray
    crosscheck_targets: tuple[int, ...]
    crosscheck_dev: float


def fundamental_matrix(spec: ChainSpec) -> np.ndarray:
    """Z = (I - P + Pi)^-1 - Pi, with Pi the rank-one stationary projector.

    Verified against the defining relation (I - P) Z = I - Pi.
    """
    P, pi = spec.P, spec.pi
    n = spec.n
    Pi = np.tile(pi, (n, 1))
    M = np.eye(n) - P + Pi
    try:
        Z = np.linalg.solve(M, np.eye(n)) - Pi
    except np.linalg.LinAlgError as exc:
        raise SingularSolve("fundamental matrix solve failed; input reducible?") from exc
    residual = np.abs((np.eye(n) - P) @ Z - (np.eye(n) - Pi)).max()
    if residual > 1e-9:
        raise SingularSolve(f"fundamental matrix residual {residual:.3e}")
    return Z


def _absorbed_solve(P: np.ndarray, target: int) -> np.ndarray:
    """E_x[T_target] for all x by the classic absorbed linear system."""
    n = P.shape[0]
    keep = np.arange(n) != target
    A = np.eye(n - 1) - P[np.ix_(keep, keep)]
    try:
        m = np.linalg.solve(A, np.ones(n - 1))
    except np.linalg.LinAlgError as exc:
        raise SingularSolve(f"absorbed solve failed for target {target}") from exc
    out = np.zeros(n)
    out[keep] = m
    return out


def _auto_targets(n: int) -> np.ndarray:
    """Cross-check target subset: everything when cheap, a spread otherwise.

    Full per-target solves cost O(n^4); above ~100 states a deterministic
    sample keeps the permanent self-check affordable.
    """
    if n <= 96:
        return np.arange(n)
    k = 8 if n <= 1024 else 2
    return np.unique(np.linspace(0, n - 1, k).astype(np.int64))


def hitting_times(
    spec: ChainSpec,
    check_targets: "str | Sequence[int]" = "auto",
) -> HittingData:
    """ET from the fundamental-matrix formula, cross-checked independently.

    ET[x, y] = (Z[y, y] - Z[x, y]) / pi(y); the absorbed-system solve for
    each target in ``check_targets`` must agree within 1e-8 * H.
    """
    Z = fundamental_matrix(spec)
    pi = spec.pi
    n = spec.n
    ET = (np.diag(Z)[None, :] - Z) / pi[None, :]
    np.fill_diagonal(ET, 0.0)
    if ET.min() < -IDENT_TOL * max(ET.max(), 1.0):
        raise SingularSolve(f"negative hitting time {ET.min():.3e}")
    ET = np.maximum(ET, 0.0)
    H = float(ET.max())

    if isinstance(check_targets, str):
        targets = _auto_targets(n) if check_targets == "auto" else np.arange(n)
    else:
        targets = np.asarray(list(check_targets), dtype=np.int64)
    dev = 0.0
    for y in targets:
        m = _absorbed_solve(spec.P, int(y))
        dev = max(dev, float(np.abs(m - ET[:, y]).max()))
    if n > 1 and dev > IDENT_TOL * max(H, 1.0):
        raise SingularSolve(
            f"hitting-time routes disagree by {dev:.3e} (H = {H:.3e})"
        )

    alpha_x = pi @ ET
    alpha = float(pi @ alpha_x)
    # random target identity: sum_y pi(y) ET[x, y] must not depend on x
    row_avgs = ET @ pi
    if n > 1 and np.abs(row_avgs - alpha).max() > IDENT_TOL * max(alpha, 1.0):
        raise SingularSolve("random target identity violated")
    if alpha > H * (1.0 + IDENT_TOL):
        raise SingularSolve(f"alpha = {alpha} exceeds H = {H}")
    return HittingData(
        Z=Z,
        ET=ET,
        alpha_x=alpha_x,
        alpha=alpha,
        H=H,
        pi_star=float(pi.max()),
        pi=pi,
        crosscheck_targets=tuple(int(t) for t in targets),
        crosscheck_dev=dev,
    )


def z_identity_deviation(hd: HittingData) -> float:
    """Worst deviation in the four-way identity linking Z, ET and alpha_x.

    alpha_y - ET[x,y] = Z[x,y]/pi(y) = Z[y,x]/pi(x) = alpha_x - ET[y,x]
    for reversible chains; returns the max absolute mismatch over pairs.
    """
    pi = hd.pi
    a = hd.alpha_x[None, :] - hd.ET
    b = hd.Z / pi[None, :]
    c = hd.Z.T / pi[:, None]  # c[x,y] = Z[y,x]/pi(x)
    d = (hd.alpha_x[None, :] - hd.ET).T
    dev = max(
        float(np.abs(a - b).max()),
        float(np.abs(b - c).max()),
        float(np.abs(c - d).max()),
    )
    return dev


def transitive_ratio_check(hd: HittingData) -> dict:
    """For chains with transitive evidence: symmetry of ET and 1 <= H/alpha <= 2."""
    sym_dev = float(np.abs(hd.ET - hd.ET.T).max())
    if sym_dev > IDENT_TOL * max(hd.H, 1.0):
        raise NotTransitiveEvidence(
            f"hitting times asymmetric by {sym_dev:.3e}; transitivity hint wrong"
        )
    ratio = hd.H / hd.alpha
    if not (1.0 - 1e-9 <= ratio <= 2.0 + 1e-9):
        raise BoundViolated(f"H/alpha = {ratio} outside [1, 2] on transitive chain")
    return {"ratio": ratio, "symmetry_dev": sym_dev}


def near_set_transitive(
    spec: ChainSpec, hd: HittingData, sd: SpectralData, x: int, eps: float
) -> dict:
    """States hit quickly from which x is close in expectation, with the
    transitive cardinality bound.

    Returns the set {z : E_z[T_x] <= (1-eps) alpha} and asserts its size
    against 2 log(2/eps) / (2 log(2/eps) + eps * alpha * gap) * n.
    """
    if not (0.0 < eps < 1.0):
        raise ValueError("eps must lie in (0, 1)")
    members = np.flatnonzero(hd.ET[:, x] <= (1.0 - eps) * hd.alpha)
    L = 2.0 * np.log(2.0 / eps)
    bound_frac = L / (L + eps * hd.alpha * sd.gap)
    if len(members) > bound_frac * spec.n + 1e-9 * spec.n:
        raise BoundViolated(
            f"near-set size {len(members)} exceeds {bound_frac * spec.n:.6f} "
            f"(transitive set-size bound); implementation bug"
        )
    return {
        "members": members,
        "size": int(len(members)),
        "bound_fraction": float(bound_frac),
        "bound_count": float(bound_frac * spec.n),
    }


def near_set_general(
    spec: ChainSpec, hd: HittingData, sd: SpectralData, x: int, eps: float
) -> dict:
    """Two-sided near set B(x, eps) with its stationary-mass bound.

    B = {z : E_z[T_x] <= alpha_x - eps*alpha and E_x[T_z] <= alpha_z - eps*alpha},
    pi(B) <= 2 log(2H/(eps alpha)) / (2 log(2H/(eps alpha)) + eps alpha gap).
    """
    if not (0.0 < eps < 1.0):
        raise ValueError("eps must lie in (0, 1)")
    ea = eps * hd.alpha
    cond = (hd.ET[:, x] <= hd.alpha_x[x] - ea) & (hd.ET[x, :] <= hd.alpha_x - ea)
    members = np.flatnonzero(cond)
    mass = float(hd.pi[members].sum())
    L = 2.0 * np.log(2.0 * hd.H / ea)
    bound = L / (L + ea * sd.gap)
    if mass > bound + 1e-9:
        raise BoundViolated(
            f"pi(B) = {mass:.6f} exceeds {bound:.6f} (general near-set bound)"
        )
    return {"members": members, "mass": mass, "bound_mass": float(bound)}


def tail_integral_bound_check(
    sd: SpectralData,
    hd: HittingData,
    pairs: Iterable[tuple[int, int]],
    s_values: Iterable[float],
) -> float:
    """Check the exponential tail bound on int_s^inf (H_t(y,x)/pi(x) - 1) dt.

    The tail integral is evaluated in closed spectral form; it must stay
    below exp(-s*gap) * (alpha_x + alpha_y) / 2. Returns the worst slack.
    """
    F, lam = sd.eigvecs, sd.lambdas
    worst = np.inf
    for (x, y) in pairs:
        coeff = F[y, 1:] * F[x, 1:]
        for s in s_values:
            lhs = float(np.sum(coeff * np.exp(-lam[1:] * s) / lam[1:]))
            rhs = 0.5 * np.exp(-s * sd.gap) * (hd.alpha_x[x] + hd.alpha_x[y])
            slack = rhs - lhs
            if slack < -1e-9 * hd.alpha:
                raise BoundViolated(
                    f"tail integral bound fails at (x={x}, y={y}, s={s}): "
                    f"{lhs:.6e} > {rhs:.6e}"
                )
            worst = min(worst, slack)
    return float(worst)


def slow_point_mass_check(hd: HittingData) -> dict:
    """Second-moment bound: states with alpha_z >= alpha/2 carry mass >= alpha/(4H)."""
    D = hd.alpha_x >= 0.5 * hd.alpha
    mass = float(hd.pi[D].sum())
    floor = hd.alpha / (4.0 * hd.H)
    if mass < floor - 1e-12:
        raise BoundViolated(f"slow-point mass {mass} below {floor}")
    return {"mass": mass, "floor": floor, "count": int(D.sum())}


def hitting_to_dict(hd: HittingData) -> dict:
    return {
        "alpha": hd.alpha,
        "H": hd.H,
        "ratio": hd.H / hd.alpha,
        "pi_star": hd.pi_star,
    }


def et_to_csv(hd: HittingData) -> str:
    """Hitting-time matrix as CSV, one row per source state."""
    lines = [",".join(f"{v:.17g}" for v in row) for row in hd.ET]
    return "\n".join(lines) + "\n"
