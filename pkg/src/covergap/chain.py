"""Finite reversible Markov chains: construction, validation, serialization.

Chains are stored densely; the package targets desk scale (state count up
to a few thousand), where exact linear algebra is the point. Time-indexed
quantities in the other modules always refer to the rate-1 continuous-time
version of the chain; this module only deals with the jump matrix P.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from .errors import BadParams, Disconnected, NonStochastic

# Construction / validation tolerances, fixed once and reused everywhere.
CONSTRUCT_TOL = 1e-12
VALIDATE_TOL = 1e-10

FAMILIES = (
    "cycle",
    "grid_torus",
    "hypercube",
    "complete",
    "two_state",
    "srw_graph",
    "random_reversible",
)


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=np.float64)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class ChainSpec:
    """An irreducible chain on states 0..n-1 with stationary law pi.

    ``is_transitive_hint`` is only a hint: transitivity is never certified
    by a group action, only cross-checked a posteriori against hitting-time
    symmetry (see hitting.transitive_ratio_check).
    """

    n: int
    P: np.ndarray
    pi: np.ndarray
    labels: Optional[tuple[str, ...]] = None
    is_reversible: bool = True
    is_transitive_hint: bool = False
    name: str = "chain"

    def __post_init__(self):
        object.__setattr__(self, "P", _readonly(self.P))
        object.__setattr__(self, "pi", _readonly(self.pi))


@dataclass(frozen=True)
class FamilyParams:
    """Parameters selecting one member of a benchmark family."""

    family: str
    params: dict = field(default_factory=dict)
    seed: Optional[int] = None


@dataclass(frozen=True)
class Diagnostics:
    max_row_dev: float
    min_entry: float
    max_stationarity_dev: float
    max_detailed_balance_dev: float
    irreducible: bool
    transitive_hint_consistent: Optional[bool]

    @property
    def ok(self) -> bool:
        return (
            self.irreducible
            and self.max_row_dev < VALIDATE_TOL
            and self.min_entry > -CONSTRUCT_TOL
            and self.max_stationarity_dev < VALIDATE_TOL
            and self.max_detailed_balance_dev < VALIDATE_TOL
        )


def is_irreducible(P: np.ndarray) -> bool:
    """Strong connectivity of the support graph of P."""
    support = csr_matrix(P > 0.0)
    ncomp, _ = connected_components(support, directed=True, connection="strong")
    return ncomp == 1


def stationary(P: np.ndarray) -> np.ndarray:
    """Unique probability vector with pi P = pi, by a deflated linear solve.

    Replaces one balance equation with the normalization sum(pi) = 1.
    """
    P = np.asarray(P, dtype=np.float64)
    n = P.shape[0]
    if n == 1:
        return np.array([1.0])
    if not is_irreducible(P):
        raise Disconnected("support graph is not strongly connected")
    A = P.T - np.eye(n)
    A[-1, :] = 1.0
    b = np.zeros(n)
    b[-1] = 1.0
    try:
        pi = np.linalg.solve(A, b)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - guarded by irreducibility
        raise Disconnected("stationary solve is singular") from exc
    pi = pi / pi.sum()
    residual = np.abs(pi @ P - pi).max()
    if residual > VALIDATE_TOL:
        raise Disconnected(f"stationary residual {residual:.3e} exceeds {VALIDATE_TOL}")
    return pi


def _check_stochastic(P: np.ndarray) -> None:
    if P.ndim != 2 or P.shape[0] != P.shape[1]:
        raise NonStochastic("P must be square")
    if P.min() < -CONSTRUCT_TOL:
        raise NonStochastic(f"negative entry {P.min():.3e}")
    dev = np.abs(P.sum(axis=1) - 1.0).max()
    if dev > CONSTRUCT_TOL:
        raise NonStochastic(f"row sums deviate from 1 by {dev:.3e}")


def make_spec(
    P: np.ndarray,
    labels: Optional[Sequence[str]] = None,
    transitive_hint: bool = False,
    name: str = "chain",
) -> ChainSpec:
    """Validate a raw matrix and wrap it with its stationary distribution."""
    P = np.asarray(P, dtype=np.float64)
    _check_stochastic(P)
    pi = stationary(P)
    db = np.abs(pi[:, None] * P - (pi[:, None] * P).T).max()
    return ChainSpec(
        n=P.shape[0],
        P=P,
        pi=pi,
        labels=tuple(labels) if labels is not None else None,
        is_reversible=bool(db < VALIDATE_TOL),
        is_transitive_hint=transitive_hint,
        name=name,
    )


# ---------------------------------------------------------------------------
# benchmark families
# ---------------------------------------------------------------------------


def cycle(n: int) -> ChainSpec:
    """Simple random walk on the n-cycle; the two directions carry 1/2 each.

    For n = 2 the two directions land on the same vertex, so P(0,1) = 1.
    """
    if n < 1:
        raise BadParams("cycle needs n >= 1")
    P = np.zeros((n, n))
    if n == 1:
        P[0, 0] = 1.0
    else:
        for i in range(n):
            P[i, (i + 1) % n] += 0.5
            P[i, (i - 1) % n] += 0.5
    return make_spec(P, transitive_hint=True, name=f"cycle({n})")


def grid_torus(n: int, m: int) -> ChainSpec:
    """SRW on the n x m discrete torus (n >= m), 1/4 per lattice direction.

    Multigraph semantics at degenerate widths: directions whose targets
    coincide keep their combined mass (m = 2 gives 1/2 vertically), while
    m = 1 degenerates to the plain n-cycle rather than a lazy one.
    State (i, j) is flattened to index i*m + j.
    """
    if n < 1 or m < 1:
        raise BadParams("grid_torus needs n, m >= 1")
    if m > n:
        raise BadParams("grid_torus convention requires m <= n")
    if m == 1:
        spec = cycle(n)
        return ChainSpec(
            n=spec.n, P=spec.P, pi=spec.pi, labels=spec.labels,
            is_reversible=True, is_transitive_hint=True, name=f"grid_torus({n},1)",
        )
    N = n * m
    P = np.zeros((N, N))
    for i in range(n):
        for j in range(m):
            s = i * m + j
            P[s, ((i + 1) % n) * m + j] += 0.25
            P[s, ((i - 1) % n) * m + j] += 0.25
            P[s, i * m + (j + 1) % m] += 0.25
            P[s, i * m + (j - 1) % m] += 0.25
    return make_spec(P, transitive_hint=True, name=f"grid_torus({n},{m})")


def hypercube(d: int) -> ChainSpec:
    """SRW on {0,1}^d: flip one uniformly chosen coordinate per step."""
    if d < 1:
        raise BadParams("hypercube needs d >= 1")
    N = 1 << d
    P = np.zeros((N, N))
    for s in range(N):
        for k in range(d):
            P[s, s ^ (1 << k)] = 1.0 / d
    return make_spec(P, transitive_hint=True, name=f"hypercube({d})")


def complete(k: int) -> ChainSpec:
    """SRW on K_k: uniform over the k-1 other states."""
    if k < 2:
        raise BadParams("complete needs k >= 2")
    P = np.full((k, k), 1.0 / (k - 1))
    np.fill_diagonal(P, 0.0)
    return make_spec(P, transitive_hint=True, name=f"complete({k})")


def two_state(p: float, q: float) -> ChainSpec:
    """The chain [[1-p, p], [q, 1-q]]; transitive exactly when p == q."""
    if not (0.0 < p <= 1.0 and 0.0 < q <= 1.0):
        raise BadParams("two_state needs p, q in (0, 1]")
    P = np.array([[1.0 - p, p], [q, 1.0 - q]])
    return make_spec(P, transitive_hint=(p == q), name=f"two_state({p},{q})")


def srw_graph(adjacency: np.ndarray) -> ChainSpec:
    """SRW on a connected weighted graph: P = A / degree."""
    A = np.asarray(adjacency, dtype=np.float64)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise BadParams("adjacency must be square")
    if A.min() < 0:
        raise BadParams("adjacency weights must be nonnegative")
    if np.abs(A - A.T).max() > CONSTRUCT_TOL:
        raise BadParams("adjacency must be symmetric")
    deg = A.sum(axis=1)
    if deg.min() <= 0:
        raise Disconnected("isolated vertex")
    P = A / deg[:, None]
    if not is_irreducible(P):
        raise Disconnected("graph is not connected")
    return make_spec(P, name=f"srw_graph(n={A.shape[0]})")


def random_reversible(n: int, seed: int) -> ChainSpec:
    """Random reversible chain from a symmetric positive weight matrix.

    Weights are i.i.d. uniform(0,1) on the upper triangle plus 0.5 on the
    diagonal, symmetrized, then row-normalized. Strict positivity keeps the
    chain irreducible and the spectrum of I - P away from 2.
    """
    if n < 1:
        raise BadParams("random_reversible needs n >= 1")
    rng = np.random.Generator(np.random.Philox(key=int(seed) & ((1 << 64) - 1)))
    W = np.triu(rng.random((n, n)), k=1)
    W = W + W.T + 0.5 * np.eye(n)
    P = W / W.sum(axis=1)[:, None]
    return make_spec(P, name=f"random_reversible({n},seed={seed})")


def build_family(params: FamilyParams) -> ChainSpec:
    """Build one validated family member; deterministic given the params."""
    fam, p = params.family, dict(params.params)
    try:
        if fam == "cycle":
            return cycle(int(p.pop("n")))
        if fam == "grid_torus":
            return grid_torus(int(p.pop("n")), int(p.pop("m")))
        if fam == "hypercube":
            return hypercube(int(p.pop("d")))
        if fam == "complete":
            return complete(int(p.pop("n")))
        if fam == "two_state":
            return two_state(float(p.pop("p")), float(p.pop("q")))
        if fam == "srw_graph":
            return srw_graph(np.asarray(p.pop("adjacency"), dtype=np.float64))
        if fam == "random_reversible":
            if params.seed is None:
                raise BadParams("random_reversible requires a seed")
            return random_reversible(int(p.pop("n")), int(params.seed))
    except KeyError as exc:
        raise BadParams(f"{fam}: missing parameter {exc}") from exc
    raise BadParams(f"unknown family {fam!r}; choose from {FAMILIES}")


# ---------------------------------------------------------------------------
# validation and serialization
# ---------------------------------------------------------------------------


def validate(spec: ChainSpec, ET: Optional[np.ndarray] = None) -> Diagnostics:
    """Diagnostics, not exceptions: how far the spec is from its contracts.

    When a hitting-time matrix is supplied, the transitivity hint is
    cross-checked against E_x[T_y] = E_y[T_x] symmetry.
    """
    P, pi = spec.P, spec.pi
    row_dev = float(np.abs(P.sum(axis=1) - 1.0).max())
    min_entry = float(P.min())
    stat_dev = float(np.abs(pi @ P - pi).max())
    F = pi[:, None] * P
    db_dev = float(np.abs(F - F.T).max())
    irr = is_irreducible(P)
    hint_ok: Optional[bool] = None
    if ET is not None and spec.is_transitive_hint:
        scale = max(float(ET.max()), 1.0)
        hint_ok = bool(np.abs(ET - ET.T).max() < 1e-8 * scale)
    return Diagnostics(
        max_row_dev=row_dev,
        min_entry=min_entry,
        max_stationarity_dev=stat_dev,
        max_detailed_balance_dev=db_dev,
        irreducible=irr,
        transitive_hint_consistent=hint_ok,
    )


def spec_to_dict(spec: ChainSpec) -> dict:
    d = {"n": spec.n, "P": [list(map(float, row)) for row in spec.P]}
    if spec.labels is not None:
        d["labels"] = list(spec.labels)
    return d


def spec_from_dict(d: dict) -> ChainSpec:
    """Read either a family description or an explicit matrix."""
    if "family" in d:
        fp = FamilyParams(family=d["family"], params=d.get("params", {}), seed=d.get("seed"))
        return build_family(fp)
    P = np.asarray(d["P"], dtype=np.float64)
    if "n" in d and int(d["n"]) != P.shape[0]:
        raise BadParams("declared n does not match matrix size")
    return make_spec(P, labels=d.get("labels"))


def load_spec(path: str) -> ChainSpec:
    with open(path, "r", encoding="utf-8") as fh:
        return spec_from_dict(json.load(fh))
