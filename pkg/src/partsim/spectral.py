"""Lanczos eigensolver, Fiedler bipartitioning and tau-bounded recursive partitioning."""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components
from scipy.sparse.linalg import LinearOperator, aslinearoperator

from ._util import ceil_frac
from .data import InteractionMatrix, NormalizedView, gram_operator

log = logging.getLogger(__name__)


class EigenConvergenceError(RuntimeError):
    """Lanczos ran out of iterations; ``basis`` holds the best Ritz pairs found."""

    def __init__(self, msg, basis=None):
        super().__init__(msg)
        self.basis = basis


@dataclass
class EigenBasis:
    values: np.ndarray      # (d,) descending
    vectors: np.ndarray     # (n, d) orthonormal columns
    residuals: np.ndarray   # (d,) ||G v - lambda v||

    @property
    def d(self) -> int:
        return self.values.size


@dataclass(frozen=True)
class EigenConfig:
    tol: float = 1e-9
    max_iter: int | None = None     # Krylov dimension cap; None -> 30 * d
    seed: int = 0
    check_every: int = 5


def _sign_fix(V):
    # first coordinate with non-negligible magnitude is made positive
    for j in range(V.shape[1]):
        v = V[:, j]
        nz = np.flatnonzero(np.abs(v) > 1e-12 * max(np.abs(v).max(), 1e-300))
        if nz.size and v[nz[0]] < 0:
            V[:, j] = -v
    return V


def top_eigenpairs(G, d: int, tol: float = 1e-9, max_iter: int | None = None, seed: int = 0,
                   check_every: int = 5) -> EigenBasis:
    """Top-``d`` eigenpairs of a symmetric PSD operator by Lanczos with full reorthogonalization.

    Invariant-subspace breakdowns restart from a fresh seeded vector orthogonal
    to the current basis, so repeated eigenvalues are resolved. Convergence
    requires ``||G v - lambda v|| <= tol * max(1, |lambda|)`` for every pair.
    """
    G = aslinearoperator(G)
    n = G.shape[0]
    if G.shape != (n, n):
        raise ValueError("operator must be square")
    if not 1 <= d <= n:
        raise ValueError(f"need 1 <= d <= {n}, got d={d}")
    max_iter = 30 * d if max_iter is None else max_iter
    m_cap = min(n, max(max_iter, d))
    rng = np.random.default_rng(seed)

    Q = np.zeros((n, m_cap))
    alpha = np.zeros(m_cap)
    beta = np.zeros(m_cap)          # beta[j] couples q_j and q_{j+1}

    def fresh(k):
        for _ in range(10):
            r = rng.standard_normal(n)
            for _ in range(2):
                r -= Q[:, :k] @ (Q[:, :k].T @ r)
            nr = np.linalg.norm(r)
            if nr > 1e-8:
                return r / nr
        return None

    q = fresh(0)
    k = 0
    while k < m_cap:
        Q[:, k] = q
        w = G.matvec(q)
        alpha[k] = q @ w
        w = w - alpha[k] * q - (beta[k - 1] * Q[:, k - 1] if k > 0 else 0.0)
        for _ in range(2):
            w -= Q[:, :k + 1] @ (Q[:, :k + 1].T @ w)
        b = np.linalg.norm(w)
        scale = max(abs(alpha[k]), np.abs(alpha[:k + 1]).max(), 1.0)
        k += 1
        breakdown = b <= 1e-12 * scale
        # never accept right at a breakdown: the Krylov space found so far is invariant and may
        # miss copies of a repeated eigenvalue, so restart first and check later
        if k >= d and not breakdown and (k % check_every == 0 or k == m_cap):
            best = _ritz(G, Q[:, :k], alpha[:k], beta[:k - 1], d)
            if np.all(best.residuals <= tol * np.maximum(1.0, np.abs(best.values))):
                return best
        if k == m_cap:
            break
        if breakdown:
            beta[k - 1] = 0.0
            q = fresh(k)
            if q is None:
                break
        else:
            beta[k - 1] = b
            q = w / b
    best = _ritz(G, Q[:, :k], alpha[:k], beta[:k - 1], min(d, k))
    if best.d == d and np.all(best.residuals <= tol * np.maximum(1.0, np.abs(best.values))):
        return best
    raise EigenConvergenceError(
        f"Lanczos did not converge in {k} iterations (n={n}, d={d}); residuals={best.residuals}", best)


def _ritz(G, Q, alpha, beta, d) -> EigenBasis:
    T = np.diag(alpha) + np.diag(beta, 1) + np.diag(beta, -1)
    theta, S = np.linalg.eigh(T)
    idx = np.argsort(theta)[::-1][:d]
    vals = theta[idx]
    V = Q @ S[:, idx]
    # re-orthonormalize against drift before measuring true residuals
    V, R = np.linalg.qr(V)
    V = V * np.sign(np.diag(R))
    AV = G.matmat(V)
    res = np.linalg.norm(AV - V * vals, axis=0)
    return EigenBasis(vals, _sign_fix(V), res)


# ---------------------------------------------------------------------------
# Fiedler bipartition


@dataclass
class FiedlerSplit:
    left: np.ndarray
    right: np.ndarray
    coords: np.ndarray | None   # aligned with the input item order; None for component splits
    method: str                 # "fiedler" | "median" | "components"


def _restricted_graph(view: NormalizedView, items):
    """Normalized adjacency of the restricted Gram with zeroed diagonal, matrix-free."""
    G = gram_operator(view, items)
    diag = G.diagonal()
    deg = G.matvec(np.ones(items.size)) - diag
    return G, diag, deg


def _components(view: NormalizedView, items):
    # components of the user-item bipartite graph restricted to ``items``
    R = view.columns(items).tocsr()
    R = R[np.diff(R.indptr) > 0]
    nu, ni = R.shape
    B = sp.bmat([[None, R], [R.T, None]], format="csr")
    _, labels = connected_components(B, directed=False)
    return labels[nu:]


def _group_components(items, labels):
    """Pack components into two sides, largest first onto the lighter side."""
    comps = [items[labels == c] for c in np.unique(labels)]
    comps.sort(key=lambda c: (-c.size, c.min()))
    left, right = [], []
    nl = nr = 0
    for c in comps:
        if nl <= nr:
            left.append(c)
            nl += c.size
        else:
            right.append(c)
            nr += c.size
    return np.sort(np.concatenate(left)), np.sort(np.concatenate(right))


def fiedler_split(items, view: NormalizedView, eig: EigenConfig | None = None) -> FiedlerSplit:
    """Bipartition ``items`` by the sign of the Fiedler vector of their co-occurrence graph.

    Disconnected subsets are split along components instead. A sign split
    that leaves one side empty falls back to a median split of the coordinates.
    """
    eig = eig or EigenConfig(tol=1e-8, max_iter=300)
    items = np.asarray(items, dtype=np.int64)
    m = items.size
    if m < 2:
        raise ValueError("fiedler_split needs at least two items")
    labels = _components(view, items)
    if labels.max() > 0:
        left, right = _group_components(items, labels)
        return FiedlerSplit(left, right, None, "components")

    G, diag, deg = _restricted_graph(view, items)
    if np.all(deg <= 0):
        raise ValueError("restricted graph has no edges")
    dinv = np.zeros(m)
    dinv[deg > 0] = deg[deg > 0] ** -0.5

    def adj(x):
        y = dinv * x
        return dinv * (G.matvec(y) - diag * y)

    # shift by I: the normalized adjacency has spectrum in [-1, 1]
    shifted = LinearOperator((m, m), matvec=lambda x: adj(np.ravel(x)) + np.ravel(x), dtype=np.float64)
    if m == 2:
        coords = np.array([1.0, -1.0])
    else:
        try:
            basis = top_eigenpairs(shifted, 2, tol=eig.tol, max_iter=eig.max_iter, seed=eig.seed,
                                   check_every=eig.check_every)
        except EigenConvergenceError as exc:
            if exc.basis is None or exc.basis.d < 2:
                raise
            log.warning("Fiedler vector not fully converged (m=%d, residuals=%s); using best Ritz vector",
                        m, exc.basis.residuals)
            basis = exc.basis
        coords = dinv * basis.vectors[:, 1]
        coords = coords / np.linalg.norm(coords)
    coords = _sign_fix(coords[:, None].copy())[:, 0]
    eps = 1e-12 * np.abs(coords).max()
    pos = coords > eps
    neg = coords < -eps
    zero = ~(pos | neg)
    if pos.sum() <= neg.sum():
        pos |= zero
    else:
        neg |= zero
    method = "fiedler"
    if not pos.any() or not neg.any():
        order = np.argsort(coords, kind="stable")
        pos = np.zeros(m, dtype=bool)
        pos[order[m // 2:]] = True
        neg = ~pos
        method = "median"
    return FiedlerSplit(items[pos], items[neg], coords, method)


# ---------------------------------------------------------------------------
# Recursive partitioning


@dataclass
class SplitRecord:
    items: np.ndarray
    coords: np.ndarray | None
    method: str


@dataclass
class PartitionAssignment:
    assignment: np.ndarray                  # item -> partition id
    tau: float
    split_trace: list = field(default_factory=list)
    cold: np.ndarray = field(default_factory=lambda: np.empty(0, np.int64))  # ids of cold partitions

    @property
    def n_items(self) -> int:
        return self.assignment.size

    @property
    def K(self) -> int:
        return int(self.assignment.max()) + 1 if self.assignment.size else 0

    @property
    def sizes(self) -> np.ndarray:
        return np.bincount(self.assignment, minlength=self.K)

    def members(self, k: int) -> np.ndarray:
        return np.flatnonzero(self.assignment == k)

    def partitions(self) -> list:
        order = np.argsort(self.assignment, kind="stable")
        bounds = np.cumsum(self.sizes)[:-1]
        return np.split(order, bounds)

    def to_json(self, item_ids=None) -> str:
        ids = item_ids if item_ids is not None else [str(i) for i in range(self.n_items)]
        return json.dumps({
            "tau": self.tau,
            "K": self.K,
            "sizes": self.sizes.tolist(),
            "assignment": {ids[i]: int(k) for i, k in enumerate(self.assignment)},
        })


def recursive_partition(train: InteractionMatrix, tau: float, eig: EigenConfig | None = None,
                        view: NormalizedView | None = None) -> PartitionAssignment:
    """Split item sets until none exceeds ceil(tau * N) items.

    Items without training interactions are set aside as cold partitions
    (chunked to respect the size bound). Partitions are numbered in the
    order their terminal nodes are produced by a depth-first traversal.
    """
    if not 0 < tau <= 1:
        raise ValueError("tau must lie in (0, 1]")
    n = train.n_items
    bound = ceil_frac(tau, n)
    view = view or NormalizedView(train, 0.5, 0.5)
    deg = train.item_degrees()
    warm = np.flatnonzero(deg > 0)
    cold = np.flatnonzero(deg == 0)

    assignment = np.full(n, -1, dtype=np.int64)
    trace = []
    next_id = 0
    stack = [warm] if warm.size else []
    while stack:
        node = stack.pop()
        if node.size <= bound:
            assignment[node] = next_id
            next_id += 1
            continue
        try:
            s = fiedler_split(node, view, eig)
        except EigenConvergenceError as exc:
            raise EigenConvergenceError(f"partitioning node of size {node.size}: {exc}", exc.basis) from exc
        trace.append(SplitRecord(node, s.coords, s.method))
        # right pushed first so the left child is finalized first
        stack.append(s.right)
        stack.append(s.left)
    cold_ids = []
    for start in range(0, cold.size, bound):
        assignment[cold[start:start + bound]] = next_id
        cold_ids.append(next_id)
        next_id += 1
    return PartitionAssignment(assignment, float(tau), trace, np.asarray(cold_ids, dtype=np.int64))
