"""Block-aware item similarity: local (block-regularized) plus global similarity, learned jointly.

Objective minimized by alternating blocks::

    1/2 ||R - R (S_l + S_g)||^2 + beta_l/2 ||S_l||^2 + beta_g/2 ||S_g||^2
        + alpha * sum of the k smallest Laplacian eigenvalues of (S_l + S_l^T) / 2

with S_l >= 0 and zero diagonals. The eigenvalue sum is handled through an
orthonormal N x k auxiliary matrix F, for which the penalty equals
sum_ij S_l[i, j] * ||f_i - f_j||^2 / 2 at the optimum.
"""
from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field

import numpy as np
import scipy.linalg as sla

from .data import InteractionMatrix
from .models import SimilarityModel, topk_rows

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class BismConfig:
    k: int = 10
    alpha: float = 1.0
    beta_g: float = 100.0
    beta_l: float = 10.0
    max_outer_iters: int = 10
    tol: float = 1e-4
    dense_limit: int = 20000
    topk: int = 100
    pg_iters: int = 5

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.alpha < 0:
            raise ValueError("alpha must be >= 0")
        if self.beta_g <= 0 or self.beta_l <= 0:
            raise ValueError("ridge weights must be > 0")
        if self.max_outer_iters < 1:
            raise ValueError("max_outer_iters must be >= 1")


@dataclass
class BismState:
    S_l: np.ndarray
    S_g: np.ndarray
    aux_indicator: np.ndarray
    objective_trace: list = field(default_factory=list)
    converged: bool = False
    monotone: bool = True


def laplacian(A: np.ndarray) -> np.ndarray:
    return np.diag(A.sum(axis=1)) - A


def bdr_project(affinity: np.ndarray, k: int) -> tuple[np.ndarray, float]:
    """Eigenvectors of the k smallest Laplacian eigenvalues, and their sum (the BDR penalty)."""
    A = np.asarray(affinity, dtype=np.float64)
    n = A.shape[0]
    if A.shape != (n, n):
        raise ValueError("affinity must be square")
    if not 1 <= k <= n:
        raise ValueError(f"need 1 <= k <= {n}")
    if (A < 0).any():
        raise ValueError("affinity must be non-negative")
    A = (A + A.T) / 2
    vals, vecs = sla.eigh(laplacian(A), subset_by_index=[0, k - 1])
    return vecs, float(vals.sum())


def _pair_dist(F: np.ndarray) -> np.ndarray:
    sq = np.einsum("ij,ij->i", F, F)
    D = (sq[:, None] + sq[None, :] - 2 * F @ F.T) / 2
    np.maximum(D, 0.0, out=D)
    return D


def zero_diag_ridge(P: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Column-wise argmin of 1/2 s^T H s - b^T s with s_j = 0, given P = H^-1."""
    X = P @ B
    S = X - P * (np.diag(X) / np.diag(P))
    S[np.diag_indices_from(S)] = 0.0
    return S


class _Problem:
    def __init__(self, R: np.ndarray, cfg: BismConfig):
        self.cfg = cfg
        n = R.shape[1]
        self.G = R.T @ R
        self.trace_G = float(np.trace(self.G))
        eye = np.eye(n)
        self.P_l = np.linalg.inv(self.G + cfg.beta_l * eye)
        self.P_g = np.linalg.inv(self.G + cfg.beta_g * eye)
        top = sla.eigh(self.G, eigvals_only=True, subset_by_index=[n - 1, n - 1])[0] if n else 0.0
        self.lipschitz = float(top) + cfg.beta_l

    def fit_ridge(self, S_l, S_g):
        # ||R - R S||^2 = tr(G) - 2 <S, G> + <S, G S>, avoiding the users x items product
        S = S_l + S_g
        c = self.cfg
        fit = self.trace_G - 2 * np.sum(S * self.G) + np.sum(S * (self.G @ S))
        return 0.5 * fit + c.beta_l / 2 * np.sum(S_l * S_l) + c.beta_g / 2 * np.sum(S_g * S_g)

    def objective(self, S_l, S_g, D):
        return self.fit_ridge(S_l, S_g) + self.cfg.alpha * float(np.sum(S_l * D))

    def update_local(self, S_l, S_g, D):
        c = self.cfg
        target = self.G - self.G @ S_g - c.alpha * D
        cand = zero_diag_ridge(self.P_l, target)
        np.maximum(cand, 0.0, out=cand)
        if self.objective(cand, S_g, D) <= self.objective(S_l, S_g, D):
            return cand
        # clamping overshot: exact line search on the feasible segment towards the candidate,
        # then projected gradient steps (1/L step size, monotone)
        step = cand - S_l
        grad = self.G @ S_l + c.beta_l * S_l - target
        slope = float(np.sum(grad * step))
        curv = float(np.sum(step * (self.G @ step)) + c.beta_l * np.sum(step * step))
        S = S_l
        if slope < 0 and curv > 0:
            S = S_l + min(1.0, -slope / curv) * step
        for _ in range(c.pg_iters):
            grad = self.G @ S + c.beta_l * S - target
            S = np.maximum(S - grad / self.lipschitz, 0.0)
            S[np.diag_indices_from(S)] = 0.0
        return S

    def update_global(self, S_l):
        return zero_diag_ridge(self.P_g, self.G - self.G @ S_l)


def cosine_affinity(R: np.ndarray) -> np.ndarray:
    G = R.T @ R
    norms = np.sqrt(np.diag(G))
    denom = np.outer(norms, norms)
    C = np.divide(G, denom, out=np.zeros_like(G), where=denom > 0)
    C[np.diag_indices_from(C)] = 0.0
    return C


def bism_solve(train: InteractionMatrix, cfg: BismConfig) -> BismState:
    n = train.n_items
    if n > cfg.dense_limit:
        raise ValueError(f"BISM is dense in the item count; {n} items exceeds dense_limit={cfg.dense_limit}")
    if cfg.k > n:
        raise ValueError("k cannot exceed the number of items")
    R = train.toarray()
    prob = _Problem(R, cfg)
    S_l = np.zeros((n, n))
    S_g = np.zeros((n, n))
    F, _ = bdr_project(cosine_affinity(R), cfg.k)
    D = _pair_dist(F)
    state = BismState(S_l, S_g, F, [prob.objective(S_l, S_g, D)])
    best = (state.objective_trace[0], S_l, S_g, F)
    for it in range(cfg.max_outer_iters):
        S_l = prob.update_local(S_l, S_g, D)
        F, penalty = bdr_project(S_l, cfg.k)
        D = _pair_dist(F)
        S_g = prob.update_global(S_l)
        obj = prob.fit_ridge(S_l, S_g) + cfg.alpha * penalty
        prev = state.objective_trace[-1]
        state.objective_trace.append(obj)
        if obj > prev + 1e-9 * abs(prev):
            state.monotone = False
            log.warning("BISM objective increased at iteration %d: %.12g -> %.12g", it, prev, obj)
        if obj < best[0]:
            best = (obj, S_l, S_g, F)
        if abs(prev - obj) <= cfg.tol * abs(prev):
            state.converged = True
            break
    _, state.S_l, state.S_g, state.aux_indicator = best
    return state


def bism_fit(train: InteractionMatrix, cfg: BismConfig | None = None) -> SimilarityModel:
    cfg = cfg or BismConfig()
    state = bism_solve(train, cfg)
    S = topk_rows(state.S_l + state.S_g, cfg.topk, by_abs=True)
    meta = {"objective_trace": state.objective_trace, "converged": state.converged,
            "monotone": state.monotone}
    return SimilarityModel(S, "bism", asdict(cfg), metadata=meta)
