"""Fitted model containers shared by every recommender in the package."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .data import InteractionMatrix, NormalizedView


def topk_rows(M, k: int | None, by_abs: bool = False) -> sp.csr_matrix:
    """Keep the ``k`` largest entries of each row (ties: lower column index first).

    Accepts dense or sparse input; explicit zeros are dropped.
    """
    if sp.issparse(M):
        M = sp.csr_matrix(M, copy=True)
        M.eliminate_zeros()
        M.sort_indices()
        if k is None:
            return M
        rows, cols, vals = [], [], []
        for r in range(M.shape[0]):
            lo, hi = M.indptr[r], M.indptr[r + 1]
            c, v = M.indices[lo:hi], M.data[lo:hi]
            if c.size > k:
                key = np.abs(v) if by_abs else v
                keep = np.lexsort((c, -key))[:k]
                c, v = c[keep], v[keep]
            rows.append(np.full(c.size, r))
            cols.append(c)
            vals.append(v)
        out = sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                            shape=M.shape)
        out.sort_indices()
        return out
    M = np.asarray(M, dtype=np.float64)
    if k is not None and k < M.shape[1]:
        key = np.abs(M) if by_abs else M
        keep = np.argsort(-key, axis=1, kind="stable")[:, :k]
        mask = np.zeros(M.shape, dtype=bool)
        np.put_along_axis(mask, keep, True, axis=1)
        M = np.where(mask, M, 0.0)
    out = sp.csr_matrix(M)
    out.eliminate_zeros()
    out.sort_indices()
    return out


def zero_diagonal(S: sp.spmatrix) -> sp.csr_matrix:
    S = sp.csr_matrix(S)
    S.setdiag(0.0)
    S.eliminate_zeros()
    S.sort_indices()
    return S


@dataclass
class SimilarityModel:
    """Sparse item-item matrix plus an optional factored low-rank global term.

    User scores are ``x_u @ S + lam * ((x_u @ V) * weights) @ V.T`` where
    ``x_u`` is the user's training row, degree-normalized when
    ``input_exponents`` is set.
    """
    sparse: sp.csr_matrix
    name: str = "similarity"
    params: dict = field(default_factory=dict)
    global_vectors: np.ndarray | None = None    # (N, d), orthonormal columns
    global_weights: np.ndarray | None = None    # (d,)
    lam: float = 0.0
    input_exponents: tuple | None = None
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.sparse = zero_diagonal(self.sparse)
        if self.global_vectors is not None:
            self.global_vectors = np.ascontiguousarray(self.global_vectors, dtype=np.float64)
            if self.global_weights is None:
                self.global_weights = np.ones(self.global_vectors.shape[1])
            self.global_weights = np.asarray(self.global_weights, dtype=np.float64)

    @property
    def n_items(self) -> int:
        return self.sparse.shape[0]

    @property
    def rank(self) -> int:
        return 0 if self.global_vectors is None else self.global_vectors.shape[1]

    def inputs(self, train: InteractionMatrix, users) -> sp.csr_matrix:
        if self.input_exponents is None:
            return train.csr[users]
        a, b = self.input_exponents
        return NormalizedView(train, a, b).csr[users]

    def score(self, train: InteractionMatrix, users) -> np.ndarray:
        if train.n_items != self.n_items:
            raise ValueError(f"model has {self.n_items} items, training matrix has {train.n_items}")
        X = self.inputs(train, np.asarray(users))
        out = np.asarray((X @ self.sparse).todense())
        if self.rank and self.lam != 0.0:
            V = self.global_vectors
            out += self.lam * ((X @ V) * self.global_weights) @ V.T
        return out

    def materialize(self) -> np.ndarray:
        """Dense C = S + lam * V diag(w) V^T; small catalogs only."""
        C = self.sparse.toarray()
        if self.rank:
            V = self.global_vectors
            C += self.lam * (V * self.global_weights) @ V.T
        return C


@dataclass
class ScorerModel:
    """Non-similarity baselines: ``mostpop`` (item degrees) or ``random`` (seeded)."""
    kind: str
    counts: np.ndarray | None = None
    seed: int = 0
    n: int = 0

    name = property(lambda self: self.kind)

    @property
    def n_items(self) -> int:
        return self.n

    def score(self, train: InteractionMatrix, users) -> np.ndarray:
        users = np.asarray(users)
        if train.n_items != self.n:
            raise ValueError(f"model has {self.n} items, training matrix has {train.n_items}")
        if self.kind == "mostpop":
            return np.tile(self.counts.astype(np.float64), (users.size, 1))
        return np.vstack([np.random.Generator(np.random.Philox(key=[int(u), self.seed])).random(self.n)
                          for u in users]) if users.size else np.zeros((0, self.n))
