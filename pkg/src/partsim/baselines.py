"""Reference recommenders: Random, MostPop, Item-kNN, RP3beta, EASE^R and a GF-CF filter."""
from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from .data import InteractionMatrix, NormalizedView, gram_operator
from .models import ScorerModel, SimilarityModel, topk_rows
from .spectral import top_eigenpairs


class CatalogTooLargeError(ValueError):
    """The dense closed form would exceed the configured item ceiling."""


EASE_DENSE_LIMIT = 30000


def _block_rows(n, size=2048):
    for lo in range(0, n, size):
        yield lo, min(n, lo + size)


def _drop_diag(blk: sp.coo_matrix, lo: int) -> sp.csr_matrix:
    keep = lo + blk.row != blk.col
    return sp.csr_matrix((blk.data[keep], (blk.row[keep], blk.col[keep])), shape=blk.shape)


def itemknn_fit(train: InteractionMatrix, k: int = 100, shrink: float = 0.0) -> SimilarityModel:
    """Shrunk cosine: dot(i, j) / (|i| |j| + shrink), top-``k`` per row."""
    if k < 1:
        raise ValueError("k must be >= 1")
    R = train.csc
    norms = np.sqrt(train.item_degrees().astype(np.float64))
    Rt = R.T.tocsr()
    blocks = []
    for lo, hi in _block_rows(train.n_items):
        dot = (Rt[lo:hi] @ R).tocoo()
        denom = norms[lo + dot.row] * norms[dot.col] + shrink
        val = np.divide(dot.data, denom, out=np.zeros_like(dot.data), where=denom > 0)
        val[lo + dot.row == dot.col] = 0.0
        blk = sp.csr_matrix((val, (dot.row, dot.col)), shape=(hi - lo, train.n_items))
        blocks.append(topk_rows(blk, k))
    S = sp.vstack(blocks).tocsr()
    return SimilarityModel(S, "itemknn", {"k": k, "shrink": shrink})


def rp3beta_fit(train: InteractionMatrix, k: int = 100, beta: float = 0.0) -> SimilarityModel:
    """Item -> user -> item walk probability, penalized by deg(target)^beta."""
    if k < 1:
        raise ValueError("k must be >= 1")
    if beta < 0:
        raise ValueError("beta must be >= 0")
    du = train.user_degrees().astype(np.float64)
    di = train.item_degrees().astype(np.float64)
    inv_du = np.divide(1.0, du, out=np.zeros_like(du), where=du > 0)
    inv_di = np.divide(1.0, di, out=np.zeros_like(di), where=di > 0)
    P_ui = sp.diags(inv_du) @ train.csr           # user -> item, row-stochastic
    P_iu = (train.csr @ sp.diags(inv_di)).T.tocsr()  # item -> user, row-stochastic
    pen = np.zeros_like(di)
    pen[di > 0] = di[di > 0] ** -beta
    blocks = []
    for lo, hi in _block_rows(train.n_items):
        W = ((P_iu[lo:hi] @ P_ui) @ sp.diags(pen)).tocoo()
        blocks.append(topk_rows(_drop_diag(W, lo), k))
    S = sp.vstack(blocks).tocsr()
    return SimilarityModel(S, "rp3beta", {"k": k, "beta": beta})


def ease_closed_form(G: np.ndarray, l2: float) -> np.ndarray:
    """B = I - P diag(1/diag(P)) with P = (G + l2 I)^-1; diagonal exactly zero."""
    n = G.shape[0]
    if n == 0:
        return np.zeros((0, 0))
    A = np.array(G, dtype=np.float64)
    A[np.diag_indices(n)] += l2
    P = np.linalg.inv(A)
    B = -P / np.diag(P)
    B[np.diag_indices(n)] = 0.0
    return B


def ease_fit(train: InteractionMatrix, l2: float = 500.0, threshold: float = 0.0,
             dense_limit: int = EASE_DENSE_LIMIT) -> SimilarityModel:
    if l2 <= 0:
        raise ValueError("l2 must be > 0")
    if train.n_items > dense_limit:
        raise CatalogTooLargeError(
            f"EASE needs a dense {train.n_items}x{train.n_items} solve; limit is {dense_limit} items")
    R = train.csc
    G = (R.T @ R).toarray()
    B = ease_closed_form(G, l2)
    if threshold > 0:
        B[np.abs(B) < threshold] = 0.0
    return SimilarityModel(sp.csr_matrix(B), "ease", {"l2": l2, "threshold": threshold})


def gfcf_fit(train: InteractionMatrix, d: int = 64, linear_weight: float = 0.5, k: int | None = 100,
             seed: int = 0) -> SimilarityModel:
    """Linear filter on the normalized Gram plus an ideal low-pass over the top-``d`` singular space."""
    if not 1 <= d <= min(train.n_users, train.n_items):
        raise ValueError("d must lie in [1, min(n_users, n_items)]")
    view = NormalizedView(train, 0.5, 0.5)
    basis = top_eigenpairs(gram_operator(view), d, seed=seed)
    if linear_weight != 0.0:
        Rn = view.csc
        S = topk_rows(_drop_diag(linear_weight * (Rn.T @ Rn).tocoo(), 0), k, by_abs=True)
    else:
        S = sp.csr_matrix((train.n_items, train.n_items))
    return SimilarityModel(S, "gfcf", {"d": d, "linear_weight": linear_weight, "k": k},
                           global_vectors=basis.vectors, global_weights=np.ones(d), lam=1.0,
                           input_exponents=(0.5, 0.5))


def popularity_scores(train: InteractionMatrix) -> ScorerModel:
    return ScorerModel("mostpop", counts=train.item_degrees().copy(), n=train.n_items)


def random_scores(seed: int, n_items: int) -> ScorerModel:
    return ScorerModel("random", seed=int(seed), n=n_items)
