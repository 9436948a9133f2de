"""Synthetic interaction data with planted item communities."""
from __future__ import annotations

import numpy as np

from .data import InteractionMatrix


def planted_clusters(n_users: int, n_items: int, n_clusters: int, p_in: float, p_out: float,
                     seed: int = 0):
    """Users and items each belong to one cluster; edge probability p_in inside, p_out across.

    Returns ``(matrix, item_labels)``.
    """
    rng = np.random.default_rng(seed)
    item_labels = np.arange(n_items) * n_clusters // n_items
    user_labels = rng.integers(0, n_clusters, n_users)
    rows, cols = [], []
    for lo in range(0, n_users, 1024):
        ul = user_labels[lo:lo + 1024]
        P = np.where(ul[:, None] == item_labels[None, :], p_in, p_out)
        r, c = np.nonzero(rng.random(P.shape) < P)
        rows.append(r + lo)
        cols.append(c)
    m = InteractionMatrix.from_pairs(np.concatenate(rows), np.concatenate(cols), n_users, n_items)
    return m, item_labels


def community_catalog(n_users: int, n_items: int, n_clusters: int, mean_len: float = 20.0,
                      cross_share: float = 0.1, zipf: float = 1.0, size_skew: float = 0.0,
                      seed: int = 0):
    """Catalog with popularity skew and community structure.

    Each user has a home cluster and draws about ``mean_len`` items
    (Poisson, at least 5 before dedup): a ``cross_share`` fraction
    from the global popularity distribution, the rest from the home
    cluster, both weighted by a Zipf(``zipf``) item popularity.
    ``size_skew > 0`` makes cluster sizes unequal (Dirichlet-like).

    Returns ``(matrix, item_labels)``.
    """
    rng = np.random.default_rng(seed)
    if size_skew > 0:
        w = rng.gamma(1.0 / size_skew, size=n_clusters)
        sizes = np.maximum(2, np.floor(w / w.sum() * n_items)).astype(int)
        sizes[-1] = n_items - sizes[:-1].sum()
        if sizes[-1] < 2:
            raise ValueError("cluster sizes degenerate; lower size_skew")
    else:
        sizes = np.full(n_clusters, n_items // n_clusters)
        sizes[: n_items % n_clusters] += 1
    item_labels = np.repeat(np.arange(n_clusters), sizes)
    pop = np.empty(n_items)
    for c in range(n_clusters):
        idx = np.flatnonzero(item_labels == c)
        pop[idx] = 1.0 / np.arange(1, idx.size + 1) ** zipf
    pop_all = pop / pop.sum()
    cluster_p = [pop[item_labels == c] / pop[item_labels == c].sum() for c in range(n_clusters)]
    cluster_items = [np.flatnonzero(item_labels == c) for c in range(n_clusters)]
    share = sizes / sizes.sum()
    homes = rng.choice(n_clusters, size=n_users, p=share)
    lengths = np.maximum(5, rng.poisson(mean_len, n_users))
    rows, cols = [], []
    for u in range(n_users):
        n = lengths[u]
        n_cross = rng.binomial(n, cross_share)
        home = cluster_items[homes[u]]
        local = home[rng.choice(home.size, size=n - n_cross, p=cluster_p[homes[u]])]
        glob = rng.choice(n_items, size=n_cross, p=pop_all)
        items = np.unique(np.concatenate([local, glob]))
        rows.append(np.full(items.size, u))
        cols.append(items)
    m = InteractionMatrix.from_pairs(np.concatenate(rows), np.concatenate(cols), n_users, n_items)
    return m, item_labels


def purity(assignment, labels) -> float:
    """Fraction of items whose partition's majority label matches their own."""
    assignment = np.asarray(assignment)
    labels = np.asarray(labels)
    total = 0
    for k in np.unique(assignment):
        total += np.bincount(labels[assignment == k]).max()
    return total / labels.size


def intra_mass(S, labels) -> float:
    """Share of |S| mass on pairs within the same label."""
    S = S.tocoo()
    mag = np.abs(S.data)
    if mag.sum() == 0:
        return 1.0
    return float(mag[labels[S.row] == labels[S.col]].sum() / mag.sum())
