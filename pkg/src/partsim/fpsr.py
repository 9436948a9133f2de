"""FPSR / FPSR+ : partitioned item-similarity learning with a low-rank global term and hub items."""
from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass

import numpy as np
import scipy.sparse as sp

from ._util import ceil_frac, rank_desc
from .baselines import ease_closed_form
from .data import InteractionMatrix, NormalizedView, gram_operator
from .models import SimilarityModel
from .spectral import EigenConfig, PartitionAssignment, recursive_partition, top_eigenpairs

log = logging.getLogger(__name__)

HUB_STRATEGIES = ("none", "degree", "fiedler")
PARTITION_DENSE_LIMIT = 20000


@dataclass(frozen=True)
class FpsrConfig:
    tau: float = 0.2
    lam: float = 0.3
    d: int = 64
    local_l2: float = 100.0
    theta: float = 0.0
    hub_strategy: str = "none"
    rho: float = 0.05
    seed: int = 0
    eig_tol: float = 1e-7

    def __post_init__(self):
        if not 0 < self.tau <= 1:
            raise ValueError("tau must lie in (0, 1]")
        if self.lam < 0:
            raise ValueError("lam must be >= 0")
        if self.d < 1:
            raise ValueError("d must be >= 1")
        if self.local_l2 <= 0:
            raise ValueError("local_l2 must be > 0")
        if self.theta < 0:
            raise ValueError("theta must be >= 0")
        if self.hub_strategy not in HUB_STRATEGIES:
            raise ValueError(f"hub_strategy must be one of {HUB_STRATEGIES}")
        if not 0 <= self.rho < 1:
            raise ValueError("rho must lie in [0, 1)")


@dataclass
class HubSet:
    items: np.ndarray
    strategy: str
    scores: np.ndarray      # aligned with ``items``

    def __len__(self):
        return self.items.size


def select_hubs_degree(train: InteractionMatrix, rho: float) -> HubSet:
    if not 0 <= rho < 1:
        raise ValueError("rho must lie in [0, 1)")
    deg = train.item_degrees()
    n_hub = min(ceil_frac(rho, train.n_items), train.n_items)
    items = rank_desc(deg)[:n_hub]
    return HubSet(items, "degree", deg[items].astype(np.float64))


def select_hubs_fiedler(trace, rho: float, n_items: int) -> HubSet:
    """Boundary items of every recorded cut (smallest |Fiedler coordinate|)."""
    if not 0 <= rho < 1:
        raise ValueError("rho must lie in [0, 1)")
    if not trace:
        raise ValueError("empty split trace (tau = 1 never splits); use hub_strategy 'none' or 'degree'")
    first = {}
    for rec in trace:
        if rec.coords is None:
            continue
        mag = np.abs(rec.coords)
        quota = ceil_frac(rho, rec.items.size)
        for j in np.lexsort((rec.items, mag))[:quota]:
            first.setdefault(int(rec.items[j]), float(mag[j]))
    cand = np.fromiter(first, dtype=np.int64, count=len(first))
    mags = np.fromiter(first.values(), dtype=np.float64, count=len(first))
    order = np.lexsort((cand, mags))[:min(ceil_frac(rho, n_items), n_items)]
    return HubSet(cand[order], "fiedler", mags[order])


def local_learn(sub, l2: float, theta: float = 0.0) -> np.ndarray:
    """Closed-form ridge over the columns of ``sub``; negatives clamped, entries < theta dropped."""
    if l2 <= 0:
        raise ValueError("l2 must be > 0")
    m = sub.shape[1]
    if m > PARTITION_DENSE_LIMIT:
        raise ValueError(f"partition of {m} items exceeds the dense limit {PARTITION_DENSE_LIMIT}")
    if m <= 1:
        return np.zeros((m, m))
    sub = sp.csc_matrix(sub)
    B = ease_closed_form((sub.T @ sub).toarray(), l2)
    np.maximum(B, 0.0, out=B)
    B[B < theta] = 0.0
    return B


def assemble_blocks(blocks, n_items: int, hubs: np.ndarray) -> sp.csr_matrix:
    """Merge per-partition blocks; hub-hub pairs are averaged over all blocks."""
    is_hub = np.zeros(n_items, dtype=bool)
    is_hub[hubs] = True
    rows, cols, vals = [], [], []
    hh = {}
    for items, B in blocks:
        r, c = np.nonzero(B)
        gi, gj = items[r], items[c]
        both = is_hub[gi] & is_hub[gj]
        rows.append(gi[~both])
        cols.append(gj[~both])
        vals.append(B[r[~both], c[~both]])
        if both.any():
            for a, b, v in zip(gi[both], gj[both], B[r[both], c[both]]):
                hh[(a, b)] = hh.get((a, b), 0.0) + v
    if hh:
        keys = sorted(hh)
        rows.append(np.array([k[0] for k in keys], dtype=np.int64))
        cols.append(np.array([k[1] for k in keys], dtype=np.int64))
        vals.append(np.array([hh[k] for k in keys]) / len(blocks))
    if not rows:
        return sp.csr_matrix((n_items, n_items))
    S = sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                      shape=(n_items, n_items))
    S.sort_indices()
    return S


def global_factor(train: InteractionMatrix, d: int, tol: float = 1e-7, seed: int = 0):
    """Top-``d`` eigenvectors of the normalized item Gram, weighted by lambda_j / lambda_1."""
    d = min(d, train.n_items)
    basis = top_eigenpairs(gram_operator(NormalizedView(train, 0.5, 0.5)), d, tol=tol, seed=seed,
                           check_every=max(5, d // 4))
    top = basis.values[0]
    weights = basis.values / top if top > 0 else np.zeros(d)
    return basis.vectors, weights


def fpsr_fit(train: InteractionMatrix, cfg: FpsrConfig, workers: int = 1,
             partition: PartitionAssignment | None = None) -> SimilarityModel:
    n = train.n_items
    pa = partition or recursive_partition(train, cfg.tau, EigenConfig(tol=1e-8, max_iter=300, seed=cfg.seed))
    if cfg.hub_strategy == "degree":
        hubs = select_hubs_degree(train, cfg.rho)
    elif cfg.hub_strategy == "fiedler":
        hubs = select_hubs_fiedler(pa.split_trace, cfg.rho, n)
    else:
        hubs = HubSet(np.empty(0, np.int64), "none", np.empty(0))
    hub_items = np.sort(hubs.items)

    cold = set(pa.cold.tolist())
    parts = [p for k, p in enumerate(pa.partitions()) if k not in cold]
    augmented = [np.concatenate([p, np.setdiff1d(hub_items, p)]) for p in parts]

    def learn(items):
        return items, local_learn(train.csc[:, items], cfg.local_l2, cfg.theta)

    if workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            blocks = list(ex.map(learn, augmented))
    else:
        blocks = [learn(a) for a in augmented]
    S = assemble_blocks(blocks, n, hub_items)

    V = w = None
    if cfg.lam > 0:
        V, w = global_factor(train, cfg.d, cfg.eig_tol, cfg.seed)
    family = {"none": "fpsr", "degree": "fpsr+d", "fiedler": "fpsr+f"}[cfg.hub_strategy]
    meta = {
        "tau": pa.tau,
        "K": pa.K,
        "sizes": pa.sizes.tolist(),
        "cold_partitions": pa.cold.tolist(),
        "assignment": pa.assignment.tolist(),
        "hub_strategy": cfg.hub_strategy,
        "hubs": hubs.items.tolist(),
    }
    return SimilarityModel(S, family, asdict(cfg), global_vectors=V, global_weights=w, lam=cfg.lam,
                           metadata=meta)


def model_footprint(model: SimilarityModel) -> dict:
    sizes = np.asarray(model.metadata.get("sizes", [model.n_items]), dtype=np.int64)
    return {
        "nnz_sparse": int(model.sparse.nnz),
        "block_cost": int(np.sum(sizes ** 2)),
        "global_cost": int(model.rank * model.n_items),
    }
