"""Top-K recommendation, Recall/nDCG per popularity segment, and paired significance."""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .data import InteractionMatrix
from .splitter import ItemSegments

SEGMENTS = ("head", "overall", "tail")


@dataclass
class RankedLists:
    """Top-K lists for a set of users; ``items`` is padded with -1 when fewer than K are rankable."""
    users: np.ndarray       # (n,)
    items: np.ndarray       # (n, K)
    scores: np.ndarray      # (n, K)

    @property
    def K(self) -> int:
        return self.items.shape[1]

    def __len__(self):
        return self.users.size

    def get(self, user: int) -> np.ndarray:
        row = self.items[np.searchsorted(self.users, user)]
        return row[row >= 0]


def topk_indices(scores: np.ndarray, K: int) -> np.ndarray:
    """Per row: indices of the K best scores, descending, ties by ascending index."""
    n = scores.shape[1]
    if K >= n or n <= 4 * K:
        return np.argsort(-scores, axis=1, kind="stable")[:, :K]
    # value of the K-th best entry bounds the candidate set; ties at the boundary are kept
    kth = -np.partition(-scores, K - 1, axis=1)[:, K - 1]
    out = np.empty((scores.shape[0], K), dtype=np.int64)
    for r in range(scores.shape[0]):
        cand = np.flatnonzero(scores[r] >= kth[r])
        out[r] = cand[np.argsort(-scores[r, cand], kind="stable")[:K]]
    return out


def recommend_topk(model, train: InteractionMatrix, users=None, K: int = 20,
                   batch_size: int = 512) -> RankedLists:
    if K <= 0:
        raise ValueError("K must be positive")
    if model.n_items != train.n_items:
        raise ValueError(f"model has {model.n_items} items, training matrix has {train.n_items}")
    users = np.arange(train.n_users) if users is None else np.unique(np.asarray(users, dtype=np.int64))
    K_eff = min(K, train.n_items)
    all_items = np.full((users.size, K), -1, dtype=np.int64)
    all_scores = np.full((users.size, K), -np.inf)
    csr = train.csr
    for lo in range(0, users.size, batch_size):
        ub = users[lo:lo + batch_size]
        S = np.array(model.score(train, ub), dtype=np.float64)
        sub = csr[ub]
        rows = np.repeat(np.arange(ub.size), np.diff(sub.indptr))
        S[rows, sub.indices] = -np.inf
        idx = topk_indices(S, K_eff)
        sc = np.take_along_axis(S, idx, axis=1)
        idx[np.isneginf(sc)] = -1
        all_items[lo:lo + ub.size, :K_eff] = idx
        all_scores[lo:lo + ub.size, :K_eff] = sc
    return RankedLists(users, all_items, all_scores)


def _discounts(K):
    return 1.0 / np.log2(np.arange(2, K + 2))


@dataclass
class MetricReport:
    K: int
    segment: str
    users: np.ndarray
    recall: np.ndarray
    ndcg: np.ndarray
    hits: np.ndarray
    aggregate: dict = field(default_factory=dict)

    @property
    def evaluated_users(self) -> int:
        return self.users.size

    @property
    def per_user(self) -> dict:
        return {int(u): (float(r), float(n)) for u, r, n in zip(self.users, self.recall, self.ndcg)}

    def value(self, metric: str) -> float:
        return self.aggregate[metric]

    def per_user_values(self, metric: str) -> np.ndarray:
        return self.recall if metric == "recall" else self.ndcg

    def to_dict(self) -> dict:
        return {"K": self.K, "segment": self.segment, "evaluated_users": self.evaluated_users,
                "aggregate": self.aggregate}


def metrics(lists: RankedLists, test: InteractionMatrix, K: int,
            segments: ItemSegments | None = None, segment: str = "overall") -> MetricReport:
    """Recall@K and nDCG@K; non-overall segments filter the test set, not the ranked list."""
    if K <= 0:
        raise ValueError("K must be positive")
    if K > lists.K:
        raise ValueError(f"lists hold only {lists.K} items, cannot evaluate K={K}")
    if test.nnz == 0:
        raise ValueError("empty test set")
    keep = None
    if segment != "overall":
        if segments is None:
            raise ValueError(f"segment {segment!r} needs ItemSegments")
        keep = segments.mask(segment)
    disc = _discounts(K)
    idcg_cum = np.concatenate([[0.0], np.cumsum(disc)])
    pos = {int(u): r for r, u in enumerate(lists.users)}
    users, rec, ndcg, hits = [], [], [], []
    for u in range(test.n_users):
        t = test.row(u)
        if keep is not None:
            t = t[keep[t]]
        if t.size == 0:
            continue
        r = pos.get(u)
        top = lists.items[r, :K] if r is not None else np.full(K, -1)
        hit = np.isin(top, t) & (top >= 0)
        h = int(hit.sum())
        users.append(u)
        hits.append(h)
        rec.append(h / t.size)
        # accumulate in rank order (cumsum is sequential), so results do not depend on pairwise summation
        dcg = float(np.cumsum(np.where(hit, disc, 0.0))[-1])
        ndcg.append(dcg / idcg_cum[min(K, t.size)])
    rep = MetricReport(K, segment, np.asarray(users, dtype=np.int64), np.asarray(rec), np.asarray(ndcg),
                       np.asarray(hits, dtype=np.int64))
    rep.aggregate = {"recall": float(rep.recall.mean()) if users else float("nan"),
                     "ndcg": float(rep.ndcg.mean()) if users else float("nan")}
    return rep


def evaluate(lists: RankedLists, test: InteractionMatrix, cutoffs=(10, 20),
             segments: ItemSegments | None = None) -> list:
    names = SEGMENTS if segments is not None else ("overall",)
    return [metrics(lists, test, K, segments, s) for s in names for K in cutoffs]


def hit_decomposition_holds(lists: RankedLists, test: InteractionMatrix, segments: ItemSegments,
                            cutoffs=(10, 20)) -> bool:
    """Per user and cutoff: overall hits == head hits + tail hits."""
    for K in cutoffs:
        reps = {s: metrics(lists, test, K, segments, s) for s in SEGMENTS}
        per = {s: dict(zip(r.users.tolist(), r.hits.tolist())) for s, r in reps.items()}
        for u, h in per["overall"].items():
            if h != per["head"].get(u, 0) + per["tail"].get(u, 0):
                return False
    return True


def paired_significance(a, b) -> float:
    """Two-sided paired t-test p-value; all-zero differences give 1.0."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError("paired samples must have equal length")
    n = a.size
    if n < 2:
        raise ValueError("need at least two paired observations")
    d = a - b
    if np.all(d == 0):
        return 1.0
    sd = d.std(ddof=1)
    if sd == 0:
        return 0.0
    t = d.mean() / (sd / math.sqrt(n))
    return float(2 * stats.t.sf(abs(t), n - 1))


def aligned(rep_a: MetricReport, rep_b: MetricReport, metric: str):
    """Per-user values of two reports over their common users, same order."""
    common, ia, ib = np.intersect1d(rep_a.users, rep_b.users, return_indices=True)
    return rep_a.per_user_values(metric)[ia], rep_b.per_user_values(metric)[ib]


CSV_COLUMNS = ("model", "dataset", "segment", "K", "metric", "value", "p_value_vs_baseline")


def report_rows(model: str, dataset: str, reports, baseline_reports=None) -> list:
    """Flat rows; ``baseline_reports`` (same layout) adds paired p-values."""
    base = {(r.segment, r.K): r for r in baseline_reports} if baseline_reports else {}
    rows = []
    for r in reports:
        for metric in ("recall", "ndcg"):
            p = None
            b = base.get((r.segment, r.K))
            if b is not None and b.evaluated_users >= 2:
                x, y = aligned(r, b, metric)
                p = paired_significance(x, y) if x.size >= 2 else None
            rows.append({"model": model, "dataset": dataset, "segment": r.segment, "K": r.K,
                         "metric": metric, "value": r.aggregate[metric], "p_value_vs_baseline": p})
    return rows


def rows_to_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, extrasaction="ignore", lineterminator="\n")
    w.writeheader()
    for row in rows:
        row = dict(row)
        row["value"] = f"{row['value']:.6f}"
        p = row.get("p_value_vs_baseline")
        row["p_value_vs_baseline"] = "" if p is None else f"{p:.6g}"
        w.writerow(row)
    return buf.getvalue()


def rows_to_json(rows) -> str:
    return json.dumps(rows, indent=1)
