"""Sparse implicit-feedback storage, degree normalization and Gram operators."""
from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import LinearOperator


class DataFormatError(ValueError):
    """Raised for malformed interaction records."""


class EmptyDatasetError(ValueError):
    pass


class InteractionMatrix:
    """Binary user x item matrix with both row- and column-major views.

    Values are implicit (always 1.0). ``user_ids`` / ``item_ids`` map dense
    indices back to the external tokens of the source file.
    """

    def __init__(self, csr, user_ids=None, item_ids=None):
        csr = sp.csr_matrix(csr, dtype=np.float64)
        csr.sum_duplicates()
        csr.data[:] = 1.0
        csr.eliminate_zeros()
        csr.sort_indices()
        self.csr = csr
        self.csc = csr.tocsc()
        self.csc.sort_indices()
        n_users, n_items = csr.shape
        self.user_ids = list(user_ids) if user_ids is not None else [str(u) for u in range(n_users)]
        self.item_ids = list(item_ids) if item_ids is not None else [str(i) for i in range(n_items)]
        if len(self.user_ids) != n_users or len(self.item_ids) != n_items:
            raise ValueError("id maps do not match matrix shape")

    @classmethod
    def from_pairs(cls, users, items, n_users=None, n_items=None, user_ids=None, item_ids=None):
        users = np.asarray(users, dtype=np.int64)
        items = np.asarray(items, dtype=np.int64)
        if users.shape != items.shape:
            raise ValueError("users and items must have the same length")
        if n_users is None:
            n_users = int(users.max()) + 1 if users.size else 0
        if n_items is None:
            n_items = int(items.max()) + 1 if items.size else 0
        if users.size and (users.min() < 0 or users.max() >= n_users
                           or items.min() < 0 or items.max() >= n_items):
            raise ValueError("index out of range")
        csr = sp.csr_matrix((np.ones(users.size), (users, items)), shape=(n_users, n_items))
        return cls(csr, user_ids, item_ids)

    @classmethod
    def from_dense(cls, dense, **kw):
        return cls(sp.csr_matrix(np.asarray(dense) != 0, dtype=np.float64), **kw)

    @property
    def shape(self):
        return self.csr.shape

    @property
    def n_users(self) -> int:
        return self.csr.shape[0]

    @property
    def n_items(self) -> int:
        return self.csr.shape[1]

    @property
    def nnz(self) -> int:
        return self.csr.nnz

    def user_degrees(self) -> np.ndarray:
        return np.diff(self.csr.indptr)

    def item_degrees(self) -> np.ndarray:
        return np.diff(self.csc.indptr)

    def row(self, u: int) -> np.ndarray:
        return self.csr.indices[self.csr.indptr[u]:self.csr.indptr[u + 1]]

    def col(self, i: int) -> np.ndarray:
        return self.csc.indices[self.csc.indptr[i]:self.csc.indptr[i + 1]]

    def entries(self) -> np.ndarray:
        """(nnz, 2) array of (user, item) pairs in row-major sorted order."""
        users = np.repeat(np.arange(self.n_users), self.user_degrees())
        return np.column_stack([users, self.csr.indices]).astype(np.int64)

    def with_entries(self, users, items):
        """New matrix over the same id space holding only the given pairs."""
        return InteractionMatrix.from_pairs(users, items, self.n_users, self.n_items,
                                            self.user_ids, self.item_ids)

    def toarray(self) -> np.ndarray:
        return self.csr.toarray()

    def digest(self) -> str:
        h = hashlib.sha256()
        h.update(np.asarray(self.shape, dtype=np.int64).tobytes())
        h.update(self.entries().tobytes())
        return h.hexdigest()

    def __eq__(self, other):
        if not isinstance(other, InteractionMatrix):
            return NotImplemented
        return (self.shape == other.shape
                and np.array_equal(self.entries(), other.entries())
                and self.user_ids == other.user_ids
                and self.item_ids == other.item_ids)

    def __repr__(self):
        return f"InteractionMatrix(n_users={self.n_users}, n_items={self.n_items}, nnz={self.nnz})"

    def save(self, path):
        e = self.entries()
        with open(path, "wb") as fh:
            np.savez(fh, users=e[:, 0], items=e[:, 1],
                     shape=np.asarray(self.shape, dtype=np.int64),
                     user_ids=np.asarray(self.user_ids, dtype=str),
                     item_ids=np.asarray(self.item_ids, dtype=str))

    @classmethod
    def load(cls, path):
        with np.load(path, allow_pickle=False) as z:
            n_users, n_items = (int(v) for v in z["shape"])
            return cls.from_pairs(z["users"], z["items"], n_users, n_items,
                                  [str(u) for u in z["user_ids"]], [str(i) for i in z["item_ids"]])


@dataclass(frozen=True)
class ColumnFormat:
    """How to read a delimited interaction file.

    ``sep=None`` splits on any run of whitespace. When ``rating_col`` and
    ``min_rating`` are both set, only records with rating >= min_rating are kept.
    """
    sep: str | None = None
    user_col: int = 0
    item_col: int = 1
    rating_col: int | None = None
    min_rating: float | None = None
    header: bool = False


def load_interactions(path, fmt: ColumnFormat | None = None, kcore: int = 0) -> InteractionMatrix:
    fmt = fmt or ColumnFormat()
    path = Path(path)
    users, items = [], []
    uid, iid = {}, {}
    needed = max(fmt.user_col, fmt.item_col,
                 fmt.rating_col if fmt.rating_col is not None else -1)
    with path.open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if fmt.header and lineno == 1:
                continue
            line = line.rstrip("\r\n")
            if not line.strip():
                continue
            parts = line.split(fmt.sep)
            if len(parts) <= needed:
                raise DataFormatError(f"{path}:{lineno}: expected at least {needed + 1} columns, got {len(parts)}")
            u, i = parts[fmt.user_col].strip(), parts[fmt.item_col].strip()
            if not u or not i:
                raise DataFormatError(f"{path}:{lineno}: empty user or item token")
            if fmt.rating_col is not None and fmt.min_rating is not None:
                try:
                    rating = float(parts[fmt.rating_col])
                except ValueError:
                    raise DataFormatError(f"{path}:{lineno}: bad rating {parts[fmt.rating_col]!r}") from None
                if rating < fmt.min_rating:
                    continue
            users.append(uid.setdefault(u, len(uid)))
            items.append(iid.setdefault(i, len(iid)))
    if not users:
        raise EmptyDatasetError(f"{path}: no interactions")
    m = InteractionMatrix.from_pairs(users, items, len(uid), len(iid), list(uid), list(iid))
    if kcore > 0:
        m = kcore_filter(m, kcore)
    return m


def kcore_filter(m: InteractionMatrix, k: int) -> InteractionMatrix:
    """Iteratively drop users and items with fewer than ``k`` interactions."""
    csr = m.csr
    users = np.arange(m.n_users)
    items = np.arange(m.n_items)
    while True:
        ku = np.diff(csr.indptr) >= k
        ki = np.asarray((csr != 0).sum(axis=0)).ravel() >= k
        if ku.all() and ki.all():
            break
        csr = csr[ku][:, ki]
        users, items = users[ku], items[ki]
        if csr.shape[0] == 0 or csr.shape[1] == 0:
            raise EmptyDatasetError(f"{k}-core filter removed every interaction")
    return InteractionMatrix(csr, [m.user_ids[u] for u in users], [m.item_ids[i] for i in items])


def write_interactions(m: InteractionMatrix, path):
    """Write ``user_id<TAB>item_id`` lines sorted lexicographically."""
    e = m.entries()
    lines = sorted(f"{m.user_ids[u]}\t{m.item_ids[i]}" for u, i in e)
    Path(path).write_text("".join(line + "\n" for line in lines), encoding="utf-8")


def gini(counts) -> float:
    """Gini coefficient of a count distribution (sorted cumulative-share form)."""
    x = np.sort(np.asarray(counts, dtype=np.int64))
    n = x.size
    total = int(x.sum())
    if n == 0 or total == 0:
        raise EmptyDatasetError("gini of an empty distribution")
    weighted = int(np.dot(np.arange(1, n + 1, dtype=np.int64), x))
    # integer numerator keeps the uniform and single-owner cases exact
    return (2 * weighted - (n + 1) * total) / (n * total)


@dataclass(frozen=True)
class DatasetStats:
    users: int
    items: int
    interactions: int
    density: float
    gini_user: float
    gini_item: float

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2)


def compute_stats(m: InteractionMatrix) -> DatasetStats:
    if m.nnz == 0:
        raise EmptyDatasetError("cannot compute statistics of an empty matrix")
    return DatasetStats(
        users=m.n_users,
        items=m.n_items,
        interactions=m.nnz,
        density=m.nnz / (m.n_users * m.n_items),
        gini_user=gini(m.user_degrees()),
        gini_item=gini(m.item_degrees()),
    )


def _inv_power(deg, p):
    out = np.zeros(deg.shape, dtype=np.float64)
    nz = deg > 0
    out[nz] = deg[nz].astype(np.float64) ** (-p)
    return out


class NormalizedView:
    """Entry (u, i) weighted by deg(u)^-a * deg(i)^-b; zero-degree rows stay zero."""

    def __init__(self, base: InteractionMatrix, a: float = 0.5, b: float = 0.5):
        if a < 0 or b < 0:
            raise ValueError("normalization exponents must be non-negative")
        self.base = base
        self.a = float(a)
        self.b = float(b)
        self.user_degrees = base.user_degrees()
        self.item_degrees = base.item_degrees()
        self.user_weights = _inv_power(self.user_degrees, self.a)
        self.item_weights = _inv_power(self.item_degrees, self.b)
        self._csr = None
        self._csc = None

    @property
    def shape(self):
        return self.base.shape

    @property
    def csr(self):
        if self._csr is None:
            m = self.base.csr.copy()
            rows = np.repeat(np.arange(m.shape[0]), np.diff(m.indptr))
            m.data = self.user_weights[rows] * self.item_weights[m.indices]
            self._csr = m
        return self._csr

    @property
    def csc(self):
        if self._csc is None:
            self._csc = self.csr.tocsc()
        return self._csc

    def columns(self, items) -> sp.csc_matrix:
        return self.csc[:, np.asarray(items, dtype=np.int64)]

    def toarray(self):
        return self.csr.toarray()


def normalize(m: InteractionMatrix, a: float, b: float) -> NormalizedView:
    return NormalizedView(m, a, b)


class GramOperator(LinearOperator):
    """Matrix-free x -> R~^T (R~ x) on the item space, optionally restricted.

    Only the restricted columns of the normalized matrix are kept; the item
    Gram itself is never formed.
    """

    def __init__(self, view: NormalizedView, items=None):
        if items is None:
            self.items = np.arange(view.shape[1])
            self.R = view.csr
        else:
            self.items = np.asarray(items, dtype=np.int64)
            self.R = view.columns(self.items).tocsr()
        self.Rt = self.R.T.tocsr()
        n = self.items.size
        super().__init__(dtype=np.float64, shape=(n, n))

    def _matvec(self, x):
        return self.Rt @ (self.R @ np.asarray(x).ravel())

    def _matmat(self, X):
        return self.Rt @ (self.R @ X)

    def _rmatvec(self, x):
        return self._matvec(x)

    def diagonal(self) -> np.ndarray:
        return np.asarray(self.R.multiply(self.R).sum(axis=0)).ravel()


def gram_operator(view: NormalizedView, items=None) -> GramOperator:
    return GramOperator(view, items)
