"""Seeded per-user hold-out splitting and head/tail item segmentation."""
from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from ._util import ceil_frac, floor_frac, rank_desc
from .data import EmptyDatasetError, InteractionMatrix

SPLIT_FILES = {"train": "train.tsv", "valid": "valid.tsv", "test": "test.tsv"}
MANIFEST = "split.manifest.json"


class StageAccessError(RuntimeError):
    """Raised when a split part is accessed that was not loaded for this stage."""


@dataclass(frozen=True)
class SplitConfig:
    seed: int = 0
    test_fraction: float = 0.15
    valid_fraction: float = 0.15
    min_user_interactions: int = 5

    def __post_init__(self):
        for name in ("test_fraction", "valid_fraction"):
            v = getattr(self, name)
            if not 0 < v < 1:
                raise ValueError(f"{name} must lie in (0, 1), got {v}")
        if self.test_fraction + self.valid_fraction >= 1:
            raise ValueError("test_fraction + valid_fraction must be < 1")
        if self.min_user_interactions < 0:
            raise ValueError("min_user_interactions must be >= 0")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")


def split_counts(n: int, cfg: SplitConfig) -> tuple[int, int, int]:
    """(test, valid, train) counts for a user with ``n`` interactions."""
    if n < cfg.min_user_interactions or n < 3:
        return 0, 0, n
    t = max(1, floor_frac(cfg.test_fraction, n))
    v = max(1, floor_frac(cfg.valid_fraction, n - t))
    return t, v, n - t - v


def user_stream(seed: int, user: int) -> np.random.Generator:
    # keyed on (seed, user) only, so results do not depend on iteration order
    return np.random.Generator(np.random.Philox(key=[user, seed]))


@dataclass
class SplitBundle:
    config: SplitConfig
    content_digest: str
    _parts: dict = field(default_factory=dict, repr=False)
    access_log: list = field(default_factory=list, repr=False)

    def _get(self, name):
        if name not in self._parts:
            raise StageAccessError(f"split part {name!r} was not loaded for this stage")
        self.access_log.append(name)
        return self._parts[name]

    @property
    def train(self) -> InteractionMatrix:
        return self._get("train")

    @property
    def valid(self) -> InteractionMatrix:
        return self._get("valid")

    @property
    def test(self) -> InteractionMatrix:
        return self._get("test")

    @property
    def loaded(self) -> tuple:
        return tuple(self._parts)

    def restricted(self, *stages) -> "SplitBundle":
        """Copy exposing only ``stages``; touching any other part raises."""
        return SplitBundle(self.config, self.content_digest, {s: self._parts[s] for s in stages})


def _part_text(m: InteractionMatrix) -> str:
    e = m.entries()
    lines = sorted(f"{m.user_ids[u]}\t{m.item_ids[i]}" for u, i in e)
    return "".join(line + "\n" for line in lines)


def _digest(texts: dict) -> str:
    h = hashlib.sha256()
    for name in ("train", "valid", "test"):
        h.update(f"#{name}\n".encode())
        h.update(texts[name].encode("utf-8"))
    return h.hexdigest()


def holdout_split(m: InteractionMatrix, cfg: SplitConfig) -> SplitBundle:
    if m.nnz == 0:
        raise EmptyDatasetError("cannot split an empty matrix")
    parts = {k: ([], []) for k in ("train", "valid", "test")}
    for u in range(m.n_users):
        items = m.row(u)
        n = items.size
        if n == 0:
            continue
        t, v, _ = split_counts(n, cfg)
        perm = items[user_stream(cfg.seed, u).permutation(n)] if t else items
        for name, chunk in (("test", perm[:t]), ("valid", perm[t:t + v]), ("train", perm[t + v:])):
            parts[name][0].append(np.full(chunk.size, u))
            parts[name][1].append(chunk)
    mats = {}
    for name, (us, its) in parts.items():
        us = np.concatenate(us) if us else np.empty(0, np.int64)
        its = np.concatenate(its) if its else np.empty(0, np.int64)
        mats[name] = m.with_entries(us, its)
    digest = _digest({k: _part_text(v) for k, v in mats.items()})
    return SplitBundle(cfg, digest, mats)


def save_split(bundle: SplitBundle, out_dir) -> Path:
    """Write train/valid/test TSVs plus the JSON manifest; returns the manifest path."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    ref = bundle._parts["train"]
    texts = {k: _part_text(bundle._parts[k]) for k in SPLIT_FILES}
    for k, fname in SPLIT_FILES.items():
        (out / fname).write_text(texts[k], encoding="utf-8")
    manifest = {
        "config": asdict(bundle.config),
        "content_digest": _digest(texts),
        "files": SPLIT_FILES,
        "n_users": ref.n_users,
        "n_items": ref.n_items,
        "user_ids": ref.user_ids,
        "item_ids": ref.item_ids,
    }
    path = out / MANIFEST
    path.write_text(json.dumps(manifest, indent=1), encoding="utf-8")
    return path


def load_split(split_dir, stages=("train", "valid", "test"), verify=True) -> SplitBundle:
    """Load the requested parts only; parts not listed are never opened."""
    d = Path(split_dir)
    manifest = json.loads((d / MANIFEST).read_text(encoding="utf-8"))
    uid = {u: k for k, u in enumerate(manifest["user_ids"])}
    iid = {i: k for k, i in enumerate(manifest["item_ids"])}
    parts, texts = {}, {}
    for stage in stages:
        text = (d / manifest["files"][stage]).read_text(encoding="utf-8")
        texts[stage] = text
        us, its = [], []
        for line in text.splitlines():
            u, i = line.split("\t")
            us.append(uid[u])
            its.append(iid[i])
        parts[stage] = InteractionMatrix.from_pairs(us, its, manifest["n_users"], manifest["n_items"],
                                                    manifest["user_ids"], manifest["item_ids"])
    if verify and set(stages) == set(SPLIT_FILES):
        if _digest(texts) != manifest["content_digest"]:
            raise ValueError(f"{d}: split files do not match manifest digest")
    return SplitBundle(SplitConfig(**manifest["config"]), manifest["content_digest"], parts)


@dataclass(frozen=True)
class ItemSegments:
    head: np.ndarray
    tail: np.ndarray
    head_fraction: float = 0.10

    @property
    def n_items(self) -> int:
        return self.head.size + self.tail.size

    def mask(self, segment: str) -> np.ndarray | None:
        if segment == "overall":
            return None
        m = np.zeros(self.n_items, dtype=bool)
        m[self.head if segment == "head" else self.tail] = True
        return m


def head_tail_partition(train: InteractionMatrix, head_fraction: float = 0.10) -> ItemSegments:
    if not 0 < head_fraction < 1:
        raise ValueError("head_fraction must lie in (0, 1)")
    if train.nnz == 0:
        raise EmptyDatasetError("head/tail segmentation needs a non-empty training matrix")
    order = rank_desc(train.item_degrees())
    n_head = ceil_frac(head_fraction, train.n_items)
    return ItemSegments(np.sort(order[:n_head]), np.sort(order[n_head:]), head_fraction)
