import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from partsim.data import InteractionMatrix
from partsim.splitter import (SplitConfig, StageAccessError, head_tail_partition, holdout_split,
                              load_split, save_split, split_counts)
from partsim.synthetic import community_catalog


@pytest.fixture(scope="module")
def catalog():
    m, _ = community_catalog(600, 200, 8, mean_len=12, seed=3)
    return m


def test_counts_examples():
    cfg = SplitConfig()
    assert split_counts(20, cfg) == (3, 2, 15)
    assert split_counts(4, cfg) == (0, 0, 4)
    assert split_counts(5, cfg) == (1, 1, 3)


@given(n=st.integers(0, 500), tf=st.floats(0.01, 0.6), vf=st.floats(0.01, 0.35),
       mn=st.integers(0, 10))
def test_counts_formula(n, tf, vf, mn):
    if tf + vf >= 1:
        return
    cfg = SplitConfig(test_fraction=tf, valid_fraction=vf, min_user_interactions=mn)
    t, v, r = split_counts(n, cfg)
    assert t + v + r == n
    if n >= max(mn, 3):
        assert t == max(1, int(np.floor(round(tf * n, 9))))
        assert v == max(1, int(np.floor(round(vf * (n - t), 9))))
        assert r >= 1
    else:
        assert (t, v) == (0, 0)


@pytest.mark.parametrize("kw", [dict(test_fraction=0), dict(valid_fraction=1.0),
                                dict(test_fraction=0.6, valid_fraction=0.4),
                                dict(min_user_interactions=-1), dict(seed=-1)])
def test_config_rejects(kw):
    with pytest.raises(ValueError):
        SplitConfig(**kw)


def test_partition_and_no_leakage(catalog):
    b = holdout_split(catalog, SplitConfig(seed=7))
    for u in range(catalog.n_users):
        tr, va, te = set(b.train.row(u)), set(b.valid.row(u)), set(b.test.row(u))
        assert not (tr & va or tr & te or va & te)
        assert tr | va | te == set(catalog.row(u))
        n = catalog.row(u).size
        t, v, _ = split_counts(n, b.config)
        assert (len(te), len(va)) == (t, v)


def test_determinism_and_seed_sensitivity(catalog):
    d0 = holdout_split(catalog, SplitConfig(seed=0)).content_digest
    assert holdout_split(catalog, SplitConfig(seed=0)).content_digest == d0
    digests = {holdout_split(catalog, SplitConfig(seed=s)).content_digest for s in range(12)}
    assert len(digests) == 12


def test_user_split_depends_only_on_own_row(catalog):
    # per-user streams: editing other users' histories leaves this user's split unchanged
    cfg = SplitConfig(seed=5)
    a = holdout_split(catalog, cfg)
    R = catalog.toarray()
    R[1:] = R[1:, ::-1]
    b = holdout_split(InteractionMatrix.from_dense(R), cfg)
    assert set(a.test.row(0)) == set(b.test.row(0))
    assert set(a.valid.row(0)) == set(b.valid.row(0))


def test_save_load_roundtrip(tmp_path, catalog):
    b = holdout_split(catalog, SplitConfig(seed=2))
    save_split(b, tmp_path)
    c = load_split(tmp_path)
    assert c.content_digest == b.content_digest
    for part in ("train", "valid", "test"):
        assert getattr(c, part) == getattr(b, part)


def test_stage_scoped_loading(tmp_path, catalog):
    b = holdout_split(catalog, SplitConfig(seed=2))
    save_split(b, tmp_path)
    # the test part is never opened when not requested
    (tmp_path / "test.tsv").unlink()
    c = load_split(tmp_path, ("train", "valid"))
    assert c.train.nnz and c.valid.nnz
    with pytest.raises(StageAccessError):
        c.test
    r = b.restricted("train")
    with pytest.raises(StageAccessError):
        r.valid


def test_tampered_split_detected(tmp_path, catalog):
    save_split(holdout_split(catalog, SplitConfig()), tmp_path)
    with open(tmp_path / "test.tsv", "a") as fh:
        fh.write(f"{catalog.user_ids[0]}\t{catalog.item_ids[0]}\n")
    with pytest.raises(ValueError, match="digest"):
        load_split(tmp_path)


def _counts_matrix(counts):
    counts = np.asarray(counts)
    users = np.concatenate([np.arange(c) for c in counts]) if counts.sum() else np.empty(0, int)
    items = np.repeat(np.arange(counts.size), counts)
    return InteractionMatrix.from_pairs(users, items, max(counts.max(), 1), counts.size)


def test_head_tail_examples():
    assert head_tail_partition(_counts_matrix([9, 5, 5, 1]), 0.25).head.tolist() == [0]
    assert head_tail_partition(_counts_matrix([5, 5, 5, 5]), 0.5).head.tolist() == [0, 1]


def test_head_tail_sort_oracle(rng):
    counts = rng.integers(1, 60, 1000)
    seg = head_tail_partition(_counts_matrix(counts), 0.1)
    oracle = sorted(range(1000), key=lambda i: (-counts[i], i))[:100]
    assert seg.head.tolist() == sorted(oracle)
    assert np.intersect1d(seg.head, seg.tail).size == 0
    assert np.union1d(seg.head, seg.tail).tolist() == list(range(1000))
