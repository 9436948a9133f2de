import numpy as np
import pytest
import scipy.sparse as sp

from partsim.baselines import ease_closed_form
from partsim.data import InteractionMatrix
from partsim.fpsr import (FpsrConfig, assemble_blocks, fpsr_fit, local_learn, model_footprint,
                          select_hubs_degree, select_hubs_fiedler)
from partsim.modelio import model_digest
from partsim.spectral import SplitRecord, recursive_partition
from partsim.synthetic import intra_mass, planted_clusters


def _counts_matrix(counts):
    counts = np.asarray(counts)
    users = np.concatenate([np.arange(c) for c in counts])
    items = np.repeat(np.arange(counts.size), counts)
    return InteractionMatrix.from_pairs(users, items, counts.max(), counts.size)


@pytest.fixture(scope="module")
def planted():
    return planted_clusters(400, 120, 3, 0.12, 0.01, seed=5)


@pytest.fixture(scope="module")
def bridged():
    """Two item communities joined only through items 57, 58, 59."""
    rng = np.random.default_rng(0)
    A, B, bridges = np.arange(29), np.arange(29, 57), [57, 58, 59]
    rows = []
    for u in range(400):
        its = set(rng.choice(A if u % 2 == 0 else B, 6, replace=False).tolist())
        if rng.random() < 0.15:
            its.add(int(rng.choice(bridges)))
        rows.append(its)
    for b in bridges:
        for _ in range(10):
            rows.append({b, int(rng.choice(A)), int(rng.choice(B))})
    us = [u for u, r in enumerate(rows) for _ in r]
    its = [i for r in rows for i in r]
    return InteractionMatrix.from_pairs(us, its, len(rows), 60)


def test_config_validation():
    for kw in (dict(tau=0), dict(tau=1.5), dict(lam=-1), dict(local_l2=0), dict(rho=1.0),
               dict(hub_strategy="max"), dict(theta=-0.1), dict(d=0)):
        with pytest.raises(ValueError):
            FpsrConfig(**kw)


def test_degree_hubs_examples():
    assert len(select_hubs_degree(_counts_matrix([5, 3, 9, 1]), 0.0)) == 0
    assert select_hubs_degree(_counts_matrix([5, 3, 9, 1]), 0.25).items.tolist() == [2]
    assert select_hubs_degree(_counts_matrix([5, 5, 3, 1]), 0.5).items.tolist() == [0, 1]


def test_fiedler_hubs_single_split():
    rec = SplitRecord(np.arange(4), np.array([-0.9, -0.05, 0.04, 0.8]), "fiedler")
    h = select_hubs_fiedler([rec], 0.5, 4)
    assert h.items.tolist() == [2, 1]
    assert len(select_hubs_fiedler([rec], 0.0, 4)) == 0


def test_fiedler_hubs_need_trace():
    with pytest.raises(ValueError, match="hub_strategy"):
        select_hubs_fiedler([], 0.05, 10)


def test_fiedler_hubs_find_bridges(bridged):
    pa = recursive_partition(bridged, 0.5)
    h = select_hubs_fiedler(pa.split_trace, 0.05, 60)
    assert sorted(h.items.tolist()) == [57, 58, 59]
    # sort oracle over every recorded coordinate
    coords = {}
    for rec in pa.split_trace:
        for i, c in zip(rec.items, np.abs(rec.coords)):
            coords.setdefault(int(i), c)
    oracle = sorted(coords, key=lambda i: (coords[i], i))[:3]
    assert h.items.tolist() == oracle


def test_hub_set_properties(planted):
    m, _ = planted
    pa = recursive_partition(m, 0.2)
    for rho in (0.01, 0.05, 0.2):
        for h in (select_hubs_degree(m, rho), select_hubs_fiedler(pa.split_trace, rho, m.n_items)):
            assert len(h) <= int(np.ceil(rho * m.n_items))
            assert np.unique(h.items).size == len(h)
        assert len(select_hubs_degree(m, rho)) == int(np.ceil(rho * m.n_items))


def test_local_learn_cases(rng):
    R = (rng.random((20, 6)) < 0.5).astype(float)
    assert local_learn(sp.csc_matrix(R[:, :1]), 10).shape == (1, 1)
    assert not local_learn(sp.csc_matrix(R[:, :1]), 10).any()
    assert not local_learn(sp.csc_matrix(R), 10, theta=np.inf).any()
    want = np.maximum(ease_closed_form(R.T @ R, 10), 0)
    np.testing.assert_allclose(local_learn(sp.csc_matrix(R), 10), want, atol=1e-12)
    B = local_learn(sp.csc_matrix(R), 1.0, theta=0.05)
    assert ((B == 0) | (B >= 0.05)).all()


def test_single_block_collapse(planted):
    m, _ = planted
    model = fpsr_fit(m, FpsrConfig(tau=1.0, lam=0.0, local_l2=50))
    want = local_learn(m.csc, 50)
    np.testing.assert_array_equal(model.sparse.toarray(), want)
    assert model.rank == 0 and model.metadata["K"] == 1


def test_planted_mass_intra_cluster():
    m, labels = planted_clusters(300, 100, 2, 0.15, 0.01, seed=9)
    model = fpsr_fit(m, FpsrConfig(tau=0.5, lam=0.0))
    assert intra_mass(model.sparse, labels) >= 0.9


def _cross_pairs(model):
    a = np.asarray(model.metadata["assignment"])
    S = model.sparse.tocoo()
    cross = a[S.row] != a[S.col]
    return S.row[cross], S.col[cross]


@pytest.mark.parametrize("strategy", ["none", "degree", "fiedler"])
def test_cross_partition_structure(planted, strategy):
    m, _ = planted
    model = fpsr_fit(m, FpsrConfig(tau=0.2, lam=0.0, hub_strategy=strategy, rho=0.05))
    r, c = _cross_pairs(model)
    if strategy == "none":
        assert r.size == 0
    else:
        hubs = set(model.metadata["hubs"])
        assert len(hubs) > 0 and r.size > 0
        assert all(i in hubs or j in hubs for i, j in zip(r, c))


def test_hub_pairs_averaged():
    hubs = np.array([0, 1])
    b1 = (np.array([0, 1, 2]), np.array([[0, 2.0, 0], [4.0, 0, 1.0], [0, 0, 0]]))
    b2 = (np.array([0, 1, 3]), np.array([[0, 6.0, 0], [0, 0, 0], [3.0, 0, 0]]))
    S = assemble_blocks([b1, b2], 4, hubs).toarray()
    assert S[0, 1] == 4.0 and S[1, 0] == 2.0
    assert S[1, 2] == 1.0 and S[3, 0] == 3.0
    # order of blocks does not matter
    np.testing.assert_array_equal(S, assemble_blocks([b2, b1], 4, hubs).toarray())


def test_footprint(planted):
    m, _ = planted
    n = m.n_items
    one = fpsr_fit(m, FpsrConfig(tau=1.0, lam=0.2, d=8))
    fp = model_footprint(one)
    assert fp["block_cost"] == n * n and fp["global_cost"] == 8 * n
    assert fp["nnz_sparse"] == one.sparse.nnz
    costs = []
    for tau in (0.5, 0.2, 0.1):
        mod = fpsr_fit(m, FpsrConfig(tau=tau, lam=0.0))
        sizes = np.bincount(mod.metadata["assignment"])
        assert model_footprint(mod)["block_cost"] == int((sizes ** 2).sum())
        costs.append((mod.metadata["K"], model_footprint(mod)["block_cost"]))
    for (k0, c0), (k1, c1) in zip(costs, costs[1:]):
        if k1 > k0:
            assert c1 < c0


def test_two_equal_partitions_footprint():
    m, _ = planted_clusters(400, 100, 2, 0.2, 0.005, seed=3)
    mod = fpsr_fit(m, FpsrConfig(tau=0.5, lam=0.0))
    assert mod.metadata["sizes"] == [50, 50]
    assert model_footprint(mod)["block_cost"] == 100 * 100 // 2


def test_deterministic_digest(planted):
    m, _ = planted
    cfg = FpsrConfig(tau=0.3, lam=0.3, d=8, hub_strategy="fiedler")
    assert model_digest(fpsr_fit(m, cfg)) == model_digest(fpsr_fit(m, cfg))
    assert model_digest(fpsr_fit(m, cfg, workers=3)) == model_digest(fpsr_fit(m, cfg))


def test_global_weights(planted):
    m, _ = planted
    mod = fpsr_fit(m, FpsrConfig(tau=0.5, lam=0.3, d=6))
    w = mod.global_weights
    assert w[0] == 1.0 and np.all(np.diff(w) <= 1e-12) and np.all(w >= 0)


def test_cold_items_get_global_scores_only():
    rng = np.random.default_rng(1)
    R = np.zeros((50, 20))
    R[:, :17] = rng.random((50, 17)) < 0.3
    m = InteractionMatrix.from_dense(R)
    mod = fpsr_fit(m, FpsrConfig(tau=0.5, lam=0.5, d=4))
    S = mod.sparse.toarray()
    assert not S[17:].any() and not S[:, 17:].any()
    assert mod.metadata["cold_partitions"]
