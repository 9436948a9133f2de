import numpy as np
import pytest
import scipy.linalg as sla

from partsim.baselines import ease_closed_form
from partsim.bism import BismConfig, bdr_project, bism_fit, bism_solve, laplacian
from partsim.data import InteractionMatrix
from partsim.synthetic import planted_clusters


def test_bdr_disconnected_blocks_zero_penalty():
    A = sla.block_diag(np.ones((3, 3)), np.ones((4, 4)), np.ones((2, 2)))
    np.fill_diagonal(A, 0)
    F, pen = bdr_project(A, 3)
    assert abs(pen) < 1e-12
    np.testing.assert_allclose(F.T @ F, np.eye(3), atol=1e-8)


def test_bdr_uniform_k2():
    A = np.ones((6, 6)) - np.eye(6)
    _, pen = bdr_project(A, 2)
    w = np.linalg.eigvalsh(laplacian(A))
    assert pen == pytest.approx(w[0] + w[1], abs=1e-10)
    assert pen == pytest.approx(6.0, abs=1e-10)


def test_bdr_full_rank_is_trace(rng):
    A = rng.random((7, 7))
    A = A + A.T
    np.fill_diagonal(A, 0)
    _, pen = bdr_project(A, 7)
    assert pen == pytest.approx(np.trace(laplacian(A)), rel=1e-12)


def test_bdr_rejects_negative():
    with pytest.raises(ValueError):
        bdr_project(-np.ones((3, 3)), 1)


def test_config_validation():
    for kw in (dict(k=0), dict(alpha=-1), dict(beta_g=0), dict(beta_l=-1), dict(max_outer_iters=0)):
        with pytest.raises(ValueError):
            BismConfig(**kw)


def test_dense_limit_refused():
    m = InteractionMatrix.from_dense(np.eye(6))
    with pytest.raises(ValueError, match="dense_limit"):
        bism_fit(m, BismConfig(k=2, dense_limit=5))


@pytest.mark.parametrize("seed", range(20))
def test_objective_monotone(seed):
    rng = np.random.default_rng(seed)
    R = (rng.random((20, 15)) < 0.3).astype(float)
    cfg = BismConfig(k=int(rng.integers(1, 5)), alpha=float(rng.uniform(0, 5)),
                     beta_l=float(rng.uniform(0.5, 10)), beta_g=float(rng.uniform(1, 50)),
                     max_outer_iters=15)
    st = bism_solve(InteractionMatrix.from_dense(R), cfg)
    tr = np.asarray(st.objective_trace)
    assert np.all(np.diff(tr) <= 1e-9 * np.abs(tr[:-1]))
    assert st.monotone
    assert (np.diag(st.S_l) == 0).all() and (np.diag(st.S_g) == 0).all()
    assert (st.S_l >= 0).all()
    F = st.aux_indicator
    np.testing.assert_allclose(F.T @ F, np.eye(F.shape[1]), atol=1e-8)


@pytest.mark.parametrize("seed", range(5))
def test_alpha_zero_single_step_is_ridge(seed):
    rng = np.random.default_rng(seed)
    R = (rng.random((20, 15)) < 0.3).astype(float)
    st = bism_solve(InteractionMatrix.from_dense(R),
                    BismConfig(k=2, alpha=0.0, beta_l=2.0, beta_g=10.0, max_outer_iters=1))
    # zero-diagonal ridge closed form, restricted to the non-negative orthant by clamping
    want = np.maximum(ease_closed_form(R.T @ R, 2.0), 0.0)
    np.testing.assert_allclose(st.S_l, want, atol=1e-8)


def test_planted_blocks_cross_mass():
    m, labels = planted_clusters(300, 45, 3, 0.3, 0.05, seed=0)
    st = bism_solve(m, BismConfig(k=3, alpha=100.0, beta_l=10, beta_g=100, max_outer_iters=20))
    S = np.abs(st.S_l)
    cross = S[labels[:, None] != labels[None, :]].sum() / S.sum()
    assert cross < 0.05


def test_fit_model_shape():
    m, _ = planted_clusters(100, 30, 3, 0.3, 0.05, seed=1)
    model = bism_fit(m, BismConfig(k=3, topk=5))
    assert model.rank == 0 and model.name == "bism"
    assert np.diff(model.sparse.indptr).max() <= 5
    assert model.metadata["monotone"]
