# %% [markdown]
# BISM on planted 3-block data: objective trace and cross-block mass of the local term.

# %%
import numpy as np

from partsim.bism import BismConfig, bism_solve
from partsim.synthetic import planted_clusters

m, labels = planted_clusters(300, 45, 3, 0.3, 0.05, seed=0)
off = labels[:, None] != labels[None, :]

# %%
for alpha in (0.0, 10.0, 100.0):
    st = bism_solve(m, BismConfig(k=3, alpha=alpha, beta_l=10, beta_g=100, max_outer_iters=20))
    A = np.abs(st.S_l)
    print(f"alpha={alpha:6.1f} iters={len(st.objective_trace) - 1:2d} monotone={st.monotone} "
          f"cross-block mass={A[off].sum() / max(A.sum(), 1e-300):.3f}")
