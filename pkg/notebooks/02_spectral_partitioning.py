# %% [markdown]
# Top eigenpairs by Lanczos and recursive Fiedler partitioning of the item graph.

# %%
import numpy as np
import scipy.linalg as sla

from partsim.data import gram_operator, normalize
from partsim.spectral import recursive_partition, top_eigenpairs
from partsim.synthetic import planted_clusters, purity

m, labels = planted_clusters(1000, 300, 3, 0.1, 0.005, seed=0)

# %%
G = gram_operator(normalize(m, 0.5, 0.5))
basis = top_eigenpairs(G, 8, tol=1e-10)
dense = np.sort(sla.eigvalsh(G @ np.eye(m.n_items)))[::-1][:8]
print("lanczos:", np.round(basis.values, 6))
print("max deviation from dense:", np.abs(basis.values - dense).max())

# %%
for tau in (0.1, 0.34, 0.6):
    pa = recursive_partition(m, tau)
    print(f"tau={tau}: K={pa.K} sizes={pa.sizes.tolist()} purity={purity(pa.assignment, labels):.3f}")
