# %% [markdown]
# FPSR with no hubs, degree hubs and Fiedler-boundary hubs: structure and footprint.

# %%
import numpy as np

from partsim.fpsr import FpsrConfig, fpsr_fit, model_footprint
from partsim.synthetic import intra_mass, planted_clusters

m, labels = planted_clusters(1000, 300, 3, 0.1, 0.005, seed=0)

# %%
for hubs in ("none", "degree", "fiedler"):
    model = fpsr_fit(m, FpsrConfig(tau=0.34, lam=0.0, hub_strategy=hubs, rho=0.05))
    S = model.sparse.tocoo()
    a = np.asarray(model.metadata["assignment"])
    cross = int((a[S.row] != a[S.col]).sum())
    print(f"{hubs:8s} hubs={len(model.metadata['hubs']):3d} cross-partition nnz={cross:5d} "
          f"intra mass={intra_mass(model.sparse, labels):.3f} footprint={model_footprint(model)}")

# %%
# the global factor adds a rank-d term with weights lambda_j / lambda_1
model = fpsr_fit(m, FpsrConfig(tau=0.34, lam=0.3, d=16))
print("global weights:", np.round(model.global_weights[:5], 3))
