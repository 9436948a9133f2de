# %% [markdown]
# Validation-only hyperparameter search, then a tau sweep evaluated on test.

# %%
from dataclasses import replace

from partsim.fpsr import FpsrConfig
from partsim.hpo import default_space, search, tau_sweep, validation_objective
from partsim.registry import fit_model
from partsim.splitter import SplitConfig, holdout_split
from partsim.synthetic import community_catalog

m, _ = community_catalog(3000, 600, 12, mean_len=8, zipf=1.2, seed=1)
bundle = holdout_split(m, SplitConfig(seed=1))

# %%
# the selection stage sees train and valid only
selection = bundle.restricted("train", "valid")
space = default_space("fpsr+d", budget=8, seed=0)
log = search(space, lambda cfg: fit_model("fpsr+d", selection.train, {**cfg, "d": 32}),
             validation_objective(selection))
best = log.best
print("best config:", best.config, "valid recall@20: %.4f" % best.objective)

# %%
cfg = FpsrConfig(**{**best.config, "d": 32})
for fam in ("fpsr", "fpsr+d"):
    for row in tau_sweep(fam, [0.05, 0.1, 0.3], cfg, bundle):
        print(fam, row["label"], "%.4f" % row["recall@20"], row["K_partitions"])
