# %% [markdown]
# Loading interactions, dataset statistics and a seeded hold-out split.

# %%
from pathlib import Path
import tempfile

import numpy as np

from partsim.data import compute_stats, gini, write_interactions, load_interactions, ColumnFormat
from partsim.splitter import SplitConfig, head_tail_partition, holdout_split, load_split, save_split
from partsim.synthetic import community_catalog

work = Path(tempfile.mkdtemp())
m, labels = community_catalog(2000, 400, 8, mean_len=12, seed=0)
write_interactions(m, work / "data.tsv")
m = load_interactions(work / "data.tsv", ColumnFormat(sep="\t"))
print(compute_stats(m).to_json())

# %%
# Gini is 0 for uniform counts and (n-1)/n when one owner holds everything
print(gini([3, 3, 3, 3]), gini([0, 0, 0, 9]))

# %%
bundle = holdout_split(m, SplitConfig(seed=42))
print("train/valid/test nnz:", bundle.train.nnz, bundle.valid.nnz, bundle.test.nnz)
print("digest:", bundle.content_digest[:16])
print("same seed, same digest:", holdout_split(m, SplitConfig(seed=42)).content_digest == bundle.content_digest)

# %%
save_split(bundle, work / "split")
selection = load_split(work / "split", stages=("train", "valid"))
try:
    selection.test
except Exception as exc:
    print(type(exc).__name__, exc)

# %%
seg = head_tail_partition(bundle.train, 0.10)
print("head items:", seg.head.size, "tail items:", seg.tail.size)
