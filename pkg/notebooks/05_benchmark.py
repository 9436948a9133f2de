# %% [markdown]
# A small benchmark: best / second marks, significance stars and the head/tail breakdown.

# %%
from partsim.bench import bench_csv, run_benchmark
from partsim.splitter import SplitConfig, holdout_split
from partsim.synthetic import community_catalog

m, _ = community_catalog(3000, 600, 12, mean_len=8, zipf=1.2, seed=0)
bundle = holdout_split(m, SplitConfig(seed=0))
models = [("mostpop", {}), ("itemknn", {"k": 100}), ("ease", {"l2": 50.0}),
          ("fpsr", {"tau": 0.2, "lam": 0.1}), ("fpsr+d", {"tau": 0.2, "lam": 0.1})]
res = run_benchmark(bundle, models, dataset="community", baseline="itemknn")

# %%
for row in res["rows"]:
    if row["K"] == 20 and row["metric"] == "recall":
        print(f"{row['model']:8s} {row['segment']:8s} {row['value']:.4f} {row['mark']}{row['star']}")
print(res["audits"])

# %%
print(bench_csv(res["rows"]).splitlines()[0])
