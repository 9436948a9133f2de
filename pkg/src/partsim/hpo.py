"""Seeded hyperparameter search (random warm-up + Parzen-estimator proposals) and tau sweeps."""
from __future__ import annotations

import itertools
import json
import logging
import math
import time
from dataclasses import dataclass, field, replace

import numpy as np

from .evaluation import metrics, recommend_topk
from .fpsr import FpsrConfig, fpsr_fit
from .registry import FAMILY_HUBS

log = logging.getLogger(__name__)

GAMMA = 0.25
N_CANDIDATES = 24
PRIOR_WEIGHT = 1.0


@dataclass(frozen=True)
class Choice:
    values: tuple

    def __init__(self, values):
        if not len(values):
            raise ValueError("Choice needs at least one value")
        object.__setattr__(self, "values", tuple(values))

    def contains(self, x):
        return x in self.values

    @property
    def ordinal(self):
        return all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in self.values)


@dataclass(frozen=True)
class Uniform:
    low: float
    high: float

    def __post_init__(self):
        if not self.low < self.high:
            raise ValueError("empty range")

    def to_unit(self, x):
        return float(x)

    def from_unit(self, z):
        return float(min(max(z, self.low), self.high))

    @property
    def bounds(self):
        return self.low, self.high

    def contains(self, x):
        return self.low <= x <= self.high


@dataclass(frozen=True)
class LogUniform(Uniform):
    def __post_init__(self):
        super().__post_init__()
        if self.low <= 0:
            raise ValueError("LogUniform needs low > 0")

    def to_unit(self, x):
        return math.log(x)

    def from_unit(self, z):
        return float(min(max(math.exp(z), self.low), self.high))

    @property
    def bounds(self):
        return math.log(self.low), math.log(self.high)


@dataclass
class SearchSpace:
    params: dict
    budget: int = 20
    seed: int = 0
    objective: str = "recall@20"

    def __post_init__(self):
        if self.budget < 1:
            raise ValueError("budget must be >= 1")
        if not self.params:
            raise ValueError("search space has no parameters")

    def contains(self, config: dict) -> bool:
        return set(config) == set(self.params) and all(d.contains(config[k]) for k, d in self.params.items())

    def size(self) -> float:
        if all(isinstance(d, Choice) for d in self.params.values()):
            return math.prod(len(d.values) for d in self.params.values())
        return math.inf


@dataclass
class Trial:
    config: dict
    objective: float
    wall_time: float
    status: str = "ok"
    error: str | None = None

    def to_json(self) -> str:
        obj = self.objective if math.isfinite(self.objective) else None
        return json.dumps({"config": self.config, "objective": obj, "wall_time": self.wall_time,
                           "status": self.status, "error": self.error}, sort_keys=True)


@dataclass
class TrialLog:
    trials: list = field(default_factory=list)

    @property
    def best_index(self) -> int | None:
        best, idx = -math.inf, None
        for i, t in enumerate(self.trials):
            if t.status == "ok" and t.objective > best:
                best, idx = t.objective, i
        return idx

    @property
    def best(self) -> Trial | None:
        i = self.best_index
        return None if i is None else self.trials[i]

    def to_jsonl(self) -> str:
        return "".join(t.to_json() + "\n" for t in self.trials)


def _sample_prior(dom, rng):
    if isinstance(dom, Choice):
        return dom.values[rng.integers(len(dom.values))]
    lo, hi = dom.bounds
    return dom.from_unit(rng.uniform(lo, hi))


class _Parzen:
    """1-D Parzen density over one parameter, mixed with a uniform prior."""

    def __init__(self, dom, observed):
        self.dom = dom
        if isinstance(dom, Choice):
            n = len(dom.values)
            w = np.full(n, PRIOR_WEIGHT / n)
            idx = [dom.values.index(x) for x in observed]
            grid = np.arange(n)
            for o in idx:
                k = np.exp(-0.5 * (grid - o) ** 2) if dom.ordinal else (grid == o).astype(float)
                w += k / k.sum()
            self.p = w / w.sum()
        else:
            lo, hi = dom.bounds
            self.lo, self.hi = lo, hi
            self.mu = np.array([dom.to_unit(x) for x in observed], dtype=float)
            n = self.mu.size
            # bandwidth shrinks with sample size (Scott-like), floored to stay exploratory
            self.sigma = (hi - lo) * max(0.05, (n + 1) ** -0.2) / 2 if n else hi - lo
            self.w_prior = PRIOR_WEIGHT / (n + PRIOR_WEIGHT)

    def sample(self, rng):
        if isinstance(self.dom, Choice):
            return self.dom.values[rng.choice(len(self.p), p=self.p)]
        if self.mu.size == 0 or rng.random() < self.w_prior:
            return self.dom.from_unit(rng.uniform(self.lo, self.hi))
        c = self.mu[rng.integers(self.mu.size)]
        for _ in range(20):
            z = rng.normal(c, self.sigma)
            if self.lo <= z <= self.hi:
                return self.dom.from_unit(z)
        return self.dom.from_unit(c)

    def logpdf(self, x):
        if isinstance(self.dom, Choice):
            return math.log(self.p[self.dom.values.index(x)])
        z = self.dom.to_unit(x)
        dens = self.w_prior / (self.hi - self.lo)
        if self.mu.size:
            g = np.exp(-0.5 * ((z - self.mu) / self.sigma) ** 2) / (self.sigma * math.sqrt(2 * math.pi))
            dens += (1 - self.w_prior) * g.mean()
        return math.log(dens)


def _key(config):
    return json.dumps(config, sort_keys=True)


def _propose(space: SearchSpace, trials, rng):
    done = sorted(range(len(trials)), key=lambda i: (-trials[i].objective, i))
    n_good = max(1, math.ceil(GAMMA * len(done)))
    good = [trials[i].config for i in done[:n_good]]
    bad = [trials[i].config for i in done[n_good:]]
    l = {k: _Parzen(d, [c[k] for c in good]) for k, d in space.params.items()}
    g = {k: _Parzen(d, [c[k] for c in bad]) for k, d in space.params.items()}
    seen = {_key(t.config) for t in trials}
    cands = []
    for _ in range(N_CANDIDATES):
        c = {k: l[k].sample(rng) for k in space.params}
        score = sum(l[k].logpdf(c[k]) - g[k].logpdf(c[k]) for k in space.params)
        cands.append((score, c))
    cands.sort(key=lambda sc: -sc[0])
    for _, c in cands:
        if _key(c) not in seen:
            return c
    if len(seen) < space.size():
        # finite space not exhausted: pick an untried configuration at random
        names = list(space.params)
        untried = [dict(zip(names, combo))
                   for combo in itertools.product(*(space.params[k].values for k in names))
                   if _key(dict(zip(names, combo))) not in seen]
        return untried[rng.integers(len(untried))]
    return cands[0][1]


def search(space: SearchSpace, fit_fn, eval_fn) -> TrialLog:
    """Maximize ``eval_fn(fit_fn(config))`` over ``space``; failures are logged with -inf."""
    rng = np.random.default_rng(space.seed)
    n_startup = math.ceil(space.budget / 4)
    tlog = TrialLog()
    for i in range(space.budget):
        if i < n_startup:
            config = {k: _sample_prior(d, rng) for k, d in space.params.items()}
        else:
            config = _propose(space, tlog.trials, rng)
        config = {k: (v.item() if isinstance(v, np.generic) else v) for k, v in config.items()}
        t0 = time.perf_counter()
        try:
            value = float(eval_fn(fit_fn(config)))
            if math.isnan(value):
                raise ValueError("objective is NaN")
            trial = Trial(config, value, time.perf_counter() - t0)
        except Exception as exc:  # failed fits are recorded, the search goes on
            log.warning("trial %d failed: %s", i, exc)
            trial = Trial(config, -math.inf, time.perf_counter() - t0, "failed", repr(exc))
        tlog.trials.append(trial)
    return tlog


def default_space(model: str, budget: int = 20, seed: int = 0) -> SearchSpace:
    grid = tuple(round(0.1 * i, 1) for i in range(1, 6))
    spaces = {
        "itemknn": {"k": Choice((20, 50, 100, 200)), "shrink": Uniform(0.0, 100.0)},
        "rp3beta": {"k": Choice((20, 50, 100, 200)), "beta": Uniform(0.0, 1.0)},
        "ease": {"l2": LogUniform(1.0, 1e4)},
        "gfcf": {"d": Choice((16, 32, 64, 128)), "linear_weight": Uniform(0.0, 1.0)},
        "bism": {"alpha": LogUniform(1e-2, 1e2), "beta_l": LogUniform(1.0, 1e3),
                 "beta_g": LogUniform(1.0, 1e3), "k": Choice((5, 10, 20))},
        "fpsr": {"lam": Choice(grid), "tau": Choice(grid), "local_l2": LogUniform(1.0, 1e3),
                 "d": Choice((16, 32, 64))},
    }
    spaces["fpsr+d"] = {**spaces["fpsr"], "rho": Choice((0.05,))}
    spaces["fpsr+f"] = {**spaces["fpsr"], "rho": Choice((0.01, 0.05, 0.1))}
    if model not in spaces:
        raise KeyError(f"no default search space for {model!r}")
    return SearchSpace(spaces[model], budget=budget, seed=seed)


def validation_objective(bundle, metric: str = "recall", K: int = 20):
    """eval_fn scoring a model on the validation split only."""
    train, valid = bundle.train, bundle.valid
    users = np.flatnonzero(valid.user_degrees() > 0)

    def eval_fn(model):
        lists = recommend_topk(model, train, users, K)
        return metrics(lists, valid, K).aggregate[metric]
    return eval_fn


def tau_sweep(family: str, taus, cfg: FpsrConfig, bundle, K: int = 20, workers: int = 1) -> list:
    """One fit + test evaluation per tau, plus a final row at ``cfg.tau`` (tau_best)."""
    if family not in FAMILY_HUBS:
        raise ValueError(f"family must be one of {sorted(FAMILY_HUBS)}")
    if any(not 0 < t <= 1 for t in taus):
        raise ValueError("every tau must lie in (0, 1]")
    base = replace(cfg, hub_strategy=FAMILY_HUBS[family])
    train, test = bundle.train, bundle.test
    users = np.flatnonzero(test.user_degrees() > 0)
    rows = []
    for label, tau in [(f"tau={t:g}", t) for t in taus] + [("tau_best", cfg.tau)]:
        row = {"family": family, "label": label, "tau": tau}
        try:
            model = fpsr_fit(train, replace(base, tau=tau), workers=workers)
            rep = metrics(recommend_topk(model, train, users, K), test, K)
            row.update({f"recall@{K}": rep.aggregate["recall"], f"ndcg@{K}": rep.aggregate["ndcg"],
                        "K_partitions": model.metadata["K"], "status": "ok"})
        except Exception as exc:
            log.warning("sweep row %s failed: %s", label, exc)
            row.update({f"recall@{K}": math.nan, f"ndcg@{K}": math.nan, "K_partitions": None,
                        "status": f"failed: {exc}"})
        rows.append(row)
    return rows
