"""Multi-model benchmark producing best / second-best marks with significance stars."""
from __future__ import annotations

import csv
import io
import logging
import time

import numpy as np

from .evaluation import aligned, evaluate, hit_decomposition_holds, paired_significance, recommend_topk
from .registry import fit_model
from .splitter import head_tail_partition

log = logging.getLogger(__name__)

ALPHA = 0.05
BENCH_COLUMNS = ("model", "dataset", "segment", "K", "metric", "value", "p_value_vs_baseline",
                 "mark", "star")


def run_benchmark(bundle, models, dataset: str = "dataset", cutoffs=(10, 20), head_fraction=0.10,
                  baseline: str | None = None, workers: int = 1, fitted: dict | None = None) -> dict:
    """Fit every ``(name, params)`` on train, evaluate on test.

    Returns ``{"rows": [...], "reports": {name: [MetricReport]}, "fit_seconds": {...}, "audits": {...}}``.
    """
    train, test = bundle.train, bundle.test
    segments = head_tail_partition(train, head_fraction) if head_fraction else None
    users = np.flatnonzero(test.user_degrees() > 0)
    reports, fit_seconds, audits = {}, {}, {}
    Kmax = max(cutoffs)
    for name, params in models:
        t0 = time.perf_counter()
        model = (fitted or {}).get(name) or fit_model(name.split("@")[0], train, params, workers)
        fit_seconds[name] = time.perf_counter() - t0
        lists = recommend_topk(model, train, users, Kmax)
        audits[name] = {
            "no_train_items": not any(np.isin(lists.get(u), train.row(u)).any() for u in lists.users),
            "hit_decomposition": hit_decomposition_holds(lists, test, segments, cutoffs) if segments else None,
        }
        reports[name] = evaluate(lists, test, cutoffs, segments)
        log.info("%s: fit %.2fs", name, fit_seconds[name])
    names = [n for n, _ in models]
    baseline = baseline if baseline in reports else None
    rows = []
    for name in names:
        base = {(r.segment, r.K): r for r in reports[baseline]} if baseline and name != baseline else {}
        for rep in reports[name]:
            for metric in ("recall", "ndcg"):
                p = None
                b = base.get((rep.segment, rep.K))
                if b is not None:
                    x, y = aligned(rep, b, metric)
                    p = paired_significance(x, y) if x.size >= 2 else None
                rows.append({"model": name, "dataset": dataset, "segment": rep.segment, "K": rep.K,
                             "metric": metric, "value": rep.aggregate[metric], "p_value_vs_baseline": p,
                             "mark": "", "star": ""})
    mark_best(rows, reports)
    return {"rows": rows, "reports": reports, "fit_seconds": fit_seconds, "audits": audits}


def mark_best(rows, reports):
    """Flag best / second per (segment, K, metric); star when best beats second with p < 0.05."""
    groups = {}
    for row in rows:
        groups.setdefault((row["segment"], row["K"], row["metric"]), []).append(row)
    for (segment, K, metric), grp in groups.items():
        # ties keep listing order
        order = sorted(range(len(grp)), key=lambda i: -grp[i]["value"])
        if not order:
            continue
        best = grp[order[0]]
        best["mark"] = "best"
        if len(order) > 1:
            second = grp[order[1]]
            second["mark"] = "second"
            rb = _find(reports[best["model"]], segment, K)
            rs = _find(reports[second["model"]], segment, K)
            x, y = aligned(rb, rs, metric)
            if x.size >= 2 and paired_significance(x, y) < ALPHA:
                best["star"] = "*"


def _find(reps, segment, K):
    return next(r for r in reps if r.segment == segment and r.K == K)


def bench_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=BENCH_COLUMNS, lineterminator="\n")
    w.writeheader()
    for row in rows:
        row = dict(row)
        row["value"] = f"{row['value']:.6f}"
        p = row["p_value_vs_baseline"]
        row["p_value_vs_baseline"] = "" if p is None else f"{p:.6g}"
        w.writerow(row)
    return buf.getvalue()
