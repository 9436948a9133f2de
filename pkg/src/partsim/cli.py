"""Batch driver: stats -> split -> fit -> eval -> bench / sweep / hpo.

Every command writes its outputs plus ``run.manifest.json`` under ``--out``.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import logging
import platform
import sys
import time
from dataclasses import asdict
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .bench import bench_csv, run_benchmark
from .data import ColumnFormat, DataFormatError, EmptyDatasetError, compute_stats, load_interactions
from .evaluation import evaluate, hit_decomposition_holds, recommend_topk, report_rows, rows_to_csv, rows_to_json
from .fpsr import FpsrConfig, model_footprint
from .hpo import default_space, search, tau_sweep, validation_objective
from .modelio import load_model, save_model
from .registry import MODELS, InvalidParamsError, UnknownModelError, fit_model
from .splitter import SPLIT_FILES, SplitConfig, head_tail_partition, holdout_split, load_split, save_split

log = logging.getLogger("partsim")

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME = 0, 2, 3


class UsageError(Exception):
    pass


def _sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


class Run:
    """Collects what a command read and wrote, for the run manifest."""

    def __init__(self, command, args):
        self.command = command
        self.out = Path(args.out)
        self.out.mkdir(parents=True, exist_ok=True)
        self.config = {k: v for k, v in vars(args).items() if k not in ("func", "command")}
        self.files_read = {}
        self.files_written = {}
        self.timings = {}
        self.t0 = time.time()

    def read(self, path):
        path = Path(path)
        if not path.exists():
            raise UsageError(f"file not found: {path}")
        self.files_read[str(path)] = _sha256(path)
        return path

    def read_split(self, split_dir, stages):
        d = Path(split_dir)
        self.read(d / "split.manifest.json")
        for s in stages:
            self.read(d / SPLIT_FILES[s])
        return load_split(d, stages)

    def write(self, name, text):
        p = self.out / name
        p.write_text(text, encoding="utf-8")
        self.files_written[name] = _sha256(p)
        return p

    def finish(self, extra=None):
        manifest = {
            "command": self.command,
            "config": self.config,
            "files_read": self.files_read,
            "files_written": self.files_written,
            "versions": {"partsim": __version__, "python": platform.python_version(),
                         "numpy": np.__version__, "scipy": scipy.__version__},
            **(extra or {}),
        }
        (self.out / "run.manifest.json").write_text(json.dumps(manifest, indent=1, default=str),
                                                     encoding="utf-8")
        # wall-clock numbers live apart so the manifest is identical across reruns
        self.timings["elapsed_seconds"] = round(time.time() - self.t0, 3)
        (self.out / "timings.json").write_text(json.dumps(self.timings, indent=1), encoding="utf-8")


def _fmt(args) -> ColumnFormat:
    sep = {"tab": "\t", "comma": ",", "whitespace": None}.get(args.sep, args.sep)
    return ColumnFormat(sep=sep, user_col=args.user_col, item_col=args.item_col,
                        rating_col=args.rating_col, min_rating=args.min_rating, header=args.header)


def _params(pairs) -> dict:
    out = {}
    for p in pairs or []:
        if "=" not in p:
            raise UsageError(f"--param expects key=value, got {p!r}")
        k, v = p.split("=", 1)
        try:
            out[k] = json.loads(v)
        except json.JSONDecodeError:
            out[k] = v
    return out


def cmd_stats(args):
    run = Run("stats", args)
    m = load_interactions(run.read(args.input), _fmt(args), kcore=args.kcore)
    run.write("stats.json", compute_stats(m).to_json())
    run.finish()


def cmd_split(args):
    run = Run("split", args)
    m = load_interactions(run.read(args.input), _fmt(args), kcore=args.kcore)
    cfg = SplitConfig(seed=args.seed, test_fraction=args.test_fraction, valid_fraction=args.valid_fraction,
                      min_user_interactions=args.min_user_interactions)
    bundle = holdout_split(m, cfg)
    save_split(bundle, run.out)
    for name in list(SPLIT_FILES.values()) + ["split.manifest.json"]:
        run.files_written[name] = _sha256(run.out / name)
    run.finish({"content_digest": bundle.content_digest, "seed": cfg.seed})


def _check_model(name):
    if name.split("@")[0] not in MODELS:
        raise UnknownModelError(f"unknown model {name!r}; registered: {', '.join(sorted(MODELS))}")


def cmd_fit(args):
    _check_model(args.model)
    run = Run("fit", args)
    bundle = run.read_split(args.split, ("train",))
    params = {**args.params_file, **_params(args.param)}
    t0 = time.perf_counter()
    model = fit_model(args.model, bundle.train, params, args.workers)
    fit_s = time.perf_counter() - t0
    digest = save_model(model, run.out / "model.bin")
    run.files_written["model.bin"] = digest
    run.timings["fit_seconds"] = fit_s
    diag = {"model": args.model, "params": params, "model_digest": digest}
    if args.model.startswith("fpsr"):
        diag["footprint"] = model_footprint(model)
        diag["K"] = model.metadata["K"]
    if args.model == "bism":
        diag["objective_trace"] = model.metadata["objective_trace"]
        diag["converged"] = model.metadata["converged"]
    run.write("diagnostics.json", json.dumps(diag, indent=1))
    run.finish({"model_digest": digest, "workers": args.workers})


def cmd_eval(args):
    run = Run("eval", args)
    model = load_model(run.read(args.model_file))
    bundle = run.read_split(args.split, ("train", "test"))
    train, test = bundle.train, bundle.test
    segments = head_tail_partition(train, args.head_fraction) if args.head_fraction else None
    users = np.flatnonzero(test.user_degrees() > 0)
    lists = recommend_topk(model, train, users, max(args.cutoffs))
    reports = evaluate(lists, test, args.cutoffs, segments)
    rows = report_rows(args.name or model.name, args.dataset, reports)
    run.write("report.csv", rows_to_csv(rows))
    run.write("report.json", rows_to_json(rows))
    audit = {"hit_decomposition": hit_decomposition_holds(lists, test, segments, args.cutoffs)} if segments else {}
    run.finish({"audits": audit})


def _load_json(path, run) -> dict:
    try:
        return json.loads(run.read(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise UsageError(f"{path}: invalid JSON ({exc})") from None


def cmd_bench(args):
    if not args.config:
        raise UsageError("bench needs --config listing the models")
    run = Run("bench", args)
    cfg = _load_json(args.config, run)
    models = [(m["name"], m.get("params", {})) for m in cfg.get("models", [])]
    if not models:
        raise UsageError("bench config lists no models")
    for name, _ in models:
        _check_model(name)
    split_dir = args.split or cfg.get("split")
    if not split_dir:
        raise UsageError("bench needs a split directory (--split or 'split' in config)")
    bundle = run.read_split(split_dir, ("train", "test"))
    cutoffs = tuple(cfg.get("cutoffs", args.cutoffs))
    res = run_benchmark(bundle, models, cfg.get("dataset", args.dataset), cutoffs,
                        cfg.get("head_fraction", args.head_fraction), cfg.get("baseline"), args.workers)
    run.write("report.csv", bench_csv(res["rows"]))
    run.write("report.json", json.dumps(res["rows"], indent=1))
    run.timings["fit_seconds"] = res["fit_seconds"]
    run.finish({"audits": res["audits"], "workers": args.workers})


def _fpsr_cfg(params) -> FpsrConfig:
    fields = set(FpsrConfig.__dataclass_fields__)
    unknown = set(params) - fields
    if unknown:
        raise UsageError(f"unknown FPSR parameters: {sorted(unknown)}")
    return FpsrConfig(**params)


def cmd_sweep(args):
    run = Run("sweep", args)
    bundle = run.read_split(args.split, ("train", "test"))
    params = {**args.params_file, **_params(args.param), "tau": args.tau_best}
    rows = tau_sweep(args.family, args.taus, _fpsr_cfg(params), bundle, K=args.k, workers=args.workers)
    cols = ["family", "label", "tau", f"recall@{args.k}", f"ndcg@{args.k}", "K_partitions", "status"]
    lines = [",".join(cols)] + [",".join("" if r[c] is None else str(r[c]) for c in cols) for r in rows]
    run.write("sweep.csv", "\n".join(lines) + "\n")
    run.finish()


def cmd_hpo(args):
    _check_model(args.model)
    run = Run("hpo", args)
    # selection uses validation only; the test split is never opened here
    bundle = run.read_split(args.split, ("train", "valid"))
    space = default_space(args.model, budget=args.budget, seed=args.seed)
    fixed = {**args.params_file, **_params(args.param)}
    tlog = search(space, lambda c: fit_model(args.model, bundle.train, {**fixed, **c}, args.workers),
                  validation_objective(bundle, "recall", 20))
    run.write("trials.jsonl", tlog.to_jsonl())
    best = tlog.best
    run.write("best.json", json.dumps({"model": args.model, "best_index": tlog.best_index,
                                       "config": None if best is None else {**fixed, **best.config},
                                       "objective": None if best is None else best.objective}, indent=1))
    run.finish({"seed": args.seed})


def _add_format(p):
    p.add_argument("input", help="delimited interaction file")
    p.add_argument("--sep", default="whitespace", help="tab | comma | whitespace | literal separator")
    p.add_argument("--user-col", type=int, default=0)
    p.add_argument("--item-col", type=int, default=1)
    p.add_argument("--rating-col", type=int, default=None)
    p.add_argument("--min-rating", type=float, default=None)
    p.add_argument("--header", action="store_true")
    p.add_argument("--kcore", type=int, default=0)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="partsim", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, out_default):
        p.add_argument("--out", default=out_default)
        p.add_argument("--config", help="JSON file of option defaults (bench: the model list); flags win")
        p.add_argument("--workers", type=int, default=1)

    p = sub.add_parser("stats", help="dataset statistics")
    _add_format(p)
    common(p, "out")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("split", help="seeded per-user hold-out split")
    _add_format(p)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--test-fraction", type=float, default=0.15)
    p.add_argument("--valid-fraction", type=float, default=0.15)
    p.add_argument("--min-user-interactions", type=int, default=5)
    common(p, "split")
    p.set_defaults(func=cmd_split)

    p = sub.add_parser("fit", help="fit one model on the training split")
    p.add_argument("--split", default=None)
    p.add_argument("--model", default=None)
    p.add_argument("--param", action="append", metavar="KEY=VALUE")
    common(p, "model")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("eval", help="evaluate a fitted model on the test split")
    p.add_argument("--model-file", default=None)
    p.add_argument("--split", default=None)
    p.add_argument("--cutoffs", type=int, nargs="+", default=[10, 20])
    p.add_argument("--head-fraction", type=float, default=None)
    p.add_argument("--dataset", default="dataset")
    p.add_argument("--name", default=None)
    common(p, "report")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("bench", help="benchmark several models (config lists them)")
    p.add_argument("--split", default=None)
    p.add_argument("--cutoffs", type=int, nargs="+", default=[10, 20])
    p.add_argument("--head-fraction", type=float, default=0.10)
    p.add_argument("--dataset", default="dataset")
    common(p, "bench")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("sweep", help="tau sensitivity sweep for an FPSR family member")
    p.add_argument("--split", default=None)
    p.add_argument("--family", choices=["fpsr", "fpsr+d", "fpsr+f"], default="fpsr")
    p.add_argument("--taus", type=float, nargs="+", default=[0.05, 0.15, 0.25])
    p.add_argument("--tau-best", type=float, default=None)
    p.add_argument("--param", action="append", metavar="KEY=VALUE")
    p.add_argument("--k", type=int, default=20)
    common(p, "sweep")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("hpo", help="validation-only hyperparameter search")
    p.add_argument("--split", default=None)
    p.add_argument("--model", default=None)
    p.add_argument("--budget", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--param", action="append", metavar="KEY=VALUE")
    common(p, "hpo")
    p.set_defaults(func=cmd_hpo)
    return ap


# options that may come from either a flag or the --config file
REQUIRED = {"fit": ("split", "model"), "eval": ("model_file", "split"), "sweep": ("split", "tau_best"),
            "hpo": ("split", "model")}


def _apply_config(ap, argv):
    """Re-parse with config-file values as defaults so explicit flags still win."""
    args = ap.parse_args(argv)
    params_file = {}
    if args.config:
        path = Path(args.config)
        if not path.exists():
            raise UsageError(f"config file not found: {path}")
        try:
            conf = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise UsageError(f"{path}: invalid JSON ({exc})") from None
        params_file = conf.pop("params", {}) if args.command != "bench" else {}
        sub = ap._subparsers._group_actions[0].choices[args.command]
        known = {a.dest for a in sub._actions}
        if args.command != "bench":
            unknown = set(conf) - known
            if unknown:
                raise UsageError(f"unknown config keys for {args.command}: {sorted(unknown)}")
            sub.set_defaults(**conf)
            args = ap.parse_args(argv)
    missing = [k for k in REQUIRED.get(args.command, ()) if getattr(args, k) is None]
    if missing:
        flags = ", ".join("--" + k.replace("_", "-") for k in missing)
        raise UsageError(f"{args.command} needs {flags} (flag or config file)")
    args.params_file = params_file
    return args


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = _apply_config(ap, argv)
    except UsageError as exc:
        print(f"partsim: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except (UsageError, UnknownModelError, InvalidParamsError, FileNotFoundError) as exc:
        msg = exc.args[0] if isinstance(exc, UnknownModelError) else str(exc)
        print(f"partsim: error: {msg}", file=sys.stderr)
        return EXIT_USAGE
    except (DataFormatError, EmptyDatasetError, ValueError, RuntimeError) as exc:
        print(f"partsim: error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
