"""Name -> fit function table used by the benchmark driver and the CLI."""
from __future__ import annotations

import dataclasses
import inspect

from .baselines import ease_fit, gfcf_fit, itemknn_fit, popularity_scores, random_scores, rp3beta_fit
from .bism import BismConfig, bism_fit
from .data import InteractionMatrix
from .fpsr import FpsrConfig, fpsr_fit

FAMILY_HUBS = {"fpsr": "none", "fpsr+d": "degree", "fpsr+f": "fiedler"}


def _fpsr(hubs):
    def fit(train, params, workers=1):
        fields = {f.name for f in dataclasses.fields(FpsrConfig)}
        _check_params(params, fields - {"hub_strategy"}, "fpsr")
        cfg = FpsrConfig(**params, hub_strategy=hubs)
        return fpsr_fit(train, cfg, workers=workers)
    return fit


MODELS = {
    "random": lambda train, p, workers=1: random_scores(p.get("seed", 0), train.n_items),
    "mostpop": lambda train, p, workers=1: popularity_scores(train),
    "itemknn": lambda train, p, workers=1: itemknn_fit(train, **p),
    "rp3beta": lambda train, p, workers=1: rp3beta_fit(train, **p),
    "ease": lambda train, p, workers=1: ease_fit(train, **p),
    "gfcf": lambda train, p, workers=1: gfcf_fit(train, **p),
    "bism": lambda train, p, workers=1: bism_fit(train, BismConfig(**p)),
    **{name: _fpsr(h) for name, h in FAMILY_HUBS.items()},
}


class UnknownModelError(KeyError):
    pass


class InvalidParamsError(ValueError):
    """Hyperparameter names that the chosen model does not accept."""


def _check_params(params, allowed, name):
    unknown = sorted(set(params) - set(allowed))
    if unknown:
        raise InvalidParamsError(f"{name} does not accept {unknown}; allowed: {sorted(allowed)}")


_ACCEPTS = {
    "random": {"seed"},
    "mostpop": set(),
    "itemknn": set(inspect.signature(itemknn_fit).parameters) - {"train"},
    "rp3beta": set(inspect.signature(rp3beta_fit).parameters) - {"train"},
    "ease": set(inspect.signature(ease_fit).parameters) - {"train"},
    "gfcf": set(inspect.signature(gfcf_fit).parameters) - {"train"},
    "bism": {f.name for f in dataclasses.fields(BismConfig)},
}


def fit_model(name: str, train: InteractionMatrix, params: dict | None = None, workers: int = 1):
    try:
        fn = MODELS[name]
    except KeyError:
        raise UnknownModelError(f"unknown model {name!r}; registered: {', '.join(sorted(MODELS))}") from None
    params = dict(params or {})
    if name in _ACCEPTS:
        _check_params(params, _ACCEPTS[name], name)
    return fn(train, params, workers)
