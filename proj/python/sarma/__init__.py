"""Stochastic ARMA models: EM fitting with missing data, forecasting, search."""

import json

from . import _core
from ._core import SarmaError, fill_in, sign_test

__all__ = [
    "SarmaError",
    "fill_in",
    "fit",
    "forecast",
    "run_experiment",
    "search",
    "sequential_score",
    "sign_test",
    "simulate",
]


def fit(values, p=0, q=0, beta0="fixed", sigma=0.01, max_iters=200):
    """Fit by EM. ``values`` may contain None for missing entries."""
    return json.loads(_core.fit(list(values), p, q, beta0, sigma, max_iters))


def forecast(history, model, steps=1):
    """Marginal (mean, variance) pairs for the next ``steps`` values."""
    return _core.forecast(list(history), json.dumps(model["structure"]),
                          json.dumps(model["parameters"]), steps)


def sequential_score(series, model, holdout_start):
    return _core.sequential_score(list(series), json.dumps(model["structure"]),
                                  json.dumps(model["parameters"]), holdout_start)


def search(values, max_lag=None, max_iters=200):
    return json.loads(_core.search(list(values), max_lag, max_iters))


def simulate(model, length, seed=0):
    """``model`` is a model document as written by ``sarma fit``."""
    return _core.simulate(json.dumps(model), length, seed)


def run_experiment(spec, base_dir=""):
    return json.loads(_core.run_experiment(json.dumps(spec), str(base_dir)))
