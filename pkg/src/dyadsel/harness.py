"""Replicated simulation studies: generate, fit with each method, score.

Methods
-------
``complete-case``
    measurement model on dyads where both members finished follow-up;
``available-case``
    measurement model on every observed transition whose lags are observed;
``proposed``
    selection model with the design's own lag transform;
``misspecified``
    selection model with a linear lag in the hazard.

Every replicate draws its data and each method's chain from its own
stream, derived from ``(design.seed, replicate, method)``, so results do
not depend on how replicates are scheduled across workers.
"""

from __future__ import annotations

import csv
import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .gibbs import SamplerConfig, SamplerError, run_chain
from .model import ModelError
from .simulate import MEASUREMENT_COEFS, SimDesign, dropout_summary, generate_dataset

log = logging.getLogger(__name__)

METHODS = ("complete-case", "available-case", "proposed", "misspecified")


def fit_complete_case(panel, config=None, spec=None, seed=None):
    """Fit the measurement model to the dyads with no dropout."""
    done = np.all(panel.dropout == panel.n_times + 1, axis=0)
    if not done.any():
        raise ModelError("no dyad completed follow-up; complete-case analysis is undefined")
    return run_chain(panel.subset(done), config, spec, likelihood="available", seed=seed)


def fit_available_case(panel, config=None, spec=None, seed=None):
    """Fit the measurement model to every fully observed transition."""
    return run_chain(panel, config, spec, likelihood="available", seed=seed)


def fit_selection(panel, config=None, spec=None, seed=None):
    """Fit the joint measurement and dropout model."""
    return run_chain(panel, config, spec, likelihood="selection", seed=seed)


def fit_method(method, panel, design, config=None, seed=None):
    if method == "complete-case":
        return fit_complete_case(panel, config, design.fit_spec(), seed)
    if method == "available-case":
        return fit_available_case(panel, config, design.fit_spec(), seed)
    if method == "proposed":
        return fit_selection(panel, config, design.fit_spec("matched"), seed)
    if method == "misspecified":
        return fit_selection(panel, config, design.fit_spec("identity"), seed)
    raise ValueError(f"unknown method {method!r}; choose from {METHODS}")


def replicate_seeds(seed, r):
    """Data stream and one stream per entry of :data:`METHODS` for replicate ``r``."""
    data = np.random.SeedSequence(seed, spawn_key=(r, 0))
    fits = {m: np.random.SeedSequence(seed, spawn_key=(r, 1 + j)) for j, m in enumerate(METHODS)}
    return data, fits


def run_replicate(design, methods, config, r):
    """Generate replicate ``r`` and fit it with every method.

    Returns ``(dropout_summary, {method: (mean, lo, hi) or error string})``
    with arrays ordered like :data:`MEASUREMENT_COEFS`.
    """
    names = list(MEASUREMENT_COEFS)
    data_seed, fit_seeds = replicate_seeds(design.seed, r)
    data = generate_dataset(design, data_seed)
    results = {}
    for method in methods:
        try:
            chain = fit_method(method, data.panel, design, config, fit_seeds[method])
        except (SamplerError, ModelError) as err:
            log.warning("replicate %d, %s: %s", r, method, err)
            results[method] = str(err)
            continue
        s = chain.summaries()
        results[method] = tuple(np.array([s[n][key] for n in names]) for key in ("mean", "q025", "q975"))
    return dropout_summary(data.panel), results


def _run_one(args):
    return run_replicate(*args)


@dataclass
class MethodResult:
    """Point estimates and interval ends for one method, one row per replicate.

    Failed replicates hold NaN and are listed in ``failures``.
    """

    estimates: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    failures: dict = field(default_factory=dict)

    @property
    def ok(self):
        return ~np.isnan(self.estimates).any(axis=1)


@dataclass
class ReplicateReport:
    design: SimDesign
    parameters: list
    truth: np.ndarray
    methods: dict
    dropout: dict

    @property
    def n_replicates(self):
        return self.design.n_replicates

    def table(self):
        """``{method: {parameter: {truth, bias, se, coverage, n}}}`` over successful replicates."""
        out = {}
        for method, res in self.methods.items():
            ok = res.ok
            est, lo, hi = res.estimates[ok], res.lower[ok], res.upper[ok]
            rows = {}
            for j, name in enumerate(self.parameters):
                t = self.truth[j]
                n = int(ok.sum())
                rows[name] = {
                    "truth": float(t),
                    "bias": float(est[:, j].mean() - t) if n else float("nan"),
                    "se": float(est[:, j].std(ddof=1)) if n > 1 else float("nan"),
                    "coverage": float(np.mean((lo[:, j] <= t) & (t <= hi[:, j]))) if n else float("nan"),
                    "n": n,
                }
            out[method] = rows
        return out

    def failures(self):
        return {m: len(res.failures) for m, res in self.methods.items()}

    def to_dict(self):
        return {
            "variant": self.design.variant,
            "n_dyads": self.design.n_dyads,
            "n_times": self.design.n_times,
            "replicates": self.n_replicates,
            "seed": self.design.seed,
            "methods": self.table(),
            "failures": self.failures(),
            "dropout": {str(t): v for t, v in self.dropout.items()},
        }

    def write_json(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["method", "parameter", "truth", "bias", "se", "coverage", "n"])
            for method, rows in self.table().items():
                for name, v in rows.items():
                    w.writerow([method, name] + [repr(v[c]) for c in ("truth", "bias", "se", "coverage")] + [v["n"]])


def run_replicates(design, methods=("complete-case", "available-case", "proposed"), config=None, workers=1):
    """Run ``design.n_replicates`` replicates and aggregate bias, SE and coverage."""
    methods = tuple(methods)
    unknown = set(methods) - set(METHODS)
    if unknown:
        raise ValueError(f"unknown methods {sorted(unknown)}; choose from {METHODS}")
    R = design.n_replicates
    if R < 2:
        raise ValueError("need at least two replicates")
    config = config or SamplerConfig()
    jobs = [(design, methods, config, r) for r in range(R)]
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            results = list(pool.map(_run_one, jobs))
    else:
        results = [_run_one(j) for j in jobs]

    names = list(MEASUREMENT_COEFS)
    P = len(names)
    per_method = {}
    for method in methods:
        res = MethodResult(*(np.full((R, P), np.nan) for _ in range(3)))
        for r, (_, fits) in enumerate(results):
            got = fits[method]
            if isinstance(got, str):
                res.failures[r] = got
            else:
                res.estimates[r], res.lower[r], res.upper[r] = got
        per_method[method] = res

    waves = results[0][0].keys()
    dropout = {
        t: {key: float(np.mean([res[0][t][key] for res in results])) for key in ("dyad", "member1", "member2")}
        for t in waves
    }
    return ReplicateReport(design, names, np.array([design.truth()[n] for n in names]), per_method, dropout)
