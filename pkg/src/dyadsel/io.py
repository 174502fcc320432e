"""Panel CSV files and JSON run configurations.

Panel files are long format, one row per (dyad, member, time)::

    dyad_id,member,time,y,<covariate columns...>

An empty ``y`` cell marks a missing outcome. Covariates may not be missing.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field, replace

import jsonschema
import numpy as np

from .gibbs import AdaptationConfig, SamplerConfig
from .model import HAZARD_FORMS, LAG_TRANSFORMS, DyadPanel, ModelError, ModelSpec, PriorSpec

REQUIRED_COLUMNS = ("dyad_id", "member", "time", "y")


class PanelFileError(ValueError):
    pass


class ConfigError(ValueError):
    pass


def _float(text, what):
    try:
        return float(text)
    except ValueError:
        raise PanelFileError(f"{what}: cannot parse {text!r} as a number") from None


def parse_panel(path):
    """Read a long-format panel file into a validated :class:`DyadPanel`.

    Dropout times come from each member's first missing outcome.
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise PanelFileError(f"{path}: empty file") from None
        if tuple(header[:4]) != REQUIRED_COLUMNS:
            raise PanelFileError(f"{path}: header must start with {','.join(REQUIRED_COLUMNS)}")
        cov_names = tuple(header[4:])
        if len(set(header)) != len(header):
            raise PanelFileError(f"{path}: duplicate column names")
        cells = {}
        order = {}
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise PanelFileError(f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}")
            dyad = row[0].strip()
            where = f"{path}:{lineno} (dyad {dyad!r})"
            try:
                member = int(row[1])
                time = int(row[2])
            except ValueError:
                raise PanelFileError(f"{where}: member and time must be integers") from None
            if member not in (1, 2):
                raise PanelFileError(f"{where}: member must be 1 or 2, got {member}")
            if time < 1:
                raise PanelFileError(f"{where}: time must be >= 1, got {time}")
            key = (dyad, member, time)
            if key in cells:
                raise PanelFileError(f"{where}: duplicate row for member {member}, time {time}")
            y = np.nan if not row[3].strip() else _float(row[3], where)
            covs = []
            for name, text in zip(cov_names, row[4:]):
                if not text.strip():
                    raise PanelFileError(f"{where}: missing covariate {name!r} for member {member}, time {time}")
                covs.append(_float(text, where))
            cells[key] = (y, covs)
            order.setdefault(dyad, len(order))

    if not cells:
        raise PanelFileError(f"{path}: no data rows")
    dyads = sorted(order, key=order.get)
    J = max(t for _, _, t in cells)
    n, p = len(dyads), len(cov_names)
    y = np.full((2, n, J), np.nan)
    cov = np.zeros((2, n, J, p))
    d = np.full((2, n), J + 1, dtype=np.int64)
    for i, dyad in enumerate(dyads):
        for k in (0, 1):
            for t in range(J):
                got = cells.get((dyad, k + 1, t + 1))
                if got is None:
                    raise PanelFileError(f"dyad {dyad!r}, member {k + 1}: no row for time {t + 1}")
                y[k, i, t], cov[k, i, t] = got
            missing = np.isnan(y[k, i])
            if missing[0]:
                raise PanelFileError(f"dyad {dyad!r}, member {k + 1}: baseline outcome is missing")
            if missing.any():
                first = int(np.argmax(missing))
                if not missing[first:].all():
                    raise PanelFileError(
                        f"dyad {dyad!r}, member {k + 1}: outcome observed after a missing wave "
                        "(dropout must be monotone)"
                    )
                d[k, i] = first + 1
    try:
        return DyadPanel(y=y, covariates=cov, dropout=d, covariate_names=cov_names, dyad_ids=tuple(dyads))
    except ModelError as err:
        raise PanelFileError(f"{path}: {err}") from None


def _num(v):
    return "%.17g" % v


def write_panel(panel, path):
    """Write ``panel`` in the long format read by :func:`parse_panel`."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(REQUIRED_COLUMNS + tuple(panel.covariate_names))
        for i, dyad in enumerate(panel.dyad_ids):
            for k in (0, 1):
                for t in range(panel.n_times):
                    v = panel.y[k, i, t]
                    w.writerow(
                        [dyad, k + 1, t + 1, "" if np.isnan(v) else _num(v)]
                        + [_num(c) for c in panel.covariates[k, i, t]]
                    )


# ---------------------------------------------------------------------------
# run configuration

_POS = {"type": "number", "exclusiveMinimum": 0}
_NAMES = {"type": "array", "items": {"type": "string"}}
_ROLES = {
    "type": "object",
    "properties": {"member1": _NAMES, "member2": _NAMES},
    "additionalProperties": False,
}

CONFIG_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "model": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "q": {"type": "integer", "minimum": 1},
                "hazard_form": {"enum": list(HAZARD_FORMS)},
                "lag_transform": {"enum": list(LAG_TRANSFORMS)},
                "phi_fixed": {"type": ["number", "null"]},
                "likelihood": {"enum": ["selection", "ignorable", "available"]},
            },
        },
        "priors": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "a": _POS,
                "b": _POS,
                "phi_prior": {
                    "oneOf": [
                        {"type": "null"},
                        {
                            "type": "object",
                            "additionalProperties": False,
                            "required": ["mean", "variance"],
                            "properties": {"mean": {"type": "number"}, "variance": _POS},
                        },
                    ]
                },
            },
        },
        "sampler": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "n_iter": {"type": "integer", "minimum": 1},
                "burn_in": {"type": "integer", "minimum": 0},
                "thin": {"type": "integer", "minimum": 1},
                "seed": {"type": "integer", "minimum": 0},
                "adaptation": {
                    "type": "object",
                    "additionalProperties": False,
                    "properties": {
                        "target_block": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
                        "target_scalar": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
                        "covariance_interval": {"type": "integer", "minimum": 1},
                        "decay": {"type": "number", "exclusiveMinimum": 0.5, "maximum": 1},
                        "initial_c_scale": _POS,
                        "enabled": {"type": "boolean"},
                    },
                },
            },
        },
        "covariates": _ROLES,
        "dropout_covariates": _ROLES,
    },
}


@dataclass(frozen=True)
class RunConfig:
    spec: ModelSpec = field(default_factory=ModelSpec)
    sampler: SamplerConfig = field(default_factory=SamplerConfig)
    likelihood: str = "selection"

    def with_seed(self, seed):
        return replace(self, sampler=replace(self.sampler, seed=int(seed)))


def _roles(doc):
    doc = doc or {}
    return (tuple(doc.get("member1", ())), tuple(doc.get("member2", ())))


def config_from_dict(doc):
    """Validate a configuration document and build a :class:`RunConfig`."""
    try:
        jsonschema.validate(doc, CONFIG_SCHEMA)
    except jsonschema.ValidationError as err:
        where = "/".join(str(p) for p in err.absolute_path) or "<root>"
        raise ConfigError(f"invalid configuration at {where}: {err.message}") from None
    model = doc.get("model", {})
    priors = doc.get("priors", {})
    sampler = doc.get("sampler", {})
    phi = priors.get("phi_prior")
    try:
        spec = ModelSpec(
            meas_covariates=_roles(doc.get("covariates")),
            dropout_covariates=_roles(doc.get("dropout_covariates")),
            order=model.get("q", 1),
            hazard_form=model.get("hazard_form", "reduced"),
            lag_transform=model.get("lag_transform", "identity"),
            phi_fixed=model.get("phi_fixed"),
        )
        prior = PriorSpec(
            a=priors.get("a", 0.1),
            b=priors.get("b", 0.1),
            phi_prior=None if phi is None else (phi["mean"], phi["variance"]),
        )
        cfg = SamplerConfig(
            n_iter=sampler.get("n_iter", SamplerConfig.n_iter),
            burn_in=sampler.get("burn_in", SamplerConfig.burn_in),
            thin=sampler.get("thin", 1),
            seed=sampler.get("seed", 0),
            prior=prior,
            adaptation=AdaptationConfig(**sampler.get("adaptation", {})),
        )
    except ValueError as err:
        raise ConfigError(f"invalid configuration: {err}") from None
    return RunConfig(spec=spec, sampler=cfg, likelihood=model.get("likelihood", "selection"))


def load_config(path):
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as err:
        raise ConfigError(f"{path}: not valid JSON ({err})") from None
    return config_from_dict(doc)
