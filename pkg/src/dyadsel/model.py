"""Measurement and dropout model for longitudinal dyadic panels.

Conventions used throughout the package:

* members are indexed ``k = 0, 1`` internally (member 1 and member 2 in the
  public naming); the partner of ``k`` is ``1 - k``;
* times are 1-based in every public signature (``j = 1..J``) and 0-based
  when indexing arrays;
* ``dropout[k, i]`` is the 1-based time of the first missing outcome, with
  ``J + 1`` meaning the member completed follow-up.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
from scipy.special import expit

LOG_2PI = float(np.log(2.0 * np.pi))
LINPRED_CLIP = 700.0

HAZARD_FORMS = ("reduced", "full", "current")
LAG_TRANSFORMS = ("identity", "square")


class ModelError(ValueError):
    """Invalid model input (domain violations, incomplete augmentation)."""


class AugmentationIncomplete(ModelError):
    pass


def _readonly(a):
    a = np.array(a, dtype=float, copy=True)
    a.flags.writeable = False
    return a


@dataclass(frozen=True, eq=False)
class DyadPanel:
    """Observed outcomes and covariates for ``n`` dyads over ``J`` waves.

    ``y`` has shape ``(2, n, J)`` with NaN for unobserved outcomes,
    ``covariates`` has shape ``(2, n, J, p)`` (each member's own row values)
    and ``dropout`` has shape ``(2, n)``.
    """

    y: np.ndarray
    covariates: np.ndarray
    dropout: np.ndarray
    covariate_names: tuple = ()
    dyad_ids: tuple = ()
    order: int = 1

    def __post_init__(self):
        y = _readonly(self.y)
        if y.ndim != 3 or y.shape[0] != 2:
            raise ModelError(f"outcomes must have shape (2, n, J), got {y.shape}")
        _, n, J = y.shape
        cov = np.asarray(self.covariates, dtype=float)
        if cov.size == 0:
            cov = np.zeros((2, n, J, 0))
        if cov.ndim != 4 or cov.shape[:3] != (2, n, J):
            raise ModelError(f"covariates must have shape (2, {n}, {J}, p), got {cov.shape}")
        if not np.all(np.isfinite(cov)):
            raise ModelError("covariates must be fully observed")
        cov = _readonly(cov)
        d = np.array(self.dropout, dtype=np.int64, copy=True)
        if d.shape != (2, n):
            raise ModelError(f"dropout times must have shape (2, {n}), got {d.shape}")
        if np.any(d < 2) or np.any(d > J + 1):
            raise ModelError("dropout times must lie in 2..J+1 (at least one observation per member)")
        t = np.arange(1, J + 1)
        observed = t[None, None, :] < d[:, :, None]
        if np.any(np.isnan(y) & observed):
            k, i, j = np.argwhere(np.isnan(y) & observed)[0]
            raise ModelError(f"outcome missing before dropout for dyad {i}, member {k + 1}, time {j + 1}")
        if np.any(~np.isnan(y) & ~observed):
            k, i, j = np.argwhere(~np.isnan(y) & ~observed)[0]
            raise ModelError(f"outcome present after dropout for dyad {i}, member {k + 1}, time {j + 1}")
        if self.order < 1 or self.order >= J:
            raise ModelError(f"transition order must be in 1..J-1, got {self.order}")
        d.flags.writeable = False
        names = tuple(self.covariate_names) or tuple(f"x{m}" for m in range(cov.shape[3]))
        if len(names) != cov.shape[3]:
            raise ModelError("covariate_names length does not match covariate array")
        ids = tuple(str(s) for s in self.dyad_ids) or tuple(str(i + 1) for i in range(n))
        if len(ids) != n:
            raise ModelError("dyad_ids length does not match number of dyads")
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "covariates", cov)
        object.__setattr__(self, "dropout", d)
        object.__setattr__(self, "covariate_names", names)
        object.__setattr__(self, "dyad_ids", ids)

    @classmethod
    def from_complete(cls, y_full, covariates, dropout, **kw):
        """Mask a fully simulated outcome array according to dropout times."""
        y_full = np.asarray(y_full, dtype=float)
        J = y_full.shape[2]
        d = np.asarray(dropout)
        t = np.arange(1, J + 1)
        y = np.where(t[None, None, :] < d[:, :, None], y_full, np.nan)
        return cls(y=y, covariates=covariates, dropout=d, **kw)

    @property
    def n_dyads(self):
        return self.y.shape[1]

    @property
    def n_times(self):
        return self.y.shape[2]

    @property
    def last_time(self):
        """Per dyad, the last modelled wave ``min(max(d_1i, d_2i), J)``."""
        return np.minimum(self.dropout.max(axis=0), self.n_times)

    def covariate_index(self, names):
        missing = [c for c in names if c not in self.covariate_names]
        if missing:
            raise ModelError(f"unknown covariate column(s): {missing}")
        return [self.covariate_names.index(c) for c in names]

    def subset(self, mask):
        mask = np.asarray(mask, dtype=bool)
        return DyadPanel(
            y=self.y[:, mask],
            covariates=self.covariates[:, mask],
            dropout=self.dropout[:, mask],
            covariate_names=self.covariate_names,
            dyad_ids=tuple(np.asarray(self.dyad_ids, dtype=object)[mask]),
            order=self.order,
        )


@dataclass(frozen=True)
class ModelSpec:
    """Which covariates enter each sub-model, and the hazard's functional form.

    ``meas_covariates[k]`` are member ``k``'s own columns in the transition
    model; the partner block of member ``k`` reuses ``meas_covariates[1-k]``.
    ``hazard_form`` is ``"reduced"`` (lag-1 outcome), ``"full"`` (every
    earlier outcome, zero padded) or ``"current"`` (no history term).
    ``phi_fixed`` pins the current-outcome coefficient (``0.0`` gives MAR).
    """

    meas_covariates: tuple = ((), ())
    dropout_covariates: tuple = ((), ())
    order: int = 1
    hazard_form: str = "reduced"
    lag_transform: str = "identity"
    phi_fixed: float | None = None

    def __post_init__(self):
        if self.hazard_form not in HAZARD_FORMS:
            raise ModelError(f"hazard_form must be one of {HAZARD_FORMS}")
        if self.lag_transform not in LAG_TRANSFORMS:
            raise ModelError(f"lag_transform must be one of {LAG_TRANSFORMS}")
        if self.order < 1:
            raise ModelError("order must be >= 1")
        object.__setattr__(self, "meas_covariates", tuple(tuple(c) for c in self.meas_covariates))
        object.__setattr__(self, "dropout_covariates", tuple(tuple(c) for c in self.dropout_covariates))

    def n_lag_terms(self, n_times):
        return {"reduced": 1, "full": n_times - 1, "current": 0}[self.hazard_form]


@dataclass
class MeasurementParams:
    alpha: np.ndarray
    beta: np.ndarray
    gamma: np.ndarray
    beta_x: tuple
    gamma_x: tuple
    sigma2: np.ndarray
    tau_b2: float

    def __post_init__(self):
        self.alpha = np.asarray(self.alpha, dtype=float).reshape(2)
        self.beta = np.asarray(self.beta, dtype=float).reshape(2, -1)
        self.gamma = np.asarray(self.gamma, dtype=float).reshape(2, -1)
        self.beta_x = tuple(np.atleast_1d(np.asarray(v, dtype=float)) for v in self.beta_x)
        self.gamma_x = tuple(np.atleast_1d(np.asarray(v, dtype=float)) for v in self.gamma_x)
        self.sigma2 = np.asarray(self.sigma2, dtype=float).reshape(2)
        self.tau_b2 = float(self.tau_b2)
        if self.beta.shape != self.gamma.shape:
            raise ModelError("own and partner lag coefficient blocks must have the same order")

    @property
    def order(self):
        return self.beta.shape[1]

    @classmethod
    def zeros(cls, p, order=1):
        """All coefficients 0 and unit variances; ``p = (p_1, p_2)``."""
        return cls(
            alpha=np.zeros(2),
            beta=np.zeros((2, order)),
            gamma=np.zeros((2, order)),
            beta_x=(np.zeros(p[0]), np.zeros(p[1])),
            gamma_x=(np.zeros(p[1]), np.zeros(p[0])),
            sigma2=np.ones(2),
            tau_b2=1.0,
        )

    def eta(self, k):
        """Member ``k``'s coefficients in design-column order."""
        return np.concatenate(
            [[self.alpha[k]], self.beta[k], self.gamma[k], self.beta_x[k], self.gamma_x[k]]
        )

    def set_eta(self, k, eta):
        q = self.order
        px = self.beta_x[k].size
        eta = np.asarray(eta, dtype=float)
        self.alpha[k] = eta[0]
        self.beta[k] = eta[1 : 1 + q]
        self.gamma[k] = eta[1 + q : 1 + 2 * q]
        bx = list(self.beta_x)
        gx = list(self.gamma_x)
        bx[k] = eta[1 + 2 * q : 1 + 2 * q + px].copy()
        gx[k] = eta[1 + 2 * q + px :].copy()
        self.beta_x = tuple(bx)
        self.gamma_x = tuple(gx)

    def copy(self):
        return MeasurementParams(
            self.alpha.copy(), self.beta.copy(), self.gamma.copy(),
            tuple(v.copy() for v in self.beta_x), tuple(v.copy() for v in self.gamma_x),
            self.sigma2.copy(), self.tau_b2,
        )


@dataclass
class DropoutParams:
    xi: np.ndarray
    psi: tuple
    delta: np.ndarray
    phi: np.ndarray
    tau_c2: float
    lag_transform: str = "identity"

    def __post_init__(self):
        self.xi = np.asarray(self.xi, dtype=float).reshape(2)
        self.psi = tuple(np.atleast_1d(np.asarray(v, dtype=float)) for v in self.psi)
        self.delta = np.asarray(self.delta, dtype=float).reshape(2, -1)
        self.phi = np.asarray(self.phi, dtype=float).reshape(2)
        self.tau_c2 = float(self.tau_c2)
        if self.lag_transform not in LAG_TRANSFORMS:
            raise ModelError(f"lag_transform must be one of {LAG_TRANSFORMS}")

    @classmethod
    def zeros(cls, r=(0, 0), n_lags=1, lag_transform="identity"):
        return cls(
            xi=np.zeros(2), psi=(np.zeros(r[0]), np.zeros(r[1])),
            delta=np.zeros((2, n_lags)), phi=np.zeros(2), tau_c2=1.0,
            lag_transform=lag_transform,
        )

    def theta(self, k):
        """Member ``k``'s hazard coefficients ``(xi, psi..., delta..., phi)``."""
        return np.concatenate([[self.xi[k]], self.psi[k], self.delta[k], [self.phi[k]]])

    def set_theta(self, k, theta):
        theta = np.asarray(theta, dtype=float)
        r = self.psi[k].size
        self.xi[k] = theta[0]
        psi = list(self.psi)
        psi[k] = theta[1 : 1 + r].copy()
        self.psi = tuple(psi)
        self.delta[k] = theta[1 + r : -1]
        self.phi[k] = theta[-1]

    def copy(self):
        return replace(
            self, xi=self.xi.copy(), psi=tuple(v.copy() for v in self.psi),
            delta=self.delta.copy(), phi=self.phi.copy(),
        )


@dataclass
class RandomEffects:
    b: np.ndarray
    c: np.ndarray

    def __post_init__(self):
        self.b = np.asarray(self.b, dtype=float).reshape(-1)
        self.c = np.asarray(self.c, dtype=float).reshape(-1)
        if self.b.shape != self.c.shape:
            raise ModelError("b and c must both have one entry per dyad")

    @classmethod
    def zeros(cls, n):
        return cls(np.zeros(n), np.zeros(n))


@dataclass(frozen=True)
class PriorSpec:
    """Inverse-gamma hyperparameters plus optional informative normal priors.

    Regression and hazard coefficients are flat unless ``phi_prior`` or the
    diagonal ``eta_prior`` / ``theta_prior`` entries (``(means, variances)``
    per member) are given; the latter exist for the joint-distribution test,
    which needs a proper prior everywhere.
    """

    a: float = 0.1
    b: float = 0.1
    phi_prior: tuple | None = None
    eta_prior: tuple | None = None
    theta_prior: tuple | None = None

    def __post_init__(self):
        if not (self.a > 0 and self.b > 0):
            raise ModelError("inverse-gamma shape and scale must be positive")
        if self.phi_prior is not None:
            mean, var = self.phi_prior
            if not var > 0:
                raise ModelError("phi prior variance must be positive")
            object.__setattr__(self, "phi_prior", (float(mean), float(var)))
        for name in ("eta_prior", "theta_prior"):
            val = getattr(self, name)
            if val is not None:
                val = tuple(
                    (np.asarray(m, dtype=float), np.asarray(v, dtype=float)) for m, v in val
                )
                if any(np.any(v <= 0) for _, v in val):
                    raise ModelError(f"{name} variances must be positive")
                object.__setattr__(self, name, val)

    @property
    def is_proper(self):
        return self.eta_prior is not None and self.theta_prior is not None


# ---------------------------------------------------------------------------
# measurement model


def _design_blocks(panel, spec):
    idx = [panel.covariate_index(spec.meas_covariates[k]) for k in (0, 1)]
    return [panel.covariates[k][:, :, idx[k]] for k in (0, 1)]


def transition_mean(panel, params, k, i, j, b_i, y=None, spec=None):
    """Conditional mean of member ``k``'s outcome at 1-based time ``j``.

    ``y`` defaults to the panel's observed outcomes; pass an augmented
    array to evaluate past dropout. Lags that are still missing raise
    :class:`AugmentationIncomplete` instead of being treated as zero.
    """
    spec = spec or ModelSpec()
    y = panel.y if y is None else np.asarray(y, dtype=float)
    q = params.order
    if j < q + 1 or j > panel.n_times:
        raise ModelError(f"transition mean needs {q + 1} <= j <= J, got j={j}")
    own = y[k, i, j - 1 - q : j - 1][::-1]
    partner = y[1 - k, i, j - 1 - q : j - 1][::-1]
    if np.isnan(own).any() or np.isnan(partner).any():
        raise AugmentationIncomplete(
            f"augmentation incomplete: lag outcome missing for dyad {i}, member {k + 1}, time {j}"
        )
    X = _design_blocks(panel, spec)
    return float(
        b_i
        + params.alpha[k]
        + own @ params.beta[k]
        + partner @ params.gamma[k]
        + X[k][i, j - 1] @ params.beta_x[k]
        + X[1 - k][i, j - 1] @ params.gamma_x[k]
    )


def measurement_rows(panel):
    """Boolean ``(n, J)`` mask of transitions entering the likelihood.

    Both members contribute at times ``q+1 .. min(d_i, J)`` where ``d_i`` is
    the later of the two dropout times; baseline waves are exogenous.
    """
    J = panel.n_times
    t = np.arange(1, J + 1)
    return (t[None, :] > panel.order) & (t[None, :] <= panel.last_time[:, None])


def transition_means(panel, params, b, y, spec):
    """Vectorised transition means, shape ``(2, n, J)``; NaN for waves <= q."""
    q = params.order
    X = _design_blocks(panel, spec)
    n, J = panel.n_dyads, panel.n_times
    mu = np.full((2, n, J), np.nan)
    for k in (0, 1):
        m = params.alpha[k] + b[:, None] + X[k] @ params.beta_x[k] + X[1 - k] @ params.gamma_x[k]
        m = m[:, q:].copy()
        for lag in range(1, q + 1):
            m += params.beta[k, lag - 1] * y[k][:, q - lag : J - lag]
            m += params.gamma[k, lag - 1] * y[1 - k][:, q - lag : J - lag]
        mu[k, :, q:] = m
    return mu


def measurement_loglik(panel, params, effects, y=None, spec=None):
    """Gaussian transition log likelihood summed over modelled rows."""
    spec = spec or ModelSpec()
    if np.any(params.sigma2 <= 0):
        raise ModelError("residual variances must be positive")
    y = panel.y if y is None else np.asarray(y, dtype=float)
    rows = measurement_rows(panel)
    if rows.size == 0:
        return 0.0
    need = rows.copy()
    need[:, : panel.order] |= rows.any(axis=1)[:, None]
    for k in (0, 1):
        if np.isnan(y[k][need]).any():
            raise AugmentationIncomplete("augmentation incomplete: modelled outcome is missing")
    mu = transition_means(panel, params, effects.b, np.nan_to_num(y), spec)
    total = 0.0
    for k in (0, 1):
        r = (y[k] - mu[k])[rows]
        s2 = params.sigma2[k]
        total += -0.5 * r.size * (LOG_2PI + np.log(s2)) - 0.5 * np.sum(r * r) / s2
    return float(total)


# ---------------------------------------------------------------------------
# dropout model


def lag_transform(values, kind):
    values = np.asarray(values, dtype=float)
    return values * values if kind == "square" else values


def hazard_linpred(params, k, c_i, y_current, lag_features, x_kij=()):
    lags = lag_transform(lag_features, params.lag_transform)
    lp = (
        c_i
        + params.xi[k]
        + np.dot(np.asarray(x_kij, dtype=float), params.psi[k])
        + np.dot(lags, params.delta[k][: lags.size])
        + params.phi[k] * y_current
    )
    return float(np.clip(lp, -LINPRED_CLIP, LINPRED_CLIP))


def hazard(params, k, c_i, y_current, lag_features, x_kij=()):
    """Discrete dropout hazard: inverse logit of the linear predictor.

    ``lag_features`` are the raw earlier outcomes, most recent first; the
    params' lag transform is applied here.
    """
    return float(expit(hazard_linpred(params, k, c_i, y_current, lag_features, x_kij)))


def log_hazard(lp):
    """``log(expit(lp))`` without overflow."""
    return -np.logaddexp(0.0, -np.asarray(lp, dtype=float))


def log_survival(lp):
    """``log(1 - expit(lp))`` without overflow."""
    return -np.logaddexp(0.0, np.asarray(lp, dtype=float))


def dropout_logprob(d, hazards, n_times):
    """Log probability that a member's dropout time equals ``d``.

    ``hazards`` are ``lambda_2 .. lambda_min(d, J)``.
    """
    J = n_times
    if not 2 <= d <= J + 1:
        raise ModelError(f"dropout time must lie in 2..{J + 1}, got {d}")
    lam = np.asarray(hazards, dtype=float)
    if lam.size != min(d, J) - 1:
        raise ModelError(f"expected {min(d, J) - 1} hazards for d={d}, got {lam.size}")
    if d == J + 1:
        return float(np.sum(np.log1p(-lam)))
    with np.errstate(divide="ignore"):
        return float(np.sum(np.log1p(-lam[:-1])) + np.log(lam[-1]))


def hazard_rows(panel):
    """``(2, n, J)`` masks of hazard rows and of the dropout event row."""
    J = panel.n_times
    t = np.arange(1, J + 1)
    d = panel.dropout[:, :, None]
    rows = (t >= 2) & (t <= np.minimum(d, J))
    event = t == d
    return rows, event


def hazard_history(panel, y, spec, k):
    """Untransformed history features, shape ``(n, J, m)``, most recent lag first."""
    n, J = panel.n_dyads, panel.n_times
    m = spec.n_lag_terms(J)
    H = np.zeros((n, J, m))
    for lag in range(1, m + 1):
        H[:, lag:, lag - 1] = y[k][:, : J - lag]
    return H


def hazard_linpreds(panel, params, c, y, spec):
    """Clipped hazard linear predictors for every ``(k, i, t)``; shape ``(2, n, J)``.

    Entries outside the hazard rows are meaningless.
    """
    yz = np.nan_to_num(y)
    out = np.empty(yz.shape)
    for k in (0, 1):
        W = panel.covariates[k][:, :, panel.covariate_index(spec.dropout_covariates[k])]
        H = lag_transform(hazard_history(panel, yz, spec, k), params.lag_transform)
        lp = c[:, None] + params.xi[k] + W @ params.psi[k] + params.phi[k] * yz[k]
        if H.shape[2]:
            lp = lp + H @ params.delta[k]
        out[k] = lp
    return np.clip(out, -LINPRED_CLIP, LINPRED_CLIP)


def dropout_loglik(panel, params, effects, y=None, spec=None):
    """Sum of each member's dropout-time log probability."""
    spec = spec or ModelSpec()
    y = panel.y if y is None else np.asarray(y, dtype=float)
    rows, event = hazard_rows(panel)
    if np.isnan(y[rows]).any():
        raise AugmentationIncomplete("augmentation incomplete: outcome at a dropout wave is missing")
    lp = hazard_linpreds(panel, params, effects.c, y, spec)
    ll = np.where(event, log_hazard(lp), log_survival(lp))
    return float(ll[rows].sum())


def normal_logpdf_sum(x, var):
    x = np.asarray(x, dtype=float)
    if var <= 0:
        raise ModelError("random-effect variances must be positive")
    return float(-0.5 * x.size * (LOG_2PI + np.log(var)) - 0.5 * np.sum(x * x) / var)


def joint_loglik(panel, meas, drop, effects, y=None, spec=None):
    """Complete-data log density: transitions, dropout times and random effects."""
    if panel.n_dyads == 0:
        return 0.0
    return (
        measurement_loglik(panel, meas, effects, y, spec)
        + dropout_loglik(panel, drop, effects, y, spec)
        + normal_logpdf_sum(effects.b, meas.tau_b2)
        + normal_logpdf_sum(effects.c, drop.tau_c2)
    )
