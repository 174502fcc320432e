"""Metropolis-within-Gibbs sampler for the dyadic selection model.

One sweep runs, in order: data augmentation of the missing outcomes,
the dyad intercepts ``b``, both residual variances, ``tau_b2``, both
members' transition coefficients, both members' hazard coefficients
(random-walk Metropolis), the dropout intercepts ``c`` (per-dyad
random-walk Metropolis) and ``tau_c2``.

Three likelihoods share the machinery:

``"selection"``
    transition model plus dropout model, missing outcomes augmented up to
    the later dropout wave of each dyad;
``"ignorable"``
    same augmentation, no dropout model (hazard factors dropped);
``"available"``
    observed rows whose lags are all observed, no augmentation.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from functools import partial

import numpy as np
from scipy.linalg import cho_solve, solve_triangular

from . import _kernels as _k
from .model import (
    LINPRED_CLIP,
    LOG_2PI,
    DropoutParams,
    MeasurementParams,
    ModelError,
    ModelSpec,
    PriorSpec,
    RandomEffects,
    hazard_history,
    hazard_rows,
    lag_transform,
    measurement_rows,
)

log = logging.getLogger(__name__)

LIKELIHOODS = ("selection", "ignorable", "available")


class SamplerError(RuntimeError):
    """A chain had to be abandoned."""

    def __init__(self, message, iteration=None, block=None):
        super().__init__(message)
        self.iteration = iteration
        self.block = block


class SingularDesign(SamplerError):
    pass


@dataclass(frozen=True)
class AdaptationConfig:
    """Robbins-Monro proposal tuning, active during burn-in only."""

    target_block: float = 0.234
    target_scalar: float = 0.44
    covariance_interval: int = 50
    decay: float = 0.6
    initial_c_scale: float = 1.0
    enabled: bool = True


@dataclass(frozen=True)
class SamplerConfig:
    n_iter: int = 11_000
    burn_in: int = 1_000
    thin: int = 1
    seed: int = 0
    prior: PriorSpec = field(default_factory=PriorSpec)
    adaptation: AdaptationConfig = field(default_factory=AdaptationConfig)
    drift_window: int = 250
    drift_blocks: int = 8
    drift_nats: float = 50.0
    coef_bound: float = 1e4

    def __post_init__(self):
        if self.n_iter < 1 or not 0 <= self.burn_in < self.n_iter:
            raise ValueError("need 0 <= burn_in < n_iter")
        if self.thin < 1:
            raise ValueError("thin must be >= 1")

    @property
    def n_keep(self):
        return len(range(self.burn_in, self.n_iter, self.thin))


@dataclass
class SamplerState:
    """Current values of everything the sweep updates."""

    meas: MeasurementParams
    drop: DropoutParams | None
    effects: RandomEffects
    y: np.ndarray

    def augmented(self, slots):
        """``{(k, i, j): value}`` for every augmented slot, ``j`` 1-based."""
        return {(int(k), int(i), int(t) + 1): float(self.y[k, i, t]) for k, i, t in np.argwhere(slots)}


@dataclass
class ChainOutput:
    names: list
    draws: np.ndarray
    loglik: np.ndarray
    acceptance: dict
    config: SamplerConfig | None = None

    def column(self, name):
        return self.draws[:, self.names.index(name)]

    def summaries(self):
        """Per parameter: mean, sd, equal-tailed 95% interval, MC standard error."""
        from .diagnostics import effective_sample_size

        out = {}
        for j, name in enumerate(self.names):
            x = self.draws[:, j]
            lo, hi = np.quantile(x, [0.025, 0.975])
            sd = float(np.std(x, ddof=1)) if x.size > 1 else 0.0
            ess = effective_sample_size(x) if x.size >= 4 else float(x.size)
            out[name] = {
                "mean": float(np.mean(x)),
                "sd": sd,
                "q025": float(lo),
                "q975": float(hi),
                "ess": float(ess),
                "mcse": sd / np.sqrt(ess) if ess > 0 else float("nan"),
            }
        return out

    def posterior_mean(self):
        return dict(zip(self.names, self.draws.mean(axis=0)))


def _ig_draw(rng, shape, scale):
    return scale / rng.gamma(shape)


def _chol_draw(rng, prec, rhs):
    """Draw from ``N(prec^-1 rhs, prec^-1)``; returns ``(draw, mean)`` or None if singular."""
    try:
        L = np.linalg.cholesky(prec)
    except np.linalg.LinAlgError:
        return None
    mean = cho_solve((L, True), rhs)
    z = rng.standard_normal(rhs.shape[0])
    return mean + solve_triangular(L.T, z, lower=False), mean


def _collinear_columns(Z, names):
    bad = []
    for j in range(Z.shape[1]):
        if np.linalg.matrix_rank(Z[:, : j + 1]) < j + 1 - len(bad):
            bad.append(names[j])
    return bad


class GibbsSampler:
    """Holds the prepared data and current state of one chain.

    Each Gibbs step is a method, so tests can drive single conditionals at
    a fixed state; :meth:`sweep` runs them in order and :meth:`run` drives
    burn-in, adaptation and storage.
    """

    def __init__(self, panel, spec=None, prior=None, rng=None, likelihood="selection", adaptation=None):
        spec = spec or ModelSpec()
        if likelihood not in LIKELIHOODS:
            raise ModelError(f"likelihood must be one of {LIKELIHOODS}")
        if panel.order != 1 or spec.order != 1:
            raise ModelError("the sampler supports first-order transition models only (q = 1)")
        self.panel = panel
        self.spec = spec
        self.prior = prior or PriorSpec()
        self.rng = rng if rng is not None else np.random.default_rng()
        self.likelihood = likelihood
        self.adaptation = adaptation or AdaptationConfig()
        self.with_dropout = likelihood == "selection"
        n, J = panel.n_dyads, panel.n_times
        self.n, self.J = n, J
        obs = ~np.isnan(panel.y)

        idx = [panel.covariate_index(spec.meas_covariates[k]) for k in (0, 1)]
        self.Xm = [panel.covariates[k][:, :, idx[k]] for k in (0, 1)]
        p = (len(idx[0]), len(idx[1]))

        if likelihood == "available":
            rows = np.zeros((2, n, J), dtype=bool)
            rows[:, :, 1:] = obs[:, :, 1:] & obs[:, :, :-1] & obs[::-1, :, :-1]
            self.slots = np.zeros((2, n, J), dtype=bool)
        else:
            rows = np.broadcast_to(measurement_rows(panel), (2, n, J)).copy()
            self.slots = rows & ~obs
        self.rows = rows
        self.n_rows = rows.sum(axis=2)
        self.slot_times = [t for t in range(1, J) if self.slots[:, :, t].any()]
        self.row_index = [np.nonzero(rows[k]) for k in (0, 1)]
        self.XX = [
            np.hstack([self.Xm[k][self.row_index[k]], self.Xm[1 - k][self.row_index[k]]]) for k in (0, 1)
        ]
        self.eta_names = [
            ["alpha", "beta", "gamma"]
            + [f"beta_x.{c}" for c in spec.meas_covariates[k]]
            + [f"gamma_x.{c}" for c in spec.meas_covariates[1 - k]]
            for k in (0, 1)
        ]

        # zero coefficients, unit variances, last observation carried forward
        y = np.where(obs, panel.y, 0.0)
        for t in range(1, J):
            y[:, :, t] = np.where(obs[:, :, t], y[:, :, t], y[:, :, t - 1])
        self.y = y
        self.meas = MeasurementParams.zeros(p)
        self.b = np.zeros(n)
        self.c = np.zeros(n)
        self._refresh_meas()
        self._S = np.zeros((2, n))
        self._SS = np.zeros(2)

        self.accept_counts = {}
        if self.with_dropout:
            self._prepare_dropout()
        self.iteration = 0
        self._adapting = False
        self._blocks = self._build_blocks()

    # ------------------------------------------------------------------
    # setup

    def _prepare_dropout(self):
        panel, spec, n, J = self.panel, self.spec, self.n, self.J
        hrows, event = hazard_rows(panel)
        self.haz_rows, self.event = hrows, event
        self.m_lags = spec.n_lag_terms(J)
        widx = [panel.covariate_index(spec.dropout_covariates[k]) for k in (0, 1)]
        obs_y = np.nan_to_num(panel.y)
        self.A, self.haz_index, self.A_event, self.ev = [], [], [], []
        for k in (0, 1):
            # history terms only reach outcomes observed before dropout, so A is fixed
            H = lag_transform(hazard_history(panel, obs_y, spec, k), spec.lag_transform)
            W = panel.covariates[k][:, :, widx[k]]
            A = np.concatenate([np.ones((n, J, 1)), W, H], axis=2)
            ii, tt = np.nonzero(hrows[k])
            self.haz_index.append((ii, tt))
            self.A.append(np.ascontiguousarray(A[ii, tt]))
            self.ev.append(event[k][ii, tt].astype(float))
            tev = np.clip(panel.dropout[k] - 1, 0, J - 1)
            self.A_event.append(A[np.arange(n), tev])
        self.theta_names = [
            ["xi"]
            + [f"psi.{c}" for c in spec.dropout_covariates[k]]
            + (["delta"] if self.m_lags == 1 else [f"delta{l}" for l in range(1, self.m_lags + 1)])
            + ["phi"]
            for k in (0, 1)
        ]
        self.theta = [np.zeros(self.A[k].shape[1] + 1) for k in (0, 1)]
        if spec.phi_fixed is not None:
            for th in self.theta:
                th[-1] = spec.phi_fixed
        self.tau_c2 = 1.0
        self.free = [np.arange(th.size) if spec.phi_fixed is None else np.arange(th.size - 1) for th in self.theta]
        self.prop_scale = np.array([2.38 / np.sqrt(f.size) for f in self.free])
        self.prop_chol = [self._fisher_chol(k) for k in (0, 1)]
        self.c_scale = self.adaptation.initial_c_scale
        self.theta_hist = [[], []]
        self.accept_counts = {"augment": [0, 0], "drop.k1": [0, 0], "drop.k2": [0, 0], "c": [0, 0]}

    def _fisher_chol(self, k):
        """Proposal shape from the logistic information matrix at hazard 1/2."""
        ii, tt = self.haz_index[k]
        full = np.hstack([self.A[k], self.y[k, ii, tt][:, None]])[:, self.free[k]]
        F = 0.25 * full.T @ full + 1e-6 * np.eye(full.shape[1])
        try:
            return np.linalg.cholesky(np.linalg.inv(F))
        except np.linalg.LinAlgError:
            return np.eye(full.shape[1])

    def _refresh_meas(self):
        m = self.meas
        self.cx = np.stack([self.Xm[k] @ m.beta_x[k] + self.Xm[1 - k] @ m.gamma_x[k] for k in (0, 1)])
        self._beta = np.ascontiguousarray(m.beta[:, 0])
        self._gamma = np.ascontiguousarray(m.gamma[:, 0])

    def _build_blocks(self):
        blocks = [("augment", self.augment_missing, lambda: self.y), ("b", self.draw_b, lambda: self.b)]
        for k in (0, 1):
            blocks.append((f"sigma2.k{k + 1}", partial(self.draw_sigma2, k), lambda: self.meas.sigma2))
        blocks.append(("tau_b2", self.draw_tau_b2, lambda: self.meas.tau_b2))
        for k in (0, 1):
            blocks.append((f"eta.k{k + 1}", partial(self.draw_eta, k), partial(self.meas_eta, k)))
        if self.with_dropout:
            for k in (0, 1):
                blocks.append((f"drop.k{k + 1}", partial(self.draw_dropout_params, k), partial(self.theta.__getitem__, k)))
            blocks.append(("c", self.draw_c, lambda: self.c))
            blocks.append(("tau_c2", self.draw_tau_c2, lambda: self.tau_c2))
        return blocks

    def meas_eta(self, k):
        return self.meas.eta(k)

    # ------------------------------------------------------------------
    # state access

    @property
    def drop(self):
        if not self.with_dropout:
            return None
        r = tuple(len(self.spec.dropout_covariates[k]) for k in (0, 1))
        d = DropoutParams.zeros(r, self.m_lags, self.spec.lag_transform)
        for k in (0, 1):
            d.set_theta(k, self.theta[k])
        d.tau_c2 = self.tau_c2
        return d

    @property
    def state(self):
        return SamplerState(self.meas, self.drop, RandomEffects(self.b, self.c), self.y)

    def set_state(self, meas=None, drop=None, b=None, c=None, y=None):
        """Overwrite parts of the current state (tests, restarts, the joint-distribution test)."""
        if meas is not None:
            self.meas = meas.copy()
            self._refresh_meas()
        if drop is not None:
            for k in (0, 1):
                self.theta[k] = drop.theta(k).copy()
            self.tau_c2 = float(drop.tau_c2)
        if b is not None:
            self.b = np.array(b, dtype=float)
        if c is not None:
            self.c = np.array(c, dtype=float)
        if y is not None:
            y = np.array(y, dtype=float)
            keep = ~np.isnan(self.panel.y)
            self.y = np.where(keep, self.panel.y, np.nan_to_num(y))

    # ------------------------------------------------------------------
    # transition model

    def _residuals(self):
        """Refresh per-dyad residual sums (without ``b``) and squared sums (with ``b``)."""
        m = self.meas
        _k.transition_residuals(self.y, self.rows, self.cx, m.alpha, self._beta, self._gamma, self.b, self._S, self._SS)
        return self._S, self._SS

    def slot_conditional(self, t):
        """Normal full conditional of the outcomes at 0-based time ``t``, hazard factor excluded.

        Returns ``(mean, var)`` of shape ``(2, n)``; only entries flagged in
        ``self.slots[:, :, t]`` are used.
        """
        m = self.meas
        mean = np.empty((2, self.n))
        var = np.empty((2, self.n))
        _k.slot_moments(t, self.y, self.rows, self.cx, m.alpha, self._beta, self._gamma, m.sigma2, self.b, mean, var)
        return mean, var

    def _event_linpred(self, t, yt):
        th = self.theta
        fixed = np.stack([self.A_event[k] @ th[k][:-1] for k in (0, 1)])
        phi = np.array([th[0][-1], th[1][-1]])
        return np.clip(self.c + fixed + phi[:, None] * yt, -LINPRED_CLIP, LINPRED_CLIP)

    # ------------------------------------------------------------------
    # Gibbs steps

    def augment_missing(self):
        """Redraw every augmented outcome, one time slice at a time.

        At a fixed time the slots are conditionally independent (two
        members share a slot time only at the dyad's last modelled wave,
        where no later transition involves them), so each slice is one
        vectorised draw. A slot at the member's own dropout wave carries
        its hazard factor: the normal conditional is used as an
        independence proposal and accepted with the hazard ratio.
        """
        for t in self.slot_times:
            slots = self.slots[:, :, t]
            mean, var = self.slot_conditional(t)
            prop = mean + np.sqrt(var) * self.rng.standard_normal(mean.shape)
            if self.with_dropout:
                ev = slots & self.event[:, :, t]
                cur = self.y[:, :, t]
                log_r = _k.log_sigmoid(self._event_linpred(t, prop)) - _k.log_sigmoid(self._event_linpred(t, cur))
                ok = np.log(self.rng.random(mean.shape)) < log_r
                take = slots & (~ev | ok)
                acc = self.accept_counts["augment"]
                acc[0] += int(np.count_nonzero(ev & ok))
                acc[1] += int(np.count_nonzero(ev))
            else:
                take = slots
            self.y[:, :, t] = np.where(take, prop, self.y[:, :, t])

    def b_conditional(self):
        S, _ = self._residuals()
        m = self.meas
        s2 = m.sigma2
        prec = 1.0 / m.tau_b2 + self.n_rows[0] / s2[0] + self.n_rows[1] / s2[1]
        return (S[0] / s2[0] + S[1] / s2[1]) / prec, 1.0 / prec

    def draw_b(self):
        mean, var = self.b_conditional()
        self.b = mean + np.sqrt(var) * self.rng.standard_normal(self.n)

    def sigma2_conditional(self, k):
        """Inverse-gamma ``(shape, scale)`` of member ``k``'s residual variance."""
        _, SS = self._residuals()
        return self.prior.a + self.n_rows[k].sum() / 2.0, self.prior.b + 0.5 * SS[k]

    def draw_sigma2(self, k):
        self.meas.sigma2[k] = _ig_draw(self.rng, *self.sigma2_conditional(k))

    def tau_conditional(self, effects):
        return self.prior.a + effects.size / 2.0, self.prior.b + 0.5 * float(effects @ effects)

    def draw_tau_b2(self):
        self.meas.tau_b2 = _ig_draw(self.rng, *self.tau_conditional(self.b))

    def draw_tau_c2(self):
        self.tau_c2 = _ig_draw(self.rng, *self.tau_conditional(self.c))

    def design(self, k):
        """Stacked transition design ``Z_k`` and response ``y_k - b``."""
        ii, tt = self.row_index[k]
        Z = np.empty((ii.size, 3 + self.XX[k].shape[1]))
        Z[:, 0] = 1.0
        Z[:, 1] = self.y[k, ii, tt - 1]
        Z[:, 2] = self.y[1 - k, ii, tt - 1]
        Z[:, 3:] = self.XX[k]
        return Z, self.y[k, ii, tt] - self.b[ii]

    def eta_conditional(self, k):
        """Precision matrix and right-hand side of the normal conditional of ``eta_k``."""
        Z, r = self.design(k)
        s2 = self.meas.sigma2[k]
        prec = Z.T @ Z / s2
        rhs = Z.T @ r / s2
        if self.prior.eta_prior is not None:
            m0, v0 = self.prior.eta_prior[k]
            prec = prec + np.diag(1.0 / v0)
            rhs = rhs + m0 / v0
        return prec, rhs, Z

    def draw_eta(self, k):
        prec, rhs, Z = self.eta_conditional(k)
        res = None
        if Z.shape[0] >= Z.shape[1] or self.prior.eta_prior is not None:
            res = _chol_draw(self.rng, prec, rhs)
        if res is None or np.linalg.cond(prec) > 1e12:
            bad = _collinear_columns(Z, self.eta_names[k])
            raise SingularDesign(
                f"transition design for member {k + 1} is singular; collinear columns: {bad}",
                self.iteration, f"eta.k{k + 1}",
            )
        self.meas.set_eta(k, res[0])
        self._refresh_meas()

    # -- dropout model ------------------------------------------------

    def _hazard_loglik(self, k, theta):
        ii, tt = self.haz_index[k]
        return _k.hazard_loglik(self.A[k], theta, self.y[k], ii, tt, self.c, self.ev[k])

    def _theta_logprior(self, k, theta):
        if self.prior.theta_prior is not None:
            m0, v0 = self.prior.theta_prior[k]
            return -0.5 * float(np.sum((theta[self.free[k]] - m0) ** 2 / v0))
        if self.prior.phi_prior is not None and self.spec.phi_fixed is None:
            m0, v0 = self.prior.phi_prior
            return -0.5 * (theta[-1] - m0) ** 2 / v0
        return 0.0

    def theta_logpost(self, k, theta):
        """Unnormalised log conditional of member ``k``'s hazard coefficients."""
        return self._hazard_loglik(k, theta) + self._theta_logprior(k, theta)

    def draw_dropout_params(self, k):
        cur = self.theta[k]
        free = self.free[k]
        prop = cur.copy()
        prop[free] += self.prop_scale[k] * (self.prop_chol[k] @ self.rng.standard_normal(free.size))
        log_r = self.theta_logpost(k, prop) - self.theta_logpost(k, cur)
        ok = bool(np.log(self.rng.random()) < log_r)
        if ok:
            self.theta[k] = prop
        acc = self.accept_counts[f"drop.k{k + 1}"]
        acc[0] += ok
        acc[1] += 1
        if self._adapting:
            self._adapt_theta(k, float(np.exp(min(log_r, 0.0))))
        return ok

    def c_logpost(self, c):
        """Per-dyad unnormalised log conditional of the dropout intercepts."""
        out = -0.5 * c * c / self.tau_c2
        for k in (0, 1):
            ii, tt = self.haz_index[k]
            _k.hazard_loglik_by_dyad(self.A[k], self.theta[k], self.y[k], ii, tt, c, self.ev[k], out)
        return out

    def draw_c(self):
        cur = self.c
        prop = cur + self.c_scale * self.rng.standard_normal(self.n)
        log_r = self.c_logpost(prop) - self.c_logpost(cur)
        ok = np.log(self.rng.random(self.n)) < log_r
        self.c = np.where(ok, prop, cur)
        acc = self.accept_counts["c"]
        acc[0] += int(ok.sum())
        acc[1] += self.n
        if self._adapting:
            rate = float(np.mean(np.exp(np.minimum(log_r, 0.0))))
            self.c_scale *= np.exp(self._rm_step() * (rate - self.adaptation.target_scalar))

    # -- adaptation ---------------------------------------------------

    def _rm_step(self):
        return 1.0 / (self.iteration + 1) ** self.adaptation.decay

    def _adapt_theta(self, k, rate):
        ad = self.adaptation
        self.prop_scale[k] *= np.exp(self._rm_step() * (rate - ad.target_block))
        hist = self.theta_hist[k]
        hist.append(self.theta[k][self.free[k]].copy())
        it = self.iteration + 1
        if it % ad.covariance_interval == 0 and it >= 4 * ad.covariance_interval:
            cov = np.atleast_2d(np.cov(np.asarray(hist[len(hist) // 2 :]), rowvar=False))
            try:
                self.prop_chol[k] = np.linalg.cholesky(cov + 1e-8 * np.eye(cov.shape[0]))
            except np.linalg.LinAlgError:
                return
            self.prop_scale[k] = 2.38 / np.sqrt(cov.shape[0])

    # ------------------------------------------------------------------
    # sweep

    def joint_loglik(self):
        """Complete-data log density of the current state, baseline waves excluded."""
        m = self.meas
        _, SS = self._residuals()
        ll = 0.0
        for k in (0, 1):
            N = self.n_rows[k].sum()
            ll += -0.5 * N * (LOG_2PI + np.log(m.sigma2[k])) - 0.5 * SS[k] / m.sigma2[k]
        ll += -0.5 * self.n * (LOG_2PI + np.log(m.tau_b2)) - 0.5 * float(self.b @ self.b) / m.tau_b2
        if self.with_dropout:
            ll += self._hazard_loglik(0, self.theta[0]) + self._hazard_loglik(1, self.theta[1])
            ll += -0.5 * self.n * (LOG_2PI + np.log(self.tau_c2)) - 0.5 * float(self.c @ self.c) / self.tau_c2
        return float(ll)

    def sweep(self, check=True):
        """One full Gibbs cycle; with ``check`` each block's output must be finite."""
        for name, step, value in self._blocks:
            step()
            if check and not np.all(np.isfinite(value())):
                raise SamplerError(
                    f"non-finite state after block '{name}' at iteration {self.iteration}",
                    self.iteration, name,
                )
        self.iteration += 1

    def parameter_names(self):
        names = []
        for k in (0, 1):
            names += [f"meas.k{k + 1}.{s}" for s in self.eta_names[k]] + [f"meas.k{k + 1}.sigma2"]
        names.append("meas.tau_b2")
        if self.with_dropout:
            for k in (0, 1):
                names += [f"drop.k{k + 1}.{s}" for s in self.theta_names[k]]
            names.append("drop.tau_c2")
        return names

    def parameter_vector(self):
        m = self.meas
        parts = [m.eta(0), m.sigma2[:1], m.eta(1), m.sigma2[1:], [m.tau_b2]]
        if self.with_dropout:
            parts += [self.theta[0], self.theta[1], [self.tau_c2]]
        return np.concatenate(parts)

    def acceptance_rates(self):
        return {k: (v[0] / v[1] if v[1] else 1.0) for k, v in self.accept_counts.items()}

    def _reset_acceptance(self):
        for v in self.accept_counts.values():
            v[0] = v[1] = 0

    def run(self, config):
        """Run ``config.n_iter`` sweeps and return the retained draws."""
        names = self.parameter_names()
        keep = np.empty((config.n_keep, len(names)))
        trace = np.empty(config.n_iter)
        pos = 0
        for it in range(config.n_iter):
            self._adapting = self.with_dropout and self.adaptation.enabled and it < config.burn_in
            if it == config.burn_in:
                self._reset_acceptance()
            self.sweep()
            vec = self.parameter_vector()
            big = np.abs(vec) > config.coef_bound
            if big.any():
                name = names[int(np.argmax(big))]
                raise SamplerError(
                    f"parameter {name} exceeded {config.coef_bound:g} at iteration {it}; "
                    "posterior may be improper",
                    it, name,
                )
            trace[it] = self.joint_loglik()
            if it >= config.burn_in and (it - config.burn_in) % config.thin == 0:
                keep[pos] = vec
                pos += 1
        self._adapting = False
        _check_drift(trace[config.burn_in :], config)
        return ChainOutput(names, keep, trace, self.acceptance_rates(), config)


def _check_drift(trace, config):
    """Abort when block means of the log-likelihood trace fall monotonically."""
    w, nb = config.drift_window, config.drift_blocks
    if trace.size < w * nb:
        return
    blocks = trace[: trace.size // w * w].reshape(-1, w).mean(axis=1)
    tail = blocks[-nb:]
    if np.all(np.diff(tail) < 0) and tail[0] - tail[-1] > config.drift_nats:
        raise SamplerError(
            f"joint log likelihood drifted by {tail[0] - tail[-1]:.1f} nats over the last "
            f"{nb * w} iterations; posterior may be improper",
            None, "drift",
        )


def make_rng(seed):
    """Counter-based generator for a seed (int or SeedSequence)."""
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    return np.random.Generator(np.random.Philox(ss))


def run_chain(panel, config=None, spec=None, likelihood="selection", seed=None):
    """Fit the model to ``panel`` and return the retained draws.

    ``seed`` (int or SeedSequence) overrides ``config.seed``.
    """
    config = config or SamplerConfig()
    rng = make_rng(config.seed if seed is None else seed)
    sampler = GibbsSampler(panel, spec, config.prior, rng, likelihood, config.adaptation)
    return sampler.run(config)
