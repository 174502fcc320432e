"""Data generators for the two simulation designs (A: nonignorable, B: MAR)."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
from scipy.special import expit

from .model import DyadPanel, DropoutParams, MeasurementParams, ModelSpec, lag_transform

# Design A's printed hazard (c - Y_j - 0.5 Y_{j-1} - 6) gives essentially no
# dropout at these outcome levels. The generator flips the current-outcome
# sign and sets the intercept so that 24% of dyads lose a member at wave 2.
SIM_A_XI = -6.65
SIM_A_DELTA = -0.5
SIM_A_PHI = 1.0


@dataclass(frozen=True)
class SimDesign:
    variant: str = "A"
    n_dyads: int = 200
    n_times: int = 3
    baseline_mean: tuple = (5.0, 7.0)
    baseline_sd: tuple = (1.0, 1.0)
    beta: tuple = (0.5, 0.6)
    gamma: tuple = (0.5, 0.6)
    beta_x: tuple = (1.0, 1.0)
    gamma_x: tuple = (1.0, 1.0)
    alpha: tuple = (0.0, 0.0)
    sigma2: tuple = (1.0, 1.0)
    tau_b2: float = 1.0
    xi: tuple = (SIM_A_XI, SIM_A_XI)
    delta: tuple = (SIM_A_DELTA, SIM_A_DELTA)
    phi: tuple = (SIM_A_PHI, SIM_A_PHI)
    tau_c2: float = 1.0
    lag_transform: str = "identity"
    n_replicates: int = 100
    seed: int = 0

    @classmethod
    def simulation_a(cls, **kw):
        return cls(**kw)

    @classmethod
    def simulation_b(cls, **kw):
        base = dict(
            variant="B", baseline_mean=(3.0, 3.0), xi=(-15.0, -15.0), delta=(1.0, 1.0),
            phi=(0.0, 0.0), lag_transform="square",
        )
        base.update(kw)
        return cls(**base)

    @classmethod
    def for_variant(cls, variant, **kw):
        variant = variant.upper()
        if variant == "A":
            return cls.simulation_a(**kw)
        if variant == "B":
            return cls.simulation_b(**kw)
        raise ValueError(f"unknown simulation variant {variant!r} (expected A or B)")

    def with_(self, **kw):
        return replace(self, **kw)

    @property
    def truth_meas(self):
        return MeasurementParams(
            alpha=self.alpha, beta=self.beta, gamma=self.gamma,
            beta_x=(self.beta_x[0], self.beta_x[1]), gamma_x=(self.gamma_x[0], self.gamma_x[1]),
            sigma2=self.sigma2, tau_b2=self.tau_b2,
        )

    @property
    def truth_drop(self):
        return DropoutParams(
            xi=self.xi, psi=((), ()), delta=self.delta, phi=self.phi, tau_c2=self.tau_c2,
            lag_transform=self.lag_transform,
        )

    def truth(self):
        """True values keyed by the sampler's parameter names."""
        out = {}
        for k in (0, 1):
            pre = f"meas.k{k + 1}."
            out[pre + "alpha"] = self.alpha[k]
            out[pre + "beta"] = self.beta[k]
            out[pre + "gamma"] = self.gamma[k]
            out[pre + "beta_x.x"] = self.beta_x[k]
            out[pre + "gamma_x.x"] = self.gamma_x[k]
            out[pre + "sigma2"] = self.sigma2[k]
        out["meas.tau_b2"] = self.tau_b2
        return out

    def fit_spec(self, lag="matched"):
        """Model used to fit data from this design.

        ``lag="matched"`` uses the generator's lag transform (the flexible
        fit for design B); ``"identity"`` gives the linear-lag fit.
        """
        transform = self.lag_transform if lag == "matched" else lag
        return ModelSpec(meas_covariates=(("x",), ("x",)), lag_transform=transform)


MEASUREMENT_COEFS = (
    "meas.k1.beta", "meas.k1.gamma", "meas.k1.beta_x.x", "meas.k1.gamma_x.x",
    "meas.k2.beta", "meas.k2.gamma", "meas.k2.beta_x.x", "meas.k2.gamma_x.x",
)


@dataclass(frozen=True, eq=False)
class SimulatedData:
    panel: DyadPanel
    y_complete: np.ndarray
    b: np.ndarray
    c: np.ndarray


def simulate_transitions(meas, b, y0, X, rng):
    """Run the transition model forward from the baseline outcomes ``y0`` (2, n).

    ``X[k]`` holds member ``k``'s measurement covariates, shape ``(n, J, p_k)``.
    """
    n, J = X[0].shape[:2]
    y = np.empty((2, n, J))
    y[:, :, 0] = y0
    cx = [X[k] @ meas.beta_x[k] + X[1 - k] @ meas.gamma_x[k] for k in (0, 1)]
    sd = np.sqrt(meas.sigma2)
    for t in range(1, J):
        for k in (0, 1):
            mean = (
                b + meas.alpha[k] + meas.beta[k, 0] * y[k, :, t - 1]
                + meas.gamma[k, 0] * y[1 - k, :, t - 1] + cx[k][:, t]
            )
            y[k, :, t] = mean + sd[k] * rng.standard_normal(n)
    return y


def simulate_dropout(drop, c, y, W, n_lags, rng):
    """Draw dropout times wave by wave from the discrete hazard.

    ``W[k]`` holds member ``k``'s dropout covariates, shape ``(n, J, r_k)``;
    ``n_lags`` earlier outcomes enter the hazard (zero padded).
    """
    _, n, J = y.shape
    d = np.full((2, n), J + 1, dtype=np.int64)
    g = lag_transform(y, drop.lag_transform)
    for t in range(1, J):
        lp = np.empty((2, n))
        for k in (0, 1):
            lp[k] = c + drop.xi[k] + W[k][:, t] @ drop.psi[k] + drop.phi[k] * y[k, :, t]
            for lag in range(1, min(n_lags, t) + 1):
                lp[k] += drop.delta[k, lag - 1] * g[k, :, t - lag]
        u = rng.random((2, n))
        d[(d == J + 1) & (u < expit(lp))] = t + 1
    return d


def generate_dataset(design, rng):
    """Simulate one panel; ``rng`` is a Generator or anything SeedSequence accepts."""
    if not isinstance(rng, np.random.Generator):
        from .gibbs import make_rng

        rng = make_rng(rng)
    n, J = design.n_dyads, design.n_times
    y0 = np.stack([rng.normal(design.baseline_mean[k], design.baseline_sd[k], n) for k in (0, 1)])
    x = rng.standard_normal((2, n))
    b = rng.normal(0.0, np.sqrt(design.tau_b2), n)
    cov = np.broadcast_to(x[:, :, None, None], (2, n, J, 1))
    y = simulate_transitions(design.truth_meas, b, y0, cov, rng)
    c = rng.normal(0.0, np.sqrt(design.tau_c2), n)
    none = np.zeros((n, J, 0))
    d = simulate_dropout(design.truth_drop, c, y, (none, none), 1, rng)
    panel = DyadPanel.from_complete(
        y, cov, d, covariate_names=("x",), dyad_ids=tuple(str(i + 1) for i in range(n))
    )
    return SimulatedData(panel=panel, y_complete=y, b=b, c=c)


def dropout_summary(panel):
    """Fraction of dyads / members whose dropout happens at each wave ``2..J``."""
    d = panel.dropout
    first = d.min(axis=0)
    out = {}
    for t in range(2, panel.n_times + 1):
        out[t] = {
            "dyad": float(np.mean(first == t)),
            "member1": float(np.mean(d[0] == t)),
            "member2": float(np.mean(d[1] == t)),
        }
    return out
