"""Small hand-built panels and samplers shared by the sampler tests."""

import numpy as np
from scipy.integrate import cumulative_trapezoid
from scipy.stats import kstest

from dyadsel.gibbs import GibbsSampler, make_rng
from dyadsel.model import DyadPanel, MeasurementParams, ModelSpec, PriorSpec

SPEC_X = ModelSpec(meas_covariates=(("x",), ("x",)))


def panel_from(y, dropout, x=None):
    """Panel from a full outcome array ``(2, n, J)`` masked by ``dropout``."""
    y = np.asarray(y, dtype=float)
    _, n, J = y.shape
    cov = np.zeros((2, n, J, 1)) if x is None else np.broadcast_to(np.asarray(x, float)[:, :, None, None], (2, n, J, 1))
    return DyadPanel.from_complete(y, cov, dropout, covariate_names=("x",))


def sampler(panel, spec=SPEC_X, prior=None, seed=0, likelihood="selection"):
    return GibbsSampler(panel, spec, prior or PriorSpec(), make_rng(seed), likelihood)


def meas_params(alpha=(0.2, -0.1), beta=(0.5, 0.6), gamma=(0.3, 0.4), bx=(1.0, 0.5), gx=(0.5, 1.0), sigma2=(0.8, 1.3), tau_b2=1.0):
    return MeasurementParams(
        alpha=alpha, beta=beta, gamma=gamma, beta_x=([bx[0]], [bx[1]]), gamma_x=([gx[0]], [gx[1]]),
        sigma2=sigma2, tau_b2=tau_b2,
    )


def quadrature_cdf(logdens, lo, hi, m=200_001):
    """CDF of a 1-D density known up to a constant, by trapezoid quadrature on a grid."""
    grid = np.linspace(lo, hi, m)
    lp = logdens(grid)
    dens = np.exp(lp - lp.max())
    cdf = cumulative_trapezoid(dens, grid, initial=0.0)
    cdf /= cdf[-1]
    return lambda x: np.interp(x, grid, cdf)


def ks_distance(draws, cdf):
    return kstest(np.asarray(draws), cdf).statistic


def tied_mar_panel(n_dyads=200, seed=8):
    """Design-A outcomes with MAR dropout where both members leave at the same wave.

    No observed transition then has a missing partner lag, so the selection
    and available-case likelihoods share the same measurement data.
    """
    from dyadsel.simulate import SimDesign, generate_dataset

    design = SimDesign.simulation_a(n_dyads=n_dyads, phi=(0.0, 0.0), xi=(-1.0, -1.0), delta=(-0.2, -0.2))
    data = generate_dataset(design, seed)
    p = data.panel
    d = np.broadcast_to(p.dropout.min(axis=0), p.dropout.shape)
    return design, DyadPanel.from_complete(data.y_complete, p.covariates, d, covariate_names=p.covariate_names)
