"""Compiled row loops used by every Gibbs sweep.

Arrays follow the sampler layout: outcomes ``y[k, i, t]`` with 0-based
time, measurement-row mask ``rows[k, i, t]``, covariate contributions
``cx[k, i, t]``.
"""

import math

import numpy as np
from numba import njit

CLIP = 700.0


@njit(cache=True)
def softplus(x):
    if x > 0.0:
        return x + math.log1p(math.exp(-x))
    return math.log1p(math.exp(x))


@njit(cache=True)
def transition_residuals(y, rows, cx, alpha, beta, gamma, b, S, SS):
    """Fill ``S[k, i]`` with residual sums excluding ``b`` and ``SS[k]`` with
    squared residual sums including ``b``."""
    _, n, J = y.shape
    for k in range(2):
        p = 1 - k
        SS[k] = 0.0
        for i in range(n):
            s = 0.0
            for t in range(1, J):
                if rows[k, i, t]:
                    r = y[k, i, t] - (alpha[k] + beta[k] * y[k, i, t - 1] + gamma[k] * y[p, i, t - 1] + cx[k, i, t])
                    s += r
                    e = r - b[i]
                    SS[k] += e * e
            S[k, i] = s


@njit(cache=True)
def slot_moments(t, y, rows, cx, alpha, beta, gamma, s2, b, mean, var):
    """Normal full conditional of each outcome at time ``t`` given the rest.

    Collects the member's own transition at ``t`` and, when modelled, both
    members' transitions at ``t + 1`` (where the outcome is a lag).
    """
    _, n, J = y.shape
    for k in range(2):
        p = 1 - k
        for i in range(n):
            mu = b[i] + alpha[k] + beta[k] * y[k, i, t - 1] + gamma[k] * y[p, i, t - 1] + cx[k, i, t]
            prec = 1.0 / s2[k]
            num = mu / s2[k]
            if t + 1 < J:
                if rows[k, i, t + 1]:
                    r = y[k, i, t + 1] - (b[i] + alpha[k] + gamma[k] * y[p, i, t] + cx[k, i, t + 1])
                    prec += beta[k] * beta[k] / s2[k]
                    num += beta[k] * r / s2[k]
                if rows[p, i, t + 1]:
                    r = y[p, i, t + 1] - (b[i] + alpha[p] + beta[p] * y[p, i, t] + cx[p, i, t + 1])
                    prec += gamma[p] * gamma[p] / s2[p]
                    num += gamma[p] * r / s2[p]
            mean[k, i] = num / prec
            var[k, i] = 1.0 / prec


@njit(cache=True)
def hazard_loglik(A, theta, yk, ii, tt, c, ev):
    """Bernoulli log likelihood of the hazard rows of one member.

    ``theta`` holds the coefficients of ``A``'s columns followed by the
    current-outcome coefficient.
    """
    m = A.shape[1]
    phi = theta[m]
    total = 0.0
    for r in range(A.shape[0]):
        lp = c[ii[r]] + phi * yk[ii[r], tt[r]]
        for j in range(m):
            lp += A[r, j] * theta[j]
        lp = min(max(lp, -CLIP), CLIP)
        total += ev[r] * lp - softplus(lp)
    return total


@njit(cache=True)
def hazard_loglik_by_dyad(A, theta, yk, ii, tt, c, ev, out):
    """Add each hazard row's log likelihood to ``out[dyad]``."""
    m = A.shape[1]
    phi = theta[m]
    for r in range(A.shape[0]):
        lp = c[ii[r]] + phi * yk[ii[r], tt[r]]
        for j in range(m):
            lp += A[r, j] * theta[j]
        lp = min(max(lp, -CLIP), CLIP)
        out[ii[r]] += ev[r] * lp - softplus(lp)


def log_sigmoid(lp):
    """Vectorised ``log(expit(lp))``."""
    return -np.logaddexp(0.0, -lp)
