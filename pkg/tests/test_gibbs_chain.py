import numpy as np
import pytest
from toys import SPEC_X, panel_from

from dyadsel.gibbs import GibbsSampler, SamplerConfig, SamplerError, _check_drift, make_rng, run_chain
from dyadsel.model import PriorSpec
from dyadsel.simulate import MEASUREMENT_COEFS, SimDesign, generate_dataset

SHORT = SamplerConfig(n_iter=400, burn_in=100, seed=11)


@pytest.fixture(scope="module")
def sim_a():
    design = SimDesign.simulation_a()
    return design, generate_dataset(design, 123).panel


def test_same_seed_same_draws(sim_a):
    design, panel = sim_a
    a = run_chain(panel, SHORT, design.fit_spec())
    b = run_chain(panel, SHORT, design.fit_spec())
    assert np.array_equal(a.draws, b.draws)
    assert np.array_equal(a.loglik, b.loglik)
    c = run_chain(panel, SHORT, design.fit_spec(), seed=12)
    assert not np.array_equal(a.draws, c.draws)


def test_fit_recovers_truth(sim_a):
    design, panel = sim_a
    out = run_chain(panel, SamplerConfig(n_iter=3000, burn_in=1000, seed=2), design.fit_spec())
    s = out.summaries()
    truth = design.truth()
    for name in MEASUREMENT_COEFS:
        assert abs(s[name]["mean"] - truth[name]) < 3 * s[name]["sd"], name


def test_no_missing_panel_matches_available_case():
    # without dropout the hazard blocks are separate from the transition model;
    # a proper hazard prior keeps the (data-free) intercept from drifting off
    rng = np.random.default_rng(0)
    n = 60
    y = rng.normal(size=(2, n, 3))
    y[:, :, 1:] += 0.5 * y[:, :, :-1]
    p = panel_from(y, np.full((2, n), 4), x=rng.normal(size=(2, n)))
    theta = (np.zeros(3), np.ones(3))
    cfg = SamplerConfig(n_iter=6000, burn_in=1000, seed=3, prior=PriorSpec(theta_prior=(theta, theta)))
    sel = run_chain(p, cfg, SPEC_X, likelihood="selection").summaries()
    avail = run_chain(p, cfg, SPEC_X, likelihood="available", seed=4).summaries()
    for name, v in avail.items():
        diff = abs(sel[name]["mean"] - v["mean"])
        assert diff < 4 * np.hypot(sel[name]["mcse"], v["mcse"]), name


class _BrokenTau(GibbsSampler):
    def draw_tau_b2(self):
        super().draw_tau_b2()
        if self.iteration == 5:
            self.meas.tau_b2 = float("nan")


def test_non_finite_state_aborts_with_block_and_iteration():
    rng = np.random.default_rng(1)
    p = panel_from(rng.normal(size=(2, 20, 3)), rng.integers(2, 5, size=(2, 20)), x=rng.normal(size=(2, 20)))
    s = _BrokenTau(p, SPEC_X, rng=make_rng(0))
    with pytest.raises(SamplerError) as err:
        s.run(SamplerConfig(n_iter=50, burn_in=10))
    assert err.value.block == "tau_b2"
    assert err.value.iteration == 5
    assert "tau_b2" in str(err.value) and "5" in str(err.value)


def test_monotone_loglik_decline_aborts():
    cfg = SamplerConfig(n_iter=3000, burn_in=0)
    falling = -np.arange(2000) * 0.05
    with pytest.raises(SamplerError, match="drifted") as err:
        _check_drift(falling, cfg)
    assert err.value.block == "drift"


def test_stationary_or_small_decline_passes_drift_check():
    cfg = SamplerConfig(n_iter=3000, burn_in=0)
    rng = np.random.default_rng(0)
    _check_drift(rng.normal(size=2000), cfg)
    _check_drift(-np.arange(2000) * 0.01, cfg)  # 20 nats in total
    _check_drift(-np.arange(100) * 10.0, cfg)  # too short to judge


def test_coefficient_bound_aborts():
    rng = np.random.default_rng(2)
    p = panel_from(rng.normal(size=(2, 20, 3)), rng.integers(2, 5, size=(2, 20)), x=rng.normal(size=(2, 20)))
    with pytest.raises(SamplerError, match="exceeded"):
        run_chain(p, SamplerConfig(n_iter=20, burn_in=5, coef_bound=1e-3), SPEC_X)


def test_output_shapes_and_summaries(sim_a):
    design, panel = sim_a
    cfg = SamplerConfig(n_iter=500, burn_in=100, thin=3, seed=1)
    out = run_chain(panel, cfg, design.fit_spec())
    assert out.draws.shape == (cfg.n_keep, len(out.names))
    assert out.loglik.shape == (cfg.n_iter,)
    assert all(0.0 <= v <= 1.0 for v in out.acceptance.values())
    for v in out.summaries().values():
        assert v["q025"] <= v["mean"] <= v["q975"]
        assert v["sd"] >= 0


def test_ignorable_likelihood_has_no_dropout_parameters(sim_a):
    design, panel = sim_a
    out = run_chain(panel, SHORT, design.fit_spec(), likelihood="ignorable")
    assert not any(n.startswith("drop.") for n in out.names)


def test_bad_config_rejected():
    with pytest.raises(ValueError):
        SamplerConfig(n_iter=10, burn_in=10)
    with pytest.raises(ValueError):
        SamplerConfig(thin=0)
