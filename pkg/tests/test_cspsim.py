import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from chomp.cspsim import SimConfig, diagnose, monte_carlo, n_windows, simulate_meal
from chomp.errors import ConfigError


@pytest.fixture(scope="module")
def report():
    return monte_carlo(SimConfig(seed=0))


def test_window_counts():
    cfg = SimConfig()
    assert [n_windows(cfg, d) for d in cfg.durations] == [59, 295, 885]


def test_perfect_classifier_means():
    rep = monte_carlo(SimConfig(error_rate=0.0))
    for mu in (0.60, 0.65, 0.70):
        for d in (1.0, 5.0, 15.0):
            assert abs(rep.cell(mu, d).mean - mu) < 0.003


def test_error_shift(report):
    # expected mean is mu (1 - 2e) + e
    assert report.cell(0.65, 15.0).mean == pytest.approx(0.65 * (1 - 2 * 0.046) + 0.046, abs=0.003)
    assert report.cell(0.65, 15.0).mean == pytest.approx(0.636, abs=0.003)


def test_frozen_values(report):
    c = report.cell(0.65, 5.0)
    # analytic check: mean 0.6362, sd sqrt((0.05 * 0.908)^2 + 0.636 * 0.364 / 295) = 0.0534, +-1.645 sd
    assert (round(c.mean, 4), round(c.ci_low, 4), round(c.ci_high, 4)) == (0.636, 0.5492, 0.722)
    assert sum(c.hist_counts) == 10000


def test_intervals_narrow_with_duration(report):
    for mu in (0.60, 0.65, 0.70):
        widths = [report.cell(mu, d).ci_high - report.cell(mu, d).ci_low for d in (1.0, 5.0, 15.0)]
        assert widths[0] > widths[1] > widths[2]


def test_diagnosis(report):
    d = diagnose(report)
    assert d.minimal_duration == {0.60: 5.0, 0.65: 1.0, 0.70: 1.0}
    # the reference minima differ for mu 0.60 and 0.65, so deviations are reported
    assert sum("deviation" in n for n in d.notes) == 2
    assert d.verdicts[(0.70, 1.0)] is True


def test_seed_reproducible():
    a = monte_carlo(SimConfig(n_draws=500, seed=3)).as_dict()
    b = monte_carlo(SimConfig(n_draws=500, seed=3)).as_dict()
    assert a == b
    assert a != monte_carlo(SimConfig(n_draws=500, seed=4)).as_dict()


def test_cells_order_independent():
    a = monte_carlo(SimConfig(mus=(0.6, 0.7), n_draws=300))
    b = monte_carlo(SimConfig(mus=(0.6, 0.7), durations=(1.0, 5.0, 15.0), n_draws=300))
    assert a.cell(0.7, 5.0) == b.cell(0.7, 5.0)


def test_symmetric_below_half():
    rep = monte_carlo(SimConfig(mus=(0.3, 0.5), n_draws=2000))
    assert rep.cell(0.3, 15.0).excludes_50
    assert not rep.cell(0.5, 15.0).excludes_50


def test_non_reference_grid_note():
    d = diagnose(monte_carlo(SimConfig(durations=(2.0,), n_draws=200)))
    assert any("reference grid" in n for n in d.notes)


def test_validation():
    for kw in ({"error_rate": 0.7}, {"sigma": -1}, {"mus": (1.2,)}, {"durations": (0.0,)}, {"n_draws": 0}):
        with pytest.raises(ConfigError):
            SimConfig(**kw)
    with pytest.raises(ConfigError):
        simulate_meal(SimConfig(), 0.6, 0.0, np.random.default_rng(0))


@given(st.floats(0.0, 1.0), st.floats(0.0, 0.5), st.integers(0, 2**31))
@settings(max_examples=50, deadline=None)
def test_observed_fraction_in_unit_interval(mu, e, seed):
    obs = simulate_meal(SimConfig(error_rate=e), mu, 1.0, np.random.default_rng(seed), 50)
    assert np.all((obs >= 0) & (obs <= 1))


@given(st.floats(0.0, 1.0))
@settings(max_examples=20, deadline=None)
def test_half_error_erases_preference(mu):
    obs = simulate_meal(SimConfig(error_rate=0.5, sigma=0.0), mu, 15.0, np.random.default_rng(0), 4000)
    assert abs(obs.mean() - 0.5) < 0.01
