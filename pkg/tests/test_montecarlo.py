"""Order-independent Monte Carlo reduction."""
import numpy as np
import pytest

from chaoskit.levy import CellGrid, poisson_preset, terminal_value
from chaoskit.montecarlo import mc_estimate, summarize


def test_mean_is_bitwise_order_independent():
    rng = np.random.default_rng(6)
    v = rng.standard_normal(1001) * np.exp(rng.standard_normal(1001))
    a = summarize(v)
    b = summarize(v[::-1].copy())
    c = summarize(rng.permutation(v))
    assert a.mean == b.mean == c.mean
    assert a.se == b.se == c.se


def test_complex_errors_combine_in_quadrature():
    rng = np.random.default_rng(9)
    v = rng.standard_normal(500) + 1j * rng.standard_normal(500)
    s = summarize(v)
    assert s.se == pytest.approx(np.hypot(s.se_re, s.se_im))
    assert s.se_re > 0 and s.se_im > 0


def test_constant_sample_has_zero_error():
    s = summarize(np.full(64, 2.5))
    assert s.mean == 2.5
    assert s.se == 0.0
    assert s.within(2.5)
    assert not s.within(2.6)


def test_within_uses_k_standard_errors():
    rng = np.random.default_rng(12)
    s = summarize(rng.standard_normal(1000))
    assert s.within(s.mean + 3.9 * s.se)
    assert not s.within(s.mean + 4.1 * s.se)


def test_summarize_input_validation():
    with pytest.raises(ValueError):
        summarize(np.zeros((3, 3)))
    with pytest.raises(ValueError):
        summarize(np.array([]))


def test_mc_estimate_runs_a_functional_over_an_ensemble():
    model = poisson_preset(1.0, 1.0)
    grid = CellGrid(model, 4)
    stat = mc_estimate(terminal_value, model, grid, n_paths=500, seed=99)
    assert stat.n_paths == 500
    assert stat.seed == 99
    assert abs(stat.mean - 1.0) <= 6.0 * stat.se


def test_mc_estimate_rejects_misshaped_functionals():
    model = poisson_preset(1.0, 1.0)
    grid = CellGrid(model, 4)
    with pytest.raises(ValueError):
        mc_estimate(lambda ens: np.zeros(3), model, grid, n_paths=5, seed=1)


def test_report_dict_is_plain_floats():
    s = summarize(np.array([1.0 + 2j, 3.0 - 1j]))
    rep = s.report()
    assert set(rep) == {"mean_re", "mean_im", "se", "n_paths", "seed"}
    assert rep["mean_re"] == pytest.approx(2.0)
