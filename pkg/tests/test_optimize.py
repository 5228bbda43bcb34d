import numpy as np
import pytest

from ehaoi.core import DegenerateObjective, InvalidConfig, SystemParams
from ehaoi.optimize import (
    default_gamma_max,
    golden_section,
    make_objective,
    optimize_threshold,
    sweep_n,
    sweep_q,
)

Q_GRID = [round(0.1 * k, 1) for k in range(10)]


def brute_force(params, kind="maf", step=1e-4):
    grid = np.arange(0.0, default_gamma_max(params) + step, step)
    values = make_objective(params, kind)(grid)
    i = int(np.argmin(values))
    return grid[i], values[i]


def test_golden_section_parabola():
    x, fx, evals = golden_section(lambda t: (t - 1.234567) ** 2 + 3.0, 0.0, 5.0, tol=1e-8)
    assert x == pytest.approx(1.234567, abs=1e-7)
    assert fx == pytest.approx(3.0)
    assert evals > 10


@pytest.mark.parametrize("q", [0.0, 0.3, 0.7])
def test_equal_rates_never_wait(q):
    res = optimize_threshold(SystemParams(0.1, (0.1,), q))
    assert res.gamma_star == 0.0
    assert res.aoi_star == res.aoi_zero


@pytest.mark.parametrize("n", range(1, 11))
def test_half_erasure_never_waits(n):
    res = optimize_threshold(SystemParams.symmetric(0.1, 10.0, n, 0.5), "symmetric")
    assert res.gamma_star == 0.0


def test_positive_threshold_matches_fine_grid():
    p = SystemParams(0.1, (10.0,), 0.05)
    res = optimize_threshold(p, "single")
    g_grid, f_grid = brute_force(p, "single")
    assert res.gamma_star > 0
    assert abs(res.gamma_star - g_grid) <= 1e-3
    assert res.aoi_star <= f_grid + 1e-10
    lo, hi = res.bracket
    assert lo <= res.gamma_star <= hi


def test_objective_kinds_agree():
    p = SystemParams.symmetric(0.1, 10.0, 3, 0.1)
    g = np.linspace(0, 20, 7)
    np.testing.assert_allclose(make_objective(p, "maf")(g), make_objective(p, "symmetric")(g), rtol=1e-12)
    with pytest.raises(InvalidConfig):
        make_objective(p, "single")
    with pytest.raises(InvalidConfig):
        make_objective(SystemParams(0.1, (1.0, 2.0)), "symmetric")


def test_degenerate_objective():
    with pytest.raises(DegenerateObjective):
        optimize_threshold(SystemParams(0.1, (1.0,)), lambda g: np.full_like(np.asarray(g, float), np.nan))


def test_bracket_widens_when_minimum_is_far():
    f = lambda g: (np.asarray(g) - 500.0) ** 2
    res = optimize_threshold(SystemParams(0.1, (1.0,)), f, gamma_max=100.0)
    assert res.gamma_star == pytest.approx(500.0, abs=1e-5)


def test_sweep_q_threshold_decreases_with_erasures():
    rows = sweep_q(SystemParams(0.1, (10.0,)), Q_GRID)
    g = [r.gamma_star for r in rows]
    assert all(b <= a for a, b in zip(g, g[1:]))
    assert g[0] > 0 and g[-1] == 0
    for r in rows:
        assert r.aoi_at_star <= r.aoi_at_zero
        assert r.gain_percent == pytest.approx((1 - r.aoi_at_star / r.aoi_at_zero) * 100)
        assert r.gain_percent >= 0


def test_sweep_q_no_gain_at_matched_rates():
    rows = sweep_q(SystemParams(0.1, (0.1,)), Q_GRID)
    assert max(r.gain_percent for r in rows) < 1e-9


def test_gain_saturates_with_data_rate():
    small_q = [0.0, 0.05, 0.1, 0.2]
    a = sweep_q(SystemParams(0.1, (10.0,)), small_q)
    b = sweep_q(SystemParams(0.1, (100.0,)), small_q)
    assert max(abs(x.gain_percent - y.gain_percent) for x, y in zip(a, b)) < 1.0


def test_sweep_n_half_erasure():
    rows = sweep_n(0.1, 10.0, [0.5], range(1, 11))
    assert [r.gamma_star for r in rows] == [0.0] * 10


def test_sweep_n_waiting_vanishes_with_many_sources():
    for q in (0.0, 0.1):
        rows = sweep_n(0.1, 10.0, [q], range(1, 11))
        g = [r.gamma_star for r in rows]
        assert g[0] > 0
        assert all(b <= a for a, b in zip(g, g[1:]))
        assert g[-1] == 0.0


def test_sweep_n_single_source_column_matches_sweep_q():
    by_n = sweep_n(0.1, 10.0, Q_GRID, [1])
    by_q = sweep_q(SystemParams(0.1, (10.0,)), Q_GRID)
    for a, b in zip(by_n, by_q):
        assert a.gamma_star == pytest.approx(b.gamma_star, abs=2e-6)  # optimizer tol
        assert a.aoi_at_star == pytest.approx(b.aoi_at_star, rel=1e-10)


def test_random_points_against_fine_grid():
    rng = np.random.default_rng(77)
    for _ in range(5):
        n = int(rng.integers(1, 4))
        p = SystemParams(rng.uniform(0.05, 1.0), rng.uniform(0.1, 20.0, n), rng.uniform(0, 0.9))
        res = optimize_threshold(p)
        g_grid, f_grid = brute_force(p)
        assert abs(res.gamma_star - g_grid) <= 1e-3 or abs(res.aoi_star - f_grid) <= 1e-8
        assert res.aoi_star <= res.aoi_zero
