import math

import numpy as np
import pytest

from ehaoi.analytic import mean_w, single_source_aoi, symmetric_maf_aoi
from ehaoi.core import (
    EmptySamples,
    InvalidConfig,
    NonConvergence,
    RequiresSingleSource,
    SystemParams,
)
from ehaoi.sim import SimConfig, empirical_cdf, run_epoch_sim, run_event_sim, write_epoch_log


def cfg(lambda_d, q=0.0, gamma=0.0, seed=0, epochs=20_000, lambda_e=0.1, **kw):
    return SimConfig(SystemParams(lambda_e, lambda_d, q), gamma, seed=seed, epochs=epochs, **kw)


@pytest.fixture(scope="module")
def traced():
    return run_event_sim(cfg((1.0, 10.0, 3.0), q=0.3, gamma=2.0, seed=5, epochs=3000), trace=True)


@pytest.mark.slow
def test_event_sim_zero_wait_single_source():
    rep = run_event_sim(cfg((1.0,), seed=42, epochs=10**6))
    target = single_source_aoi(SystemParams(0.1, (1.0,), 0.0), 0.0).value
    assert target == pytest.approx(10.754, abs=1e-3)
    assert abs(rep.collective_avg_aoi - target) <= 3 * rep.stderr_aoi


def test_event_sim_symmetric_two_sources():
    rep = run_event_sim(cfg((10.0, 10.0), q=0.1, gamma=0.5, seed=7, epochs=100_000))
    target = symmetric_maf_aoi(0.1, 10.0, 2, 0.5, 0.1).value
    assert abs(rep.collective_avg_aoi - target) <= 3 * rep.stderr_aoi


def test_threshold_spaces_attempts():
    rep = run_event_sim(cfg((3.0,), q=0.4, gamma=5.0, seed=2, epochs=5000), trace=True)
    times = np.array([row[0] for row in rep.trace])
    assert np.all(np.diff(times) >= 5.0 - 1e-9)
    log = rep.epoch_log[0]
    assert np.all(log["length"] >= 5.0 * log["attempts"] - 1e-9)


def test_epoch_and_event_sims_agree():
    c = cfg((4.0,), q=0.25, gamma=3.0, seed=9, epochs=100_000)
    a, b = run_event_sim(c), run_epoch_sim(c)
    combined = math.hypot(a.stderr_aoi, b.stderr_aoi)
    assert abs(a.collective_avg_aoi - b.collective_avg_aoi) <= 3 * combined


def test_epoch_sim_no_erasures_single_attempts():
    rep = run_epoch_sim(cfg((10.0,), q=0.0, gamma=1.0, epochs=5000))
    assert np.all(rep.epoch_log[0]["attempts"] == 1)


def test_epoch_sim_fresh_data_limit():
    q = 0.2
    rep = run_epoch_sim(cfg((1e4,), q=q, gamma=0.0, seed=4, epochs=200_000))
    log = rep.epoch_log[0]
    assert np.mean(rep.delta_samples[0]) < 1e-3
    expected = 10.0 / (1 - q)  # mean energy wait over a geometric number of attempts
    se = log["length"].std() / math.sqrt(len(log))
    assert abs(log["length"].mean() - expected) <= 3 * se + 1e-3


def test_epoch_sim_requires_single_source():
    with pytest.raises(RequiresSingleSource):
        run_epoch_sim(cfg((1.0, 2.0)))


def test_horizon_mode():
    for run in (run_event_sim, run_epoch_sim):
        c = SimConfig(SystemParams(0.5, (2.0,), 0.1), 1.0, seed=3, horizon=20_000.0)
        rep = run(c)
        assert rep.sim_horizon == 20_000.0
        total = rep.epoch_log[0]["length"].sum()
        assert 0 < total < 20_000.0
        assert rep.epochs_completed[0] > 1000


def test_non_convergence():
    with pytest.raises(NonConvergence):
        run_event_sim(SimConfig(SystemParams(0.1, (1.0,), 0.0), 0.0, horizon=5.0))


@pytest.mark.parametrize(
    "kw",
    [
        dict(epochs=None),
        dict(epochs=10, horizon=10.0),
        dict(epochs=0),
        dict(epochs=10, batch_count=1),
        dict(epochs=10, warmup_epochs=-1),
    ],
)
def test_invalid_config(kw):
    with pytest.raises(InvalidConfig):
        SimConfig(SystemParams(0.1, (1.0,), 0.0), **kw)


# -- invariants -----------------------------------------------------------------

def test_determinism():
    c = cfg((1.0, 10.0), q=0.2, gamma=0.5, seed=123, epochs=4000)
    a, b = run_event_sim(c), run_event_sim(c)
    assert a.per_source_avg_aoi == b.per_source_avg_aoi
    assert a.stderr_aoi == b.stderr_aoi
    for j in a.epoch_log:
        assert a.epoch_log[j].tobytes() == b.epoch_log[j].tobytes()
    c1 = cfg((10.0,), q=0.2, gamma=0.5, seed=123, epochs=4000)
    assert run_epoch_sim(c1).epoch_log[0].tobytes() == run_epoch_sim(c1).epoch_log[0].tobytes()


def test_causality(traced):
    prev = 0.0
    for t, j, e_t, d_t, packet, _ in traced.trace:
        # one energy unit and one admitted packet arrived since the previous attempt
        assert prev < e_t <= t
        assert prev < d_t <= packet <= t
        prev = t


def test_maf_admission_and_order(traced):
    n = 3
    u = [0.0] * n
    served = []
    for t, j, e_t, d_t, packet, ok in traced.trace:
        ages = [t - x for x in u]
        assert j == int(np.argmax(ages))  # ties go to the lowest index
        if ok:
            u[j] = packet
            served.append(j)
    assert served[: 3 * n] == [0, 1, 2] * 3
    assert all(b == (a + 1) % n for a, b in zip(served, served[1:]))


def test_area_identity(traced):
    for log in traced.epoch_log.values():
        expected = log["delta_start"] * log["length"] + 0.5 * log["length"] ** 2
        np.testing.assert_allclose(log["area"], expected, rtol=1e-10, atol=0)


def test_success_rate():
    q = 0.35
    rep = run_event_sim(cfg((2.0, 5.0), q=q, gamma=1.0, seed=8, epochs=30_000))
    p_hat = rep.successes_total / rep.attempts_total
    se = math.sqrt(p_hat * (1 - p_hat) / rep.attempts_total)
    assert abs(p_hat - (1 - q)) <= 3 * se


def test_mean_epoch_length():
    q, g, rates = 0.2, 1.5, (3.0, 3.0, 3.0)
    rep = run_event_sim(cfg(rates, q=q, gamma=g, seed=12, epochs=30_000))
    expected = len(rates) * mean_w(0.1, 3.0, g) / (1 - q)
    for log in rep.epoch_log.values():
        se = log["length"].std() / math.sqrt(len(log))
        assert abs(log["length"].mean() - expected) <= 3 * se


def test_energy_overflow_is_counted():
    rep = run_event_sim(cfg((0.5,), gamma=20.0, lambda_e=1.0, epochs=2000))
    # roughly 20 units arrive per 20-unit wait while only one can be stored
    assert rep.energy_dropped > 10 * rep.attempts_total


def test_report_shape():
    rep = run_event_sim(cfg((1.0, 10.0), seed=1, epochs=500, warmup_epochs=50))
    assert rep.epochs_completed == [500, 500]
    assert rep.collective_avg_aoi == pytest.approx(np.mean(rep.per_source_avg_aoi), rel=1e-15)
    assert all(np.all(d >= 0) for d in rep.delta_samples)
    assert rep.seed == 1


# -- empirical CDF and epoch log ----------------------------------------------------

def test_empirical_cdf_counts():
    assert empirical_cdf([0, 1, 2], 1) == pytest.approx(2 / 3)
    assert empirical_cdf([0.3, 5.0, 2.0], 5.0) == 1.0
    assert empirical_cdf([0.3, 5.0, 2.0], 7.0) == 1.0
    np.testing.assert_allclose(empirical_cdf([0, 1, 2], np.array([-1, 0, 1.5])), [0, 1 / 3, 2 / 3])
    with pytest.raises(EmptySamples):
        empirical_cdf([], 0.0)


def test_epoch_log_dump(tmp_path):
    rep = run_event_sim(cfg((1.0, 10.0), seed=1, epochs=50))
    path = write_epoch_log(rep, tmp_path / "epochs.csv")
    lines = path.read_text().splitlines()
    assert lines[0] == "source,delta_start,length,area,attempts"
    assert len(lines) == 1 + 100
    first = lines[1].split(",")
    assert first[0] == "1" and int(first[4]) >= 1
    assert {line.split(",")[0] for line in lines[1:]} == {"1", "2"}
