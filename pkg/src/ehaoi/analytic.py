"""Closed-form AoI results for threshold waiting and maximum-age-first scheduling.

Every single-source function takes plain rates and a threshold ``gamma`` and
broadcasts over numpy arrays, so the optimizer can evaluate whole grids at once.
Formulas are written term by term rather than simplified; exponentials that
underflow simply drop their terms, which is the correct limit.

Notation: ``e ~ Exp(lambda_e)`` and ``d ~ Exp(lambda_d)`` are the times from the
previous attempt until the next energy and data arrivals, and the attempt
fires after ``w(max(e, d)) = max(gamma, e, d)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import EpochMoments, NegativeDelta, SystemParams

__all__ = [
    "AoiValue",
    "cdf_delta",
    "cdf_delta_oracle",
    "mean_delta",
    "mean_w",
    "mean_w_sq",
    "epoch_moments",
    "single_source_aoi",
    "maf_aoi",
    "symmetric_maf_aoi",
    "percentage_gain",
]


@dataclass(frozen=True)
class AoiValue:
    """Long-term average AoI split into its two additive parts.

    ``mean_delta_avg`` is the average starting AoI of an epoch (averaged over
    sources) and ``second_order_term`` is ``E[L^2] / (2 E[L])``.
    """

    mean_delta_avg: float | np.ndarray
    second_order_term: float | np.ndarray

    @property
    def value(self):
        return self.mean_delta_avg + self.second_order_term

    def __float__(self):
        return float(self.value)


def _check_delta(delta):
    delta = np.asarray(delta, dtype=float)
    if np.any(delta < 0) or np.any(np.isnan(delta)):
        raise NegativeDelta("delta must be >= 0")
    return delta


def cdf_delta(lambda_e, lambda_d, gamma, delta):
    """CDF of the starting AoI of an epoch under a ``gamma``-threshold policy.

    Right-continuous; at ``delta = 0`` it returns the mass of the atom at zero
    (the delivered packet arrived exactly at the attempt instant).
    """
    delta = _check_delta(delta)
    ratio = lambda_d / (lambda_e + lambda_d)
    inner = 1.0 - np.exp(-lambda_d * np.maximum(gamma - delta, 0.0)) * (
        1.0 - ratio * np.exp(-lambda_e * np.maximum(gamma, delta))
    )
    out = 1.0 - np.exp(-lambda_d * delta) * inner
    return out if out.ndim else float(out)


def cdf_delta_oracle(lambda_e, lambda_d, gamma, delta, samples=100_000, seed=0, wait=None):
    """Monte Carlo estimate of the starting-AoI CDF for an arbitrary waiting function.

    Uses the general identity ``F(delta) = 1 - exp(-lambda_d delta) P(w(max(e, d)) - d > delta)``
    with the probability estimated from ``samples`` draws of ``(e, d)``. The
    inequality is strict so that the atom at zero is included at ``delta = 0``.

    Parameters
    ----------
    wait : callable, optional
        Waiting function ``w(t) >= t`` applied elementwise. Defaults to the
        threshold rule ``max(t, gamma)``.

    Returns
    -------
    estimate, stderr : float
        The stderr is binomial, floored at one pseudo-count so a degenerate
        sample never reports zero uncertainty.
    """
    if samples < 10_000:
        raise ValueError("samples must be >= 1e4")
    delta = float(_check_delta(delta))
    rng = np.random.default_rng(seed)
    e = rng.exponential(1.0 / lambda_e, samples)
    d = rng.exponential(1.0 / lambda_d, samples)
    t = np.maximum(e, d)
    w = np.maximum(t, gamma) if wait is None else np.asarray(wait(t), dtype=float)
    p = np.count_nonzero(w - d > delta) / samples
    scale = np.exp(-lambda_d * delta)
    se = scale * np.sqrt(max(p * (1.0 - p), 1.0 / samples) / samples)
    return float(1.0 - scale * p), float(se)


def mean_delta(lambda_e, lambda_d, gamma):
    """Average starting AoI of an epoch."""
    s = lambda_e + lambda_d
    t1 = (1.0 - np.exp(-lambda_d * gamma)) / lambda_d
    t2 = -gamma * np.exp(-lambda_d * gamma) * (1.0 - lambda_d / s * np.exp(-lambda_e * gamma))
    t3 = lambda_d / s**2 * np.exp(-s * gamma)
    return t1 + t2 + t3


def mean_w(lambda_e, lambda_d, gamma):
    """First moment of the per-attempt wait ``max(gamma, e, d)``."""
    le, ld, g = lambda_e, lambda_d, gamma
    s = le + ld
    ed, ee, es = np.exp(-ld * g), np.exp(-le * g), np.exp(-s * g)
    t1 = g * (1.0 - ed) * (1.0 - ee)
    t2 = (ld * g + 1.0) / ld * ed * (1.0 - ee)
    t3 = (le * g + 1.0) / le * ee * (1.0 - ed)
    t4 = ld * (le * s * g + 2.0 * le + ld) / (le * s**2) * es
    t5 = le * (ld * s * g + 2.0 * ld + le) / (ld * s**2) * es
    return t1 + t2 + t3 + t4 + t5


def mean_w_sq(lambda_e, lambda_d, gamma):
    """Second moment of the per-attempt wait ``max(gamma, e, d)``."""
    le, ld, g = lambda_e, lambda_d, gamma
    s = le + ld
    ed, ee, es = np.exp(-ld * g), np.exp(-le * g), np.exp(-s * g)
    t1 = g**2 * (1.0 - ed) * (1.0 - ee)
    t2 = (ld**2 * g**2 + 2.0 * ld * g + 2.0) / ld**2 * ed * (1.0 - ee)
    t3 = (le**2 * g**2 + 2.0 * le * g + 2.0) / le**2 * ee * (1.0 - ed)
    t4 = (
        ld
        * (le**2 * s**2 * g**2 + 2.0 * le * s * (2.0 * le + ld) * g + 6.0 * le**2 + 6.0 * le * ld + 2.0 * ld**2)
        / (le**2 * s**3)
        * es
    )
    t5 = (
        le
        * (ld**2 * s**2 * g**2 + 2.0 * ld * s * (2.0 * ld + le) * g + 6.0 * ld**2 + 6.0 * le * ld + 2.0 * le**2)
        / (ld**2 * s**3)
        * es
    )
    return t1 + t2 + t3 + t4 + t5


def epoch_moments(lambda_e, lambda_d, gamma, q) -> EpochMoments:
    """Epoch-length moments via Wald's identity with a geometric attempt count."""
    w1 = mean_w(lambda_e, lambda_d, gamma)
    w2 = mean_w_sq(lambda_e, lambda_d, gamma)
    return EpochMoments(
        mean_w=w1,
        mean_w_sq=w2,
        mean_L=w1 / (1.0 - q),
        mean_L_sq=w2 / (1.0 - q) + 2.0 * q * w1**2 / (1.0 - q) ** 2,
        mean_delta=mean_delta(lambda_e, lambda_d, gamma),
    )


def single_source_aoi(params: SystemParams, gamma, source: int = 0) -> AoiValue:
    """Long-term average AoI of one source served alone."""
    m = epoch_moments(params.lambda_e, params.lambda_d[source], gamma, params.q)
    return AoiValue(m.mean_delta, m.mean_L_sq / (2.0 * m.mean_L))


def maf_aoi(params: SystemParams, gamma) -> AoiValue:
    """Collective long-term average AoI under maximum-age-first scheduling.

    Each source uses its own data rate in the per-attempt moments; all sources
    share the same threshold.
    """
    q = params.q
    le = params.lambda_e
    deltas = [mean_delta(le, ld, gamma) for ld in params.lambda_d]
    w1 = [mean_w(le, ld, gamma) for ld in params.lambda_d]
    w2 = [mean_w_sq(le, ld, gamma) for ld in params.lambda_d]

    sum_w1 = sum(w1)
    second = sum(w2) / (2.0 * sum_w1)
    second = second + q * sum(w * w for w in w1) / ((1.0 - q) * sum_w1)
    cross = 0.0
    for a in range(1, len(w1)):
        for b in range(a):
            cross = cross + w1[a] * w1[b]
    second = second + cross / ((1.0 - q) * sum_w1)
    return AoiValue(sum(deltas) / params.n, second)


def symmetric_maf_aoi(lambda_e, lambda_d, n, gamma, q) -> AoiValue:
    """Maximum-age-first AoI when all ``n`` sources share one data rate."""
    w1 = mean_w(lambda_e, lambda_d, gamma)
    w2 = mean_w_sq(lambda_e, lambda_d, gamma)
    second = w2 / (2.0 * w1) + ((q + (n - 1) / 2.0) / (1.0 - q)) * w1
    return AoiValue(mean_delta(lambda_e, lambda_d, gamma), second)


def percentage_gain(params: SystemParams, gamma_star) -> float:
    """Relative AoI reduction (in percent) of ``gamma_star`` over zero-wait."""
    at_star = maf_aoi(params, gamma_star).value
    at_zero = maf_aoi(params, 0.0).value
    return float((1.0 - at_star / at_zero) * 100.0)
