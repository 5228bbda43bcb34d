"""Search for the AoI-minimizing waiting threshold."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np

from .analytic import maf_aoi, single_source_aoi, symmetric_maf_aoi
from .core import DegenerateObjective, InvalidConfig, SweepRow, SystemParams

INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0
ZERO_CLAMP_TOL = 1e-12


@dataclass(frozen=True)
class OptResult:
    gamma_star: float
    aoi_star: float
    aoi_zero: float
    bracket: tuple[float, float]
    evaluations: int


def make_objective(params: SystemParams, kind: str = "maf") -> Callable:
    """Vectorized ``gamma -> AoI`` for one of ``maf``, ``single`` or ``symmetric``."""
    if kind == "maf":
        return lambda g: maf_aoi(params, g).value
    if kind == "single":
        if params.n != 1:
            raise InvalidConfig("single-source objective needs exactly one source")
        return lambda g: single_source_aoi(params, g).value
    if kind == "symmetric":
        if not params.is_symmetric:
            raise InvalidConfig("symmetric objective needs equal data rates")
        ld, n, le, q = params.lambda_d[0], params.n, params.lambda_e, params.q
        return lambda g: symmetric_maf_aoi(le, ld, n, g, q).value
    raise InvalidConfig(f"unknown objective {kind!r}")


def default_gamma_max(params: SystemParams) -> float:
    return 10.0 * (1.0 / params.lambda_e + 1.0 / min(params.lambda_d))


def golden_section(f, lo, hi, tol=1e-6):
    """Minimize a scalar function on ``[lo, hi]``; returns ``(x, f(x), evaluations)``."""
    a, b = float(lo), float(hi)
    c = b - INV_PHI * (b - a)
    d = a + INV_PHI * (b - a)
    fc, fd = f(c), f(d)
    evals = 2
    while b - a > tol:
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - INV_PHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + INV_PHI * (b - a)
            fd = f(d)
        evals += 1
    x = 0.5 * (a + b)
    fx = f(x)
    return x, fx, evals + 1


def optimize_threshold(
    params: SystemParams,
    objective: str | Callable = "maf",
    n_grid: int = 512,
    tol: float = 1e-6,
    gamma_max: float | None = None,
    widen_retries: int = 2,
) -> OptResult:
    """Find the threshold minimizing the analytic AoI.

    A coarse grid on ``[0, gamma_max]`` locates the best cell, golden-section
    search refines it to ``tol``, and the zero-wait policy wins any tie. If the
    objective is not increasing over the last tenth of the grid the range is
    widened fourfold, at most ``widen_retries`` times.
    """
    f = make_objective(params, objective) if isinstance(objective, str) else objective
    hi = default_gamma_max(params) if gamma_max is None else float(gamma_max)
    evals = 0
    for attempt in range(widen_retries + 1):
        grid = np.linspace(0.0, hi, n_grid)
        values = np.asarray(f(grid), dtype=float)
        evals += n_grid
        if not np.all(np.isfinite(values)):
            raise DegenerateObjective(f"objective is not finite on [0, {hi}]")
        tail = values[-max(2, n_grid // 10) :]
        if np.all(np.diff(tail) > 0) or attempt == widen_retries:
            break
        hi *= 4.0

    i = int(np.argmin(values))
    lo_b, hi_b = grid[max(i - 1, 0)], grid[min(i + 1, n_grid - 1)]
    scalar = lambda g: float(f(g))
    g_star, f_star, n_ev = golden_section(scalar, lo_b, hi_b, tol)
    evals += n_ev
    if values[i] < f_star:
        g_star, f_star = float(grid[i]), float(values[i])

    f_zero = float(values[0])
    if f_zero <= f_star + ZERO_CLAMP_TOL:
        g_star, f_star = 0.0, f_zero
        lo_b, hi_b = grid[0], grid[1]
    if not math.isfinite(f_star):
        raise DegenerateObjective("objective is not finite at the optimum")
    return OptResult(g_star, f_star, f_zero, (float(lo_b), float(hi_b)), evals)


def _row(params: SystemParams, objective: str, **kw) -> SweepRow:
    res = optimize_threshold(params, objective, **kw)
    gain = (1.0 - res.aoi_star / res.aoi_zero) * 100.0
    return SweepRow(params, res.gamma_star, res.aoi_star, res.aoi_zero, gain)


def sweep_q(params: SystemParams, q_list: Iterable[float], **kw) -> list[SweepRow]:
    """Optimal threshold and gain for each erasure probability, other params fixed."""
    return [_row(params.with_q(q), "maf", **kw) for q in q_list]


def sweep_n(
    lambda_e: float,
    lambda_d: float,
    q_list: Sequence[float],
    n_list: Sequence[int],
    **kw,
) -> list[SweepRow]:
    """Symmetric-system sweep over the ``n_list x q_list`` grid (``n`` varies slowest)."""
    return [
        _row(SystemParams.symmetric(lambda_e, lambda_d, n, q), "symmetric", **kw)
        for n in n_list
        for q in q_list
    ]
