"""Figure presets and the analytic-versus-simulation comparison harness."""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .analytic import maf_aoi
from .core import SystemParams
from .optimize import optimize_threshold, sweep_n, sweep_q
from .sim import SimConfig, run_epoch_sim, run_event_sim

LAMBDA_E = 0.1
FIG_LAMBDA_D = (0.1, 1.0, 10.0)
FIG_Q = tuple(round(0.05 * k, 2) for k in range(19))  # 0.00 .. 0.90
FIG5_Q = (0.0, 0.1, 0.3, 0.5)
FIG5_N = tuple(range(1, 11))
FIG5_LAMBDA_D = 10.0

FIGURES = ("fig3", "fig4", "fig5")


@dataclass(frozen=True)
class FigureSeries:
    label: str
    x: list[float]
    y: list[float]


def figure_rows(figure: str, lambda_e: float = LAMBDA_E, lambda_d=None, q_list=None, n_list=None):
    """Sweep rows for a figure preset, as ``(series_label, row)`` pairs.

    ``fig3``/``fig4`` sweep q for each data rate; ``fig5`` sweeps the number
    of sources for each q in a symmetric system. Any list argument overrides
    the preset.
    """
    if figure in ("fig3", "fig4"):
        rates = FIG_LAMBDA_D if lambda_d is None else lambda_d
        qs = FIG_Q if q_list is None else q_list
        out = []
        for ld in rates:
            template = SystemParams(lambda_e, (ld,), 0.0)
            out.extend((f"lambda_d={ld:g}", row) for row in sweep_q(template, qs))
        return out
    if figure == "fig5":
        ld = FIG5_LAMBDA_D if lambda_d is None else lambda_d[0]
        qs = FIG5_Q if q_list is None else q_list
        ns = FIG5_N if n_list is None else n_list
        rows = sweep_n(lambda_e, ld, qs, ns)
        return [(f"q={row.params.q:g}", row) for row in rows]
    raise ValueError(f"unknown figure {figure!r}; choose from {', '.join(FIGURES)}")


def figure_series(figure: str, labelled_rows) -> list[FigureSeries]:
    """Group rows into plottable series (x = q or N; y = gamma* or gain)."""
    series: dict[str, FigureSeries] = {}
    for label, row in labelled_rows:
        s = series.setdefault(label, FigureSeries(label, [], []))
        if figure == "fig5":
            s.x.append(row.params.n)
        else:
            s.x.append(row.params.q)
        s.y.append(row.gain_percent if figure == "fig4" else row.gamma_star)
    return list(series.values())


# -- verification grid --------------------------------------------------------

@dataclass(frozen=True)
class GridPoint:
    lambda_d: tuple[float, ...]
    q: float
    gamma: float | str  # a number or "opt"


# Spans N in {1, 2, 4}, q in {0, 0.2, 0.5}, gamma in {0, gamma*} and
# per-source rates drawn from {1, 10}.
DEFAULT_GRID = (
    GridPoint((10.0,), 0.0, 0.0),
    GridPoint((10.0,), 0.0, "opt"),
    GridPoint((1.0,), 0.2, "opt"),
    GridPoint((1.0,), 0.5, 0.0),
    GridPoint((1.0, 10.0), 0.0, 0.0),
    GridPoint((1.0, 10.0), 0.2, "opt"),
    GridPoint((10.0, 10.0), 0.0, "opt"),
    GridPoint((10.0, 1.0), 0.5, 0.0),
    GridPoint((1.0, 10.0, 1.0, 10.0), 0.0, "opt"),
    GridPoint((10.0, 10.0, 10.0, 10.0), 0.2, 0.0),
    GridPoint((1.0, 10.0, 1.0, 10.0), 0.5, "opt"),
    GridPoint((10.0, 1.0, 10.0, 1.0), 0.2, "opt"),
)


@dataclass(frozen=True)
class CompareRow:
    point: int
    params: SystemParams
    gamma: float
    analytic: float
    simulated: float
    stderr: float

    @property
    def z(self) -> float:
        return (self.simulated - self.analytic) / self.stderr


def resolve_gamma(params: SystemParams, gamma) -> float:
    if isinstance(gamma, str):
        if gamma.strip().lower() in ("opt", "star", "gamma*"):
            return optimize_threshold(params, "maf").gamma_star
        gamma = float(gamma)
    return float(gamma)


def _compare_one(args) -> CompareRow:
    idx, params, gamma, epochs, seed, warmup, batches, epoch_mode, perturb = args
    config = SimConfig(params, gamma, seed=seed, epochs=epochs, warmup_epochs=warmup, batch_count=batches)
    report = run_epoch_sim(config) if (epoch_mode and params.n == 1) else run_event_sim(config)
    analytic = maf_aoi(params, gamma).value + perturb
    return CompareRow(idx, params, gamma, float(analytic), report.collective_avg_aoi, report.stderr_aoi)


def compare_grid(
    points=DEFAULT_GRID,
    lambda_e: float = LAMBDA_E,
    epochs: int = 100_000,
    seed: int = 0,
    warmup: int = 100,
    batches: int = 30,
    epoch_mode: bool = False,
    perturb: float = 0.0,
    workers: int = 1,
) -> list[CompareRow]:
    """Simulate every grid point and pair it with the closed-form AoI.

    Point ``k`` (numbered from 1) uses seed ``seed + k - 1``. ``perturb`` is
    added to each analytic value; it only exists to check that the harness
    can fail.
    """
    jobs = []
    for k, pt in enumerate(points):
        params = SystemParams(lambda_e, pt.lambda_d, pt.q)
        gamma = resolve_gamma(params, pt.gamma)
        jobs.append((k + 1, params, gamma, epochs, seed + k, warmup, batches, epoch_mode, perturb))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_compare_one, jobs))
    return [_compare_one(job) for job in jobs]


def max_abs_z(rows) -> float:
    return float(np.max(np.abs([r.z for r in rows])))

