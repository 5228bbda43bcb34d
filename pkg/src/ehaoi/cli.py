"""Command-line interface: ``ehaoi {eval,simulate,optimize,sweep,compare}``.

Model flags may also come from a flat ``key=value`` file given with
``--config``; keys mirror the long flag names (``lambda-e`` or ``lambda_e``)
and flags given on the command line win.

Exit codes: 0 ok, 1 verification failed, 2 invalid input, 3 simulation did
not converge.
"""

from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path

from . import __version__
from .analytic import maf_aoi
from .core import (
    InvalidConfig,
    ModelError,
    NonConvergence,
    SystemParams,
    ThresholdPolicy,
    format_kv,
    parse_float_list,
    parse_kv,
)
from .experiments import (
    DEFAULT_GRID,
    FIGURES,
    GridPoint,
    compare_grid,
    figure_rows,
    figure_series,
    max_abs_z,
)
from .optimize import optimize_threshold
from .sim import SimConfig, run_epoch_sim, run_event_sim, write_epoch_log
from .svgplot import line_chart

EXIT_OK, EXIT_VERIFY, EXIT_INPUT, EXIT_NONCONV = 0, 1, 2, 3
Z_LIMIT = 4.0

# dest -> default, applied after config-file merging
DEFAULTS = {
    "lambda_e": "0.1",
    "lambda_d": None,
    "q": "0",
    "gamma": "0",
    "n": None,
    "seed": "0",
    "epochs": None,
    "horizon": None,
    "warmup": "100",
    "batches": "30",
    "out_dir": "ehaoi-out",
    "dump_epochs": None,
    "epoch_mode": None,
    "figure": None,
    "objective": "maf",
    "q_list": None,
    "n_list": None,
    "gamma_list": None,
    "workers": "1",
}

EVAL_COLUMNS = "lambda_e,lambda_d,n,q,gamma,aoi,mean_delta_avg,second_order_term"
SIM_COLUMNS = "source,lambda_d,epochs,avg_aoi,stderr,mean_delta,attempts"  # post-warmup only
OPT_COLUMNS = "lambda_e,lambda_d,n,q,gamma_star,aoi_star,aoi_zero,gain_percent,evaluations"
SWEEP_COLUMNS = "figure,series,lambda_e,lambda_d,n,q,gamma_star,aoi_star,aoi_zero,gain_percent"
COMPARE_COLUMNS = "point,lambda_e,lambda_d,n,q,gamma,analytic,simulated,stderr,z"


class UsageError(Exception):
    def __init__(self, flag, message):
        super().__init__(f"{flag}: {message}")


def fmt(x) -> str:
    """12 significant digits, as used in every CSV output."""
    return f"{float(x):.12g}"


def fmt_rates(rates) -> str:
    # ';' keeps the list inside one comma-delimited CSV field
    return ";".join(fmt(r) for r in rates)


def _flag(dest: str) -> str:
    return "--" + dest.replace("_", "-")


def _num(ns, dest, kind=float):
    raw = getattr(ns, dest)
    if raw is None:
        return None
    try:
        return kind(raw)
    except ValueError:
        raise UsageError(_flag(dest), f"cannot parse {raw!r}") from None


def _bool(raw) -> bool:
    if isinstance(raw, bool) or raw is None:
        return bool(raw)
    return str(raw).strip().lower() in ("1", "true", "yes", "on")


def _merge_config(ns):
    file_values = {}
    if ns.config:
        try:
            file_values = parse_kv(Path(ns.config).read_text())
        except OSError as exc:
            raise UsageError("--config", str(exc)) from None
        except InvalidConfig as exc:
            raise UsageError("--config", str(exc)) from None
    for dest, default in DEFAULTS.items():
        if not hasattr(ns, dest):
            continue
        if getattr(ns, dest) in (None, False) and dest in file_values:
            setattr(ns, dest, file_values[dest])
        if getattr(ns, dest) is None:
            setattr(ns, dest, default)
    if getattr(ns, "epochs", None) is None and getattr(ns, "horizon", None) is None and hasattr(ns, "epochs"):
        ns.epochs = "100000"


def _params(ns) -> SystemParams:
    if ns.lambda_d is None:
        raise UsageError("--lambda-d", "a data rate (or comma-separated list) is required")
    try:
        rates = parse_float_list(ns.lambda_d, "lambda_d")
    except ModelError as exc:
        raise UsageError("--lambda-d", str(exc)) from None
    n = _num(ns, "n", int)
    if n is not None:
        if n < 1:
            raise UsageError("--n", "number of sources must be >= 1")
        if len(rates) == 1:
            rates = rates * n
        elif len(rates) != n:
            raise UsageError("--n", f"got {len(rates)} rates for {n} sources")
    return SystemParams(_num(ns, "lambda_e"), rates, _num(ns, "q"))


def _gamma(ns) -> float:
    return ThresholdPolicy(_num(ns, "gamma")).gamma


def _sim_config(ns, params, gamma) -> SimConfig:
    epochs = _num(ns, "epochs", int)
    horizon = _num(ns, "horizon")
    if epochs is not None and horizon is not None:
        raise UsageError("--epochs", "give either --epochs or --horizon, not both")
    return SimConfig(
        params,
        gamma,
        seed=_num(ns, "seed", int),
        epochs=epochs,
        horizon=horizon,
        warmup_epochs=_num(ns, "warmup", int),
        batch_count=_num(ns, "batches", int),
    )


class _Run:
    """Collects outputs and writes the manifest last."""

    def __init__(self, ns, command):
        self.ns = ns
        self.command = command
        self.out_dir = Path(ns.out_dir)
        self.out_dir.mkdir(parents=True, exist_ok=True)
        self.outputs: list[str] = []
        self.extra: list[tuple[str, object]] = []
        self.t0 = getattr(ns, "started", time.perf_counter())

    def write(self, name, text) -> Path:
        path = self.out_dir / name
        with path.open("w", newline="\n") as fh:
            fh.write(text)
        self.outputs.append(str(path))
        return path

    def add_output(self, path):
        self.outputs.append(str(path))

    def finish(self):
        items = [("command", self.command), ("version", __version__)]
        for dest in sorted(DEFAULTS):
            if hasattr(self.ns, dest) and getattr(self.ns, dest) not in (None, False):
                items.append((dest, getattr(self.ns, dest)))
        items.extend(self.extra)
        items.append(("outputs", ";".join(self.outputs)))
        items.append(("duration_s", f"{time.perf_counter() - self.t0:.3f}"))
        path = self.out_dir / f"{self.command}_manifest.txt"
        path.write_text(format_kv(items))


def cmd_eval(ns) -> int:
    params = _params(ns)
    gamma = _gamma(ns)
    value = maf_aoi(params, gamma)
    row = ",".join(
        [
            fmt(params.lambda_e),
            fmt_rates(params.lambda_d),
            str(params.n),
            fmt(params.q),
            fmt(gamma),
            fmt(value.value),
            fmt(value.mean_delta_avg),
            fmt(value.second_order_term),
        ]
    )
    text = EVAL_COLUMNS + "\n" + row + "\n"
    run = _Run(ns, "eval")
    run.write("eval.csv", text)
    sys.stdout.write(text)
    run.finish()
    return EXIT_OK


def cmd_simulate(ns) -> int:
    params = _params(ns)
    config = _sim_config(ns, params, _gamma(ns))
    use_epochs = _bool(ns.epoch_mode)
    if use_epochs and params.n != 1:
        raise UsageError("--epoch-mode", "epoch mode needs a single source")
    try:
        report = run_epoch_sim(config) if use_epochs else run_event_sim(config)
    except NonConvergence as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NONCONV

    lines = [SIM_COLUMNS]
    for j in range(params.n):
        deltas = report.delta_samples[j]
        lines.append(
            ",".join(
                [
                    str(j + 1),
                    fmt(params.lambda_d[j]),
                    str(report.epochs_completed[j]),
                    fmt(report.per_source_avg_aoi[j]),
                    fmt(report.per_source_stderr[j]),
                    fmt(deltas.mean()),
                    str(int(report.epoch_log[j]["attempts"].sum())),
                ]
            )
        )
    lines.append(
        ",".join(
            [
                "all",
                fmt_rates(params.lambda_d),
                str(sum(report.epochs_completed)),
                fmt(report.collective_avg_aoi),
                fmt(report.stderr_aoi),
                fmt(sum(d.sum() for d in report.delta_samples) / sum(report.epochs_completed)),
                str(sum(int(a["attempts"].sum()) for a in report.epoch_log.values())),
            ]
        )
    )
    text = "\n".join(lines) + "\n"
    run = _Run(ns, "simulate")
    run.write("simulate.csv", text)
    if ns.dump_epochs:
        run.add_output(write_epoch_log(report, ns.dump_epochs))
    run.extra += [
        ("mode", "epoch" if use_epochs else "event"),
        ("attempts_total", report.attempts_total),
        ("energy_dropped", report.energy_dropped),
        ("sim_horizon", fmt(report.sim_horizon)),
    ]
    sys.stdout.write(text)
    run.finish()
    return EXIT_OK


def cmd_optimize(ns) -> int:
    params = _params(ns)
    res = optimize_threshold(params, ns.objective)
    gain = (1.0 - res.aoi_star / res.aoi_zero) * 100.0
    row = ",".join(
        [
            fmt(params.lambda_e),
            fmt_rates(params.lambda_d),
            str(params.n),
            fmt(params.q),
            fmt(res.gamma_star),
            fmt(res.aoi_star),
            fmt(res.aoi_zero),
            fmt(gain),
            str(res.evaluations),
        ]
    )
    text = OPT_COLUMNS + "\n" + row + "\n"
    run = _Run(ns, "optimize")
    run.write("optimize.csv", text)
    sys.stdout.write(text)
    run.finish()
    return EXIT_OK


_AXES = {
    "fig3": ("erasure probability q", "optimal threshold gamma*"),
    "fig4": ("erasure probability q", "percentage gain (%)"),
    "fig5": ("number of sources N", "optimal threshold gamma*"),
}


def cmd_sweep(ns) -> int:
    figure = ns.figure
    q_list = None if ns.q_list is None else _list(ns, "q_list")
    n_list = None if ns.n_list is None else [int(x) for x in _list(ns, "n_list")]
    rates = None if ns.lambda_d is None else _list(ns, "lambda_d")
    if figure is None:
        figure = "fig5" if n_list is not None else "fig3"
    figures = FIGURES if figure == "all" else (figure,)
    if any(f not in FIGURES for f in figures):
        raise UsageError("--figure", f"choose from {', '.join(FIGURES)} or all")

    run = _Run(ns, "sweep")
    lambda_e = _num(ns, "lambda_e")
    out = [SWEEP_COLUMNS]
    for fig in figures:
        rows = figure_rows(fig, lambda_e, rates, q_list, n_list)
        for label, row in rows:
            p = row.params
            out.append(
                ",".join(
                    [
                        fig,
                        label,
                        fmt(p.lambda_e),
                        fmt_rates(p.lambda_d[:1]),
                        str(p.n),
                        fmt(p.q),
                        fmt(row.gamma_star),
                        fmt(row.aoi_at_star),
                        fmt(row.aoi_at_zero),
                        fmt(row.gain_percent),
                    ]
                )
            )
        xlabel, ylabel = _AXES[fig]
        svg = line_chart(figure_series(fig, rows), title=f"{fig} (lambda_e={lambda_e:g})", xlabel=xlabel, ylabel=ylabel)
        run.write(f"{fig}.svg", svg)
    text = "\n".join(out) + "\n"
    name = "sweep.csv" if len(figures) > 1 else f"{figures[0]}.csv"
    run.write(name, text)
    sys.stdout.write(text)
    run.finish()
    return EXIT_OK


def _list(ns, dest):
    try:
        return list(parse_float_list(getattr(ns, dest), dest))
    except ModelError as exc:
        raise UsageError(_flag(dest), str(exc)) from None


def cmd_compare(ns) -> int:
    lambda_e = _num(ns, "lambda_e")
    custom = any(getattr(ns, d) is not None for d in ("n_list", "q_list", "gamma_list"))
    if custom:
        pattern = _list(ns, "lambda_d") if ns.lambda_d is not None else [1.0, 10.0]
        ns_ = [int(x) for x in _list(ns, "n_list")] if ns.n_list is not None else [1]
        qs = _list(ns, "q_list") if ns.q_list is not None else [float(ns.q)]
        gammas = (
            [g.strip() for g in ns.gamma_list.split(",") if g.strip()]
            if ns.gamma_list is not None
            else ["0"]
        )
        points = [
            GridPoint(tuple(pattern[k % len(pattern)] for k in range(n)), q, g)
            for n in ns_
            for q in qs
            for g in gammas
        ]
        # surface bad values as input errors before any simulation starts
        for pt in points:
            SystemParams(lambda_e, pt.lambda_d, pt.q)
            if pt.gamma != "opt":
                try:
                    ThresholdPolicy(float(pt.gamma))
                except ValueError:
                    raise UsageError("--gamma-list", f"bad threshold {pt.gamma!r}") from None
    else:
        points = DEFAULT_GRID

    epochs = _num(ns, "epochs", int)
    if epochs is None:
        raise UsageError("--epochs", "compare needs an epoch count (not --horizon)")
    try:
        rows = compare_grid(
            points,
            lambda_e=lambda_e,
            epochs=epochs,
            seed=_num(ns, "seed", int),
            warmup=_num(ns, "warmup", int),
            batches=_num(ns, "batches", int),
            epoch_mode=_bool(ns.epoch_mode),
            perturb=float(ns.perturb),
            workers=_num(ns, "workers", int),
        )
    except NonConvergence as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NONCONV

    lines = [COMPARE_COLUMNS]
    for r in rows:
        p = r.params
        lines.append(
            ",".join(
                [
                    str(r.point),
                    fmt(p.lambda_e),
                    fmt_rates(p.lambda_d),
                    str(p.n),
                    fmt(p.q),
                    fmt(r.gamma),
                    fmt(r.analytic),
                    fmt(r.simulated),
                    fmt(r.stderr),
                    fmt(r.z),
                ]
            )
        )
    text = "\n".join(lines) + "\n"
    worst = max_abs_z(rows)
    verdict = "PASS" if worst <= Z_LIMIT else "FAIL"
    run = _Run(ns, "compare")
    run.write("compare.csv", text)
    run.extra += [("max_abs_z", fmt(worst)), ("verdict", verdict)]
    sys.stdout.write(text)
    print(f"max |z| = {worst:.3f} over {len(rows)} points (limit {Z_LIMIT:g}): {verdict}", file=sys.stderr)
    run.finish()
    return EXIT_OK if worst <= Z_LIMIT else EXIT_VERIFY


def _add_model_flags(p, gamma=True, sim=False):
    p.add_argument("--config", help="flat key=value file; flags override it")
    p.add_argument("--lambda-e", help="energy arrival rate (default 0.1)")
    p.add_argument("--lambda-d", help="data arrival rate(s), comma-separated, one per source")
    p.add_argument("--q", help="erasure probability in [0, 1) (default 0)")
    p.add_argument("--n", help="number of sources; replicates a single --lambda-d")
    if gamma:
        p.add_argument("--gamma", help="waiting threshold >= 0 (default 0)")
    if sim:
        p.add_argument("--seed", help="master seed (default 0)")
        stop = p.add_mutually_exclusive_group()
        stop.add_argument("--epochs", help="post-warmup epochs per source (default 100000)")
        stop.add_argument("--horizon", help="simulated time horizon instead of an epoch count")
        p.add_argument("--warmup", help="epochs discarded per source (default 100)")
        p.add_argument("--batches", help="batch count for batch-means error bars (default 30)")
        p.add_argument("--epoch-mode", action="store_true", default=None,
                       help="single source only: use the renewal-level epoch simulator")
    p.add_argument("--out-dir", help="directory for CSV/SVG/manifest outputs (default ehaoi-out)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ehaoi",
        description="Age of information with an energy-harvesting sensor, threshold waiting and MAF scheduling.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    raw = argparse.RawDescriptionHelpFormatter

    p = sub.add_parser("eval", help="closed-form collective AoI", formatter_class=raw,
                       epilog=f"CSV columns: {EVAL_COLUMNS}")
    _add_model_flags(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("simulate", help="event-driven simulation", formatter_class=raw,
                       epilog=f"CSV columns: {SIM_COLUMNS}\n(last row, source=all, is the collective average)\n"
                              "--dump-epochs columns: source,delta_start,length,area,attempts")
    _add_model_flags(p, sim=True)
    p.add_argument("--dump-epochs", help="write the per-epoch log to this CSV path")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("optimize", help="optimal threshold for one parameter point", formatter_class=raw,
                       epilog=f"CSV columns: {OPT_COLUMNS}")
    _add_model_flags(p, gamma=False)
    p.add_argument("--objective", choices=("maf", "single", "symmetric"), default=None)
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser("sweep", help="figure-reproduction sweeps (CSV + SVG)", formatter_class=raw,
                       epilog=f"CSV columns: {SWEEP_COLUMNS}\n"
                              "fig3: gamma* vs q, fig4: gain vs q (lambda_d in 0.1,1,10); "
                              "fig5: gamma* vs N (lambda_d=10, q in 0,0.1,0.3,0.5)")
    _add_model_flags(p, gamma=False)
    p.add_argument("--figure", help="fig3, fig4, fig5 or all")
    p.add_argument("--q-list", help="custom comma-separated q grid")
    p.add_argument("--n-list", help="custom comma-separated source counts (symmetric sweep)")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("compare", help="closed form vs simulation over a grid", formatter_class=raw,
                       epilog=f"CSV columns: {COMPARE_COLUMNS}\n"
                              f"exit 0 iff max |z| <= {Z_LIMIT:g}. Without grid flags the built-in "
                              "12-point grid is used;\n--lambda-d is then a per-source rate pattern "
                              "cycled to each N (default 1,10).")
    _add_model_flags(p, gamma=False, sim=True)
    p.add_argument("--n-list", help="source counts")
    p.add_argument("--q-list", help="erasure probabilities")
    p.add_argument("--gamma-list", help="thresholds; 'opt' means the optimized threshold")
    p.add_argument("--workers", help="parallel worker processes (default 1)")
    p.add_argument("--perturb", default="0", help=argparse.SUPPRESS)
    p.set_defaults(func=cmd_compare)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    ns = parser.parse_args(argv)
    ns.started = time.perf_counter()
    try:
        _merge_config(ns)
        return ns.func(ns)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except ModelError as exc:
        flag = _flag(exc.field) if exc.field else "input"
        print(f"error: {flag}: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
