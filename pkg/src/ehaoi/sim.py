"""Monte Carlo simulators for the shared energy-harvesting sensor.

Two simulators are provided:

* :func:`run_event_sim` follows the physical system: a unit battery that
  drops overflow energy, a one-packet buffer with preemption, maximum-age-first
  admission, i.i.d. erasures and per-source age integrals.
* :func:`run_epoch_sim` samples single-source epochs directly as geometric
  sums of waits; it is much faster and statistically equivalent for ``N = 1``.

Randomness comes from one stream per purpose (energy, erasures, each source's
data) spawned from the master seed, so runs are reproducible bit for bit.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .core import (
    EmptySamples,
    InvalidConfig,
    NonConvergence,
    RequiresSingleSource,
    SimReport,
    SystemParams,
    ThresholdPolicy,
)

log = logging.getLogger(__name__)

EPOCH_DTYPE = np.dtype(
    [
        ("delta_start", float),
        ("length", float),
        ("area", float),
        ("attempts", np.int64),
        ("delta_end", float),
    ]
)
EPOCH_LOG_COLUMNS = ("source", "delta_start", "length", "area", "attempts")

# stream slots in the spawned SeedSequence
_ENERGY, _ERASURE, _DATA0 = 0, 1, 2


@dataclass(frozen=True)
class SimConfig:
    """Simulation settings.

    Exactly one of ``epochs`` (post-warmup epochs per source) and ``horizon``
    (total simulated time) must be given.
    """

    params: SystemParams
    gamma: ThresholdPolicy = field(default_factory=ThresholdPolicy)
    seed: int = 0
    epochs: int | None = None
    horizon: float | None = None
    warmup_epochs: int = 100
    batch_count: int = 30

    def __post_init__(self):
        if not isinstance(self.gamma, ThresholdPolicy):
            object.__setattr__(self, "gamma", ThresholdPolicy(self.gamma))
        if (self.epochs is None) == (self.horizon is None):
            raise InvalidConfig("give exactly one of epochs or horizon", field="epochs")
        if self.epochs is not None and int(self.epochs) < 1:
            raise InvalidConfig(f"epochs must be positive, got {self.epochs}", field="epochs")
        if self.horizon is not None and not float(self.horizon) > 0:
            raise InvalidConfig(f"horizon must be positive, got {self.horizon}", field="horizon")
        if int(self.warmup_epochs) < 0:
            raise InvalidConfig("warmup must be >= 0", field="warmup")
        if int(self.batch_count) < 2:
            raise InvalidConfig("batches must be >= 2", field="batches")
        if int(self.seed) < 0:
            raise InvalidConfig("seed must be non-negative", field="seed")

    def streams(self, n_data: int) -> list[np.random.Generator]:
        children = np.random.SeedSequence(int(self.seed)).spawn(_DATA0 + n_data)
        return [np.random.default_rng(c) for c in children]


class _PoissonStream:
    """Arrival times of a Poisson process, drawn lazily in chunks.

    ``lo`` indexes the first arrival that has not been consumed or discarded.
    """

    def __init__(self, rate: float, rng: np.random.Generator, chunk: int = 4096):
        self.scale = 1.0 / rate
        self.rng = rng
        self.chunk = chunk
        self.times = np.cumsum(rng.exponential(self.scale, chunk))
        self.lo = 0

    def _cover(self, t: float):
        while self.times[-1] <= t:
            tail = self.times[-1] + np.cumsum(self.rng.exponential(self.scale, self.chunk))
            self.times = np.concatenate((self.times[self.lo :], tail))
            self.lo = 0

    def first_after(self, t: float) -> float:
        """Discard arrivals at or before ``t`` and return the next one."""
        self._cover(t)
        self.lo += int(np.searchsorted(self.times[self.lo :], t, side="right"))
        return float(self.times[self.lo])

    def take_until(self, t: float) -> tuple[int, float]:
        """Consume arrivals up to and including ``t``; return their count and the last one."""
        self._cover(t)
        k = self.lo + int(np.searchsorted(self.times[self.lo :], t, side="right"))
        count = k - self.lo
        last = float(self.times[k - 1]) if count else float("nan")
        self.lo = k
        return count, last


class _Coins:
    def __init__(self, rng: np.random.Generator, chunk: int = 8192):
        self.rng = rng
        self.chunk = chunk
        self.buf = rng.random(chunk)
        self.i = 0

    def draw(self) -> float:
        if self.i == self.chunk:
            self.buf = self.rng.random(self.chunk)
            self.i = 0
        x = self.buf[self.i]
        self.i += 1
        return x


def run_event_sim(config: SimConfig, trace: bool = False) -> SimReport:
    """Simulate the full sensor under maximum-age-first admission and threshold waiting.

    Between attempts the admitted source is the one with the largest AoI
    (lowest index on ties); it can only change at a successful delivery, which
    also empties the buffer. After each attempt the sensor waits for the first
    energy unit and the first admitted packet, then fires at
    ``max(previous_attempt + gamma, both_available)``. The freshest admitted
    packet in the window is sent; energy arriving to a full battery is dropped.

    With ``trace=True`` the report carries one tuple per attempt:
    ``(time, source, energy_arrival, data_arrival, packet_time, success)``.
    """
    p = config.params
    n = p.n
    gamma = config.gamma.gamma
    q = p.q
    rngs = config.streams(n)
    energy = _PoissonStream(p.lambda_e, rngs[_ENERGY])
    coins = _Coins(rngs[_ERASURE])
    data = [_PoissonStream(p.lambda_d[j], rngs[_DATA0 + j]) for j in range(n)]

    target = None if config.epochs is None else config.warmup_epochs + int(config.epochs)
    horizon = None if config.horizon is None else float(config.horizon)

    u = [0.0] * n  # generation time of the last delivered packet
    epoch_start = [0.0] * n
    delta_start = [0.0] * n
    area = [0.0] * n
    touched = [0.0] * n  # time up to which area[j] is integrated
    tries = [0] * n
    logs: list[list[tuple]] = [[] for _ in range(n)]
    done = 0
    attempts = successes = dropped = 0
    attempt_trace = [] if trace else None

    t_ref = 0.0
    j = 0
    while True:
        e_t = energy.first_after(t_ref)
        d_t = data[j].first_after(t_ref)
        gate = e_t if e_t > d_t else d_t
        t_a = gate if gate - t_ref >= gamma else t_ref + gamma
        if horizon is not None and t_a > horizon:
            break

        n_energy, _ = energy.take_until(t_a)
        _, packet = data[j].take_until(t_a)
        dropped += n_energy - 1

        area[j] += 0.5 * ((touched[j] - u[j]) + (t_a - u[j])) * (t_a - touched[j])
        touched[j] = t_a
        attempts += 1
        tries[j] += 1
        ok = coins.draw() >= q
        if attempt_trace is not None:
            attempt_trace.append((t_a, j, e_t, d_t, packet, ok))

        if ok:
            successes += 1
            new_delta = t_a - packet
            logs[j].append((delta_start[j], t_a - epoch_start[j], area[j], tries[j], new_delta))
            u[j] = packet
            delta_start[j] = new_delta
            epoch_start[j] = t_a
            area[j] = 0.0
            tries[j] = 0
            if target is not None and len(logs[j]) == target:
                done += 1
                if done == n:
                    break
            j = min(range(n), key=u.__getitem__)
        t_ref = t_a

    sim_time = horizon if horizon is not None else t_ref
    arrays = [np.array(rows, dtype=EPOCH_DTYPE) for rows in logs]
    report = _build_report(arrays, config, attempts, successes, sim_time)
    report.energy_dropped = dropped
    report.trace = attempt_trace
    return report


def _epoch_block(k, rng_e, rng_q, rng_d, lambda_e, lambda_d, gamma, q):
    attempts = rng_q.geometric(1.0 - q, k)
    total = int(attempts.sum())
    e = rng_e.exponential(1.0 / lambda_e, total)
    d = rng_d.exponential(1.0 / lambda_d, total)
    w = np.maximum(gamma, np.maximum(e, d))
    ends = np.cumsum(attempts)
    length = np.add.reduceat(w, ends - attempts)

    # final attempt: the packet sent is the newest of the Poisson arrivals on
    # [d, T]; given K arrivals after d, the newest sits at d + span * U**(1/K)
    t_final = w[ends - 1]
    first = d[ends - 1]
    span = t_final - first
    count = rng_d.poisson(lambda_d * span)
    uni = rng_d.random(k)
    newest = np.where(count > 0, first + span * uni ** (1.0 / np.maximum(count, 1)), first)
    return length, attempts, t_final - newest


def run_epoch_sim(config: SimConfig) -> SimReport:
    """Renewal-level simulation of a single source.

    Each epoch is a geometric number of attempts, each waiting
    ``max(gamma, e, d)``; the delivered packet's age is read off a sampled
    Poisson arrival stream inside the final window.
    """
    p = config.params
    if p.n != 1:
        raise RequiresSingleSource(f"epoch simulation needs one source, got {p.n}")
    rng_e, rng_q, rng_d = config.streams(1)
    args = (rng_e, rng_q, rng_d, p.lambda_e, p.lambda_d[0], config.gamma.gamma, p.q)

    if config.epochs is not None:
        length, attempts, delta_end = _epoch_block(config.warmup_epochs + int(config.epochs), *args)
    else:
        parts, elapsed = [], 0.0
        while elapsed <= config.horizon:
            part = _epoch_block(65536, *args)
            parts.append(part)
            elapsed += float(part[0].sum())
        length, attempts, delta_end = (np.concatenate(x) for x in zip(*parts))
        keep = int(np.searchsorted(np.cumsum(length), config.horizon, side="right"))
        length, attempts, delta_end = length[:keep], attempts[:keep], delta_end[:keep]

    delta_start = np.concatenate(([0.0], delta_end[:-1]))
    arr = np.empty(len(length), dtype=EPOCH_DTYPE)
    arr["delta_start"] = delta_start
    arr["length"] = length
    arr["area"] = delta_start * length + 0.5 * length**2
    arr["attempts"] = attempts
    arr["delta_end"] = delta_end
    sim_time = float(length.sum()) if config.horizon is None else float(config.horizon)
    return _build_report([arr], config, int(attempts.sum()), len(arr), sim_time)


def _build_report(arrays, config: SimConfig, attempts, successes, sim_time) -> SimReport:
    warm = config.warmup_epochs
    stop = None if config.epochs is None else warm + int(config.epochs)
    kept = [a[warm:stop] for a in arrays]
    for j, a in enumerate(kept):
        if len(a) == 0:
            raise NonConvergence(
                f"source {j + 1} completed no epochs after the {warm}-epoch warmup"
            )

    # Batch means on batch sums, with the ratio estimator linearized around
    # the full-run value; averaging per-batch ratios is biased for short batches.
    per_source = [float(a["area"].sum() / a["length"].sum()) for a in kept]
    n_batches = min(config.batch_count, min(len(a) for a in kept))
    resid = np.zeros((len(kept), n_batches))
    for j, a in enumerate(kept):
        chunks = np.array_split(a, n_batches)
        q_b = np.array([c["area"].sum() for c in chunks])
        l_b = np.array([c["length"].sum() for c in chunks])
        resid[j] = (q_b - per_source[j] * l_b) / l_b.mean()

    def _se(r):
        b = len(r)
        return float(np.sqrt(np.sum(r * r) / (b * (b - 1)))) if b > 1 else float("nan")

    return SimReport(
        per_source_avg_aoi=per_source,
        collective_avg_aoi=float(np.mean(per_source)),
        delta_samples=[a["delta_end"].copy() for a in kept],
        epochs_completed=[len(a) for a in kept],
        attempts_total=int(attempts),
        stderr_aoi=_se(resid.mean(axis=0)),
        seed=int(config.seed),
        sim_horizon=float(sim_time),
        per_source_stderr=[_se(row) for row in resid],
        successes_total=int(successes),
        epoch_log={j: a for j, a in enumerate(kept)},
    )


def empirical_cdf(samples, delta):
    """Fraction of ``samples`` at or below ``delta`` (``delta`` may be an array)."""
    x = np.sort(np.asarray(samples, dtype=float).ravel())
    if x.size == 0:
        raise EmptySamples("empirical_cdf needs at least one sample")
    out = np.searchsorted(x, delta, side="right") / x.size
    return out if np.ndim(out) else float(out)


def write_epoch_log(report: SimReport, path) -> Path:
    """Write post-warmup epochs as CSV: ``source,delta_start,length,area,attempts``.

    Sources are numbered from 1.
    """
    path = Path(path)
    with path.open("w", newline="\n") as fh:
        fh.write(",".join(EPOCH_LOG_COLUMNS) + "\n")
        for j, arr in sorted(report.epoch_log.items()):
            for rec in arr:
                fh.write(
                    f"{j + 1},{rec['delta_start']:.12g},{rec['length']:.12g},"
                    f"{rec['area']:.12g},{int(rec['attempts'])}\n"
                )
    return path
