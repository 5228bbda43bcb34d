"""Shared domain types and validation for the energy-harvesting AoI model.

All times are in one abstract unit and all rates are events per that unit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np


class ModelError(ValueError):
    """Base class for invalid model inputs.

    ``field`` names the offending parameter so front ends can point at it.
    """

    field: str | None = None

    def __init__(self, message: str, field: str | None = None):
        super().__init__(message)
        if field is not None:
            self.field = field


class NonPositiveRate(ModelError):
    pass


class ErasureOutOfRange(ModelError):
    field = "q"


class EmptySourceList(ModelError):
    field = "lambda_d"


class NegativeThreshold(ModelError):
    field = "gamma"


class NegativeDelta(ModelError):
    pass


class InvalidConfig(ModelError):
    pass


class NonConvergence(RuntimeError):
    pass


class RequiresSingleSource(ModelError):
    field = "lambda_d"


class EmptySamples(ValueError):
    pass


class DegenerateObjective(ArithmeticError):
    pass


@dataclass(frozen=True)
class SystemParams:
    """Exogenous constants of the system.

    Parameters
    ----------
    lambda_e : float
        Energy arrival rate.
    lambda_d : tuple of float
        Data arrival rate of each source; its length is the number of sources.
    q : float
        Erasure probability of every transmission attempt, in ``[0, 1)``.
    """

    lambda_e: float
    lambda_d: tuple[float, ...]
    q: float = 0.0

    def __post_init__(self):
        rates = self.lambda_d
        if np.ndim(rates) == 0:
            rates = (rates,)
        object.__setattr__(self, "lambda_d", tuple(float(r) for r in rates))
        object.__setattr__(self, "lambda_e", float(self.lambda_e))
        object.__setattr__(self, "q", float(self.q))

        if not (self.lambda_e > 0) or not math.isfinite(self.lambda_e):
            raise NonPositiveRate(
                f"lambda_e must be a positive finite rate, got {self.lambda_e}",
                field="lambda_e",
            )
        if len(self.lambda_d) == 0:
            raise EmptySourceList("lambda_d must list at least one source rate")
        for j, rate in enumerate(self.lambda_d):
            if not (rate > 0) or not math.isfinite(rate):
                raise NonPositiveRate(
                    f"lambda_d[{j}] must be a positive finite rate, got {rate}",
                    field="lambda_d",
                )
        if not (0.0 <= self.q < 1.0):
            raise ErasureOutOfRange(f"q must be in [0, 1) (q must be < 1), got {self.q}")

    @property
    def n(self) -> int:
        return len(self.lambda_d)

    @property
    def is_symmetric(self) -> bool:
        return len(set(self.lambda_d)) == 1

    def source(self, j: int) -> "SystemParams":
        """Single-source view of source ``j`` (0-based)."""
        return SystemParams(self.lambda_e, (self.lambda_d[j],), self.q)

    def with_q(self, q: float) -> "SystemParams":
        return SystemParams(self.lambda_e, self.lambda_d, q)

    @classmethod
    def symmetric(cls, lambda_e: float, lambda_d: float, n: int, q: float = 0.0):
        if int(n) < 1:
            raise EmptySourceList(f"number of sources must be >= 1, got {n}", field="n")
        return cls(lambda_e, (float(lambda_d),) * int(n), q)


def validate_params(lambda_e, lambda_d, q=0.0) -> SystemParams:
    """Build a :class:`SystemParams`, raising a :class:`ModelError` subclass on bad input."""
    if isinstance(lambda_d, str):
        lambda_d = parse_float_list(lambda_d, "lambda_d")
    return SystemParams(lambda_e, lambda_d, q)


@dataclass(frozen=True)
class ThresholdPolicy:
    """Wait until at least ``gamma`` time units have passed since the last attempt.

    ``gamma = 0`` is the zero-wait policy.
    """

    gamma: float = 0.0

    def __post_init__(self):
        g = float(self.gamma)
        if not (g >= 0) or not math.isfinite(g):
            raise NegativeThreshold(f"gamma must be a finite non-negative time, got {self.gamma}")
        object.__setattr__(self, "gamma", g)

    def wait(self, t):
        """Waiting function ``max(t, gamma)``."""
        return np.maximum(t, self.gamma)


@dataclass(frozen=True)
class EpochMoments:
    mean_w: float
    mean_w_sq: float
    mean_L: float
    mean_L_sq: float
    mean_delta: float


@dataclass
class SimReport:
    """Outcome of one simulation run.

    ``epoch_log`` maps each source index to a structured array with fields
    ``delta_start``, ``length``, ``area``, ``attempts`` (post-warmup epochs only).
    """

    per_source_avg_aoi: list[float]
    collective_avg_aoi: float
    delta_samples: list[np.ndarray]
    epochs_completed: list[int]
    attempts_total: int
    stderr_aoi: float
    seed: int
    sim_horizon: float
    per_source_stderr: list[float] = field(default_factory=list)
    successes_total: int = 0
    energy_dropped: int = 0
    epoch_log: dict[int, np.ndarray] = field(default_factory=dict)
    trace: list[tuple] | None = None


@dataclass(frozen=True)
class SweepRow:
    params: SystemParams
    gamma_star: float
    aoi_at_star: float
    aoi_at_zero: float
    gain_percent: float


# -- flat key=value text format ---------------------------------------------

def parse_float_list(text: str, name: str = "value") -> tuple[float, ...]:
    parts = [p.strip() for p in str(text).split(",") if p.strip()]
    if not parts:
        raise EmptySourceList(f"{name} must be a non-empty comma-separated list", field=name)
    try:
        return tuple(float(p) for p in parts)
    except ValueError:
        raise InvalidConfig(f"{name}: cannot parse {text!r} as a list of numbers", field=name) from None


def parse_kv(text: str) -> dict[str, str]:
    """Parse ``key = value`` lines; blank lines and ``#`` comments are ignored.

    Keys are normalized so ``lambda-e`` and ``lambda_e`` are the same key.
    """
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise InvalidConfig(f"line {lineno}: expected key=value, got {raw!r}")
        key, value = line.split("=", 1)
        out[key.strip().replace("-", "_").lower()] = value.strip()
    return out


def format_kv(items: Mapping[str, object] | Iterable[tuple[str, object]]) -> str:
    if isinstance(items, Mapping):
        items = items.items()
    lines = []
    for key, value in items:
        if isinstance(value, (list, tuple)):
            value = ",".join(_fmt_exact(v) for v in value)
        elif isinstance(value, float):
            value = _fmt_exact(value)
        lines.append(f"{key}={value}")
    return "\n".join(lines) + "\n"


def _fmt_exact(v) -> str:
    return repr(float(v)) if isinstance(v, (float, np.floating)) else str(v)


def params_to_text(params: SystemParams, **extra) -> str:
    """Serialize params (and optional extra keys such as gamma or seed)."""
    items: list[tuple[str, object]] = [
        ("lambda_e", params.lambda_e),
        ("lambda_d", params.lambda_d),
        ("q", params.q),
    ]
    items.extend(extra.items())
    return format_kv(items)


def params_from_text(text: str) -> SystemParams:
    kv = parse_kv(text)
    missing = [k for k in ("lambda_e", "lambda_d") if k not in kv]
    if missing:
        raise InvalidConfig(f"missing key(s): {', '.join(missing)}", field=missing[0])
    try:
        lambda_e = float(kv["lambda_e"])
        q = float(kv.get("q", "0"))
    except ValueError as exc:
        raise InvalidConfig(str(exc)) from None
    return validate_params(lambda_e, parse_float_list(kv["lambda_d"], "lambda_d"), q)

